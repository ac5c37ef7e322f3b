#include "relbn/model.hpp"

#include <fstream>
#include <sstream>

#include "relbn/database.hpp"

namespace relbn {

namespace {
constexpr std::string_view kModelHeader = "relbn-model 1";
constexpr std::string_view kSchemaEnd = "end-schema";
}  // namespace

Variable jbn_variable(const Schema& schema, FunctionTerm term) {
  const auto& f = schema.function(term);
  Variable v;
  v.name = schema.term_string(term);
  v.states = schema.domain(term);
  switch (f.kind) {
    case FunctionKind::EntityAttribute: v.role = "entity-attribute"; break;
    case FunctionKind::Relationship: v.role = "relationship"; break;
    case FunctionKind::RelationshipAttribute:
      v.role = "relationship-attribute:" + schema.relationships()[f.owner].name;
      v.states.emplace_back(kBottomToken);
      break;
  }
  return v;
}

std::vector<Variable> jbn_variables(const Schema& schema) {
  std::vector<Variable> out;
  for (auto t : schema.all_terms()) out.push_back(jbn_variable(schema, t));
  return out;
}

std::vector<std::string> jbn_node_names(const Schema& schema) {
  std::vector<std::string> out;
  for (auto t : schema.all_terms()) out.push_back(schema.term_string(t));
  return out;
}

int state_of_value(const Schema& schema, FunctionTerm term, Value v) {
  if (v == kBottom) {
    if (!schema.is_relationship_attribute(term)) throw std::invalid_argument("_BOT_ on " + schema.term_string(term));
    return static_cast<int>(schema.domain_size(term));
  }
  if (v < 0 || static_cast<std::size_t>(v) >= schema.domain_size(term)) {
    throw std::out_of_range("value outside the domain of " + schema.term_string(term));
  }
  return v;
}

Value value_of_state(const Schema& schema, FunctionTerm term, int state) {
  if (schema.is_relationship_attribute(term) && static_cast<std::size_t>(state) == schema.domain_size(term)) {
    return kBottom;
  }
  return state;
}

FunctionTerm JbnModel::term(std::size_t node) const {
  auto t = schema.parse_term(net.variable(node).name);
  if (!t) throw std::logic_error("node " + net.variable(node).name + " is not a function term");
  return *t;
}

std::size_t JbnModel::node(FunctionTerm t) const {
  auto n = net.find(schema.term_string(t));
  if (!n) throw std::out_of_range("model has no node " + schema.term_string(t));
  return *n;
}

BayesNet make_jbn(const Schema& schema, const Dag& dag) {
  std::vector<Variable> vars;
  for (const auto& name : dag.nodes()) {
    auto t = schema.parse_term(name);
    if (!t) throw std::invalid_argument("DAG node " + name + " is not a function term of the schema");
    vars.push_back(jbn_variable(schema, *t));
    // The canonical spelling keeps node names unique across aliases.
    if (vars.back().name != name) throw std::invalid_argument("DAG node " + name + " must be spelled " + vars.back().name);
  }
  return BayesNet(std::move(vars), dag);
}

std::string write_model(const JbnModel& model) {
  std::ostringstream out;
  out << kModelHeader << "\nschema\n" << schema_to_manifest(model.schema, false) << kSchemaEnd << "\n"
      << write_network(model.net);
  return out.str();
}

JbnModel read_model(std::string_view text, const std::string& origin) {
  std::size_t pos = 0;
  std::size_t lineno = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= text.size()) return std::nullopt;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };
  auto header = next_line();
  if (!header || *header != kModelHeader) throw std::invalid_argument(origin + ":1: not a relbn model file");
  auto schema_kw = next_line();
  if (!schema_kw || *schema_kw != "schema") throw std::invalid_argument(origin + ":2: expected 'schema'");
  const auto schema_begin = pos;
  const auto schema_first_line = lineno + 1;
  std::size_t schema_end = std::string_view::npos;
  while (auto line = next_line()) {
    if (*line == kSchemaEnd) {
      schema_end = pos;
      break;
    }
  }
  if (schema_end == std::string_view::npos) throw std::invalid_argument(origin + ": schema block has no 'end-schema'");
  // Pad with blank lines so schema errors report model-file line numbers.
  std::string schema_text(schema_first_line - 1, '\n');
  schema_text += text.substr(schema_begin, schema_end - schema_begin - kSchemaEnd.size() - 1);
  JbnModel model;
  model.schema = parse_schema(schema_text, origin);
  model.schema.finalize();
  model.net = read_network(text.substr(pos), origin, lineno + 1);
  for (std::size_t i = 0; i < model.net.size(); ++i) {
    const auto& v = model.net.variable(i);
    auto t = model.schema.parse_term(v.name);
    if (!t) throw std::invalid_argument(origin + ": node " + v.name + " is not a term of the schema");
    if (!(jbn_variable(model.schema, *t) == v)) {
      throw std::invalid_argument(origin + ": node " + v.name + " disagrees with the schema's domain");
    }
  }
  return model;
}

void save_model(const JbnModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << write_model(model);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

JbnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open model file");
  std::stringstream buf;
  buf << in.rdbuf();
  return read_model(buf.str(), path.string());
}

}  // namespace relbn
