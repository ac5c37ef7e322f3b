#include "relbn/database.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <set>
#include <stdexcept>

namespace relbn {

DatabaseInstance::DatabaseInstance(Schema schema) : schema_(std::move(schema)) {
  schema_.finalize();
  entities_.resize(schema_.entity_types().size());
  for (std::size_t e = 0; e < entities_.size(); ++e) {
    entities_[e].columns.resize(schema_.entity_types()[e].attributes.size());
  }
  relationships_.resize(schema_.relationships().size());
  for (std::size_t r = 0; r < relationships_.size(); ++r) {
    relationships_[r].arity = schema_.relationships()[r].argument_types.size();
    relationships_[r].attr_columns.resize(schema_.relationships()[r].attributes.size());
  }
}

std::string DatabaseInstance::pack_key(std::span<const ConstantId> args) {
  std::string key(args.size() * sizeof(ConstantId), '\0');
  std::memcpy(key.data(), args.data(), key.size());
  return key;
}

ConstantId DatabaseInstance::add_entity(std::size_t type, std::string name, std::vector<Value> attributes) {
  auto& table = entities_.at(type);
  const auto& decl = schema_.entity_types()[type];
  if (attributes.size() != decl.attributes.size()) {
    throw std::invalid_argument("entity " + name + ": expected " + std::to_string(decl.attributes.size()) +
                                " attribute values");
  }
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    if (attributes[a] < 0 || static_cast<std::size_t>(attributes[a]) >= decl.attributes[a].domain.size()) {
      throw std::invalid_argument("entity " + name + ": value outside the domain of " + decl.attributes[a].name);
    }
  }
  const auto id = static_cast<ConstantId>(table.names.size());
  if (!table.index.emplace(name, id).second) {
    throw std::invalid_argument("duplicate " + decl.name + " constant '" + name + "'");
  }
  table.names.push_back(std::move(name));
  for (std::size_t a = 0; a < attributes.size(); ++a) table.columns[a].push_back(attributes[a]);
  return id;
}

const std::string& DatabaseInstance::constant_name(std::size_t type, ConstantId c) const {
  return entities_.at(type).names.at(static_cast<std::size_t>(c));
}

std::optional<ConstantId> DatabaseInstance::find_constant(std::size_t type, std::string_view name) const {
  const auto& idx = entities_.at(type).index;
  auto it = idx.find(std::string(name));
  if (it == idx.end()) return std::nullopt;
  return it->second;
}

std::size_t DatabaseInstance::add_tuple(std::size_t rel, std::vector<ConstantId> arguments,
                                        std::vector<Value> attributes) {
  auto& table = relationships_.at(rel);
  const auto& decl = schema_.relationships()[rel];
  if (arguments.size() != table.arity) throw std::invalid_argument(decl.name + ": wrong tuple arity");
  for (std::size_t i = 0; i < arguments.size(); ++i) {
    if (arguments[i] < 0 ||
        static_cast<std::size_t>(arguments[i]) >= entity_count(decl.argument_types[i])) {
      throw std::invalid_argument(decl.name + ": argument references an unknown constant");
    }
  }
  if (attributes.size() != decl.attributes.size()) {
    throw std::invalid_argument(decl.name + ": expected " + std::to_string(decl.attributes.size()) +
                                " attribute values");
  }
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    if (attributes[a] < 0 || static_cast<std::size_t>(attributes[a]) >= decl.attributes[a].domain.size()) {
      throw std::invalid_argument(decl.name + ": value outside the domain of " + decl.attributes[a].name);
    }
  }
  const std::size_t row = table.count;
  if (!table.index.emplace(pack_key(arguments), row).second) {
    throw std::invalid_argument(decl.name + ": duplicate tuple");
  }
  table.keys.insert(table.keys.end(), arguments.begin(), arguments.end());
  for (std::size_t a = 0; a < attributes.size(); ++a) table.attr_columns[a].push_back(attributes[a]);
  ++table.count;
  return row;
}

std::span<const ConstantId> DatabaseInstance::tuple(std::size_t rel, std::size_t row) const {
  const auto& table = relationships_.at(rel);
  return std::span<const ConstantId>(table.keys).subspan(row * table.arity, table.arity);
}

std::optional<std::size_t> DatabaseInstance::find_tuple(std::size_t rel,
                                                        std::span<const ConstantId> arguments) const {
  const auto& table = relationships_.at(rel);
  auto it = table.index.find(pack_key(arguments));
  if (it == table.index.end()) return std::nullopt;
  return it->second;
}

Value DatabaseInstance::value(FunctionTerm term, std::span<const ConstantId> arguments) const {
  const auto& f = schema_.function(term);
  switch (f.kind) {
    case FunctionKind::EntityAttribute:
      return entity_value(f.owner, f.attribute, arguments[0]);
    case FunctionKind::Relationship:
      return find_tuple(f.owner, arguments) ? kTrue : kFalse;
    case FunctionKind::RelationshipAttribute: {
      auto row = find_tuple(f.owner, arguments);
      return row ? tuple_value(f.owner, f.attribute, *row) : kBottom;
    }
  }
  return kBottom;
}

void DatabaseInstance::validate() const {
  for (std::size_t e = 0; e < entities_.size(); ++e) {
    const auto& t = entities_[e];
    if (t.index.size() != t.names.size()) throw std::logic_error("unique names violated");
    for (std::size_t a = 0; a < t.columns.size(); ++a) {
      const auto dom = schema_.entity_types()[e].attributes[a].domain.size();
      if (t.columns[a].size() != t.names.size()) throw std::logic_error("ragged entity column");
      for (auto v : t.columns[a]) {
        if (v < 0 || static_cast<std::size_t>(v) >= dom) throw std::logic_error("entity attribute outside domain");
      }
    }
  }
  for (std::size_t r = 0; r < relationships_.size(); ++r) {
    const auto& t = relationships_[r];
    const auto& decl = schema_.relationships()[r];
    if (t.index.size() != t.count) throw std::logic_error("duplicate relationship tuple");
    for (std::size_t row = 0; row < t.count; ++row) {
      auto args = tuple(r, row);
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] < 0 || static_cast<std::size_t>(args[i]) >= entity_count(decl.argument_types[i])) {
          throw std::logic_error("foreign key violated in " + decl.name);
        }
      }
    }
    for (std::size_t a = 0; a < t.attr_columns.size(); ++a) {
      const auto dom = decl.attributes[a].domain.size();
      if (t.attr_columns[a].size() != t.count) throw std::logic_error("ragged relationship column");
      // Linked tuples never carry ⊥; unlinked ones are ⊥ by construction.
      for (auto v : t.attr_columns[a]) {
        if (v < 0 || static_cast<std::size_t>(v) >= dom) throw std::logic_error("relationship attribute outside domain");
      }
    }
  }
}

bool operator==(const DatabaseInstance& a, const DatabaseInstance& b) {
  if (!(a.schema_ == b.schema_)) return false;
  for (std::size_t e = 0; e < a.entities_.size(); ++e) {
    const auto& x = a.entities_[e];
    const auto& y = b.entities_[e];
    if (x.names.size() != y.names.size()) return false;
    for (std::size_t i = 0; i < x.names.size(); ++i) {
      auto j = b.find_constant(e, x.names[i]);
      if (!j) return false;
      for (std::size_t col = 0; col < x.columns.size(); ++col) {
        if (x.columns[col][i] != y.columns[col][static_cast<std::size_t>(*j)]) return false;
      }
    }
  }
  const auto& schema = a.schema_;
  for (std::size_t r = 0; r < a.relationships_.size(); ++r) {
    if (a.tuple_count(r) != b.tuple_count(r)) return false;
    const auto& types = schema.relationships()[r].argument_types;
    for (std::size_t row = 0; row < a.tuple_count(r); ++row) {
      auto args = a.tuple(r, row);
      std::vector<ConstantId> mapped(args.size());
      for (std::size_t i = 0; i < args.size(); ++i) {
        auto c = b.find_constant(types[i], a.constant_name(types[i], args[i]));
        if (!c) return false;
        mapped[i] = *c;
      }
      auto other = b.find_tuple(r, mapped);
      if (!other) return false;
      for (std::size_t col = 0; col < a.relationships_[r].attr_columns.size(); ++col) {
        if (a.tuple_value(r, col, row) != b.tuple_value(r, col, *other)) return false;
      }
    }
  }
  return true;
}

bool eval_ground_literal(const DatabaseInstance& db, const GroundLiteral& lit) {
  const auto v = db.value(lit.literal.term, lit.arguments);
  return lit.literal.negated ? v != lit.literal.value : v == lit.literal.value;
}

GroundLiteral ground_literal(const DatabaseInstance& db, std::string_view function,
                             const std::vector<std::string>& constants, std::string_view value, bool negated) {
  const auto& schema = db.schema();
  auto term = schema.find_function(function);
  if (!term) throw std::invalid_argument("unknown function '" + std::string(function) + "'");
  const auto& types = schema.variables_of(*term);
  if (constants.size() != types.size()) throw std::invalid_argument("arity mismatch for " + std::string(function));
  GroundLiteral out;
  for (std::size_t i = 0; i < types.size(); ++i) {
    auto c = db.find_constant(types[i], constants[i]);
    if (!c) throw std::invalid_argument("unknown constant '" + constants[i] + "'");
    out.arguments.push_back(*c);
  }
  auto v = schema.parse_value(*term, value);
  if (!v) throw std::invalid_argument("value '" + std::string(value) + "' outside the domain of " + std::string(function));
  out.literal = make_literal(schema, *term, *v, negated);
  return out;
}

std::vector<int> discretize_indices(std::span<const double> values, int bins) {
  if (bins < 1) throw std::invalid_argument("bin count must be at least 1");
  if (values.empty()) throw std::invalid_argument("cannot discretize an empty column");
  std::set<double> distinct(values.begin(), values.end());
  if (static_cast<std::size_t>(bins) > distinct.size()) {
    throw std::invalid_argument("requested " + std::to_string(bins) + " bins but the column has only " +
                                std::to_string(distinct.size()) + " distinct values; use at most " +
                                std::to_string(distinct.size()) + " bins");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<int> out(values.size());
  const auto n = values.size();
  for (std::size_t pos = 0; pos < n; ++pos) {
    out[order[pos]] = static_cast<int>(pos * static_cast<std::size_t>(bins) / n);
  }
  return out;
}

std::vector<std::string> discretize(std::span<const double> values, int bins) {
  auto idx = discretize_indices(values, bins);
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back("b" + std::to_string(i + 1));
  return out;
}

}  // namespace relbn
