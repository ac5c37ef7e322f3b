#include "relbn/query.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "relbn/bayes_net.hpp"

namespace relbn {

// ---------------------------------------------------------------- parsing

namespace {

bool label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '+' || c == '-';
}

class Parser {
 public:
  Parser(const Schema& schema, std::string_view text) : schema_(schema), text_(text) {}

  Query query() {
    Query q;
    skip();
    const auto start = pos_;
    if (ident() != "P") throw ParseError("a query starts with P(", start);
    expect('(');
    const auto target_at = pos_;
    q.target = literal();
    if (peek() == '|') {
      ++pos_;
      q.evidence = conjunction_body();
    }
    expect(')');
    end();
    for (std::size_t i = 0; i < q.evidence.literals.size(); ++i) {
      if (q.evidence.literals[i].term == q.target.term) {
        throw ParseError("target " + schema_.term_string(q.target.term) + " repeated in the evidence", offsets_[i]);
      }
    }
    Conjunction all = q.evidence;
    all.literals.push_back(q.target);
    try {
      validate_conjunction(schema_, all);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), target_at);
    }
    return q;
  }

  Conjunction conjunction() {
    skip();
    auto c = conjunction_body();
    end();
    return c;
  }

 private:
  Conjunction conjunction_body() {
    Conjunction c;
    const auto start = pos_;
    offsets_.clear();
    while (true) {
      skip();
      offsets_.push_back(pos_);
      c.literals.push_back(literal());
      if (peek() != ',') break;
      ++pos_;
    }
    try {
      validate_conjunction(schema_, c);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), start);
    }
    return c;
  }

  Literal literal() {
    skip();
    bool negated = false;
    if (peek() == '!') {
      negated = true;
      ++pos_;
    }
    skip();
    const auto name_at = pos_;
    const auto name = ident();
    auto term = schema_.find_function(name);
    if (!term) throw ParseError("unknown function '" + name + "'", name_at);
    const auto& types = schema_.variables_of(*term);
    expect('(');
    std::vector<std::pair<std::string, std::size_t>> args;
    while (true) {
      skip();
      const auto at = pos_;
      args.emplace_back(ident(), at);
      if (peek() != ',') break;
      ++pos_;
    }
    expect(')');
    if (args.size() != types.size()) {
      throw ParseError("arity mismatch: " + name + " takes " + std::to_string(types.size()) + " arguments, got " +
                           std::to_string(args.size()),
                       name_at);
    }
    for (std::size_t i = 0; i < args.size(); ++i) {
      const auto& expected = schema_.variable_name(types[i]);
      if (args[i].first != expected) {
        throw ParseError("argument " + std::to_string(i + 1) + " of " + name + " must be the variable " + expected +
                             " of " + schema_.entity_types()[types[i]].name,
                         args[i].second);
      }
    }
    Value value = kTrue;
    if (peek() == '=') {
      ++pos_;
      skip();
      const auto at = pos_;
      const auto label = ident();
      auto v = schema_.parse_value(*term, label);
      if (!v) throw ParseError("value '" + label + "' outside the domain of " + schema_.term_string(*term), at);
      value = *v;
    } else if (!schema_.is_relationship(*term)) {
      throw ParseError(schema_.term_string(*term) + " needs a value", pos_);
    }
    return make_literal(schema_, *term, value, negated);
  }

  char peek() {
    skip();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  void expect(char c) {
    if (peek() != c) {
      throw ParseError(std::string("expected '") + c + "'" +
                           (pos_ < text_.size() ? std::string(", found '") + text_[pos_] + "'" : " at end of input"),
                       pos_);
    }
    ++pos_;
  }
  std::string ident() {
    skip();
    const auto start = pos_;
    while (pos_ < text_.size() && label_char(text_[pos_])) ++pos_;
    if (start == pos_) {
      throw ParseError(pos_ < text_.size() ? std::string("unexpected '") + text_[pos_] + "'" : "unexpected end of input",
                       pos_);
    }
    return std::string(text_.substr(start, pos_ - start));
  }
  void end() {
    skip();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
  }

  const Schema& schema_;
  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<std::size_t> offsets_;
};

}  // namespace

Query parse_query(const Schema& schema, std::string_view text) { return Parser(schema, text).query(); }

Conjunction parse_conjunction(const Schema& schema, std::string_view text) {
  return Parser(schema, text).conjunction();
}

std::string to_string(const Schema& schema, const Query& q) {
  std::string out = "P(" + to_string(schema, q.target);
  if (!q.evidence.empty()) out += " | " + to_string(schema, q.evidence);
  return out + ")";
}

// ---------------------------------------------------------------- estimates

Rational direct_estimate(FrequencyEngine& engine, const Query& q) {
  Conjunction joint = q.evidence;
  joint.literals.push_back(q.target);
  const auto& schema = engine.database().schema();
  const auto vars = conjunction_variables(schema, joint);
  const auto both = engine.frequency_over(joint, vars);
  const auto ev = engine.frequency_over(q.evidence, vars);
  if (ev.count == 0) throw ZeroEvidenceError("evidence of " + to_string(schema, q) + " never holds in the database");
  return Rational(both.count, ev.count);
}

Rational direct_estimate(const DatabaseInstance& db, const Query& q) {
  FrequencyEngine engine(db);
  return direct_estimate(engine, q);
}

namespace {

std::vector<char> literal_mask(const JbnModel& model, const Literal& lit) {
  const auto node = model.node(lit.term);
  std::vector<char> mask(model.net.cardinality(node), 0);
  const auto s = static_cast<std::size_t>(state_of_value(model.schema, lit.term, lit.value));
  if (lit.negated) {
    std::fill(mask.begin(), mask.end(), 1);
    mask[s] = 0;
  } else {
    mask[s] = 1;
  }
  return mask;
}

}  // namespace

double model_estimate(const JbnModel& model, const Query& q) {
  MaskedEvidence evidence;
  for (const auto& lit : q.evidence.literals) {
    const auto node = model.node(lit.term);
    auto mask = literal_mask(model, lit);
    auto [it, inserted] = evidence.emplace(node, mask);
    if (!inserted) {
      for (std::size_t i = 0; i < mask.size(); ++i) it->second[i] = static_cast<char>(it->second[i] && mask[i]);
    }
  }
  const auto target = model.node(q.target.term);
  const auto posterior = infer_masked(model.net, target, evidence);
  const auto mask = literal_mask(model, q.target);
  double p = 0;
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    if (mask[i]) p += posterior[i];
  }
  return p;
}

// ---------------------------------------------------------------- generation

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  // Uniform in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    while (true) {
      const auto x = engine_();
      if (x < limit) return x % n;
    }
  }
  // Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

bool structurally_possible(const Schema& schema, const Conjunction& c) {
  std::map<std::size_t, std::optional<bool>> linked;  // per relationship
  for (const auto& lit : c.literals) {
    auto r = schema.relationship_of(lit.term);
    if (!r || lit.negated) continue;
    const bool l = schema.is_relationship(lit.term) ? lit.value == kTrue : lit.value != kBottom;
    auto& slot = linked[*r];
    if (slot && *slot != l) return false;
    slot = l;
  }
  return true;
}

}  // namespace

std::vector<Query> generate_queries(const JbnModel& model, std::size_t n, std::uint64_t seed,
                                    const std::function<bool(const Query&)>& accept) {
  const auto& net = model.net;
  if (n < 1) throw std::invalid_argument("query count must be at least 1");
  if (net.size() < 4) throw std::invalid_argument("query generation needs a model with at least 4 nodes");
  Rng rng(seed);
  auto draw_literal = [&](std::size_t node) {
    const auto term = model.term(node);
    const auto state = static_cast<int>(rng.below(net.cardinality(node)));
    return Literal{term, value_of_state(model.schema, term, state), false};
  };
  std::vector<Query> out;
  const std::size_t max_attempts = 10000;
  while (out.size() < n) {
    bool found = false;
    for (std::size_t attempt = 0; attempt < max_attempts && !found; ++attempt) {
      Query q;
      const auto target = static_cast<std::size_t>(rng.below(net.size()));
      q.target = draw_literal(target);
      const auto k = 1 + rng.below(3);
      std::vector<std::size_t> others;
      for (std::size_t i = 0; i < net.size(); ++i) {
        if (i != target) others.push_back(i);
      }
      for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(others.size() - i));
        std::swap(others[i], others[j]);
        q.evidence.literals.push_back(draw_literal(others[i]));
      }
      if (!structurally_possible(model.schema, q.evidence)) continue;
      if (accept && !accept(q)) continue;
      out.push_back(std::move(q));
      found = true;
    }
    if (!found) throw std::runtime_error("no acceptable query found after " + std::to_string(max_attempts) + " draws");
  }
  return out;
}

// ---------------------------------------------------------------- benchmark

std::optional<double> ComparisonRow::abs_diff() const {
  if (!p_model || !p_direct) return std::nullopt;
  return std::abs(*p_model - *p_direct);
}

std::vector<ComparisonRow> benchmark(const DatabaseInstance& db, const JbnModel& model, std::size_t n,
                                     std::uint64_t seed) {
  if (!(db.schema() == model.schema)) throw std::invalid_argument("model and database schemas differ");
  FrequencyEngine engine(db);
  auto evidence_holds = [&](const Query& q) { return engine.frequency(q.evidence).count > 0; };
  const auto queries = generate_queries(model, n, seed, evidence_holds);
  using clock = std::chrono::steady_clock;
  std::vector<ComparisonRow> rows;
  for (const auto& q : queries) {
    ComparisonRow row;
    row.query = to_string(model.schema, q);
    try {
      auto t0 = clock::now();
      row.p_model = model_estimate(model, q);
      auto t1 = clock::now();
      row.p_direct = boost::rational_cast<double>(direct_estimate(engine, q));
      auto t2 = clock::now();
      row.t_model_s = std::chrono::duration<double>(t1 - t0).count();
      row.t_direct_s = std::chrono::duration<double>(t2 - t1).count();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

BenchmarkSummary summarize(const std::vector<ComparisonRow>& rows) {
  BenchmarkSummary s;
  s.rows = rows.size();
  std::size_t ok = 0;
  for (const auto& r : rows) {
    auto d = r.abs_diff();
    if (!d) {
      ++s.failed;
      continue;
    }
    ++ok;
    s.mean_abs_diff += *d;
    s.max_abs_diff = std::max(s.max_abs_diff, *d);
    s.mean_t_model_s += r.t_model_s;
    s.mean_t_direct_s += r.t_direct_s;
  }
  if (ok) {
    s.mean_abs_diff /= static_cast<double>(ok);
    s.mean_t_model_s /= static_cast<double>(ok);
    s.mean_t_direct_s /= static_cast<double>(ok);
  }
  return s;
}

std::string benchmark_csv(const std::vector<ComparisonRow>& rows, bool timing) {
  std::ostringstream out;
  out << "query,p_model,p_direct,abs_diff,t_model_s,t_direct_s\n";
  for (const auto& r : rows) {
    std::string q = "\"";
    for (char c : r.query) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    q += '"';
    out << q << ',';
    if (auto d = r.abs_diff()) {
      out << format_double(*r.p_model) << ',' << format_double(*r.p_direct) << ',' << format_double(*d) << ','
          << (timing ? format_double(r.t_model_s) : "0") << ',' << (timing ? format_double(r.t_direct_s) : "0");
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
  return out.str();
}

std::string format_summary(const BenchmarkSummary& s) {
  std::ostringstream out;
  out << "queries: " << s.rows << "\nfailed: " << s.failed << "\nmean_abs_diff: " << format_double(s.mean_abs_diff)
      << "\nmax_abs_diff: " << format_double(s.max_abs_diff) << "\nmean_t_model_s: " << format_double(s.mean_t_model_s)
      << "\nmean_t_direct_s: " << format_double(s.mean_t_direct_s) << '\n';
  return out.str();
}

// ---------------------------------------------------------------- sampling

DatabaseInstance sample_database(const JbnModel& model, const std::map<std::string, std::size_t>& sizes,
                                 std::uint64_t seed) {
  const auto& schema = model.schema;
  const auto& net = model.net;
  for (const auto& [name, size] : sizes) {
    if (!schema.find_entity_type(name)) throw std::invalid_argument("unknown entity type '" + name + "' in sizes");
  }
  std::vector<std::size_t> count(schema.entity_types().size());
  for (std::size_t e = 0; e < count.size(); ++e) {
    const auto& name = schema.entity_types()[e].name;
    auto it = sizes.find(name);
    if (it == sizes.end()) throw std::invalid_argument("no size given for entity type " + name);
    if (it->second == 0) throw std::invalid_argument("entity type " + name + " must have at least one entity");
    count[e] = it->second;
  }
  for (auto t : schema.all_terms()) model.node(t);  // every term must be a node
  if (!net.fitted()) throw std::invalid_argument("model has no CP-tables; fit it first");

  Rng rng(seed);
  auto draw = [&](std::span<const double> dist) {
    const double u = rng.unit();
    double acc = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      acc += dist[i];
      if (u < acc) return static_cast<int>(i);
    }
    for (std::size_t i = dist.size(); i-- > 0;) {
      if (dist[i] > 0) return static_cast<int>(i);
    }
    return 0;
  };
  const auto order = net.dag().topological_order();
  auto parent_states = [&](std::size_t node, const auto& state_of) {
    std::vector<int> pv;
    for (auto p : net.dag().parents(node)) pv.push_back(state_of(p));
    return pv;
  };

  DatabaseInstance db(schema);
  // Entities.
  for (std::size_t e = 0; e < count.size(); ++e) {
    std::vector<std::size_t> nodes;
    for (auto n : order) {
      const auto& f = schema.function(model.term(n));
      if (f.kind != FunctionKind::EntityAttribute || f.owner != e) continue;
      for (auto p : net.dag().parents(n)) {
        const auto& pf = schema.function(model.term(p));
        if (pf.kind != FunctionKind::EntityAttribute || pf.owner != e) {
          throw std::invalid_argument("cannot sample " + net.variable(n).name + ": parent " + net.variable(p).name +
                                      " is not an attribute of the same entity type");
        }
      }
      nodes.push_back(n);
    }
    const auto& decl = schema.entity_types()[e];
    for (std::size_t i = 0; i < count[e]; ++i) {
      std::vector<Value> values(decl.attributes.size());
      auto state_of = [&](std::size_t p) { return values[schema.function(model.term(p)).attribute]; };
      for (auto n : nodes) {
        const auto& table = net.cpt(n);
        values[schema.function(model.term(n)).attribute] = draw(table.row(table.row_index(parent_states(n, state_of))));
      }
      db.add_entity(e, decl.name + "_" + std::to_string(i), std::move(values));
    }
  }
  // Relationships.
  for (std::size_t r = 0; r < schema.relationships().size(); ++r) {
    const auto& decl = schema.relationships()[r];
    const auto ind = model.node(schema.relationship_term(r));
    if (!net.dag().parents(ind).empty()) {
      throw std::invalid_argument("cannot sample " + net.variable(ind).name + ": relationship indicators must have no parents");
    }
    const double p_link = net.cpt(ind).p(0, kTrue);
    std::vector<std::size_t> nodes;
    for (auto n : order) {
      const auto& f = schema.function(model.term(n));
      if (f.kind != FunctionKind::RelationshipAttribute || f.owner != r) continue;
      for (auto p : net.dag().parents(n)) {
        const auto& pf = schema.function(model.term(p));
        const bool ok = (pf.kind != FunctionKind::EntityAttribute && pf.owner == r) ||
                        (pf.kind == FunctionKind::EntityAttribute &&
                         std::find(decl.argument_types.begin(), decl.argument_types.end(), pf.owner) !=
                             decl.argument_types.end());
        if (!ok) {
          throw std::invalid_argument("cannot sample " + net.variable(n).name + ": parent " + net.variable(p).name +
                                      " is outside its relationship and argument entities");
        }
      }
      nodes.push_back(n);
    }
    std::vector<ConstantId> args(decl.argument_types.size(), 0);
    std::vector<Value> values(decl.attributes.size());
    auto state_of = [&](std::size_t p) -> int {
      const auto t = model.term(p);
      const auto& f = schema.function(t);
      switch (f.kind) {
        case FunctionKind::Relationship: return kTrue;
        case FunctionKind::RelationshipAttribute: return values[f.attribute];
        case FunctionKind::EntityAttribute: {
          const auto pos = std::find(decl.argument_types.begin(), decl.argument_types.end(), f.owner) -
                           decl.argument_types.begin();
          return db.entity_value(f.owner, f.attribute, args[static_cast<std::size_t>(pos)]);
        }
      }
      return 0;
    };
    while (true) {
      if (rng.unit() < p_link) {
        for (auto n : nodes) {
          const auto& table = net.cpt(n);
          auto row = table.row(table.row_index(parent_states(n, state_of)));
          std::vector<double> dist(row.begin(), row.end() - 1);  // ⊥ is the last state
          double total = 0;
          for (double p : dist) total += p;
          if (!(total > 0)) {
            throw std::invalid_argument("cannot sample " + net.variable(n).name + ": linked tuple has all mass on _BOT_");
          }
          for (double& p : dist) p /= total;
          values[schema.function(model.term(n)).attribute] = draw(dist);
        }
        db.add_tuple(r, args, values);
      }
      std::size_t k = args.size();
      while (k-- > 0) {
        if (static_cast<std::size_t>(++args[k]) < count[decl.argument_types[k]]) break;
        args[k] = 0;
      }
      if (k == SIZE_MAX) break;
    }
  }
  db.validate();
  return db;
}

}  // namespace relbn
