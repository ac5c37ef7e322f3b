#include "relbn/frequency.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace relbn {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("grounding count exceeds 64 bits");
  return out;
}

std::int64_t grounding_space(const DatabaseInstance& db, std::span<const std::size_t> variables) {
  std::int64_t space = 1;
  for (auto type : variables) {
    const auto n = db.entity_count(type);
    if (n == 0) {
      throw std::domain_error("entity type " + db.schema().entity_types()[type].name +
                              " is empty; database frequency is undefined");
    }
    space = checked_mul(space, static_cast<std::int64_t>(n));
  }
  return space;
}

std::int64_t JoinCounts::total() const {
  std::int64_t t = 0;
  for (const auto& [k, v] : counts) t += v;
  return t;
}

FrequencyResult count_groundings_bruteforce(const DatabaseInstance& db, const Conjunction& c, ScanStats* stats) {
  const auto& schema = db.schema();
  validate_conjunction(schema, c);
  const auto vars = conjunction_variables(schema, c);
  if (vars.empty()) throw std::invalid_argument("conjunction has no variables; frequency needs at least one");
  FrequencyResult result;
  result.grounding_space = grounding_space(db, vars);

  std::vector<std::size_t> slot(schema.entity_types().size(), 0);
  for (std::size_t i = 0; i < vars.size(); ++i) slot[vars[i]] = i;
  std::vector<ConstantId> grounding(vars.size(), 0);
  std::vector<std::vector<ConstantId>> args(c.literals.size());
  for (std::size_t l = 0; l < c.literals.size(); ++l) args[l].resize(schema.variables_of(c.literals[l].term).size());

  std::uint64_t enumerated = 0;
  while (true) {
    ++enumerated;
    bool holds = true;
    for (std::size_t l = 0; l < c.literals.size() && holds; ++l) {
      const auto& types = schema.variables_of(c.literals[l].term);
      for (std::size_t i = 0; i < types.size(); ++i) args[l][i] = grounding[slot[types[i]]];
      holds = eval_ground_literal(db, GroundLiteral{c.literals[l], args[l]});
    }
    if (holds) ++result.count;
    std::size_t pos = 0;
    while (pos < vars.size()) {
      if (++grounding[pos] < static_cast<ConstantId>(db.entity_count(vars[pos]))) break;
      grounding[pos] = 0;
      ++pos;
    }
    if (pos == vars.size()) break;
  }
  if (stats) stats->groundings_enumerated += enumerated;
  return result;
}

// Conjunction in a form where every relationship literal is explicit.
struct FrequencyEngine::Normalized {
  std::vector<Literal> entity_literals;
  std::vector<std::int8_t> rel_state;  // 0 unconstrained, 1 true, 2 false
  std::vector<Literal> rel_positive;   // f^R = v, v != ⊥
  std::vector<Literal> rel_negative;   // f^R != v, v != ⊥
  bool contradiction = false;

  std::vector<Literal> literals(const Schema& schema) const {
    std::vector<Literal> out = entity_literals;
    for (std::size_t r = 0; r < rel_state.size(); ++r) {
      if (rel_state[r] == 1) out.push_back(Literal{schema.relationship_term(r), kTrue, false});
      if (rel_state[r] == 2) out.push_back(Literal{schema.relationship_term(r), kFalse, false});
    }
    out.insert(out.end(), rel_positive.begin(), rel_positive.end());
    out.insert(out.end(), rel_negative.begin(), rel_negative.end());
    return out;
  }

  std::string key() const {
    std::string k;
    auto put = [&](const std::vector<Literal>& lits, char tag) {
      k += tag;
      for (const auto& l : lits) {
        k += std::to_string(l.term.id) + (l.negated ? "!" : "=") + std::to_string(l.value) + ';';
      }
    };
    put(entity_literals, 'E');
    k += 'R';
    for (auto s : rel_state) k += static_cast<char>('0' + s);
    put(rel_positive, 'P');
    put(rel_negative, 'N');
    return k;
  }
};

namespace {

using Normalized = FrequencyEngine::Normalized;

Normalized normalize(const Schema& schema, const std::vector<Literal>& lits) {
  Normalized n;
  n.rel_state.assign(schema.relationships().size(), 0);
  auto set_state = [&](std::size_t r, std::int8_t s) {
    if (n.rel_state[r] == 0) n.rel_state[r] = s;
    else if (n.rel_state[r] != s) n.contradiction = true;
  };
  for (const auto& lit : lits) {
    const auto& f = schema.function(lit.term);
    switch (f.kind) {
      case FunctionKind::EntityAttribute:
        n.entity_literals.push_back(lit);
        break;
      case FunctionKind::Relationship:
        set_state(f.owner, lit.value == kTrue ? 1 : 2);
        break;
      case FunctionKind::RelationshipAttribute:
        if (lit.value == kBottom) {
          set_state(f.owner, lit.negated ? 1 : 2);
        } else if (!lit.negated) {
          n.rel_positive.push_back(lit);
          set_state(f.owner, 1);
        } else {
          n.rel_negative.push_back(lit);
        }
        break;
    }
  }
  auto sort_unique = [](std::vector<Literal>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  sort_unique(n.entity_literals);
  sort_unique(n.rel_positive);
  sort_unique(n.rel_negative);
  for (std::size_t i = 1; i < n.rel_positive.size(); ++i) {
    if (n.rel_positive[i].term == n.rel_positive[i - 1].term) n.contradiction = true;
  }
  for (const auto& p : n.rel_positive) {
    if (n.rel_state[schema.function(p.term).owner] == 2) n.contradiction = true;
  }
  // f != v is implied by R = F (the value is ⊥) and by f = w for w != v, and
  // contradicts f = v.
  std::vector<Literal> kept;
  for (const auto& neg : n.rel_negative) {
    if (n.rel_state[schema.function(neg.term).owner] == 2) continue;
    auto pos = std::find_if(n.rel_positive.begin(), n.rel_positive.end(),
                            [&](const Literal& p) { return p.term == neg.term; });
    if (pos != n.rel_positive.end()) {
      if (pos->value == neg.value) n.contradiction = true;
      continue;
    }
    kept.push_back(neg);
  }
  n.rel_negative = std::move(kept);
  return n;
}

std::string pack(std::span<const ConstantId> v) {
  std::string key(v.size() * sizeof(ConstantId), '\0');
  std::memcpy(key.data(), v.data(), key.size());
  return key;
}

// Splits relationships into groups connected through shared entity types.
std::vector<std::vector<std::size_t>> connected_components(const Schema& schema, std::vector<std::size_t> rels) {
  std::sort(rels.begin(), rels.end());
  std::vector<std::vector<std::size_t>> out;
  std::vector<bool> used(rels.size(), false);
  for (std::size_t i = 0; i < rels.size(); ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> comp{rels[i]};
    std::vector<std::size_t> types = schema.relationships()[rels[i]].argument_types;
    used[i] = true;
    bool grown = true;
    while (grown) {
      grown = false;
      for (std::size_t j = 0; j < rels.size(); ++j) {
        if (used[j]) continue;
        const auto& args = schema.relationships()[rels[j]].argument_types;
        bool shares = std::any_of(args.begin(), args.end(), [&](std::size_t t) {
          return std::find(types.begin(), types.end(), t) != types.end();
        });
        if (!shares) continue;
        used[j] = true;
        grown = true;
        comp.push_back(rels[j]);
        for (auto t : args) {
          if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
        }
      }
    }
    out.push_back(std::move(comp));
  }
  return out;
}

}  // namespace

// Natural join of the tuples of a connected set of relationships, after
// per-tuple filters. Rows hold one constant per bound entity type followed by
// one tuple index per joined relationship.
class JoinRunner {
 public:
  using EntityFilter = std::vector<std::vector<char>>;  // per entity type; empty = no filter
  using AttrFilter = std::vector<std::vector<Literal>>;  // per relationship

  JoinRunner(FrequencyEngine& engine, const EntityFilter& entity_filter, const AttrFilter& attr_filter)
      : engine_(engine), db_(engine.db_), entity_filter_(entity_filter), attr_filter_(attr_filter) {}

  bool passes(std::size_t rel, std::size_t row) const {
    const auto& schema = db_.schema();
    const auto& types = schema.relationships()[rel].argument_types;
    auto args = db_.tuple(rel, row);
    for (std::size_t i = 0; i < types.size(); ++i) {
      const auto& f = entity_filter_[types[i]];
      if (!f.empty() && !f[static_cast<std::size_t>(args[i])]) return false;
    }
    for (const auto& lit : attr_filter_[rel]) {
      const auto v = db_.tuple_value(rel, schema.function(lit.term).attribute, row);
      if (lit.negated ? v == lit.value : v != lit.value) return false;
    }
    return true;
  }

  std::int64_t count_single(std::size_t rel) {
    note_scan(rel);
    std::int64_t n = 0;
    for (std::size_t row = 0; row < db_.tuple_count(rel); ++row) n += passes(rel, row) ? 1 : 0;
    return n;
  }

  void run(std::vector<std::size_t> rels) {
    const auto& schema = db_.schema();
    std::stable_sort(rels.begin(), rels.end(),
                     [&](std::size_t a, std::size_t b) { return db_.tuple_count(a) < db_.tuple_count(b); });
    vars_.clear();
    joined_.clear();
    data_.clear();

    const auto first = rels.front();
    vars_ = schema.relationships()[first].argument_types;
    joined_.push_back(first);
    note_scan(first);
    for (std::size_t row = 0; row < db_.tuple_count(first); ++row) {
      if (!passes(first, row)) continue;
      auto args = db_.tuple(first, row);
      data_.insert(data_.end(), args.begin(), args.end());
      data_.push_back(static_cast<ConstantId>(row));
    }
    engine_.join_rows_ += data_.size() / stride();

    std::vector<std::size_t> remaining(rels.begin() + 1, rels.end());
    while (!remaining.empty()) {
      auto it = std::find_if(remaining.begin(), remaining.end(), [&](std::size_t r) {
        const auto& args = schema.relationships()[r].argument_types;
        return std::any_of(args.begin(), args.end(), [&](std::size_t t) { return slot_of(t) >= 0; });
      });
      if (it == remaining.end()) throw std::logic_error("join component is not connected");
      const auto rel = *it;
      remaining.erase(it);
      extend(rel);
    }
  }

  std::size_t stride() const { return vars_.size() + joined_.size(); }
  std::size_t rows() const { return stride() == 0 ? 0 : data_.size() / stride(); }
  ConstantId constant(std::size_t row, std::size_t type) const {
    return data_[row * stride() + static_cast<std::size_t>(slot_of(type))];
  }
  std::size_t tuple_index(std::size_t row, std::size_t rel) const {
    auto pos = std::find(joined_.begin(), joined_.end(), rel) - joined_.begin();
    return static_cast<std::size_t>(data_[row * stride() + vars_.size() + static_cast<std::size_t>(pos)]);
  }
  const std::vector<std::size_t>& vars() const { return vars_; }

 private:
  int slot_of(std::size_t type) const {
    auto it = std::find(vars_.begin(), vars_.end(), type);
    return it == vars_.end() ? -1 : static_cast<int>(it - vars_.begin());
  }

  void note_scan(std::size_t rel) {
    engine_.table_scans_ += 1;
    engine_.tuples_read_ += db_.tuple_count(rel);
  }

  void extend(std::size_t rel) {
    const auto& args = db_.schema().relationships()[rel].argument_types;
    std::vector<std::pair<std::size_t, std::size_t>> shared;  // (arg position, row slot)
    std::vector<std::size_t> fresh;                            // arg positions of new variables
    for (std::size_t i = 0; i < args.size(); ++i) {
      auto s = slot_of(args[i]);
      if (s >= 0) shared.emplace_back(i, static_cast<std::size_t>(s));
      else fresh.push_back(i);
    }
    note_scan(rel);
    std::unordered_map<std::string, std::vector<std::uint32_t>> buckets;
    std::vector<ConstantId> key(shared.size());
    for (std::size_t row = 0; row < db_.tuple_count(rel); ++row) {
      if (!passes(rel, row)) continue;
      auto t = db_.tuple(rel, row);
      for (std::size_t k = 0; k < shared.size(); ++k) key[k] = t[shared[k].first];
      buckets[pack(key)].push_back(static_cast<std::uint32_t>(row));
    }
    const std::size_t old_vars = vars_.size();
    const std::size_t old_stride = stride();
    const std::size_t old_rows = rows();
    std::vector<ConstantId> next;
    for (std::size_t r = 0; r < old_rows; ++r) {
      const ConstantId* row = &data_[r * old_stride];
      for (std::size_t k = 0; k < shared.size(); ++k) key[k] = row[shared[k].second];
      auto b = buckets.find(pack(key));
      if (b == buckets.end()) continue;
      for (auto tidx : b->second) {
        auto t = db_.tuple(rel, tidx);
        next.insert(next.end(), row, row + old_vars);
        for (auto pos : fresh) next.push_back(t[pos]);
        next.insert(next.end(), row + old_vars, row + old_stride);
        next.push_back(static_cast<ConstantId>(tidx));
      }
    }
    for (auto pos : fresh) vars_.push_back(args[pos]);
    joined_.push_back(rel);
    data_ = std::move(next);
    engine_.join_rows_ += rows();
  }

  FrequencyEngine& engine_;
  const DatabaseInstance& db_;
  const EntityFilter& entity_filter_;
  const AttrFilter& attr_filter_;
  std::vector<std::size_t> vars_;
  std::vector<std::size_t> joined_;
  std::vector<ConstantId> data_;
};

ScanStats FrequencyEngine::stats() const {
  ScanStats s;
  s.table_scans = table_scans_.load();
  s.tuples_read = tuples_read_.load();
  s.join_rows = join_rows_.load();
  return s;
}

void FrequencyEngine::clear_cache() {
  std::lock_guard lock(cache_mutex_);
  cache_.clear();
}

FrequencyResult FrequencyEngine::frequency(const Conjunction& c) {
  const auto vars = conjunction_variables(db_.schema(), c);
  if (vars.empty()) throw std::invalid_argument("conjunction has no variables; frequency needs at least one");
  return frequency_over(c, vars);
}

FrequencyResult FrequencyEngine::frequency_over(const Conjunction& c, std::span<const std::size_t> variables) {
  const auto& schema = db_.schema();
  validate_conjunction(schema, c);
  std::vector<std::size_t> vars(variables.begin(), variables.end());
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  for (auto t : conjunction_variables(schema, c)) {
    if (!std::binary_search(vars.begin(), vars.end(), t)) {
      throw std::invalid_argument("grounding space does not cover the conjunction's variables");
    }
  }
  FrequencyResult result;
  result.grounding_space = grounding_space(db_, vars);
  result.count = count_normalized(normalize(schema, c.literals), vars);
  return result;
}

std::int64_t FrequencyEngine::count_normalized(const Normalized& n, const std::vector<std::size_t>& vars) {
  if (n.contradiction) return 0;
  std::string key = n.key() + "|";
  for (auto v : vars) key += std::to_string(v) + ",";
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const auto& schema = db_.schema();
  std::int64_t result = 0;
  auto false_rel = std::find(n.rel_state.begin(), n.rel_state.end(), 2);
  if (false_rel != n.rel_state.end()) {
    // P(C, R = F) = P(C) − P(C, R = T)
    const auto r = static_cast<std::size_t>(false_rel - n.rel_state.begin());
    auto without = n.literals(schema);
    std::erase(without, Literal{schema.relationship_term(r), kFalse, false});
    auto with = without;
    with.push_back(Literal{schema.relationship_term(r), kTrue, false});
    result = count_normalized(normalize(schema, without), vars) - count_normalized(normalize(schema, with), vars);
  } else if (!n.rel_negative.empty()) {
    // P(C, f != v) = P(C) − P(C, f = v); f = v implies the link exists.
    const auto neg = n.rel_negative.front();
    auto without = n.literals(schema);
    std::erase(without, neg);
    auto with = without;
    with.push_back(Literal{neg.term, neg.value, false});
    result = count_normalized(normalize(schema, without), vars) - count_normalized(normalize(schema, with), vars);
  } else {
    result = count_positive(n, vars);
  }
  if (result < 0) throw std::logic_error("negative grounding count in 1-minus recursion");
  std::lock_guard lock(cache_mutex_);
  cache_.emplace(std::move(key), result);
  return result;
}

std::int64_t FrequencyEngine::count_positive(const Normalized& n, const std::vector<std::size_t>& vars) {
  const auto& schema = db_.schema();
  const auto n_types = schema.entity_types().size();

  JoinRunner::EntityFilter entity_filter(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    std::vector<const Literal*> lits;
    for (const auto& l : n.entity_literals) {
      if (schema.function(l.term).owner == t) lits.push_back(&l);
    }
    if (lits.empty()) continue;
    table_scans_ += 1;
    tuples_read_ += db_.entity_count(t);
    auto& pass = entity_filter[t];
    pass.assign(db_.entity_count(t), 1);
    for (std::size_t c = 0; c < pass.size(); ++c) {
      for (const auto* l : lits) {
        const auto v = db_.entity_value(t, schema.function(l->term).attribute, static_cast<ConstantId>(c));
        if (l->negated ? v == l->value : v != l->value) {
          pass[c] = 0;
          break;
        }
      }
    }
  }
  JoinRunner::AttrFilter attr_filter(schema.relationships().size());
  for (const auto& l : n.rel_positive) attr_filter[schema.function(l.term).owner].push_back(l);

  std::vector<std::size_t> true_rels;
  for (std::size_t r = 0; r < n.rel_state.size(); ++r) {
    if (n.rel_state[r] == 1) true_rels.push_back(r);
  }
  std::vector<bool> covered(n_types, false);
  std::int64_t total = 1;
  for (const auto& comp : connected_components(schema, true_rels)) {
    for (auto r : comp) {
      for (auto t : schema.relationships()[r].argument_types) covered[t] = true;
    }
    JoinRunner join(*this, entity_filter, attr_filter);
    std::int64_t count = 0;
    if (comp.size() == 1) {
      count = join.count_single(comp.front());
    } else {
      join.run(comp);
      count = static_cast<std::int64_t>(join.rows());
    }
    total = checked_mul(total, count);
    if (total == 0) return 0;
  }
  for (auto t : vars) {
    if (covered[t]) continue;
    const auto& pass = entity_filter[t];
    const auto size = pass.empty() ? static_cast<std::int64_t>(db_.entity_count(t))
                                   : static_cast<std::int64_t>(std::count(pass.begin(), pass.end(), 1));
    total = checked_mul(total, size);
  }
  return total;
}

JoinCounts FrequencyEngine::join_frequencies(std::span<const FunctionTerm> attributes,
                                             std::span<const std::size_t> positive_rels,
                                             std::span<const std::size_t> variables) {
  const auto& schema = db_.schema();
  const auto n_types = schema.entity_types().size();
  std::vector<std::size_t> rels(positive_rels.begin(), positive_rels.end());
  std::sort(rels.begin(), rels.end());
  rels.erase(std::unique(rels.begin(), rels.end()), rels.end());

  std::vector<std::size_t> natural;
  for (auto t : attributes) {
    if (schema.is_relationship(t)) throw std::invalid_argument("join_frequencies attributes must not be predicates");
    if (auto r = schema.relationship_of(t); r && !std::binary_search(rels.begin(), rels.end(), *r)) {
      throw std::invalid_argument(schema.term_string(t) + " needs its relationship among the positive relationships");
    }
    for (auto v : schema.variables_of(t)) natural.push_back(v);
  }
  for (auto r : rels) {
    for (auto v : schema.relationships()[r].argument_types) natural.push_back(v);
  }
  std::vector<std::size_t> vars(variables.begin(), variables.end());
  if (vars.empty()) vars = natural;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  for (auto v : natural) {
    if (!std::binary_search(vars.begin(), vars.end(), v)) {
      throw std::invalid_argument("grounding space does not cover the join's variables");
    }
  }

  JoinCounts out;
  out.attributes.assign(attributes.begin(), attributes.end());
  out.grounding_space = grounding_space(db_, vars);

  // Partial histograms over disjoint subsets of attribute positions.
  struct Partial {
    std::vector<std::size_t> positions;
    std::map<std::vector<Value>, std::int64_t> counts;
  };
  std::vector<Partial> partials;
  std::vector<bool> covered(n_types, false);
  const JoinRunner::EntityFilter no_entity_filter(n_types);
  const JoinRunner::AttrFilter no_attr_filter(schema.relationships().size());

  for (const auto& comp : connected_components(schema, rels)) {
    Partial p;
    for (auto r : comp) {
      for (auto t : schema.relationships()[r].argument_types) covered[t] = true;
    }
    for (std::size_t i = 0; i < attributes.size(); ++i) {
      const auto& f = schema.function(attributes[i]);
      const bool mine = f.kind == FunctionKind::EntityAttribute
                            ? covered[f.owner] &&
                                  std::any_of(comp.begin(), comp.end(),
                                              [&](std::size_t r) {
                                                const auto& a = schema.relationships()[r].argument_types;
                                                return std::find(a.begin(), a.end(), f.owner) != a.end();
                                              })
                            : std::find(comp.begin(), comp.end(), f.owner) != comp.end();
      if (mine) p.positions.push_back(i);
    }
    JoinRunner join(*this, no_entity_filter, no_attr_filter);
    join.run(comp);
    std::vector<Value> key(p.positions.size());
    for (std::size_t row = 0; row < join.rows(); ++row) {
      for (std::size_t k = 0; k < p.positions.size(); ++k) {
        const auto& f = schema.function(attributes[p.positions[k]]);
        key[k] = f.kind == FunctionKind::EntityAttribute
                     ? db_.entity_value(f.owner, f.attribute, join.constant(row, f.owner))
                     : db_.tuple_value(f.owner, f.attribute, join.tuple_index(row, f.owner));
      }
      ++p.counts[key];
    }
    partials.push_back(std::move(p));
  }
  std::int64_t multiplier = 1;
  for (auto t : vars) {
    if (covered[t]) continue;
    Partial p;
    for (std::size_t i = 0; i < attributes.size(); ++i) {
      if (schema.function(attributes[i]).owner == t && schema.is_entity_attribute(attributes[i])) p.positions.push_back(i);
    }
    if (p.positions.empty()) {
      multiplier = checked_mul(multiplier, static_cast<std::int64_t>(db_.entity_count(t)));
      continue;
    }
    table_scans_ += 1;
    tuples_read_ += db_.entity_count(t);
    std::vector<Value> key(p.positions.size());
    for (std::size_t c = 0; c < db_.entity_count(t); ++c) {
      for (std::size_t k = 0; k < p.positions.size(); ++k) {
        key[k] = db_.entity_value(t, schema.function(attributes[p.positions[k]]).attribute, static_cast<ConstantId>(c));
      }
      ++p.counts[key];
    }
    partials.push_back(std::move(p));
  }

  std::map<std::vector<Value>, std::int64_t> combined;
  combined[std::vector<Value>(attributes.size(), kUnspecified)] = multiplier;
  for (const auto& p : partials) {
    std::map<std::vector<Value>, std::int64_t> next;
    for (const auto& [key, count] : combined) {
      for (const auto& [pkey, pcount] : p.counts) {
        auto k = key;
        for (std::size_t i = 0; i < p.positions.size(); ++i) k[p.positions[i]] = pkey[i];
        next[k] += checked_mul(count, pcount);
      }
    }
    combined = std::move(next);
  }
  for (auto& [k, v] : combined) {
    if (v > 0) out.counts.emplace(k, v);
  }
  return out;
}

FrequencyResult frequency(const DatabaseInstance& db, const Conjunction& c) {
  FrequencyEngine engine(db);
  return engine.frequency(c);
}

JoinCounts join_frequencies(const DatabaseInstance& db, std::span<const FunctionTerm> attributes,
                            std::span<const std::size_t> positive_rels) {
  FrequencyEngine engine(db);
  return engine.join_frequencies(attributes, positive_rels);
}

}  // namespace relbn
