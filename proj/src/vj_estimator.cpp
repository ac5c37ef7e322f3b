#include "relbn/vj_estimator.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <stdexcept>

namespace relbn {

namespace {

// Relationship state "true, attributes unspecified". Never appears in a
// finished table.
constexpr Value kTrueUnspecified = kUnspecified;

ScanStats operator-(const ScanStats& a, const ScanStats& b) {
  return ScanStats{a.table_scans - b.table_scans, a.tuples_read - b.tuples_read, a.join_rows - b.join_rows,
                   a.groundings_enumerated - b.groundings_enumerated};
}

struct FamilyLayout {
  std::vector<FunctionTerm> columns;
  std::size_t family_size = 0;
  std::vector<std::size_t> rels;
  std::vector<std::size_t> indicator_col;             // per rel
  std::vector<std::vector<std::size_t>> attr_cols;    // per rel
  std::vector<std::size_t> entity_cols;
  std::vector<std::size_t> vars;
  std::vector<std::size_t> rel_of_col;                // SIZE_MAX for entity attributes
};

FamilyLayout layout_family(const Schema& schema, FunctionTerm child, const std::vector<FunctionTerm>& parents) {
  FamilyLayout L;
  L.columns.push_back(child);
  L.columns.insert(L.columns.end(), parents.begin(), parents.end());
  std::set<FunctionTerm> seen(L.columns.begin(), L.columns.end());
  if (seen.size() != L.columns.size()) throw std::invalid_argument("family lists a term twice");
  L.family_size = L.columns.size();
  std::set<std::size_t> rels;
  for (auto t : L.columns) {
    if (auto r = schema.relationship_of(t)) rels.insert(*r);
  }
  if (rels.size() > 2) {
    throw std::invalid_argument("family of " + schema.term_string(child) + " involves " + std::to_string(rels.size()) +
                                " relationships; at most 2 are supported");
  }
  L.rels.assign(rels.begin(), rels.end());
  for (auto r : L.rels) {
    auto ind = schema.relationship_term(r);
    if (!seen.count(ind)) L.columns.push_back(ind);
  }
  L.indicator_col.resize(L.rels.size());
  L.attr_cols.resize(L.rels.size());
  L.rel_of_col.assign(L.columns.size(), SIZE_MAX);
  std::set<std::size_t> vars;
  for (std::size_t c = 0; c < L.columns.size(); ++c) {
    const auto t = L.columns[c];
    for (auto v : schema.variables_of(t)) vars.insert(v);
    if (auto r = schema.relationship_of(t)) {
      const auto k = static_cast<std::size_t>(std::find(L.rels.begin(), L.rels.end(), *r) - L.rels.begin());
      L.rel_of_col[c] = k;
      if (schema.is_relationship(t)) L.indicator_col[k] = c;
      else L.attr_cols[k].push_back(c);
    } else {
      L.entity_cols.push_back(c);
    }
  }
  L.vars.assign(vars.begin(), vars.end());
  return L;
}

}  // namespace

std::int64_t JPTable::count(const std::vector<Value>& row) const {
  auto it = counts.find(row);
  if (it == counts.end()) throw std::out_of_range("not a valid JP-table row");
  return it->second;
}

JPTable estimate_jp_table(FrequencyEngine& engine, FunctionTerm child, const std::vector<FunctionTerm>& parents,
                          VjStats* stats) {
  const auto& db = engine.database();
  const auto& schema = db.schema();
  const auto L = layout_family(schema, child, parents);
  const auto m = L.rels.size();

  JPTable jp;
  jp.columns = L.columns;
  jp.family_size = L.family_size;
  jp.relationships = L.rels;
  jp.grounding_space = grounding_space(db, L.vars);

  // Phase 1: one join pass per set of true relationships.
  const auto before = engine.stats();
  struct Pass {
    std::vector<std::size_t> cols;  // attribute columns in join order
    JoinCounts counts;
  };
  std::vector<Pass> passes(std::size_t{1} << m);
  for (std::size_t mask = 0; mask < passes.size(); ++mask) {
    auto& p = passes[mask];
    std::vector<std::size_t> positive;
    p.cols = L.entity_cols;
    for (std::size_t k = 0; k < m; ++k) {
      if (!(mask & (std::size_t{1} << k))) continue;
      positive.push_back(L.rels[k]);
      p.cols.insert(p.cols.end(), L.attr_cols[k].begin(), L.attr_cols[k].end());
    }
    std::vector<FunctionTerm> attrs;
    for (auto c : p.cols) attrs.push_back(L.columns[c]);
    p.counts = engine.join_frequencies(attrs, positive, L.vars);
  }
  const auto after_join = engine.stats();

  // Phase 2: the recursion, over memoized extended rows.
  std::map<std::vector<Value>, std::int64_t> memo;
  std::function<std::int64_t(const std::vector<Value>&)> tau = [&](const std::vector<Value>& row) -> std::int64_t {
    if (auto it = memo.find(row); it != memo.end()) return it->second;
    std::int64_t result = 0;
    auto state = [&](std::size_t k) { return row[L.indicator_col[k]]; };
    std::size_t false_k = m, tu_k = m;
    for (std::size_t k = 0; k < m; ++k) {
      if (state(k) == kFalse && false_k == m) false_k = k;
      if (state(k) == kTrueUnspecified && tu_k == m) tu_k = k;
    }
    if (false_k < m) {
      auto star = row;
      star[L.indicator_col[false_k]] = kStar;
      for (auto c : L.attr_cols[false_k]) star[c] = kStar;
      auto tu = star;
      tu[L.indicator_col[false_k]] = kTrueUnspecified;
      result = tau(star) - tau(tu);
      if (result < 0) throw std::logic_error("negative JP-table entry in the 1-minus recursion");
    } else if (tu_k < m) {
      // Sum over every specified assignment of the relationship's attributes.
      const auto& cols = L.attr_cols[tu_k];
      auto r = row;
      r[L.indicator_col[tu_k]] = kTrue;
      std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == cols.size()) {
          result += tau(r);
          return;
        }
        for (std::size_t v = 0; v < schema.domain_size(L.columns[cols[i]]); ++v) {
          r[cols[i]] = static_cast<Value>(v);
          rec(i + 1);
        }
      };
      rec(0);
    } else {
      std::size_t mask = 0;
      for (std::size_t k = 0; k < m; ++k) {
        if (state(k) == kTrue) mask |= std::size_t{1} << k;
      }
      const auto& p = passes[mask];
      std::vector<Value> key;
      for (auto c : p.cols) key.push_back(row[c]);
      result = p.counts.count(key);
    }
    memo.emplace(row, result);
    return result;
  };

  // Every valid row, in increasing order of false relationships.
  std::vector<std::vector<Value>> rel_states;
  std::size_t n_states = 1;
  for (std::size_t k = 0; k < m; ++k) n_states *= 3;
  for (std::size_t code = 0; code < n_states; ++code) {
    std::vector<Value> s(m);
    auto c = code;
    for (std::size_t k = 0; k < m; ++k) {
      const Value options[3] = {kTrue, kFalse, kStar};
      s[k] = options[c % 3];
      c /= 3;
    }
    rel_states.push_back(std::move(s));
  }
  std::stable_sort(rel_states.begin(), rel_states.end(), [](const auto& a, const auto& b) {
    return std::count(a.begin(), a.end(), kFalse) < std::count(b.begin(), b.end(), kFalse);
  });
  for (const auto& s : rel_states) {
    std::vector<std::vector<Value>> options(L.columns.size());
    for (std::size_t c = 0; c < L.columns.size(); ++c) {
      const auto k = L.rel_of_col[c];
      const auto t = L.columns[c];
      if (k == SIZE_MAX || (s[k] == kTrue && !schema.is_relationship(t))) {
        for (std::size_t v = 0; v < schema.domain_size(t); ++v) options[c].push_back(static_cast<Value>(v));
      } else if (schema.is_relationship(t)) {
        options[c] = {s[k]};
      } else {
        options[c] = {s[k] == kFalse ? kBottom : kStar};
      }
    }
    std::vector<Value> row(L.columns.size());
    std::function<void(std::size_t)> rec = [&](std::size_t c) {
      if (c == row.size()) {
        jp.counts.emplace(row, tau(row));
        return;
      }
      for (auto v : options[c]) {
        row[c] = v;
        rec(c + 1);
      }
    };
    rec(0);
  }
  const auto after_recursion = engine.stats();
  if (stats) {
    stats->join_phase = after_join - before;
    stats->recursion_phase = after_recursion - after_join;
    stats->join_passes = passes.size();
  }
  return jp;
}

JPTable estimate_jp_table(const DatabaseInstance& db, FunctionTerm child, const std::vector<FunctionTerm>& parents) {
  FrequencyEngine engine(db);
  return estimate_jp_table(engine, child, parents);
}

CPTable jp_to_cp(const Schema& schema, const BayesNet& net, std::size_t node, const JPTable& jp) {
  auto term_of = [&](std::size_t n) {
    auto t = schema.parse_term(net.variable(n).name);
    if (!t) throw std::invalid_argument("node " + net.variable(n).name + " is not a function term");
    return *t;
  };
  const auto& parents = net.dag().parents(node);
  std::vector<std::size_t> members{node};
  members.insert(members.end(), parents.begin(), parents.end());
  if (members.size() != jp.family_size) throw std::invalid_argument("JP-table does not match the family of " + net.family_string(node));
  std::vector<std::size_t> col_of(members.size());
  std::vector<FunctionTerm> terms;
  for (std::size_t i = 0; i < members.size(); ++i) {
    terms.push_back(term_of(members[i]));
    auto it = std::find(jp.columns.begin(), jp.columns.begin() + static_cast<std::ptrdiff_t>(jp.family_size), terms[i]);
    if (it == jp.columns.begin() + static_cast<std::ptrdiff_t>(jp.family_size)) {
      throw std::invalid_argument("JP-table does not match the family of " + net.family_string(node));
    }
    col_of[i] = static_cast<std::size_t>(it - jp.columns.begin());
  }

  auto table = net.blank_cpt(node);
  const auto r = net.cardinality(node);
  std::vector<Value> row(jp.columns.size());
  std::vector<std::int64_t> mass(r);
  std::vector<char> legal(r);
  for (std::size_t pr = 0; pr < table.row_count(); ++pr) {
    const auto pa = table.row_assignment(pr);
    for (std::size_t k = 0; k < parents.size(); ++k) row[col_of[k + 1]] = value_of_state(schema, terms[k + 1], pa[k]);
    for (std::size_t x = 0; x < r; ++x) {
      row[col_of[0]] = value_of_state(schema, terms[0], static_cast<int>(x));
      // Indicators outside the family are implied by their attributes.
      bool consistent = true;
      for (std::size_t c = jp.family_size; c < jp.columns.size(); ++c) {
        const auto rel = schema.function(jp.columns[c]).owner;
        std::optional<bool> linked;
        for (std::size_t a = 0; a < jp.family_size; ++a) {
          if (schema.is_relationship_attribute(jp.columns[a]) && schema.function(jp.columns[a]).owner == rel) {
            const bool l = row[a] != kBottom;
            if (linked && *linked != l) consistent = false;
            linked = l;
          }
        }
        row[c] = linked.value_or(true) ? kTrue : kFalse;
      }
      auto it = consistent ? jp.counts.find(row) : jp.counts.end();
      legal[x] = it != jp.counts.end();
      mass[x] = legal[x] ? it->second : 0;
    }
    std::int64_t total = 0;
    for (auto c : mass) total += c;
    std::vector<double> dist(r, 0.0);
    if (total > 0) {
      for (std::size_t x = 0; x < r; ++x) dist[x] = static_cast<double>(mass[x]) / static_cast<double>(total);
    } else {
      auto n_legal = std::count(legal.begin(), legal.end(), 1);
      if (n_legal == 0) {
        std::fill(legal.begin(), legal.end(), 1);
        n_legal = static_cast<std::ptrdiff_t>(r);
      }
      for (std::size_t x = 0; x < r; ++x) dist[x] = legal[x] ? 1.0 / static_cast<double>(n_legal) : 0.0;
    }
    table.set_row(pr, dist);
  }
  return table;
}

JbnModel fit_jbn(FrequencyEngine& engine, const Dag& dag) {
  const auto& schema = engine.database().schema();
  JbnModel model{schema, make_jbn(schema, dag)};
  for (std::size_t i = 0; i < model.net.size(); ++i) {
    std::vector<FunctionTerm> parents;
    for (auto p : dag.parents(i)) parents.push_back(model.term(p));
    auto jp = estimate_jp_table(engine, model.term(i), parents);
    model.net.set_cpt(i, jp_to_cp(schema, model.net, i, jp));
  }
  return model;
}

JbnModel fit_jbn(const DatabaseInstance& db, const Dag& dag) {
  FrequencyEngine engine(db);
  return fit_jbn(engine, dag);
}

}  // namespace relbn
