#include "relbn/table_learner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

namespace relbn {

std::optional<std::size_t> FlatTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

void FlatTable::add_row(std::span<const int> values) {
  if (values.size() != columns.size()) throw std::invalid_argument("row length differs from column count");
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (values[c] < 0 || static_cast<std::size_t>(values[c]) >= columns[c].states.size()) {
      throw std::invalid_argument("cell outside the domain of " + columns[c].name);
    }
  }
  cells.insert(cells.end(), values.begin(), values.end());
}

void EdgeConstraints::validate() const {
  for (const auto& e : required) {
    if (forbidden.count(e)) throw std::invalid_argument("edge " + e.from + " -> " + e.to + " is both required and forbidden");
  }
  std::set<std::string> names;
  for (const auto& e : required) {
    names.insert(e.from);
    names.insert(e.to);
  }
  Dag d(std::vector<std::string>(names.begin(), names.end()));
  for (const auto& e : required) d.add_edge(e.from, e.to);
}

double bdeu_family_score(const FlatTable& t, std::size_t child, std::span<const std::size_t> parents, double ess) {
  if (!(ess > 0)) throw std::invalid_argument("ess must be positive");
  const auto r = t.columns.at(child).states.size();
  double q = 1;
  for (auto p : parents) q *= static_cast<double>(t.columns.at(p).states.size());
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> counts;
  for (std::size_t row = 0; row < t.rows(); ++row) {
    std::uint64_t j = 0;
    for (auto p : parents) j = j * t.columns[p].states.size() + static_cast<std::uint64_t>(t.at(row, p));
    auto& c = counts[j];
    if (c.empty()) c.assign(r, 0);
    ++c[static_cast<std::size_t>(t.at(row, child))];
  }
  const double a_j = ess / q;
  const double a_jk = ess / (q * static_cast<double>(r));
  double score = 0;
  for (const auto& [j, c] : counts) {
    double n_j = 0;
    for (auto n : c) {
      n_j += n;
      if (n > 0) score += std::lgamma(a_jk + n) - std::lgamma(a_jk);
    }
    score += std::lgamma(a_j) - std::lgamma(a_j + n_j);
  }
  return score;
}

double bdeu_score(const FlatTable& t, const Dag& d, double ess) {
  double total = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto child = t.column_index(d.name(i));
    if (!child) throw std::invalid_argument("DAG node " + d.name(i) + " is not a column");
    std::vector<std::size_t> parents;
    for (auto p : d.parents(i)) parents.push_back(*t.column_index(d.name(p)));
    total += bdeu_family_score(t, *child, parents, ess);
  }
  return total;
}

namespace {

enum class MoveKind { Add = 0, Delete = 1, Reverse = 2 };

struct Move {
  MoveKind kind;
  std::size_t from, to;
  double delta;
};

class Climber {
 public:
  Climber(const FlatTable& t, const EdgeConstraints& ec, const LearnerConfig& cfg) : t_(t), cfg_(cfg) {
    for (std::size_t i = 0; i < t.width(); ++i) names_.push_back(t.columns[i].name);
    by_name_.resize(names_.size());
    std::iota(by_name_.begin(), by_name_.end(), 0);
    std::sort(by_name_.begin(), by_name_.end(), [&](auto a, auto b) { return names_[a] < names_[b]; });
    required_.assign(names_.size(), std::vector<char>(names_.size(), 0));
    forbidden_ = required_;
    auto apply = [&](const std::set<Edge>& edges, std::vector<std::vector<char>>& m) {
      for (const auto& e : edges) {
        auto a = t.column_index(e.from), b = t.column_index(e.to);
        if (a && b) m[*a][*b] = 1;
      }
    };
    apply(ec.required, required_);
    apply(ec.forbidden, forbidden_);
  }

  Dag initial() const {
    Dag d(names_);
    for (auto a : by_name_) {
      for (auto b : by_name_) {
        if (required_[a][b]) d.add_edge(a, b);
      }
    }
    return d;
  }

  double family(std::size_t child, std::vector<std::size_t> parents) {
    std::sort(parents.begin(), parents.end());
    auto key = std::make_pair(child, parents);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    double s = bdeu_family_score(t_, child, parents, cfg_.ess);
    cache_.emplace(std::move(key), s);
    return s;
  }

  double score(const Dag& d) {
    double s = 0;
    for (std::size_t i = 0; i < d.size(); ++i) s += family(i, d.parents(i));
    return s;
  }

  double delta_add(const Dag& d, std::size_t a, std::size_t b) {
    auto pa = d.parents(b);
    const double before = family(b, pa);
    pa.push_back(a);
    return family(b, pa) - before;
  }
  double delta_delete(const Dag& d, std::size_t a, std::size_t b) {
    auto pa = d.parents(b);
    const double before = family(b, pa);
    std::erase(pa, a);
    return family(b, pa) - before;
  }

  bool can_add(const Dag& d, std::size_t a, std::size_t b) const {
    return a != b && !d.adjacent(a, b) && !forbidden_[a][b] && d.parents(b).size() < cfg_.max_parents &&
           !d.creates_cycle(a, b);
  }
  bool can_delete(std::size_t a, std::size_t b) const { return !required_[a][b]; }
  bool can_reverse(const Dag& d, std::size_t a, std::size_t b) const {
    if (required_[a][b] || forbidden_[b][a] || d.parents(a).size() >= cfg_.max_parents) return false;
    Dag copy = d;
    copy.remove_edge(a, b);
    return !copy.creates_cycle(b, a);
  }

  std::optional<Move> best_move(const Dag& d) {
    std::optional<Move> best;
    auto consider = [&](MoveKind k, std::size_t a, std::size_t b, double delta) {
      if (!best || delta > best->delta + 1e-12) best = Move{k, a, b, delta};
    };
    for (auto a : by_name_) {
      for (auto b : by_name_) {
        if (can_add(d, a, b)) consider(MoveKind::Add, a, b, delta_add(d, a, b));
      }
    }
    for (auto a : by_name_) {
      for (auto b : by_name_) {
        if (d.has_edge(a, b) && can_delete(a, b)) consider(MoveKind::Delete, a, b, delta_delete(d, a, b));
      }
    }
    for (auto a : by_name_) {
      for (auto b : by_name_) {
        if (!d.has_edge(a, b) || !can_reverse(d, a, b)) continue;
        auto pb = d.parents(b);
        auto pa = d.parents(a);
        const double before = family(b, pb) + family(a, pa);
        std::erase(pb, a);
        pa.push_back(b);
        consider(MoveKind::Reverse, a, b, family(b, pb) + family(a, pa) - before);
      }
    }
    return best;
  }

  static void apply(Dag& d, const Move& m) {
    switch (m.kind) {
      case MoveKind::Add: d.add_edge(m.from, m.to); break;
      case MoveKind::Delete: d.remove_edge(m.from, m.to); break;
      case MoveKind::Reverse:
        d.remove_edge(m.from, m.to);
        d.add_edge(m.to, m.from);
        break;
    }
  }

  void climb(Dag& d, std::vector<double>* scores) {
    double current = score(d);
    if (scores) scores->push_back(current);
    while (true) {
      auto m = best_move(d);
      if (!m || m->delta <= 1e-9) return;
      apply(d, *m);
      current += m->delta;
      if (scores) scores->push_back(score(d));
    }
  }

  // A few random legal moves away from `d`.
  void perturb(Dag& d, std::mt19937_64& rng) {
    const auto n = names_.size();
    if (n < 2) return;
    const std::size_t steps = std::max<std::size_t>(2, n / 2);
    for (std::size_t s = 0, tries = 0; s < steps && tries < 50 * steps; ++tries) {
      const auto a = static_cast<std::size_t>(rng() % n);
      const auto b = static_cast<std::size_t>(rng() % n);
      if (a == b) continue;
      if (d.has_edge(a, b)) {
        if ((rng() & 1) && can_reverse(d, a, b)) {
          apply(d, Move{MoveKind::Reverse, a, b, 0});
          ++s;
        } else if (can_delete(a, b)) {
          apply(d, Move{MoveKind::Delete, a, b, 0});
          ++s;
        }
      } else if (can_add(d, a, b)) {
        apply(d, Move{MoveKind::Add, a, b, 0});
        ++s;
      }
    }
  }

 private:
  const FlatTable& t_;
  const LearnerConfig& cfg_;
  std::vector<std::string> names_;
  std::vector<std::size_t> by_name_;
  std::vector<std::vector<char>> required_;
  std::vector<std::vector<char>> forbidden_;
  std::map<std::pair<std::size_t, std::vector<std::size_t>>, double> cache_;
};

}  // namespace

Dag learn_table_structure(const FlatTable& t, const EdgeConstraints& ec, const LearnerConfig& cfg, SearchTrace* trace) {
  if (!(cfg.ess > 0)) throw std::invalid_argument("ess must be positive");
  if (cfg.max_parents == 0) throw std::invalid_argument("max_parents must be at least 1");
  EdgeConstraints scoped;
  for (const auto& e : ec.required) {
    if (t.column_index(e.from) && t.column_index(e.to)) scoped.required.insert(e);
  }
  for (const auto& e : ec.forbidden) {
    if (t.column_index(e.from) && t.column_index(e.to)) scoped.forbidden.insert(e);
  }
  scoped.validate();

  Climber climber(t, scoped, cfg);
  Dag best = climber.initial();
  std::vector<double> scores;
  climber.climb(best, trace ? &scores : nullptr);
  if (trace) trace->climbs.push_back(std::move(scores));
  double best_score = climber.score(best);

  std::mt19937_64 rng(cfg.seed);
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Dag candidate = best;
    climber.perturb(candidate, rng);
    std::vector<double> s;
    climber.climb(candidate, trace ? &s : nullptr);
    if (trace) trace->climbs.push_back(std::move(s));
    const double cs = climber.score(candidate);
    if (cs > best_score + 1e-9) {
      best = std::move(candidate);
      best_score = cs;
    }
  }
  if (trace) trace->final_score = best_score;
  return best;
}

EdgeConstraints get_constraints(const Dag& d) {
  EdgeConstraints out;
  for (auto [a, b] : d.edges()) out.required.insert(Edge{d.name(a), d.name(b)});
  for (std::size_t a = 0; a < d.size(); ++a) {
    for (std::size_t b = 0; b < d.size(); ++b) {
      if (a != b && !d.adjacent(a, b)) out.forbidden.insert(Edge{d.name(a), d.name(b)});
    }
  }
  return out;
}

std::vector<std::string> merge_constraints(EdgeConstraints& accumulated, const EdgeConstraints& incoming) {
  std::vector<std::string> conflicts;
  for (const auto& e : incoming.required) {
    if (accumulated.forbidden.count(e)) {
      conflicts.push_back("dropped required " + e.from + " -> " + e.to + ": forbidden earlier");
    } else if (accumulated.required.count(Edge{e.to, e.from})) {
      conflicts.push_back("dropped required " + e.from + " -> " + e.to + ": reverse required earlier");
    } else {
      accumulated.required.insert(e);
    }
  }
  for (const auto& e : incoming.forbidden) {
    if (accumulated.required.count(e)) {
      conflicts.push_back("dropped forbidden " + e.from + " -> " + e.to + ": required earlier");
    } else {
      accumulated.forbidden.insert(e);
    }
  }
  return conflicts;
}

}  // namespace relbn
