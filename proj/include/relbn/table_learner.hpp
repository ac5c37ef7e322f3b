#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "relbn/bayes_net.hpp"

namespace relbn {

// A single table of cases: discrete columns, no key columns.
struct FlatTable {
  std::vector<Variable> columns;
  std::vector<int> cells;  // row-major

  std::size_t width() const { return columns.size(); }
  std::size_t rows() const { return columns.empty() ? 0 : cells.size() / columns.size(); }
  int at(std::size_t row, std::size_t col) const { return cells[row * columns.size() + col]; }
  std::optional<std::size_t> column_index(std::string_view name) const;
  // Throws std::invalid_argument on a length mismatch or a cell outside its domain.
  void add_row(std::span<const int> values);
};

struct Edge {
  std::string from;
  std::string to;

  auto operator<=>(const Edge&) const = default;
};

struct EdgeConstraints {
  std::set<Edge> required;
  std::set<Edge> forbidden;

  // Throws std::invalid_argument when an edge is both required and forbidden,
  // and CycleError when the required edges contain a directed cycle.
  void validate() const;
};

struct LearnerConfig {
  double ess = 8.0;
  std::size_t max_parents = 4;
  std::size_t restarts = 0;
  std::uint64_t seed = 0;  // used only by restarts
};

// log BDeu score of one family with hyperparameters ess/(q*r).
double bdeu_family_score(const FlatTable& t, std::size_t child, std::span<const std::size_t> parents, double ess);
// Sum of family scores; DAG nodes are matched to columns by name.
double bdeu_score(const FlatTable& t, const Dag& d, double ess);

// Scores after every accepted move, one list per climb (the first climb and
// then one per restart).
struct SearchTrace {
  std::vector<std::vector<double>> climbs;
  double final_score = 0;
};

// Greedy hill climbing over add/delete/reverse moves from the DAG of required
// edges. Constraints naming columns absent from `t` are ignored. Ties are
// broken by (move kind, source name, target name) with add < delete < reverse.
Dag learn_table_structure(const FlatTable& t, const EdgeConstraints& ec, const LearnerConfig& cfg,
                          SearchTrace* trace = nullptr);

// required = edges of d; forbidden = both directions of every non-adjacent pair.
EdgeConstraints get_constraints(const Dag& d);

// Adds `incoming` to `accumulated`. Earlier constraints win: an incoming edge
// that contradicts an accumulated one is dropped. Returns one message per
// dropped constraint.
std::vector<std::string> merge_constraints(EdgeConstraints& accumulated, const EdgeConstraints& incoming);

}  // namespace relbn
