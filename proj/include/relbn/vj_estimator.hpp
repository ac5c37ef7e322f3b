#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "relbn/bayes_net.hpp"
#include "relbn/database.hpp"
#include "relbn/frequency.hpp"
#include "relbn/model.hpp"

namespace relbn {

// Extended value of a relationship predicate or one of its attributes: the
// relationship is unspecified, so are its attributes.
inline constexpr Value kStar = -3;

// Joint-probability table of a family. Columns are the family terms followed
// by the indicators of relationships that occur only through attributes.
// Rows follow the valid-row rule: f^R is ⊥ iff R = F and * iff R = *.
struct JPTable {
  std::vector<FunctionTerm> columns;
  std::size_t family_size = 0;               // leading columns that are family terms
  std::vector<std::size_t> relationships;    // R_1..R_m, ascending
  std::int64_t grounding_space = 1;
  std::map<std::vector<Value>, std::int64_t> counts;  // every valid row, zeros included

  std::int64_t count(const std::vector<Value>& row) const;  // throws std::out_of_range on invalid rows
  Rational probability(const std::vector<Value>& row) const { return Rational(count(row), grounding_space); }
};

// Database work done in each phase of the last estimate.
struct VjStats {
  ScanStats join_phase;
  ScanStats recursion_phase;
  std::size_t join_passes = 0;
};

// Fills the JP-table of a family. Rows with only true or unspecified
// relationships come from one join pass per subset of true relationships;
// rows with false relationships from τ(r) = τ(r_*) − τ(r_T) in increasing
// order of false count, without database access. Throws std::invalid_argument
// when the family involves more than two relationships.
JPTable estimate_jp_table(FrequencyEngine& engine, FunctionTerm child, const std::vector<FunctionTerm>& parents,
                          VjStats* stats = nullptr);
JPTable estimate_jp_table(const DatabaseInstance& db, FunctionTerm child, const std::vector<FunctionTerm>& parents);

// CP-table for node `node` of `net` (a JBN over `schema`) from the JP-table of
// its family. Parent configurations without mass get the uniform distribution
// over the child states legal for that configuration.
CPTable jp_to_cp(const Schema& schema, const BayesNet& net, std::size_t node, const JPTable& jp);

// One JP-table and CP-table per family.
JbnModel fit_jbn(const DatabaseInstance& db, const Dag& dag);
JbnModel fit_jbn(FrequencyEngine& engine, const Dag& dag);

}  // namespace relbn
