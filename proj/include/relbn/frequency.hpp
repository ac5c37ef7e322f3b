#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/rational.hpp>

#include "relbn/database.hpp"
#include "relbn/logic.hpp"

namespace relbn {

// Compare against Rational(n), never a bare integer: with Boost 1.74 under C++20
// the mixed comparison operators recurse forever.
using Rational = boost::rational<std::int64_t>;

// #_D(C) over a grounding space of the given size; P_D(C) = count / space.
struct FrequencyResult {
  std::int64_t count = 0;
  std::int64_t grounding_space = 1;

  Rational frequency() const { return Rational(count, grounding_space); }
  double probability() const { return static_cast<double>(count) / static_cast<double>(grounding_space); }
  friend bool operator==(const FrequencyResult&, const FrequencyResult&) = default;
};

// Database access counters.
struct ScanStats {
  std::uint64_t table_scans = 0;            // full passes over an entity or relationship table
  std::uint64_t tuples_read = 0;            // rows touched by those passes
  std::uint64_t join_rows = 0;              // intermediate join rows materialized
  std::uint64_t groundings_enumerated = 0;  // brute-force enumeration only
};

// Counts by enumerating every grounding of the variables in `c`. The oracle
// for everything else in this header.
FrequencyResult count_groundings_bruteforce(const DatabaseInstance& db, const Conjunction& c,
                                            ScanStats* stats = nullptr);

// Result of one pass over a positive join: counts of observed joint
// assignments of `attributes`; unobserved assignments have count zero.
struct JoinCounts {
  std::vector<FunctionTerm> attributes;
  std::map<std::vector<Value>, std::int64_t> counts;
  std::int64_t grounding_space = 1;

  std::int64_t count(const std::vector<Value>& assignment) const {
    auto it = counts.find(assignment);
    return it == counts.end() ? 0 : it->second;
  }
  std::int64_t total() const;
};

// Grounding counts computed from joins over existing tuples. Negative
// relationship literals are removed by P(C, ¬L) = P(C) − P(C, L), so no
// grounding of a non-link is ever enumerated. Results are memoized by
// canonical conjunction; the cache and counters are safe for concurrent use.
class FrequencyEngine {
 public:
  explicit FrequencyEngine(const DatabaseInstance& db) : db_(db) {}
  FrequencyEngine(const FrequencyEngine&) = delete;
  FrequencyEngine& operator=(const FrequencyEngine&) = delete;

  const DatabaseInstance& database() const { return db_; }

  FrequencyResult frequency(const Conjunction& c);
  // Count over the grounding space of `variables` (entity types, a superset of
  // the conjunction's variables). An empty conjunction counts every grounding.
  FrequencyResult frequency_over(const Conjunction& c, std::span<const std::size_t> variables);

  // Counts (attributes = a, R = T for R in positive_rels) for every observed
  // assignment a, over the grounding space of `variables` (defaults to the
  // variables of the attributes and relationships).
  JoinCounts join_frequencies(std::span<const FunctionTerm> attributes, std::span<const std::size_t> positive_rels,
                              std::span<const std::size_t> variables = {});

  ScanStats stats() const;
  void clear_cache();

  struct Normalized;

 private:
  std::int64_t count_normalized(const Normalized& n, const std::vector<std::size_t>& vars);
  std::int64_t count_positive(const Normalized& n, const std::vector<std::size_t>& vars);

  const DatabaseInstance& db_;
  std::mutex cache_mutex_;
  std::unordered_map<std::string, std::int64_t> cache_;
  std::atomic<std::uint64_t> table_scans_{0};
  std::atomic<std::uint64_t> tuples_read_{0};
  std::atomic<std::uint64_t> join_rows_{0};

  friend class JoinRunner;
};

FrequencyResult frequency(const DatabaseInstance& db, const Conjunction& c);
JoinCounts join_frequencies(const DatabaseInstance& db, std::span<const FunctionTerm> attributes,
                            std::span<const std::size_t> positive_rels);

// Product of entity-domain sizes; throws std::domain_error when a domain is
// empty (the frequency is undefined) and std::overflow_error beyond int64.
std::int64_t grounding_space(const DatabaseInstance& db, std::span<const std::size_t> variables);

// Overflow-checked multiply.
std::int64_t checked_mul(std::int64_t a, std::int64_t b);

}  // namespace relbn
