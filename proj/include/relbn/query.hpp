#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relbn/database.hpp"
#include "relbn/frequency.hpp"
#include "relbn/logic.hpp"
#include "relbn/model.hpp"

namespace relbn {

// P(target | evidence).
struct Query {
  Literal target;
  Conjunction evidence;

  friend bool operator==(const Query&, const Query&) = default;
};

class ParseError : public std::invalid_argument {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : std::invalid_argument("at byte " + std::to_string(offset) + ": " + message), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Grammar, whitespace-insensitive:
//   query   := "P" "(" literal [ "|" literal { "," literal } ] ")"
//   literal := [ "!" ] name "(" var { "," var } ")" [ "=" value ]
// A bare relationship means T and "!R(..)" means F; "!" on an attribute
// negates it. _BOT_ is the undefined value of a relationship attribute.
Query parse_query(const Schema& schema, std::string_view text);
// literal { "," literal }
Conjunction parse_conjunction(const Schema& schema, std::string_view text);
std::string to_string(const Schema& schema, const Query& q);

// frequency(target ∧ evidence) / frequency(evidence). Throws
// ZeroEvidenceError when the evidence never holds.
Rational direct_estimate(FrequencyEngine& engine, const Query& q);
Rational direct_estimate(const DatabaseInstance& db, const Query& q);
// P(target | evidence) by exact inference in the model.
double model_estimate(const JbnModel& model, const Query& q);

// Random queries: a target node and state, then k in {1,2,3} distinct other
// nodes with states. Evidence that is structurally impossible (an attribute
// defined on a false link or ⊥ on a true one) or rejected by `accept` is
// redrawn. Throws std::invalid_argument for models with fewer than 4 nodes.
std::vector<Query> generate_queries(const JbnModel& model, std::size_t n, std::uint64_t seed,
                                    const std::function<bool(const Query&)>& accept = {});

struct ComparisonRow {
  std::string query;
  std::optional<double> p_model;
  std::optional<double> p_direct;
  double t_model_s = 0;
  double t_direct_s = 0;
  std::string error;  // non-empty when the row failed

  std::optional<double> abs_diff() const;
};

struct BenchmarkSummary {
  std::size_t rows = 0;
  std::size_t failed = 0;
  double mean_abs_diff = 0;
  double max_abs_diff = 0;
  double mean_t_model_s = 0;
  double mean_t_direct_s = 0;
};

// Queries are drawn with evidence that holds in `db`.
std::vector<ComparisonRow> benchmark(const DatabaseInstance& db, const JbnModel& model, std::size_t n,
                                     std::uint64_t seed);
BenchmarkSummary summarize(const std::vector<ComparisonRow>& rows);
// Columns: query, p_model, p_direct, abs_diff, t_model_s, t_direct_s. With
// `timing` false the time columns are written as 0.
std::string benchmark_csv(const std::vector<ComparisonRow>& rows, bool timing = true);
std::string format_summary(const BenchmarkSummary& s);

// Draws a database from a JBN. Constants are named <Type>_<i>. Indicators must
// be parentless; entity attributes may depend only on attributes of the same
// entity type; relationship attributes only on their indicator, attributes of
// the same relationship and attributes of its argument types.
DatabaseInstance sample_database(const JbnModel& model, const std::map<std::string, std::size_t>& sizes,
                                 std::uint64_t seed);

}  // namespace relbn
