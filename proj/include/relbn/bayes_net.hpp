#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace relbn {

// A discrete node. `role` is free-form metadata kept through serialization
// ("entity-attribute", "relationship", "relationship-attribute:<Rel>" for JBNs).
struct Variable {
  std::string name;
  std::vector<std::string> states;
  std::string role = "-";

  friend bool operator==(const Variable&, const Variable&) = default;
};

class CycleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Directed acyclic graph over named nodes. Parent and child lists are kept sorted.
class Dag {
 public:
  Dag() = default;
  explicit Dag(std::vector<std::string> nodes);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& nodes() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index(std::string_view name) const;  // throws std::out_of_range

  bool has_edge(std::size_t from, std::size_t to) const;
  bool adjacent(std::size_t a, std::size_t b) const { return has_edge(a, b) || has_edge(b, a); }
  // True when from -> to would close a directed cycle.
  bool creates_cycle(std::size_t from, std::size_t to) const;
  void add_edge(std::size_t from, std::size_t to);  // throws CycleError
  void add_edge(std::string_view from, std::string_view to) { add_edge(index(from), index(to)); }
  void remove_edge(std::size_t from, std::size_t to);

  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  std::size_t edge_count() const;
  // (from, to) pairs ordered by (from, to).
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  // Kahn's algorithm, smallest index first among ready nodes.
  std::vector<std::size_t> topological_order() const;
  bool reachable(std::size_t from, std::size_t to) const;

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
};

// P(child | parents) as a dense table: one row per parent configuration, the
// first parent varying slowest. Rows not yet fitted are flagged undefined.
class CPTable {
 public:
  CPTable() = default;
  CPTable(std::size_t child_cardinality, std::vector<std::size_t> parent_cardinalities);

  std::size_t child_cardinality() const { return child_card_; }
  const std::vector<std::size_t>& parent_cardinalities() const { return parent_cards_; }
  std::size_t row_count() const { return defined_.size(); }
  std::size_t row_index(std::span<const int> parent_values) const;
  std::vector<int> row_assignment(std::size_t row) const;

  bool defined(std::size_t row) const { return defined_.at(row) != 0; }
  bool complete() const;
  double p(std::size_t row, int child_value) const { return probs_[row * child_card_ + static_cast<std::size_t>(child_value)]; }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(probs_).subspan(r * child_card_, child_card_); }
  // Throws std::invalid_argument unless entries are in [0,1] and sum to 1 ± 1e-9.
  void set_row(std::size_t row, std::span<const double> distribution);

  friend bool operator==(const CPTable&, const CPTable&) = default;

 private:
  std::size_t child_card_ = 0;
  std::vector<std::size_t> parent_cards_;
  std::vector<double> probs_;
  std::vector<char> defined_;
};

class BayesNet {
 public:
  BayesNet() = default;
  // The DAG's node names must equal the variable names in order.
  BayesNet(std::vector<Variable> variables, Dag dag);

  std::size_t size() const { return variables_.size(); }
  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(std::size_t i) const { return variables_.at(i); }
  std::size_t cardinality(std::size_t i) const { return variables_.at(i).states.size(); }
  std::optional<std::size_t> find(std::string_view name) const { return dag_.find(name); }
  std::size_t index(std::string_view name) const { return dag_.index(name); }
  std::optional<int> state_index(std::size_t node, std::string_view label) const;
  const Dag& dag() const { return dag_; }

  bool has_cpt(std::size_t i) const { return cpts_.at(i).has_value(); }
  const CPTable& cpt(std::size_t i) const;  // throws std::logic_error naming the family when unfitted
  // The table's shape must match the node's cardinality and DAG parents.
  void set_cpt(std::size_t i, CPTable table);
  bool fitted() const;
  // Empty table shaped for node i.
  CPTable blank_cpt(std::size_t i) const;
  std::string family_string(std::size_t i) const;

  friend bool operator==(const BayesNet&, const BayesNet&) = default;

 private:
  std::vector<Variable> variables_;
  Dag dag_;
  std::vector<std::optional<CPTable>> cpts_;
};

class ZeroEvidenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Π_i P(x_i | pa_i); `assignment` holds one state index per node.
double joint_probability(const BayesNet& bn, std::span<const int> assignment);

// Observed state per node.
using Evidence = std::map<std::size_t, int>;
// Allowed states per node; a node constrained to a set of states (used for
// negated evidence such as grade != A).
using MaskedEvidence = std::map<std::size_t, std::vector<char>>;

// Exact posterior over `target` by variable elimination. Nodes that are not
// ancestors of the target or evidence are pruned first. The elimination order
// is min-degree unless `order` is given; nodes missing from `order` are
// eliminated afterwards by min-degree. Throws ZeroEvidenceError when the
// evidence has probability zero.
std::vector<double> infer(const BayesNet& bn, std::size_t target, const Evidence& evidence,
                          const std::vector<std::size_t>* order = nullptr);
std::vector<double> infer_masked(const BayesNet& bn, std::size_t target, const MaskedEvidence& evidence,
                                 const std::vector<std::size_t>* order = nullptr);
// P(evidence) for masked evidence; zero is returned, not thrown.
double evidence_probability(const BayesNet& bn, const MaskedEvidence& evidence);

// Shortest decimal that reads back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

// Text form of the network: variables, edges and defined CP rows. The inverse
// of read_network; `origin` names the source in error messages.
std::string write_network(const BayesNet& bn);
BayesNet read_network(std::string_view text, const std::string& origin, std::size_t first_line = 1);

}  // namespace relbn
