#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "relbn/bayes_net.hpp"
#include "relbn/schema.hpp"

namespace relbn {

// Node for a function term: entity attributes take their domain, relationship
// attributes their domain followed by _BOT_, indicators {T, F}.
Variable jbn_variable(const Schema& schema, FunctionTerm term);
// One node per descriptive attribute and one indicator per relationship, in
// canonical function order.
std::vector<Variable> jbn_variables(const Schema& schema);
std::vector<std::string> jbn_node_names(const Schema& schema);

// Node state index <-> literal value.
int state_of_value(const Schema& schema, FunctionTerm term, Value v);
Value value_of_state(const Schema& schema, FunctionTerm term, int state);

// A Join Bayes net together with the schema its nodes refer to.
struct JbnModel {
  Schema schema;
  BayesNet net;

  FunctionTerm term(std::size_t node) const;
  std::size_t node(FunctionTerm t) const;  // throws std::out_of_range when absent
};

// Builds the network over `dag`'s nodes, which must be term strings.
BayesNet make_jbn(const Schema& schema, const Dag& dag);

std::string write_model(const JbnModel& model);
JbnModel read_model(std::string_view text, const std::string& origin);
void save_model(const JbnModel& model, const std::filesystem::path& path);
JbnModel load_model(const std::filesystem::path& path);

}  // namespace relbn
