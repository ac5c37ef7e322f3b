#include "relbn/logic.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace relbn {

Literal make_literal(const Schema& schema, FunctionTerm term, Value value, bool negated) {
  if (schema.is_relationship(term) && negated) {
    if (value != kTrue && value != kFalse) throw std::invalid_argument("relationship literal must be T or F");
    return Literal{term, value == kTrue ? kFalse : kTrue, false};
  }
  return Literal{term, value, negated};
}

std::vector<std::size_t> conjunction_variables(const Schema& schema, const Conjunction& c) {
  std::vector<std::size_t> vars;
  for (const auto& lit : c.literals) {
    for (auto t : schema.variables_of(lit.term)) vars.push_back(t);
  }
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

void validate_conjunction(const Schema& schema, const Conjunction& c) {
  std::map<FunctionTerm, Value> positive;
  std::map<FunctionTerm, std::vector<Value>> negative;
  for (const auto& lit : c.literals) {
    if (lit.term.id >= schema.function_count()) throw std::invalid_argument("unknown function term");
    const auto term = schema.term_string(lit.term);
    if (schema.is_relationship(lit.term)) {
      if (lit.negated) throw std::invalid_argument("relationship literal " + term + " not in normal form");
      if (lit.value != kTrue && lit.value != kFalse) throw std::invalid_argument(term + " must be T or F");
    } else if (lit.value == kBottom) {
      if (!schema.is_relationship_attribute(lit.term)) {
        throw std::invalid_argument("only relationship attributes can be " + std::string(kBottomToken) + ": " + term);
      }
    } else if (lit.value < 0 || static_cast<std::size_t>(lit.value) >= schema.domain_size(lit.term)) {
      throw std::invalid_argument("value outside the domain of " + term);
    }
    if (lit.negated) {
      negative[lit.term].push_back(lit.value);
      continue;
    }
    auto [it, inserted] = positive.emplace(lit.term, lit.value);
    if (!inserted && it->second != lit.value) {
      throw std::invalid_argument("conflicting values for " + term);
    }
  }
  for (const auto& [term, values] : negative) {
    auto it = positive.find(term);
    if (it == positive.end()) continue;
    if (std::find(values.begin(), values.end(), it->second) != values.end()) {
      throw std::invalid_argument("conflicting values for " + schema.term_string(term));
    }
  }
}

std::string to_string(const Schema& schema, const Literal& lit) {
  const auto term = schema.term_string(lit.term);
  if (schema.is_relationship(lit.term)) return (lit.value == kTrue ? "" : "!") + term;
  return (lit.negated ? "!" : "") + term + "=" + schema.value_label(lit.term, lit.value);
}

std::string to_string(const Schema& schema, const Conjunction& c) {
  std::string out;
  for (std::size_t i = 0; i < c.literals.size(); ++i) {
    if (i) out += ", ";
    out += to_string(schema, c.literals[i]);
  }
  return out;
}

}  // namespace relbn
