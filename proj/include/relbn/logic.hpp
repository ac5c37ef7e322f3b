#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relbn/schema.hpp"

namespace relbn {

// f(θ) = v, or its negation f(θ) ≠ v when `negated` is set. Relationship
// literals are kept in normal form: R = T or R = F, never negated.
struct Literal {
  FunctionTerm term;
  Value value = 0;
  bool negated = false;

  auto operator<=>(const Literal&) const = default;
};

// Builds a literal, folding negation of a relationship predicate into its value.
Literal make_literal(const Schema& schema, FunctionTerm term, Value value, bool negated = false);

struct Conjunction {
  std::vector<Literal> literals;

  bool empty() const { return literals.empty(); }
  friend bool operator==(const Conjunction&, const Conjunction&) = default;
};

// Entity types of all variables occurring in `c`, sorted ascending.
std::vector<std::size_t> conjunction_variables(const Schema& schema, const Conjunction& c);

// Throws std::invalid_argument when a literal is ill-typed (value outside the
// term's domain, ⊥ on a non-relationship-attribute) or when two literals give
// conflicting values to the same term.
void validate_conjunction(const Schema& schema, const Conjunction& c);

std::string to_string(const Schema& schema, const Literal& lit);
std::string to_string(const Schema& schema, const Conjunction& c);

// Constant index within its entity type.
using ConstantId = std::int32_t;

// Assignment of a constant to each variable, indexed by entity type.
struct Grounding {
  std::vector<ConstantId> constants;
};

struct GroundLiteral {
  Literal literal;
  std::vector<ConstantId> arguments;  // one constant per argument of the term
};

}  // namespace relbn
