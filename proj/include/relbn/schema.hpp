#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace relbn {

// Reserved tokens. Neither may appear as a declared domain value or a data cell.
inline constexpr std::string_view kBottomToken = "_BOT_";
inline constexpr std::string_view kStarToken = "*";

// Encoded value of a function term: an index into the term's domain. For
// relationship predicates the domain is {T, F}.
using Value = std::int32_t;
inline constexpr Value kBottom = -1;
inline constexpr Value kUnspecified = -2;
inline constexpr Value kTrue = 0;
inline constexpr Value kFalse = 1;

struct AttributeDecl {
  std::string name;
  std::vector<std::string> domain;
  // > 0 when the CSV column is numeric and gets equal-frequency binned into
  // labels b1..bN on load.
  int bins = 0;
};

struct EntityType {
  std::string name;
  std::string variable;  // first-order variable ranging over this type
  std::string key_column;
  std::string file;
  std::vector<AttributeDecl> attributes;
};

struct RelationshipDecl {
  std::string name;
  std::vector<std::string> aliases;
  std::string file;
  std::vector<std::string> key_columns;
  std::vector<std::string> argument_type_names;
  std::vector<std::size_t> argument_types;  // resolved by Schema::finalize
  std::vector<AttributeDecl> attributes;
};

enum class FunctionKind { EntityAttribute, RelationshipAttribute, Relationship };

// An open function term. With exactly one first-order variable per entity
// type, the arguments of a function are fixed by its argument types, so the
// term is identified by the function alone.
struct FunctionTerm {
  std::uint32_t id = 0;
  auto operator<=>(const FunctionTerm&) const = default;
};

struct FunctionInfo {
  std::string name;
  FunctionKind kind = FunctionKind::EntityAttribute;
  std::size_t owner = 0;      // entity type or relationship index
  std::size_t attribute = 0;  // index within the owner's attribute list
  std::vector<std::size_t> argument_types;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Schema {
 public:
  void add_entity_type(EntityType type);
  void add_relationship(RelationshipDecl rel);

  // Validates the declarations, sorts entity types and relationships by name
  // and builds the function table. Must be called once before any lookup.
  void finalize();
  bool finalized() const { return finalized_; }

  const std::vector<EntityType>& entity_types() const { return entities_; }
  const std::vector<RelationshipDecl>& relationships() const { return relationships_; }
  std::optional<std::size_t> find_entity_type(std::string_view name) const;
  std::optional<std::size_t> find_relationship(std::string_view name) const;

  // Functions in canonical order: entity attributes (entity types by name,
  // attributes as declared), then per relationship by name its predicate
  // followed by its descriptive attributes.
  std::size_t function_count() const { return functions_.size(); }
  const FunctionInfo& function(FunctionTerm term) const { return functions_.at(term.id); }
  std::vector<FunctionTerm> all_terms() const;
  std::optional<FunctionTerm> find_function(std::string_view name) const;

  FunctionTerm relationship_term(std::size_t rel) const;
  FunctionTerm entity_attribute_term(std::size_t entity, std::size_t attr) const;
  FunctionTerm relationship_attribute_term(std::size_t rel, std::size_t attr) const;

  bool is_relationship(FunctionTerm t) const { return function(t).kind == FunctionKind::Relationship; }
  bool is_relationship_attribute(FunctionTerm t) const {
    return function(t).kind == FunctionKind::RelationshipAttribute;
  }
  bool is_entity_attribute(FunctionTerm t) const { return function(t).kind == FunctionKind::EntityAttribute; }
  // Relationship that owns a predicate or descriptive relationship attribute.
  std::optional<std::size_t> relationship_of(FunctionTerm t) const;

  // Declared domain; {"T","F"} for relationship predicates. Never contains ⊥.
  const std::vector<std::string>& domain(FunctionTerm t) const;
  std::size_t domain_size(FunctionTerm t) const { return domain(t).size(); }
  std::optional<Value> parse_value(FunctionTerm t, std::string_view label) const;
  std::string value_label(FunctionTerm t, Value v) const;

  // Entity types that the term's variables range over, in argument order.
  const std::vector<std::size_t>& variables_of(FunctionTerm t) const { return function(t).argument_types; }
  const std::string& variable_name(std::size_t entity) const { return entities_.at(entity).variable; }

  // "grade(S,C)"
  std::string term_string(FunctionTerm t) const;
  // Inverse of term_string; nullopt when the name or variables do not match.
  std::optional<FunctionTerm> parse_term(std::string_view text) const;

  friend bool operator==(const Schema& a, const Schema& b);

 private:
  void require_finalized() const;

  std::vector<EntityType> entities_;
  std::vector<RelationshipDecl> relationships_;
  std::vector<FunctionInfo> functions_;
  std::unordered_map<std::string, std::uint32_t> function_index_;
  std::vector<std::uint32_t> entity_attr_base_;
  std::vector<std::uint32_t> rel_base_;
  std::vector<std::string> truth_domain_{"T", "F"};
  bool finalized_ = false;
};

// True when the label can be used as a value or identifier in manifests,
// model files and queries.
bool is_valid_label(std::string_view label);

}  // namespace relbn
