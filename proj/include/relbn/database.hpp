#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relbn/logic.hpp"
#include "relbn/schema.hpp"

namespace relbn {

// Raised by load_database with "file:line: message" text.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A database instance over a finalized schema. Built once by the loader or the
// sampler and read-only afterwards; all const members are safe to call from
// several threads.
class DatabaseInstance {
 public:
  explicit DatabaseInstance(Schema schema);

  const Schema& schema() const { return schema_; }

  // Entities
  ConstantId add_entity(std::size_t type, std::string name, std::vector<Value> attributes);
  std::size_t entity_count(std::size_t type) const { return entities_.at(type).names.size(); }
  const std::string& constant_name(std::size_t type, ConstantId c) const;
  std::optional<ConstantId> find_constant(std::size_t type, std::string_view name) const;
  Value entity_value(std::size_t type, std::size_t attr, ConstantId c) const {
    return entities_[type].columns[attr][static_cast<std::size_t>(c)];
  }

  // Relationships. Tuples are stored in insertion order; a tuple lists one
  // constant per argument of the relationship.
  std::size_t add_tuple(std::size_t rel, std::vector<ConstantId> arguments, std::vector<Value> attributes);
  std::size_t tuple_count(std::size_t rel) const { return relationships_.at(rel).count; }
  std::span<const ConstantId> tuple(std::size_t rel, std::size_t row) const;
  Value tuple_value(std::size_t rel, std::size_t attr, std::size_t row) const {
    return relationships_[rel].attr_columns[attr][row];
  }
  std::optional<std::size_t> find_tuple(std::size_t rel, std::span<const ConstantId> arguments) const;

  // [f(a)]_D, with ⊥ for attributes of unlinked tuples and T/F for predicates.
  Value value(FunctionTerm term, std::span<const ConstantId> arguments) const;

  // Checks the unique-names, foreign-key, domain and ⊥ invariants. Throws
  // std::logic_error on violation.
  void validate() const;

  friend bool operator==(const DatabaseInstance& a, const DatabaseInstance& b);

 private:
  struct EntityTable {
    std::vector<std::string> names;
    std::unordered_map<std::string, ConstantId> index;
    std::vector<std::vector<Value>> columns;
  };
  struct RelationshipTable {
    std::size_t arity = 0;
    std::size_t count = 0;
    std::vector<ConstantId> keys;  // row-major, `arity` per tuple
    std::vector<std::vector<Value>> attr_columns;
    std::unordered_map<std::string, std::size_t> index;
  };
  static std::string pack_key(std::span<const ConstantId> args);

  Schema schema_;
  std::vector<EntityTable> entities_;
  std::vector<RelationshipTable> relationships_;
};

// D ⊨ L for a ground literal.
bool eval_ground_literal(const DatabaseInstance& db, const GroundLiteral& lit);

// Convenience: builds the ground literal name(constants...) = value from
// labels, e.g. ground_literal(db, "intelligence", {"jack"}, "3").
GroundLiteral ground_literal(const DatabaseInstance& db, std::string_view function,
                             const std::vector<std::string>& constants, std::string_view value,
                             bool negated = false);

// Equal-frequency binning of a numeric column. Values are stably sorted and
// position i of n goes to bin floor(i * bins / n), so bin sizes differ by at
// most one. Returns zero-based bin indices in input order.
std::vector<int> discretize_indices(std::span<const double> values, int bins);
// Same, rendered as labels "b1".."bN".
std::vector<std::string> discretize(std::span<const double> values, int bins);

// Manifest + CSV ingestion. See README for the manifest syntax.
DatabaseInstance load_database(const std::filesystem::path& manifest_path);
// Parses only the schema sections of a manifest text; data file keys are
// optional. `origin` names the source in error messages.
Schema parse_schema(std::string_view manifest_text, const std::string& origin);
// Writes a manifest and one CSV per table into `dir`; load_database on the
// resulting manifest yields an equal instance.
std::filesystem::path write_database(const DatabaseInstance& db, const std::filesystem::path& dir);
// Renders the schema in manifest syntax (used by write_database and model files).
std::string schema_to_manifest(const Schema& schema, bool with_files);

}  // namespace relbn
