#include "relbn/schema.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace relbn {

bool is_valid_label(std::string_view label) {
  if (label.empty() || label == kBottomToken) return false;
  return std::all_of(label.begin(), label.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '-' || c == '+';
  });
}

namespace {

void check_attribute(const std::string& owner, AttributeDecl& attr) {
  if (!is_valid_label(attr.name)) throw SchemaError("invalid attribute name '" + attr.name + "' in " + owner);
  if (attr.bins < 0) throw SchemaError("negative bin count for " + owner + "." + attr.name);
  if (attr.bins > 0) {
    std::vector<std::string> labels;
    for (int b = 1; b <= attr.bins; ++b) labels.push_back("b" + std::to_string(b));
    if (!attr.domain.empty() && attr.domain != labels) {
      throw SchemaError("binned attribute " + owner + "." + attr.name + " must have domain b1..b" +
                        std::to_string(attr.bins));
    }
    attr.domain = std::move(labels);
  }
  if (attr.domain.empty()) throw SchemaError("empty value domain for " + owner + "." + attr.name);
  std::set<std::string> seen;
  for (const auto& v : attr.domain) {
    if (v == kBottomToken || v == kStarToken) {
      throw SchemaError("reserved token '" + v + "' in the domain of " + owner + "." + attr.name);
    }
    if (!is_valid_label(v)) throw SchemaError("invalid value '" + v + "' in the domain of " + owner + "." + attr.name);
    if (!seen.insert(v).second) throw SchemaError("duplicate value '" + v + "' in the domain of " + owner + "." + attr.name);
  }
}

}  // namespace

void Schema::add_entity_type(EntityType type) {
  if (finalized_) throw SchemaError("schema already finalized");
  entities_.push_back(std::move(type));
}

void Schema::add_relationship(RelationshipDecl rel) {
  if (finalized_) throw SchemaError("schema already finalized");
  relationships_.push_back(std::move(rel));
}

void Schema::finalize() {
  if (finalized_) return;
  if (entities_.empty()) throw SchemaError("schema declares no entity types");

  std::sort(entities_.begin(), entities_.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  std::sort(relationships_.begin(), relationships_.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });

  std::set<std::string> type_names, variables;
  for (auto& e : entities_) {
    if (!is_valid_label(e.name)) throw SchemaError("invalid entity type name '" + e.name + "'");
    if (!type_names.insert(e.name).second) throw SchemaError("duplicate entity type '" + e.name + "'");
    if (e.variable.empty()) e.variable = std::string(1, static_cast<char>(std::toupper(e.name.front())));
    if (!is_valid_label(e.variable)) throw SchemaError("invalid variable name '" + e.variable + "'");
    if (!variables.insert(e.variable).second) {
      throw SchemaError("variable '" + e.variable + "' used by two entity types; declare 'variable = ...' for " +
                        e.name);
    }
    for (auto& a : e.attributes) check_attribute(e.name, a);
  }

  for (auto& r : relationships_) {
    if (!is_valid_label(r.name)) throw SchemaError("invalid relationship name '" + r.name + "'");
    if (r.argument_type_names.size() < 2) {
      throw SchemaError("relationship " + r.name + " needs at least two arguments");
    }
    if (!r.key_columns.empty() && r.key_columns.size() != r.argument_type_names.size()) {
      throw SchemaError("relationship " + r.name + ": key column count does not match argument count");
    }
    r.argument_types.clear();
    std::set<std::size_t> seen_types;
    for (const auto& tn : r.argument_type_names) {
      auto idx = find_entity_type(tn);
      if (!idx) throw SchemaError("relationship " + r.name + " references unknown entity type '" + tn + "'");
      if (!seen_types.insert(*idx).second) {
        throw SchemaError("relationship " + r.name + " uses entity type " + tn +
                          " twice; self-relationships need several variables per type and are not supported");
      }
      r.argument_types.push_back(*idx);
    }
    for (auto& a : r.attributes) check_attribute(r.name, a);
  }

  functions_.clear();
  function_index_.clear();
  entity_attr_base_.clear();
  rel_base_.clear();
  auto add = [&](const std::string& name, FunctionInfo info) {
    if (type_names.count(name)) throw SchemaError("function name '" + name + "' clashes with an entity type");
    if (!function_index_.emplace(name, static_cast<std::uint32_t>(functions_.size())).second) {
      throw SchemaError("duplicate function name '" + name + "'");
    }
    functions_.push_back(std::move(info));
  };
  for (std::size_t e = 0; e < entities_.size(); ++e) {
    entity_attr_base_.push_back(static_cast<std::uint32_t>(functions_.size()));
    for (std::size_t a = 0; a < entities_[e].attributes.size(); ++a) {
      add(entities_[e].attributes[a].name,
          FunctionInfo{entities_[e].attributes[a].name, FunctionKind::EntityAttribute, e, a, {e}});
    }
  }
  for (std::size_t r = 0; r < relationships_.size(); ++r) {
    const auto& rel = relationships_[r];
    rel_base_.push_back(static_cast<std::uint32_t>(functions_.size()));
    add(rel.name, FunctionInfo{rel.name, FunctionKind::Relationship, r, 0, rel.argument_types});
    for (std::size_t a = 0; a < rel.attributes.size(); ++a) {
      add(rel.attributes[a].name,
          FunctionInfo{rel.attributes[a].name, FunctionKind::RelationshipAttribute, r, a, rel.argument_types});
    }
  }
  for (std::size_t r = 0; r < relationships_.size(); ++r) {
    for (const auto& alias : relationships_[r].aliases) {
      if (!is_valid_label(alias)) throw SchemaError("invalid alias '" + alias + "'");
      if (type_names.count(alias) || !function_index_.emplace(alias, rel_base_[r]).second) {
        throw SchemaError("alias '" + alias + "' clashes with another name");
      }
    }
  }
  finalized_ = true;
}

void Schema::require_finalized() const {
  if (!finalized_) throw SchemaError("schema used before finalize()");
}

std::optional<std::size_t> Schema::find_entity_type(std::string_view name) const {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (entities_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Schema::find_relationship(std::string_view name) const {
  for (std::size_t i = 0; i < relationships_.size(); ++i) {
    if (relationships_[i].name == name) return i;
    for (const auto& a : relationships_[i].aliases) {
      if (a == name) return i;
    }
  }
  return std::nullopt;
}

std::vector<FunctionTerm> Schema::all_terms() const {
  require_finalized();
  std::vector<FunctionTerm> out;
  out.reserve(functions_.size());
  for (std::uint32_t i = 0; i < functions_.size(); ++i) out.push_back(FunctionTerm{i});
  return out;
}

std::optional<FunctionTerm> Schema::find_function(std::string_view name) const {
  require_finalized();
  auto it = function_index_.find(std::string(name));
  if (it == function_index_.end()) return std::nullopt;
  return FunctionTerm{it->second};
}

FunctionTerm Schema::relationship_term(std::size_t rel) const {
  require_finalized();
  return FunctionTerm{rel_base_.at(rel)};
}

FunctionTerm Schema::entity_attribute_term(std::size_t entity, std::size_t attr) const {
  require_finalized();
  if (attr >= entities_.at(entity).attributes.size()) throw std::out_of_range("entity attribute index");
  return FunctionTerm{entity_attr_base_.at(entity) + static_cast<std::uint32_t>(attr)};
}

FunctionTerm Schema::relationship_attribute_term(std::size_t rel, std::size_t attr) const {
  require_finalized();
  if (attr >= relationships_.at(rel).attributes.size()) throw std::out_of_range("relationship attribute index");
  return FunctionTerm{rel_base_.at(rel) + 1 + static_cast<std::uint32_t>(attr)};
}

std::optional<std::size_t> Schema::relationship_of(FunctionTerm t) const {
  const auto& f = function(t);
  if (f.kind == FunctionKind::EntityAttribute) return std::nullopt;
  return f.owner;
}

const std::vector<std::string>& Schema::domain(FunctionTerm t) const {
  const auto& f = function(t);
  switch (f.kind) {
    case FunctionKind::EntityAttribute:
      return entities_[f.owner].attributes[f.attribute].domain;
    case FunctionKind::RelationshipAttribute:
      return relationships_[f.owner].attributes[f.attribute].domain;
    case FunctionKind::Relationship:
      break;
  }
  return truth_domain_;
}

std::optional<Value> Schema::parse_value(FunctionTerm t, std::string_view label) const {
  if (label == kBottomToken) {
    if (is_relationship_attribute(t)) return kBottom;
    return std::nullopt;
  }
  const auto& dom = domain(t);
  for (std::size_t i = 0; i < dom.size(); ++i) {
    if (dom[i] == label) return static_cast<Value>(i);
  }
  return std::nullopt;
}

std::string Schema::value_label(FunctionTerm t, Value v) const {
  if (v == kBottom) return std::string(kBottomToken);
  if (v == kUnspecified) return std::string(kStarToken);
  return domain(t).at(static_cast<std::size_t>(v));
}

std::string Schema::term_string(FunctionTerm t) const {
  const auto& f = function(t);
  std::string out = f.name + "(";
  for (std::size_t i = 0; i < f.argument_types.size(); ++i) {
    if (i) out += ',';
    out += entities_[f.argument_types[i]].variable;
  }
  out += ')';
  return out;
}

std::optional<FunctionTerm> Schema::parse_term(std::string_view text) const {
  auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') return std::nullopt;
  auto fn = find_function(text.substr(0, open));
  if (!fn) return std::nullopt;
  // Aliases are accepted; the argument list must name the canonical variables.
  const std::string canonical = term_string(*fn);
  if (text.substr(open) != std::string_view(canonical).substr(function(*fn).name.size())) return std::nullopt;
  return fn;
}

bool operator==(const Schema& a, const Schema& b) {
  auto attrs_eq = [](const std::vector<AttributeDecl>& x, const std::vector<AttributeDecl>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].name != y[i].name || x[i].domain != y[i].domain) return false;
    }
    return true;
  };
  if (a.entities_.size() != b.entities_.size() || a.relationships_.size() != b.relationships_.size()) return false;
  for (std::size_t i = 0; i < a.entities_.size(); ++i) {
    const auto& x = a.entities_[i];
    const auto& y = b.entities_[i];
    if (x.name != y.name || x.variable != y.variable || !attrs_eq(x.attributes, y.attributes)) return false;
  }
  for (std::size_t i = 0; i < a.relationships_.size(); ++i) {
    const auto& x = a.relationships_[i];
    const auto& y = b.relationships_[i];
    if (x.name != y.name || x.aliases != y.aliases || x.argument_types != y.argument_types ||
        !attrs_eq(x.attributes, y.attributes)) {
      return false;
    }
  }
  return true;
}

}  // namespace relbn
