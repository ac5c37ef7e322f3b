#pragma once

#include <string>
#include <vector>

#include "relbn/bayes_net.hpp"
#include "relbn/database.hpp"
#include "relbn/table_learner.hpp"

namespace relbn {

enum class PlanKind { Entity, SingleRelationship, RelationshipPair };

// A table that learn-and-join runs the single-table learner on.
struct JoinPlanNode {
  PlanKind kind = PlanKind::Entity;
  std::vector<std::string> tables;       // entity type or relationship names
  std::vector<FunctionTerm> columns;     // descriptive attributes, in column order
  std::vector<std::size_t> relationships;
  std::size_t entity = 0;                // PlanKind::Entity only
};

JoinPlanNode entity_plan(const Schema& schema, std::size_t entity);
// The relationship joined with the entity tables of its arguments.
JoinPlanNode relationship_plan(const Schema& schema, std::size_t rel);
// Two relationships joined on every entity type they share; throws
// std::invalid_argument when they share none.
JoinPlanNode pair_plan(const Schema& schema, std::size_t r1, std::size_t r2);

// Natural join with keys removed; columns are named by term strings.
FlatTable build_join_table(const DatabaseInstance& db, const JoinPlanNode& plan);

struct LearnReport {
  std::vector<std::string> lines;  // one per learner call and per dropped constraint
};

// The four phases: entity tables, single relationship joins, relationship
// pairs, then slot-chain edges. Relationship attributes also get their
// indicator as a parent so that R = F forces ⊥ in the fitted net. Throws
// CycleError naming the cycle when the accumulated required edges are cyclic.
Dag learn_jbn_structure(const DatabaseInstance& db, const LearnerConfig& cfg, LearnReport* report = nullptr);

// For every cross-table edge A -> B whose ends share no variable and whose
// indicator parents of B do not connect them, adds the indicators on a
// shortest relationship path between their variables as parents of B.
Dag add_slot_chain_edges(Dag d, const Schema& schema);
// Adds R -> f^R for every relationship attribute node whose indicator is in d.
Dag link_relationship_attributes(Dag d, const Schema& schema);

}  // namespace relbn
