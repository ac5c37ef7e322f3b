#include "relbn/learn_and_join.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <numeric>
#include <unordered_map>

#include "relbn/model.hpp"

namespace relbn {

namespace {

void append_entity_columns(const Schema& schema, std::size_t e, std::vector<FunctionTerm>& out) {
  for (std::size_t a = 0; a < schema.entity_types()[e].attributes.size(); ++a) {
    out.push_back(schema.entity_attribute_term(e, a));
  }
}

void append_relationship_columns(const Schema& schema, std::size_t r, std::vector<FunctionTerm>& out) {
  for (std::size_t a = 0; a < schema.relationships()[r].attributes.size(); ++a) {
    out.push_back(schema.relationship_attribute_term(r, a));
  }
}

// Entity types in column order: the first relationship's arguments, then the
// second's new ones.
std::vector<std::size_t> plan_types(const Schema& schema, const JoinPlanNode& plan) {
  if (plan.kind == PlanKind::Entity) return {plan.entity};
  std::vector<std::size_t> types;
  for (auto r : plan.relationships) {
    for (auto t : schema.relationships()[r].argument_types) {
      if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
    }
  }
  return types;
}

std::string pack(const std::vector<ConstantId>& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(ConstantId));
}

}  // namespace

JoinPlanNode entity_plan(const Schema& schema, std::size_t entity) {
  JoinPlanNode p;
  p.kind = PlanKind::Entity;
  p.entity = entity;
  p.tables = {schema.entity_types().at(entity).name};
  append_entity_columns(schema, entity, p.columns);
  return p;
}

JoinPlanNode relationship_plan(const Schema& schema, std::size_t rel) {
  JoinPlanNode p;
  p.kind = PlanKind::SingleRelationship;
  p.relationships = {rel};
  p.tables = {schema.relationships().at(rel).name};
  for (auto t : schema.relationships()[rel].argument_types) append_entity_columns(schema, t, p.columns);
  append_relationship_columns(schema, rel, p.columns);
  return p;
}

JoinPlanNode pair_plan(const Schema& schema, std::size_t r1, std::size_t r2) {
  if (r1 == r2) throw std::invalid_argument("a relationship pair needs two distinct relationships");
  const auto& a = schema.relationships().at(r1).argument_types;
  const auto& b = schema.relationships().at(r2).argument_types;
  const bool shares = std::any_of(a.begin(), a.end(), [&](auto t) { return std::find(b.begin(), b.end(), t) != b.end(); });
  if (!shares) {
    throw std::invalid_argument(schema.relationships()[r1].name + " and " + schema.relationships()[r2].name +
                                " share no entity type and cannot be joined");
  }
  JoinPlanNode p;
  p.kind = PlanKind::RelationshipPair;
  p.relationships = {r1, r2};
  p.tables = {schema.relationships()[r1].name, schema.relationships()[r2].name};
  for (auto t : plan_types(schema, p)) append_entity_columns(schema, t, p.columns);
  append_relationship_columns(schema, r1, p.columns);
  append_relationship_columns(schema, r2, p.columns);
  return p;
}

FlatTable build_join_table(const DatabaseInstance& db, const JoinPlanNode& plan) {
  const auto& schema = db.schema();
  FlatTable table;
  for (auto t : plan.columns) {
    table.columns.push_back(Variable{schema.term_string(t), schema.domain(t), jbn_variable(schema, t).role});
  }
  const auto types = plan_types(schema, plan);
  // A joined row: one constant per type, one tuple index per relationship.
  std::vector<ConstantId> consts(types.size());
  std::vector<std::size_t> tuples(plan.relationships.size());
  std::vector<int> row(plan.columns.size());
  auto emit = [&] {
    for (std::size_t c = 0; c < plan.columns.size(); ++c) {
      const auto& f = schema.function(plan.columns[c]);
      if (f.kind == FunctionKind::EntityAttribute) {
        const auto slot = static_cast<std::size_t>(std::find(types.begin(), types.end(), f.owner) - types.begin());
        row[c] = db.entity_value(f.owner, f.attribute, consts[slot]);
      } else {
        const auto k = static_cast<std::size_t>(
            std::find(plan.relationships.begin(), plan.relationships.end(), f.owner) - plan.relationships.begin());
        row[c] = db.tuple_value(f.owner, f.attribute, tuples[k]);
      }
    }
    table.add_row(row);
  };
  auto bind = [&](std::size_t rel, std::size_t tuple) {
    auto args = db.tuple(rel, tuple);
    const auto& arg_types = schema.relationships()[rel].argument_types;
    for (std::size_t i = 0; i < args.size(); ++i) {
      consts[static_cast<std::size_t>(std::find(types.begin(), types.end(), arg_types[i]) - types.begin())] = args[i];
    }
  };

  switch (plan.kind) {
    case PlanKind::Entity:
      for (std::size_t c = 0; c < db.entity_count(plan.entity); ++c) {
        consts[0] = static_cast<ConstantId>(c);
        emit();
      }
      break;
    case PlanKind::SingleRelationship: {
      const auto r = plan.relationships.at(0);
      for (std::size_t i = 0; i < db.tuple_count(r); ++i) {
        tuples[0] = i;
        bind(r, i);
        emit();
      }
      break;
    }
    case PlanKind::RelationshipPair: {
      const auto r1 = plan.relationships.at(0), r2 = plan.relationships.at(1);
      const auto& a1 = schema.relationships()[r1].argument_types;
      const auto& a2 = schema.relationships()[r2].argument_types;
      std::vector<std::pair<std::size_t, std::size_t>> shared;  // (position in r1, position in r2)
      for (std::size_t i = 0; i < a1.size(); ++i) {
        for (std::size_t j = 0; j < a2.size(); ++j) {
          if (a1[i] == a2[j]) shared.emplace_back(i, j);
        }
      }
      if (shared.empty()) throw std::invalid_argument("relationship pair shares no entity type");
      std::unordered_map<std::string, std::vector<std::size_t>> index;
      std::vector<ConstantId> key(shared.size());
      for (std::size_t j = 0; j < db.tuple_count(r2); ++j) {
        auto t = db.tuple(r2, j);
        for (std::size_t k = 0; k < shared.size(); ++k) key[k] = t[shared[k].second];
        index[pack(key)].push_back(j);
      }
      for (std::size_t i = 0; i < db.tuple_count(r1); ++i) {
        auto t = db.tuple(r1, i);
        for (std::size_t k = 0; k < shared.size(); ++k) key[k] = t[shared[k].first];
        auto it = index.find(pack(key));
        if (it == index.end()) continue;
        for (auto j : it->second) {
          tuples[0] = i;
          tuples[1] = j;
          bind(r1, i);
          bind(r2, j);
          emit();
        }
      }
      break;
    }
  }
  return table;
}

namespace {

std::string table_of(const Schema& schema, FunctionTerm t) {
  const auto& f = schema.function(t);
  return f.kind == FunctionKind::EntityAttribute ? "entity:" + schema.entity_types()[f.owner].name
                                                 : "relationship:" + schema.relationships()[f.owner].name;
}

// Entity-type components joined by the given relationships.
std::vector<std::size_t> components(const Schema& schema, const std::vector<std::size_t>& rels) {
  std::vector<std::size_t> parent(schema.entity_types().size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (auto r : rels) {
    const auto& args = schema.relationships()[r].argument_types;
    for (std::size_t i = 1; i < args.size(); ++i) parent[find(args[i])] = find(args[0]);
  }
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = find(i);
  return parent;
}

// Relationships on a shortest path between any type in `from` and any in `to`,
// treating relationships as edges between their argument types.
std::vector<std::size_t> shortest_relationship_path(const Schema& schema, const std::vector<std::size_t>& from,
                                                    const std::vector<std::size_t>& to) {
  const auto n = schema.entity_types().size();
  std::vector<long> via(n, -2);  // relationship used to reach a type; -1 for sources
  std::vector<std::size_t> prev(n, 0);
  std::deque<std::size_t> queue;
  for (auto t : from) {
    via[t] = -1;
    queue.push_back(t);
  }
  while (!queue.empty()) {
    const auto cur = queue.front();
    queue.pop_front();
    if (std::find(to.begin(), to.end(), cur) != to.end()) {
      std::vector<std::size_t> path;
      for (auto t = cur; via[t] >= 0; t = prev[t]) path.push_back(static_cast<std::size_t>(via[t]));
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (std::size_t r = 0; r < schema.relationships().size(); ++r) {
      const auto& args = schema.relationships()[r].argument_types;
      if (std::find(args.begin(), args.end(), cur) == args.end()) continue;
      for (auto t : args) {
        if (via[t] != -2) continue;
        via[t] = static_cast<long>(r);
        prev[t] = cur;
        queue.push_back(t);
      }
    }
  }
  return {};
}

std::vector<std::string> find_cycle(const Dag& d, std::size_t from, std::size_t to) {
  // d has a path to ⇝ from; report from -> to ⇝ from.
  std::vector<long> prev(d.size(), -1);
  std::deque<std::size_t> queue{to};
  std::vector<char> seen(d.size(), 0);
  seen[to] = 1;
  while (!queue.empty()) {
    auto cur = queue.front();
    queue.pop_front();
    if (cur == from) break;
    for (auto c : d.children(cur)) {
      if (seen[c]) continue;
      seen[c] = 1;
      prev[c] = static_cast<long>(cur);
      queue.push_back(c);
    }
  }
  std::vector<std::string> path;
  for (long cur = static_cast<long>(from); cur != -1; cur = prev[static_cast<std::size_t>(cur)]) {
    path.push_back(d.name(static_cast<std::size_t>(cur)));
  }
  std::reverse(path.begin(), path.end());
  path.push_back(d.name(to));
  return path;
}

}  // namespace

Dag link_relationship_attributes(Dag d, const Schema& schema) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto t = schema.parse_term(d.name(i));
    if (!t || !schema.is_relationship_attribute(*t)) continue;
    auto ind = d.find(schema.term_string(schema.relationship_term(*schema.relationship_of(*t))));
    if (ind) d.add_edge(*ind, i);
  }
  return d;
}

Dag add_slot_chain_edges(Dag d, const Schema& schema) {
  std::vector<std::optional<FunctionTerm>> terms;
  for (const auto& name : d.nodes()) terms.push_back(schema.parse_term(name));
  for (auto [a, b] : d.edges()) {
    if (!terms[a] || !terms[b]) continue;
    const auto ta = *terms[a], tb = *terms[b];
    if (table_of(schema, ta) == table_of(schema, tb)) continue;
    const auto& va = schema.variables_of(ta);
    const auto& vb = schema.variables_of(tb);
    const bool share = std::any_of(va.begin(), va.end(), [&](auto v) { return std::find(vb.begin(), vb.end(), v) != vb.end(); });
    if (share) continue;
    std::vector<std::size_t> indicator_parents;
    for (auto p : d.parents(b)) {
      if (terms[p] && schema.is_relationship(*terms[p])) indicator_parents.push_back(*schema.relationship_of(*terms[p]));
    }
    const auto comp = components(schema, indicator_parents);
    const bool chained = std::any_of(va.begin(), va.end(), [&](auto x) {
      return std::any_of(vb.begin(), vb.end(), [&](auto y) { return comp[x] == comp[y]; });
    });
    if (chained) continue;
    for (auto r : shortest_relationship_path(schema, va, vb)) {
      if (auto ind = d.find(schema.term_string(schema.relationship_term(r)))) d.add_edge(*ind, b);
    }
  }
  return d;
}

Dag learn_jbn_structure(const DatabaseInstance& db, const LearnerConfig& cfg, LearnReport* report) {
  const auto& schema = db.schema();
  EdgeConstraints acc;
  auto note = [&](const std::string& line) {
    if (report) report->lines.push_back(line);
  };
  auto learn = [&](const JoinPlanNode& plan, const std::string& phase) {
    const auto table = build_join_table(db, plan);
    const auto g = learn_table_structure(table, acc, cfg);
    std::string tables;
    for (const auto& t : plan.tables) tables += (tables.empty() ? "" : "+") + t;
    note(phase + " " + tables + ": " + std::to_string(table.rows()) + " rows, " + std::to_string(g.edge_count()) +
         " edges");
    for (const auto& c : merge_constraints(acc, get_constraints(g))) note("  conflict: " + c);
  };

  for (std::size_t e = 0; e < schema.entity_types().size(); ++e) learn(entity_plan(schema, e), "entity");
  for (std::size_t r = 0; r < schema.relationships().size(); ++r) learn(relationship_plan(schema, r), "join");
  for (std::size_t i = 0; i < schema.relationships().size(); ++i) {
    for (std::size_t j = i + 1; j < schema.relationships().size(); ++j) {
      const auto& a = schema.relationships()[i].argument_types;
      const auto& b = schema.relationships()[j].argument_types;
      if (std::none_of(a.begin(), a.end(), [&](auto t) { return std::find(b.begin(), b.end(), t) != b.end(); })) continue;
      learn(pair_plan(schema, i, j), "pair");
    }
  }

  Dag d(jbn_node_names(schema));
  for (const auto& e : acc.required) {
    const auto from = d.index(e.from), to = d.index(e.to);
    if (d.creates_cycle(from, to)) {
      std::string cycle;
      for (const auto& n : find_cycle(d, from, to)) cycle += (cycle.empty() ? "" : " -> ") + n;
      throw CycleError("accumulated required edges form a cycle: " + cycle);
    }
    d.add_edge(from, to);
  }
  d = link_relationship_attributes(std::move(d), schema);
  return add_slot_chain_edges(std::move(d), schema);
}

}  // namespace relbn
