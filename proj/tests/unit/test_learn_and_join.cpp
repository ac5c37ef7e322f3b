#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "relbn/learn_and_join.hpp"
#include "relbn/model.hpp"

using namespace relbn;

namespace {

std::vector<std::string> column_names(const FlatTable& t) {
  std::vector<std::string> out;
  for (const auto& c : t.columns) out.push_back(c.name);
  return out;
}

std::string owner(const Schema& s, FunctionTerm t) {
  if (auto r = s.relationship_of(t)) return "rel:" + s.relationships()[*r].name;
  return "ent:" + s.entity_types()[s.function(t).owner].name;
}

bool shares_variable(const Schema& s, FunctionTerm a, FunctionTerm b) {
  for (auto x : s.variables_of(a))
    for (auto y : s.variables_of(b))
      if (x == y) return true;
  return false;
}

// Whether the indicator parents of `b` chain some variable of `a` to some
// variable of `b`, by union-find over the entity types they mention.
bool chained_by_indicators(const Schema& s, const Dag& d, FunctionTerm a, FunctionTerm b) {
  std::vector<std::size_t> parent(s.entity_types().size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (auto p : d.parents(d.index(s.term_string(b)))) {
    const auto t = *s.parse_term(d.name(p));
    if (!s.is_relationship(t)) continue;
    const auto& v = s.variables_of(t);
    for (std::size_t k = 1; k < v.size(); ++k) parent[root(v[k])] = root(v[0]);
  }
  for (auto x : s.variables_of(a))
    for (auto y : s.variables_of(b))
      if (root(x) == root(y)) return true;
  return false;
}

void check_jbn_invariants(const Schema& s, const Dag& d) {
  CHECK(d.nodes() == jbn_node_names(s));
  CHECK(d.topological_order().size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto t = *s.parse_term(d.name(i));
    if (s.is_relationship(t)) CHECK(d.parents(i).empty());
  }
  for (auto [a, b] : d.edges()) {
    const auto ta = *s.parse_term(d.name(a)), tb = *s.parse_term(d.name(b));
    if (owner(s, ta) == owner(s, tb)) continue;
    CAPTURE(d.name(a));
    CAPTURE(d.name(b));
    CHECK((shares_variable(s, ta, tb) || chained_by_indicators(s, d, ta, tb)));
  }
}

Schema chain_schema() {
  // A - R1 - B - R2 - C: an edge between A and C attributes needs both links.
  Schema s;
  s.add_entity_type(EntityType{"A", "X", "aid", "", {{"a", {"0", "1"}, 0}}});
  s.add_entity_type(EntityType{"B", "Y", "bid", "", {{"b", {"0", "1"}, 0}}});
  s.add_entity_type(EntityType{"C", "Z", "cid", "", {{"c", {"0", "1"}, 0}}});
  RelationshipDecl r1;
  r1.name = "R1";
  r1.key_columns = {"aid", "bid"};
  r1.argument_type_names = {"A", "B"};
  s.add_relationship(r1);
  RelationshipDecl r2;
  r2.name = "R2";
  r2.key_columns = {"bid", "cid"};
  r2.argument_type_names = {"B", "C"};
  s.add_relationship(r2);
  s.finalize();
  return s;
}

}  // namespace

TEST_CASE("single relationship join on the fixture") {
  const auto db = testing::load_university();
  const auto& s = db.schema();
  const auto t = build_join_table(db, relationship_plan(s, *s.find_relationship("Registered")));
  CHECK(t.rows() == 4);
  const auto names = column_names(t);
  CHECK(std::set<std::string>(names.begin(), names.end()) ==
        std::set<std::string>{"intelligence(S)", "ranking(S)", "difficulty(C)", "rating(C)", "grade(S,C)", "satisfaction(S,C)"});
  CHECK(names.size() == 6);
  // jack,101 -> intelligence 3, difficulty 2, grade B
  bool found = false;
  const auto ii = *t.column_index("intelligence(S)"), di = *t.column_index("difficulty(C)"), gi = *t.column_index("grade(S,C)");
  for (std::size_t r = 0; r < t.rows(); ++r)
    found = found || (t.columns[ii].states[t.at(r, ii)] == "3" && t.columns[di].states[t.at(r, di)] == "2" &&
                      t.columns[gi].states[t.at(r, gi)] == "B");
  CHECK(found);
}

TEST_CASE("pair join rows match the brute-force count") {
  const auto db = testing::load_university();
  const auto& s = db.schema();
  const auto plan = pair_plan(s, *s.find_relationship("RA"), *s.find_relationship("Registered"));
  const auto t = build_join_table(db, plan);
  const auto oracle = count_groundings_bruteforce(db, testing::conj(s, "Registered(S,C), RA(S,P)"));
  CHECK(static_cast<std::int64_t>(t.rows()) == oracle.count);
  const auto names = column_names(t);
  CHECK(names.size() == 10);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 10);

  std::mt19937_64 rng(3);
  const auto schema = testing::small_schema();
  for (int trial = 0; trial < 20; ++trial) {
    const auto rdb = testing::random_database(schema, rng);
    const auto& rs = rdb.schema();
    for (auto [a, b, text] : {std::tuple{"Registered", "RA", "Registered(S,C), RA(S,P)"},
                              std::tuple{"Registered", "Teaches", "Registered(S,C), Teaches(P,C)"},
                              std::tuple{"RA", "Teaches", "RA(S,P), Teaches(P,C)"}}) {
      const auto pt = build_join_table(rdb, pair_plan(rs, *rs.find_relationship(a), *rs.find_relationship(b)));
      CHECK(static_cast<std::int64_t>(pt.rows()) == count_groundings_bruteforce(rdb, testing::conj(rs, text)).count);
    }
  }
}

TEST_CASE("pairs without a shared entity type are rejected") {
  const auto s = chain_schema();
  CHECK_NOTHROW(pair_plan(s, 0, 1));
  Schema t;
  t.add_entity_type(EntityType{"A", "X", "aid", "", {}});
  t.add_entity_type(EntityType{"B", "Y", "bid", "", {}});
  t.add_entity_type(EntityType{"C", "Z", "cid", "", {}});
  t.add_entity_type(EntityType{"D", "W", "did", "", {}});
  RelationshipDecl r1;
  r1.name = "R1";
  r1.key_columns = {"aid", "bid"};
  r1.argument_type_names = {"A", "B"};
  t.add_relationship(r1);
  RelationshipDecl r2;
  r2.name = "R2";
  r2.key_columns = {"cid", "did"};
  r2.argument_type_names = {"C", "D"};
  t.add_relationship(r2);
  t.finalize();
  CHECK_THROWS_AS(pair_plan(t, 0, 1), std::invalid_argument);
}

TEST_CASE("an empty relationship gives an empty join table") {
  const auto fixture = testing::load_university();
  DatabaseInstance db(fixture.schema());
  const auto& s = db.schema();
  for (std::size_t e = 0; e < s.entity_types().size(); ++e)
    for (std::size_t c = 0; c < fixture.entity_count(e); ++c) {
      std::vector<Value> v;
      for (std::size_t a = 0; a < s.entity_types()[e].attributes.size(); ++a) v.push_back(fixture.entity_value(e, a, static_cast<ConstantId>(c)));
      db.add_entity(e, fixture.constant_name(e, static_cast<ConstantId>(c)), v);
    }
  const auto t = build_join_table(db, relationship_plan(s, *s.find_relationship("Registered")));
  CHECK(t.rows() == 0);
  CHECK(t.width() == 6);
  const auto d = learn_jbn_structure(db, {});
  check_jbn_invariants(s, d);
}

TEST_CASE("learning on the fixture") {
  const auto db = testing::load_university();
  const auto& s = db.schema();
  LearnReport report;
  const auto d = learn_jbn_structure(db, {}, &report);
  // Ten descriptive attributes and two indicators.
  CHECK(d.size() == 12);
  check_jbn_invariants(s, d);
  CHECK(report.lines.size() >= 6);
  CHECK(learn_jbn_structure(db, {}) == d);
  // Every relationship attribute has its indicator as a parent.
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto t = *s.parse_term(d.name(i));
    if (!s.is_relationship_attribute(t)) continue;
    const auto ind = d.index(s.term_string(s.relationship_term(*s.relationship_of(t))));
    CHECK(d.has_edge(ind, i));
  }
}

TEST_CASE("earlier phases are inherited") {
  std::mt19937_64 rng(8);
  const auto schema = testing::small_schema();
  for (int trial = 0; trial < 10; ++trial) {
    const auto db = testing::random_database(schema, rng, 12);
    const auto& s = db.schema();
    const auto d = learn_jbn_structure(db, {});
    check_jbn_invariants(s, d);
    // Phase 1 alone on each entity table decides the edges among its attributes.
    for (std::size_t e = 0; e < s.entity_types().size(); ++e) {
      const auto g = learn_table_structure(build_join_table(db, entity_plan(s, e)), {}, {});
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
          if (i != j) CHECK(g.has_edge(i, j) == d.has_edge(d.index(g.name(i)), d.index(g.name(j))));
    }
    // Phase 2 constraints survive into the final graph among relationship and entity attributes.
    EdgeConstraints acc;
    for (std::size_t e = 0; e < s.entity_types().size(); ++e)
      merge_constraints(acc, get_constraints(learn_table_structure(build_join_table(db, entity_plan(s, e)), acc, {})));
    for (std::size_t r = 0; r < s.relationships().size(); ++r) {
      const auto g = learn_table_structure(build_join_table(db, relationship_plan(s, r)), acc, {});
      merge_constraints(acc, get_constraints(g));
    }
    for (const auto& e : acc.required) CHECK(d.has_edge(d.index(e.from), d.index(e.to)));
    for (const auto& e : acc.forbidden) {
      // Only indicator edges from the slot-chain phase may enter here, and indicators are never columns.
      CHECK_FALSE(d.has_edge(d.index(e.from), d.index(e.to)));
    }
  }
}

TEST_CASE("a database with one entity table keeps the phase-one graph") {
  Schema s;
  s.add_entity_type(EntityType{"Student", "S", "sid", "", {{"a", {"0", "1"}, 0}, {"b", {"0", "1"}, 0}, {"c", {"0", "1", "2"}, 0}}});
  s.finalize();
  DatabaseInstance db(s);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 300; ++i) {
    const int a = static_cast<int>(rng() % 2);
    db.add_entity(0, "s" + std::to_string(i), {a, rng() % 5 ? a : 1 - a, static_cast<int>(rng() % 3)});
  }
  const auto phase1 = learn_table_structure(build_join_table(db, entity_plan(db.schema(), 0)), {}, {});
  const auto d = learn_jbn_structure(db, {});
  CHECK(d.size() == phase1.size());
  CHECK(d.edges() == phase1.edges());
  CHECK(d.edge_count() >= 1);
}

TEST_CASE("slot-chain edges") {
  const auto db = testing::load_university();
  const auto& s = db.schema();
  const auto names = jbn_node_names(s);

  SUBCASE("an edge across a link gains the indicator") {
    Dag d(names);
    d.add_edge("intelligence(S)", "difficulty(C)");
    const auto out = add_slot_chain_edges(d, s);
    CHECK(out.has_edge(out.index("Registered(S,C)"), out.index("difficulty(C)")));
    CHECK(out.edge_count() == 2);
  }
  SUBCASE("a shared variable needs nothing") {
    Dag d(names);
    d.add_edge("grade(S,C)", "ranking(S)");
    CHECK(add_slot_chain_edges(d, s) == d);
  }
  SUBCASE("an indicator parent already present leaves the graph alone") {
    Dag d(names);
    d.add_edge("intelligence(S)", "difficulty(C)");
    d.add_edge("Registered(S,C)", "difficulty(C)");
    CHECK(add_slot_chain_edges(d, s) == d);
  }
  SUBCASE("professor to course goes through the student") {
    Dag d(names);
    d.add_edge("popularity(P)", "difficulty(C)");
    const auto out = add_slot_chain_edges(d, s);
    CHECK(out.has_edge(out.index("RA(S,P)"), out.index("difficulty(C)")));
    CHECK(out.has_edge(out.index("Registered(S,C)"), out.index("difficulty(C)")));
  }
  SUBCASE("longer chains") {
    const auto cs = chain_schema();
    Dag d(jbn_node_names(cs));
    d.add_edge("a(X)", "c(Z)");
    const auto out = add_slot_chain_edges(d, cs);
    CHECK(out.has_edge(out.index("R1(X,Y)"), out.index("c(Z)")));
    CHECK(out.has_edge(out.index("R2(Y,Z)"), out.index("c(Z)")));
    check_jbn_invariants(cs, out);
  }
}

TEST_CASE("relationship attributes are linked to their indicator") {
  const auto db = testing::load_university();
  const auto& s = db.schema();
  const auto out = link_relationship_attributes(Dag(jbn_node_names(s)), s);
  CHECK(out.edge_count() == 4);
  CHECK(out.has_edge(out.index("RA(S,P)"), out.index("salary(S,P)")));
  CHECK(out.has_edge(out.index("Registered(S,C)"), out.index("satisfaction(S,C)")));
}
