#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "relbn/frequency.hpp"
#include "relbn/query.hpp"

using namespace relbn;
using relbn::testing::conj;

namespace {

FrequencyResult fast(const DatabaseInstance& db, const std::string& text) { return frequency(db, conj(db.schema(), text)); }
FrequencyResult slow(const DatabaseInstance& db, const std::string& text) {
  return count_groundings_bruteforce(db, conj(db.schema(), text));
}

}  // namespace

TEST_CASE("university fixture reproduces the frequency table") {
  const auto db = testing::load_university();
  struct Row {
    const char* conjunction;
    std::int64_t count, space;
  };
  const Row rows[] = {
      {"intelligence(S)=1", 1, 3},
      {"intelligence(S)=2", 1, 3},  // paul
      {"ranking(S)=1, intelligence(S)=3", 1, 3},
      {"grade(S,C)=B", 2, 6},
      {"Registered(S,C)", 4, 6},
      {"!Registered(S,C)", 2, 6},
      {"grade(S,C)=_BOT_", 2, 6},
      {"grade(S,C)=B, salary(S,P)=hi", 1, 12},
  };
  for (const auto& r : rows) {
    CAPTURE(r.conjunction);
    const auto f = fast(db, r.conjunction);
    CHECK(f.count == r.count);
    CHECK(f.grounding_space == r.space);
    CHECK(f.frequency() == Rational(r.count, r.space));
    CHECK(slow(db, r.conjunction) == f);
  }
}

TEST_CASE("zero variables and empty domains are errors") {
  const auto db = testing::load_university();
  CHECK_THROWS_AS(frequency(db, Conjunction{}), std::invalid_argument);
  CHECK_THROWS_AS(count_groundings_bruteforce(db, Conjunction{}), std::invalid_argument);

  auto schema = testing::small_schema();
  DatabaseInstance empty(schema);
  empty.add_entity(0, "c0", {0});  // Course
  empty.add_entity(2, "s0", {0, 0});  // Student
  CHECK_THROWS_AS(frequency(empty, conj(schema, "pop(P)=p1")), std::domain_error);
  CHECK(frequency(empty, conj(schema, "!reg(S,C)")).count == 1);
}

TEST_CASE("join_frequencies on the fixture") {
  const auto db = testing::load_university();
  const auto& s = db.schema();
  const auto grade = *s.find_function("grade");
  const auto reg = *s.find_relationship("Registered");
  const auto intelligence = *s.find_function("intelligence");

  const FunctionTerm attrs[] = {grade};
  const std::size_t rels[] = {reg};
  auto g = join_frequencies(db, attrs, rels);
  CHECK(g.total() == 4);
  CHECK(g.count({*s.parse_value(grade, "A")}) == 1);
  CHECK(g.count({*s.parse_value(grade, "B")}) == 2);
  CHECK(g.count({*s.parse_value(grade, "C")}) == 1);
  CHECK(g.count({*s.parse_value(grade, "D")}) == 0);
  CHECK(g.grounding_space == 6);

  const FunctionTerm ia[] = {intelligence};
  auto hist = join_frequencies(db, ia, {});
  CHECK(hist.total() == 3);
  for (Value v = 0; v < 3; ++v) CHECK(hist.count({v}) == 1);

  auto none = join_frequencies(db, {}, rels);
  CHECK(none.counts.size() == 1);
  CHECK(none.count({}) == 4);

  // A relationship attribute needs its relationship to be positive.
  CHECK_THROWS_AS(join_frequencies(db, attrs, {}), std::invalid_argument);
}

TEST_CASE("join_frequencies agrees with the oracle on random databases") {
  std::mt19937_64 rng(7);
  const auto schema = testing::small_schema();
  for (int trial = 0; trial < 20; ++trial) {
    const auto db = testing::random_database(schema, rng);
    const auto& s = db.schema();
    const std::vector<FunctionTerm> attrs = {*s.find_function("intel"), *s.find_function("grade"),
                                             *s.find_function("salary"), *s.find_function("diff")};
    const std::vector<std::size_t> rels = {*s.find_relationship("Registered"), *s.find_relationship("RA")};
    FrequencyEngine engine(db);
    auto jc = engine.join_frequencies(attrs, rels);
    std::int64_t total = 0;
    for (Value a = 0; a < 3; ++a)
      for (Value g = 0; g < 3; ++g)
        for (Value sa = 0; sa < 2; ++sa)
          for (Value d = 0; d < 2; ++d) {
            Conjunction c{{Literal{attrs[0], a}, Literal{attrs[1], g}, Literal{attrs[2], sa}, Literal{attrs[3], d}}};
            const auto oracle = count_groundings_bruteforce(db, c);
            CHECK(jc.count({a, g, sa, d}) == oracle.count);
            CHECK(jc.grounding_space == oracle.grounding_space);
            total += oracle.count;
          }
    CHECK(jc.total() == total);
  }
}

TEST_CASE("frequency equals the oracle on random conjunctions") {
  std::mt19937_64 rng(11);
  const auto schema = testing::small_schema();
  int checked = 0;
  for (int d = 0; d < 30; ++d) {
    const auto db = testing::random_database(schema, rng);
    FrequencyEngine engine(db);
    for (int q = 0; q < 40; ++q) {
      const auto c = testing::random_conjunction(db.schema(), rng);
      CAPTURE(to_string(db.schema(), c));
      CHECK(engine.frequency(c) == count_groundings_bruteforce(db, c));
      ++checked;
    }
  }
  CHECK(checked == 1200);
}

TEST_CASE("marginalization, complement and monotonicity") {
  std::mt19937_64 rng(5);
  const auto schema = testing::small_schema();
  for (int d = 0; d < 15; ++d) {
    const auto db = testing::random_database(schema, rng);
    const auto& s = db.schema();
    FrequencyEngine engine(db);
    for (int q = 0; q < 10; ++q) {
      const auto c = testing::random_conjunction(s, rng, 3);
      const auto base = engine.frequency(c);
      // Complement on every relationship, over the variables of C and R.
      for (std::size_t r = 0; r < s.relationships().size(); ++r) {
        const auto term = s.relationship_term(r);
        if (std::any_of(c.literals.begin(), c.literals.end(), [&](const Literal& l) { return l.term == term; })) continue;
        auto vars = conjunction_variables(s, c);
        for (auto t : s.variables_of(term)) vars.push_back(t);
        auto with_t = c, with_f = c;
        with_t.literals.push_back(Literal{term, kTrue});
        with_f.literals.push_back(Literal{term, kFalse});
        CHECK(engine.frequency_over(with_t, vars).count + engine.frequency_over(with_f, vars).count ==
              engine.frequency_over(c, vars).count);
      }
      // Marginalization over an attribute whose variables are already in C.
      const auto vars = conjunction_variables(s, c);
      for (auto t : s.all_terms()) {
        if (s.is_relationship(t)) continue;
        const auto& tv = s.variables_of(t);
        if (!std::all_of(tv.begin(), tv.end(), [&](auto v) { return std::binary_search(vars.begin(), vars.end(), v); })) continue;
        if (std::any_of(c.literals.begin(), c.literals.end(), [&](const Literal& l) { return l.term == t; })) continue;
        std::int64_t sum = 0;
        for (Value v = 0; v < static_cast<Value>(s.domain_size(t)); ++v) {
          auto e = c;
          e.literals.push_back(Literal{t, v});
          const auto f = engine.frequency(e);
          CHECK(f.count <= base.count);  // monotonicity
          sum += f.count;
        }
        if (s.is_relationship_attribute(t)) {
          auto e = c;
          e.literals.push_back(Literal{t, kBottom});
          sum += engine.frequency(e).count;
        }
        CHECK(sum == base.count);
      }
    }
  }
}

TEST_CASE("a lone entity attribute is an ordinary table frequency") {
  const auto db = testing::load_university();
  Rational total = 0;
  for (const char* v : {"1", "2", "3"}) total += fast(db, std::string("ranking(S)=") + v).frequency();
  CHECK(total == Rational(1));
}

TEST_CASE("negative relationship literals are not enumerated") {
  Schema schema;
  schema.add_entity_type(EntityType{"Student", "S", "sid", "", {{"x", {"0", "1"}, 0}}});
  schema.add_entity_type(EntityType{"Course", "C", "cid", "", {{"y", {"0", "1"}, 0}}});
  RelationshipDecl reg;
  reg.name = "Registered";
  reg.key_columns = {"sid", "cid"};
  reg.argument_type_names = {"Student", "Course"};
  schema.add_relationship(reg);
  DatabaseInstance db(schema);
  const auto student = *db.schema().find_entity_type("Student");
  const auto course = *db.schema().find_entity_type("Course");
  for (int i = 0; i < 2000; ++i) db.add_entity(student, "s" + std::to_string(i), {i % 2});
  for (int j = 0; j < 100; ++j) db.add_entity(course, "c" + std::to_string(j), {j % 2});
  for (int i = 0; i < 2000; ++i)
    for (int k = 0; k < 10; ++k) db.add_tuple(0, {i, (i + k * 7) % 100}, {});
  FrequencyEngine engine(db);
  const auto r = engine.frequency(conj(db.schema(), "!Registered(S,C)"));
  CHECK(r.count == 2000 * 100 - 20000);
  CHECK(r.grounding_space == 200000);
  const auto st = engine.stats();
  CHECK(st.groundings_enumerated == 0);
  CHECK(st.tuples_read <= 20000 + 2100);
  CHECK(st.join_rows == 0);
}
