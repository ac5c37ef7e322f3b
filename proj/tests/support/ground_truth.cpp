#include "ground_truth.hpp"

#include <algorithm>

namespace relbn::testing {

namespace {

// Mass `peak` on state `mode`, the rest spread evenly over the other
// `states` non-⊥ states.
std::vector<double> peaked(std::size_t card, std::size_t states, std::size_t mode, double peak) {
  std::vector<double> p(card, 0.0);
  for (std::size_t s = 0; s < states; ++s) p[s] = s == mode ? peak : (1 - peak) / static_cast<double>(states - 1);
  return p;
}

}  // namespace

JbnModel university_truth(const Schema& schema, double link) {
  Dag d(jbn_node_names(schema));
  for (auto [a, b] : {std::pair{"difficulty(C)", "rating(C)"},
                      {"teaching_ability(P)", "popularity(P)"},
                      {"intelligence(S)", "ranking(S)"},
                      {"Registered(S,C)", "grade(S,C)"},
                      {"Registered(S,C)", "satisfaction(S,C)"},
                      {"intelligence(S)", "grade(S,C)"},
                      {"difficulty(C)", "grade(S,C)"},
                      {"grade(S,C)", "satisfaction(S,C)"},
                      {"RA(S,P)", "capability(S,P)"},
                      {"RA(S,P)", "salary(S,P)"},
                      {"intelligence(S)", "capability(S,P)"},
                      {"capability(S,P)", "salary(S,P)"}})
    d.add_edge(a, b);
  JbnModel m{schema, make_jbn(schema, d)};
  const std::vector<double> root3{0.5, 0.3, 0.2};
  for (std::size_t i = 0; i < m.net.size(); ++i) {
    const auto t = m.term(i);
    auto table = m.net.blank_cpt(i);
    const auto& parents = m.net.dag().parents(i);
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      const auto pa = table.row_assignment(r);
      const auto card = table.child_cardinality();
      if (schema.is_relationship(t)) {
        table.set_row(r, std::vector<double>{link, 1 - link});
        continue;
      }
      if (parents.empty()) {
        table.set_row(r, root3);
        continue;
      }
      bool unlinked = false;
      std::size_t mode = 0;
      for (std::size_t k = 0; k < parents.size(); ++k) {
        if (schema.is_relationship(m.term(parents[k]))) unlinked = unlinked || pa[k] == 1;
        else mode += static_cast<std::size_t>(pa[k]);
      }
      if (schema.is_relationship_attribute(t)) {
        if (unlinked) {
          std::vector<double> p(card, 0.0);
          p.back() = 1;
          table.set_row(r, p);
        } else {
          table.set_row(r, peaked(card, card - 1, mode % (card - 1), 0.75));
        }
      } else {
        table.set_row(r, peaked(card, card, mode % card, 0.75));
      }
    }
    m.net.set_cpt(i, std::move(table));
  }
  return m;
}

Skeleton skeleton(const Dag& d) {
  Skeleton out;
  for (auto [a, b] : d.edges()) out.insert(std::minmax(d.name(a), d.name(b)));
  return out;
}

Skeleton attribute_skeleton(const Schema& schema, const Dag& d) {
  Skeleton out;
  for (auto [a, b] : d.edges()) {
    if (schema.is_relationship(*schema.parse_term(d.name(a))) || schema.is_relationship(*schema.parse_term(d.name(b)))) continue;
    out.insert(std::minmax(d.name(a), d.name(b)));
  }
  return out;
}

Scores compare_skeletons(const Skeleton& truth, const Skeleton& learned) {
  std::size_t hit = 0;
  for (const auto& e : learned) hit += truth.count(e);
  Scores s;
  s.precision = learned.empty() ? 0 : static_cast<double>(hit) / static_cast<double>(learned.size());
  s.recall = truth.empty() ? 0 : static_cast<double>(hit) / static_cast<double>(truth.size());
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0;
  return s;
}

}  // namespace relbn::testing
