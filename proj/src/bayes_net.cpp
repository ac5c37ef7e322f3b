#include "relbn/bayes_net.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

namespace relbn {

// ---------------------------------------------------------------- Dag

Dag::Dag(std::vector<std::string> nodes) : names_(std::move(nodes)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw std::invalid_argument("empty node name");
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate node " + n);
  }
  parents_.resize(names_.size());
  children_.resize(names_.size());
}

std::optional<std::size_t> Dag::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Dag::index(std::string_view name) const {
  auto i = find(name);
  if (!i) throw std::out_of_range("unknown node " + std::string(name));
  return *i;
}

bool Dag::has_edge(std::size_t from, std::size_t to) const {
  const auto& p = parents_.at(to);
  return std::binary_search(p.begin(), p.end(), from);
}

bool Dag::reachable(std::size_t from, std::size_t to) const {
  std::vector<char> seen(size(), 0);
  std::vector<std::size_t> stack{from};
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    if (n == to) return true;
    if (seen[n]) continue;
    seen[n] = 1;
    for (auto c : children_[n]) stack.push_back(c);
  }
  return false;
}

bool Dag::creates_cycle(std::size_t from, std::size_t to) const { return from == to || reachable(to, from); }

void Dag::add_edge(std::size_t from, std::size_t to) {
  if (from >= size() || to >= size()) throw std::out_of_range("edge endpoint out of range");
  if (has_edge(from, to)) return;
  if (creates_cycle(from, to)) throw CycleError("edge " + names_[from] + " -> " + names_[to] + " creates a cycle");
  auto& p = parents_[to];
  p.insert(std::upper_bound(p.begin(), p.end(), from), from);
  auto& c = children_[from];
  c.insert(std::upper_bound(c.begin(), c.end(), to), to);
}

void Dag::remove_edge(std::size_t from, std::size_t to) {
  std::erase(parents_.at(to), from);
  std::erase(children_.at(from), to);
}

std::size_t Dag::edge_count() const {
  std::size_t n = 0;
  for (const auto& p : parents_) n += p.size();
  return n;
}

std::vector<std::pair<std::size_t, std::size_t>> Dag::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t from = 0; from < size(); ++from) {
    for (auto to : children_[from]) out.emplace_back(from, to);
  }
  return out;
}

std::vector<std::size_t> Dag::topological_order() const {
  std::vector<std::size_t> indegree(size());
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < size(); ++i) {
    indegree[i] = parents_[i].size();
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    auto n = ready.top();
    ready.pop();
    order.push_back(n);
    for (auto c : children_[n]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  return order;
}

// ---------------------------------------------------------------- CPTable

CPTable::CPTable(std::size_t child_cardinality, std::vector<std::size_t> parent_cardinalities)
    : child_card_(child_cardinality), parent_cards_(std::move(parent_cardinalities)) {
  if (child_card_ == 0) throw std::invalid_argument("child cardinality must be positive");
  std::size_t rows = 1;
  for (auto c : parent_cards_) {
    if (c == 0) throw std::invalid_argument("parent cardinality must be positive");
    rows *= c;
  }
  probs_.assign(rows * child_card_, 0.0);
  defined_.assign(rows, 0);
}

std::size_t CPTable::row_index(std::span<const int> parent_values) const {
  if (parent_values.size() != parent_cards_.size()) throw std::invalid_argument("parent assignment has wrong length");
  std::size_t row = 0;
  for (std::size_t i = 0; i < parent_cards_.size(); ++i) {
    const auto v = parent_values[i];
    if (v < 0 || static_cast<std::size_t>(v) >= parent_cards_[i]) throw std::out_of_range("parent state out of range");
    row = row * parent_cards_[i] + static_cast<std::size_t>(v);
  }
  return row;
}

std::vector<int> CPTable::row_assignment(std::size_t row) const {
  std::vector<int> out(parent_cards_.size());
  for (std::size_t i = parent_cards_.size(); i-- > 0;) {
    out[i] = static_cast<int>(row % parent_cards_[i]);
    row /= parent_cards_[i];
  }
  return out;
}

bool CPTable::complete() const {
  return std::all_of(defined_.begin(), defined_.end(), [](char d) { return d != 0; });
}

void CPTable::set_row(std::size_t row, std::span<const double> distribution) {
  if (row >= row_count()) throw std::out_of_range("CP row out of range");
  if (distribution.size() != child_card_) throw std::invalid_argument("CP row has wrong length");
  double sum = 0;
  for (double p : distribution) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("CP entry outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("CP row sums to " + format_double(sum));
  std::copy(distribution.begin(), distribution.end(), probs_.begin() + static_cast<std::ptrdiff_t>(row * child_card_));
  defined_[row] = 1;
}

// ---------------------------------------------------------------- BayesNet

BayesNet::BayesNet(std::vector<Variable> variables, Dag dag) : variables_(std::move(variables)), dag_(std::move(dag)) {
  if (dag_.size() != variables_.size()) throw std::invalid_argument("DAG and variable list differ in size");
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (dag_.name(i) != variables_[i].name) throw std::invalid_argument("DAG node order differs from variables");
    if (variables_[i].states.empty()) throw std::invalid_argument("variable " + variables_[i].name + " has no states");
    std::set<std::string> seen(variables_[i].states.begin(), variables_[i].states.end());
    if (seen.size() != variables_[i].states.size()) {
      throw std::invalid_argument("variable " + variables_[i].name + " repeats a state");
    }
  }
  cpts_.resize(variables_.size());
}

std::optional<int> BayesNet::state_index(std::size_t node, std::string_view label) const {
  const auto& s = variable(node).states;
  auto it = std::find(s.begin(), s.end(), label);
  if (it == s.end()) return std::nullopt;
  return static_cast<int>(it - s.begin());
}

std::string BayesNet::family_string(std::size_t i) const {
  std::string s = variable(i).name;
  const auto& p = dag_.parents(i);
  if (!p.empty()) {
    s += " |";
    for (auto q : p) s += " " + variable(q).name;
  }
  return s;
}

const CPTable& BayesNet::cpt(std::size_t i) const {
  if (!cpts_.at(i)) throw std::logic_error("no CP-table fitted for family " + family_string(i));
  return *cpts_[i];
}

CPTable BayesNet::blank_cpt(std::size_t i) const {
  std::vector<std::size_t> cards;
  for (auto p : dag_.parents(i)) cards.push_back(cardinality(p));
  return CPTable(cardinality(i), std::move(cards));
}

void BayesNet::set_cpt(std::size_t i, CPTable table) {
  std::vector<std::size_t> cards;
  for (auto p : dag_.parents(i)) cards.push_back(cardinality(p));
  if (table.child_cardinality() != cardinality(i) || table.parent_cardinalities() != cards) {
    throw std::invalid_argument("CP-table shape does not match family " + family_string(i));
  }
  cpts_.at(i) = std::move(table);
}

bool BayesNet::fitted() const {
  return std::all_of(cpts_.begin(), cpts_.end(), [](const auto& t) { return t.has_value(); });
}

double joint_probability(const BayesNet& bn, std::span<const int> assignment) {
  if (assignment.size() != bn.size()) throw std::invalid_argument("assignment must cover every node");
  double p = 1.0;
  std::vector<int> pv;
  for (std::size_t i = 0; i < bn.size(); ++i) {
    const auto& table = bn.cpt(i);
    if (assignment[i] < 0 || static_cast<std::size_t>(assignment[i]) >= bn.cardinality(i)) {
      throw std::out_of_range("state out of range for " + bn.variable(i).name);
    }
    pv.clear();
    for (auto q : bn.dag().parents(i)) pv.push_back(assignment[q]);
    const auto row = table.row_index(pv);
    if (!table.defined(row)) throw std::logic_error("missing CP row in family " + bn.family_string(i));
    p *= table.p(row, assignment[i]);
  }
  return p;
}

// ---------------------------------------------------------------- inference

namespace {

struct Factor {
  std::vector<std::size_t> vars;  // ascending node index; last varies fastest
  std::vector<std::size_t> cards;
  std::vector<double> values;

  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(vars.size());
    std::size_t acc = 1;
    for (std::size_t i = vars.size(); i-- > 0;) {
      s[i] = acc;
      acc *= cards[i];
    }
    return s;
  }
  std::size_t stride_of(std::size_t var) const {
    auto s = strides();
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i] == var) return s[i];
    }
    return 0;
  }
};

// Walks every assignment of `f`'s scope, calling fn(index in f, assignment).
template <typename Fn>
void for_each_assignment(const std::vector<std::size_t>& cards, Fn&& fn) {
  std::vector<std::size_t> a(cards.size(), 0);
  std::size_t n = 1;
  for (auto c : cards) n *= c;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, a);
    for (std::size_t j = cards.size(); j-- > 0;) {
      if (++a[j] < cards[j]) break;
      a[j] = 0;
    }
  }
}

Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(), std::back_inserter(out.vars));
  std::vector<std::size_t> sa, sb;
  for (auto v : out.vars) {
    auto ia = std::find(a.vars.begin(), a.vars.end(), v);
    out.cards.push_back(ia != a.vars.end() ? a.cards[static_cast<std::size_t>(ia - a.vars.begin())]
                                           : b.cards[static_cast<std::size_t>(
                                                 std::find(b.vars.begin(), b.vars.end(), v) - b.vars.begin())]);
    sa.push_back(a.stride_of(v));
    sb.push_back(b.stride_of(v));
  }
  std::size_t n = 1;
  for (auto c : out.cards) n *= c;
  out.values.resize(n);
  for_each_assignment(out.cards, [&](std::size_t i, const std::vector<std::size_t>& x) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      ia += x[j] * sa[j];
      ib += x[j] * sb[j];
    }
    out.values[i] = a.values[ia] * b.values[ib];
  });
  return out;
}

Factor sum_out(const Factor& f, std::size_t var) {
  Factor out;
  for (std::size_t i = 0; i < f.vars.size(); ++i) {
    if (f.vars[i] == var) continue;
    out.vars.push_back(f.vars[i]);
    out.cards.push_back(f.cards[i]);
  }
  std::size_t n = 1;
  for (auto c : out.cards) n *= c;
  out.values.assign(n, 0.0);
  std::vector<std::size_t> so;
  for (auto v : f.vars) so.push_back(v == var ? 0 : out.stride_of(v));
  for_each_assignment(f.cards, [&](std::size_t i, const std::vector<std::size_t>& x) {
    std::size_t io = 0;
    for (std::size_t j = 0; j < x.size(); ++j) io += x[j] * so[j];
    out.values[io] += f.values[i];
  });
  return out;
}

Factor cpt_factor(const BayesNet& bn, std::size_t node) {
  const auto& table = bn.cpt(node);
  if (!table.complete()) throw std::logic_error("missing CP rows in family " + bn.family_string(node));
  const auto& parents = bn.dag().parents(node);
  Factor f;
  f.vars = parents;
  f.vars.push_back(node);
  std::sort(f.vars.begin(), f.vars.end());
  for (auto v : f.vars) f.cards.push_back(bn.cardinality(v));
  f.values.resize(table.row_count() * table.child_cardinality());
  std::vector<std::size_t> pos_parent;
  for (auto p : parents) pos_parent.push_back(static_cast<std::size_t>(std::find(f.vars.begin(), f.vars.end(), p) - f.vars.begin()));
  const auto pos_child = static_cast<std::size_t>(std::find(f.vars.begin(), f.vars.end(), node) - f.vars.begin());
  std::vector<int> pv(parents.size());
  for_each_assignment(f.cards, [&](std::size_t i, const std::vector<std::size_t>& x) {
    for (std::size_t k = 0; k < parents.size(); ++k) pv[k] = static_cast<int>(x[pos_parent[k]]);
    f.values[i] = table.p(table.row_index(pv), static_cast<int>(x[pos_child]));
  });
  return f;
}

// Eliminates every variable except `keep` (if any) and returns the product of
// what remains.
Factor eliminate(const BayesNet& bn, const MaskedEvidence& evidence, std::optional<std::size_t> keep,
                 const std::vector<std::size_t>* order) {
  std::vector<char> relevant(bn.size(), 0);
  std::vector<std::size_t> stack;
  if (keep) stack.push_back(*keep);
  for (const auto& [n, mask] : evidence) {
    if (n >= bn.size()) throw std::out_of_range("evidence node out of range");
    if (mask.size() != bn.cardinality(n)) throw std::invalid_argument("evidence mask has wrong length");
    stack.push_back(n);
  }
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    if (relevant[n]) continue;
    relevant[n] = 1;
    for (auto p : bn.dag().parents(n)) stack.push_back(p);
  }

  std::vector<Factor> factors;
  for (std::size_t n = 0; n < bn.size(); ++n) {
    if (relevant[n]) factors.push_back(cpt_factor(bn, n));
  }
  for (const auto& [n, mask] : evidence) {
    Factor ind;
    ind.vars = {n};
    ind.cards = {bn.cardinality(n)};
    for (char m : mask) ind.values.push_back(m ? 1.0 : 0.0);
    factors.push_back(std::move(ind));
  }

  std::set<std::size_t> pending;
  for (std::size_t n = 0; n < bn.size(); ++n) {
    if (relevant[n] && (!keep || n != *keep)) pending.insert(n);
  }
  auto eliminate_one = [&](std::size_t var) {
    std::optional<Factor> product;
    std::vector<Factor> rest;
    for (auto& f : factors) {
      if (std::binary_search(f.vars.begin(), f.vars.end(), var)) product = product ? multiply(*product, f) : f;
      else rest.push_back(std::move(f));
    }
    if (product) rest.push_back(sum_out(*product, var));
    factors = std::move(rest);
    pending.erase(var);
  };
  if (order) {
    for (auto v : *order) {
      if (pending.count(v)) eliminate_one(v);
    }
  }
  while (!pending.empty()) {
    std::size_t best = *pending.begin();
    std::size_t best_degree = SIZE_MAX;
    for (auto v : pending) {
      std::set<std::size_t> nb;
      for (const auto& f : factors) {
        if (std::binary_search(f.vars.begin(), f.vars.end(), v)) nb.insert(f.vars.begin(), f.vars.end());
      }
      const auto degree = nb.empty() ? 0 : nb.size() - 1;
      if (degree < best_degree) {
        best = v;
        best_degree = degree;
      }
    }
    eliminate_one(best);
  }
  Factor result;
  result.values = {1.0};
  for (const auto& f : factors) result = multiply(result, f);
  return result;
}

}  // namespace

std::vector<double> infer_masked(const BayesNet& bn, std::size_t target, const MaskedEvidence& evidence,
                                 const std::vector<std::size_t>* order) {
  if (target >= bn.size()) throw std::out_of_range("target node out of range");
  if (evidence.count(target)) throw std::invalid_argument("target " + bn.variable(target).name + " appears in the evidence");
  auto f = eliminate(bn, evidence, target, order);
  if (f.vars != std::vector<std::size_t>{target}) throw std::logic_error("elimination left a stray scope");
  double sum = 0;
  for (double v : f.values) sum += v;
  if (!(sum > 0.0)) throw ZeroEvidenceError("evidence has probability zero under the model");
  for (double& v : f.values) v /= sum;
  return f.values;
}

std::vector<double> infer(const BayesNet& bn, std::size_t target, const Evidence& evidence,
                          const std::vector<std::size_t>* order) {
  MaskedEvidence masked;
  for (const auto& [n, v] : evidence) {
    if (n >= bn.size()) throw std::out_of_range("evidence node out of range");
    if (v < 0 || static_cast<std::size_t>(v) >= bn.cardinality(n)) {
      throw std::out_of_range("evidence state out of range for " + bn.variable(n).name);
    }
    std::vector<char> mask(bn.cardinality(n), 0);
    mask[static_cast<std::size_t>(v)] = 1;
    masked.emplace(n, std::move(mask));
  }
  return infer_masked(bn, target, masked, order);
}

double evidence_probability(const BayesNet& bn, const MaskedEvidence& evidence) {
  auto f = eliminate(bn, evidence, std::nullopt, nullptr);
  double sum = 0;
  for (double v : f.values) sum += v;
  return sum;
}

// ---------------------------------------------------------------- text form

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  double v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::string write_network(const BayesNet& bn) {
  std::ostringstream out;
  out << "network\n";
  for (const auto& v : bn.variables()) {
    out << "variable " << v.name << ' ' << v.role;
    for (const auto& s : v.states) out << ' ' << s;
    out << '\n';
  }
  for (auto [from, to] : bn.dag().edges()) out << "edge " << bn.variable(from).name << ' ' << bn.variable(to).name << '\n';
  for (std::size_t i = 0; i < bn.size(); ++i) {
    if (!bn.has_cpt(i)) continue;
    const auto& table = bn.cpt(i);
    const auto& parents = bn.dag().parents(i);
    out << "cpt " << bn.variable(i).name << '\n';
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      if (!table.defined(r)) continue;
      out << "row";
      auto pa = table.row_assignment(r);
      for (std::size_t k = 0; k < parents.size(); ++k) {
        out << ' ' << bn.variable(parents[k]).states[static_cast<std::size_t>(pa[k])];
      }
      out << " :";
      for (double p : table.row(r)) out << ' ' << format_double(p);
      out << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

BayesNet read_network(std::string_view text, const std::string& origin, std::size_t first_line) {
  std::vector<Variable> vars;
  struct PendingEdge {
    std::string from, to;
    std::size_t line;
  };
  std::vector<PendingEdge> edges;
  std::vector<std::size_t> cpt_lines;
  struct PendingRow {
    std::vector<std::string> parents;
    std::vector<double> probs;
    std::size_t line;
  };
  std::vector<std::pair<std::string, std::vector<PendingRow>>> cpts;
  bool started = false, ended = false;
  std::size_t lineno = first_line - 1;
  auto fail = [&](const std::string& msg) -> std::invalid_argument {
    return std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + msg);
  };

  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (ended) throw fail("content after 'end'");
    if (!started) {
      if (tok != std::vector<std::string>{"network"}) throw fail("expected 'network'");
      started = true;
      continue;
    }
    const auto& kw = tok[0];
    if (kw == "variable") {
      if (tok.size() < 4) throw fail("variable needs a name, a role and at least one state");
      vars.push_back(Variable{tok[1], std::vector<std::string>(tok.begin() + 3, tok.end()), tok[2]});
    } else if (kw == "edge") {
      if (tok.size() != 3) throw fail("edge needs two node names");
      edges.push_back(PendingEdge{tok[1], tok[2], lineno});
    } else if (kw == "cpt") {
      if (tok.size() != 2) throw fail("cpt needs a node name");
      cpts.emplace_back(tok[1], std::vector<PendingRow>{});
      cpt_lines.push_back(lineno);
    } else if (kw == "row") {
      if (cpts.empty()) throw fail("row outside a cpt block");
      auto colon = std::find(tok.begin(), tok.end(), ":");
      if (colon == tok.end()) throw fail("row needs ':' between parent states and probabilities");
      PendingRow row{std::vector<std::string>(tok.begin() + 1, colon), {}, lineno};
      for (auto it = colon + 1; it != tok.end(); ++it) {
        try {
          row.probs.push_back(parse_double(*it));
        } catch (const std::invalid_argument& e) {
          throw fail(e.what());
        }
      }
      cpts.back().second.push_back(std::move(row));
    } else if (kw == "end") {
      ended = true;
    } else {
      throw fail("unknown keyword '" + kw + "'");
    }
  }
  if (!started) throw std::invalid_argument(origin + ": missing network block");
  if (!ended) throw std::invalid_argument(origin + ": network block is not terminated by 'end'");

  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(v.name);
  Dag dag(names);
  for (const auto& e : edges) {
    lineno = e.line;
    auto ia = dag.find(e.from), ib = dag.find(e.to);
    if (!ia) throw fail("edge names an unknown node '" + e.from + "'");
    if (!ib) throw fail("edge names an unknown node '" + e.to + "'");
    if (dag.has_edge(*ia, *ib)) throw fail("duplicate edge");
    try {
      dag.add_edge(*ia, *ib);
    } catch (const CycleError& err) {
      throw CycleError(origin + ":" + std::to_string(lineno) + ": " + err.what());
    }
  }
  BayesNet bn(std::move(vars), std::move(dag));
  for (std::size_t c = 0; c < cpts.size(); ++c) {
    const auto& [name, rows] = cpts[c];
    lineno = cpt_lines[c];
    auto node = bn.find(name);
    if (!node) throw fail("cpt for unknown node " + name);
    auto table = bn.blank_cpt(*node);
    const auto& parents = bn.dag().parents(*node);
    for (const auto& row : rows) {
      lineno = row.line;
      if (row.parents.size() != parents.size()) throw fail("row lists the wrong number of parent states");
      std::vector<int> pv;
      for (std::size_t k = 0; k < parents.size(); ++k) {
        auto s = bn.state_index(parents[k], row.parents[k]);
        if (!s) throw fail("unknown state '" + row.parents[k] + "' of " + bn.variable(parents[k]).name);
        pv.push_back(*s);
      }
      try {
        table.set_row(table.row_index(pv), row.probs);
      } catch (const std::invalid_argument& e) {
        throw fail(e.what());
      }
    }
    bn.set_cpt(*node, std::move(table));
  }
  return bn;
}

}  // namespace relbn
