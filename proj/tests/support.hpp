#pragma once

// Random term generation and reference implementations used as oracles.
// The oracles deliberately avoid the library's canonical-graph machinery:
// they walk the node arrays directly and unfold by recursion.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "itrs/metric.hpp"
#include "itrs/term.hpp"

namespace itrs::testing {

struct Sym {
  std::string name;
  std::uint32_t arity;
};

inline std::vector<Sym> symbols_of(const Signature& sig) {
  std::vector<Sym> out;
  for (const auto& [n, a] : sig.symbols()) out.push_back({n, a});
  return out;
}

// Uniform over symbols with a bias towards leaves as depth runs out.
// Variables from `vars` act as extra leaves.
class TermGen {
 public:
  TermGen(std::vector<Sym> syms, std::vector<std::string> vars, std::uint32_t seed)
      : syms_(std::move(syms)), vars_(std::move(vars)), rng_(seed) {
    for (const auto& s : syms_) (s.arity == 0 ? leaves_ : inner_).push_back(s);
  }

  Term term(std::size_t max_depth) {
    std::bernoulli_distribution stop(max_depth == 0 || inner_.empty() ? 1.0 : 0.3);
    if (stop(rng_)) return leaf();
    const auto& s = inner_[pick(inner_.size())];
    std::vector<Term> kids;
    for (std::uint32_t i = 0; i < s.arity; ++i) kids.push_back(term(max_depth - 1));
    return Term::apply(s.name, kids);
  }

  // Replaces a random subterm, so that pairs share a common top part.
  Term mutate(const Term& t, std::size_t max_depth) {
    auto ps = positions(t, max_depth);
    const auto& p = ps[pick(ps.size())];
    return replace(t, p, term(max_depth > p.length() ? max_depth - p.length() : 0));
  }

  // A pair that is equal with some probability and otherwise often close.
  std::pair<Term, Term> pair(std::size_t max_depth) {
    auto t = term(max_depth);
    switch (pick(4)) {
      case 0:
        return {t, t};
      case 1:
        return {t, term(max_depth)};
      default:
        return {t, mutate(t, max_depth)};
    }
  }

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::mt19937& rng() { return rng_; }

 private:
  Term leaf() {
    std::size_t n = leaves_.size() + vars_.size();
    auto i = pick(n);
    if (i < leaves_.size()) return Term::constant(leaves_[i].name);
    return Term::variable(vars_[i - leaves_.size()]);
  }

  std::vector<Sym> syms_;
  std::vector<std::string> vars_;
  std::vector<Sym> leaves_;
  std::vector<Sym> inner_;
  std::mt19937 rng_;
};

// Distance by direct recursion over the unfolded trees, cut off at `depth`.
// Exact for finite terms shallower than the cutoff, a lower bound otherwise.
inline double naive_distance(const TermMetric& m, const Term& t, std::uint32_t a, const Term& u, std::uint32_t b,
                             std::size_t depth) {
  const auto& x = t.node(a);
  const auto& y = u.node(b);
  if (x.is_var != y.is_var || x.label != y.label || x.kids.size() != y.kids.size()) return 1.0;
  if (depth == 0) return 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < x.kids.size(); ++i) {
    double sub = naive_distance(m, t, x.kids[i], u, y.kids[i], depth - 1);
    if (sub > 0.0) d = std::max(d, std::min(1.0, m.component(x.label, i)(sub)));
  }
  return d;
}

inline double naive_distance(const TermMetric& m, const Term& t, const Term& u, std::size_t depth = 64) {
  return naive_distance(m, t, 0, u, 0, depth);
}

// Bisimilarity by exploring the product of the two node graphs.
inline bool product_bisimilar(const Term& t, const Term& u) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> todo{{0, 0}};
  while (!todo.empty()) {
    auto [a, b] = todo.back();
    todo.pop_back();
    if (!seen.insert({a, b}).second) continue;
    const auto& x = t.node(a);
    const auto& y = u.node(b);
    if (x.is_var != y.is_var || x.label != y.label || x.kids.size() != y.kids.size()) return false;
    for (std::size_t i = 0; i < x.kids.size(); ++i) todo.push_back({x.kids[i], y.kids[i]});
  }
  return true;
}

// Weight (t,p)_m(1) computed by composing components along the path.
inline double naive_weight(const TermMetric& m, const Term& t, const Position& p) {
  std::vector<const Component*> comps;
  std::uint32_t cur = 0;
  for (auto step : p.steps()) {
    const auto& nd = t.node(cur);
    comps.push_back(&m.component(nd.label, step - 1));
    cur = nd.kids[step - 1];
  }
  double v = 1.0;
  for (auto it = comps.rbegin(); it != comps.rend(); ++it) v = std::min(1.0, (**it)(v));
  return v;
}

// All positions of a finite term, by recursion.
inline void all_positions(const Term& t, std::uint32_t n, Position here, std::vector<Position>& out) {
  out.push_back(here);
  const auto& nd = t.node(n);
  for (std::uint32_t i = 0; i < nd.kids.size(); ++i) all_positions(t, nd.kids[i], here.child(i + 1), out);
}

inline std::vector<Position> all_positions(const Term& t) {
  std::vector<Position> out;
  all_positions(t, 0, Position{}, out);
  return out;
}

}  // namespace itrs::testing
