#include "itrs/rewrite.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <unordered_map>
#include <unordered_set>

#include "graph_util.hpp"

namespace itrs {

const Rule* Itrs::find_rule(const std::string& name) const {
  for (const auto& r : rules) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const Rule& Itrs::rule(const std::string& name) const {
  if (auto r = find_rule(name)) return *r;
  throw Error("no rule named '" + name + "'");
}

// ---------------------------------------------------------------------------
// Validation

void validate_rule(const Rule& rule) {
  if (rule.lhs.is_variable()) throw RuleRejected("rule " + rule.name + ": left-hand side is a variable");
  if (!rule.lhs.is_finite()) throw RuleRejected("rule " + rule.name + ": left-hand side is infinite");
  auto lv = rule.lhs.variables();
  for (const auto& x : rule.rhs.variables()) {
    if (!lv.count(x)) {
      throw RuleRejected("rule " + rule.name + ": variable '" + x + "' occurs only on the right");
    }
  }
}

namespace {

void check_term_sig(const Signature& sig, const Term& t, const std::string& where) {
  for (const auto& nd : t.nodes()) {
    if (nd.is_var) continue;
    auto a = sig.arity(nd.label);
    if (!a) throw SignatureMismatch(where + ": unknown symbol '" + nd.label + "'");
    if (*a != nd.kids.size()) {
      throw SignatureMismatch(where + ": symbol '" + nd.label + "' has arity " + std::to_string(*a));
    }
  }
}

}  // namespace

void validate_itrs(const Itrs& system) {
  for (const auto& [f, n] : system.sig.symbols()) {
    if (system.metric.components(f).size() != n) {
      throw SignatureMismatch("metric entry for '" + f + "' does not match its arity");
    }
  }
  auto violations = validate_metric(system.metric);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw Error("component " + std::to_string(v.arg) + " of '" + v.symbol + "': " + v.reason);
  }
  for (const auto& r : system.rules) {
    validate_rule(r);
    check_term_sig(system.sig, r.lhs, "rule " + r.name);
    check_term_sig(system.sig, r.rhs, "rule " + r.name);
    if (is_member(system.metric, r.rhs).verdict == Membership::Verdict::NonMember) {
      throw RuleRejected("rule " + r.name + ": right-hand side is not in the metric completion");
    }
  }
}

// ---------------------------------------------------------------------------
// Matching and steps

namespace {

std::optional<Substitution> match_at(const Term& lhs, const Term& t, std::uint32_t at) {
  std::map<std::string, std::uint32_t> binding;
  std::function<bool(std::uint32_t, std::uint32_t)> go = [&](std::uint32_t l, std::uint32_t n) {
    const auto& ln = lhs.node(l);
    if (ln.is_var) {
      // Bisimilar subterms share a node in a canonical graph.
      auto [it, fresh] = binding.emplace(ln.label, n);
      return fresh || it->second == n;
    }
    const auto& tn = t.node(n);
    if (tn.is_var || tn.label != ln.label || tn.kids.size() != ln.kids.size()) return false;
    for (std::size_t i = 0; i < ln.kids.size(); ++i) {
      if (!go(ln.kids[i], tn.kids[i])) return false;
    }
    return true;
  };
  if (!go(0, at)) return std::nullopt;
  Substitution sigma;
  for (const auto& [x, n] : binding) sigma.emplace(x, t.at_node(n));
  return sigma;
}

// Visits positions up to the bound in pre-order. The path buffer is shared
// across the walk, so callers copy it only when they keep a position.
template <typename Visit>
void walk_positions(const Term& t, std::size_t bound, Visit&& visit) {
  std::vector<std::uint32_t> path;
  struct Frame {
    std::uint32_t node;
    std::size_t next_kid;
  };
  std::vector<Frame> stack{{0, 0}};
  visit(path, 0u);
  while (!stack.empty()) {
    auto& top = stack.back();
    const auto& kids = t.node(top.node).kids;
    if (path.size() >= bound || top.next_kid == kids.size()) {
      stack.pop_back();
      if (!path.empty()) path.pop_back();
      continue;
    }
    auto i = top.next_kid++;
    auto child = kids[i];
    path.push_back(static_cast<std::uint32_t>(i + 1));
    visit(path, child);
    stack.push_back({child, 0});
  }
}

}  // namespace

std::optional<Substitution> match(const Term& lhs, const Term& t, const Position& p) {
  if (!lhs.is_finite()) return std::nullopt;
  auto n = node_at(t, p);
  if (!n) return std::nullopt;
  return match_at(lhs, t, *n);
}

Term rewrite_step(const Itrs& system, const Term& t, const RedexOccurrence& occ) {
  const auto* rule = system.find_rule(occ.rule);
  if (!rule) throw StaleOccurrence("unknown rule '" + occ.rule + "'");
  auto sigma = match(rule->lhs, t, occ.position);
  if (!sigma) {
    throw StaleOccurrence("rule " + occ.rule + " does not match at " + occ.position.to_string());
  }
  if (!occ.match.empty() && occ.match != *sigma) {
    throw StaleOccurrence("recorded match differs at " + occ.position.to_string());
  }
  return replace(t, occ.position, substitute(*sigma, rule->rhs));
}

std::vector<RedexOccurrence> redexes(const Itrs& system, const Term& t, std::size_t depth_bound) {
  std::vector<RedexOccurrence> out;
  std::map<std::pair<std::uint32_t, std::size_t>, std::optional<Substitution>> cache;
  walk_positions(t, depth_bound, [&](const std::vector<std::uint32_t>& path, std::uint32_t n) {
    for (std::size_t r = 0; r < system.rules.size(); ++r) {
      auto key = std::make_pair(n, r);
      auto it = cache.find(key);
      if (it == cache.end()) it = cache.emplace(key, match_at(system.rules[r].lhs, t, n)).first;
      if (it->second) out.push_back({Position(path), system.rules[r].name, *it->second});
    }
  });
  return out;
}

std::vector<Successor> successors(const Itrs& system, const Term& t, std::size_t depth_bound) {
  std::vector<Successor> out;
  std::unordered_set<Term> seen;
  for (auto& occ : redexes(system, t, depth_bound)) {
    auto result = replace(t, occ.position, substitute(occ.match, system.rule(occ.rule).rhs));
    if (seen.insert(result).second) out.push_back({std::move(occ), std::move(result)});
  }
  return out;
}

std::size_t search_bound(const Term& t, std::size_t depth_bound) {
  if (auto d = depth(t)) return std::max(*d, depth_bound);
  // Every node of the graph is reachable within its BFS depth.
  std::size_t reach = 0;
  for (const auto& p : detail::shortest_positions(t)) reach = std::max(reach, p->length());
  return reach + depth_bound;
}

ReachResult weak_reach(const Itrs& system, const Term& t, const Term& u, std::size_t budget,
                       std::size_t depth_bound) {
  ReachResult out;
  if (t == u) {
    out.found = true;
    return out;
  }
  std::unordered_map<Term, std::pair<Term, Successor>> parent;
  std::unordered_set<Term> seen{t};
  std::deque<Term> queue{t};
  while (!queue.empty()) {
    if (out.expansions >= budget) {
      out.budget_exhausted = true;
      return out;
    }
    auto cur = std::move(queue.front());
    queue.pop_front();
    ++out.expansions;
    for (auto& s : successors(system, cur, search_bound(cur, depth_bound))) {
      if (!seen.insert(s.result).second) continue;
      parent.emplace(s.result, std::make_pair(cur, s));
      if (s.result == u) {
        out.found = true;
        for (Term back = u; !(back == t);) {
          const auto& [prev, step] = parent.at(back);
          out.path.push_back(step);
          back = prev;
        }
        std::reverse(out.path.begin(), out.path.end());
        return out;
      }
      queue.push_back(s.result);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

bool is_collapsing(const Rule& rule) { return rule.rhs.is_variable(); }

bool is_pseudo_collapsing(const TermMetric& m, const Rule& rule) {
  try {
    for (const auto& x : rule.rhs.variables()) {
      if (vdepth(m, rule.rhs, x)(1.0) == 1.0 && vdepth(m, rule.lhs, x)(1.0) < 1.0) return true;
    }
  } catch (const Error&) {
    return false;
  }
  return false;
}

std::string to_string(DepthVerdict::Kind k) {
  switch (k) {
    case DepthVerdict::Kind::Exact:
      return "exact";
    case DepthVerdict::Kind::SampledPass:
      return "sampled-pass";
    case DepthVerdict::Kind::Fail:
      return "fail";
    case DepthVerdict::Kind::Unknown:
      return "unknown";
  }
  return "unknown";
}

DepthVerdict is_depth_preserving(const TermMetric& m, const Rule& rule, std::size_t samples) {
  DepthVerdict out;
  auto fail = [&](const std::string& x, double at, double l, double r) {
    out.kind = DepthVerdict::Kind::Fail;
    out.variable = x;
    out.at = at;
    out.lhs_value = l;
    out.rhs_value = r;
    return out;
  };
  auto lhs_vars = rule.lhs.variables();
  const bool granular = m.is_granular();
  for (const auto& x : rule.rhs.variables()) {
    std::optional<VarDepth> right;
    try {
      right = vdepth(m, rule.rhs, x);
    } catch (const Error&) {
      out.kind = DepthVerdict::Kind::Unknown;
      out.variable = x;
      return out;
    }
    if (!lhs_vars.count(x)) return fail(x, 1.0, 0.0, (*right)(1.0));
    auto left = vdepth(m, rule.lhs, x);
    if (granular) {
      if (*right->lazy_edges() < *left.lazy_edges()) return fail(x, 1.0, left(1.0), (*right)(1.0));
      continue;
    }
    for (std::size_t i = 1; i <= samples; ++i) {
      double y = static_cast<double>(i) / static_cast<double>(samples);
      double l = left(y), r = (*right)(y);
      if (r > l + 1e-12) return fail(x, y, l, r);
    }
    out.kind = DepthVerdict::Kind::SampledPass;
  }
  return out;
}

IndirectResult indirect(const Itrs& system) {
  IndirectResult out;
  out.symbol = "I";
  while (system.sig.contains(out.symbol)) {
    out.symbol += "'";
    out.renamed = true;
  }
  out.elimination_rule = "elim";
  while (system.find_rule(out.elimination_rule)) out.elimination_rule += "'";

  auto& s = out.system;
  s.sig = system.sig;
  s.sig.add(out.symbol, 1);
  s.metric = system.metric;
  s.metric.set(out.symbol, {Component::identity()});
  s.colors = system.colors;
  for (const auto& r : system.rules) {
    s.rules.push_back({r.name, r.lhs, Term::apply(out.symbol, {r.rhs})});
  }
  auto x = Term::variable("x");
  s.rules.push_back({out.elimination_rule, Term::apply(out.symbol, {x}), x});
  return out;
}

UnionResult disjoint_union(const Itrs& left, const Itrs& right) {
  UnionResult out;
  auto rename = [](const auto& a, const auto& b, auto& into_a, auto& into_b) {
    for (const auto& name : a) into_a[name] = b.count(name) ? name + "#1" : name;
    for (const auto& name : b) into_b[name] = a.count(name) ? name + "#2" : name;
  };
  std::set<std::string> ls, rs, lr, rr;
  for (const auto& [f, _] : left.sig.symbols()) ls.insert(f);
  for (const auto& [f, _] : right.sig.symbols()) rs.insert(f);
  for (const auto& r : left.rules) lr.insert(r.name);
  for (const auto& r : right.rules) rr.insert(r.name);
  rename(ls, rs, out.left_symbols, out.right_symbols);
  rename(lr, rr, out.left_rules, out.right_rules);

  auto& s = out.system;
  auto inject = [&](const Itrs& part, const std::map<std::string, std::string>& symbols,
                    const std::map<std::string, std::string>& rules, int color) {
    for (const auto& [f, n] : part.sig.symbols()) {
      const auto& g = symbols.at(f);
      if (s.sig.contains(g)) throw Error("renamed symbol '" + g + "' clashes");
      s.sig.add(g, n);
      s.metric.set(g, part.metric.components(f));
      s.colors[g] = color;
    }
    for (const auto& r : part.rules) {
      s.rules.push_back({rules.at(r.name), rename_symbols(r.lhs, symbols), rename_symbols(r.rhs, symbols)});
    }
  };
  inject(left, out.left_symbols, out.left_rules, 1);
  inject(right, out.right_symbols, out.right_rules, 2);
  return out;
}

std::vector<RuleReport> classify_itrs(const Itrs& system) {
  std::vector<RuleReport> out;
  for (const auto& r : system.rules) {
    RuleReport rep;
    rep.name = r.name;
    rep.variable_lhs = r.lhs.is_variable();
    rep.infinite_lhs = !r.lhs.is_finite();
    auto lv = r.lhs.variables();
    for (const auto& x : r.rhs.variables()) rep.extra_variables = rep.extra_variables || !lv.count(x);
    rep.collapsing = is_collapsing(r);
    if (r.lhs.is_finite()) {
      std::map<std::string, int> occurrences;
      std::function<void(std::uint32_t)> count = [&](std::uint32_t v) {
        const auto& nd = r.lhs.node(v);
        if (nd.is_var) ++occurrences[nd.label];
        for (auto k : nd.kids) count(k);
      };
      count(0);
      for (const auto& [_, c] : occurrences) rep.left_linear = rep.left_linear && c == 1;
    }
    rep.pseudo_collapsing = is_pseudo_collapsing(system.metric, r);
    try {
      rep.depth = is_depth_preserving(system.metric, r);
      rep.rhs_member = is_member(system.metric, r.rhs).verdict != Membership::Verdict::NonMember;
    } catch (const Error&) {
      rep.depth.kind = DepthVerdict::Kind::Unknown;
    }
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace itrs
