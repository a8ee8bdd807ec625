#include "itrs/layers.hpp"

#include <algorithm>
#include <map>

#include "graph_util.hpp"

namespace itrs {

int color_of(const Coloring& colors, const Node& node) {
  if (node.is_var) return 0;
  auto it = colors.find(node.label);
  return it == colors.end() ? 0 : it->second;
}

namespace {

PrincipalCut cut_from(const Term& t, std::uint32_t start, const Coloring& colors) {
  PrincipalCut cut;
  cut.root_color = color_of(colors, t.node(start));
  std::vector<bool> in_top(t.size(), false);
  in_top[start] = true;
  cut.top.push_back(start);
  for (std::size_t head = 0; head < cut.top.size(); ++head) {
    auto v = cut.top[head];
    const auto& kids = t.node(v).kids;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      auto k = kids[i];
      int c = color_of(colors, t.node(k));
      if (c != 0 && c != cut.root_color) {
        cut.edges.push_back({v, i, k});
      } else if (!in_top[k]) {
        in_top[k] = true;
        cut.top.push_back(k);
      }
    }
  }
  return cut;
}

// Principal positions below `start`, relative to it, with their nodes.
std::vector<std::pair<Position, std::uint32_t>> ppos_from(const Term& t, std::uint32_t start,
                                                          const Coloring& colors, std::size_t bound) {
  std::vector<std::pair<Position, std::uint32_t>> out;
  int root = color_of(colors, t.node(start));
  std::vector<std::pair<Position, std::uint32_t>> stack{{Position{}, start}};
  while (!stack.empty()) {
    auto [p, v] = std::move(stack.back());
    stack.pop_back();
    if (p.length() >= bound) continue;
    const auto& kids = t.node(v).kids;
    for (std::size_t i = kids.size(); i-- > 0;) {
      auto k = kids[i];
      auto q = p.child(static_cast<std::uint32_t>(i + 1));
      int c = color_of(colors, t.node(k));
      if (c != 0 && c != root) {
        out.push_back({std::move(q), k});
      } else {
        stack.push_back({std::move(q), k});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Term fill_from(const Term& t, std::uint32_t start, const Coloring& colors,
               const std::function<Term(const CutEdge&)>& fill) {
  auto cut = cut_from(t, start, colors);
  TermGraph g;
  std::map<std::uint32_t, std::uint32_t> slot;
  for (auto v : cut.top) slot[v] = g.add_alias();
  std::map<std::pair<std::uint32_t, std::size_t>, const CutEdge*> crossing;
  for (const auto& e : cut.edges) crossing[{e.from, e.arg}] = &e;
  for (auto v : cut.top) {
    const auto& nd = t.node(v);
    if (nd.is_var) {
      g.set_alias(slot[v], g.add_var(nd.label));
      continue;
    }
    std::vector<std::uint32_t> kids;
    for (std::size_t i = 0; i < nd.kids.size(); ++i) {
      auto it = crossing.find({v, i});
      kids.push_back(it != crossing.end() ? g.add_term(fill(*it->second)) : slot.at(nd.kids[i]));
    }
    g.set_alias(slot[v], g.add_app(nd.label, std::move(kids)));
  }
  return g.seal(slot.at(start));
}

}  // namespace

PrincipalCut principal_cut(const Term& t, const Coloring& colors) { return cut_from(t, 0, colors); }

std::vector<Position> ppos(const Term& t, const Coloring& colors, std::size_t depth_bound) {
  std::vector<Position> out;
  for (auto& [p, _] : ppos_from(t, 0, colors, depth_bound)) out.push_back(std::move(p));
  return out;
}

Term toplayer_fill(const Term& t, const Coloring& colors,
                   const std::function<Term(const CutEdge&)>& fill) {
  return fill_from(t, 0, colors, fill);
}

Term toplayer_fill(const Term& t, const Coloring& colors, const Term& fill) {
  return fill_from(t, 0, colors, [&](const CutEdge&) { return fill; });
}

Dist toplayer_distance(const TermMetric& m, const Term& t, const Term& u, const Coloring& colors) {
  auto hole = Term::variable(kHoleVar);
  return distance(m, toplayer_fill(t, colors, hole), toplayer_fill(u, colors, hole));
}

std::optional<std::size_t> rank(const Term& t, const Coloring& colors) {
  enum class State { Fresh, Active, Done };
  std::vector<State> state(t.size(), State::Fresh);
  std::vector<std::size_t> memo(t.size(), 0);
  bool infinite = false;
  std::function<std::size_t(std::uint32_t)> go = [&](std::uint32_t v) -> std::size_t {
    if (state[v] == State::Done) return memo[v];
    if (state[v] == State::Active) {
      infinite = true;
      return 0;
    }
    state[v] = State::Active;
    std::size_t best = 0;
    for (const auto& e : cut_from(t, v, colors).edges) {
      best = std::max(best, 1 + go(e.to));
      if (infinite) return 0;
    }
    state[v] = State::Done;
    memo[v] = best;
    return best;
  };
  auto r = go(0);
  if (infinite) return std::nullopt;
  return r;
}

Term cutoff(const Term& t, std::size_t n, const Term& u, const Coloring& colors) {
  std::map<std::pair<std::uint32_t, std::size_t>, Term> memo;
  std::function<Term(std::uint32_t, std::size_t)> go = [&](std::uint32_t v, std::size_t level) -> Term {
    if (level == 0) return u;
    if (t.node(v).is_var) return t.at_node(v);
    auto key = std::make_pair(v, level);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    auto out = fill_from(t, v, colors, [&](const CutEdge& e) { return go(e.to, level - 1); });
    memo.emplace(key, out);
    return out;
  };
  return go(0, n);
}

std::vector<PrincipalCycle> principal_cycles(const Term& t, const TermMetric& m, const Coloring& colors,
                                             std::size_t cap) {
  std::vector<PrincipalCycle> out;
  std::size_t simple = 0;
  auto paths = detail::shortest_positions(t);
  const auto n = static_cast<std::uint32_t>(t.size());
  for (std::uint32_t s = 0; s < n; ++s) {
    // Simple cycles whose least node is s.
    std::vector<std::uint32_t> nodes{s};
    std::vector<std::size_t> args;
    std::vector<bool> on_path(n, false);
    on_path[s] = true;
    std::function<void(std::uint32_t)> dfs = [&](std::uint32_t v) {
      const auto& kids = t.node(v).kids;
      for (std::size_t i = 0; i < kids.size(); ++i) {
        auto k = kids[i];
        if (k == s) {
          if (++simple > cap) throw Error("more than " + std::to_string(cap) + " simple cycles");
          std::set<int> seen;
          for (auto w : nodes) {
            if (int c = color_of(colors, t.node(w))) seen.insert(c);
          }
          if (seen.size() < 2) continue;
          PrincipalCycle cyc;
          cyc.nodes = nodes;
          cyc.to_cycle = *paths[s];
          std::vector<std::uint32_t> steps;
          std::vector<Component> parts;
          for (std::size_t j = 0; j < nodes.size(); ++j) {
            auto a = j < args.size() ? args[j] : i;
            steps.push_back(static_cast<std::uint32_t>(a + 1));
            parts.push_back(m.component(t.node(nodes[j]).label, a));
          }
          cyc.path = Position(std::move(steps));
          cyc.component = Component::compose(std::move(parts));
          out.push_back(std::move(cyc));
        } else if (k > s && !on_path[k]) {
          on_path[k] = true;
          nodes.push_back(k);
          args.push_back(i);
          dfs(k);
          nodes.pop_back();
          args.pop_back();
          on_path[k] = false;
        }
      }
    };
    dfs(s);
  }
  return out;
}

std::size_t lazy_edges(const TermMetric& g, const Term& t, const Position& p) {
  std::size_t count = 0;
  std::uint32_t cur = 0;
  for (auto step : p.steps()) {
    const auto& nd = t.node(cur);
    if (nd.is_var || step > nd.kids.size()) throw Error("position " + p.to_string() + " not in term");
    if (g.exponent(nd.label, step - 1) != 0) ++count;
    cur = nd.kids[step - 1];
  }
  return count;
}

std::size_t step_fn(const TermMetric& g, const Term& t, const std::vector<Position>& chain, std::size_t n) {
  if (n == 0) return 0;
  if (n >= chain.size()) throw Error("step_fn: chain has only " + std::to_string(chain.size()) + " entries");
  std::size_t steps = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!chain[j].is_prefix_of(chain[j + 1])) throw Error("step_fn: positions do not form a chain");
    // (t,p)_g differs between the ends iff a halving edge lies in between.
    if (lazy_edges(g, t, chain[j + 1]) > lazy_edges(g, t, chain[j])) ++steps;
  }
  return steps;
}

std::vector<std::vector<Position>> principal_chains(const Term& t, const Coloring& colors,
                                                    std::size_t layers, std::size_t layer_depth) {
  std::vector<std::vector<Position>> out;
  std::vector<Position> chain{Position{}};
  std::function<void(std::uint32_t)> grow = [&](std::uint32_t v) {
    out.push_back(chain);
    if (chain.size() > layers) return;
    for (auto& [q, k] : ppos_from(t, v, colors, layer_depth)) {
      chain.push_back(chain.back().concat(q));
      grow(k);
      chain.pop_back();
    }
  };
  grow(0);
  return out;
}

}  // namespace itrs
