#include <algorithm>
#include <deque>
#include <unordered_map>

#include "graph_util.hpp"
#include "itrs/convergence.hpp"

namespace itrs {

std::string to_string(Strategy s) {
  return s == Strategy::LeftmostOutermost ? "leftmost-outermost" : "leftmost-innermost";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  if (text == "lo" || text == "outermost" || text == "head" || text == "leftmost-outermost") {
    return Strategy::LeftmostOutermost;
  }
  if (text == "li" || text == "innermost" || text == "leftmost-innermost") {
    return Strategy::LeftmostInnermost;
  }
  return std::nullopt;
}

namespace {

std::optional<RedexOccurrence> pick(const Itrs& system, const Term& t, Strategy strategy,
                                    std::size_t depth_bound) {
  auto all = redexes(system, t, search_bound(t, depth_bound));
  if (all.empty()) return std::nullopt;
  if (strategy == Strategy::LeftmostOutermost) return all.front();
  for (const auto& occ : all) {
    bool innermost = std::none_of(all.begin(), all.end(), [&](const RedexOccurrence& o) {
      return occ.position.is_proper_prefix_of(o.position);
    });
    if (innermost) return occ;
  }
  return all.front();
}

}  // namespace

Simulation simulate(const Itrs& system, const Term& t0, Strategy strategy, std::size_t max_steps,
                    std::size_t depth_bound) {
  Simulation out;
  out.segment.terms.push_back(t0);
  for (std::size_t i = 0; i < max_steps; ++i) {
    auto occ = pick(system, out.segment.terms.back(), strategy, depth_bound);
    if (!occ) {
      out.normal_form = true;
      return out;
    }
    auto next = rewrite_step(system, out.segment.terms.back(), *occ);
    out.segment.steps.push_back({TraceStep::Kind::Rewrite, std::move(*occ), 0});
    out.segment.terms.push_back(std::move(next));
  }
  out.normal_form = !pick(system, out.segment.terms.back(), strategy, depth_bound);
  return out;
}

Simulation simulate_script(const Itrs& system, const Term& t0,
                           const std::vector<RedexOccurrence>& script) {
  Simulation out;
  out.segment.terms.push_back(t0);
  for (const auto& occ : script) {
    auto next = rewrite_step(system, out.segment.terms.back(), occ);
    out.segment.steps.push_back({TraceStep::Kind::Rewrite, occ, 0});
    out.segment.terms.push_back(std::move(next));
  }
  return out;
}

std::vector<std::vector<std::size_t>> ReductionGraph::out_edges() const {
  std::vector<std::vector<std::size_t>> out(nodes.size());
  for (std::size_t e = 0; e < edges.size(); ++e) out[edges[e].from].push_back(e);
  return out;
}

namespace {

// Breadth-first expansion of the reduction graph, one node at a time.
class Explorer {
 public:
  Explorer(const Itrs& system, const Term& t0, std::size_t max_states, std::size_t depth_bound,
           std::size_t max_nodes)
      : system_(system), max_states_(max_states), depth_bound_(depth_bound), max_nodes_(max_nodes) {
    graph_.nodes.push_back(t0);
    index_.emplace(t0, 0);
  }

  bool done() const { return next_ >= graph_.nodes.size() || truncated_; }

  void expand_next() {
    auto from = next_++;
    nodes_seen_ += graph_.nodes[from].size();
    if (nodes_seen_ > max_nodes_) truncated_ = true;
    auto succ = successors(system_, graph_.nodes[from], search_bound(graph_.nodes[from], depth_bound_));
    for (auto& s : succ) {
      auto it = index_.find(s.result);
      std::size_t to;
      if (it != index_.end()) {
        to = it->second;
      } else {
        if (graph_.nodes.size() >= max_states_) {
          truncated_ = true;
          continue;
        }
        to = graph_.nodes.size();
        index_.emplace(s.result, to);
        graph_.nodes.push_back(std::move(s.result));
      }
      graph_.edges.push_back({from, to, std::move(s.occurrence)});
    }
  }

  ReductionGraph& graph() { return graph_; }
  bool complete() const { return next_ >= graph_.nodes.size() && !truncated_; }

 private:
  const Itrs& system_;
  std::size_t max_states_;
  std::size_t depth_bound_;
  std::size_t max_nodes_;
  std::size_t nodes_seen_ = 0;
  ReductionGraph graph_;
  std::unordered_map<Term, std::size_t, TermHash> index_;
  std::size_t next_ = 0;
  bool truncated_ = false;
};

}  // namespace

ReductionGraph explore(const Itrs& system, const Term& t0, std::size_t max_states, std::size_t depth_bound,
                       std::size_t max_nodes) {
  Explorer ex(system, t0, max_states, depth_bound, max_nodes);
  while (!ex.done()) ex.expand_next();
  ex.graph().complete = ex.complete();
  return std::move(ex.graph());
}

std::vector<Dist> sliding_diameter(const TermMetric& m, const std::vector<Term>& terms, std::size_t window,
                                   double tol) {
  if (window < 2) throw Error("sliding_diameter: window must be at least 2");
  std::vector<Dist> out;
  if (terms.empty()) return out;
  auto w = std::min(window, terms.size());
  for (std::size_t i = 0; i + w <= terms.size(); ++i) {
    Dist best = Dist::zero();
    for (std::size_t a = i; a < i + w; ++a) {
      for (std::size_t b = a + 1; b < i + w; ++b) {
        if (terms[a] == terms[b]) continue;
        best = std::max(best, distance(m, terms[a], terms[b], tol));
      }
    }
    out.push_back(best);
  }
  return out;
}

namespace {

// Shortest cycle of length ≥ 2 through s, staying inside s's component.
std::optional<std::vector<std::size_t>> shortest_cycle(const ReductionGraph& g,
                                                       const std::vector<std::vector<std::size_t>>& out,
                                                       const detail::Components& comps, std::size_t s) {
  std::vector<std::optional<std::size_t>> via(g.nodes.size());
  std::deque<std::size_t> queue{s};
  std::vector<bool> seen(g.nodes.size(), false);
  seen[s] = true;
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    for (auto e : out[v]) {
      auto w = g.edges[e].to;
      if (w == v || comps.id[w] != comps.id[s]) continue;
      if (w == s) {
        std::vector<std::size_t> edges{e};
        for (auto u = v; u != s;) {
          edges.push_back(*via[u]);
          u = g.edges[*via[u]].from;
        }
        std::reverse(edges.begin(), edges.end());
        return edges;
      }
      if (seen[w]) continue;
      seen[w] = true;
      via[w] = e;
      queue.push_back(w);
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<LoopWitness> graph_cycle(const ReductionGraph& g, const TermMetric& m, bool self_loops) {
  detail::Adjacency adj(g.nodes.size());
  std::vector<std::optional<std::size_t>> self(g.nodes.size());
  std::vector<std::optional<std::size_t>> parent(g.nodes.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& edge = g.edges[e];
    if (edge.from == edge.to) {
      if (!self[edge.from]) self[edge.from] = e;
      continue;
    }
    adj[edge.from].push_back(static_cast<std::uint32_t>(edge.to));
    // Edges are recorded in discovery order, so the first edge into a node
    // belongs to the BFS tree.
    if (edge.to != 0 && !parent[edge.to]) parent[edge.to] = e;
  }
  auto comps = detail::strongly_connected(adj);
  std::vector<std::size_t> size(comps.members.size(), 0);
  for (auto c : comps.id) ++size[c];
  // BFS numbering makes the least index the closest node to the start.
  std::optional<std::size_t> s;
  for (std::size_t v = 0; v < g.nodes.size() && !s; ++v) {
    if (size[comps.id[v]] >= 2 || (self_loops && self[v])) s = v;
  }
  if (!s) return std::nullopt;

  LoopWitness w;
  w.start = g.nodes[*s];
  for (auto v = *s; parent[v]; v = g.edges[*parent[v]].from) w.prefix.push_back(g.edges[*parent[v]].occurrence);
  std::reverse(w.prefix.begin(), w.prefix.end());
  if (size[comps.id[*s]] < 2) {
    w.cycle.push_back(g.edges[*self[*s]].occurrence);
    w.cycle_terms.push_back(w.start);
    w.distinct = w.start;
    return w;
  }
  auto cycle = shortest_cycle(g, g.out_edges(), comps, *s);
  for (auto e : *cycle) {
    w.cycle.push_back(g.edges[e].occurrence);
    w.cycle_terms.push_back(g.nodes[g.edges[e].from]);
  }
  w.distinct = w.cycle_terms.at(1);
  w.distance = distance(m, w.start, w.distinct);
  return w;
}

std::optional<LoopWitness> find_loop(const Itrs& system, const Term& t0, std::size_t max_states,
                                     std::size_t depth_bound, std::size_t max_nodes) {
  Explorer ex(system, t0, max_states, depth_bound, max_nodes);
  std::size_t next_check = 16;
  while (!ex.done()) {
    ex.expand_next();
    if (ex.graph().nodes.size() >= next_check) {
      next_check *= 2;
      if (auto w = graph_cycle(ex.graph(), system.metric, false)) return w;
    }
  }
  return graph_cycle(ex.graph(), system.metric, false);
}

bool replays(const Itrs& system, const LoopWitness& w) {
  try {
    return replay(system, w.start, w.cycle) == w.start;
  } catch (const StaleOccurrence&) {
    return false;
  }
}

namespace {

Term mu_close(const Term& context) {
  TermGraph g;
  std::vector<std::uint32_t> slot(context.size());
  for (auto& s : slot) s = g.add_alias();
  for (std::uint32_t v = 0; v < context.size(); ++v) {
    const auto& nd = context.node(v);
    if (nd.is_var) {
      g.set_alias(slot[v], nd.label == kHoleVar ? slot[0] : g.add_var(nd.label));
      continue;
    }
    std::vector<std::uint32_t> kids;
    for (auto k : nd.kids) kids.push_back(slot[k]);
    g.set_alias(slot[v], g.add_app(nd.label, std::move(kids)));
  }
  return g.seal(slot[0]);
}

TermMetric infty_for(const std::vector<Term>& terms) {
  Signature sig;
  for (const auto& t : terms) {
    for (const auto& nd : t.nodes()) {
      if (!nd.is_var) sig.add(nd.label, static_cast<std::uint32_t>(nd.kids.size()));
    }
  }
  return metric_infty(sig);
}

std::optional<Term> pumped_limit(const Segment& seg, std::size_t period, std::size_t i) {
  const auto& t = seg.terms;
  const auto n = seg.steps.size();
  auto pos = [&](std::size_t j) { return seg.steps[j].occurrence.position; };
  const auto hole = Term::variable(kHoleVar);
  if (!pos(i).is_proper_prefix_of(pos(i + period))) return std::nullopt;
  const auto d = pos(i + period).strip_prefix(pos(i));
  const auto context = replace(subterm(t[i + period], pos(i)), d, hole);
  for (std::size_t j = i; j + period <= n; ++j) {
    if (j + period < n && pos(j + period) != pos(j).concat(d)) return std::nullopt;
    const auto& later = t[j + period];
    if (!node_at(later, pos(j))) return std::nullopt;
    if (!(replace(subterm(later, pos(j)), d, hole) == context)) return std::nullopt;
    if (!(subterm(later, pos(j).concat(d)) == subterm(t[j], pos(j)))) return std::nullopt;
    if (!(replace(later, pos(j), hole) == replace(t[j], pos(j), hole))) return std::nullopt;
  }
  auto limit = replace(t[i], pos(i), mu_close(context));

  // The approximants must close in on the limit once per period.
  auto m = infty_for({limit, t[i]});
  std::int64_t last = -1;
  for (std::size_t j = i; j <= n; j += period) {
    auto dist = distance(m, t[j], limit);
    if (dist.is_zero()) return std::nullopt;
    auto e = *dist.exponent();
    if (e <= last) return std::nullopt;
    last = e;
  }
  return limit;
}

}  // namespace

std::optional<Term> extrapolate_limit(const Segment& seg, std::size_t max_period) {
  if (seg.terms.empty()) return std::nullopt;
  if (std::all_of(seg.terms.begin(), seg.terms.end(), [&](const Term& t) { return t == seg.terms.front(); })) {
    return seg.terms.front();
  }
  const auto n = seg.steps.size();
  if (n < 3) return std::nullopt;
  if (std::any_of(seg.steps.begin(), seg.steps.end(),
                  [](const TraceStep& s) { return s.kind != TraceStep::Kind::Rewrite; })) {
    return std::nullopt;
  }
  for (std::size_t period = 1; period <= max_period; ++period) {
    for (std::size_t i = 0; i + 2 * period <= n; ++i) {
      if (auto limit = pumped_limit(seg, period, i)) return limit;
    }
  }
  return std::nullopt;
}

}  // namespace itrs
