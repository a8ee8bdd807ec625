#pragma once

#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "itrs/metric.hpp"
#include "itrs/rewrite.hpp"
#include "itrs/term.hpp"

namespace itrs {

/// Colour of a symbol; 0 for variables and uncoloured symbols.
int color_of(const Coloring& colors, const Node& node);

/// A graph edge from the top layer into a subterm of the other colour.
struct CutEdge {
  std::uint32_t from;
  std::size_t arg;  // zero-based
  std::uint32_t to;

  auto operator<=>(const CutEdge&) const = default;
};

/// The principal cut of a term: the top-layer region and the edges leaving it.
struct PrincipalCut {
  int root_color = 0;
  std::vector<std::uint32_t> top;  // nodes of the top layer, root first
  std::vector<CutEdge> edges;

  bool empty() const { return edges.empty(); }
};

PrincipalCut principal_cut(const Term& t, const Coloring& colors);

/// Principal positions of length ≤ depth_bound.
std::vector<Position> ppos(const Term& t, const Coloring& colors, std::size_t depth_bound);

/// The top layer with each cut edge redirected to fill(edge).
Term toplayer_fill(const Term& t, const Coloring& colors,
                   const std::function<Term(const CutEdge&)>& fill);
Term toplayer_fill(const Term& t, const Coloring& colors, const Term& fill);

/// Distance between top layers, gaps filled with one fresh variable.
Dist toplayer_distance(const TermMetric& m, const Term& t, const Term& u, const Coloring& colors);

/// Layer nesting depth; nullopt for infinite rank.
std::optional<std::size_t> rank(const Term& t, const Coloring& colors);

/// t[n↘u]: principal subterms n layers down replaced by u.
Term cutoff(const Term& t, std::size_t n, const Term& u, const Coloring& colors);

struct PrincipalCycle {
  std::vector<std::uint32_t> nodes;
  Position to_cycle;  // shortest path from the root to nodes.front()
  Position path;      // argument steps around the cycle
  Component component;
};

inline constexpr std::size_t kDefaultCycleCap = 10000;

/// Simple cycles of the term graph that meet both colours. Throws when more
/// than `cap` simple cycles exist.
std::vector<PrincipalCycle> principal_cycles(const Term& t, const TermMetric& m,
                                             const Coloring& colors,
                                             std::size_t cap = kDefaultCycleCap);

/// Number of halving edges along p (granular metrics).
std::size_t lazy_edges(const TermMetric& g, const Term& t, const Position& p);

/// Among the first n segments of the chain, how many cross a halving edge.
std::size_t step_fn(const TermMetric& g, const Term& t, const std::vector<Position>& chain,
                    std::size_t n);

/// Principal chains λ = f(0) ≺ f(1) ≺ … with up to `layers` crossings; each
/// crossing descends at most `layer_depth` positions. Includes every proper
/// prefix chain, longest chains last.
std::vector<std::vector<Position>> principal_chains(const Term& t, const Coloring& colors,
                                                    std::size_t layers, std::size_t layer_depth);

}  // namespace itrs
