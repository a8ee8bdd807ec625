#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "itrs/layers.hpp"
#include "itrs/metric.hpp"
#include "itrs/rewrite.hpp"
#include "itrs/trace.hpp"

namespace itrs {

/// Search limits shared by the analyses below. Anything reported as unknown
/// carries the budgets it ran out of.
inline constexpr std::size_t kDefaultLoopNodes = 4'000'000;

struct Budgets {
  std::size_t loop_states = 50000;
  /// Total size of the terms expanded by a loop search. Terms that keep
  /// growing make the state budget alone quadratic.
  std::size_t loop_nodes = kDefaultLoopNodes;
  std::size_t reach_expansions = kDefaultReachBudget;
  std::size_t max_steps = 64;
  std::size_t depth_bound = kDefaultDepthBound;
  std::size_t window = 4;
  std::size_t max_segments = 3;
  std::size_t max_period = 8;
  double tol = kDefaultTol;
};

enum class Strategy { LeftmostOutermost, LeftmostInnermost };

std::string to_string(Strategy s);
/// Accepts "lo", "outermost", "head", "li" and "innermost".
std::optional<Strategy> parse_strategy(std::string_view text);

struct Simulation {
  Segment segment;
  /// No redex was found within the search bound of the last term.
  bool normal_form = false;
};

Simulation simulate(const Itrs& system, const Term& t0, Strategy strategy, std::size_t max_steps,
                    std::size_t depth_bound = kDefaultDepthBound);

/// Follows a fixed list of steps; throws StaleOccurrence when one does not apply.
Simulation simulate_script(const Itrs& system, const Term& t0,
                           const std::vector<RedexOccurrence>& script);

struct ReductionGraph {
  struct Edge {
    std::size_t from;
    std::size_t to;
    RedexOccurrence occurrence;
  };
  std::vector<Term> nodes;  // nodes[0] is the start term, BFS order
  std::vector<Edge> edges;
  /// Every node was expanded, so the graph is the full reachable graph
  /// (relative to the search bound on infinite terms).
  bool complete = false;

  std::vector<std::vector<std::size_t>> out_edges() const;
};

ReductionGraph explore(const Itrs& system, const Term& t0, std::size_t max_states,
                       std::size_t depth_bound = kDefaultDepthBound,
                       std::size_t max_nodes = kDefaultLoopNodes);

/// Largest pairwise distance inside each window of consecutive terms. A trace
/// shorter than the window yields one value.
std::vector<Dist> sliding_diameter(const TermMetric& m, const std::vector<Term>& terms,
                                   std::size_t window, double tol = kDefaultTol);

struct LoopWitness {
  Term start;                            // first term on the cycle
  std::vector<RedexOccurrence> prefix;   // from t0 to start
  std::vector<RedexOccurrence> cycle;    // from start back to start
  std::vector<Term> cycle_terms;         // start, ..., the term before start
  Term distinct;                         // a cycle term different from start
  Dist distance = Dist::zero();          // d(start, distinct)
};

/// A cycle in the graph through the start term if possible, otherwise through
/// the node closest to it. Self-loops count only when `self_loops` is set.
std::optional<LoopWitness> graph_cycle(const ReductionGraph& g, const TermMetric& m, bool self_loops);

/// Breadth-first search for a cycle of length ≥ 2 in the reduction graph.
std::optional<LoopWitness> find_loop(const Itrs& system, const Term& t0, std::size_t max_states,
                                     std::size_t depth_bound = kDefaultDepthBound,
                                     std::size_t max_nodes = kDefaultLoopNodes);

/// True when replaying the cycle from `start` returns to `start`.
bool replays(const Itrs& system, const LoopWitness& w);

/// Detects context pumping in a segment and returns its d_∞ limit.
std::optional<Term> extrapolate_limit(const Segment& seg, std::size_t max_period = 8);

struct NonMemberLimit {
  Term limit;
  Position to_cycle;
  Position cycle;
  double residual = 0.0;
};

struct DiameterFloor {
  Dist eps = Dist::zero();
  /// Flattened trace indices of a pair at distance ≥ eps, one per window
  /// in the trailing half.
  std::vector<std::pair<std::size_t, std::size_t>> samples;
};

/// A term that reappears after a limit step, giving a transfinite cycle.
struct LimitCycle {
  std::size_t first;   // flattened index of the first occurrence
  std::size_t second;  // flattened index of the recurrence
  Term term;
};

using Witness = std::variant<std::monostate, LoopWitness, NonMemberLimit, DiameterFloor, LimitCycle>;

std::string witness_kind(const Witness& w);

struct Verdict {
  enum class Kind { Converging, Diverging, Unknown };
  Kind kind = Kind::Unknown;
  std::optional<Term> limit;
  Witness witness;
  Trace trace;
  Budgets budgets;
  std::string note;
};

std::string to_string(Verdict::Kind k);

/// Loop search, then strategy-driven simulation with limit extrapolation
/// across up to `max_segments` segments, then the diameter floor.
Verdict classify_convergence(const Itrs& system, const Term& t0, const Budgets& budgets = {},
                             Strategy strategy = Strategy::LeftmostOutermost);

struct StrongProbe {
  Verdict indirect;
  /// A cycle in the reduction graph of the original system; repeating it
  /// contracts a redex at a fixed depth infinitely often.
  bool violation = false;
  std::optional<LoopWitness> recurrence;
  /// Shortest redex position on the recurring cycle.
  std::optional<Position> min_position;
  bool graph_complete = false;
  /// Both checks were conclusive and they agree.
  bool agree = false;
};

StrongProbe strong_convergence_probe(const Itrs& system, const Term& t0, const Budgets& budgets = {});

struct FocusWitness {
  std::size_t index;
  std::vector<Successor> path;  // from seq[index] to the final element
};

struct FocusResult {
  bool holds = false;
  std::optional<std::size_t> beta;
  std::vector<Term> sequence;
  std::vector<FocusWitness> witnesses;
  std::vector<std::size_t> failures;
  /// Finite prefixes cannot settle the property for open sequences.
  std::string label = "prefix evidence";
};

/// Least β such that every element from β on weakly reduces to the last one
/// within budget. Holds when β ≤ n/2.
FocusResult focussed_probe(const Itrs& system, const std::vector<Term>& seq,
                           std::size_t budget = kDefaultReachBudget,
                           std::size_t depth_bound = kDefaultDepthBound);
FocusResult focussed_probe(const Itrs& system, const Trace& tr, const Position& p,
                           std::size_t budget = kDefaultReachBudget,
                           std::size_t depth_bound = kDefaultDepthBound);

/// Positions principal in every term of the trailing window of the last
/// segment; window 0 means the whole segment.
std::vector<Position> trace_ppos(const Trace& tr, const Coloring& colors,
                                 std::size_t depth_bound = kDefaultDepthBound, std::size_t window = 0);

struct PredicateSequence {
  enum class Kind { Fp, Kt };
  Kind kind = Kind::Fp;
  Position p;  // Fp
  Term t;      // Kt
  std::size_t budget = kDefaultReachBudget;

  static PredicateSequence fp(Position p, std::size_t budget = kDefaultReachBudget) {
    return {Kind::Fp, std::move(p), Term{}, budget};
  }
  static PredicateSequence kt(Term t, std::size_t budget = kDefaultReachBudget) {
    return {Kind::Kt, Position{}, std::move(t), budget};
  }
};

struct XiViolation {
  std::size_t index;  // flattened index into the original trace
  std::string reason;
};

struct XiResult {
  Trace trace;  // even and odd fills interleaved, per segment
  std::vector<XiViolation> violations;
  std::size_t flips = 0;
  std::size_t evaluations = 0;
  std::vector<Dist> diameters;  // sliding diameters of the last segment
  Dist floor = Dist::zero();
  bool non_cauchy = false;
};

/// Simulates the top layer of `tr` with principal subterms filled by the
/// rule's lhs or rhs as the predicate sequence dictates.
XiResult xi_trace(const Itrs& system, const Trace& tr, const std::string& rule,
                  const PredicateSequence& s, const Budgets& budgets = {});

struct CutoffResult {
  Trace trace;
  std::vector<std::string> violations;
  std::size_t stutters = 0;

  bool valid() const { return violations.empty(); }
};

/// Pointwise t[n↘u]; every step must be a stutter or a single step.
CutoffResult cutoff_trace(const Itrs& system, const Trace& tr, std::size_t n, const Term& u,
                          std::size_t depth_bound = kDefaultDepthBound);

}  // namespace itrs
