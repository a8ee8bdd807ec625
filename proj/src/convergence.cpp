#include "itrs/convergence.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "graph_util.hpp"

namespace itrs {

std::string witness_kind(const Witness& w) {
  struct Name {
    std::string operator()(std::monostate) const { return "none"; }
    std::string operator()(const LoopWitness&) const { return "loop"; }
    std::string operator()(const NonMemberLimit&) const { return "non_member_limit"; }
    std::string operator()(const DiameterFloor&) const { return "diameter_floor"; }
    std::string operator()(const LimitCycle&) const { return "limit_cycle"; }
  };
  return std::visit(Name{}, w);
}

std::string to_string(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Converging:
      return "converging";
    case Verdict::Kind::Diverging:
      return "diverging";
    case Verdict::Kind::Unknown:
      return "unknown";
  }
  return "unknown";
}

namespace {

std::optional<DiameterFloor> diameter_floor(const TermMetric& m, const std::vector<Term>& terms,
                                            std::size_t offset, std::size_t window, double tol) {
  if (terms.size() < window + 3) return std::nullopt;
  auto diam = sliding_diameter(m, terms, window, tol);
  const auto half = diam.size() / 2;
  auto lead = *std::min_element(diam.begin(), diam.begin() + static_cast<std::ptrdiff_t>(half));
  auto trail = *std::min_element(diam.begin() + static_cast<std::ptrdiff_t>(half), diam.end());
  if (trail.is_zero() || trail < lead) return std::nullopt;
  DiameterFloor floor;
  floor.eps = trail;
  for (std::size_t i = half; i < diam.size(); ++i) {
    bool found = false;
    for (std::size_t a = i; a < i + window && !found; ++a) {
      for (std::size_t b = a + 1; b < i + window && !found; ++b) {
        if (trail <= distance(m, terms[a], terms[b], tol)) {
          floor.samples.push_back({offset + a, offset + b});
          found = true;
        }
      }
    }
  }
  return floor;
}

bool has_redex(const Itrs& system, const Term& t, std::size_t depth_bound) {
  return !redexes(system, t, search_bound(t, depth_bound)).empty();
}

}  // namespace

Verdict classify_convergence(const Itrs& system, const Term& t0, const Budgets& budgets, Strategy strategy) {
  Verdict v;
  v.budgets = budgets;
  if (auto loop = find_loop(system, t0, budgets.loop_states, budgets.depth_bound, budgets.loop_nodes)) {
    v.kind = Verdict::Kind::Diverging;
    v.witness = std::move(*loop);
    v.note = "reduction loop";
    return v;
  }

  Term cur = t0;
  std::size_t offset = 0;
  for (std::size_t seg_no = 0; seg_no < budgets.max_segments; ++seg_no) {
    auto sim = simulate(system, cur, strategy, budgets.max_steps, budgets.depth_bound);
    auto earlier = v.trace.flattened();
    v.trace.segments.push_back(sim.segment);
    auto& seg = v.trace.segments.back();

    for (std::size_t i = 0; i < seg.terms.size(); ++i) {
      auto hit = std::find(earlier.begin(), earlier.end(), seg.terms[i]);
      if (hit != earlier.end()) {
        v.kind = Verdict::Kind::Diverging;
        v.witness = LimitCycle{static_cast<std::size_t>(hit - earlier.begin()), offset + i, seg.terms[i]};
        v.note = "term recurs after a limit step";
        return v;
      }
    }
    if (sim.normal_form) {
      v.kind = Verdict::Kind::Converging;
      v.limit = seg.terms.back();
      v.note = "normal form within search bound";
      return v;
    }
    auto limit = extrapolate_limit(seg, budgets.max_period);
    if (!limit) break;
    auto mem = is_member(system.metric, *limit, budgets.tol);
    if (mem.verdict == Membership::Verdict::NonMember) {
      v.kind = Verdict::Kind::Diverging;
      v.witness = NonMemberLimit{*limit, mem.to_cycle, mem.cycle, mem.residual};
      v.note = "limit is not a member of the metric completion";
      return v;
    }
    if (mem.verdict == Membership::Verdict::Unknown) {
      v.note = "membership of the extrapolated limit undecided within the iteration budget";
      v.limit = limit;
      return v;
    }
    seg.limit = *limit;
    seg.limit_verified = true;
    v.limit = limit;
    if (*limit == seg.terms.back() || !has_redex(system, *limit, budgets.depth_bound)) {
      v.kind = Verdict::Kind::Converging;
      v.note = "converges to the extrapolated limit under " + to_string(strategy);
      return v;
    }
    offset += seg.terms.size();
    cur = *limit;
  }

  if (v.trace.segments.empty()) return v;
  const auto& last = v.trace.segments.back();
  if (last.limit) {
    v.kind = Verdict::Kind::Converging;
    v.note = "every segment converged; segment budget reached";
    return v;
  }
  // Windows of half the segment span whole rounds of a recurring pattern
  // even when the rounds grow.
  auto window = std::max(budgets.window, last.terms.size() / 2);
  if (auto floor = diameter_floor(system.metric, last.terms, offset, window, budgets.tol)) {
    v.kind = Verdict::Kind::Diverging;
    v.note = "sliding diameter does not shrink";
    v.witness = std::move(*floor);
    return v;
  }
  v.limit.reset();
  v.note = "no loop within " + std::to_string(budgets.loop_states) + " states or " +
           std::to_string(budgets.loop_nodes) + " term nodes, no limit within " +
           std::to_string(budgets.max_steps) + " steps";
  return v;
}

StrongProbe strong_convergence_probe(const Itrs& system, const Term& t0, const Budgets& budgets) {
  StrongProbe out;
  out.indirect = classify_convergence(indirect(system).system, t0, budgets);
  auto graph = explore(system, t0, budgets.loop_states, budgets.depth_bound, budgets.loop_nodes);
  out.graph_complete = graph.complete;
  out.recurrence = graph_cycle(graph, system.metric, true);
  out.violation = out.recurrence.has_value();
  if (out.recurrence) {
    for (const auto& occ : out.recurrence->cycle) {
      if (!out.min_position || occ.position.length() < out.min_position->length()) {
        out.min_position = occ.position;
      }
    }
  }
  bool conclusive = (out.violation || out.graph_complete) && out.indirect.kind != Verdict::Kind::Unknown;
  out.agree = conclusive && ((out.indirect.kind == Verdict::Kind::Diverging) == out.violation);
  return out;
}

FocusResult focussed_probe(const Itrs& system, const std::vector<Term>& seq, std::size_t budget,
                           std::size_t depth_bound) {
  FocusResult out;
  out.sequence = seq;
  if (seq.empty()) return out;
  const auto n = seq.size();
  std::vector<std::optional<ReachResult>> reach(n);
  std::size_t beta = 0;
  for (std::size_t g = 0; g < n; ++g) {
    auto r = weak_reach(system, seq[g], seq[n - 1], budget, depth_bound);
    if (!r.found) {
      out.failures.push_back(g);
      beta = g + 1;
    }
    reach[g] = std::move(r);
  }
  beta = std::min(beta, n - 1);
  out.beta = beta;
  for (std::size_t g = beta; g < n; ++g) out.witnesses.push_back({g, reach[g]->path});
  out.holds = beta <= n / 2;
  return out;
}

FocusResult focussed_probe(const Itrs& system, const Trace& tr, const Position& p, std::size_t budget,
                           std::size_t depth_bound) {
  std::vector<Term> seq;
  for (const auto& t : tr.flattened()) seq.push_back(subterm(t, p));
  return focussed_probe(system, seq, budget, depth_bound);
}

std::vector<Position> trace_ppos(const Trace& tr, const Coloring& colors, std::size_t depth_bound,
                                 std::size_t window) {
  if (tr.segments.empty() || tr.segments.back().terms.empty()) return {};
  const auto& terms = tr.segments.back().terms;
  auto first = window == 0 || window >= terms.size() ? 0 : terms.size() - window;
  auto common = ppos(terms[first], colors, depth_bound);
  for (auto i = first + 1; i < terms.size() && !common.empty(); ++i) {
    auto here = ppos(terms[i], colors, depth_bound);
    std::vector<Position> kept;
    std::set_intersection(common.begin(), common.end(), here.begin(), here.end(), std::back_inserter(kept));
    common = std::move(kept);
  }
  return common;
}

// ---------------------------------------------------------------------------
// Top-layer simulation

namespace {

Itrs restrict_to_color(const Itrs& system, int color) {
  Itrs out = system;
  out.rules.clear();
  for (const auto& r : system.rules) {
    if (color_of(system.colors, r.lhs.root()) == color) out.rules.push_back(r);
  }
  return out;
}

class PredicateEvaluator {
 public:
  PredicateEvaluator(const Itrs& system, const std::vector<Term>& terms, const PredicateSequence& s,
                     std::size_t depth_bound)
      : system_(system), s_(s), depth_bound_(depth_bound) {
    if (s.kind != PredicateSequence::Kind::Fp) return;
    for (std::size_t g = 0; g < terms.size(); ++g) {
      auto principal = ppos(terms[g], system.colors, s.p.length());
      if (std::binary_search(principal.begin(), principal.end(), s.p)) at_p_.push_back({g, subterm(terms[g], s.p)});
    }
  }

  bool operator()(std::size_t beta, const Term& x) {
    ++evaluations_;
    bool value;
    if (s_.kind == PredicateSequence::Kind::Kt) {
      value = !reaches(s_.t, x);
    } else {
      auto hit = last_hit(x);
      value = hit && *hit >= beta;
    }
    evaluated_.push_back({beta, x, value});
    return value;
  }

  std::size_t evaluations() const { return evaluations_; }

  // β ≤ γ ∧ x ↠ y ∧ s(γ)(y) ⇒ s(β)(x), over evaluated pairs and known reductions.
  std::vector<std::string> monotone_failures() const {
    std::vector<std::string> out;
    for (const auto& [beta, x, vx] : evaluated_) {
      if (vx) continue;
      for (const auto& [gamma, y, vy] : evaluated_) {
        if (!vy || gamma < beta) continue;
        auto it = reach_.find({x, y});
        if (it != reach_.end() && it->second) {
          out.push_back("predicate sequence law fails at " + std::to_string(beta) + " for " + x.to_string());
          break;
        }
      }
    }
    return out;
  }

 private:
  struct Evaluation {
    std::size_t beta;
    Term term;
    bool value;
  };

  bool reaches(const Term& from, const Term& to) {
    auto key = std::make_pair(from, to);
    if (auto it = reach_.find(key); it != reach_.end()) return it->second;
    bool found = weak_reach(system_, from, to, s_.budget, depth_bound_).found;
    reach_.emplace(key, found);
    return found;
  }

  // Latest time at which a weak reduct of x sits at p.
  std::optional<std::size_t> last_hit(const Term& x) {
    if (auto it = hits_.find(x); it != hits_.end()) return it->second;
    std::optional<std::size_t> hit;
    std::set<Term> tried;
    for (auto it = at_p_.rbegin(); it != at_p_.rend() && !hit; ++it) {
      if (!tried.insert(it->second).second) continue;
      if (reaches(x, it->second)) hit = it->first;
    }
    hits_.emplace(x, hit);
    return hit;
  }

  const Itrs& system_;
  const PredicateSequence& s_;
  std::size_t depth_bound_;
  std::vector<std::pair<std::size_t, Term>> at_p_;
  std::map<std::pair<Term, Term>, bool> reach_;
  std::map<Term, std::optional<std::size_t>> hits_;
  std::vector<Evaluation> evaluated_;
  std::size_t evaluations_ = 0;
};

}  // namespace

XiResult xi_trace(const Itrs& system, const Trace& tr, const std::string& rule, const PredicateSequence& s,
                  const Budgets& budgets) {
  const auto& rl = system.rule(rule);
  if (rl.lhs == rl.rhs) throw Error("xi_trace: rule " + rule + " has identical sides");
  const int color = color_of(system.colors, rl.lhs.root());
  const auto root_system = restrict_to_color(system, color);
  const auto terms = tr.flattened();
  PredicateEvaluator pred(system, terms, s, budgets.depth_bound);

  XiResult out;
  struct Fill {
    Term term;
    std::vector<bool> keep_lhs;  // per cut edge
  };
  auto fill = [&](const Term& t, std::size_t time) {
    Fill f;
    auto cut = principal_cut(t, system.colors);
    std::map<std::pair<std::uint32_t, std::size_t>, bool> choice;
    for (const auto& e : cut.edges) {
      bool l = pred(time, t.at_node(e.to));
      f.keep_lhs.push_back(l);
      choice[{e.from, e.arg}] = l;
    }
    f.term = toplayer_fill(t, system.colors,
                           [&](const CutEdge& e) { return choice.at({e.from, e.arg}) ? rl.lhs : rl.rhs; });
    return f;
  };

  std::size_t g = 0;
  for (std::size_t si = 0; si < tr.segments.size(); ++si) {
    const auto& seg = tr.segments[si];
    Segment xs;
    auto even = fill(seg.terms.front(), g);
    xs.terms.push_back(even.term);
    for (std::size_t i = 0; i + 1 < seg.terms.size(); ++i, ++g) {
      auto odd = fill(seg.terms[i], g + 1);
      std::size_t flips = 0;
      for (std::size_t k = 0; k < even.keep_lhs.size(); ++k) {
        if (even.keep_lhs[k] && !odd.keep_lhs[k]) ++flips;
        if (!even.keep_lhs[k] && odd.keep_lhs[k]) {
          out.violations.push_back({g, "a principal subterm switches from rhs back to lhs"});
        }
      }
      out.flips += flips;
      xs.steps.push_back({TraceStep::Kind::Flip, {}, flips});
      xs.terms.push_back(odd.term);

      auto next = fill(seg.terms[i + 1], g + 1);
      TraceStep step;
      if (next.term == odd.term) {
        step.kind = TraceStep::Kind::Stutter;
      } else {
        std::optional<RedexOccurrence> found;
        const auto& orig = seg.steps[i];
        if (orig.kind == TraceStep::Kind::Rewrite && root_system.find_rule(orig.occurrence.rule)) {
          RedexOccurrence occ{orig.occurrence.position, orig.occurrence.rule, {}};
          try {
            if (rewrite_step(root_system, odd.term, occ) == next.term) found = occ;
          } catch (const StaleOccurrence&) {
          }
        }
        if (!found) {
          for (auto& succ : successors(root_system, odd.term, search_bound(odd.term, budgets.depth_bound))) {
            if (succ.result == next.term) {
              found = std::move(succ.occurrence);
              break;
            }
          }
        }
        if (found) {
          step.occurrence = std::move(*found);
        } else {
          out.violations.push_back({g, "simulated step is not a step of the root system"});
          step.kind = TraceStep::Kind::Stutter;
        }
      }
      xs.steps.push_back(std::move(step));
      xs.terms.push_back(next.term);
      even = std::move(next);
    }
    ++g;
    if (si + 1 < tr.segments.size()) {
      xs.limit = fill(tr.segments[si + 1].terms.front(), g).term;
    }
    out.trace.segments.push_back(std::move(xs));
  }

  for (auto& msg : pred.monotone_failures()) out.violations.push_back({0, std::move(msg)});
  out.evaluations = pred.evaluations();

  const auto& last = out.trace.segments.back().terms;
  if (last.size() >= 2) {
    out.diameters = sliding_diameter(system.metric, last, std::max<std::size_t>(2, budgets.window), budgets.tol);
    out.floor = *std::min_element(out.diameters.begin(), out.diameters.end());
    out.non_cauchy = !out.floor.is_zero();
  }
  return out;
}

CutoffResult cutoff_trace(const Itrs& system, const Trace& tr, std::size_t n, const Term& u,
                          std::size_t depth_bound) {
  CutoffResult out;
  for (std::size_t si = 0; si < tr.segments.size(); ++si) {
    const auto& seg = tr.segments[si];
    Segment cs;
    for (const auto& t : seg.terms) cs.terms.push_back(cutoff(t, n, u, system.colors));
    for (std::size_t i = 0; i < seg.steps.size(); ++i) {
      const auto& from = cs.terms[i];
      const auto& to = cs.terms[i + 1];
      auto where = "segment " + std::to_string(si) + ", step " + std::to_string(i);
      TraceStep step;
      if (from == to) {
        step.kind = TraceStep::Kind::Stutter;
        ++out.stutters;
        cs.steps.push_back(std::move(step));
        continue;
      }
      std::optional<RedexOccurrence> found;
      const auto& orig = seg.steps[i];
      if (orig.kind == TraceStep::Kind::Rewrite) {
        RedexOccurrence occ{orig.occurrence.position, orig.occurrence.rule, {}};
        try {
          if (rewrite_step(system, from, occ) == to) found = occ;
        } catch (const StaleOccurrence&) {
        }
      }
      if (!found) {
        for (auto& succ : successors(system, from, search_bound(from, depth_bound))) {
          if (succ.result == to) {
            found = std::move(succ.occurrence);
            break;
          }
        }
      }
      if (!found) {
        out.violations.push_back(where + ": cut terms are not related by a step");
        step.kind = TraceStep::Kind::Stutter;
        cs.steps.push_back(std::move(step));
        continue;
      }
      if (n == 1) {
        const auto& lhs = system.rule(found->rule).lhs;
        if (color_of(system.colors, lhs.root()) != color_of(system.colors, from.root())) {
          out.violations.push_back(where + ": rule " + found->rule + " is not from the root system");
        }
      }
      step.occurrence = std::move(*found);
      cs.steps.push_back(std::move(step));
    }
    if (seg.limit) cs.limit = cutoff(*seg.limit, n, u, system.colors);
    out.trace.segments.push_back(std::move(cs));
  }
  return out;
}

}  // namespace itrs
