#include <doctest.h>

#include <sstream>

#include "itrs/convergence.hpp"
#include "itrs/corpus.hpp"
#include "itrs/itrs_file.hpp"

using namespace itrs;

namespace {

Term T(const char* s) { return parse_term(s); }

Itrs succ_system() { return parse_itrs("sig 0/0\nsig S/1\nrule succ: 0 -> S(0)\n"); }

Term named(const Fixture& f, const char* name) { return *f.file.term(name); }

}  // namespace

TEST_CASE("simulate with a strategy") {
  auto s = succ_system();
  auto sim = simulate(s, T("0"), Strategy::LeftmostOutermost, 4);
  REQUIRE(sim.segment.terms.size() == 5);
  CHECK(sim.segment.terms.back() == T("S(S(S(S(0))))"));
  auto nf = simulate(s, T("S(S(a))"), Strategy::LeftmostInnermost, 4);
  CHECK(nf.normal_form);
  CHECK(nf.segment.terms.size() == 1);
}

TEST_CASE("strategies pick different redexes") {
  auto s = parse_itrs("sig F/1\nsig a/0\nsig b/0\nrule ab: a -> b\nrule fa: F(a) -> b\n");
  auto fa = parse_term("F(a)", &s.sig);
  auto lo = simulate(s, fa, Strategy::LeftmostOutermost, 1);
  REQUIRE(lo.segment.steps.size() == 1);
  CHECK(lo.segment.steps.front().occurrence.rule == "fa");
  CHECK(lo.segment.terms.back() == parse_term("b", &s.sig));
  auto li = simulate(s, fa, Strategy::LeftmostInnermost, 1);
  REQUIRE(li.segment.steps.size() == 1);
  CHECK(li.segment.steps.front().occurrence.position == Position{1});
  CHECK(li.segment.terms.back() == parse_term("F(b)", &s.sig));
}

TEST_CASE("sliding diameter") {
  auto s = succ_system();
  std::vector<Term> constant(5, T("S(0)"));
  for (const auto& d : sliding_diameter(s.metric, constant, 2)) CHECK(d.is_zero());
  auto chain = simulate(s, T("0"), Strategy::LeftmostOutermost, 5).segment.terms;
  auto diam = sliding_diameter(s.metric, chain, 2);
  REQUIRE(diam.size() == 5);
  for (std::size_t k = 0; k < diam.size(); ++k) CHECK(diam[k] == Dist::dyadic(static_cast<std::int64_t>(k)));
  CHECK_THROWS(sliding_diameter(s.metric, chain, 1));
}

TEST_CASE("loops") {
  auto toy = fixture("toyama");
  auto w = find_loop(toy.file.system, named(toy, "start"), 1000);
  REQUIRE(w);
  CHECK(w->cycle.size() == 3);
  CHECK(replays(toy.file.system, *w));
  auto sn = parse_itrs("sig F/1\nsig G/1\nrule FF: F(F(x)) -> G(x)\n");
  CHECK_FALSE(find_loop(sn, T("F(F(F(F(x))))"), 1000).has_value());
}

TEST_CASE("a reduction graph is complete for terminating starts") {
  auto sn = parse_itrs("sig F/1\nsig G/1\nrule FF: F(F(x)) -> G(x)\n");
  auto g = explore(sn, T("F(F(F(F(x))))"), 100);
  CHECK(g.complete);
  CHECK(g.nodes.front() == T("F(F(F(F(x))))"));
  // F^4 -> G(F^2) | F(G(F)) | F^2(G) -> G(G), plus the normal forms
  CHECK(g.nodes.size() == 5);
}

TEST_CASE("limit extrapolation") {
  auto s = succ_system();
  auto seg = simulate(s, T("0"), Strategy::LeftmostOutermost, 8).segment;
  auto lim = extrapolate_limit(seg);
  REQUIRE(lim);
  CHECK(*lim == T("mu X. S(X)"));
  Segment constant;
  constant.terms.assign(4, T("S(0)"));
  constant.steps.assign(3, TraceStep{TraceStep::Kind::Stutter, {}, 0});
  CHECK(extrapolate_limit(constant) == T("S(0)"));
  CHECK_FALSE(extrapolate_limit(exnonlin_trace().segments.front()).has_value());
}

TEST_CASE("classification") {
  auto s = succ_system();
  auto v = classify_convergence(s, T("0"), corpus_budgets());
  CHECK(v.kind == Verdict::Kind::Converging);
  REQUIRE(v.limit);
  CHECK(*v.limit == T("mu X. S(X)"));

  auto toy = fixture("toyama");
  auto tv = classify_convergence(toy.file.system, named(toy, "start"), corpus_budgets());
  CHECK(tv.kind == Verdict::Kind::Diverging);
  CHECK(std::holds_alternative<LoopWitness>(tv.witness));

  auto lay = fixture("exa-layers");
  auto lv = classify_convergence(lay.file.system, named(lay, "start"), corpus_budgets());
  CHECK(lv.kind == Verdict::Kind::Diverging);
  const auto* nm = std::get_if<NonMemberLimit>(&lv.witness);
  REQUIRE(nm);
  CHECK(nm->limit == T("mu X. G(H(X))"));
  CHECK(is_member(lay.file.system.metric, nm->limit).verdict == Membership::Verdict::NonMember);

  auto nf = classify_convergence(s, T("S(a)"), corpus_budgets());
  CHECK(nf.kind == Verdict::Kind::Converging);
  CHECK(nf.limit == T("S(a)"));
}

TEST_CASE("strong convergence probe") {
  auto ff = parse_itrs("sig F/1\nsig G/1\nrule FF: F(F(x)) -> G(x)\n");
  auto p = strong_convergence_probe(ff, T("F(F(F(F(x))))"), corpus_budgets());
  CHECK_FALSE(p.violation);
  CHECK(p.agree);

  auto drop = parse_itrs("sig F/1\nrule drop: F(x) -> x\n");
  auto q = strong_convergence_probe(drop, T("mu X. F(X)"), corpus_budgets());
  CHECK(q.violation);
  CHECK(q.agree);
  REQUIRE(q.min_position);
  CHECK(q.min_position->is_root());

  auto toy = fixture("toyama");
  auto r = strong_convergence_probe(toy.file.system, named(toy, "start"), corpus_budgets());
  CHECK(r.violation);
  CHECK(r.agree);
}

TEST_CASE("focussed sequences") {
  auto ex = fixture("exnonlin");
  auto same = focussed_probe(ex.file.system, std::vector<Term>(4, T("0")));
  CHECK(same.holds);
  CHECK(same.beta == 0u);

  auto tr = exnonlin_trace();
  auto res = focussed_probe(ex.file.system, tr, Position{2});
  std::vector<Term> expected = {T("0"), T("0"), T("S(0)"), T("S(0)"), T("0"), T("S(0)")};
  CHECK(res.sequence == expected);
  CHECK(res.holds);
  CHECK(res.label == "prefix evidence");

  auto swap = parse_itrs("sig F/1\nsig a/0\nsig b/0\nrule sw: F(a) -> F(b)\nrule ws: F(b) -> F(a)\n");
  auto alt = focussed_probe(swap, std::vector<Term>{T("a"), T("b"), T("a"), T("b"), T("a"), T("b")});
  CHECK_FALSE(alt.holds);
}

TEST_CASE("principal positions of a trace") {
  auto ex = fixture("exnonlin");
  auto tr = exnonlin_trace();
  CHECK(trace_ppos(tr, ex.file.system.colors) == std::vector<Position>{{1}, {2}, {3}});
  Trace constant;
  constant.segments.push_back({{T("F(0,S(0),0)"), T("F(0,S(0),0)")}, {{TraceStep::Kind::Stutter, {}, 0}}, {}, false});
  CHECK(trace_ppos(constant, ex.file.system.colors) == ppos(T("F(0,S(0),0)"), ex.file.system.colors, 8));
  // A root step that erases the second argument removes it from the result.
  auto erase = parse_itrs("sig F/2 @1\nsig G/1 @1\nsig a/0 @2\nsig b/0 @2\nrule er: F(x, y) -> G(x)\n");
  auto seg = simulate_script(erase, parse_term("F(a, b)", &erase.sig), {{{}, "er", {}}}).segment;
  Trace et;
  et.segments.push_back(seg);
  CHECK(trace_ppos(et, erase.colors) == std::vector<Position>{{1}});
}

TEST_CASE("xi simulation") {
  auto re = fixture("rearrange");
  const auto& sys = re.file.system;
  // Entirely inside one constituent: nothing to fill.
  Trace inside;
  inside.segments.push_back(simulate(sys, named(re, "s"), Strategy::LeftmostOutermost, 3).segment);
  auto same = xi_trace(sys, inside, "JK", PredicateSequence::fp(Position{1, 1}));
  CHECK(same.violations.empty());
  std::vector<Term> collapsed;
  for (const auto& t : same.trace.flattened()) {
    if (collapsed.empty() || collapsed.back() != t) collapsed.push_back(t);
  }
  std::vector<Term> original;
  for (const auto& t : inside.flattened()) {
    if (original.empty() || original.back() != t) original.push_back(t);
  }
  CHECK(collapsed == original);

  // k_t for a term that reaches none of the principal subterms keeps every lhs.
  auto kt = xi_trace(sys, rearrange_trace(), "JK", PredicateSequence::kt(T("S(S(S(S(S(S(Z))))))")));
  CHECK(kt.flips == 0);
  CHECK(kt.violations.empty());
}

TEST_CASE("cutoff traces") {
  auto lay = fixture("diverge-exa");
  const auto& sys = lay.file.system;
  Trace tr;
  tr.segments.push_back(simulate(sys, named(lay, "start"), Strategy::LeftmostOutermost, 10).segment);
  auto u = T("u");
  auto zero = cutoff_trace(sys, tr, 0, u);
  CHECK(zero.valid());
  for (const auto& t : zero.trace.flattened()) CHECK(t == u);
  auto two = cutoff_trace(sys, tr, 2, u);
  CHECK(two.valid());
  CHECK(validate_trace(sys, two.trace) == std::nullopt);
}

TEST_CASE("trace files round-trip and are re-validated") {
  auto re = fixture("rearrange");
  auto tr = rearrange_trace(3);
  std::stringstream buf;
  write_trace(buf, tr);
  auto back = read_trace(buf, &re.file.system.sig);
  CHECK(back.flattened() == tr.flattened());
  REQUIRE(back.segments.size() == 2);
  CHECK(back.segments[0].limit == tr.segments[0].limit);
  CHECK_FALSE(validate_trace(re.file.system, back).has_value());

  auto bad = tr;
  bad.segments[1].steps[0].occurrence.position = Position{1};
  CHECK(validate_trace(re.file.system, bad).has_value());
  auto gap = tr;
  gap.segments[0].limit = T("J(Z)");
  CHECK(validate_trace(re.file.system, gap).has_value());
}
