#include "itrs/corpus.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <map>

namespace itrs {

namespace {

struct Source {
  std::string name;
  std::string summary;
  std::vector<std::string> parts;
  std::vector<std::pair<std::string, std::string>> terms;  // parsed against the combined signature
};

const std::vector<Source>& sources() {
  static const std::vector<Source> all = {
      {"ltree",
       "binary trees with a strict right spine",
       {R"(metric granular
sig Bin/3 [lazy, lazy, strict]
sig Null/0
sig N/0
)"},
       {{"short", "Bin(Null, N, Null)"},
        {"long", "Bin(Null, N, Bin(Null, N, Null))"},
        {"deep_left", "Bin(Bin(Null, N, Null), N, Null)"},
        {"right_spine", "mu X. Bin(Null, N, X)"},
        {"left_spine", "mu X. Bin(X, N, Null)"}}},
      {"toyama",
       "F(0,1,x) -> F(x,x,x) combined with the two projections of G",
       {R"(metric id
sig F/3
sig 0/0
sig 1/0
rule toy: F(0, 1, x) -> F(x, x, x)
)",
        R"(metric id
sig G/2
rule proj1: G(x, y) -> x
rule proj2: G(x, y) -> y
)"},
       {{"start", "F(0, 1, G(0, 1))"}}},
      {"exnonlin",
       "a non-left-linear permutation rule next to 0 -> S(0)",
       {R"(metric infty
sig F/3
rule perm: F(x, x, y) -> F(x, y, x)
)",
        R"(metric infty
sig 0/0
sig S/1
rule succ: 0 -> S(0)
)"},
       {{"start", "F(0, 0, 0)"}, {"zero", "0"}}},
      {"string",
       "string rewriting BE -> CSE, AC -> AB, BS -> SB, SC -> CS over unary symbols",
       {R"(metric infty
sig A/1
sig B/1
sig C/1
sig S/1
sig E/0
rule BE: B(E) -> C(S(E))
rule AC: A(C(x)) -> A(B(x))
rule BS: B(S(x)) -> S(B(x))
rule SC: S(C(x)) -> C(S(x))
)"},
       {{"start", "A(B(E))"}}},
      {"ex-zantema",
       "E -> S(E), F -> S(F), G(x,x) -> G(E,F)",
       {R"(metric infty
sig E/0
sig F/0
sig S/1
sig G/2
rule pumpE: E -> S(E)
rule pumpF: F -> S(F)
rule reset: G(x, x) -> G(E, F)
)"},
       {{"start", "G(E, F)"}, {"e", "E"}, {"f", "F"}, {"top", "G(mu X. S(X), mu Y. S(Y))"}}},
      {"rearrange",
       "E-reducts placed under J and K, then consumed by J(K(x,y)) -> J(y)",
       {R"(metric infty
sig E/0
sig Z/0
sig H/1
sig S/1
rule EZ: E -> Z
rule EH: E -> H(E)
rule HZ: H(Z) -> S(Z)
rule HS: H(S(x)) -> S(S(x))
)",
        R"(metric infty
sig J/1
sig K/2
rule JK: J(K(x, y)) -> J(y)
)"},
       {{"start", "J(mu X. K(E, X))"}, {"s", "J(mu X. K(J(K(x, y)), X))"}}},
      {"collapsing",
       "G(H(x)) -> G(x) combined with the collapsing F(x) -> x",
       {R"(metric infty
sig G/1
sig H/1
rule GH: G(H(x)) -> G(x)
)",
        R"(metric infty
sig F/1
rule drop: F(x) -> x
)"},
       {{"start", "G(mu X. F(H(X)))"}, {"t", "mu X. F(H(X))"}}},
      {"exa-layers",
       "F(F(x)) -> G(x) with an expansive rule-less H",
       {R"(metric infty
sig F/1
sig G/1
rule FF: F(F(x)) -> G(x)
)",
        R"(metric infty
sig H/1 [scale(2)]
)"},
       {{"start", "mu X. F(F(H(X)))"}, {"limit", "mu X. G(H(X))"}, {"head_start", "mu X. H(F(F(X)))"}}},
      {"exa-layers2",
       "F(F(x)) -> G(x) under F = pow(2), G = id, with H = cap(1/2)",
       {R"(metric infty
sig F/1 [pow(2)]
sig G/1 [id]
rule FF: F(F(x)) -> G(x)
)",
        R"(metric infty
sig H/1 [cap(1/2)]
)"},
       {{"start", "mu X. F(F(H(X)))"}, {"limit", "mu X. G(H(X))"}}},
      {"diverge-exa",
       "head reduction of mu X. H(F(F(X))) in the exa-layers union",
       {R"(metric infty
sig F/1
sig G/1
rule FF: F(F(x)) -> G(x)
)",
        R"(metric infty
sig H/1 [scale(2)]
)"},
       {{"start", "mu X. H(F(F(X)))"}}},
  };
  return all;
}

const Source& source(const std::string& name) {
  for (const auto& s : sources()) {
    if (s.name == name) return s;
  }
  throw Error("unknown fixture '" + name + "'");
}

Fixture build(const Source& src) {
  Fixture f;
  f.name = src.name;
  f.summary = src.summary;
  f.sources = src.parts;
  f.file = parse_itrs_file(src.parts.front());
  if (src.parts.size() == 2) {
    auto right = parse_itrs_file(src.parts[1]);
    f.file.system = disjoint_union(f.file.system, right.system).system;
  }
  for (const auto& [n, text] : src.terms) f.file.terms.emplace_back(n, parse_term(text, &f.file.system.sig));
  return f;
}

Itrs constituent(const Fixture& f, std::size_t i) { return parse_itrs_file(f.sources.at(i)).system; }

Term named(const Fixture& f, const std::string& name) {
  if (const auto* t = f.file.term(name)) return *t;
  throw Error("fixture " + f.name + " has no term '" + name + "'");
}

class Checker {
 public:
  explicit Checker(FixtureReport& r) : r_(r) {}
  bool operator()(std::string label, bool ok, std::string detail = {}) {
    r_.checks.push_back({std::move(label), ok, std::move(detail)});
    return ok;
  }

 private:
  FixtureReport& r_;
};

std::string describe(const Verdict& v) {
  std::string out = to_string(v.kind);
  auto kind = witness_kind(v.witness);
  if (kind != "none") out += "(" + kind + ")";
  if (v.kind == Verdict::Kind::Converging && v.limit) out += "(" + v.limit->to_string() + ")";
  return out;
}

std::vector<Term> head_terms(const Itrs& sys, const Term& t0, std::size_t steps, const Budgets& b) {
  return simulate(sys, t0, Strategy::LeftmostOutermost, steps, b.depth_bound).segment.terms;
}

bool all_consecutive_one(const TermMetric& m, const std::vector<Term>& terms) {
  for (std::size_t i = 0; i + 1 < terms.size(); ++i) {
    auto d = distance(m, terms[i], terms[i + 1]);
    if (!d.is_exact() || d.exponent() != std::optional<std::int64_t>(0)) return false;
  }
  return terms.size() > 1;
}

void run_ltree(const Fixture& f, FixtureReport& r, const Budgets&) {
  Checker check(r);
  const auto& m = f.file.system.metric;
  auto spine = distance(m, named(f, "short"), named(f, "long"));
  auto left = distance(m, named(f, "short"), named(f, "deep_left"));
  check("right spines of different length are at distance 1", spine == Dist::dyadic(0), spine.to_string());
  check("a longer left branch costs only 1/2", left == Dist::dyadic(1), left.to_string());
  auto rs = is_member(m, named(f, "right_spine"));
  check("infinite right spine is not a member", rs.verdict == Membership::Verdict::NonMember);
  auto ls = is_member(m, named(f, "left_spine"));
  check("infinite left spine is a member", ls.verdict == Membership::Verdict::Member);
  r.expected = "right-spine distance 1";
  r.observed = "right-spine distance " + spine.to_string();
}

void run_toyama(const Fixture& f, FixtureReport& r, const Budgets& b) {
  Checker check(r);
  const auto& sys = f.file.system;
  auto start = named(f, "start");
  auto v = classify_convergence(sys, start, b);
  r.expected = "diverging(loop)";
  r.observed = describe(v);
  const auto* w = std::get_if<LoopWitness>(&v.witness);
  if (!check("a loop is found", w != nullptr)) return;
  check("the loop starts at F(0,1,G(0,1))", w->start == start, w->start.to_string());
  check("the loop has three steps", w->cycle.size() == 3, std::to_string(w->cycle.size()));
  check("the loop replays", replays(sys, *w));
  auto probe = strong_convergence_probe(sys, start, b);
  check("strong convergence fails under the discrete metric", probe.violation && probe.agree);
}

void run_exnonlin(const Fixture& f, FixtureReport& r, const Budgets& b) {
  Checker check(r);
  const auto& sys = f.file.system;
  auto tr = exnonlin_trace();
  check("the five-step trace replays", !validate_trace(sys, tr));
  check("it ends in F(S(0),S(0),S(0))", tr.last() == parse_term("F(S(0),S(0),S(0))", &sys.sig),
        tr.last().to_string());
  auto pp = trace_ppos(tr, sys.colors, b.depth_bound);
  check("principal positions are 1, 2 and 3", pp == std::vector<Position>{{1}, {2}, {3}});
  bool focussed = true;
  std::string betas;
  for (const auto& p : pp) {
    auto res = focussed_probe(sys, tr, p, b.reach_expansions, b.depth_bound);
    focussed = focussed && res.holds;
    if (!betas.empty()) betas += " ";
    betas += p.to_string() + ":" + (res.beta ? std::to_string(*res.beta) : "-");
  }
  check("subterm sequences are focussed (prefix evidence)", focussed, betas);
  check("no pumping pattern is detected", !extrapolate_limit(tr.segments.front()));

  auto succ = constituent(f, 1);
  auto zero = named(f, "zero");
  auto sim = simulate(succ, zero, Strategy::LeftmostOutermost, 4);
  check("0 -> S(0) gives 0, S(0), ..., S^4(0)",
        sim.segment.terms.size() == 5 && sim.segment.terms.back() == parse_term("S(S(S(S(0))))"));
  auto v = classify_convergence(succ, zero, b);
  check("0 -> S(0) converges to mu X.S(X)",
        v.kind == Verdict::Kind::Converging && v.limit && *v.limit == parse_term("mu X. S(X)"), describe(v));
  r.expected = "focussed at 1, 2, 3";
  r.observed = focussed ? "focussed at " + betas : "not focussed";
}

void run_string(const Fixture& f, FixtureReport& r, const Budgets& b) {
  Checker check(r);
  auto v = classify_convergence(f.file.system, named(f, "start"), b);
  r.expected = "diverging(diameter_floor)";
  r.observed = describe(v);
  const auto* w = std::get_if<DiameterFloor>(&v.witness);
  if (!check("a diameter floor is reported", w != nullptr, r.observed)) return;
  check("the floor is positive", !w->eps.is_zero(), w->eps.to_string());
  auto terms = v.trace.flattened();
  bool remeasured = std::all_of(w->samples.begin(), w->samples.end(), [&](const auto& s) {
    return w->eps <= distance(f.file.system.metric, terms.at(s.first), terms.at(s.second));
  });
  check("floor samples re-measure", remeasured && !w->samples.empty());
}

void run_zantema(const Fixture& f, FixtureReport& r, const Budgets& b) {
  Checker check(r);
  const auto& sys = f.file.system;
  auto s_inf = parse_term("mu X. S(X)");
  for (const char* name : {"e", "f"}) {
    auto seg = simulate(sys, named(f, name), Strategy::LeftmostOutermost, 8).segment;
    auto lim = extrapolate_limit(seg);
    check(std::string("pumping ") + name + " extrapolates to mu X.S(X)", lim && *lim == s_inf,
          lim ? lim->to_string() : "none");
  }
  auto top = named(f, "top");
  auto fired = successors(sys, top, b.depth_bound);
  check("G(x,x) -> G(E,F) fires on the limit",
        fired.size() == 1 && fired.front().result == named(f, "start"));
  auto v = classify_convergence(sys, named(f, "start"), b);
  r.expected = "diverging(limit_cycle)";
  r.observed = describe(v);
  check("classification closes the limit cycle", std::holds_alternative<LimitCycle>(v.witness), r.observed);
}

void run_rearrange(const Fixture& f, FixtureReport& r, const Budgets& b) {
  Checker check(r);
  const auto& sys = f.file.system;
  auto tr = rearrange_trace();
  check("the two-segment trace replays", !validate_trace(sys, tr));
  auto xi = xi_trace(sys, tr, "JK", PredicateSequence::fp(Position{1, 1}, b.reach_expansions), b);
  check("every simulated step is a root-system step or stutter", xi.violations.empty(),
        xi.violations.empty() ? "" : xi.violations.front().reason);
  auto a0 = parse_term("J(mu X. K(J(K(x, y)), X))");
  auto flipped = parse_term("J(K(J(y), mu X. K(J(K(x, y)), X)))");
  const auto& second = xi.trace.segments.back().terms;
  bool alternates = second.size() >= 3;
  for (std::size_t i = 0; i < second.size() && alternates; ++i) {
    alternates = second[i] == (i % 2 == 0 ? a0 : flipped);
  }
  check("second segment alternates J(a0) / J(K(r,a0))", alternates);
  check("the simulated trace is not Cauchy", xi.non_cauchy && xi.floor == Dist::dyadic(3), xi.floor.to_string());
  auto loop = find_loop(constituent(f, 1), named(f, "s"), b.loop_states, b.depth_bound, b.loop_nodes);
  check("J(K(x,y)) -> J(y) alone already loops", loop && loop->cycle.size() == 2);
  r.expected = "non-Cauchy top layer with floor 1/8";
  r.observed = std::string(xi.non_cauchy ? "non-Cauchy" : "Cauchy") + " top layer with floor " + xi.floor.to_string();
}

void run_collapsing(const Fixture& f, FixtureReport& r, const Budgets&) {
  Checker check(r);
  const auto& sys = f.file.system;
  auto start = named(f, "start");
  auto w = find_loop(sys, start, 1000);
  r.expected = "2-step loop G(t) -> G(H(t)) -> G(t)";
  r.observed = w ? std::to_string(w->cycle.size()) + "-step loop" : "no loop";
  if (!check("a loop is found within 1000 states", w.has_value())) return;
  auto t = named(f, "t");
  check("the loop is G(t) -> G(H(t)) -> G(t)",
        w->cycle.size() == 2 && w->start == start && w->cycle_terms[1] == Term::apply("G", {Term::apply("H", {t})}));
  check("the loop replays", replays(sys, *w));
}

void run_layers(const Fixture& f, FixtureReport& r, const Budgets& b) {
  Checker check(r);
  const auto& sys = f.file.system;
  auto start = named(f, "start");
  auto limit = named(f, "limit");
  check("mu X.F(F(H(X))) is a member", is_member(sys.metric, start, b.tol).verdict == Membership::Verdict::Member);
  check("mu X.G(H(X)) is not a member",
        is_member(sys.metric, limit, b.tol).verdict == Membership::Verdict::NonMember);
  check("head trace from mu X.H(F(F(X))) keeps distance exactly 1",
        all_consecutive_one(sys.metric, head_terms(sys, named(f, "head_start"), 20, b)));
  auto v = classify_convergence(sys, start, b);
  r.expected = "diverging(non_member_limit)";
  r.observed = describe(v);
  const auto* w = std::get_if<NonMemberLimit>(&v.witness);
  check("the extrapolated limit is mu X.G(H(X))", w && w->limit == limit, r.observed);
  auto r1 = constituent(f, 0);
  auto probe = strong_convergence_probe(r1, parse_term("F(F(F(F(x))))", &r1.sig), b);
  check("F(F(x)) -> G(x) alone shows no root recurrence", !probe.violation && probe.agree);
}

void run_layers2(const Fixture& f, FixtureReport& r, const Budgets& b) {
  Checker check(r);
  const auto& sys = f.file.system;
  bool closed = true;
  for (std::size_t i = 0; i < 2; ++i) {
    auto part = constituent(f, i);
    for (const auto& [g, n] : part.sig.symbols()) {
      if (n != 1) continue;
      auto cyc = parse_term("mu X. " + g + "(X)", &part.sig);
      closed = closed && is_member(part.metric, cyc, b.tol).verdict == Membership::Verdict::NonMember;
    }
  }
  check("neither constituent admits its own cycles", closed);
  auto mixed = is_member(constituent(f, 0).metric, parse_term("mu X. F(G(X))"), b.tol);
  check("nor a mixed F/G cycle", mixed.verdict == Membership::Verdict::NonMember);
  auto in = is_member(sys.metric, named(f, "start"), b.tol);
  auto out = is_member(sys.metric, named(f, "limit"), b.tol);
  check("the union admits mu X.F(F(H(X)))", in.verdict == Membership::Verdict::Member);
  check("and rejects mu X.G(H(X))", out.verdict == Membership::Verdict::NonMember);
  r.expected = "constituents closed, union admits an infinite term";
  r.observed = closed && in.verdict == Membership::Verdict::Member ? r.expected : "mismatch";
}

void run_diverge(const Fixture& f, FixtureReport& r, const Budgets& b) {
  Checker check(r);
  const auto& sys = f.file.system;
  auto start = named(f, "start");
  auto terms = head_terms(sys, start, 20, b);
  check("consecutive head-trace distances stay 1", all_consecutive_one(sys.metric, terms));
  Trace tr;
  tr.segments.push_back(simulate(sys, start, Strategy::LeftmostOutermost, 20, b.depth_bound).segment);
  auto cut = cutoff_trace(sys, tr, 2, Term::variable(kHoleVar), b.depth_bound);
  check("the n=2 cutoff trace is a reflexive-closure reduction", cut.valid());
  auto diam = sliding_diameter(sys.metric, cut.trace.flattened(), b.window, b.tol);
  check("the cutoff trace settles", !diam.empty() && diam.back().is_zero());
  auto orig = sliding_diameter(sys.metric, terms, b.window, b.tol);
  bool floor_one = std::all_of(orig.begin(), orig.end(), [](const Dist& d) { return d == Dist::dyadic(0); });
  check("while the original keeps diameter 1", floor_one);
  r.expected = "cutoff converges, original has floor 1";
  r.observed = cut.valid() && floor_one ? r.expected : "mismatch";
}

const std::map<std::string, std::function<void(const Fixture&, FixtureReport&, const Budgets&)>>& runners() {
  static const std::map<std::string, std::function<void(const Fixture&, FixtureReport&, const Budgets&)>> m = {
      {"ltree", run_ltree},         {"toyama", run_toyama},         {"exnonlin", run_exnonlin},
      {"string", run_string},       {"ex-zantema", run_zantema},    {"rearrange", run_rearrange},
      {"collapsing", run_collapsing}, {"exa-layers", run_layers},   {"exa-layers2", run_layers2},
      {"diverge-exa", run_diverge},
  };
  return m;
}

}  // namespace

std::vector<std::string> fixture_names() {
  std::vector<std::string> out;
  for (const auto& s : sources()) out.push_back(s.name);
  std::sort(out.begin(), out.end());
  return out;
}

Fixture fixture(const std::string& name) { return build(source(name)); }

bool FixtureReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const CorpusCheck& c) { return c.passed; });
}

Budgets corpus_budgets() {
  Budgets b;
  b.loop_states = 400;
  b.reach_expansions = 2000;
  b.max_steps = 32;
  return b;
}

FixtureReport run_fixture(const std::string& name, const Budgets& budgets) {
  auto f = fixture(name);
  FixtureReport r;
  r.name = name;
  try {
    runners().at(name)(f, r, budgets);
  } catch (const Error& e) {
    r.checks.push_back({"fixture runs without error", false, e.what()});
  }
  return r;
}

std::vector<FixtureReport> run_corpus(const Budgets& budgets) {
  // Fixtures share no mutable state, so each one runs on its own thread.
  std::vector<std::future<FixtureReport>> jobs;
  for (const auto& name : fixture_names()) {
    jobs.push_back(std::async(std::launch::async, [name, budgets] { return run_fixture(name, budgets); }));
  }
  std::vector<FixtureReport> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

Trace exnonlin_trace() {
  auto f = fixture("exnonlin");
  std::vector<RedexOccurrence> script = {
      {{3}, "succ", {}}, {{}, "perm", {}}, {{1}, "succ", {}}, {{}, "perm", {}}, {{2}, "succ", {}}};
  Trace tr;
  tr.segments.push_back(simulate_script(f.file.system, named(f, "start"), script).segment);
  return tr;
}

Trace rearrange_trace(std::size_t n) {
  auto f = fixture("rearrange");
  const auto& sys = f.file.system;
  std::vector<RedexOccurrence> script;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::uint32_t> steps{1};
    steps.insert(steps.end(), k, 2);
    steps.push_back(1);
    auto below = [&](std::size_t depth) {
      auto s = steps;
      s.insert(s.end(), depth, 1);
      return Position(s);
    };
    for (std::size_t j = 0; j < k; ++j) script.push_back({below(j), "EH", {}});
    script.push_back({below(k), "EZ", {}});
    if (k > 0) script.push_back({below(k - 1), "HZ", {}});
    for (std::size_t j = k; j-- > 1;) script.push_back({below(j - 1), "HS", {}});
  }
  Trace tr;
  tr.segments.push_back(simulate_script(sys, named(f, "start"), script).segment);
  tr.segments.back().limit = tr.segments.back().terms.back();
  std::vector<RedexOccurrence> root(n, RedexOccurrence{{}, "JK", {}});
  tr.segments.push_back(simulate_script(sys, tr.segments.back().terms.back(), root).segment);
  return tr;
}

std::vector<UnionTrace> union_traces() {
  std::vector<UnionTrace> out;
  auto add = [&](const std::string& name, Trace tr) {
    auto f = fixture(name);
    bool collapsing = std::any_of(f.file.system.rules.begin(), f.file.system.rules.end(),
                                  [](const Rule& r) { return is_collapsing(r); });
    out.push_back({name, f.file.system, std::move(tr), collapsing});
  };
  auto head = [](const std::string& name, std::size_t steps) {
    auto f = fixture(name);
    Trace tr;
    tr.segments.push_back(
        simulate(f.file.system, named(f, "start"), Strategy::LeftmostOutermost, steps).segment);
    return tr;
  };
  auto loop = [](const std::string& name) {
    auto f = fixture(name);
    auto w = find_loop(f.file.system, named(f, "start"), 1000);
    if (!w) throw Error("fixture " + name + " lost its loop");
    auto script = w->prefix;
    script.insert(script.end(), w->cycle.begin(), w->cycle.end());
    Trace tr;
    tr.segments.push_back(simulate_script(f.file.system, named(f, "start"), script).segment);
    return tr;
  };
  add("exnonlin", exnonlin_trace());
  add("rearrange", rearrange_trace());
  add("exa-layers", head("exa-layers", 20));
  add("exa-layers2", head("exa-layers2", 20));
  add("diverge-exa", head("diverge-exa", 20));
  add("toyama", loop("toyama"));
  add("collapsing", loop("collapsing"));
  return out;
}

}  // namespace itrs
