#include "itrs/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "itrs/convergence.hpp"
#include "itrs/corpus.hpp"
#include "itrs/itrs_file.hpp"
#include "itrs/layers.hpp"
#include "itrs/metric.hpp"
#include "itrs/rewrite.hpp"
#include "itrs/term.hpp"
#include "itrs/trace.hpp"

namespace itrs::cli {

using nlohmann::json;

std::string Report::render() const {
  if (as_json) return data.dump(2) + "\n";
  return text;
}

namespace {

// Thrown for anything the user has to fix on the command line or in a file.
class InputError : public Error {
 public:
  using Error::Error;
};

struct Options {
  // Global flags.
  bool json = false;
  double tol = kDefaultTol;
  std::optional<std::size_t> budget;
  std::size_t depth_guard = kDefaultDepthGuard;
  std::size_t depth_bound = kDefaultDepthBound;
  std::optional<std::size_t> steps;

  // Shared by several subcommands.
  std::string file;
  std::string metric;
  std::string term;
  std::vector<std::string> terms;
  std::string expect;
  std::string out;

  std::string eps;
  std::string var;
  std::optional<double> at;
  std::string strategy = "lo";
  std::string script;
  std::string trace;
  std::string report;
  std::string rule;
  std::string fp;
  std::string kt;
  std::optional<std::size_t> cut;
  std::string fill;
  std::vector<std::string> names;
  std::string export_dir;
};

Budgets budgets_of(const Options& o) {
  Budgets b;
  if (o.budget) b.loop_states = b.reach_expansions = *o.budget;
  if (o.steps) b.max_steps = *o.steps;
  b.tol = o.tol;
  b.depth_bound = o.depth_bound;
  return b;
}

std::string fixture_stem(const std::string& source) {
  auto stem = std::filesystem::path(source).filename().string();
  if (stem.size() > 5 && stem.ends_with(".itrs")) stem.resize(stem.size() - 5);
  return stem;
}

bool is_fixture(const std::string& name) {
  auto names = fixture_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

// A path to an .itrs file, a fixture name (with or without .itrs), or one of
// the builtin metric names. Files on disk take precedence.
ItrsFile load_source(const std::string& source, bool strict = true) {
  if (source.empty()) throw InputError("no system given");
  if (std::filesystem::exists(source)) return load_itrs_file(source, strict);
  if (source == "infty" || source == "id") {
    ItrsFile f;
    f.metric_name = source;
    return f;
  }
  if (auto stem = fixture_stem(source); is_fixture(stem)) return fixture(stem).file;
  throw InputError("cannot open " + source + " (not a file, fixture or builtin metric)");
}

Signature infer_signature(const std::vector<Term>& ts) {
  Signature sig;
  for (const auto& t : ts) {
    for (const auto& n : t.nodes()) {
      if (!n.is_var) sig.add(n.label, static_cast<std::uint32_t>(n.kids.size()));
    }
  }
  return sig;
}

Term resolve_term(const ItrsFile& f, const std::string& text) {
  if (text.empty()) throw InputError("no term given (use --term)");
  if (const Term* t = f.term(text)) return *t;
  return parse_term(text, f.system.sig.size() ? &f.system.sig : nullptr);
}

// Terms for commands that only need a metric. When the source names a
// builtin metric, the signature is read off the terms themselves.
struct MetricContext {
  ItrsFile file;
  std::vector<Term> terms;
};

Term fill_term(const ItrsFile& f, const std::string& text) {
  return text.empty() ? Term::variable("u") : resolve_term(f, text);
}

MetricContext metric_context(const std::string& source, const std::vector<std::string>& texts) {
  MetricContext ctx{load_source(source.empty() ? "infty" : source), {}};
  for (const auto& s : texts) ctx.terms.push_back(resolve_term(ctx.file, s));
  if (ctx.file.system.sig.size() == 0) {
    auto sig = infer_signature(ctx.terms);
    ctx.file.system.sig = sig;
    ctx.file.system.metric = ctx.file.metric_name == "id" ? metric_id(sig) : metric_infty(sig);
  }
  return ctx;
}

// Scripts are written "1.2:rule, λ:rule"; an empty position means the root.
std::vector<RedexOccurrence> parse_script(const std::string& text) {
  std::vector<RedexOccurrence> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto colon = item.rfind(':');
    if (colon == std::string::npos) throw InputError("script step '" + item + "' lacks ':rule'");
    auto rule = item.substr(colon + 1);
    rule.erase(0, rule.find_first_not_of(' '));
    rule.erase(rule.find_last_not_of(' ') + 1);
    out.push_back({Position::parse(item.substr(0, colon)), rule, {}});
  }
  return out;
}

json script_json(const std::vector<RedexOccurrence>& s) {
  json a = json::array();
  for (const auto& o : s) a.push_back({{"position", o.position.to_string()}, {"rule", o.rule}});
  return a;
}

std::vector<RedexOccurrence> script_from_json(const json& a) {
  std::vector<RedexOccurrence> out;
  for (const auto& o : a) {
    out.push_back({Position::parse(o.at("position").get<std::string>()), o.at("rule").get<std::string>(), {}});
  }
  return out;
}

json trace_json(const Trace& tr) {
  std::ostringstream buf;
  write_trace(buf, tr);
  json a = json::array();
  std::istringstream in(buf.str());
  for (std::string line; std::getline(in, line);) a.push_back(json::parse(line));
  return a;
}

Trace trace_from_json(const json& a, const Signature& sig) {
  std::ostringstream buf;
  for (const auto& line : a) buf << line.dump() << '\n';
  std::istringstream in(buf.str());
  return read_trace(in, &sig);
}

Trace load_trace(const std::string& source, const Signature& sig) {
  if (source.empty()) throw InputError("no trace given (use --trace)");
  if (std::filesystem::exists(source)) {
    std::ifstream in(source);
    return read_trace(in, &sig);
  }
  if (source == "exnonlin") return exnonlin_trace();
  if (source == "rearrange") return rearrange_trace();
  throw InputError("cannot open trace " + source);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << content;
}

json dist_json(const Dist& d) {
  json j{{"distance", d.to_string()}, {"value", d.value()}, {"exact", d.is_exact()}};
  if (auto e = d.exponent()) j["exponent"] = *e;
  return j;
}

json loop_json(const LoopWitness& w) {
  return {{"start", w.start.to_string()},
          {"prefix", script_json(w.prefix)},
          {"cycle", script_json(w.cycle)},
          {"cycle_length", w.cycle.size()},
          {"distinct", w.distinct.to_string()},
          {"distance", w.distance.to_string()}};
}

json witness_json(const Witness& w) {
  struct Visitor {
    json operator()(std::monostate) const { return json{{"kind", "none"}}; }
    json operator()(const LoopWitness& l) const {
      auto j = loop_json(l);
      j["kind"] = "loop";
      return j;
    }
    json operator()(const NonMemberLimit& n) const {
      return {{"kind", "non_member_limit"},
              {"limit", n.limit.to_string()},
              {"to_cycle", n.to_cycle.to_string()},
              {"cycle", n.cycle.to_string()},
              {"residual", n.residual}};
    }
    json operator()(const DiameterFloor& d) const {
      json samples = json::array();
      for (auto [i, j] : d.samples) samples.push_back({i, j});
      return {{"kind", "diameter_floor"}, {"eps", d.eps.to_string()}, {"eps_value", d.eps.value()},
              {"samples", samples}};
    }
    json operator()(const LimitCycle& c) const {
      return {{"kind", "limit_cycle"}, {"first", c.first}, {"second", c.second}, {"term", c.term.to_string()}};
    }
  };
  return std::visit(Visitor{}, w);
}

std::string verdict_label(const Verdict& v) {
  std::string s = to_string(v.kind);
  if (auto k = witness_kind(v.witness); k != "none") s += " (" + k + ")";
  return s;
}

void check_expect(Report& r, const std::string& expect, const std::string& observed) {
  if (expect.empty()) return;
  r.data["expected"] = expect;
  if (expect != observed) {
    r.exit_code = kMismatch;
    r.text += "MISMATCH: expected " + expect + ", observed " + observed + "\n";
  }
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_check(const Options& o, Report& r) {
  auto f = load_source(o.file);
  json rules = json::array();
  for (const auto& rule : f.system.rules) rules.push_back({{"name", rule.name}, {"rule", rule.to_string()}});
  json terms = json::array();
  for (const auto& [n, t] : f.terms) terms.push_back({{"name", n}, {"term", t.to_string()}});
  auto printed = print_itrs(f);
  bool round_trip = print_itrs(parse_itrs_file(printed)) == printed;
  r.data["result"] = {{"valid", true},
                      {"metric", f.metric_name},
                      {"symbols", f.system.sig.size()},
                      {"rules", rules},
                      {"terms", terms},
                      {"round_trip", round_trip}};
  std::ostringstream s;
  s << "valid: " << f.system.rules.size() << " rule(s), " << f.system.sig.size() << " symbol(s), metric "
    << f.metric_name << "\n";
  if (!o.out.empty()) write_text_file(o.out, printed);
  if (!round_trip) {
    r.exit_code = kMismatch;
    s << "print/parse round trip differs\n";
  }
  r.text = s.str();
}

void cmd_distance(const Options& o, Report& r) {
  if (o.terms.size() != 2) throw InputError("distance needs exactly two terms");
  auto ctx = metric_context(o.metric, o.terms);
  auto d = distance(ctx.file.system.metric, ctx.terms[0], ctx.terms[1], o.tol);
  r.data["result"] = dist_json(d);
  r.text = d.to_string() + "\n";
}

void cmd_member(const Options& o, Report& r) {
  auto ctx = metric_context(o.metric, {o.term});
  auto m = is_member(ctx.file.system.metric, ctx.terms[0], o.tol);
  auto verdict = to_string(m.verdict);
  r.data["result"] = {{"term", ctx.terms[0].to_string()}, {"verdict", verdict}, {"exact", m.exact}};
  r.text = verdict;
  if (m.verdict == Membership::Verdict::NonMember) {
    r.data["result"]["to_cycle"] = m.to_cycle.to_string();
    r.data["result"]["cycle"] = m.cycle.to_string();
    r.data["result"]["residual"] = m.residual;
    r.text += ": cycle " + m.cycle.to_string() + " reached via " + m.to_cycle.to_string();
  }
  r.text += "\n";
  check_expect(r, o.expect, verdict);
}

void cmd_epos(const Options& o, Report& r) {
  auto ctx = metric_context(o.metric, {o.term});
  double eps = boost::rational_cast<double>(parse_rational(o.eps));
  try {
    auto ps = epos(ctx.file.system.metric, ctx.terms[0], eps, o.depth_guard);
    json a = json::array();
    std::string line;
    for (const auto& p : ps) {
      a.push_back(p.to_string());
      line += (line.empty() ? "" : " ") + p.to_string();
    }
    r.data["result"] = {{"positions", a}, {"count", ps.size()}};
    r.text = "{" + line + "}\n";
  } catch (const GuardExceeded& g) {
    r.data["result"] = {{"guard_exceeded", g.where().to_string()}, {"depth_guard", o.depth_guard}};
    r.text = "depth guard exceeded at " + g.where().to_string() + "\n";
    check_expect(r, o.expect, "guard_exceeded");
    return;
  }
  check_expect(r, o.expect, "finite");
}

void cmd_vdepth(const Options& o, Report& r) {
  auto ctx = metric_context(o.metric, {o.term});
  auto v = vdepth(ctx.file.system.metric, ctx.terms[0], o.var);
  r.data["result"] = {{"vdepth", v.to_string()}, {"zero", v.is_zero()}};
  r.text = v.to_string();
  if (o.at) {
    r.data["result"]["at"] = *o.at;
    r.data["result"]["value"] = v(*o.at);
    r.text += " at " + std::to_string(*o.at) + " = " + std::to_string(v(*o.at));
  }
  r.text += "\n";
}

void cmd_classify(const Options& o, Report& r) {
  auto f = load_source(o.file, false);
  json rules = json::array();
  std::ostringstream s;
  for (const auto& rep : classify_itrs(f.system)) {
    rules.push_back({{"name", rep.name},
                     {"collapsing", rep.collapsing},
                     {"pseudo_collapsing", rep.pseudo_collapsing},
                     {"depth_preserving", to_string(rep.depth.kind)},
                     {"left_linear", rep.left_linear},
                     {"variable_lhs", rep.variable_lhs},
                     {"extra_variables", rep.extra_variables},
                     {"infinite_lhs", rep.infinite_lhs},
                     {"rhs_member", rep.rhs_member},
                     {"rejected", rep.rejected()}});
    s << rep.name << ":";
    if (rep.rejected()) s << " rejected";
    if (rep.collapsing) s << " collapsing";
    if (rep.pseudo_collapsing) s << " pseudo-collapsing";
    s << " depth-preserving=" << to_string(rep.depth.kind);
    if (!rep.left_linear) s << " non-left-linear";
    if (!rep.rhs_member) s << " rhs-outside-completion";
    s << "\n";
  }
  r.data["result"] = {{"rules", rules}};
  r.text = s.str();
}

ItrsFile union_file(const ItrsFile& a, const ItrsFile& b) {
  auto u = disjoint_union(a.system, b.system);
  ItrsFile f;
  f.metric_name = a.metric_name == b.metric_name ? a.metric_name : "infty";
  f.system = u.system;
  auto add = [&](const ItrsFile& src, const std::map<std::string, std::string>& renaming) {
    for (const auto& [n, t] : src.terms) {
      std::string name = n;
      while (f.term(name)) name += "'";
      f.terms.emplace_back(name, rename_symbols(t, renaming));
    }
  };
  add(a, u.left_symbols);
  add(b, u.right_symbols);
  return f;
}

void cmd_union(const Options& o, Report& r) {
  if (o.names.size() != 2) throw InputError("union needs exactly two systems");
  auto f = union_file(load_source(o.names[0]), load_source(o.names[1]));
  auto printed = print_itrs(f);
  if (!o.out.empty()) write_text_file(o.out, printed);
  r.data["result"] = {{"itrs", printed}, {"rules", f.system.rules.size()}};
  r.text = printed;
}

void cmd_indirect(const Options& o, Report& r) {
  auto f = load_source(o.file);
  auto ind = indirect(f.system);
  f.system = ind.system;
  auto printed = print_itrs(f);
  if (!o.out.empty()) write_text_file(o.out, printed);
  r.data["result"] = {{"itrs", printed},
                      {"symbol", ind.symbol},
                      {"renamed", ind.renamed},
                      {"elimination_rule", ind.elimination_rule}};
  r.text = printed;
}

void cmd_layers(const Options& o, Report& r) {
  auto ctx = metric_context(o.metric, {o.term});
  const auto& t = ctx.terms[0];
  const auto& colors = ctx.file.system.colors;
  json pp = json::array();
  for (const auto& p : ppos(t, colors, o.depth_bound)) pp.push_back(p.to_string());
  auto rk = rank(t, colors);
  json cycles = json::array();
  for (const auto& c : principal_cycles(t, ctx.file.system.metric, colors)) {
    cycles.push_back(
        {{"to_cycle", c.to_cycle.to_string()}, {"path", c.path.to_string()}, {"component", c.component.to_string()}});
  }
  r.data["result"] = {{"ppos", pp},
                      {"rank", rk ? json(*rk) : json("infinite")},
                      {"principal_cycles", cycles}};
  std::ostringstream s;
  s << "ppos: " << pp.dump() << "\nrank: " << (rk ? std::to_string(*rk) : "infinite") << "\n";
  if (o.cut) {
    auto fill = fill_term(ctx.file, o.fill);
    auto c = cutoff(t, *o.cut, fill, colors);
    r.data["result"]["cutoff"] = c.to_string();
    s << "cutoff: " << c.to_string() << "\n";
  }
  r.text = s.str();
}

void emit_trace(const Options& o, Report& r, const Trace& tr) {
  std::ostringstream lines;
  write_trace(lines, tr);
  if (!o.out.empty()) write_text_file(o.out, lines.str());
  r.data["result"]["trace"] = trace_json(tr);
  r.text += lines.str();
}

void cmd_simulate(const Options& o, Report& r) {
  auto f = load_source(o.file);
  auto t0 = resolve_term(f, o.term);
  Simulation sim;
  if (!o.script.empty()) {
    sim = simulate_script(f.system, t0, parse_script(o.script));
  } else {
    auto strategy = parse_strategy(o.strategy);
    if (!strategy) throw InputError("unknown strategy " + o.strategy);
    sim = simulate(f.system, t0, *strategy, o.steps.value_or(Budgets{}.max_steps), o.depth_bound);
  }
  r.data["result"] = {{"steps", sim.segment.steps.size()}, {"normal_form", sim.normal_form}};
  Trace tr;
  tr.segments.push_back(std::move(sim.segment));
  emit_trace(o, r, tr);
}

void cmd_analyze(const Options& o, Report& r) {
  auto f = load_source(o.file);
  auto t0 = resolve_term(f, o.term);
  auto strategy = parse_strategy(o.strategy);
  if (!strategy) throw InputError("unknown strategy " + o.strategy);
  auto b = budgets_of(o);
  auto v = classify_convergence(f.system, t0, b, *strategy);
  json res{{"term", t0.to_string()},
           {"strategy", to_string(*strategy)},
           {"verdict", to_string(v.kind)},
           {"witness", witness_json(v.witness)},
           {"note", v.note},
           {"budgets",
            {{"loop_states", b.loop_states},
             {"loop_nodes", b.loop_nodes},
             {"reach_expansions", b.reach_expansions},
             {"max_steps", b.max_steps},
             {"depth_bound", b.depth_bound},
             {"tol", b.tol}}},
           {"trace", trace_json(v.trace)}};
  if (v.limit) res["limit"] = v.limit->to_string();
  r.data["result"] = res;
  std::ostringstream s;
  s << verdict_label(v) << "\n";
  if (v.limit) s << "limit: " << v.limit->to_string() << "\n";
  if (auto* l = std::get_if<LoopWitness>(&v.witness)) {
    s << "loop of " << l->cycle.size() << " step(s) through " << l->start.to_string() << "\n";
  }
  if (!v.note.empty()) s << v.note << "\n";
  r.text = s.str();
  if (!o.out.empty()) write_text_file(o.out, r.data.dump(2) + "\n");
  check_expect(r, o.expect, to_string(v.kind));
}

void cmd_strong(const Options& o, Report& r) {
  auto f = load_source(o.file);
  auto t0 = resolve_term(f, o.term);
  auto p = strong_convergence_probe(f.system, t0, budgets_of(o));
  json res{{"term", t0.to_string()},
           {"indirect_verdict", to_string(p.indirect.kind)},
           {"indirect_witness", witness_json(p.indirect.witness)},
           {"root_recurrence", p.violation},
           {"graph_complete", p.graph_complete},
           {"agree", p.agree}};
  if (p.recurrence) res["recurrence"] = loop_json(*p.recurrence);
  if (p.min_position) res["min_position"] = p.min_position->to_string();
  r.data["result"] = res;
  std::ostringstream s;
  s << "indirected: " << verdict_label(p.indirect) << "\n"
    << "direct root recurrence: " << (p.violation ? "yes" : "no") << (p.graph_complete ? "" : " (graph truncated)")
    << "\nagree: " << (p.agree ? "yes" : "no") << "\n";
  r.text = s.str();
  check_expect(r, o.expect, p.agree ? "agree" : "disagree");
}

void cmd_xi(const Options& o, Report& r) {
  auto f = load_source(o.file);
  auto tr = load_trace(o.trace, f.system.sig);
  if (o.fp.empty() == o.kt.empty()) throw InputError("give exactly one of --fp POSITION or --kt TERM");
  auto b = budgets_of(o);
  auto s = o.fp.empty() ? PredicateSequence::kt(resolve_term(f, o.kt), b.reach_expansions)
                        : PredicateSequence::fp(Position::parse(o.fp), b.reach_expansions);
  auto x = xi_trace(f.system, tr, o.rule, s, b);
  json viol = json::array();
  for (const auto& v : x.violations) viol.push_back({{"index", v.index}, {"reason", v.reason}});
  json diam = json::array();
  for (const auto& d : x.diameters) diam.push_back(d.to_string());
  r.data["result"] = {{"violations", viol},     {"flips", x.flips},           {"evaluations", x.evaluations},
                      {"diameters", diam},      {"floor", x.floor.to_string()}, {"non_cauchy", x.non_cauchy}};
  std::ostringstream out;
  out << "flips: " << x.flips << ", violations: " << x.violations.size() << ", diameter floor "
      << x.floor.to_string() << (x.non_cauchy ? " (non-Cauchy)" : "") << "\n";
  for (const auto& v : x.violations) out << "  step " << v.index << ": " << v.reason << "\n";
  r.text = out.str();
  if (!x.violations.empty()) r.exit_code = kMismatch;
  emit_trace(o, r, x.trace);
}

void cmd_cutoff(const Options& o, Report& r) {
  auto f = load_source(o.file);
  auto tr = load_trace(o.trace, f.system.sig);
  if (!o.cut) throw InputError("cutoff needs --n");
  auto fill = fill_term(f, o.fill);
  auto c = cutoff_trace(f.system, tr, *o.cut, fill, o.depth_bound);
  r.data["result"] = {{"valid", c.valid()}, {"violations", c.violations}, {"stutters", c.stutters}};
  std::ostringstream out;
  out << (c.valid() ? "valid" : "invalid") << " cutoff trace, " << c.stutters << " stutter step(s)\n";
  for (const auto& v : c.violations) out << "  " << v << "\n";
  r.text = out.str();
  if (!c.valid()) r.exit_code = kMismatch;
  emit_trace(o, r, c.trace);
}

// Re-checks every witness in a saved analyze report against the system.
std::vector<std::string> replay_report(const Itrs& sys, const json& rep) {
  std::vector<std::string> problems;
  const json& res = rep.contains("result") ? rep.at("result") : rep;
  Trace tr;
  if (res.contains("trace")) {
    tr = trace_from_json(res.at("trace"), sys.sig);
    if (auto err = validate_trace(sys, tr)) problems.push_back("trace: " + *err);
  }
  if (!res.contains("witness")) return problems;
  const json& w = res.at("witness");
  auto kind = w.at("kind").get<std::string>();
  if (kind == "loop") {
    auto t0 = parse_term(res.at("term").get<std::string>(), &sys.sig);
    auto start = parse_term(w.at("start").get<std::string>(), &sys.sig);
    auto ends_at = [&](const Term& from, const json& script, const char* what) {
      try {
        if (replay(sys, from, script_from_json(script)) != start) problems.push_back(what);
      } catch (const StaleOccurrence& e) {
        problems.push_back(std::string(what) + ": " + e.what());
      }
    };
    ends_at(t0, w.at("prefix"), "loop prefix misses start");
    ends_at(start, w.at("cycle"), "loop does not close");
  } else if (kind == "limit_cycle") {
    auto flat = tr.flattened();
    auto i = w.at("first").get<std::size_t>(), j = w.at("second").get<std::size_t>();
    auto t = parse_term(w.at("term").get<std::string>(), &sys.sig);
    if (i >= j || j >= flat.size() || flat[i] != t || flat[j] != t) problems.push_back("limit cycle indices");
  } else if (kind == "non_member_limit") {
    auto limit = parse_term(w.at("limit").get<std::string>(), &sys.sig);
    if (is_member(sys.metric, limit).verdict != Membership::Verdict::NonMember) {
      problems.push_back("limit is not a non-member");
    }
  } else if (kind == "diameter_floor") {
    auto flat = tr.flattened();
    auto eps = w.at("eps_value").get<double>();
    for (const auto& s : w.at("samples")) {
      auto i = s.at(0).get<std::size_t>(), j = s.at(1).get<std::size_t>();
      if (i >= flat.size() || j >= flat.size() || distance(sys.metric, flat[i], flat[j]).value() < eps - 1e-12) {
        problems.push_back("diameter sample below floor");
        break;
      }
    }
  }
  return problems;
}

void cmd_replay(const Options& o, Report& r) {
  auto f = load_source(o.file);
  std::vector<std::string> problems;
  if (!o.report.empty()) {
    std::ifstream in(o.report);
    if (!in) throw InputError("cannot open " + o.report);
    json rep;
    try {
      rep = json::parse(in);
    } catch (const json::exception& e) {
      throw InputError(std::string("malformed report: ") + e.what());
    }
    problems = replay_report(f.system, rep);
  } else if (!o.trace.empty()) {
    if (auto err = validate_trace(f.system, load_trace(o.trace, f.system.sig))) problems.push_back(*err);
  } else {
    auto t0 = resolve_term(f, o.term);
    auto end = replay(f.system, t0, parse_script(o.script));
    r.data["result"]["final"] = end.to_string();
    r.text = end.to_string() + "\n";
  }
  r.data["result"]["ok"] = problems.empty();
  r.data["result"]["problems"] = problems;
  for (const auto& p : problems) r.text += "FAIL " + p + "\n";
  if (problems.empty()) {
    r.text += "replay ok\n";
  } else {
    r.exit_code = kMismatch;
  }
}

void cmd_corpus(const Options& o, Report& r) {
  if (!o.export_dir.empty()) {
    std::filesystem::create_directories(o.export_dir);
    for (const auto& n : fixture_names()) {
      auto fx = fixture(n);
      write_text_file((std::filesystem::path(o.export_dir) / (n + ".itrs")).string(), print_itrs(fx.file));
    }
  }
  auto b = corpus_budgets();
  if (o.budget) b.loop_states = b.reach_expansions = *o.budget;
  b.tol = o.tol;
  std::vector<FixtureReport> reports;
  if (o.names.empty()) {
    reports = run_corpus(b);
  } else {
    for (const auto& n : o.names) {
      if (!is_fixture(n)) throw InputError("unknown fixture " + n);
      reports.push_back(run_fixture(n, b));
    }
  }
  json a = json::array();
  std::ostringstream s;
  for (const auto& rep : reports) {
    json checks = json::array();
    for (const auto& c : rep.checks) checks.push_back({{"label", c.label}, {"passed", c.passed}, {"detail", c.detail}});
    a.push_back({{"name", rep.name},
                 {"expected", rep.expected},
                 {"observed", rep.observed},
                 {"passed", rep.passed()},
                 {"checks", checks}});
    s << (rep.passed() ? "PASS " : "FAIL ") << rep.name << ": " << rep.observed << "\n";
    for (const auto& c : rep.checks) {
      if (!c.passed) s << "  failed " << c.label << ": " << c.detail << "\n";
    }
    if (!rep.passed()) r.exit_code = kMismatch;
  }
  r.data["result"] = {{"fixtures", a}};
  r.text = s.str();
}

}  // namespace

Report run_command(const std::vector<std::string>& args) {
  Report r;
  Options o;
  CLI::App app{"Infinitary term rewriting toolkit", "itrs"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", o.json, "Print a machine-readable report");
  app.add_option("--tol", o.tol, "Tolerance for non-dyadic distances")->check(CLI::PositiveNumber);
  app.add_option("--budget", o.budget, "State and reachability budget");
  app.add_option("--depth-guard", o.depth_guard, "Depth limit for epsilon-position enumeration");
  app.add_option("--depth-bound", o.depth_bound, "Depth bound for redex search");
  app.add_option("--steps", o.steps, "Maximum steps per segment");

  auto file_arg = [&](CLI::App* sc) { sc->add_option("file", o.file, "System file or fixture name")->required(); };
  auto metric_opt = [&](CLI::App* sc) {
    sc->add_option("--metric,--file", o.metric, "System file, fixture name, or infty/id");
  };
  auto term_opt = [&](CLI::App* sc, bool required) {
    auto* opt = sc->add_option("--term,-t", o.term, "Term text or the name of a term in the file");
    if (required) opt->required();
  };
  auto expect_opt = [&](CLI::App* sc) { sc->add_option("--expect", o.expect, "Fail with exit 1 unless matched"); };
  auto out_opt = [&](CLI::App* sc) { sc->add_option("--out,-o", o.out, "Write the primary output to a file"); };

  auto* check = app.add_subcommand("check", "Parse and validate a system file");
  file_arg(check);
  out_opt(check);

  auto* dist = app.add_subcommand("distance", "Distance between two terms");
  dist->add_option("terms", o.terms)->expected(2)->required();
  metric_opt(dist);

  auto* member = app.add_subcommand("member", "Membership in the metric completion");
  metric_opt(member);
  term_opt(member, true);
  expect_opt(member);

  auto* ep = app.add_subcommand("epos", "Positions of weight at least eps");
  metric_opt(ep);
  term_opt(ep, true);
  ep->add_option("--eps", o.eps)->required();
  expect_opt(ep);

  auto* vd = app.add_subcommand("vdepth", "Metric depth of a variable");
  metric_opt(vd);
  term_opt(vd, true);
  vd->add_option("--var", o.var)->required();
  vd->add_option("--at", o.at, "Evaluate at this argument");

  auto* cls = app.add_subcommand("classify", "Rule classification report");
  file_arg(cls);

  auto* uni = app.add_subcommand("union", "Disjoint union of two systems");
  uni->add_option("systems", o.names)->expected(2)->required();
  out_opt(uni);

  auto* ind = app.add_subcommand("indirect", "Indirected version of a system");
  file_arg(ind);
  out_opt(ind);

  auto* lay = app.add_subcommand("layers", "Principal positions, rank and cutoff");
  metric_opt(lay);
  term_opt(lay, true);
  lay->add_option("--cutoff,-n", o.cut, "Layer for the cutoff");
  lay->add_option("--fill", o.fill, "Replacement term for the cutoff (default: the variable u)");

  auto* sim = app.add_subcommand("simulate", "Run a strategy or a script and print the trace");
  file_arg(sim);
  term_opt(sim, true);
  sim->add_option("--strategy", o.strategy, "lo (leftmost-outermost) or li (leftmost-innermost)");
  sim->add_option("--script", o.script, "Steps as 'pos:rule, pos:rule'");
  out_opt(sim);

  auto* an = app.add_subcommand("analyze", "Convergence verdict with witness");
  file_arg(an);
  term_opt(an, true);
  an->add_option("--strategy", o.strategy, "lo (leftmost-outermost) or li (leftmost-innermost)");
  expect_opt(an);
  out_opt(an);

  auto* st = app.add_subcommand("strong", "Strong convergence probe via indirection");
  file_arg(st);
  term_opt(st, true);
  expect_opt(st);

  auto* xi = app.add_subcommand("xi", "Top-layer fill simulation of a union trace");
  file_arg(xi);
  xi->add_option("--trace", o.trace, "Trace file, or exnonlin/rearrange")->required();
  xi->add_option("--rule", o.rule, "Root rule of the union trace")->required();
  xi->add_option("--fp", o.fp, "Predicate sequence f_p for this position");
  xi->add_option("--kt", o.kt, "Predicate sequence k_t for this term");
  out_opt(xi);

  auto* cut = app.add_subcommand("cutoff", "Cut a union trace off at a layer");
  file_arg(cut);
  cut->add_option("--trace", o.trace, "Trace file, or exnonlin/rearrange")->required();
  cut->add_option("--n,-n", o.cut, "Number of layers to keep")->required();
  cut->add_option("--fill", o.fill, "Replacement term (default: the variable u)");
  out_opt(cut);

  auto* rep = app.add_subcommand("replay", "Re-check a trace, a script or a saved report");
  file_arg(rep);
  auto* rep_trace = rep->add_option("--trace", o.trace, "Trace file to re-validate");
  auto* rep_report = rep->add_option("--report", o.report, "JSON report written by analyze");
  auto* rep_script = rep->add_option("--script", o.script, "Steps as 'pos:rule, pos:rule', applied to --term");
  term_opt(rep, false);
  rep_trace->excludes(rep_report)->excludes(rep_script);
  rep_report->excludes(rep_script);

  auto* corpus = app.add_subcommand("corpus", "Run the example fixtures");
  corpus->add_option("names", o.names, "Fixture names (default: all)");
  corpus->add_option("--export", o.export_dir, "Also write each fixture as DIR/NAME.itrs");

  std::string echo;
  for (const auto& a : args) echo += (echo.empty() ? "" : " ") + a;
  r.data["command"] = echo;
  r.data["argv"] = args;

  if (!args.empty() && !args.front().starts_with("-") && !app.get_subcommand_no_throw(args.front())) {
    r.exit_code = kInputError;
    r.error = "unknown command '" + args.front() + "'";
    r.data["error"] = r.error;
    r.text = "error: " + r.error + "\n";
    return r;
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    r.text = app.help();
    return r;
  } catch (const CLI::ParseError& e) {
    r.exit_code = kInputError;
    r.error = e.what();
    r.data["error"] = r.error;
    r.text = "error: " + r.error + "\n";
    return r;
  }
  r.as_json = o.json;

  auto* sub = app.get_subcommands().front();
  r.data["subcommand"] = sub->get_name();
  static const std::map<std::string, void (*)(const Options&, Report&)> table = {
      {"check", cmd_check},     {"distance", cmd_distance}, {"member", cmd_member},     {"epos", cmd_epos},
      {"vdepth", cmd_vdepth},   {"classify", cmd_classify}, {"union", cmd_union},       {"indirect", cmd_indirect},
      {"layers", cmd_layers},   {"simulate", cmd_simulate}, {"analyze", cmd_analyze},   {"strong", cmd_strong},
      {"xi", cmd_xi},           {"cutoff", cmd_cutoff},     {"replay", cmd_replay},     {"corpus", cmd_corpus}};

  auto start = std::chrono::steady_clock::now();
  try {
    table.at(sub->get_name())(o, r);
  } catch (const Error& e) {
    r.exit_code = kInputError;
    r.error = e.what();
    if (auto* pe = dynamic_cast<const ParseError*>(&e)) {
      r.data["error_line"] = pe->line();
      r.data["error_column"] = pe->column();
    }
  } catch (const std::exception& e) {
    r.exit_code = kInputError;
    r.error = e.what();
  }
  if (!r.error.empty()) {
    r.data["error"] = r.error;
    r.text = "error: " + r.error + "\n";
  }
  r.data["exit_code"] = r.exit_code;
  r.data["timing_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace itrs::cli
