#include "itrs/metric.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <sstream>

#include "graph_util.hpp"

namespace itrs {

// ---------------------------------------------------------------------------
// Rationals

Rational parse_rational(std::string_view text) {
  std::string s(text);
  auto bad = [&]() -> Error { return Error("malformed rational '" + s + "'"); };
  if (s.empty()) throw bad();
  try {
    if (auto slash = s.find('/'); slash != std::string::npos) {
      std::size_t used = 0;
      auto num = std::stoll(s.substr(0, slash), &used);
      if (used != slash) throw bad();
      auto den_text = s.substr(slash + 1);
      auto den = std::stoll(den_text, &used);
      if (used != den_text.size() || den == 0) throw bad();
      return Rational(num, den);
    }
    if (auto dot = s.find('.'); dot != std::string::npos) {
      auto whole = s.substr(0, dot);
      auto frac = s.substr(dot + 1);
      if (frac.empty() || frac.size() > 15) throw bad();
      for (char c : whole + frac) {
        if (!std::isdigit(static_cast<unsigned char>(c))) throw bad();
      }
      std::int64_t den = 1;
      for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
      std::int64_t num = (whole.empty() ? 0 : std::stoll(whole)) * den + std::stoll(frac);
      return Rational(num, den);
    }
    std::size_t used = 0;
    auto v = std::stoll(s, &used);
    if (used != s.size()) throw bad();
    return Rational(v);
  } catch (const std::logic_error&) {
    throw bad();
  }
}

std::string rational_to_string(const Rational& q) {
  if (q.denominator() == 1) return std::to_string(q.numerator());
  return std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

namespace {

double to_double(const Rational& q) {
  return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator());
}

// Products that stay well inside int64 are folded; larger ones are kept apart.
bool small_enough(const Rational& a, const Rational& b) {
  constexpr std::int64_t limit = std::int64_t{1} << 30;
  auto fits = [](const Rational& q) {
    return std::llabs(q.numerator()) < limit && q.denominator() < limit;
  };
  return fits(a) && fits(b);
}

std::optional<int> log2_exact(const Rational& q) {
  auto is_pow2 = [](std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; };
  if (!is_pow2(q.numerator()) || !is_pow2(q.denominator())) return std::nullopt;
  int up = 0, down = 0;
  for (auto v = q.numerator(); v > 1; v >>= 1) ++up;
  for (auto v = q.denominator(); v > 1; v >>= 1) ++down;
  return up - down;
}

}  // namespace

// ---------------------------------------------------------------------------
// Component

Component Component::scale(Rational a) {
  Component c;
  c.kind_ = Kind::Scale;
  c.param_ = a;
  return c;
}

Component Component::power(Rational k) {
  Component c;
  c.kind_ = Kind::Pow;
  c.param_ = k;
  return c;
}

Component Component::cap(Rational bound) {
  Component c;
  c.kind_ = Kind::Cap;
  c.param_ = bound;
  return c;
}

Component Component::compose(std::vector<Component> parts) {
  Component c;
  c.kind_ = Kind::Compose;
  c.parts_ = std::move(parts);
  return c;
}

double Component::operator()(double x) const {
  switch (kind_) {
    case Kind::Scale:
      return std::min(1.0, to_double(param_) * x);
    case Kind::Pow:
      return x <= 0.0 ? 0.0 : std::pow(x, to_double(param_));
    case Kind::Cap:
      return std::min(x, to_double(param_));
    case Kind::Compose:
      for (auto it = parts_.rbegin(); it != parts_.rend(); ++it) x = (*it)(x);
      return x;
  }
  return x;
}

Component Component::simplified() const {
  std::vector<Component> flat;
  std::function<void(const Component&)> flatten = [&](const Component& c) {
    if (c.kind_ == Kind::Compose) {
      for (const auto& p : c.parts_) flatten(p);
      return;
    }
    if ((c.kind_ == Kind::Scale || c.kind_ == Kind::Pow) && c.param_ == Rational(1)) return;
    if (c.kind_ == Kind::Cap && c.param_ >= Rational(1)) return;
    flat.push_back(c);
  };
  flatten(*this);

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i + 1 < flat.size(); ++i) {
      auto& outer = flat[i];
      const auto& inner = flat[i + 1];
      if (outer.kind_ != inner.kind_ || !small_enough(outer.param_, inner.param_)) continue;
      bool merged = false;
      switch (outer.kind_) {
        case Kind::Scale:
          // min(1, a·min(1, b·x)) = min(1, ab·x) unless one side saturates
          // and the other shrinks.
          if ((outer.param_ <= Rational(1) && inner.param_ <= Rational(1)) || (outer.param_ >= Rational(1) && inner.param_ >= Rational(1))) {
            outer.param_ *= inner.param_;
            merged = true;
          }
          break;
        case Kind::Pow:
          outer.param_ *= inner.param_;
          merged = true;
          break;
        case Kind::Cap:
          outer.param_ = std::min(outer.param_, inner.param_);
          merged = true;
          break;
        case Kind::Compose:
          break;
      }
      if (merged) {
        flat.erase(flat.begin() + static_cast<long>(i) + 1);
        if ((outer.kind_ == Kind::Scale || outer.kind_ == Kind::Pow) && outer.param_ == Rational(1)) {
          flat.erase(flat.begin() + static_cast<long>(i));
        }
        changed = true;
        break;
      }
    }
  }
  if (flat.size() == 1) return flat.front();
  return compose(std::move(flat));
}

bool Component::is_identity() const {
  auto s = simplified();
  return s.kind_ == Kind::Compose && s.parts_.empty();
}

std::optional<int> Component::dyadic_exponent() const {
  auto s = simplified();
  if (s.kind_ == Kind::Compose && s.parts_.empty()) return 0;
  if (s.kind_ == Kind::Scale) return log2_exact(s.param_);
  return std::nullopt;
}

std::optional<std::string> Component::violation() const {
  switch (kind_) {
    case Kind::Scale:
      if (param_ <= Rational(0)) return "scale factor must be positive, got " + rational_to_string(param_);
      break;
    case Kind::Pow:
      if (param_ <= Rational(0)) return "exponent must be positive, got " + rational_to_string(param_);
      break;
    case Kind::Cap:
      if (param_ <= Rational(0) || param_ > Rational(1)) {
        return "cap bound must lie in (0,1], got " + rational_to_string(param_);
      }
      break;
    case Kind::Compose:
      for (const auto& p : parts_) {
        if (auto v = p.violation()) return v;
      }
      break;
  }
  return std::nullopt;
}

std::string Component::to_string() const {
  switch (kind_) {
    case Kind::Scale:
      return "scale(" + rational_to_string(param_) + ")";
    case Kind::Pow:
      return "pow(" + rational_to_string(param_) + ")";
    case Kind::Cap:
      return "cap(" + rational_to_string(param_) + ")";
    case Kind::Compose: {
      if (parts_.empty()) return "id";
      std::string out = "comp(";
      for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i) out += ",";
        out += parts_[i].to_string();
      }
      return out + ")";
    }
  }
  return "id";
}

namespace {

class ComponentParser {
 public:
  explicit ComponentParser(std::string_view text) : text_(text) {}

  Component run() {
    auto c = parse();
    skip_ws();
    if (pos_ != text_.size()) fail();
    return c;
  }

 private:
  [[noreturn]] void fail() const {
    throw Error("malformed component '" + std::string(text_) + "'");
  }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  std::string word() {
    skip_ws();
    auto start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  Rational number() {
    skip_ws();
    auto start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '/' || text_[pos_] == '.' || text_[pos_] == '-')) {
      ++pos_;
    }
    return parse_rational(text_.substr(start, pos_ - start));
  }

  Component parse() {
    auto w = word();
    if (w == "lazy") return Component::halving();
    if (w == "strict" || w == "id") return Component::identity();
    if (!eat('(')) fail();
    Component out;
    if (w == "scale") {
      out = Component::scale(number());
    } else if (w == "pow") {
      out = Component::power(number());
    } else if (w == "cap") {
      out = Component::cap(number());
    } else if (w == "comp" || w == "compose") {
      std::vector<Component> parts;
      if (!eat(')')) {
        do {
          parts.push_back(parse());
        } while (eat(','));
        if (!eat(')')) fail();
      }
      return Component::compose(std::move(parts));
    } else {
      fail();
    }
    if (!eat(')')) fail();
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Component parse_component(std::string_view text) { return ComponentParser(text).run(); }

// ---------------------------------------------------------------------------
// TermMetric

void TermMetric::set(const std::string& symbol, std::vector<Component> components) {
  comps_[symbol] = std::move(components);
}

const std::vector<Component>& TermMetric::components(const std::string& symbol) const {
  auto it = comps_.find(symbol);
  if (it == comps_.end()) throw SignatureMismatch("metric has no entry for symbol '" + symbol + "'");
  return it->second;
}

const Component& TermMetric::component(const std::string& symbol, std::size_t arg) const {
  const auto& cs = components(symbol);
  if (arg >= cs.size()) {
    throw SignatureMismatch("symbol '" + symbol + "' has arity " + std::to_string(cs.size()) +
                            ", argument " + std::to_string(arg + 1) + " requested");
  }
  return cs[arg];
}

bool TermMetric::is_granular() const {
  for (const auto& [_, cs] : comps_) {
    for (const auto& c : cs) {
      auto k = c.dyadic_exponent();
      if (!k || (*k != 0 && *k != -1)) return false;
    }
  }
  return true;
}

bool TermMetric::is_dyadic() const {
  for (const auto& [_, cs] : comps_) {
    for (const auto& c : cs) {
      if (!c.dyadic_exponent()) return false;
    }
  }
  return true;
}

int TermMetric::exponent(const std::string& symbol, std::size_t arg) const {
  auto k = component(symbol, arg).dyadic_exponent();
  if (!k) throw Error("component of '" + symbol + "' is not a power-of-two scale");
  return *k;
}

std::vector<MetricViolation> validate_metric(const TermMetric& m) {
  std::vector<MetricViolation> out;
  for (const auto& [symbol, cs] : m.table()) {
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (auto why = cs[i].violation()) out.push_back({symbol, i + 1, *why});
    }
  }
  return out;
}

TermMetric metric_infty(const Signature& sig) {
  TermMetric m;
  for (const auto& [f, n] : sig.symbols()) m.set(f, std::vector<Component>(n, Component::halving()));
  return m;
}

TermMetric metric_id(const Signature& sig) {
  TermMetric m;
  for (const auto& [f, n] : sig.symbols()) m.set(f, std::vector<Component>(n, Component::identity()));
  return m;
}

TermMetric metric_granular(const Signature& sig,
                           const std::map<std::string, std::vector<bool>>& lazy) {
  TermMetric m;
  for (const auto& [f, n] : sig.symbols()) {
    auto it = lazy.find(f);
    if (it == lazy.end() && n > 0) throw Error("no laziness flags given for '" + f + "'");
    std::vector<Component> cs;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (i >= it->second.size()) throw Error("too few laziness flags for '" + f + "'");
      cs.push_back(it->second[i] ? Component::halving() : Component::identity());
    }
    m.set(f, std::move(cs));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dist

std::optional<std::int64_t> Dist::exponent() const {
  if (!exact_ || exponent_ < 0) return std::nullopt;
  return exponent_;
}

double Dist::value() const {
  if (!exact_) return approx_;
  if (exponent_ < 0) return 0.0;
  return std::ldexp(1.0, -static_cast<int>(std::min<std::int64_t>(exponent_, 100000)));
}

std::string Dist::to_string() const {
  if (exact_) {
    if (exponent_ < 0) return "0";
    if (exponent_ == 0) return "1";
    if (exponent_ < 63) return "1/" + std::to_string(std::uint64_t{1} << exponent_);
    return "2^-" + std::to_string(exponent_);
  }
  std::ostringstream os;
  os.precision(12);
  os << approx_;
  return os.str();
}

bool operator==(const Dist& a, const Dist& b) {
  if (a.exact_ && b.exact_) return a.exponent_ == b.exponent_;
  return a.value() == b.value();
}

bool operator<(const Dist& a, const Dist& b) {
  if (a.exact_ && b.exact_) {
    if (a.exponent_ == b.exponent_) return false;
    if (a.exponent_ < 0) return true;
    if (b.exponent_ < 0) return false;
    return a.exponent_ > b.exponent_;
  }
  return a.value() < b.value();
}

// ---------------------------------------------------------------------------
// Distance

namespace {

void check_symbols(const TermMetric& m, const Term& t) {
  for (const auto& nd : t.nodes()) {
    if (nd.is_var || is_reserved_name(nd.label)) continue;
    const auto& cs = m.components(nd.label);
    if (cs.size() != nd.kids.size()) {
      throw SignatureMismatch("symbol '" + nd.label + "' used with " + std::to_string(nd.kids.size()) +
                              " arguments but the metric declares " + std::to_string(cs.size()));
    }
  }
}

struct ProductEdge {
  std::uint32_t target;
  std::string symbol;
  std::size_t arg;
};

struct ProductGraph {
  std::vector<bool> clash;
  std::vector<std::vector<ProductEdge>> edges;
};

// Pairs of distinct nodes of one sealed graph reachable from (a, b).
ProductGraph build_product(const Term& g, std::uint32_t a, std::uint32_t b) {
  ProductGraph pg;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> ids;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs{{a, b}};
  ids[{a, b}] = 0;
  for (std::size_t head = 0; head < pairs.size(); ++head) {
    auto [x, y] = pairs[head];
    const auto& nx = g.node(x);
    const auto& ny = g.node(y);
    bool clash = nx.is_var || ny.is_var || nx.label != ny.label || nx.kids.size() != ny.kids.size();
    pg.clash.push_back(clash);
    pg.edges.emplace_back();
    if (clash) continue;
    for (std::size_t i = 0; i < nx.kids.size(); ++i) {
      auto kx = nx.kids[i], ky = ny.kids[i];
      if (kx == ky) continue;
      auto [it, fresh] = ids.emplace(std::make_pair(kx, ky), static_cast<std::uint32_t>(pairs.size()));
      if (fresh) pairs.push_back({kx, ky});
      pg.edges[head].push_back({it->second, nx.label, i});
    }
  }
  return pg;
}

Dist dyadic_distance(const TermMetric& m, const ProductGraph& pg) {
  constexpr auto inf = std::numeric_limits<std::int64_t>::max();
  const auto n = pg.clash.size();
  std::vector<std::vector<std::pair<std::uint32_t, int>>> preds(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    for (const auto& e : pg.edges[v]) preds[e.target].push_back({v, m.exponent(e.symbol, e.arg)});
  }
  std::vector<std::int64_t> e(n, inf);
  std::deque<std::uint32_t> work;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (pg.clash[v]) {
      e[v] = 0;
      work.push_back(v);
    }
  }
  while (!work.empty()) {
    auto v = work.front();
    work.pop_front();
    for (auto [p, k] : preds[v]) {
      auto cand = std::max<std::int64_t>(0, e[v] - k);
      if (cand < e[p]) {
        e[p] = cand;
        work.push_back(p);
      }
    }
  }
  return e[0] == inf ? Dist::zero() : Dist::dyadic(e[0]);
}

Dist general_distance(const TermMetric& m, const ProductGraph& pg, double tol) {
  const auto n = pg.clash.size();
  std::vector<double> d(n, 0.0);
  auto update = [&](std::uint32_t v) {
    if (pg.clash[v]) return 1.0;
    double best = 0.0;
    for (const auto& e : pg.edges[v]) best = std::max(best, m.component(e.symbol, e.arg)(d[e.target]));
    return best;
  };
  detail::Adjacency adj(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    for (const auto& e : pg.edges[v]) adj[v].push_back(e.target);
  }
  auto scc = detail::strongly_connected(adj);
  bool acyclic = std::none_of(scc.cyclic.begin(), scc.cyclic.end(), [](bool c) { return c; });
  // Members are listed sinks first, so one sweep settles an acyclic graph.
  for (std::size_t sweep = 0; sweep < kDefaultIterations; ++sweep) {
    double change = 0.0;
    for (const auto& comp : scc.members) {
      for (auto v : comp) {
        double next = update(v);
        change = std::max(change, std::abs(next - d[v]));
        d[v] = next;
      }
    }
    if (acyclic || change < tol) break;
  }
  return Dist::approx(d[0]);
}

}  // namespace

Dist distance(const TermMetric& m, const Term& t, const Term& u, double tol) {
  check_symbols(m, t);
  check_symbols(m, u);
  if (t == u) return m.is_dyadic() ? Dist::zero() : Dist::approx(0.0);
  TermGraph g;
  auto a = g.add_term(t);
  auto b = g.add_term(u);
  auto joint = g.seal(g.add_app("%pair", {a, b}));
  auto pg = build_product(joint, joint.root().kids[0], joint.root().kids[1]);
  if (m.is_dyadic()) return dyadic_distance(m, pg);
  return general_distance(m, pg, tol);
}

Component position_umm(const TermMetric& m, const Term& t, const Position& p) {
  std::vector<Component> parts;
  std::uint32_t cur = 0;
  for (auto step : p.steps()) {
    const auto& nd = t.node(cur);
    if (nd.is_var || step > nd.kids.size()) {
      throw Error("position " + p.to_string() + " is not a position of " + t.to_string());
    }
    parts.push_back(m.component(nd.label, step - 1));
    cur = nd.kids[step - 1];
  }
  return Component::compose(std::move(parts));
}

// ---------------------------------------------------------------------------
// Positions above a threshold

GuardExceeded::GuardExceeded(Position where)
    : Error("position " + where.to_string() + " exceeds the depth guard with weight above the threshold"),
      where_(std::move(where)) {}

std::set<Position> epos(const TermMetric& m, const Term& t, double eps, std::size_t depth_guard) {
  check_symbols(m, t);
  std::set<Position> out;
  struct Frame {
    std::uint32_t node;
    Position pos;
    std::vector<const Component*> chain;  // outermost first
  };
  std::vector<Frame> stack{{0, Position{}, {}}};
  while (!stack.empty()) {
    auto f = std::move(stack.back());
    stack.pop_back();
    double v = 1.0;
    for (auto it = f.chain.rbegin(); it != f.chain.rend(); ++it) v = (**it)(v);
    if (v < eps) continue;
    if (f.pos.length() > depth_guard) throw GuardExceeded(f.pos);
    const auto& nd = t.node(f.node);
    for (std::size_t i = 0; i < nd.kids.size(); ++i) {
      auto chain = f.chain;
      chain.push_back(&m.component(nd.label, i));
      stack.push_back({nd.kids[i], f.pos.child(static_cast<std::uint32_t>(i + 1)), std::move(chain)});
    }
    out.insert(std::move(f.pos));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Membership

std::string to_string(Membership::Verdict v) {
  switch (v) {
    case Membership::Verdict::Member:
      return "member";
    case Membership::Verdict::NonMember:
      return "non_member";
    case Membership::Verdict::Unknown:
      return "unknown";
  }
  return "unknown";
}

namespace {

struct TermEdge {
  std::uint32_t from;
  std::uint32_t to;
  std::size_t arg;  // zero-based
};

Membership witness(const Term& t, const TermMetric& m, const std::vector<TermEdge>& cycle, bool exact) {
  Membership out;
  out.verdict = Membership::Verdict::NonMember;
  out.exact = exact;
  auto paths = detail::shortest_positions(t);
  out.to_cycle = *paths[cycle.front().from];
  std::vector<std::uint32_t> steps;
  std::vector<Component> parts;
  for (const auto& e : cycle) {
    steps.push_back(static_cast<std::uint32_t>(e.arg + 1));
    parts.push_back(m.component(t.node(e.from).label, e.arg));
  }
  out.cycle = Position(std::move(steps));
  auto loop = Component::compose(std::move(parts));
  double v = 1.0;
  for (int i = 0; i < 1000; ++i) {
    double next = loop(v);
    if (next == v) break;
    v = next;
  }
  out.residual = v;
  return out;
}

Membership dyadic_membership(const TermMetric& m, const Term& t) {
  // A cycle is non-contracting iff its exponents sum to ≥ 0. Weighting an
  // edge with (n+1)(-k) - 1 turns exactly those cycles negative.
  const auto n = static_cast<std::int64_t>(t.size());
  std::vector<TermEdge> edges;
  std::vector<std::int64_t> weight;
  for (std::uint32_t v = 0; v < t.size(); ++v) {
    const auto& nd = t.node(v);
    for (std::size_t i = 0; i < nd.kids.size(); ++i) {
      edges.push_back({v, nd.kids[i], i});
      weight.push_back((n + 1) * -static_cast<std::int64_t>(m.exponent(nd.label, i)) - 1);
    }
  }
  std::vector<std::int64_t> dist(t.size(), 0);
  std::vector<std::int64_t> pred(t.size(), -1);
  std::int64_t last = -1;
  for (std::int64_t round = 0; round <= n; ++round) {
    last = -1;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto cand = dist[edges[e].from] + weight[e];
      if (cand < dist[edges[e].to]) {
        dist[edges[e].to] = cand;
        pred[edges[e].to] = static_cast<std::int64_t>(e);
        last = edges[e].to;
      }
    }
    if (last < 0) return {};
  }
  if (last < 0) return {};
  auto v = static_cast<std::uint32_t>(last);
  for (std::int64_t i = 0; i < n; ++i) v = edges[static_cast<std::size_t>(pred[v])].from;
  std::vector<TermEdge> cycle;
  auto cur = v;
  do {
    const auto& e = edges[static_cast<std::size_t>(pred[cur])];
    cycle.push_back(e);
    cur = e.from;
  } while (cur != v);
  std::reverse(cycle.begin(), cycle.end());
  return witness(t, m, cycle, true);
}

Membership general_membership(const TermMetric& m, const Term& t, double tol, std::size_t max_iterations) {
  auto scc = detail::strongly_connected(detail::term_adjacency(t));
  Membership result;
  for (std::size_t c = 0; c < scc.members.size(); ++c) {
    if (!scc.cyclic[c]) continue;
    const auto& members = scc.members[c];
    // w(v) bounds the weight of every in-component path of the current
    // length starting at v; it is non-increasing in the length.
    std::map<std::uint32_t, double> w;
    for (auto v : members) w[v] = 1.0;
    bool settled = false;
    for (std::size_t it = 0; it < max_iterations && !settled; ++it) {
      std::map<std::uint32_t, double> next;
      double change = 0.0, top = 0.0;
      for (auto v : members) {
        const auto& nd = t.node(v);
        double best = 0.0;
        for (std::size_t i = 0; i < nd.kids.size(); ++i) {
          if (scc.id[nd.kids[i]] != static_cast<std::int64_t>(c)) continue;
          best = std::max(best, m.component(nd.label, i)(w[nd.kids[i]]));
        }
        next[v] = best;
        change = std::max(change, std::abs(best - w[v]));
        top = std::max(top, best);
      }
      w = std::move(next);
      if (top < tol) {
        settled = true;
      } else if (change < tol) {
        // Follow maximising edges to a cycle that keeps the fixed point.
        auto start = std::max_element(w.begin(), w.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
        std::map<std::uint32_t, std::size_t> seen;
        std::vector<TermEdge> walk;
        auto v = start;
        while (!seen.count(v)) {
          seen[v] = walk.size();
          const auto& nd = t.node(v);
          std::size_t arg = 0;
          double best = -1.0;
          for (std::size_t i = 0; i < nd.kids.size(); ++i) {
            if (scc.id[nd.kids[i]] != static_cast<std::int64_t>(c)) continue;
            double val = m.component(nd.label, i)(w[nd.kids[i]]);
            if (val > best) {
              best = val;
              arg = i;
            }
          }
          walk.push_back({v, nd.kids[arg], arg});
          v = nd.kids[arg];
        }
        std::vector<TermEdge> cycle(walk.begin() + static_cast<long>(seen[v]), walk.end());
        return witness(t, m, cycle, false);
      }
    }
    if (!settled) {
      result.verdict = Membership::Verdict::Unknown;
      result.exact = false;
      double top = 0.0;
      for (auto& [_, val] : w) top = std::max(top, val);
      result.residual = std::max(result.residual, top);
    }
  }
  if (result.verdict == Membership::Verdict::Member) result.exact = false;
  return result;
}

}  // namespace

Membership is_member(const TermMetric& m, const Term& t, double tol, std::size_t max_iterations) {
  check_symbols(m, t);
  if (t.is_finite()) return {};
  if (m.is_dyadic()) return dyadic_membership(m, t);
  return general_membership(m, t, tol, max_iterations);
}

// ---------------------------------------------------------------------------
// Variable depth

VarDepth::VarDepth(std::vector<Component> branches, std::optional<std::int64_t> lazy_edges)
    : branches_(std::move(branches)), lazy_edges_(lazy_edges) {}

double VarDepth::operator()(double y) const {
  if (lazy_edges_) return std::ldexp(y, -static_cast<int>(*lazy_edges_));
  double out = 0.0;
  for (const auto& b : branches_) out = std::max(out, b(y));
  return out;
}

std::string VarDepth::to_string() const {
  if (lazy_edges_) return "y*2^-" + std::to_string(*lazy_edges_);
  if (branches_.empty()) return "0";
  std::string out = "max(";
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    if (i) out += ",";
    out += branches_[i].simplified().to_string();
  }
  return out + ")";
}

VarDepth vdepth(const TermMetric& m, const Term& t, const std::string& x) {
  check_symbols(m, t);
  if (!t.variables().count(x)) return VarDepth({});
  std::optional<std::int64_t> lazy;
  if (m.is_granular()) {
    // 0-1 breadth-first search for the least number of halving edges.
    std::vector<std::int64_t> best(t.size(), std::numeric_limits<std::int64_t>::max());
    std::deque<std::uint32_t> dq{0};
    best[0] = 0;
    while (!dq.empty()) {
      auto v = dq.front();
      dq.pop_front();
      const auto& nd = t.node(v);
      for (std::size_t i = 0; i < nd.kids.size(); ++i) {
        auto w = m.exponent(nd.label, i) == 0 ? 0 : 1;
        auto k = nd.kids[i];
        if (best[v] + w < best[k]) {
          best[k] = best[v] + w;
          if (w == 0) {
            dq.push_front(k);
          } else {
            dq.push_back(k);
          }
        }
      }
    }
    for (std::uint32_t v = 0; v < t.size(); ++v) {
      if (t.node(v).is_var && t.node(v).label == x) lazy = best[v];
    }
  }
  if (!t.is_finite()) {
    if (!lazy) throw Error("variable depth of a cyclic term needs a granular metric");
    return VarDepth({}, lazy);
  }
  std::vector<Component> branches;
  std::function<void(std::uint32_t, std::vector<Component>&)> walk = [&](std::uint32_t v,
                                                                         std::vector<Component>& chain) {
    const auto& nd = t.node(v);
    if (nd.is_var) {
      if (nd.label == x) branches.push_back(Component::compose(chain));
      return;
    }
    for (std::size_t i = 0; i < nd.kids.size(); ++i) {
      chain.push_back(m.component(nd.label, i));
      walk(nd.kids[i], chain);
      chain.pop_back();
    }
  };
  std::vector<Component> chain;
  walk(0, chain);
  return VarDepth(std::move(branches), lazy);
}

DistanceComparison d_infty_leq_check(const TermMetric& m, const Term& t, const Term& u) {
  if (!m.is_granular()) throw Error("d_infty_leq_check needs a granular metric");
  TermMetric infty;
  for (const auto& [f, cs] : m.table()) infty.set(f, std::vector<Component>(cs.size(), Component::halving()));
  DistanceComparison out{distance(infty, t, u), distance(m, t, u), false};
  out.holds = out.d_infty <= out.d_m;
  return out;
}

}  // namespace itrs
