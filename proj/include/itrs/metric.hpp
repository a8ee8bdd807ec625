#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "itrs/term.hpp"

namespace itrs {

using Rational = boost::rational<std::int64_t>;

/// Parses "3", "1/2" or a decimal such as "0.25".
Rational parse_rational(std::string_view text);
std::string rational_to_string(const Rational& q);

/// A unary ultra-metric map built from a closed set of constructors.
class Component {
 public:
  enum class Kind { Scale, Pow, Cap, Compose };

  /// The identity map (an empty composition).
  Component() = default;

  static Component scale(Rational a);
  static Component power(Rational k);
  static Component cap(Rational c);
  /// parts[0] is applied last: compose({f, g})(x) = f(g(x)).
  static Component compose(std::vector<Component> parts);
  static Component identity() { return {}; }
  static Component halving() { return scale(Rational(1, 2)); }

  Kind kind() const { return kind_; }
  const Rational& param() const { return param_; }
  const std::vector<Component>& parts() const { return parts_; }

  double operator()(double x) const;

  /// Flattens compositions and folds adjacent constructors where that is
  /// exact; scale(1) and empty compositions disappear.
  Component simplified() const;
  bool is_identity() const;
  /// k when the map is x ↦ min(1, 2^k x), after simplification.
  std::optional<int> dyadic_exponent() const;

  /// Empty if the unary laws hold, else a reason.
  std::optional<std::string> violation() const;

  /// "scale(1/2)", "pow(2)", "cap(1/2)", "comp(...)", "id".
  std::string to_string() const;

  bool operator==(const Component&) const = default;

 private:
  Kind kind_ = Kind::Compose;
  Rational param_{1};
  std::vector<Component> parts_;
};

/// Parses the textual component forms, plus "lazy", "strict" and "id".
Component parse_component(std::string_view text);

class SignatureMismatch : public Error {
 public:
  using Error::Error;
};

/// Per-symbol argument components.
class TermMetric {
 public:
  void set(const std::string& symbol, std::vector<Component> components);
  bool has(const std::string& symbol) const { return comps_.count(symbol) != 0; }
  /// Zero-based argument index. Throws SignatureMismatch for unknown symbols.
  const Component& component(const std::string& symbol, std::size_t arg) const;
  const std::vector<Component>& components(const std::string& symbol) const;
  const std::map<std::string, std::vector<Component>>& table() const { return comps_; }

  /// Every component is the identity or the halving map.
  bool is_granular() const;
  /// Every component is x ↦ min(1, 2^k x) for an integer k.
  bool is_dyadic() const;
  int exponent(const std::string& symbol, std::size_t arg) const;

  bool operator==(const TermMetric&) const = default;

 private:
  std::map<std::string, std::vector<Component>> comps_;
};

struct MetricViolation {
  std::string symbol;
  std::size_t arg = 0;  // 1-based
  std::string reason;
};

/// Empty when every component satisfies the unary laws.
std::vector<MetricViolation> validate_metric(const TermMetric& m);

TermMetric metric_infty(const Signature& sig);
TermMetric metric_id(const Signature& sig);
/// lazy[symbol][i] selects halving (true) or identity (false).
TermMetric metric_granular(const Signature& sig,
                           const std::map<std::string, std::vector<bool>>& lazy);

/// A distance value: exact powers of two for dyadic metrics, binary64 else.
class Dist {
 public:
  static Dist zero() { return Dist(true, -1, 0.0); }
  /// 2^-e with e ≥ 0.
  static Dist dyadic(std::int64_t e) { return Dist(true, e, 0.0); }
  static Dist approx(double v) { return Dist(false, -1, v); }

  bool is_exact() const { return exact_; }
  bool is_zero() const { return exact_ ? exponent_ < 0 : approx_ == 0.0; }
  /// e for the exact value 2^-e; nullopt for zero or approximate values.
  std::optional<std::int64_t> exponent() const;
  double value() const;
  std::string to_string() const;

  friend bool operator==(const Dist& a, const Dist& b);
  friend bool operator<(const Dist& a, const Dist& b);
  friend bool operator<=(const Dist& a, const Dist& b) { return !(b < a); }

 private:
  Dist(bool exact, std::int64_t e, double v) : exact_(exact), exponent_(e), approx_(v) {}
  bool exact_;
  std::int64_t exponent_;  // -1 encodes zero
  double approx_;
};

inline constexpr double kDefaultTol = 1e-9;
inline constexpr std::size_t kDefaultIterations = 10000;

Dist distance(const TermMetric& m, const Term& t, const Term& u, double tol = kDefaultTol);

/// The composed map (t,p)_m, outermost component first.
Component position_umm(const TermMetric& m, const Term& t, const Position& p);

class GuardExceeded : public Error {
 public:
  explicit GuardExceeded(Position where);
  const Position& where() const { return where_; }

 private:
  Position where_;
};

inline constexpr std::size_t kDefaultDepthGuard = 256;

/// Positions p with (t,p)_m(1) ≥ eps.
std::set<Position> epos(const TermMetric& m, const Term& t, double eps,
                        std::size_t depth_guard = kDefaultDepthGuard);

struct Membership {
  enum class Verdict { Member, NonMember, Unknown };
  Verdict verdict = Verdict::Member;
  /// For NonMember: the path to a non-contracting cycle and the cycle itself.
  Position to_cycle;
  Position cycle;
  /// Value the cycle iteration settled at (NonMember) or reached (Unknown).
  double residual = 0.0;
  bool exact = true;
};

std::string to_string(Membership::Verdict v);

Membership is_member(const TermMetric& m, const Term& t, double tol = kDefaultTol,
                     std::size_t max_iterations = kDefaultIterations);

/// y ↦ ⟦t⟧ with x ↦ y and every other variable ↦ 0.
class VarDepth {
 public:
  /// Maximum of the branch maps; no branches is the constant 0.
  explicit VarDepth(std::vector<Component> branches, std::optional<std::int64_t> lazy_edges = {});
  double operator()(double y) const;
  const std::vector<Component>& branches() const { return branches_; }
  /// For granular metrics, the least number of halving edges above x.
  std::optional<std::int64_t> lazy_edges() const { return lazy_edges_; }
  bool is_zero() const { return branches_.empty() && !lazy_edges_; }
  std::string to_string() const;

 private:
  std::vector<Component> branches_;
  std::optional<std::int64_t> lazy_edges_;
};

/// Cyclic t is supported for granular metrics only.
VarDepth vdepth(const TermMetric& m, const Term& t, const std::string& x);

struct DistanceComparison {
  Dist d_infty;
  Dist d_m;
  bool holds = false;
};

/// d_∞(t,u) ≤ d_m(t,u) for granular m.
DistanceComparison d_infty_leq_check(const TermMetric& m, const Term& t, const Term& u);

}  // namespace itrs
