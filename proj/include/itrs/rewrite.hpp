#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "itrs/metric.hpp"
#include "itrs/term.hpp"

namespace itrs {

struct Rule {
  std::string name;
  Term lhs;
  Term rhs;

  std::string to_string() const { return lhs.to_string() + " -> " + rhs.to_string(); }
};

/// Which constituent of a disjoint union each symbol came from (1 or 2).
using Coloring = std::map<std::string, int>;

/// An infinitary rewrite system: signature, term metric and rules.
struct Itrs {
  Signature sig;
  TermMetric metric;
  std::vector<Rule> rules;
  Coloring colors;

  const Rule& rule(const std::string& name) const;
  const Rule* find_rule(const std::string& name) const;
};

struct RedexOccurrence {
  Position position;
  std::string rule;
  Substitution match;
};

class RuleRejected : public Error {
 public:
  using Error::Error;
};

class StaleOccurrence : public Error {
 public:
  using Error::Error;
};

/// Throws RuleRejected for a variable or infinite lhs, or extra rhs variables.
void validate_rule(const Rule& rule);
/// Rules, symbol arities and metric coverage.
void validate_itrs(const Itrs& system);

/// A matching substitution for `lhs` at p in t. Repeated variables must be
/// bound to bisimilar subterms.
std::optional<Substitution> match(const Term& lhs, const Term& t, const Position& p);

Term rewrite_step(const Itrs& system, const Term& t, const RedexOccurrence& occ);

struct Successor {
  RedexOccurrence occurrence;
  Term result;
};

/// One-step reducts at positions of length ≤ depth_bound, in pre-order of
/// positions and rule order, keeping the first occurrence of each reduct.
std::vector<Successor> successors(const Itrs& system, const Term& t, std::size_t depth_bound);

/// All redex occurrences (no deduplication), same order as `successors`.
std::vector<RedexOccurrence> redexes(const Itrs& system, const Term& t, std::size_t depth_bound);

inline constexpr std::size_t kDefaultReachBudget = 10000;
inline constexpr std::size_t kDefaultDepthBound = 8;

/// Redex positions are searched to full depth in finite terms and up to
/// `depth_bound` in infinite ones.
std::size_t search_bound(const Term& t, std::size_t depth_bound);

struct ReachResult {
  bool found = false;
  std::vector<Successor> path;
  std::size_t expansions = 0;
  bool budget_exhausted = false;
};

/// Breadth-first search for a finite reduction t →* u, expanding each term
/// up to its search bound. A negative answer only means none was found
/// within the budget.
ReachResult weak_reach(const Itrs& system, const Term& t, const Term& u,
                       std::size_t budget = kDefaultReachBudget,
                       std::size_t depth_bound = kDefaultDepthBound);

bool is_collapsing(const Rule& rule);
bool is_pseudo_collapsing(const TermMetric& m, const Rule& rule);

struct DepthVerdict {
  enum class Kind { Exact, SampledPass, Fail, Unknown };
  Kind kind = Kind::Exact;
  /// Failure witness: the variable and the point where rhs depth exceeds lhs.
  std::string variable;
  double at = 1.0;
  double lhs_value = 0.0;
  double rhs_value = 0.0;

  bool holds() const { return kind == Kind::Exact || kind == Kind::SampledPass; }
};

std::string to_string(DepthVerdict::Kind k);

/// Every variable is at least as deep on the right as on the left.
DepthVerdict is_depth_preserving(const TermMetric& m, const Rule& rule, std::size_t samples = 64);

struct IndirectResult {
  Itrs system;
  std::string symbol;
  bool renamed = false;
  std::string elimination_rule;
};

/// Adds a fresh unary identity-metric symbol I and rewrites every rule l → r
/// to l → I(r), plus I(x) → x.
IndirectResult indirect(const Itrs& system);

struct UnionResult {
  Itrs system;
  std::map<std::string, std::string> left_symbols;
  std::map<std::string, std::string> right_symbols;
  std::map<std::string, std::string> left_rules;
  std::map<std::string, std::string> right_rules;
};

/// Coproduct; clashing names get the suffixes #1 and #2, symbols are
/// coloured 1 and 2 by origin.
UnionResult disjoint_union(const Itrs& left, const Itrs& right);

struct RuleReport {
  std::string name;
  bool collapsing = false;
  bool pseudo_collapsing = false;
  DepthVerdict depth;
  bool left_linear = true;
  bool variable_lhs = false;
  bool extra_variables = false;
  bool infinite_lhs = false;
  bool rhs_member = true;

  bool rejected() const { return variable_lhs || extra_variables || infinite_lhs; }
};

std::vector<RuleReport> classify_itrs(const Itrs& system);

}  // namespace itrs
