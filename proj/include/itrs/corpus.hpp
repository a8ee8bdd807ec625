#pragma once

#include <string>
#include <vector>

#include "itrs/convergence.hpp"
#include "itrs/itrs_file.hpp"

namespace itrs {

/// One named example system with its expected behaviour.
struct Fixture {
  std::string name;
  std::string summary;
  /// Source text of each constituent; unions have two.
  std::vector<std::string> sources;
  /// The combined system together with its named start terms.
  ItrsFile file;
};

std::vector<std::string> fixture_names();
/// Throws Error for an unknown name.
Fixture fixture(const std::string& name);

struct CorpusCheck {
  std::string label;
  bool passed = false;
  std::string detail;
};

struct FixtureReport {
  std::string name;
  std::string expected;
  std::string observed;
  std::vector<CorpusCheck> checks;

  bool passed() const;
};

/// Budgets small enough for the whole corpus to run in seconds.
Budgets corpus_budgets();

FixtureReport run_fixture(const std::string& name, const Budgets& budgets = corpus_budgets());
std::vector<FixtureReport> run_corpus(const Budgets& budgets = corpus_budgets());

/// The exnonlin union trace F(0,0,0) ->* F(1,1,1), five steps.
Trace exnonlin_trace();

/// The two-segment rearrange trace. The first segment writes S^k(Z) into
/// the k-th K-node for k < n; its last term stands in for the limit. The
/// second segment applies J(K(x,y)) -> J(y) at the root n times.
Trace rearrange_trace(std::size_t n = 4);

/// Traces of union fixtures, for trace-level suites.
struct UnionTrace {
  std::string fixture;
  Itrs system;
  Trace trace;
  bool collapsing = false;
};

std::vector<UnionTrace> union_traces();

}  // namespace itrs
