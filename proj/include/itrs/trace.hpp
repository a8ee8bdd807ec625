#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "itrs/rewrite.hpp"

namespace itrs {

struct TraceStep {
  enum class Kind { Rewrite, Stutter, Flip };
  Kind kind = Kind::Rewrite;
  RedexOccurrence occurrence;  // meaningful for Rewrite
  std::size_t flips = 0;       // meaningful for Flip
};

std::string to_string(TraceStep::Kind k);

/// A finite run of terms. `limit`, when present, is the ω-marker closing the
/// segment; the next segment starts from it.
struct Segment {
  std::vector<Term> terms;
  std::vector<TraceStep> steps;  // steps[i] leads from terms[i] to terms[i+1]
  std::optional<Term> limit;
  bool limit_verified = false;
};

/// A reduction sequence of length at most ω·k, made of k segments.
struct Trace {
  std::vector<Segment> segments;

  std::size_t term_count() const;
  /// All terms in order. Consecutive segments meet at a limit, so the limit
  /// appears once, as the first term of the following segment.
  std::vector<Term> flattened() const;
  const Term& last() const;
};

/// Where a flattened trace index comes from.
struct TraceIndex {
  std::size_t segment;
  std::size_t offset;
};
std::vector<TraceIndex> trace_indices(const Trace& tr);

/// Empty when every rewrite step replays, every stutter repeats its term
/// and each segment after the first starts at the previous limit.
std::optional<std::string> validate_trace(const Itrs& system, const Trace& tr);

/// Applies the steps in order; throws StaleOccurrence on a mismatch.
Term replay(const Itrs& system, const Term& start, const std::vector<RedexOccurrence>& steps);

/// JSON lines: {"term": ...} opens a segment, {"term", "position", "rule"}
/// records a step, {"stutter": ...} a repeated term and {"omega": ...} a limit.
void write_trace(std::ostream& out, const Trace& tr);
Trace read_trace(std::istream& in, const Signature* sig = nullptr);

}  // namespace itrs
