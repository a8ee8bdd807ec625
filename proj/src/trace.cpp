#include "itrs/trace.hpp"

#include <istream>
#include <json.hpp>
#include <ostream>

namespace itrs {

std::string to_string(TraceStep::Kind k) {
  switch (k) {
    case TraceStep::Kind::Rewrite:
      return "rewrite";
    case TraceStep::Kind::Stutter:
      return "stutter";
    case TraceStep::Kind::Flip:
      return "flip";
  }
  return "rewrite";
}

std::size_t Trace::term_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.terms.size();
  return n;
}

std::vector<Term> Trace::flattened() const {
  std::vector<Term> out;
  out.reserve(term_count());
  for (const auto& s : segments) out.insert(out.end(), s.terms.begin(), s.terms.end());
  return out;
}

const Term& Trace::last() const {
  for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
    if (!it->terms.empty()) return it->terms.back();
  }
  throw Error("empty trace");
}

std::vector<TraceIndex> trace_indices(const Trace& tr) {
  std::vector<TraceIndex> out;
  for (std::size_t s = 0; s < tr.segments.size(); ++s) {
    for (std::size_t i = 0; i < tr.segments[s].terms.size(); ++i) out.push_back({s, i});
  }
  return out;
}

std::optional<std::string> validate_trace(const Itrs& system, const Trace& tr) {
  for (std::size_t s = 0; s < tr.segments.size(); ++s) {
    const auto& seg = tr.segments[s];
    auto where = [&](std::size_t i) {
      return "segment " + std::to_string(s) + ", step " + std::to_string(i);
    };
    if (seg.terms.empty()) return "segment " + std::to_string(s) + " is empty";
    if (seg.steps.size() + 1 != seg.terms.size()) {
      return "segment " + std::to_string(s) + " has mismatched step count";
    }
    if (s > 0) {
      const auto& prev = tr.segments[s - 1];
      if (!prev.limit) return "segment " + std::to_string(s) + " follows a segment without limit";
      if (!(*prev.limit == seg.terms.front())) {
        return "segment " + std::to_string(s) + " does not start at the recorded limit";
      }
    }
    for (std::size_t i = 0; i < seg.steps.size(); ++i) {
      const auto& step = seg.steps[i];
      if (step.kind == TraceStep::Kind::Stutter || step.kind == TraceStep::Kind::Flip) {
        if (step.kind == TraceStep::Kind::Stutter && !(seg.terms[i] == seg.terms[i + 1])) {
          return where(i) + ": stutter changes the term";
        }
        continue;
      }
      try {
        if (!(rewrite_step(system, seg.terms[i], step.occurrence) == seg.terms[i + 1])) {
          return where(i) + ": step does not produce the recorded term";
        }
      } catch (const StaleOccurrence& e) {
        return where(i) + ": " + e.what();
      }
    }
  }
  return std::nullopt;
}

Term replay(const Itrs& system, const Term& start, const std::vector<RedexOccurrence>& steps) {
  Term cur = start;
  for (const auto& occ : steps) cur = rewrite_step(system, cur, occ);
  return cur;
}

void write_trace(std::ostream& out, const Trace& tr) {
  using nlohmann::json;
  for (const auto& seg : tr.segments) {
    if (seg.terms.empty()) continue;
    out << json{{"term", seg.terms.front().to_string()}}.dump() << '\n';
    for (std::size_t i = 0; i < seg.steps.size(); ++i) {
      const auto& step = seg.steps[i];
      json line{{"term", seg.terms[i + 1].to_string()}};
      switch (step.kind) {
        case TraceStep::Kind::Rewrite:
          line["position"] = step.occurrence.position.to_string();
          line["rule"] = step.occurrence.rule;
          break;
        case TraceStep::Kind::Stutter:
          line["stutter"] = true;
          break;
        case TraceStep::Kind::Flip:
          line["flips"] = step.flips;
          break;
      }
      out << line.dump() << '\n';
    }
    if (seg.limit) {
      out << json{{"omega", seg.limit->to_string()}, {"verified", seg.limit_verified}}.dump() << '\n';
    }
  }
}

Trace read_trace(std::istream& in, const Signature* sig) {
  using nlohmann::json;
  Trace tr;
  std::string line;
  std::size_t lineno = 0;
  bool need_segment = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), lineno, 1);
    }
    if (j.contains("omega")) {
      if (tr.segments.empty()) throw ParseError("limit marker before any term", lineno, 1);
      tr.segments.back().limit = parse_term(j.at("omega").get<std::string>(), sig);
      tr.segments.back().limit_verified = j.value("verified", false);
      need_segment = true;
      continue;
    }
    if (!j.contains("term")) throw ParseError("line has neither 'term' nor 'omega'", lineno, 1);
    auto t = parse_term(j.at("term").get<std::string>(), sig);
    if (need_segment) {
      tr.segments.emplace_back();
      tr.segments.back().terms.push_back(std::move(t));
      need_segment = false;
      continue;
    }
    TraceStep step;
    if (j.contains("position")) {
      step.kind = TraceStep::Kind::Rewrite;
      step.occurrence.position = Position::parse(j.at("position").get<std::string>());
      step.occurrence.rule = j.at("rule").get<std::string>();
    } else if (j.contains("flips")) {
      step.kind = TraceStep::Kind::Flip;
      step.flips = j.at("flips").get<std::size_t>();
    } else {
      step.kind = TraceStep::Kind::Stutter;
    }
    tr.segments.back().steps.push_back(std::move(step));
    tr.segments.back().terms.push_back(std::move(t));
  }
  return tr;
}

}  // namespace itrs
