#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "itrs/rewrite.hpp"

namespace itrs {

/// A parsed `.itrs` file.
///
///     // comment
///     metric infty            (or id, granular: the default component)
///     sig Bin/3 [lazy, id, strict] @1
///     rule R1: F(x,x,y) -> F(x,y,x)
///     term t = mu X. F(F(H(X)))
///
/// Components in brackets override the default per argument; `@n` colours a
/// symbol. Symbols must be declared before the rules and terms that use them.
struct ItrsFile {
  std::string metric_name = "infty";
  Itrs system;
  std::vector<std::pair<std::string, Term>> terms;

  const Term* term(const std::string& name) const;
};

/// In strict mode rules are checked with validate_rule and the whole system
/// with validate_itrs. Lenient mode keeps rejected rules so that `classify`
/// can report on them.
ItrsFile parse_itrs_file(std::string_view text, bool strict = true);
ItrsFile load_itrs_file(const std::string& path, bool strict = true);

/// Parses a file and returns the validated system.
Itrs parse_itrs(std::string_view text);

/// Writes every component explicitly so that parsing the output gives back
/// the same system.
std::string print_itrs(const ItrsFile& file);

}  // namespace itrs
