#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace itrs {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Names starting with this character are reserved for internal use and can
/// never be produced by the term parser.
inline constexpr char kReservedPrefix = '%';

/// The variable returned by `subterm` for positions outside the term.
inline const std::string kFallbackVar = "%x";

/// The fresh variable used to fill top-layer gaps.
inline const std::string kHoleVar = "%hole";

inline bool is_reserved_name(std::string_view name) {
  return !name.empty() && name.front() == kReservedPrefix;
}

/// Finite set of function symbols with arities.
class Signature {
 public:
  Signature() = default;

  /// Adds a symbol; re-adding with the same arity is a no-op, a different
  /// arity throws.
  void add(const std::string& name, std::uint32_t arity);
  bool contains(const std::string& name) const { return symbols_.count(name) != 0; }
  std::optional<std::uint32_t> arity(const std::string& name) const;
  const std::map<std::string, std::uint32_t>& symbols() const { return symbols_; }
  std::size_t size() const { return symbols_.size(); }

  bool operator==(const Signature&) const = default;

 private:
  std::map<std::string, std::uint32_t> symbols_;
};

/// A finite word over positive naturals; the empty word is the root.
class Position {
 public:
  Position() = default;
  explicit Position(std::vector<std::uint32_t> steps);
  Position(std::initializer_list<std::uint32_t> steps);

  static Position root() { return {}; }
  /// Parses "λ", "eps", "" or a dot/·-separated list such as "1.2.1".
  static Position parse(std::string_view text);

  const std::vector<std::uint32_t>& steps() const { return steps_; }
  std::size_t length() const { return steps_.size(); }
  bool is_root() const { return steps_.empty(); }
  std::uint32_t operator[](std::size_t i) const { return steps_[i]; }

  Position child(std::uint32_t i) const;
  Position concat(const Position& other) const;
  Position prefix(std::size_t n) const;

  /// Prefix order: this ≼ other.
  bool is_prefix_of(const Position& other) const;
  bool is_proper_prefix_of(const Position& other) const {
    return length() < other.length() && is_prefix_of(other);
  }
  bool is_parallel_to(const Position& other) const {
    return !is_prefix_of(other) && !other.is_prefix_of(*this);
  }
  /// Removes a prefix; precondition: prefix ≼ *this.
  Position strip_prefix(const Position& prefix) const;

  std::string to_string() const;

  auto operator<=>(const Position&) const = default;

 private:
  std::vector<std::uint32_t> steps_;
};

/// One vertex of a term graph. Children are node indices.
struct Node {
  std::string label;
  bool is_var = false;
  std::vector<std::uint32_t> kids;

  bool operator==(const Node&) const = default;
};

/// A possibly infinite rational term, stored as its minimal rooted graph.
///
/// The graph is maximally shared (bisimulation quotient) and its nodes are
/// numbered in breadth-first order from the root, so two terms denote the
/// same infinite tree exactly when their node vectors are equal. Finite terms
/// are the acyclic case. Values are immutable and cheap to copy.
class Term {
 public:
  /// The fallback variable; exists so that Term is default constructible.
  Term();

  static Term variable(const std::string& name);
  static Term apply(const std::string& symbol, const std::vector<Term>& args);
  static Term constant(const std::string& symbol) { return apply(symbol, {}); }

  std::span<const Node> nodes() const { return *nodes_; }
  const Node& node(std::uint32_t i) const { return (*nodes_)[i]; }
  std::size_t size() const { return nodes_->size(); }

  const Node& root() const { return (*nodes_)[0]; }
  bool is_variable() const { return root().is_var; }
  const std::string& root_label() const { return root().label; }
  std::size_t arity() const { return root().kids.size(); }
  /// Zero-based argument access.
  Term arg(std::size_t i) const { return at_node(root().kids.at(i)); }

  /// The term rooted at a node of this graph.
  Term at_node(std::uint32_t index) const;

  bool is_finite() const { return finite_; }
  std::size_t hash() const { return hash_; }

  std::set<std::string> variables() const;
  std::set<std::string> symbols() const;

  /// Canonical μ-notation, parseable by `parse_term`.
  std::string to_string() const;

  /// Bisimilarity: equal as infinite trees.
  friend bool operator==(const Term& a, const Term& b) {
    return a.hash_ == b.hash_ && (a.nodes_ == b.nodes_ || *a.nodes_ == *b.nodes_);
  }
  /// Arbitrary but deterministic total order on canonical graphs.
  friend bool operator<(const Term& a, const Term& b);

 private:
  friend class TermGraph;
  explicit Term(std::vector<Node> canonical);

  std::shared_ptr<const std::vector<Node>> nodes_;
  std::size_t hash_ = 0;
  bool finite_ = true;
};

struct TermHash {
  std::size_t operator()(const Term& t) const { return t.hash(); }
};

/// Mutable graph used to assemble terms; `seal` canonicalises.
///
/// Alias nodes forward to another node and are resolved when sealing; they
/// are how μ-binders are tied back to their body.
class TermGraph {
 public:
  std::uint32_t add_var(const std::string& name);
  std::uint32_t add_app(const std::string& symbol, std::vector<std::uint32_t> kids);
  std::uint32_t add_alias();
  void set_alias(std::uint32_t alias, std::uint32_t target);
  void set_kid(std::uint32_t node, std::size_t i, std::uint32_t target);
  /// Copies the graph of `t`; returns the index of its root.
  std::uint32_t add_term(const Term& t);
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::uint32_t i) const { return nodes_[i]; }

  /// Canonicalises the part reachable from `root`. Throws on an unguarded
  /// alias cycle (a μ-variable standing for itself).
  Term seal(std::uint32_t root) const;

 private:
  std::vector<Node> nodes_;
  std::vector<bool> alias_;
};

using Substitution = std::map<std::string, Term>;

/// Subterm at `p`, or the fallback variable when p is not a position of t.
Term subterm(const Term& t, const Position& p);
/// Node index reached by walking `p`, if p is a position of t.
std::optional<std::uint32_t> node_at(const Term& t, const Position& p);
/// t with the subterm at p replaced by u; t itself when p is not a position.
Term replace(const Term& t, const Position& p, const Term& u);
/// All positions of length ≤ depth_bound, in pre-order.
std::vector<Position> positions(const Term& t, std::size_t depth_bound);
/// t ≃_p u: same function symbols strictly above p along p.
bool topequ(const Term& t, const Position& p, const Term& u);
bool bisimilar(const Term& t, const Term& u);
/// Homomorphic extension of σ; variables outside dom(σ) stay.
Term substitute(const Substitution& sigma, const Term& t);
/// Renames function symbols; symbols missing from the map are kept.
Term rename_symbols(const Term& t, const std::map<std::string, std::string>& renaming);
/// Height of a finite term (a leaf has depth 0); nullopt for infinite terms.
std::optional<std::size_t> depth(const Term& t);

/// Parses the μ-term syntax. Identifiers that are declared in `sig` denote
/// symbols; others are variables. Without a signature, an identifier
/// followed by parentheses is a symbol, and a bare identifier is a variable
/// iff it starts with a lowercase letter.
Term parse_term(std::string_view text, const Signature* sig = nullptr);

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace itrs

template <>
struct std::hash<itrs::Term> {
  std::size_t operator()(const itrs::Term& t) const { return t.hash(); }
};
