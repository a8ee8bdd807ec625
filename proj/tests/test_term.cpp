#include <doctest.h>

#include "itrs/term.hpp"
#include "support.hpp"

using namespace itrs;
using itrs::testing::TermGen;

namespace {
Term T(const char* s) { return parse_term(s); }
}  // namespace

TEST_CASE("subterm follows arguments and falls back outside the term") {
  CHECK(subterm(T("F(G(a),b)"), {1}) == T("G(a)"));
  auto fallback = subterm(T("F(G(a),b)"), {3});
  CHECK(fallback.is_variable());
  CHECK(subterm(T("mu X. S(X)"), {1, 1, 1}) == T("mu X. S(X)"));
}

TEST_CASE("replace rewrites one position and ignores foreign ones") {
  CHECK(replace(T("F(a,b)"), {2}, T("c")) == T("F(a,c)"));
  CHECK(replace(T("F(a,b)"), {7}, T("c")) == T("F(a,b)"));
  CHECK(replace(T("mu X. S(X)"), {1}, T("0")) == T("S(0)"));
}

TEST_CASE("positions under a depth bound") {
  CHECK(positions(T("a"), 5) == std::vector<Position>{Position{}});
  auto ps = positions(T("F(a,b)"), 5);
  CHECK(std::set<Position>(ps.begin(), ps.end()) == std::set<Position>{{}, {1}, {2}});
  auto cyc = positions(T("mu X. S(X)"), 2);
  CHECK(std::set<Position>(cyc.begin(), cyc.end()) == std::set<Position>{{}, {1}, {1, 1}});
}

TEST_CASE("topequ compares symbols strictly above a position") {
  CHECK(topequ(T("F(a)"), {}, T("G(b,c)")));
  CHECK(topequ(T("F(a)"), {1}, T("F(b)")));
  CHECK_FALSE(topequ(T("F(a)"), {1}, T("G(a)")));
  CHECK_FALSE(topequ(T("F(a)"), {1, 1}, T("F(b)")));
  CHECK(topequ(T("mu X. S(X)"), {1, 1}, T("S(S(0))")));
}

TEST_CASE("bisimilarity of rational terms") {
  CHECK(T("mu X. S(X)") == T("S(mu X. S(X))"));
  CHECK(T("mu X. S(X)") == T("mu X. S(S(X))"));
  CHECK(T("mu X. S(X)") != T("mu X. F(X)"));
  CHECK(bisimilar(T("mu X. S(X)"), T("mu X. S(S(S(X)))")));
  CHECK(itrs::testing::product_bisimilar(T("mu X. S(X)"), T("mu X. S(S(X))")));
}

TEST_CASE("substitution shares the substituted term") {
  CHECK(substitute({{"x", T("a")}}, T("x")) == T("a"));
  CHECK(substitute({}, T("F(x,y)")) == T("F(x,y)"));
  auto s = substitute({{"x", T("mu X. S(X)")}}, T("F(x,x)"));
  CHECK(s.arg(0) == T("mu X. S(X)"));
  CHECK(s.arg(1) == T("mu X. S(X)"));
}

TEST_CASE("printing and parsing round-trip") {
  for (const char* s : {"a", "F(x,G(y))", "mu X. F(X, mu Y. G(Y, X))", "mu X. K(E, X)", "J(mu X. K(J(K(x,y)),X))"}) {
    auto t = T(s);
    CHECK(parse_term(t.to_string()) == t);
  }
}

TEST_CASE("parse errors carry a column") {
  try {
    parse_term("F(a,");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.column() >= 4);
  }
  Signature sig;
  sig.add("F", 2);
  CHECK_THROWS_AS(parse_term("F(a)", &sig), ParseError);
}

TEST_CASE("canonical equality agrees with the product-graph oracle") {
  TermGen gen({{"F", 2}, {"S", 1}, {"a", 0}, {"b", 0}}, {"x"}, 7);
  int unequal = 0;
  for (int i = 0; i < 500; ++i) {
    auto [t, u] = gen.pair(4);
    bool eq = t == u;
    CHECK(eq == itrs::testing::product_bisimilar(t, u));
    CHECK(eq == bisimilar(t, u));
    unequal += !eq;
  }
  CHECK(unequal > 100);
}

TEST_CASE("cyclic presentations agree with the product-graph oracle") {
  const char* terms[] = {"mu X. S(X)", "mu X. S(S(X))", "mu X. F(X, a)", "mu X. F(mu Y. F(Y, a), a)",
                         "F(mu X. F(X, a), a)", "mu X. F(a, X)", "mu X. F(X, X)", "F(mu X. F(X,X), mu Y. F(Y,Y))"};
  for (const char* a : terms) {
    for (const char* b : terms) {
      auto t = T(a);
      auto u = T(b);
      CHECK_MESSAGE((t == u) == itrs::testing::product_bisimilar(t, u), a << " vs " << b);
    }
  }
}

TEST_CASE("depth counts edges of finite terms") {
  CHECK(depth(T("a")) == 0u);
  CHECK(depth(T("F(a,G(b))")) == 2u);
  CHECK_FALSE(depth(T("mu X. S(X)")).has_value());
}
