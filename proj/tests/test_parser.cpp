#include <catch2/catch_amalgamated.hpp>

#include "kmlab/parser.hpp"

using namespace kmlab;

namespace {

const std::map<std::string, Sort> kSorts{
    {"a", Sort::P}, {"a2", Sort::P}, {"b", Sort::Q},
    {"c", Sort::Q}, {"u", Sort::V},  {"v", Sort::V}};

void roundtrip(const std::string& src) {
  auto f = parse_formula(src, kSorts);
  auto g = parse_formula(formula_str(f), kSorts);
  INFO(src << "  ->  " << formula_str(f));
  CHECK(formula_eq(f, g));
}

}  // namespace

TEST_CASE("parse then print is stable", "[parser]") {
  roundtrip("R(x, u, v) & !R(x, v, u)");
  roundtrip("E(x, u) | E(x, v)");
  roundtrip("x = u | !(x = v)");
  roundtrip("a sqin b");
  roundtrip("a sqin (b meet c)");
  roundtrip("a sqin ((b join c) meet comp(b))");
  roundtrip("b sim c");
  roundtrip("(b meet c) = bot");
  roundtrip("(b join c) = top");
  roundtrip("l(b) = 1/2");
  roundtrip("l(b meet c) + l(b join c) = l(b) + l(c)");
  roundtrip("l(b) < 1/3");
  roundtrip("exists x0:P. (x0 sqin b & !(x0 = a))");
  roundtrip("forall y0:Q. (l(y0) = 1/2 | !(y0 sim b))");
  roundtrip("exists y0:Q. exists x0:P. (x0 sqin y0)");
  roundtrip("a2 sqin comp(b meet c)");
}

TEST_CASE("atom kinds are recognized", "[parser]") {
  CHECK(parse_formula("a sqin b", kSorts)->atom == AtomKind::Sqin);
  CHECK(parse_formula("b sim c", kSorts)->atom == AtomKind::Sim);
  CHECK(parse_formula("b = c", kSorts)->atom == AtomKind::Eq);
  CHECK(parse_formula("l(b) < 1", kSorts)->atom == AtomKind::Less);
  CHECK(parse_formula("R(x, u, v)", kSorts)->atom == AtomKind::Rel);
  CHECK(parse_formula("true", kSorts)->kind == FormKind::True);
  CHECK(parse_formula("false", kSorts)->kind == FormKind::False);
}

TEST_CASE("complement postfix form", "[parser]") {
  auto f = parse_formula("a sqin (b)^c", kSorts);
  auto g = parse_formula("a sqin comp(b)", kSorts);
  CHECK(formula_eq(f, g));
}

TEST_CASE("known names take their declared sorts", "[parser]") {
  auto f = parse_formula("a sqin b", kSorts);
  REQUIRE(f->args.size() == 2);
  CHECK(term_sort(f->args[0]) == Sort::P);
  CHECK(term_sort(f->args[1]) == Sort::Q);
}

TEST_CASE("parse errors", "[parser]") {
  CHECK_THROWS_AS(parse_formula("R(x, u", kSorts), ParseError);
  CHECK_THROWS_AS(parse_formula("", kSorts), ParseError);
  CHECK_THROWS_AS(parse_formula("a sqin sqin b", kSorts), ParseError);
  CHECK_THROWS_AS(parse_formula("exists x0:Z. (x0 = x0)", kSorts), ParseError);
  CHECK_THROWS_AS(parse_formula("a &", kSorts), ParseError);
}

TEST_CASE("rationals inside formulas", "[parser]") {
  roundtrip("l(b) = 3/4");
  roundtrip("1/4 < l(b meet c)");
  roundtrip("l(b) + l(c) = 3/2");
}
