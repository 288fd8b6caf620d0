#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "kmlab/morley.hpp"
#include "kmlab/parser.hpp"
#include "kmlab/scenarios.hpp"
#include "oracles.hpp"

using namespace kmlab;
using kmlab_test::morley_double_sum;
using kmlab_test::random_boolean;

namespace {

Fragment tr_one_param() {
  Fragment frag;
  frag.theory = TheoryId::TR;
  frag.add_param("c", Sort::V);
  frag.add_literal(Formula::lnot(
      atom_rel("R", {Term::param("c", Sort::V), Term::param("c", Sort::V),
                     Term::param("c", Sort::V)})));
  return frag;
}

}  // namespace

TEST_CASE("coin-flip type masses sum to one", "[morley]") {
  auto frag = tr_one_param();
  auto m = coin_flip_measure("x");
  auto ts = enumerate_types(frag, {{"x", Sort::V}});
  REQUIRE(ts.types.size() == 129);
  Rat tot = 0;
  for (const auto& q : ts.types) tot += eval_measure(*m, q.formula(), frag);
  CHECK(tot == 1);
}

TEST_CASE("hand-checked products and powers", "[morley]") {
  auto frag = tr_one_param();
  auto mu = coin_flip_measure("x");
  auto nu = coin_flip_measure("y");
  auto phi = parse_formula("R(x, y, c)", frag.params);
  CHECK(morley_product_eval(*mu, *nu, phi, frag) == rat(1, 2));
  auto phi2 = parse_formula("R(x2, x1, c)", frag.params);
  CHECK(power_eval(mu, 2, phi2, frag) == rat(1, 2));
}

TEST_CASE("product evaluation matches the brute-force double sum",
          "[morley][property]") {
  std::mt19937_64 rng(43);
  auto frag = tr_one_param();
  std::vector<FormulaPtr> atoms;
  for (const char* a : {"x", "y", "c"})
    for (const char* b : {"x", "y", "c"})
      for (const char* c : {"x", "y", "c"}) {
        std::string src = std::string("R(") + a + "," + b + "," + c + ")";
        auto f = parse_formula(src, frag.params);
        if (free_vars(f).size() == 2) atoms.push_back(f);  // needs both x, y
      }
  std::map<std::string, Sort> eqs{
      {"c", Sort::V}, {"x", Sort::V}, {"y", Sort::V}};
  atoms.push_back(kmlab_test::parse_vf("x = y", eqs, {"x", "y"}));
  atoms.push_back(kmlab_test::parse_vf("x = c", eqs, {"x", "y"}));
  atoms.push_back(kmlab_test::parse_vf("y = c", eqs, {"x", "y"}));

  std::vector<MeasurePtr> mus = {
      coin_flip_measure("x"), dirac_measure(VertexRef{"c"}, "x", Sort::V),
      average_measure({VertexRef{"c"}, VertexRef{"c"}}, "x", Sort::V)};
  std::vector<MeasurePtr> nus = {coin_flip_measure("y"),
                                 dirac_measure(VertexRef{"c"}, "y", Sort::V)};
  for (int t = 0; t < 12; ++t) {
    auto phi = random_boolean(rng, atoms, 2);
    const auto& mu = mus[rng() % mus.size()];
    const auto& nu = nus[rng() % nus.size()];
    INFO("phi = " << formula_str(phi) << " mu=" << mu->name
                  << " nu=" << nu->name);
    CHECK(morley_product_eval(*mu, *nu, phi, frag) ==
          morley_double_sum(*mu, *nu, phi, frag));
  }
}

TEST_CASE("products are bilinear", "[morley][property]") {
  std::mt19937_64 rng(47);
  auto frag = tr_one_param();
  auto m1 = coin_flip_measure("x");
  auto m2 = dirac_measure(VertexRef{"c"}, "x", Sort::V);
  auto nu = coin_flip_measure("y");
  Rat r = rat(1, 3);
  auto mix = convex_combine({r, 1 - r}, {m1, m2});
  std::vector<FormulaPtr> atoms = {parse_formula("R(x, y, c)", frag.params),
                                   parse_formula("R(y, x, x)", frag.params),
                                   kmlab_test::parse_vf(
                                       "x = y",
                                       {{"c", Sort::V}, {"x", Sort::V},
                                        {"y", Sort::V}},
                                       {"x", "y"})};
  for (int t = 0; t < 10; ++t) {
    auto phi = random_boolean(rng, atoms, 2);
    CHECK(morley_product_eval(*mix, *nu, phi, frag) ==
          r * morley_product_eval(*m1, *nu, phi, frag) +
              (1 - r) * morley_product_eval(*m2, *nu, phi, frag));
  }
}

TEST_CASE("powers restrict consistently", "[morley][property]") {
  std::mt19937_64 rng(53);
  auto frag = tr_one_param();
  std::vector<FormulaPtr> atoms = {
      parse_formula("R(x1, x2, c)", frag.params),
      parse_formula("R(x2, x1, x1)", frag.params),
      kmlab_test::parse_vf("x1 = x2",
                           {{"c", Sort::V}, {"x1", Sort::V}, {"x2", Sort::V}},
                           {"x1", "x2"})};
  // Element-backed measures allow a cheap three-fold power.
  auto av = average_measure({VertexRef{"c"}, VertexRef{"c"}}, "x", Sort::V);
  for (int t = 0; t < 6; ++t) {
    auto phi = random_boolean(rng, atoms, 2);
    CHECK(power_eval(av, 3, phi, frag) == power_eval(av, 2, phi, frag));
  }
  // The coin flip restricts from two variables to one.
  auto mu = coin_flip_measure("x");
  auto one = parse_formula("R(x1, x1, c)", frag.params);
  CHECK(power_eval(mu, 2, one, frag) == power_eval(mu, 1, one, frag));
  // Stray variables are rejected.
  CHECK_THROWS_AS(
      power_eval(mu, 1, parse_formula("R(x1, x2, c)", frag.params), frag),
      std::invalid_argument);
}

TEST_CASE("convex powers decompose over patterns (n = 2)",
          "[morley][property]") {
  std::mt19937_64 rng(59);
  auto frag = tr_one_param();
  auto mu = coin_flip_measure("x");
  auto nu = dirac_measure(VertexRef{"c"}, "x", Sort::V);
  Rat r = rat(1, 4);
  auto lam = convex_combine({r, 1 - r}, {mu, nu});
  std::map<std::string, Sort> eqs{
      {"c", Sort::V}, {"x1", Sort::V}, {"x2", Sort::V}};
  std::vector<FormulaPtr> atoms = {
      parse_formula("R(x1, x2, c)", frag.params),
      parse_formula("R(x2, c, x1)", frag.params),
      kmlab_test::parse_vf("x1 = c", eqs, {"x1", "x2"}),
      kmlab_test::parse_vf("x1 = x2", eqs, {"x1", "x2"})};
  for (int t = 0; t < 8; ++t) {
    auto phi = random_boolean(rng, atoms, 2);
    Rat rhs = 0;
    for (unsigned mask = 0; mask < 4; ++mask) {
      std::set<std::size_t> X;
      if (mask & 1) X.insert(1);
      if (mask & 2) X.insert(2);
      rhs += rat_pow(r, X.size()) * rat_pow(1 - r, 2 - X.size()) *
             pattern_product_eval(X, mu, nu, 2, phi, frag);
    }
    CHECK(power_eval(lam, 2, phi, frag) == rhs);
  }
}

TEST_CASE("associativity holds when a factor is definable", "[morley]") {
  auto frag = tr_one_param();
  auto mu = dirac_measure(VertexRef{"c"}, "x", Sort::V);
  auto nu = average_measure({VertexRef{"c"}}, "y", Sort::V);
  auto lam = coin_flip_measure("z");
  std::vector<FormulaPtr> pool = {
      parse_formula("R(x, y, z)", frag.params),
      parse_formula("R(z, y, x) & !R(x, x, z)", frag.params),
      parse_formula("R(x, y, z) | z = c", frag.params)};
  auto rep = check_assoc(*mu, *nu, *lam, frag, pool);
  CHECK(rep.equal);
}

TEST_CASE("commutation fails for the interval pair type against the cube "
          "measure",
          "[morley]") {
  Fragment frag;
  frag.theory = TheoryId::THalfInf;
  auto mu = cube_lebesgue_measure("x");
  auto q = generic_pair_type_measure("y");
  auto phi = parse_formula("x sqin y", frag.params);
  auto rep = check_commute(*mu, *q, frag, {phi});
  CHECK_FALSE(rep.equal);
  CHECK(rep.left == rat(1, 2));
  CHECK(rep.right == 1);
}

TEST_CASE("the generic non-adjacent type commutes with the edge-null "
          "invariant measure",
          "[morley]") {
  Fragment frag;
  frag.theory = TheoryId::Henson;
  frag.henson_s = 3;
  frag.add_param("m1", Sort::V);
  auto pe = henson_nonedge_type_measure("x");
  auto mu = coin_flip_measure("y", rat(0));  // edges get probability 0
  std::vector<FormulaPtr> pool = {parse_formula("E(x, y)", frag.params),
                                  parse_formula("!E(x, y)", frag.params),
                                  parse_formula("E(x, y) | E(x, m1)",
                                                frag.params)};
  auto rep = check_commute(*pe, *mu, frag, pool);
  CHECK(rep.equal);
}
