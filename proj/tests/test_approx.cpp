#include <catch2/catch_amalgamated.hpp>

#include "kmlab/approx.hpp"
#include "kmlab/parser.hpp"
#include "oracles.hpp"

using namespace kmlab;

TEST_CASE("concentration bound spot values", "[approx]") {
  CHECK(wlln_bound(rat(1, 2), rat(1, 4), 16) == rat(3, 4));
  CHECK(wlln_bound(rat(0), rat(1, 4), 5) == 1);
  CHECK(wlln_bound(rat(1, 2), rat(1, 10), 1) == 0);  // clamped vacuous bound
  CHECK(binomial_tail_exact(rat(1, 2), rat(1, 4), 16) == rat(30251, 32768));
  CHECK(binomial_tail_exact(rat(1), rat(1, 8), 7) == 1);
  CHECK(binomial_tail_exact(rat(1, 2), rat(1), 3) == 1);
}

TEST_CASE("exact binomial tail dominates the Chebyshev-style bound on the "
          "full grid",
          "[approx][property]") {
  for (const Rat& r : {rat(0), rat(1, 4), rat(1, 2), rat(3, 4), rat(1)})
    for (const Rat& eps : {rat(1, 8), rat(1, 4), rat(1, 2)})
      for (long n = 1; n <= 64; ++n) {
        INFO("r=" << rat_str(r) << " eps=" << rat_str(eps) << " n=" << n);
        CHECK(binomial_tail_exact(r, eps, n) >= wlln_bound(r, eps, n));
      }
}

TEST_CASE("average error and tuple search over a graph fragment", "[approx]") {
  Fragment frag;
  frag.theory = TheoryId::RandomGraph;
  frag.add_param("a", Sort::V);
  frag.set_value("a", VertexRef{"a"});
  frag.add_param("b", Sort::V);
  frag.set_value("b", VertexRef{"b"});
  frag.add_literal(atom_rel(
      "E", {Term::param("a", Sort::V), Term::param("b", Sort::V)}));
  auto phi = parse_formula("E(x, y)", frag.params);

  // Av(a, b) approximates itself exactly.
  auto av = average_measure({VertexRef{"a"}, VertexRef{"b"}}, "x", Sort::V);
  CHECK(av_error(*av, {"a", "b"}, phi, frag) == 0);

  // A Dirac measure is approximated by the singleton tuple at its atom.
  auto mu = dirac_measure(VertexRef{"a"}, "x", Sort::V);
  auto res = fam_search(*mu, phi, rat(1, 2), frag, 2);
  REQUIRE(res.found);
  CHECK(res.error < rat(1, 2));
  // fam_search verdicts re-verify through av_error.
  CHECK(av_error(*mu, res.tuple, phi, frag) == res.error);
}

TEST_CASE("fim convexity identity at n = 2", "[approx]") {
  Fragment frag;
  frag.theory = TheoryId::RandomGraph;
  frag.add_param("a", Sort::V);
  frag.set_value("a", VertexRef{"a"});
  frag.add_param("b", Sort::V);
  frag.set_value("b", VertexRef{"b"});
  frag.add_literal(atom_rel(
      "E", {Term::param("a", Sort::V), Term::param("b", Sort::V)}));
  auto mu = dirac_measure(VertexRef{"a"}, "x", Sort::V);
  auto nu = dirac_measure(VertexRef{"b"}, "x", Sort::V);
  std::map<std::string, Sort> eqs{
      {"a", Sort::V}, {"b", Sort::V}, {"x1", Sort::V}, {"x2", Sort::V}};
  auto p2 = kmlab_test::parse_vf("x1 = a & x2 = a", eqs, {"x1", "x2"});
  auto lam = convex_combine({rat(1, 2), rat(1, 2)}, {mu, nu});
  CHECK(power_eval(lam, 2, p2, frag) == rat(1, 4));
  auto rep = fim_convexity_check(mu, nu, rat(1, 2), 2, frag, {p2});
  CHECK(rep.equal);

  std::vector<FormulaPtr> pool = {
      p2, parse_formula("E(x1, x2)", frag.params),
      kmlab_test::parse_vf("x1 = a | x2 = b", eqs, {"x1", "x2"}),
      kmlab_test::parse_vf("!(x1 = x2)", eqs, {"x1", "x2"})};
  auto rep2 = fim_convexity_check(mu, nu, rat(1, 3), 2, frag, pool);
  CHECK(rep2.equal);
}

TEST_CASE("average error grows monotonically under fragment extension for "
          "schema-determined measures",
          "[approx]") {
  // CoinFlip over the graph theory: the extension adds a parameter, so the
  // instance space (and hence the sup) only grows.
  Fragment frag;
  frag.theory = TheoryId::RandomGraph;
  frag.add_param("a", Sort::V);
  frag.set_value("a", VertexRef{"a"});
  auto cf = coin_flip_measure("x");
  auto phi = parse_formula("E(x, y)", frag.params);
  Rat before = av_error(*cf, {"a"}, phi, frag);
  Fragment bigger = frag;
  bigger.add_param("b", Sort::V);
  bigger.set_value("b", VertexRef{"b"});
  bigger.add_literal(Formula::lnot(atom_rel(
      "E", {Term::param("a", Sort::V), Term::param("b", Sort::V)})));
  Rat after = av_error(*cf, {"a"}, phi, bigger);
  CHECK(after >= before);

  // CubeLebesgue over the measured-interval theory.
  Fragment hf;
  hf.theory = TheoryId::THalfInf;
  hf.add_param("p", Sort::P);
  PPoint pt;
  pt.id = hf.registry->fresh_point_id();
  hf.set_value("p", pt);
  hf.add_param("u", Sort::Q);
  hf.set_value(
      "u", QElemV::pair(0, IntervalUnion::from_pieces({{rat(0), rat(1, 2)}})));
  auto mu = cube_lebesgue_measure("x");
  auto psi = parse_formula("x sqin y", {});  // both sides stay variables
  Rat b0 = av_error(*mu, {"p"}, psi, hf);
  Fragment hf2 = hf;
  hf2.add_param("v", Sort::Q);
  hf2.set_value(
      "v", QElemV::pair(1, IntervalUnion::from_pieces({{rat(0), rat(1, 4)}})));
  Rat b1 = av_error(*mu, {"p"}, psi, hf2);
  CHECK(b1 >= b0);
}

TEST_CASE("approximation sequences are checked stepwise", "[approx]") {
  Fragment frag;
  frag.theory = TheoryId::TR;
  frag.add_param("a", Sort::V);
  frag.set_value("a", VertexRef{"a"});
  frag.add_literal(Formula::lnot(parse_formula("R(a,a,a)", frag.params)));
  auto cf = coin_flip_measure("x");
  ApproxSequenceCheck c;
  c.mu = cf;
  c.eps = rat(1, 2);
  c.phi = parse_formula("R(x, x, y)", frag.params);
  c.chis = {parse_formula("R(x1, x1, x1)", frag.params)};
  auto reports = check_approx_sequence(c, frag);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].n == 1);
  CHECK(reports[0].value == rat(1, 2));
}
