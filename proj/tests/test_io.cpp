#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "kmlab/io.hpp"

using namespace kmlab;

TEST_CASE("fragment files load every value kind", "[io]") {
  std::istringstream in(R"(# measured-interval fragment
theory thalf-inf
param a P
param b Q
param c Q
param r R
value a point 0:1/10 2:3/4
value b qpair 0 0:1/3
value c qtop
value r rat 1/2
)");
  Fragment f = parse_fragment_text(in);
  CHECK(f.theory == TheoryId::THalfInf);
  CHECK(f.params.size() == 4);
  const auto& a = std::get<PPoint>(f.value("a"));
  CHECK(a.coords->at(0) == rat(1, 10));
  CHECK(a.coords->at(2) == rat(3, 4));
  const auto& b = std::get<QElemV>(f.value("b"));
  CHECK(b.ell() == rat(1, 3));
  CHECK(std::get<QElemV>(f.value("c")).tag == QElemV::TopV);
  CHECK(std::get<Rat>(f.value("r")) == rat(1, 2));
}

TEST_CASE("fragment files load graph diagrams", "[io]") {
  std::istringstream in(R"(theory henson
henson-s 3
param m1 V
param m2 V
literal E(m1, m2)
literal !(m1 = m2)
)");
  Fragment f = parse_fragment_text(in);
  CHECK(f.henson_s == 3);
  auto e = atom_rel("E", {Term::param("m1", Sort::V),
                          Term::param("m2", Sort::V)});
  auto q = f.diagram_lookup(e);
  REQUIRE(q.has_value());
  CHECK(*q == true);
}

TEST_CASE("half-set values validate on load", "[io]") {
  std::istringstream good(R"(theory thalf
param b Q
value b halfq 2 0:1/4 1/2:3/4
)");
  Fragment f = parse_fragment_text(good);
  CHECK(std::get<THalfQ>(f.value("b")).set.measure() == rat(1, 2));
  std::istringstream bad(R"(theory thalf
param b Q
value b halfq 2 0:1/8
)");
  CHECK_THROWS_AS(parse_fragment_text(bad), std::invalid_argument);
}

TEST_CASE("fragment file errors carry line context", "[io]") {
  std::istringstream no_theory("param a V\n");
  CHECK_THROWS_WITH(parse_fragment_text(no_theory),
                    Catch::Matchers::ContainsSubstring("missing theory"));
  std::istringstream bad_sort("theory tr\nparam a Z\n");
  CHECK_THROWS_WITH(parse_fragment_text(bad_sort),
                    Catch::Matchers::ContainsSubstring("line 2"));
  std::istringstream bad_dir("theory tr\nfoo bar\n");
  CHECK_THROWS_AS(parse_fragment_text(bad_dir), std::invalid_argument);
  std::istringstream bad_rat("theory tr\nparam a V\nvalue a rat x/y\n");
  CHECK_THROWS_AS(parse_fragment_text(bad_rat), std::invalid_argument);
}

TEST_CASE("measure specs build the named constructors", "[io]") {
  Fragment fr;
  fr.theory = TheoryId::TR;
  fr.add_param("a", Sort::V);
  fr.add_param("b", Sort::V);

  auto cf = parse_measure_spec("coinflip", fr);
  CHECK(cf->kind == Measure::Kind::CoinFlip);
  CHECK(cf->var == "x");
  auto cf2 = parse_measure_spec("coinflip(y, 1/3)", fr);
  CHECK(cf2->var == "y");
  CHECK(cf2->bias == rat(1, 3));

  auto d = parse_measure_spec("dirac(x, a)", fr);
  CHECK(d->kind == Measure::Kind::Dirac);
  CHECK(std::get<VertexRef>(d->elements[0]).name == "a");

  auto av = parse_measure_spec("average(x, a, b)", fr);
  CHECK(av->kind == Measure::Kind::Average);
  CHECK(av->elements.size() == 2);

  auto cv = parse_measure_spec("convex(1/3, coinflip(x), dirac(x, a))", fr);
  CHECK(cv->kind == Measure::Kind::Convex);
  REQUIRE(cv->weights.size() == 2);
  CHECK(cv->weights[0] == rat(1, 3));
  CHECK(cv->weights[1] == rat(2, 3));

  auto lb = parse_measure_spec("lebesgue", fr);
  CHECK(lb->kind == Measure::Kind::CubeLebesgue);
  auto pt = parse_measure_spec("pairtype(y)", fr);
  CHECK(pt->kind == Measure::Kind::Generic);

  CHECK_THROWS_AS(parse_measure_spec("dirac(x)", fr), std::invalid_argument);
  CHECK_THROWS_AS(parse_measure_spec("dirac(x, zz)", fr),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_measure_spec("nope(x)", fr), std::invalid_argument);
  CHECK_THROWS_AS(parse_measure_spec("coinflip(x, 1/3, 4)", fr),
                  std::invalid_argument);
}

TEST_CASE("scenario files parse names and parameters", "[io]") {
  std::istringstream in(R"(# gap reproduction
scenario ternary-gap
param m 2
param kappa 3
)");
  auto spec = parse_scenario_text(in);
  CHECK(spec.name == "ternary-gap");
  CHECK(spec.params.at("m") == "2");
  CHECK(spec.params.at("kappa") == "3");
  std::istringstream noname("param m 2\n");
  CHECK_THROWS_AS(parse_scenario_text(noname), std::invalid_argument);
}
