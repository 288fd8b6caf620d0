#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "kmlab/fragment.hpp"
#include "kmlab/formula.hpp"

using namespace kmlab;

namespace {

FormulaPtr eab(const std::string& a, const std::string& b) {
  return atom_rel("E", {Term::param(a, Sort::V), Term::param(b, Sort::V)});
}

}  // namespace

TEST_CASE("params and values", "[fragment]") {
  Fragment f;
  f.theory = TheoryId::RandomGraph;
  f.add_param("a", Sort::V);
  f.add_param("b", Sort::V);
  CHECK_THROWS_AS(f.add_param("a", Sort::Q), std::invalid_argument);
  CHECK(f.param_names(Sort::V) == std::vector<std::string>{"a", "b"});
  CHECK_FALSE(f.has_value("a"));
  f.set_value("a", VertexRef{"a"});
  CHECK(f.has_value("a"));
  CHECK(std::get<VertexRef>(f.value("a")).name == "a");
}

TEST_CASE("fresh_param_name avoids collisions", "[fragment]") {
  Fragment f;
  f.theory = TheoryId::TR;
  f.add_param("w1", Sort::V);
  std::string n = f.fresh_param_name("w");
  CHECK(f.params.count(n) == 0);
  f.add_param(n, Sort::V);
  std::string n2 = f.fresh_param_name("w");
  CHECK(n2 != n);
}

TEST_CASE("diagram lookup sees literals added after the first query",
          "[fragment]") {
  Fragment f;
  f.theory = TheoryId::RandomGraph;
  for (const char* p : {"a", "b", "c"}) f.add_param(p, Sort::V);
  f.add_literal(eab("a", "b"));
  auto q1 = f.diagram_lookup(eab("a", "b"));
  REQUIRE(q1.has_value());
  CHECK(*q1 == true);
  // Index is now built; additions must stay visible.
  f.add_literal(Formula::lnot(eab("a", "c")));
  auto q2 = f.diagram_lookup(eab("a", "c"));
  REQUIRE(q2.has_value());
  CHECK(*q2 == false);
  // E is symmetric: both argument orders resolve.
  auto q3 = f.diagram_lookup(eab("b", "a"));
  REQUIRE(q3.has_value());
  CHECK(*q3 == true);
  // Undetermined atom.
  CHECK_FALSE(f.diagram_lookup(eab("b", "c")).has_value());
}

TEST_CASE("copies answer the same diagram queries", "[fragment]") {
  Fragment f;
  f.theory = TheoryId::RandomGraph;
  f.add_param("a", Sort::V);
  f.add_param("b", Sort::V);
  f.add_literal(eab("a", "b"));
  (void)f.diagram_lookup(eab("a", "b"));  // force the index
  Fragment g = f;
  auto q = g.diagram_lookup(eab("a", "b"));
  REQUIRE(q.has_value());
  CHECK(*q == true);
  g.add_literal(Formula::lnot(eab("a", "a")));
  CHECK(g.diagram_lookup(eab("a", "a")).has_value());
  // The original is unaffected.
  CHECK_FALSE(f.diagram_lookup(eab("a", "a")).has_value());
}

TEST_CASE("theory names round-trip", "[fragment]") {
  for (TheoryId t : {TheoryId::TR, TheoryId::Henson, TheoryId::RandomGraph,
                     TheoryId::THalf, TheoryId::THalfInf, TheoryId::THalfInfPQ}) {
    auto back = theory_from_name(theory_name(t));
    REQUIRE(back.has_value());
    CHECK(*back == t);
  }
  CHECK_FALSE(theory_from_name("unknown").has_value());
}

TEST_CASE("freshness registry", "[fragment]") {
  FreshRegistry reg(42);
  long q0 = reg.fresh_q_index();
  long q1 = reg.fresh_q_index();
  CHECK(q0 != q1);
  reg.reserve_q_index(10);
  CHECK(reg.fresh_q_index() == 11);
  CHECK(reg.fresh_point_id() != reg.fresh_point_id());

  // fresh_value_in: values land in the set and never repeat.
  auto x = IntervalUnion::from_pieces({{rat(0), rat(1, 4)}});
  std::set<std::string> seen;
  for (int i = 0; i < 20; ++i) {
    Rat v = reg.fresh_value_in(x);
    CHECK(x.contains(v));
    CHECK(seen.insert(rat_str(v)).second);
  }
  // Deterministic given the seed and call sequence.
  FreshRegistry r1(7), r2(7);
  for (int i = 0; i < 5; ++i)
    CHECK(r1.fresh_value_in(IntervalUnion::full()) ==
          r2.fresh_value_in(IntervalUnion::full()));
}

TEST_CASE("Q-sort standard values validate", "[fragment]") {
  CHECK_THROWS_AS(QElemV::pair(0, IntervalUnion::empty()),
                  std::invalid_argument);
  CHECK_THROWS_AS(QElemV::pair(0, IntervalUnion::full()),
                  std::invalid_argument);
  auto q = QElemV::pair(3, IntervalUnion::from_pieces({{rat(0), rat(1, 3)}}));
  CHECK(q.ell() == rat(1, 3));
  CHECK(QElemV::botv().ell() == 0);
  CHECK(QElemV::topv().ell() == 1);

  // THalfQ: union of exactly n cells of I_{2n}.
  auto good = THalfQ::make(
      2, IntervalUnion::from_pieces({{rat(0), rat(1, 4)}, {rat(1, 2), rat(3, 4)}}));
  CHECK(good.set.measure() == rat(1, 2));
  // [0,1/2) is cells 0 and 1 of I_4: a legal union of exactly 2 cells.
  CHECK_NOTHROW(
      THalfQ::make(2, IntervalUnion::from_pieces({{rat(0), rat(1, 2)}})));
  CHECK_THROWS_AS(
      THalfQ::make(2, IntervalUnion::from_pieces({{rat(0), rat(1, 8)}})),
      std::invalid_argument);
  CHECK_THROWS_AS(THalfQ::make(0, IntervalUnion::full()),
                  std::invalid_argument);
}
