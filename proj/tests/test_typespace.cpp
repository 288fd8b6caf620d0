#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "kmlab/parser.hpp"
#include "kmlab/typespace.hpp"

using namespace kmlab;

namespace {

Fragment tr_one_param() {
  Fragment f;
  f.theory = TheoryId::TR;
  f.add_param("a", Sort::V);
  f.add_literal(Formula::lnot(
      atom_rel("R", {Term::param("a", Sort::V), Term::param("a", Sort::V),
                     Term::param("a", Sort::V)})));
  return f;
}

}  // namespace

TEST_CASE("type counts match combinatorial formulas", "[typespace]") {
  // TR, one variable over |A| = 1: 7 relation atoms mentioning x, plus the
  // equality x = a.  Realized type: 1 (x = a forces the diagram).  Distinct
  // from a: 2^7 sign patterns, all consistent.  Total 129.
  auto fr = tr_one_param();
  auto ts = enumerate_types(fr, {{"x", Sort::V}});
  CHECK(ts.types.size() == 129);

  // Random graph over the empty fragment: one type.
  Fragment rg;
  rg.theory = TheoryId::RandomGraph;
  CHECK(enumerate_types(rg, {{"x", Sort::V}}).types.size() == 1);

  // TR over |A| = 2 with all-negative diagram: (2 + 1)^3 - 2^3 = 19 relation
  // atoms involving x, two equality atoms.  2^19 non-realized + 2 realized.
  Fragment f2;
  f2.theory = TheoryId::TR;
  f2.add_param("b1", Sort::V);
  f2.add_param("b2", Sort::V);
  for (const char* x : {"b1", "b2"})
    for (const char* y : {"b1", "b2"})
      for (const char* z : {"b1", "b2"})
        f2.add_literal(Formula::lnot(
            atom_rel("R", {Term::param(x, Sort::V), Term::param(y, Sort::V),
                           Term::param(z, Sort::V)})));
  auto big = enumerate_types(f2, {{"x", Sort::V}}, 1u << 22);
  CHECK(big.types.size() == 524290);
}

TEST_CASE("Henson types exclude forbidden cliques", "[typespace]") {
  Fragment h;
  h.theory = TheoryId::Henson;
  h.henson_s = 3;
  h.add_param("a", Sort::V);
  h.add_param("b", Sort::V);
  h.add_literal(atom_rel(
      "E", {Term::param("a", Sort::V), Term::param("b", Sort::V)}));
  auto hs = enumerate_types(h, {{"x", Sort::V}});
  auto exa = atom_rel("E", {Term::var("x", Sort::V), Term::param("a", Sort::V)});
  auto exb = atom_rel("E", {Term::var("x", Sort::V), Term::param("b", Sort::V)});
  for (const auto& t : hs.types)
    CHECK_FALSE(type_contains(h, t, Formula::land({exa, exb})));
  CHECK(!hs.types.empty());
}

TEST_CASE("types are exhaustive and duplicate-free", "[typespace]") {
  auto fr = tr_one_param();
  auto ts = enumerate_types(fr, {{"x", Sort::V}});
  std::set<std::string> keys;
  for (const auto& t : ts.types) CHECK(keys.insert(t.key()).second);
  // Clopen partition: every qf formula splits the space with its complement.
  auto phi = parse_formula("R(x, a, a) | !R(x, a, x)", fr.params);
  std::size_t in = 0, out = 0;
  for (const auto& t : ts.types)
    (type_contains(fr, t, phi) ? in : out)++;
  CHECK(in + out == ts.types.size());
  CHECK(in > 0);
  CHECK(out > 0);
}

TEST_CASE("restriction maps onto the subfragment's type space", "[typespace]") {
  auto fr = tr_one_param();

  Fragment sub;
  sub.theory = TheoryId::TR;

  auto full_ts = enumerate_types(fr, {{"x", Sort::V}});
  auto sub_ts = enumerate_types(sub, {{"x", Sort::V}});
  REQUIRE(sub_ts.types.size() == 2);  // R(x,x,x) sign only

  std::set<std::string> hit;
  for (const auto& t : full_ts.types)
    hit.insert(restrict_type(t, sub, fr).key());
  std::set<std::string> want;
  for (const auto& t : sub_ts.types) want.insert(t.key());
  CHECK(hit == want);  // surjective (and well-defined)
}

TEST_CASE("enumeration cap triggers loudly", "[typespace]") {
  Fragment f2;
  f2.theory = TheoryId::TR;
  f2.add_param("b1", Sort::V);
  f2.add_param("b2", Sort::V);
  for (const char* x : {"b1", "b2"})
    for (const char* y : {"b1", "b2"})
      for (const char* z : {"b1", "b2"})
        f2.add_literal(Formula::lnot(
            atom_rel("R", {Term::param(x, Sort::V), Term::param(y, Sort::V),
                           Term::param(z, Sort::V)})));
  CHECK_THROWS_AS(enumerate_types(f2, {{"x", Sort::V}}, 16),
                  std::invalid_argument);
}
