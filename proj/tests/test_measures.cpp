#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "kmlab/measures.hpp"
#include "kmlab/parser.hpp"

using namespace kmlab;

namespace {

// TR fragment over {a, b} with a complete random diagram.
Fragment tr_full_diagram(std::mt19937_64& rng) {
  Fragment f;
  f.theory = TheoryId::TR;
  f.add_param("a", Sort::V);
  f.add_param("b", Sort::V);
  for (const char* x : {"a", "b"})
    for (const char* y : {"a", "b"})
      for (const char* z : {"a", "b"}) {
        auto at = atom_rel("R", {Term::param(x, Sort::V),
                                 Term::param(y, Sort::V),
                                 Term::param(z, Sort::V)});
        f.add_literal(rng() % 2 ? at : Formula::lnot(at));
      }
  return f;
}

FormulaPtr random_formula(std::mt19937_64& rng,
                          const std::vector<FormulaPtr>& atoms, int depth) {
  if (depth == 0 || rng() % 4 == 0)
    return atoms[rng() % atoms.size()];
  switch (rng() % 3) {
    case 0:
      return Formula::lnot(random_formula(rng, atoms, depth - 1));
    case 1:
      return Formula::land({random_formula(rng, atoms, depth - 1),
                            random_formula(rng, atoms, depth - 1)});
    default:
      return Formula::lor({random_formula(rng, atoms, depth - 1),
                           random_formula(rng, atoms, depth - 1)});
  }
}

const std::map<std::string, Sort> kVPs{{"a", Sort::V}, {"b", Sort::V}};

}  // namespace

TEST_CASE("coin-flip values on hand examples", "[measures]") {
  Fragment fr;
  fr.theory = TheoryId::TR;
  fr.add_param("a", Sort::V);
  fr.add_param("b", Sort::V);
  auto cf = coin_flip_measure("x");
  CHECK(eval_measure(*cf, parse_formula("R(x,a,a) & !R(x,a,b)", kVPs), fr) ==
        rat(1, 4));
  CHECK(eval_measure(*cf, parse_formula("R(x,a,a) | R(x,a,b)", kVPs), fr) ==
        rat(3, 4));
  // Positive equality atoms are null for the coin-flip measure.
  CHECK(eval_measure(*cf, parse_formula("x = a | R(x,b,b)", kVPs), fr) ==
        rat(1, 2));
  CHECK(eval_measure(*cf, parse_formula("x = a", kVPs), fr) == 0);
  CHECK(eval_measure(*cf, parse_formula("!(x = a)", kVPs), fr) == 1);
}

TEST_CASE("coin-flip law: k distinct positive literals get mass 2^-k",
          "[measures][property]") {
  std::mt19937_64 rng(31);
  Fragment fr;
  fr.theory = TheoryId::TR;
  fr.add_param("a", Sort::V);
  fr.add_param("b", Sort::V);
  std::vector<FormulaPtr> atoms;
  for (const char* y : {"a", "b"})
    for (const char* z : {"a", "b"}) {
      atoms.push_back(parse_formula(std::string("R(x,") + y + "," + z + ")",
                                    kVPs));
      atoms.push_back(parse_formula(std::string("R(") + y + ",x," + z + ")",
                                    kVPs));
    }
  auto cf = coin_flip_measure("x");
  for (int t = 0; t < 60; ++t) {
    std::shuffle(atoms.begin(), atoms.end(), rng);
    std::size_t k = 1 + rng() % atoms.size();
    std::vector<FormulaPtr> lits(atoms.begin(), atoms.begin() + k);
    // Mix in negative literals: j negatives leave mass 2^-k unchanged.
    for (auto& l : lits)
      if (rng() % 3 == 0) l = Formula::lnot(l);
    CHECK(eval_measure(*cf, Formula::land(std::move(lits)), fr) ==
          rat_pow(rat(1, 2), (unsigned long)k));
  }
}

TEST_CASE("independent family measure reproduces its assignments",
          "[measures]") {
  Fragment fr;
  fr.theory = TheoryId::TR;
  fr.add_param("a", Sort::V);
  fr.add_param("b", Sort::V);
  IndependentFamilySpec spec;
  spec.family = {parse_formula("R(x,a,a)", kVPs),
                 parse_formula("R(x,a,b)", kVPs)};
  spec.f = {rat(1, 3), rat(1, 4)};
  auto fam = independent_family_measure(spec, fr);
  CHECK(eval_measure(*fam, parse_formula("R(x,a,a)", kVPs), fr) == rat(1, 3));
  CHECK(eval_measure(*fam, parse_formula("R(x,a,a) & !R(x,a,b)", kVPs), fr) ==
        rat(1, 4));
  CHECK(eval_measure(*fam, parse_formula("R(x,a,a) | R(x,a,b)", kVPs), fr) ==
        rat(1, 2));
}

TEST_CASE("independent family evaluation is normal-form independent",
          "[measures][property]") {
  std::mt19937_64 rng(37);
  Fragment fr;
  fr.theory = TheoryId::TR;
  fr.add_param("a", Sort::V);
  fr.add_param("b", Sort::V);
  IndependentFamilySpec spec;
  spec.family = {parse_formula("R(x,a,a)", kVPs),
                 parse_formula("R(x,a,b)", kVPs),
                 parse_formula("R(x,b,b)", kVPs)};
  spec.f = {rat(1, 3), rat(1, 4), rat(2, 5)};
  auto fam = independent_family_measure(spec, fr);
  for (int t = 0; t < 40; ++t) {
    auto f = random_formula(rng, spec.family, 3);
    // Equivalent rewrites: double negation, De Morgan via DNF.
    auto g = Formula::lnot(Formula::lnot(f));
    auto h = to_dnf(f).to_formula();
    Rat v = eval_measure(*fam, f, fr);
    CHECK(eval_measure(*fam, g, fr) == v);
    CHECK(eval_measure(*fam, h, fr) == v);
  }
}

TEST_CASE("cube measure on membership atoms", "[measures]") {
  Fragment hf;
  hf.theory = TheoryId::THalfInf;
  hf.add_param("u", Sort::Q);
  hf.add_param("v", Sort::Q);
  hf.set_value(
      "u", QElemV::pair(0, IntervalUnion::from_pieces({{rat(0), rat(1, 2)}})));
  hf.set_value(
      "v", QElemV::pair(1, IntervalUnion::from_pieces({{rat(0), rat(1, 2)}})));
  std::map<std::string, Sort> qs{{"u", Sort::Q}, {"v", Sort::Q}};
  auto mu = cube_lebesgue_measure("x");
  CHECK(eval_measure(*mu, parse_formula("x sqin u & x sqin v", qs), hf) ==
        rat(1, 4));
  // eval(x sqin b) = l(b) for every Q element of the fragment.
  for (const char* b : {"u", "v"}) {
    auto phi = parse_formula(std::string("x sqin ") + b, qs);
    CHECK(eval_measure(*mu, phi, hf) ==
          std::get<QElemV>(hf.value(b)).ell());
  }
}

TEST_CASE("convex combinations mix componentwise", "[measures]") {
  Fragment fr;
  fr.theory = TheoryId::TR;
  fr.add_param("a", Sort::V);
  fr.add_param("b", Sort::V);
  fr.add_literal(Formula::lnot(parse_formula("R(a,a,a)", kVPs)));
  auto cf = coin_flip_measure("x");
  auto da = dirac_measure(VertexRef{"a"}, "x", Sort::V);
  auto cv = convex_combine({rat(1, 3), rat(2, 3)}, {cf, da});
  CHECK(eval_measure(*cv, parse_formula("R(x,a,a)", kVPs), fr) == rat(1, 6));
  CHECK_THROWS_AS(convex_combine({rat(1, 2), rat(1, 3)}, {cf, da}),
                  std::invalid_argument);  // weights must sum to 1
}

TEST_CASE("finite additivity and complements for every variant",
          "[measures][property]") {
  std::mt19937_64 rng(41);
  Fragment fr = tr_full_diagram(rng);
  std::vector<FormulaPtr> atoms;
  for (const char* y : {"a", "b"})
    for (const char* z : {"a", "b"})
      atoms.push_back(
          parse_formula(std::string("R(x,") + y + "," + z + ")", kVPs));

  IndependentFamilySpec spec;
  spec.family = {atoms[0], atoms[1]};
  spec.f = {rat(1, 3), rat(1, 4)};

  std::vector<MeasurePtr> variants = {
      coin_flip_measure("x"),
      dirac_measure(VertexRef{"a"}, "x", Sort::V),
      average_measure({VertexRef{"a"}, VertexRef{"b"}}, "x", Sort::V),
      independent_family_measure(spec, fr),
      convex_combine({rat(1, 2), rat(1, 2)},
                     {coin_flip_measure("x"),
                      dirac_measure(VertexRef{"b"}, "x", Sort::V)})};

  for (const auto& m : variants) {
    // The independent-family measure is defined on the subalgebra its family
    // generates; restrict its random pool accordingly.
    const auto& pool =
        m->kind == Measure::Kind::IndepFamily ? spec.family : atoms;
    CHECK(eval_measure(*m, Formula::truef(), fr) == 1);
    CHECK(eval_measure(*m, Formula::falsef(), fr) == 0);
    for (int t = 0; t < 25; ++t) {
      auto f = random_formula(rng, pool, 2);
      auto g = random_formula(rng, pool, 2);
      Rat vf = eval_measure(*m, f, fr);
      Rat vg = eval_measure(*m, g, fr);
      CHECK(eval_measure(*m, Formula::lnot(f), fr) == 1 - vf);
      CHECK(eval_measure(*m, Formula::lor({f, g}), fr) +
                eval_measure(*m, Formula::land({f, g}), fr) ==
            vf + vg);
    }
  }
}

TEST_CASE("schema measures require a partition", "[measures]") {
  Fragment fr;
  fr.theory = TheoryId::TR;
  fr.add_param("a", Sort::V);
  fr.add_literal(Formula::lnot(parse_formula("R(a,a,a)", {{"a", Sort::V}})));
  // Pattern R(x, y1, y1); value depends on whether R(y1,y1,y1) holds.
  // Pattern and guards keep y1 as a free variable so instantiation can
  // substitute fragment parameters for it.
  auto pattern = parse_formula("R(x, y1, y1)", {});
  auto g1 = parse_formula("R(y1, y1, y1)", {});
  auto g2 = parse_formula("!R(y1, y1, y1)", {});
  auto m = make_schema_measure(fr, pattern, "x", Sort::V, {{"y1", Sort::V}},
                               {{g1, rat(1, 3)}, {g2, rat(2, 3)}});
  CHECK(eval_measure(*m, parse_formula("R(x, a, a)", {{"a", Sort::V}}), fr) ==
        rat(2, 3));
  // Overlapping guards are rejected at construction.
  CHECK_THROWS_AS(
      make_schema_measure(fr, pattern, "x", Sort::V, {{"y1", Sort::V}},
                          {{g1, rat(1, 2)}, {g1, rat(1, 2)}}),
      std::invalid_argument);
  // Non-covering guards are rejected.
  CHECK_THROWS_AS(make_schema_measure(fr, pattern, "x", Sort::V,
                                      {{"y1", Sort::V}}, {{g1, rat(1, 2)}}),
                  std::invalid_argument);
}

TEST_CASE("independence violations are detected", "[measures]") {
  Fragment fr;
  fr.theory = TheoryId::TR;
  fr.add_param("a", Sort::V);
  std::map<std::string, Sort> ps{{"a", Sort::V}};
  auto f1 = parse_formula("R(x,a,a)", ps);
  IndependentFamilySpec spec;
  spec.family = {f1, f1};  // a member implies (equals) another: not independent
  spec.f = {rat(1, 3), rat(1, 4)};
  CHECK_THROWS_AS(independent_family_measure(spec, fr), std::invalid_argument);
}
