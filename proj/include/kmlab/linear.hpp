#pragma once

// Exact feasibility and sample extraction for conjunctions of rational linear
// equalities and (strict or non-strict) inequalities.  Used by the
// standard-model solvers and by test oracles.  Works by variable elimination
// with back-substitution: equalities are substituted out first, remaining
// bounds are combined pairwise, and on the way back each variable is placed
// at the midpoint of its residual interval.

#include <map>
#include <optional>
#include <vector>

#include "kmlab/rational.hpp"

namespace kmlab {

// Constraint: sum coeffs[i]*x_i + constant  OP  0.
struct LinConstraint {
  enum Op { EQ, LE, LT } op = EQ;
  std::map<int, Rat> coeffs;
  Rat constant = 0;

  void add_coeff(int var, const Rat& c) {
    auto [it, fresh] = coeffs.try_emplace(var, c);
    if (!fresh) it->second += c;
    if (it->second == 0) coeffs.erase(it);
  }
};

namespace detail {

inline bool constraint_trivially_ok(const LinConstraint& c) {
  switch (c.op) {
    case LinConstraint::EQ: return c.constant == 0;
    case LinConstraint::LE: return c.constant <= 0;
    case LinConstraint::LT: return c.constant < 0;
  }
  return false;
}

}  // namespace detail

// Returns values for x_0..x_{nvars-1} satisfying all constraints, or nullopt
// if the system is infeasible.  Variables not mentioned get 0.
inline std::optional<std::vector<Rat>> lin_feasible_sample(
    std::vector<LinConstraint> cons, int nvars) {
  if (nvars == 0) {
    for (const auto& c : cons)
      if (!detail::constraint_trivially_ok(c)) return std::nullopt;
    return std::vector<Rat>{};
  }
  int v = nvars - 1;

  // Split off the constraints mentioning v.
  std::vector<LinConstraint> rest, with_v;
  for (auto& c : cons)
    (c.coeffs.count(v) ? with_v : rest).push_back(std::move(c));

  if (with_v.empty()) {
    auto sol = lin_feasible_sample(std::move(rest), v);
    if (!sol) return std::nullopt;
    sol->push_back(0);
    return sol;
  }

  // Prefer substituting v out of an equality.
  for (std::size_t i = 0; i < with_v.size(); ++i) {
    if (with_v[i].op != LinConstraint::EQ) continue;
    LinConstraint eq = with_v[i];
    Rat a = eq.coeffs[v];  // a*v + (rest of eq) = 0  =>  v = -(rest)/a
    for (std::size_t j = 0; j < with_v.size(); ++j) {
      if (j == i) continue;
      LinConstraint c = with_v[j];
      Rat b = c.coeffs[v];
      c.coeffs.erase(v);
      // c + (b/a)*(-eq) eliminates v.
      Rat f = b / a;
      for (const auto& [k, ec] : eq.coeffs)
        if (k != v) c.add_coeff(k, -f * ec);
      c.constant -= f * eq.constant;
      rest.push_back(std::move(c));
    }
    auto sol = lin_feasible_sample(std::move(rest), v);
    if (!sol) return std::nullopt;
    Rat val = -eq.constant;
    for (const auto& [k, ec] : eq.coeffs)
      if (k != v) val -= ec * (*sol)[k];
    val /= a;
    sol->push_back(val);
    return sol;
  }

  // Fourier–Motzkin style combination of lower and upper bounds on v.
  // Each inequality with coefficient a on v:  a*v + e OP 0.
  //   a > 0: v OP' -e/a  (upper bound);  a < 0: v OP' -e/a (lower bound).
  struct Bound {
    LinConstraint expr;  // coeffs/constant of -e/a over the other variables
    bool strict;
  };
  std::vector<Bound> lowers, uppers;
  for (auto& c : with_v) {
    Rat a = c.coeffs[v];
    LinConstraint e;  // -e/a
    for (const auto& [k, cc] : c.coeffs)
      if (k != v) e.add_coeff(k, -cc / a);
    e.constant = -c.constant / a;
    Bound b{std::move(e), c.op == LinConstraint::LT};
    (a > 0 ? uppers : lowers).push_back(std::move(b));
  }
  for (const auto& lo : lowers)
    for (const auto& up : uppers) {
      // lo.expr (<= or <) v (<= or <) up.expr  =>  lo.expr OP up.expr.
      LinConstraint c;
      c.op = (lo.strict || up.strict) ? LinConstraint::LT : LinConstraint::LE;
      for (const auto& [k, cc] : lo.expr.coeffs) c.add_coeff(k, cc);
      for (const auto& [k, cc] : up.expr.coeffs) c.add_coeff(k, -cc);
      c.constant = lo.expr.constant - up.expr.constant;
      rest.push_back(std::move(c));
    }
  auto sol = lin_feasible_sample(std::move(rest), v);
  if (!sol) return std::nullopt;

  auto eval = [&](const LinConstraint& e) {
    Rat r = e.constant;
    for (const auto& [k, cc] : e.coeffs) r += cc * (*sol)[k];
    return r;
  };
  std::optional<Rat> best_lo, best_up;
  bool lo_strict = false, up_strict = false;
  for (const auto& b : lowers) {
    Rat r = eval(b.expr);
    if (!best_lo || r > *best_lo || (r == *best_lo && b.strict)) {
      if (!best_lo || r > *best_lo) lo_strict = b.strict;
      else lo_strict = lo_strict || b.strict;
      best_lo = r;
    }
  }
  for (const auto& b : uppers) {
    Rat r = eval(b.expr);
    if (!best_up || r < *best_up || (r == *best_up && b.strict)) {
      if (!best_up || r < *best_up) up_strict = b.strict;
      else up_strict = up_strict || b.strict;
      best_up = r;
    }
  }
  Rat val;
  if (best_lo && best_up) {
    if (*best_lo > *best_up) return std::nullopt;               // cannot happen
    if (*best_lo == *best_up && (lo_strict || up_strict)) return std::nullopt;
    val = (*best_lo + *best_up) / 2;
    if (!lo_strict && val < *best_lo) val = *best_lo;           // degenerate
    if (*best_lo == *best_up) val = *best_lo;
  } else if (best_lo) {
    val = lo_strict ? *best_lo + 1 : *best_lo;
  } else if (best_up) {
    val = up_strict ? *best_up - 1 : *best_up;
  } else {
    val = 0;
  }
  sol->push_back(val);
  return sol;
}

}  // namespace kmlab
