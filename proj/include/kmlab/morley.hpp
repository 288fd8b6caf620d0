#pragma once

// Morley products, powers, pattern products, and the commutativity /
// associativity checkers.  The product is order-sensitive: (mu (x) nu)(phi)
// integrates the fiber function F^phi_mu over nu, i.e. the right factor is
// integrated first.  Powers follow the convention
// mu^(n+1) = mu_{x_{n+1}} (x) mu^(n), so x_1 is integrated outermost.

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kmlab/measures.hpp"
#include "kmlab/typespace.hpp"

namespace kmlab {

struct Report {
  bool equal = true;
  FormulaPtr formula;  // first counterexample
  Rat left = 0, right = 0;
  std::string label;
};

namespace detail {

// Integrates g over the measure m in its own variable at fragment scale:
// sum/average over elements for element-backed measures, realization for
// types, complete-type summation for the remaining relational variants.
// g receives a term denoting the integration variable's value and the
// fragment in which that term is meaningful.
inline Rat integrate_fragment(
    const Measure& m, const Fragment& frag,
    const std::function<Rat(const TermPtr&, const Fragment&)>& g) {
  switch (m.kind) {
    case Measure::Kind::Dirac:
    case Measure::Kind::Average: {
      Rat total = 0;
      for (const auto& e : m.elements) {
        if (const auto* vr = std::get_if<VertexRef>(&e)) {
          total += g(Term::param(vr->name, Sort::V), frag);
        } else {
          Fragment ext = frag;
          std::string pn = ext.fresh_param_name("el");
          ext.add_param(pn, m.sort);
          ext.set_value(pn, e);
          total += g(Term::param(pn, m.sort), ext);
        }
      }
      return total / (long)m.elements.size();
    }
    case Measure::Kind::DiracType: {
      auto r = realize_in_standard_model(frag, m.type->formula());
      if (!r)
        throw std::invalid_argument("integrate: type not realizable over fragment");
      const StdValue& v = r->assign.at(m.var);
      if (const auto* vr = std::get_if<VertexRef>(&v))
        return g(Term::param(vr->name, Sort::V), r->extended);
      Fragment ext = r->extended;
      std::string pn = ext.fresh_param_name("el");
      ext.add_param(pn, m.sort);
      ext.set_value(pn, v);
      return g(Term::param(pn, m.sort), ext);
    }
    case Measure::Kind::Generic: {
      if (!m.realizer)
        throw std::invalid_argument(
            "integrate: generic measure " + m.name + " has no realizer");
      Fragment ext = frag;
      std::string pn = m.realizer(ext);
      return g(Term::param(pn, ext.params.at(pn)), ext);
    }
    case Measure::Kind::Convex: {
      Rat total = 0;
      for (std::size_t i = 0; i < m.components.size(); ++i)
        if (m.weights[i] != 0)
          total += m.weights[i] * integrate_fragment(*m.components[i], frag, g);
      return total;
    }
    case Measure::Kind::CoinFlip: {
      if (!is_relational(frag.theory))
        throw std::invalid_argument(
            "integrate: type-space summation needs a relational theory");
      // A complete type's mass is a product of per-atom factors, and each
      // enumerated type is already a consistent diagram, so the witness can
      // be written down directly instead of re-searching for one.
      auto space = enumerate_types(frag, {{m.var, m.sort}});
      // Every enumerated type shares the same canonical atom order, and the
      // witness parameter gets the same fresh name on each identical copy of
      // frag, so the substituted literals can be built once up front.
      std::string wn = frag.fresh_param_name("w");
      std::vector<FormulaPtr> lit_pos, lit_neg;
      if (!space.types.empty()) {
        std::map<std::string, TermPtr> repl{
            {m.var, Term::param(wn, Sort::V)}};
        for (const auto& a : space.types[0].atoms) {
          if (a->atom == AtomKind::Rel) {
            FormulaPtr s = subst(a, repl);
            lit_pos.push_back(s);
            lit_neg.push_back(Formula::lnot(s));
          } else {
            lit_pos.push_back(nullptr);
            lit_neg.push_back(nullptr);
          }
        }
      }
      auto piece = [&](std::size_t lo, std::size_t hi) -> Rat {
        Rat total = 0;
        for (std::size_t ti = lo; ti < hi; ++ti) {
          const auto& q = space.types[ti];
          Rat w = 1;
          bool null = false;
          std::size_t pos = 0, neg = 0;
          for (std::size_t i = 0; i < q.atoms.size(); ++i) {
            if (q.atoms[i]->atom == AtomKind::Eq) {
              if (q.bits[i]) { null = true; break; }  // x = a: measure zero
            } else {
              (q.bits[i] ? pos : neg) += 1;
            }
          }
          if (null) continue;
          w = rat_pow(m.bias, pos) * rat_pow(1 - m.bias, neg);
          if (w == 0) continue;
          Fragment ext = frag;
          // Isolate freshness state per witness so chunks are independent
          // (and iteration-order independent: exact sums commute).
          ext.registry = std::make_shared<FreshRegistry>(*ext.registry);
          ext.add_param(wn, Sort::V);
          for (std::size_t i = 0; i < q.atoms.size(); ++i) {
            if (!lit_pos[i]) continue;  // equality atom: bit already vetted
            ext.add_literal(q.bits[i] ? lit_pos[i] : lit_neg[i]);
          }
          total += w * g(Term::param(wn, Sort::V), ext);
        }
        return total;
      };
      std::size_t n = space.types.size();
      std::size_t workers = std::thread::hardware_concurrency();
      if (workers < 2 || n < 4096) return piece(0, n);
      workers = std::min<std::size_t>(workers, 16);
      std::vector<Rat> parts(workers, Rat(0));
      std::vector<std::thread> pool;
      for (std::size_t wi = 0; wi < workers; ++wi)
        pool.emplace_back([&, wi] {
          parts[wi] = piece(n * wi / workers, n * (wi + 1) / workers);
        });
      for (auto& t : pool) t.join();
      Rat total = 0;
      for (const auto& p : parts) total += p;
      return total;
    }
    case Measure::Kind::IndepFamily:
    case Measure::Kind::Schema: {
      if (!is_relational(frag.theory))
        throw std::invalid_argument(
            "integrate: type-space summation needs a relational theory");
      auto space = enumerate_types(frag, {{m.var, m.sort}});
      Rat total = 0;
      for (const auto& q : space.types) {
        Rat w = eval_measure(m, q.formula(), frag);
        if (w == 0) continue;
        auto r = realize_in_standard_model(frag, q.formula());
        if (!r)
          throw std::logic_error("integrate: enumerated type not realizable");
        const auto& vr = std::get<VertexRef>(r->assign.at(m.var));
        total += w * g(Term::param(vr.name, Sort::V), r->extended);
      }
      return total;
    }
    case Measure::Kind::CubeLebesgue:
      throw std::invalid_argument(
          "integrate: cube-lebesgue admits no pointwise integration; "
          "use the symbolic-fiber product strategy");
  }
  throw std::logic_error("integrate: unknown measure kind");
}

}  // namespace detail

// (left (x) right)(phi), phi quantifier-free in the two object variables.
inline Rat morley_product_eval(const Measure& left, const Measure& right,
                               const FormulaPtr& phi, const Fragment& frag) {
  if (left.var == right.var)
    throw std::invalid_argument("morley product: factors share a variable");
  for (const auto& [n, s] : free_vars(phi)) {
    if ((n == left.var && s == left.sort) || (n == right.var && s == right.sort))
      continue;
    throw std::invalid_argument("morley product: stray free variable " + n);
  }
  // Symbolic-fiber strategy: when the left factor is a rule-driven type with
  // a {0,1}-valued definable fiber, F^phi reduces to a quantifier-free
  // condition on the right variable and the product is the right measure of
  // that condition.  Required against cube-lebesgue, preferred against the
  // other diffuse measures.
  bool diffuse = right.kind == Measure::Kind::CubeLebesgue ||
                 right.kind == Measure::Kind::CoinFlip ||
                 right.kind == Measure::Kind::IndepFamily;
  if (diffuse && left.kind == Measure::Kind::Generic && left.fiber) {
    FormulaPtr fib = left.fiber(phi, right.var, frag);
    return eval_measure(right, fib, frag);
  }
  if (right.kind == Measure::Kind::CubeLebesgue)
    throw std::invalid_argument(
        "morley product: no strategy for this left factor against "
        "cube-lebesgue");
  return detail::integrate_fragment(
      right, frag, [&](const TermPtr& b, const Fragment& ext) {
        return eval_measure(left, subst(phi, {{right.var, b}}), ext);
      });
}

// mu^(n) evaluated on phi(x_1..x_n): integrates x_1 outermost, per the
// mu^(n+1) = mu_{x_{n+1}} (x) mu^(n) convention.  vars[i] names x_{i+1};
// the per-step measure is measures[i] (all equal for a plain power).
inline Rat sequential_product_eval(const std::vector<MeasurePtr>& measures,
                                   const std::vector<std::string>& vars,
                                   const FormulaPtr& phi, const Fragment& frag,
                                   std::size_t i = 0) {
  if (measures.size() != vars.size() || measures.empty())
    throw std::invalid_argument("sequential product: size mismatch");
  const Measure& m = *measures[i];
  if (i + 1 == measures.size()) {
    FormulaPtr inst = subst(phi, {{vars[i], Term::var(m.var, m.sort)}});
    return eval_measure(m, inst, frag);
  }
  return detail::integrate_fragment(
      m, frag, [&](const TermPtr& b, const Fragment& ext) {
        return sequential_product_eval(measures, vars,
                                       subst(phi, {{vars[i], b}}), ext, i + 1);
      });
}

inline std::vector<std::string> power_vars(std::size_t n,
                                           const std::string& stem = "x") {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

// mu^(n) on phi over x1..xn.
inline Rat power_eval(const MeasurePtr& mu, std::size_t n, const FormulaPtr& phi,
                      const Fragment& frag,
                      const std::vector<std::string>& vars = {}) {
  if (n < 1) throw std::invalid_argument("power_eval: n must be >= 1");
  auto vs = vars.empty() ? power_vars(n) : vars;
  if (vs.size() != n) throw std::invalid_argument("power_eval: variable count");
  for (const auto& [fn, s] : free_vars(phi)) {
    (void)s;
    if (std::find(vs.begin(), vs.end(), fn) == vs.end())
      throw std::invalid_argument("power_eval: stray free variable " + fn);
  }
  return sequential_product_eval(std::vector<MeasurePtr>(n, mu), vs, phi, frag);
}

// lambda_{n,X} = (x)_i (mu if i in X else nu), indices 1-based.
inline Rat pattern_product_eval(const std::set<std::size_t>& X,
                                const MeasurePtr& mu, const MeasurePtr& nu,
                                std::size_t n, const FormulaPtr& phi,
                                const Fragment& frag,
                                const std::vector<std::string>& vars = {}) {
  if (n < 1) throw std::invalid_argument("pattern_product_eval: n must be >= 1");
  for (auto i : X)
    if (i < 1 || i > n)
      throw std::invalid_argument("pattern_product_eval: index outside [n]");
  auto vs = vars.empty() ? power_vars(n) : vars;
  std::vector<MeasurePtr> ms;
  for (std::size_t i = 1; i <= n; ++i) ms.push_back(X.count(i) ? mu : nu);
  return sequential_product_eval(ms, vs, phi, frag);
}

// ---------------------------------------------------------------------------
// Commutativity / associativity checkers

inline Report check_commute(const Measure& mu, const Measure& nu,
                            const Fragment& frag,
                            const std::vector<FormulaPtr>& pool) {
  if (pool.empty()) throw std::invalid_argument("check_commute: empty pool");
  for (const auto& phi : pool) {
    Rat a = morley_product_eval(mu, nu, phi, frag);
    Rat b = morley_product_eval(nu, mu, phi, frag);
    if (a != b) {
      Report r;
      r.equal = false;
      r.formula = phi;
      r.left = a;
      r.right = b;
      r.label = "commute";
      return r;
    }
  }
  Report r;
  r.label = "commute";
  return r;
}

// ((mu (x) nu) (x) lam) versus (mu (x) (nu (x) lam)) on phi(x, y, z), where
// mu, nu, lam sit in variables x, y, z respectively.
inline Rat assoc_left_eval(const Measure& mu, const Measure& nu,
                           const Measure& lam, const FormulaPtr& phi,
                           const Fragment& frag) {
  // Integrate z over lam, then evaluate the inner product.
  return detail::integrate_fragment(
      lam, frag, [&](const TermPtr& c, const Fragment& ext) {
        return morley_product_eval(mu, nu, subst(phi, {{lam.var, c}}), ext);
      });
}

inline Rat assoc_right_eval(const Measure& mu, const Measure& nu,
                            const Measure& lam, const FormulaPtr& phi,
                            const Fragment& frag) {
  // (nu (x) lam) is a measure on (y,z)-tuples; integrating any function f
  // against it means: z over lam outermost, then y over nu at the extended
  // fragment.  Then mu evaluates the remaining x-formula.
  return detail::integrate_fragment(
      lam, frag, [&](const TermPtr& c, const Fragment& ext1) {
        return detail::integrate_fragment(
            nu, ext1, [&](const TermPtr& b, const Fragment& ext2) {
              return eval_measure(
                  mu, subst(phi, {{lam.var, c}, {nu.var, b}}), ext2);
            });
      });
}

inline Report check_assoc(const Measure& mu, const Measure& nu,
                          const Measure& lam, const Fragment& frag,
                          const std::vector<FormulaPtr>& pool) {
  if (pool.empty()) throw std::invalid_argument("check_assoc: empty pool");
  for (const auto& phi : pool) {
    Rat a = assoc_left_eval(mu, nu, lam, phi, frag);
    Rat b = assoc_right_eval(mu, nu, lam, phi, frag);
    if (a != b) {
      Report r;
      r.equal = false;
      r.formula = phi;
      r.left = a;
      r.right = b;
      r.label = "assoc";
      return r;
    }
  }
  Report r;
  r.label = "assoc";
  return r;
}

}  // namespace kmlab
