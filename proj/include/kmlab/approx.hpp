#pragma once

// Average-approximation machinery: Av-set errors, tuple search, approximation
// sequences, Chebyshev/binomial concentration bounds, and the convexity
// identity for pattern products of a convex combination.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmlab/morley.hpp"

namespace kmlab {

// ---------------------------------------------------------------------------
// Parameter-instance enumeration.  The sup over monster-model parameters is
// realized as a max over parameter instances representable in the fragment:
// every complete parameter type for relational theories, every named lattice
// element for the half-measure theories, and for point parameters one fresh
// point per nonempty cell of the Boolean algebra the fragment's lattice
// elements generate (membership atoms are constant on cells, so the max over
// cells is the max over all points).

struct ParamInstance {
  TermPtr term;
  Fragment frag;
};

namespace detail {

inline std::vector<ParamInstance> instances_relational(const Fragment& frag,
                                                       const std::string& pvar) {
  auto space = enumerate_types(frag, {{pvar, Sort::V}});
  std::vector<ParamInstance> out;
  for (const auto& t : space.types) {
    auto r = realize_in_standard_model(frag, t.formula());
    if (!r) continue;  // types inconsistent with the theory cannot occur
    const auto& vr = std::get<VertexRef>(r->assign.at(pvar));
    out.push_back({Term::param(vr.name, Sort::V), r->extended});
  }
  return out;
}

inline std::vector<ParamInstance> instances_points(const Fragment& frag) {
  std::vector<ParamInstance> out;
  // Existing named points first.
  for (const auto& [n, s] : frag.params)
    if (s == Sort::P && frag.has_value(n))
      out.push_back({Term::param(n, Sort::P), frag});
  if (frag.theory == TheoryId::THalf) {
    // Cells of the algebra generated by the fragment's sets.
    std::vector<IntervalUnion> sets;
    for (const auto& [n, v] : frag.values)
      if (const auto* q = std::get_if<THalfQ>(&v)) sets.push_back(q->set);
    if (sets.size() > 12)
      throw std::invalid_argument("parameter instances: too many sets");
    for (unsigned long mask = 0; mask < (1ul << sets.size()); ++mask) {
      IntervalUnion cell = IntervalUnion::full();
      for (std::size_t i = 0; i < sets.size(); ++i)
        cell = cell.intersect((mask >> i) & 1 ? sets[i]
                                              : sets[i].complement());
      if (cell.is_empty()) continue;
      Fragment ext = frag;
      std::string pn = ext.fresh_param_name("pt");
      ext.add_param(pn, Sort::P);
      ext.set_value(pn, ext.registry->fresh_value_in(cell));
      out.push_back({Term::param(pn, Sort::P), std::move(ext)});
    }
    return out;
  }
  if (frag.theory == TheoryId::THalfInf || frag.theory == TheoryId::THalfInfPQ) {
    // Proper pairs grouped by index; coordinates at distinct indices are
    // independent, so instances are products of per-index cell choices.
    std::map<long, std::vector<IntervalUnion>> by_index;
    for (const auto& [n, v] : frag.values)
      if (const auto* q = std::get_if<QElemV>(&v))
        if (q->tag == QElemV::PairV) by_index[q->index].push_back(q->set);
    std::vector<std::pair<long, std::vector<IntervalUnion>>> idx_cells;
    for (auto& [k, sets] : by_index) {
      if (sets.size() > 12)
        throw std::invalid_argument("parameter instances: too many sets");
      std::vector<IntervalUnion> cells;
      for (unsigned long mask = 0; mask < (1ul << sets.size()); ++mask) {
        IntervalUnion cell = IntervalUnion::full();
        for (std::size_t i = 0; i < sets.size(); ++i)
          cell = cell.intersect((mask >> i) & 1 ? sets[i]
                                                : sets[i].complement());
        if (!cell.is_empty()) cells.push_back(cell);
      }
      idx_cells.push_back({k, std::move(cells)});
    }
    std::size_t count = 1;
    for (const auto& [k, cells] : idx_cells) {
      count *= cells.size();
      if (count > 4096)
        throw std::invalid_argument("parameter instances: cell product too large");
    }
    for (std::size_t code = 0; code < count; ++code) {
      Fragment ext = frag;
      PPoint p;
      p.id = ext.registry->fresh_point_id();
      p.coords = std::make_shared<std::map<long, Rat>>();
      std::size_t rest = code;
      for (const auto& [k, cells] : idx_cells) {
        const IntervalUnion& cell = cells[rest % cells.size()];
        rest /= cells.size();
        (*p.coords)[k] = ext.registry->fresh_value_in(cell);
      }
      std::string pn = ext.fresh_param_name("pt");
      ext.add_param(pn, Sort::P);
      ext.set_value(pn, std::move(p));
      out.push_back({Term::param(pn, Sort::P), std::move(ext)});
    }
    return out;
  }
  return out;
}

inline void term_leaves(const TermPtr& t, std::set<std::string>& out) {
  if (t->kind == TermKind::Var || t->kind == TermKind::Param ||
      t->kind == TermKind::Ident)
    out.insert(t->name);
  for (const auto& k : t->kids) term_leaves(k, out);
}

// Every atom mentioning pvar mentions nothing but pvar and mvar.
inline bool point_atoms_local(const FormulaPtr& f, const std::string& pvar,
                              const std::string& mvar) {
  if (f->kind == FormKind::Atom) {
    std::set<std::string> names;
    for (const auto& a : f->args) term_leaves(a, names);
    if (!names.count(pvar)) return true;
    for (const auto& n : names)
      if (n != pvar && n != mvar) return false;
    return true;
  }
  for (const auto& k : f->kids)
    if (!point_atoms_local(k, pvar, mvar)) return false;
  return true;
}

}  // namespace detail

inline std::vector<ParamInstance> parameter_instances(const Fragment& frag,
                                                      const std::string& pvar,
                                                      Sort psort) {
  switch (psort) {
    case Sort::V:
      return detail::instances_relational(frag, pvar);
    case Sort::P:
      return detail::instances_points(frag);
    case Sort::Q: {
      std::vector<ParamInstance> out;
      for (const auto& [n, s] : frag.params)
        if (s == Sort::Q) out.push_back({Term::param(n, Sort::Q), frag});
      return out;
    }
    default:
      throw std::invalid_argument("parameter_instances: unsupported sort");
  }
}

// ---------------------------------------------------------------------------
// Av-set error

namespace detail {

// Exact av_error over measured-interval point parameters when the per-index
// cell product is too large to enumerate directly.  Applies when every atom
// mentioning the point variable relates it only to the integration variable:
// then each individual evaluation grounds the integration variable to one
// lattice element, so it reads the point's coordinate at a single fiber
// index.  Tuple-member averages therefore decompose as a sum of independent
// per-index contributions, and the measure value is an additive aggregation
// of single-index functions, so verifying it is constant across all
// one-index variations verifies it is constant outright.  The extreme
// achievable averages are then per-index sums of extremes.  Returns nullopt
// when the preconditions fail or the direct enumeration fits.
inline std::optional<Rat> av_error_point_factored(
    const Measure& mu, const std::vector<std::string>& abar,
    const FormulaPtr& phi, const Fragment& frag, const std::string& pvar) {
  std::map<long, std::vector<IntervalUnion>> by_index;
  for (const auto& [n, v] : frag.values)
    if (const auto* q = std::get_if<QElemV>(&v))
      if (q->tag == QElemV::PairV) by_index[q->index].push_back(q->set);
  std::map<long, std::vector<IntervalUnion>> cells_by_index;
  std::size_t count = 1;
  bool overflow = false;
  for (auto& [k, sets] : by_index) {
    if (sets.size() > 12) return std::nullopt;
    std::vector<IntervalUnion> cells;
    for (unsigned long mask = 0; mask < (1ul << sets.size()); ++mask) {
      IntervalUnion cell = IntervalUnion::full();
      for (std::size_t i = 0; i < sets.size(); ++i)
        cell = cell.intersect((mask >> i) & 1 ? sets[i]
                                              : sets[i].complement());
      if (!cell.is_empty()) cells.push_back(cell);
    }
    if (count > 4096 / std::max<std::size_t>(cells.size(), 1))
      overflow = true;
    else
      count *= cells.size();
    cells_by_index[k] = std::move(cells);
  }
  if (!overflow) return std::nullopt;  // the direct enumeration fits
  if (!point_atoms_local(phi, pvar, mu.var)) return std::nullopt;

  auto make_ext = [&](std::optional<long> idx, const IntervalUnion* cell,
                      std::string& pn_out) {
    Fragment ext = frag;
    PPoint p;
    p.id = ext.registry->fresh_point_id();
    p.coords = std::make_shared<std::map<long, Rat>>();
    if (idx) (*p.coords)[*idx] = ext.registry->fresh_value_in(*cell);
    pn_out = ext.fresh_param_name("pt");
    ext.add_param(pn_out, Sort::P);
    ext.set_value(pn_out, std::move(p));
    return ext;
  };

  std::string pn0;
  Fragment ext0 = make_ext(std::nullopt, nullptr, pn0);
  FormulaPtr inst0 = subst(phi, {{pvar, Term::param(pn0, Sort::P)}});
  Rat m = eval_measure(mu, inst0, ext0);

  // Members at a proper pair index vary with that index's cell; the rest
  // (bot/top and non-lattice values) are instance-independent.
  long nconst = 0;
  std::map<long, std::vector<std::string>> members;
  for (const auto& nm : abar) {
    const StdValue& v = frag.value(nm);
    const auto* q = std::get_if<QElemV>(&v);
    if (q && q->tag == QElemV::PairV) {
      members[q->index].push_back(nm);
    } else {
      Assignment a{{mu.var, v}};
      if (eval_qf(ext0, inst0, a)) ++nconst;
    }
  }

  Rat lo_sum = 0, hi_sum = 0;
  for (const auto& [k, names] : members) {
    std::optional<long> lo, hi;
    for (const auto& cell : cells_by_index.at(k)) {
      std::string pn;
      Fragment ext = make_ext(k, &cell, pn);
      FormulaPtr inst = subst(phi, {{pvar, Term::param(pn, Sort::P)}});
      if (eval_measure(mu, inst, ext) != m)
        return std::nullopt;  // measure value not instance-independent
      long h = 0;
      for (const auto& nm : names) {
        Assignment a{{mu.var, ext.value(nm)}};
        if (eval_qf(ext, inst, a)) ++h;
      }
      if (!lo || h < *lo) lo = h;
      if (!hi || h > *hi) hi = h;
    }
    lo_sum += *lo;
    hi_sum += *hi;
  }
  Rat nsz = rat((long)abar.size());
  Rat e_lo = rat_abs(m - (rat(nconst) + lo_sum) / nsz);
  Rat e_hi = rat_abs(m - (rat(nconst) + hi_sum) / nsz);
  return e_lo > e_hi ? e_lo : e_hi;
}

}  // namespace detail

// max over fragment-representable parameter instances b of
// |mu(phi(x,b)) - Av(abar)(phi(x,b))|; abar names fragment elements.
inline Rat av_error(const Measure& mu, const std::vector<std::string>& abar,
                    const FormulaPtr& phi, const Fragment& frag) {
  if (abar.empty()) throw std::invalid_argument("av_error: empty tuple");
  for (const auto& nm : abar)
    if (!frag.has_value(nm))
      throw std::invalid_argument("av_error: unknown element " + nm);
  std::optional<std::pair<std::string, Sort>> pv;
  for (const auto& [n, s] : free_vars(phi)) {
    if (n == mu.var) continue;
    if (pv) throw std::invalid_argument("av_error: more than one parameter variable");
    pv = {n, s};
  }
  auto value_at = [&](const FormulaPtr& inst, const Fragment& ext) {
    Rat m = eval_measure(mu, inst, ext);
    Rat av = 0;
    for (const auto& nm : abar) {
      Assignment a{{mu.var, ext.value(nm)}};
      if (eval_qf(ext, inst, a)) av += 1;
    }
    av /= (long)abar.size();
    return rat_abs(m - av);
  };
  if (!pv) return value_at(phi, frag);
  if (pv->second == Sort::P && (frag.theory == TheoryId::THalfInf ||
                                frag.theory == TheoryId::THalfInfPQ)) {
    auto fast = detail::av_error_point_factored(mu, abar, phi, frag, pv->first);
    if (fast) return *fast;
  }
  Rat worst = 0;
  auto insts = parameter_instances(frag, pv->first, pv->second);
  if (insts.empty())
    throw std::invalid_argument("av_error: no parameter instances in fragment");
  for (const auto& inst : insts) {
    Rat e = value_at(subst(phi, {{pv->first, inst.term}}), inst.frag);
    if (e > worst) worst = e;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// fam search: lexicographically-first tuple (repetition allowed) of fragment
// elements with av_error < eps, trying sizes 1..n_max.

struct FamResult {
  bool found = false;
  std::vector<std::string> tuple;
  Rat error = 0;  // av_error of the returned tuple
};

inline FamResult fam_search(const Measure& mu, const FormulaPtr& phi,
                            const Rat& eps, const Fragment& frag,
                            std::size_t n_max) {
  if (eps <= 0) throw std::invalid_argument("fam_search: eps must be positive");
  std::vector<std::string> pool;
  for (const auto& [n, s] : frag.params)
    if (s == mu.sort && frag.has_value(n)) pool.push_back(n);
  std::sort(pool.begin(), pool.end());
  FamResult res;
  if (pool.empty()) return res;
  std::vector<std::string> tup;
  std::function<bool(std::size_t)> rec = [&](std::size_t left) -> bool {
    if (left == 0) {
      Rat e = av_error(mu, tup, phi, frag);
      if (e < eps) {
        res.found = true;
        res.tuple = tup;
        res.error = e;
        return true;
      }
      return false;
    }
    for (const auto& nm : pool) {
      tup.push_back(nm);
      bool hit = rec(left - 1);
      tup.pop_back();
      if (hit) return true;
    }
    return false;
  };
  for (std::size_t n = 1; n <= n_max; ++n)
    if (rec(n)) break;
  return res;
}

// ---------------------------------------------------------------------------
// Approximation sequences

struct ApproxSequenceCheck {
  FormulaPtr phi;  // object var mu.var, one parameter variable
  Rat eps;
  std::vector<FormulaPtr> chis;  // chis[n-1] over x1..xn
  MeasurePtr mu;
};

struct ApproxStepReport {
  std::size_t n = 0;
  bool lower_ok = true;  // Av^n_{<=eps/2} subset of chi_n
  bool upper_ok = true;  // chi_n subset of Av^n_{<eps}
  Rat value = 0;         // mu^(n)(chi_n)
};

inline std::vector<ApproxStepReport> check_approx_sequence(
    const ApproxSequenceCheck& c, const Fragment& frag) {
  std::vector<std::string> pool;
  for (const auto& [n, s] : frag.params)
    if (s == c.mu->sort && frag.has_value(n)) pool.push_back(n);
  std::sort(pool.begin(), pool.end());
  std::vector<ApproxStepReport> out;
  for (std::size_t n = 1; n <= c.chis.size(); ++n) {
    const FormulaPtr& chi = c.chis[n - 1];
    auto vs = power_vars(n);
    for (const auto& [fn, s] : free_vars(chi)) {
      (void)s;
      if (std::find(vs.begin(), vs.end(), fn) == vs.end())
        throw std::invalid_argument("check_approx_sequence: chi_" +
                                    std::to_string(n) +
                                    " uses unexpected variable " + fn);
    }
    ApproxStepReport rep;
    rep.n = n;
    // Every fragment tuple of size n, with repetition.
    std::vector<std::size_t> idx(n, 0);
    bool done = pool.empty();
    while (!done) {
      std::vector<std::string> tup;
      Assignment a;
      for (std::size_t i = 0; i < n; ++i) {
        tup.push_back(pool[idx[i]]);
        a[vs[i]] = frag.value(pool[idx[i]]);
      }
      Rat e = av_error(*c.mu, tup, c.phi, frag);
      bool in_chi = eval_qf(frag, chi, a);
      if (e <= c.eps / 2 && !in_chi) rep.lower_ok = false;
      if (in_chi && !(e < c.eps)) rep.upper_ok = false;
      std::size_t i = 0;
      for (; i < n; ++i) {
        if (++idx[i] < pool.size()) break;
        idx[i] = 0;
      }
      done = i == n;
    }
    rep.value = power_eval(c.mu, n, chi, frag, vs);
    out.push_back(rep);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concentration bounds

// Chebyshev-style lower bound 1 - p(1-p)/(eps^2 n), floored at 0.
inline Rat wlln_bound(const Rat& p, const Rat& eps, long n) {
  if (p < 0 || p > 1) throw std::invalid_argument("wlln_bound: p outside [0,1]");
  if (eps <= 0 || n < 1) throw std::invalid_argument("wlln_bound: bad eps or n");
  Rat b = 1 - p * (1 - p) / (eps * eps * n);
  return b < 0 ? rat(0) : b;
}

// P(|X/n - r| < eps) for X ~ Binomial(n, r), exactly.
inline Rat binomial_tail_exact(const Rat& r, const Rat& eps, long n) {
  if (r < 0 || r > 1)
    throw std::invalid_argument("binomial_tail_exact: r outside [0,1]");
  if (eps <= 0 || n < 1)
    throw std::invalid_argument("binomial_tail_exact: bad eps or n");
  Rat total = 0;
  for (long k = 0; k <= n; ++k) {
    if (rat_abs(rat(k) / n - r) >= eps) continue;
    total += binom(n, k) * rat_pow(r, k) * rat_pow(1 - r, n - k);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Convexity of pattern products:
// (r mu + (1-r) nu)^(n) = sum_X r^|X| (1-r)^(n-|X|) lambda_{n,X}.

inline Report fim_convexity_check(const MeasurePtr& mu, const MeasurePtr& nu,
                                  const Rat& r, std::size_t n,
                                  const Fragment& frag,
                                  const std::vector<FormulaPtr>& pool) {
  if (r < 0 || r > 1)
    throw std::invalid_argument("fim_convexity_check: r outside [0,1]");
  auto lam = convex_combine({r, 1 - r}, {mu, nu});
  for (const auto& phi : pool) {
    Rat lhs = power_eval(lam, n, phi, frag);
    Rat rhs = 0;
    for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
      std::set<std::size_t> X;
      for (std::size_t i = 0; i < n; ++i)
        if ((mask >> i) & 1) X.insert(i + 1);
      Rat w = rat_pow(r, (long)X.size()) * rat_pow(1 - r, (long)(n - X.size()));
      if (w == 0) continue;
      rhs += w * pattern_product_eval(X, mu, nu, n, phi, frag);
    }
    if (lhs != rhs) {
      Report rep;
      rep.equal = false;
      rep.formula = phi;
      rep.left = lhs;
      rep.right = rhs;
      rep.label = "fim-convexity";
      return rep;
    }
  }
  Report rep;
  rep.label = "fim-convexity";
  return rep;
}

}  // namespace kmlab
