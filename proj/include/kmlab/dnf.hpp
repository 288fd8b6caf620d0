#pragma once

// Negation and disjunctive normal forms, plus the formal join-of-meets normal
// forms that exhaust a finitely generated Q-sort sublattice.

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmlab/formula.hpp"

namespace kmlab {

// A literal: an atom with a sign.
struct Literal {
  FormulaPtr atom;
  bool positive = true;
  std::string key() const { return (positive ? "+" : "-") + formula_str(atom); }
};

struct DnfFormula {
  // Each disjunct is a conjunction of literals; the empty disjunction is
  // "false" and a disjunct with no literals is "true".
  std::vector<std::vector<Literal>> disjuncts;
  bool is_false() const { return disjuncts.empty(); }
  bool is_true() const {
    return std::any_of(disjuncts.begin(), disjuncts.end(),
                       [](const auto& d) { return d.empty(); });
  }
  FormulaPtr to_formula() const {
    std::vector<FormulaPtr> ds;
    for (const auto& d : disjuncts) {
      std::vector<FormulaPtr> lits;
      for (const auto& l : d)
        lits.push_back(l.positive ? l.atom : Formula::lnot(l.atom));
      ds.push_back(Formula::land(std::move(lits)));
    }
    return Formula::lor(std::move(ds));
  }
};

namespace detail {

inline std::size_t count_literal_positions(const FormulaPtr& f) {
  if (f->kind == FormKind::Atom) return 1;
  std::size_t n = 0;
  for (const auto& k : f->kids) n += count_literal_positions(k);
  return n;
}

inline void dnf_rec(const FormulaPtr& f, bool sign,
                    std::vector<std::vector<Literal>>& out) {
  switch (f->kind) {
    case FormKind::True:
      if (sign) out.push_back({});
      return;
    case FormKind::False:
      if (!sign) out.push_back({});
      return;
    case FormKind::Atom:
      out.push_back({Literal{f, sign}});
      return;
    case FormKind::Not:
      dnf_rec(f->kids[0], !sign, out);
      return;
    case FormKind::And:
    case FormKind::Or: {
      bool conjunctive = (f->kind == FormKind::And) == sign;
      if (!conjunctive) {  // disjunction: concatenate
        for (const auto& k : f->kids) dnf_rec(k, sign, out);
        return;
      }
      // conjunction: distribute
      std::vector<std::vector<Literal>> acc{{}};
      for (const auto& k : f->kids) {
        std::vector<std::vector<Literal>> kd;
        dnf_rec(k, sign, kd);
        std::vector<std::vector<Literal>> next;
        for (const auto& a : acc)
          for (const auto& b : kd) {
            auto merged = a;
            merged.insert(merged.end(), b.begin(), b.end());
            next.push_back(std::move(merged));
          }
        acc = std::move(next);
      }
      for (auto& d : acc) out.push_back(std::move(d));
      return;
    }
    default:
      throw std::invalid_argument("to_dnf: quantified input");
  }
}

}  // namespace detail

// Disjunctive normal form with a loud size cap (intended inputs are tiny;
// anything larger is a caller bug).  Duplicate literals within a
// disjunct are removed, contradictory disjuncts dropped, disjuncts deduped
// and ordered deterministically.
inline DnfFormula to_dnf(const FormulaPtr& f, std::size_t literal_cap = 24) {
  if (!is_qf(f)) throw std::invalid_argument("to_dnf: quantified input");
  if (detail::count_literal_positions(f) > literal_cap)
    throw std::invalid_argument("to_dnf: literal count exceeds cap of " +
                                std::to_string(literal_cap));
  std::vector<std::vector<Literal>> raw;
  detail::dnf_rec(f, true, raw);

  std::set<std::string> seen;
  DnfFormula out;
  std::vector<std::pair<std::string, std::vector<Literal>>> keyed;
  for (auto& d : raw) {
    std::map<std::string, Literal> by_key;
    bool contradictory = false;
    for (auto& l : d) {
      std::string akey = formula_str(l.atom);
      auto it = by_key.find(akey);
      if (it != by_key.end()) {
        if (it->second.positive != l.positive) { contradictory = true; break; }
      } else {
        by_key.emplace(akey, l);
      }
    }
    if (contradictory) continue;
    std::vector<Literal> clean;
    std::string dkey;
    for (auto& [k, l] : by_key) {
      dkey += l.key() + ";";
      clean.push_back(l);
    }
    if (seen.insert(dkey).second) keyed.push_back({dkey, std::move(clean)});
  }
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [k, d] : keyed) out.disjuncts.push_back(std::move(d));
  return out;
}

// Distinct atoms of a quantifier-free formula, ordered by printed form.
inline std::vector<FormulaPtr> atoms_of(const FormulaPtr& f) {
  std::map<std::string, FormulaPtr> by_key;
  std::vector<FormulaPtr> stack{f};
  while (!stack.empty()) {
    auto g = stack.back();
    stack.pop_back();
    if (g->kind == FormKind::Atom) {
      by_key[formula_str(g)] = g;
      continue;
    }
    for (const auto& k : g->kids) stack.push_back(k);
  }
  std::vector<FormulaPtr> out;
  for (auto& [k, a] : by_key) out.push_back(a);
  return out;
}

// Truth of a qf formula under a truth assignment of its atoms (keyed by
// printed form).
inline bool eval_bool(const FormulaPtr& f,
                      const std::map<std::string, bool>& assign) {
  switch (f->kind) {
    case FormKind::True: return true;
    case FormKind::False: return false;
    case FormKind::Atom: return assign.at(formula_str(f));
    case FormKind::Not: return !eval_bool(f->kids[0], assign);
    case FormKind::And:
      for (const auto& k : f->kids)
        if (!eval_bool(k, assign)) return false;
      return true;
    case FormKind::Or:
      for (const auto& k : f->kids)
        if (eval_bool(k, assign)) return true;
      return false;
    default:
      throw std::invalid_argument("eval_bool: quantified formula");
  }
}

// The fixed finite list of formal join-of-meets terms exhausting the
// sublattice (with complement) generated by the given Q-variables.  For k
// generators there are 2^k sign-meets and one term per subset of them; the
// empty subset is bot and the full subset is top.
inline std::vector<TermPtr> q_term_normal_forms(
    const std::vector<TermPtr>& vars) {
  if (vars.empty())
    throw std::invalid_argument("q_term_normal_forms: no generators");
  std::size_t k = vars.size();
  if (k > 4)
    throw std::invalid_argument("q_term_normal_forms: too many generators");
  std::vector<TermPtr> meets;
  for (std::size_t sigma = 0; sigma < (1u << k); ++sigma) {
    TermPtr m;
    for (std::size_t i = 0; i < k; ++i) {
      TermPtr lit = (sigma >> i) & 1 ? vars[i] : Term::comp(vars[i]);
      m = m ? Term::meet(m, lit) : lit;
    }
    meets.push_back(m);
  }
  std::vector<TermPtr> out;
  std::size_t total = 1ull << meets.size();
  for (std::size_t subset = 0; subset < total; ++subset) {
    if (subset == 0) { out.push_back(Term::bot()); continue; }
    if (subset == total - 1) { out.push_back(Term::top()); continue; }
    TermPtr j;
    for (std::size_t i = 0; i < meets.size(); ++i)
      if ((subset >> i) & 1) j = j ? Term::join(j, meets[i]) : meets[i];
    out.push_back(j);
  }
  return out;
}

}  // namespace kmlab
