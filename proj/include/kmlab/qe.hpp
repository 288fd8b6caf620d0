#pragma once

// Quantifier elimination for the half-measure lattice theory (THalfInf) and
// its measure-free PQ reduct (THalfInfPQ).
//
// Strategy, innermost quantifier first:
//   * R-sort: Fourier-Motzkin over ordered Q-linear constraints (density and
//     divisibility make this exact).
//   * P-sort: a point exists in a region iff the region is nonbottom; the
//     output is a disjunction over similarity patterns of the membership
//     targets, each contributing "meet of targets != bot" conditions.
//   * Q-sort: lazy diagram-case enumeration.  Each case fixes the bot/top/
//     proper status and similarity classes of the ambient lattice symbols,
//     which atoms of the generated finite algebras are nonbottom, where the
//     mentioned points sit, and how the quantified element cuts each minimal
//     element (empty / strictly partial / full).  Under a case every literal
//     either decides outright or reduces to linear constraints over fresh
//     mass variables, which Fourier-Motzkin then removes.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmlab/dnf.hpp"
#include "kmlab/fragment.hpp"
#include "kmlab/linear.hpp"

namespace kmlab {

// ---------------------------------------------------------------------------
// Term and atom normalization

inline TermPtr normalize_term(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Meet: {
      auto a = normalize_term(t->kids[0]);
      auto b = normalize_term(t->kids[1]);
      if (a->kind == TermKind::Bot || b->kind == TermKind::Bot)
        return Term::bot();
      if (a->kind == TermKind::Top) return b;
      if (b->kind == TermKind::Top) return a;
      if (term_str(a) == term_str(b)) return a;
      return Term::meet(a, b);
    }
    case TermKind::Join: {
      auto a = normalize_term(t->kids[0]);
      auto b = normalize_term(t->kids[1]);
      if (a->kind == TermKind::Top || b->kind == TermKind::Top)
        return Term::top();
      if (a->kind == TermKind::Bot) return b;
      if (b->kind == TermKind::Bot) return a;
      if (term_str(a) == term_str(b)) return a;
      return Term::join(a, b);
    }
    case TermKind::Comp: {
      auto a = normalize_term(t->kids[0]);
      if (a->kind == TermKind::Bot) return Term::top();
      if (a->kind == TermKind::Top) return Term::bot();
      if (a->kind == TermKind::Comp) return a->kids[0];
      return Term::comp(a);
    }
    case TermKind::Ell: {
      auto a = normalize_term(t->kids[0]);
      if (a->kind == TermKind::Bot) return Term::num(0);
      if (a->kind == TermKind::Top) return Term::num(1);
      return Term::ell(a);
    }
    case TermKind::Add:
      return Term::add(normalize_term(t->kids[0]), normalize_term(t->kids[1]));
    case TermKind::Sub:
      return Term::sub(normalize_term(t->kids[0]), normalize_term(t->kids[1]));
    case TermKind::Scale:
      return Term::scale(t->value, normalize_term(t->kids[0]));
    default:
      return t;
  }
}

// Simplifies a single atom after normalizing its argument terms; may return
// True/False.  Ground R-sort comparisons are decided exactly.
inline FormulaPtr simplify_atom(const FormulaPtr& f) {
  if (f->kind != FormKind::Atom) return f;
  std::vector<TermPtr> args;
  for (const auto& a : f->args) args.push_back(normalize_term(a));
  auto is_bot = [](const TermPtr& t) { return t->kind == TermKind::Bot; };
  auto is_top = [](const TermPtr& t) { return t->kind == TermKind::Top; };
  switch (f->atom) {
    case AtomKind::Eq: {
      if (term_str(args[0]) == term_str(args[1])) return Formula::truef();
      if (term_sort(args[0]) == Sort::R || term_sort(args[1]) == Sort::R) {
        LinForm d = lin_diff(args[0], args[1]);
        if (d.coeffs.empty())
          return d.constant == 0 ? Formula::truef() : Formula::falsef();
      } else {
        if ((is_bot(args[0]) && is_top(args[1])) ||
            (is_top(args[0]) && is_bot(args[1])))
          return Formula::falsef();
      }
      break;
    }
    case AtomKind::Less: {
      LinForm d = lin_diff(args[0], args[1]);
      if (d.coeffs.empty())
        return d.constant < 0 ? Formula::truef() : Formula::falsef();
      break;
    }
    case AtomKind::Sqin:
      if (is_bot(args[1])) return Formula::falsef();
      if (is_top(args[1])) return Formula::truef();
      break;
    case AtomKind::Sim:
      if (is_bot(args[0]) || is_top(args[0]) || is_bot(args[1]) ||
          is_top(args[1]))
        return Formula::falsef();
      break;
    case AtomKind::Rel:
      break;
  }
  return Formula::make_atom(f->atom, std::move(args), f->rel);
}

// Negation normal form over a quantifier-free formula.  Negated R-sort
// comparisons split into positive ones (total dense order), so downstream
// linear machinery only ever sees positive Eq/Less on the R sort.
inline FormulaPtr nnf_split(const FormulaPtr& f, bool neg = false) {
  switch (f->kind) {
    case FormKind::True:
      return neg ? Formula::falsef() : Formula::truef();
    case FormKind::False:
      return neg ? Formula::truef() : Formula::falsef();
    case FormKind::Not:
      return nnf_split(f->kids[0], !neg);
    case FormKind::And:
    case FormKind::Or: {
      std::vector<FormulaPtr> kids;
      for (const auto& k : f->kids) kids.push_back(nnf_split(k, neg));
      bool conj = (f->kind == FormKind::And) != neg;
      return conj ? Formula::land(std::move(kids))
                  : Formula::lor(std::move(kids));
    }
    case FormKind::Atom: {
      FormulaPtr s = simplify_atom(f);
      if (s->kind != FormKind::Atom) return neg ? Formula::lnot(s) : s;
      if (!neg) return s;
      if (s->atom == AtomKind::Eq && term_sort(s->args[0]) == Sort::R)
        return Formula::lor({atom_less(s->args[0], s->args[1]),
                             atom_less(s->args[1], s->args[0])});
      if (s->atom == AtomKind::Less)
        return Formula::lor({atom_less(s->args[1], s->args[0]),
                             atom_eq(s->args[0], s->args[1])});
      return Formula::lnot(s);
    }
    default:
      throw std::invalid_argument("nnf_split: quantified input");
  }
}

// Constant folding and duplicate pruning over a quantifier-free formula.
inline FormulaPtr simplify_bool(const FormulaPtr& f) {
  switch (f->kind) {
    case FormKind::Not: {
      FormulaPtr k = simplify_bool(f->kids[0]);
      if (k->kind == FormKind::Not) return k->kids[0];
      return Formula::lnot(k);
    }
    case FormKind::And:
    case FormKind::Or: {
      bool conj = f->kind == FormKind::And;
      std::vector<FormulaPtr> kids;
      std::set<std::string> seen;
      for (const auto& raw : f->kids) {
        FormulaPtr k = simplify_bool(raw);
        if (k->kind == (conj ? FormKind::True : FormKind::False)) continue;
        if (k->kind == (conj ? FormKind::False : FormKind::True))
          return conj ? Formula::falsef() : Formula::truef();
        // Flatten nested same-connective nodes.
        std::vector<FormulaPtr> flat;
        if (k->kind == f->kind)
          flat = k->kids;
        else
          flat = {k};
        for (const auto& g : flat)
          if (seen.insert(formula_str(g)).second) kids.push_back(g);
      }
      return conj ? Formula::land(std::move(kids))
                  : Formula::lor(std::move(kids));
    }
    default:
      return f;
  }
}

// ---------------------------------------------------------------------------
// Linear systems and Fourier-Motzkin

struct LinearSystem {
  std::vector<LinConstraint> cons;
  std::vector<std::string> keys;            // column -> key name
  std::map<std::string, TermPtr> key_terms; // key name -> rendering term
  std::set<int> existential;                // mass columns to eliminate
  std::vector<LinConstraint> facts;         // model-true side conditions

  int column(const std::string& key, const TermPtr& term) {
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (keys[i] == key) return (int)i;
    keys.push_back(key);
    if (term) key_terms[key] = term;
    return (int)keys.size() - 1;
  }
  int fresh_existential(const std::string& tag) {
    int c = column("?" + tag + "#" + std::to_string(keys.size()), nullptr);
    existential.insert(c);
    return c;
  }
};

namespace detail {

inline LinConstraint scale_constraint(const LinConstraint& c, const Rat& s) {
  LinConstraint out;
  out.op = c.op;
  out.constant = c.constant * s;
  for (const auto& [v, co] : c.coeffs)
    if (co * s != 0) out.coeffs[v] = co * s;
  return out;
}

inline LinConstraint add_constraints(const LinConstraint& a,
                                     const LinConstraint& b, LinConstraint::Op op) {
  LinConstraint out;
  out.op = op;
  out.constant = a.constant + b.constant;
  out.coeffs = a.coeffs;
  for (const auto& [v, co] : b.coeffs) {
    Rat nv = out.coeffs.count(v) ? out.coeffs[v] + co : co;
    if (nv == 0)
      out.coeffs.erase(v);
    else
      out.coeffs[v] = nv;
  }
  return out;
}

inline std::string constraint_key(const LinConstraint& c) {
  LinConstraint n = c;
  Rat lead = 0;
  for (const auto& [v, co] : n.coeffs) { lead = co; break; }
  if (lead != 0) n = scale_constraint(n, 1 / rat_abs(lead));
  if (n.op == LinConstraint::EQ && !n.coeffs.empty() &&
      n.coeffs.begin()->second < 0)
    n = scale_constraint(n, rat(-1));
  std::string s = n.op == LinConstraint::EQ ? "=" : (n.op == LinConstraint::LT ? "<" : "<=");
  s += rat_str(n.constant);
  for (const auto& [v, co] : n.coeffs)
    s += "|" + std::to_string(v) + ":" + rat_str(co);
  return s;
}

// Eliminates one column; ground contradictions are kept (rendered as False).
inline std::vector<LinConstraint> fm_step(const std::vector<LinConstraint>& cons,
                                          int var) {
  // Prefer substitution through an equality.
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const auto& e = cons[i];
    auto it = e.coeffs.find(var);
    if (e.op != LinConstraint::EQ || it == e.coeffs.end()) continue;
    Rat c = it->second;
    std::vector<LinConstraint> out;
    for (std::size_t j = 0; j < cons.size(); ++j) {
      if (j == i) continue;
      auto jt = cons[j].coeffs.find(var);
      if (jt == cons[j].coeffs.end()) {
        out.push_back(cons[j]);
        continue;
      }
      out.push_back(add_constraints(cons[j], scale_constraint(e, -jt->second / c),
                                    cons[j].op));
    }
    return out;
  }
  std::vector<LinConstraint> lows, highs, rest;
  for (const auto& c : cons) {
    auto it = c.coeffs.find(var);
    if (it == c.coeffs.end())
      rest.push_back(c);
    else if (it->second > 0)
      highs.push_back(c);  // var <=/< bound
    else
      lows.push_back(c);
  }
  std::set<std::string> seen;
  for (const auto& c : rest) seen.insert(constraint_key(c));
  std::vector<LinConstraint> out = rest;
  for (const auto& lo : lows)
    for (const auto& hi : highs) {
      Rat a = rat_abs(lo.coeffs.at(var));
      Rat b = hi.coeffs.at(var);
      LinConstraint::Op op = (lo.op == LinConstraint::LT || hi.op == LinConstraint::LT) ? LinConstraint::LT
                                                            : LinConstraint::LE;
      LinConstraint merged = add_constraints(scale_constraint(lo, b),
                                             scale_constraint(hi, a), op);
      merged.coeffs.erase(var);
      if (merged.coeffs.empty() &&
          (merged.op == LinConstraint::LT ? merged.constant < 0
                                  : merged.constant <= 0))
        continue;  // trivially true
      if (seen.insert(constraint_key(merged)).second)
        out.push_back(std::move(merged));
    }
  return out;
}

inline bool constraint_holds_trivially(const LinConstraint& c) {
  if (!c.coeffs.empty()) return false;
  switch (c.op) {
    case LinConstraint::EQ: return c.constant == 0;
    case LinConstraint::LE: return c.constant <= 0;
    case LinConstraint::LT: return c.constant < 0;
  }
  return false;
}

inline bool constraint_is_contradiction(const LinConstraint& c) {
  return c.coeffs.empty() && !constraint_holds_trivially(c);
}

// facts |= c ?  (checked by infeasibility of facts & not-c)
inline bool implied_by(const std::vector<LinConstraint>& facts,
                       const LinConstraint& c, int nvars) {
  auto infeasible = [&](LinConstraint neg) {
    auto sys = facts;
    sys.push_back(std::move(neg));
    return !lin_feasible_sample(sys, nvars).has_value();
  };
  LinConstraint flip = scale_constraint(c, rat(-1));
  switch (c.op) {
    case LinConstraint::EQ: {
      LinConstraint lt = c;
      lt.op = LinConstraint::LT;
      LinConstraint gt = flip;
      gt.op = LinConstraint::LT;
      return infeasible(lt) && infeasible(gt);
    }
    case LinConstraint::LE:
      flip.op = LinConstraint::LT;
      return infeasible(flip);
    case LinConstraint::LT:
      flip.op = LinConstraint::LE;
      return infeasible(flip);
  }
  return false;
}

}  // namespace detail

// Removes the existential columns via Fourier-Motzkin; the result has no
// existential columns and drops constraints already implied by the facts.
inline LinearSystem eliminate_R(LinearSystem sys) {
  std::vector<LinConstraint> cons = sys.cons;
  for (const auto& f : sys.facts) cons.push_back(f);
  for (int v : std::vector<int>(sys.existential.rbegin(), sys.existential.rend()))
    cons = detail::fm_step(cons, v);
  int nvars = (int)sys.keys.size();
  std::vector<LinConstraint> kept;
  std::set<std::string> seen;
  for (const auto& f : sys.facts) seen.insert(detail::constraint_key(f));
  for (const auto& c : cons) {
    if (detail::constraint_holds_trivially(c)) continue;
    if (detail::constraint_is_contradiction(c)) {
      kept = {c};
      break;
    }
    if (!seen.insert(detail::constraint_key(c)).second) continue;
    if (!sys.facts.empty() && detail::implied_by(sys.facts, c, nvars)) continue;
    kept.push_back(c);
  }
  LinearSystem out = sys;
  out.cons = std::move(kept);
  out.existential.clear();
  return out;
}

// Renders the (eliminated) system as a conjunction of R-sort atoms.
inline FormulaPtr render_system(const LinearSystem& sys) {
  std::vector<FormulaPtr> parts;
  for (const auto& c : sys.cons) {
    if (detail::constraint_holds_trivially(c)) continue;
    if (detail::constraint_is_contradiction(c)) return Formula::falsef();
    // Split into lhs (positive coefficients) and rhs (negative) sides.
    auto side = [&](bool positive) {
      TermPtr acc;
      for (const auto& [v, co] : c.coeffs) {
        if ((co > 0) != positive) continue;
        Rat mag = rat_abs(co);
        const TermPtr& base = sys.key_terms.at(sys.keys[v]);
        TermPtr piece = mag == 1 ? base : Term::scale(mag, base);
        acc = acc ? Term::add(acc, piece) : piece;
      }
      Rat k = positive ? c.constant : -c.constant;
      if (k > 0) {
        TermPtr piece = Term::num(k);
        acc = acc ? Term::add(acc, piece) : piece;
      }
      return acc ? acc : Term::num(0);
    };
    TermPtr lhs = side(true), rhs = side(false);
    switch (c.op) {
      case LinConstraint::EQ: parts.push_back(atom_eq(lhs, rhs)); break;
      case LinConstraint::LT: parts.push_back(atom_less(lhs, rhs)); break;
      case LinConstraint::LE:
        parts.push_back(Formula::lnot(atom_less(rhs, lhs)));
        break;
    }
  }
  return Formula::land(std::move(parts));
}

// ---------------------------------------------------------------------------
// Diagram cases

struct DiagramCase {
  enum Status { SBot = 0, STop = 1, SProper = 2 };
  struct ClassInfo {
    std::vector<TermPtr> gens;      // proper generator symbols
    std::vector<unsigned> atoms;    // nonbottom sign masks over gens
  };
  std::map<std::string, Status> status;  // symbol name -> status
  std::map<std::string, TermPtr> symterm;
  std::map<std::string, int> cls;  // proper symbol -> class index
  std::vector<ClassInfo> classes;
  int target_class = -1;           // class the quantified element joins
  std::vector<int> sigma;          // per target atom: 0 empty, 1 partial, 2 full
  // Mentioned points, grouped by equality; each group sits in one target atom
  // (base algebra) and the quantified element may or may not contain it.
  std::vector<std::vector<std::string>> point_groups;
  std::map<std::string, TermPtr> point_term;
  std::vector<int> point_atom;   // group -> index into target atoms
  std::vector<char> point_in;    // group -> inside the quantified element
  // P-elimination variant: similarity pattern over membership target terms.
  std::vector<std::vector<TermPtr>> term_partition;

  bool target_is_fresh() const {
    return target_class >= 0 && classes[target_class].gens.empty();
  }

  TermPtr atom_term(int class_id, unsigned mask) const {
    const auto& ci = classes[class_id];
    if (ci.gens.empty()) return Term::top();
    // Drop factors whose sign is already forced by the other factors and the
    // case's nonbottom pattern (canonical compact representation).
    std::vector<int> used(ci.gens.size(), 1);
    for (std::size_t d = 0; d < ci.gens.size(); ++d) {
      used[d] = 0;
      std::set<unsigned> fits;
      for (unsigned a : ci.atoms) {
        bool ok = true;
        for (std::size_t i = 0; i < ci.gens.size(); ++i)
          if (used[i] && ((a >> i) & 1) != ((mask >> i) & 1)) ok = false;
        if (ok) fits.insert(a);
      }
      if (!(fits.size() == 1 && *fits.begin() == mask)) used[d] = 1;
    }
    TermPtr acc;
    for (std::size_t i = 0; i < ci.gens.size(); ++i) {
      if (!used[i]) continue;
      TermPtr piece = (mask >> i) & 1 ? ci.gens[i] : Term::comp(ci.gens[i]);
      acc = acc ? Term::meet(acc, piece) : piece;
    }
    return acc ? acc : Term::top();
  }

  FormulaPtr guard() const {
    std::vector<FormulaPtr> g;
    for (const auto& [n, st] : status) {
      const TermPtr& t = symterm.at(n);
      if (st == SBot)
        g.push_back(atom_eq(t, Term::bot()));
      else if (st == STop)
        g.push_back(atom_eq(t, Term::top()));
      else {
        g.push_back(Formula::lnot(atom_eq(t, Term::bot())));
        g.push_back(Formula::lnot(atom_eq(t, Term::top())));
      }
    }
    std::vector<std::string> proper;
    for (const auto& [n, st] : status)
      if (st == SProper) proper.push_back(n);
    for (std::size_t i = 0; i < proper.size(); ++i)
      for (std::size_t j = i + 1; j < proper.size(); ++j) {
        FormulaPtr s = atom_sim(symterm.at(proper[i]), symterm.at(proper[j]));
        g.push_back(cls.at(proper[i]) == cls.at(proper[j]) ? s
                                                           : Formula::lnot(s));
      }
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const auto& ci = classes[c];
      if (ci.gens.empty()) continue;
      std::set<unsigned> nonbot(ci.atoms.begin(), ci.atoms.end());
      for (unsigned m = 0; m < (1u << ci.gens.size()); ++m) {
        TermPtr a = atom_term((int)c, m);
        FormulaPtr e = atom_eq(a, Term::bot());
        g.push_back(nonbot.count(m) ? Formula::lnot(e) : e);
      }
    }
    for (std::size_t i = 0; i < point_groups.size(); ++i)
      for (std::size_t j = i + 1; j < point_groups.size(); ++j)
        g.push_back(Formula::lnot(atom_eq(point_term.at(point_groups[i][0]),
                                          point_term.at(point_groups[j][0]))));
    for (const auto& grp : point_groups)
      for (std::size_t i = 1; i < grp.size(); ++i)
        g.push_back(atom_eq(point_term.at(grp[0]), point_term.at(grp[i])));
    if (target_class >= 0 && !classes[target_class].gens.empty())
      for (std::size_t gi = 0; gi < point_groups.size(); ++gi)
        g.push_back(atom_sqin(
            point_term.at(point_groups[gi][0]),
            atom_term(target_class, classes[target_class].atoms[point_atom[gi]])));
    // Similarity pattern over P-elimination target terms.
    for (std::size_t i = 0; i < term_partition.size(); ++i) {
      const auto& grp = term_partition[i];
      for (std::size_t a = 0; a < grp.size(); ++a)
        for (std::size_t b = a + 1; b < grp.size(); ++b)
          g.push_back(atom_sim(grp[a], grp[b]));
      for (std::size_t j = i + 1; j < term_partition.size(); ++j)
        for (const auto& ta : grp)
          for (const auto& tb : term_partition[j])
            g.push_back(Formula::lnot(atom_sim(ta, tb)));
    }
    return Formula::land(std::move(g));
  }
};

// Minimal (nonbottom, proper) elements of the finite sublattices fixed by the
// case, split into those similar to the quantified element and the rest.
struct MinimalSplit {
  std::vector<TermPtr> sim, nsim;
};

inline MinimalSplit minimal_elements(const DiagramCase& dc) {
  MinimalSplit out;
  for (std::size_t c = 0; c < dc.classes.size(); ++c) {
    const auto& ci = dc.classes[c];
    if (ci.gens.empty()) continue;  // only bot/top in the generated sublattice
    auto& dst = ((int)c == dc.target_class) ? out.sim : out.nsim;
    for (unsigned m : ci.atoms) {
      TermPtr t = dc.atom_term((int)c, m);
      if (t->kind == TermKind::Top) continue;  // not proper
      dst.push_back(t);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symbolic Q-term values under a case

namespace detail {

struct QVal {
  int kind = 0;  // 0 bot, 1 top, 2 set
  int cls = -1;
  std::set<int> atoms;  // refined ids for target class, atom indices otherwise
};

inline std::set<int> full_atom_set(const DiagramCase& dc, int c) {
  std::set<int> s;
  const auto& ci = dc.classes[c];
  for (std::size_t i = 0; i < ci.atoms.size(); ++i) {
    if (c == dc.target_class) {
      if (dc.sigma[i] != 2) s.insert(2 * (int)i);      // part outside
      if (dc.sigma[i] != 0) s.insert(2 * (int)i + 1);  // part inside
    } else {
      s.insert((int)i);
    }
  }
  return s;
}

inline QVal qv_normalize(const DiagramCase& dc, QVal v) {
  if (v.kind != 2) return v;
  if (v.atoms.empty()) return {0, -1, {}};
  if (v.atoms == full_atom_set(dc, v.cls)) return {1, -1, {}};
  return v;
}

inline QVal eval_qterm_case(const DiagramCase& dc, const std::string& var,
                            const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Bot: return {0, -1, {}};
    case TermKind::Top: return {1, -1, {}};
    case TermKind::Var:
    case TermKind::Param: {
      if (t->name == var) {
        QVal v{2, dc.target_class, {}};
        const auto& ci = dc.classes[dc.target_class];
        for (std::size_t i = 0; i < ci.atoms.size(); ++i)
          if (dc.sigma[i] != 0) v.atoms.insert(2 * (int)i + 1);
        return qv_normalize(dc, v);
      }
      auto st = dc.status.find(t->name);
      if (st == dc.status.end())
        throw std::logic_error("eval_qterm_case: unconfigured symbol " + t->name);
      if (st->second == DiagramCase::SBot) return {0, -1, {}};
      if (st->second == DiagramCase::STop) return {1, -1, {}};
      int c = dc.cls.at(t->name);
      const auto& ci = dc.classes[c];
      std::size_t gi = 0;
      while (gi < ci.gens.size() && ci.gens[gi]->name != t->name) ++gi;
      QVal v{2, c, {}};
      for (std::size_t i = 0; i < ci.atoms.size(); ++i) {
        if (!((ci.atoms[i] >> gi) & 1)) continue;
        if (c == dc.target_class) {
          if (dc.sigma[i] != 2) v.atoms.insert(2 * (int)i);
          if (dc.sigma[i] != 0) v.atoms.insert(2 * (int)i + 1);
        } else {
          v.atoms.insert((int)i);
        }
      }
      return qv_normalize(dc, v);
    }
    case TermKind::Comp: {
      QVal a = eval_qterm_case(dc, var, t->kids[0]);
      if (a.kind == 0) return {1, -1, {}};
      if (a.kind == 1) return {0, -1, {}};
      QVal v{2, a.cls, {}};
      for (int id : full_atom_set(dc, a.cls))
        if (!a.atoms.count(id)) v.atoms.insert(id);
      return qv_normalize(dc, v);
    }
    case TermKind::Meet: {
      QVal a = eval_qterm_case(dc, var, t->kids[0]);
      QVal b = eval_qterm_case(dc, var, t->kids[1]);
      if (a.kind == 0 || b.kind == 0) return {0, -1, {}};
      if (a.kind == 1) return b;
      if (b.kind == 1) return a;
      if (a.cls != b.cls) return {0, -1, {}};  // cross-class meet collapses
      QVal v{2, a.cls, {}};
      for (int id : a.atoms)
        if (b.atoms.count(id)) v.atoms.insert(id);
      return qv_normalize(dc, v);
    }
    case TermKind::Join: {
      QVal a = eval_qterm_case(dc, var, t->kids[0]);
      QVal b = eval_qterm_case(dc, var, t->kids[1]);
      if (a.kind == 1 || b.kind == 1) return {1, -1, {}};
      if (a.kind == 0) return b;
      if (b.kind == 0) return a;
      if (a.cls != b.cls) return {1, -1, {}};  // cross-class join collapses
      QVal v = a;
      v.atoms.insert(b.atoms.begin(), b.atoms.end());
      return qv_normalize(dc, v);
    }
    default:
      throw std::invalid_argument("eval_qterm_case: not a lattice term");
  }
}

inline bool qval_proper(const QVal& v) { return v.kind == 2; }

inline bool qval_equal(const QVal& a, const QVal& b) {
  if (a.kind != b.kind) return false;
  if (a.kind != 2) return true;
  return a.cls == b.cls && a.atoms == b.atoms;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Q-quantifier mass reduction (the eta(m, u) system)

// Builds the linear system for the quantified Q variable under the case:
// one mass column per minimal element s of the target class with the branch
// constraint (m_s = 0 | 0 < m_s < ell(s) | m_s = ell(s)), the model facts
// (atom masses positive, class masses sum to 1), and every positive R-sort
// literal of the body rewritten over masses and ell-keys.
// Literals that are not R-sort atoms are ignored here (the case decides them).
inline LinearSystem reduce_Q_quantifier(const DiagramCase& dc,
                                        const std::string& var,
                                        const std::vector<Literal>& lits) {
  LinearSystem sys;
  if (dc.target_class < 0)
    throw std::invalid_argument("reduce_Q_quantifier: case has no target class");
  const auto& tci = dc.classes[dc.target_class];
  bool fresh = tci.gens.empty();
  // Columns.
  std::vector<int> mcol(tci.atoms.size());
  std::vector<int> ucol(tci.atoms.size(), -1);
  std::map<std::pair<int, int>, int> other_ucol;  // (class, atom idx) -> col
  auto u_key = [&](int c, std::size_t i) {
    return sys.column("u#" + std::to_string(c) + "#" + std::to_string(i),
                      Term::ell(dc.atom_term(c, dc.classes[c].atoms[i])));
  };
  std::set<int> classes_used;
  for (std::size_t i = 0; i < tci.atoms.size(); ++i) {
    mcol[i] = sys.fresh_existential("m");
    if (!fresh) ucol[i] = u_key(dc.target_class, i);
  }
  if (!fresh) classes_used.insert(dc.target_class);
  // Branch constraints per sigma.
  for (std::size_t i = 0; i < tci.atoms.size(); ++i) {
    auto u_of = [&](LinConstraint& c, const Rat& coef) {
      if (fresh)
        c.constant += coef;  // ell(top) = 1
      else
        c.add_coeff(ucol[i], coef);
    };
    LinConstraint c;
    switch (dc.sigma[i]) {
      case 0:  // s meet y = bot
        c.op = LinConstraint::EQ;
        c.add_coeff(mcol[i], 1);
        sys.cons.push_back(c);
        break;
      case 1: {  // bot < s meet y < s, strictly
        LinConstraint lo;
        lo.op = LinConstraint::LT;
        lo.add_coeff(mcol[i], -1);
        sys.cons.push_back(lo);
        LinConstraint hi;
        hi.op = LinConstraint::LT;
        hi.add_coeff(mcol[i], 1);
        u_of(hi, rat(-1));
        sys.cons.push_back(hi);
        break;
      }
      case 2:  // s meet y = s
        c.op = LinConstraint::EQ;
        c.add_coeff(mcol[i], 1);
        u_of(c, rat(-1));
        sys.cons.push_back(c);
        break;
      default:
        throw std::logic_error("reduce_Q_quantifier: bad sigma");
    }
  }
  // Rewrites an R-sort term to a row over the system's columns; returns false
  // if some ell-argument cannot be evaluated under the case (unconfigured
  // symbols) - the caller keeps such atoms symbolic.
  std::function<bool(const TermPtr&, const Rat&, LinConstraint&)> addterm =
      [&](const TermPtr& t, const Rat& coef, LinConstraint& row) -> bool {
    switch (t->kind) {
      case TermKind::Num:
        row.constant += coef * t->value;
        return true;
      case TermKind::Add:
        return addterm(t->kids[0], coef, row) && addterm(t->kids[1], coef, row);
      case TermKind::Sub:
        return addterm(t->kids[0], coef, row) &&
               addterm(t->kids[1], -coef, row);
      case TermKind::Scale:
        return addterm(t->kids[0], coef * t->value, row);
      case TermKind::Var:
      case TermKind::Param:
        row.add_coeff(sys.column("r#" + t->name, t), coef);
        return true;
      case TermKind::Ell: {
        detail::QVal v;
        try {
          v = detail::eval_qterm_case(dc, var, t->kids[0]);
        } catch (const std::logic_error&) {
          TermPtr n = normalize_term(t);
          row.add_coeff(sys.column("ell#" + term_str(n), n), coef);
          return true;
        }
        if (v.kind == 0) return true;
        if (v.kind == 1) {
          row.constant += coef;
          return true;
        }
        if (v.cls == dc.target_class) {
          for (int id : v.atoms) {
            int i = id / 2;
            if (id & 1) {
              row.add_coeff(mcol[i], coef);  // inside part
            } else {                          // outside part: u_i - m_i
              if (fresh)
                row.constant += coef;
              else
                row.add_coeff(ucol[i], coef);
              row.add_coeff(mcol[i], -coef);
            }
          }
        } else {
          classes_used.insert(v.cls);
          for (int i : v.atoms) {
            auto key = std::make_pair(v.cls, i);
            if (!other_ucol.count(key)) other_ucol[key] = u_key(v.cls, i);
            row.add_coeff(other_ucol[key], coef);
          }
        }
        return true;
      }
      default:
        return false;
    }
  };
  for (const auto& l : lits) {
    if (l.atom->kind != FormKind::Atom) continue;
    if (l.atom->atom != AtomKind::Eq && l.atom->atom != AtomKind::Less)
      continue;
    if (term_sort(l.atom->args[0]) != Sort::R) continue;
    if (!l.positive)
      throw std::logic_error("reduce_Q_quantifier: negated R literal");
    LinConstraint row;
    row.op = l.atom->atom == AtomKind::Eq ? LinConstraint::EQ : LinConstraint::LT;
    if (!addterm(l.atom->args[0], rat(1), row) ||
        !addterm(l.atom->args[1], rat(-1), row))
      throw std::invalid_argument("reduce_Q_quantifier: non-linear R atom");
    sys.cons.push_back(std::move(row));
  }
  // Model facts: nonbottom atoms have positive mass; a class's atoms tile the
  // unit of measure.
  for (int c : classes_used) {
    const auto& ci = dc.classes[c];
    LinConstraint total;
    total.op = LinConstraint::EQ;
    total.constant = -1;
    for (std::size_t i = 0; i < ci.atoms.size(); ++i) {
      int col = c == dc.target_class ? ucol[i] : u_key(c, i);
      if (c != dc.target_class) other_ucol[{c, (int)i}] = col;
      LinConstraint pos;
      pos.op = LinConstraint::LT;
      pos.add_coeff(col, -1);
      sys.facts.push_back(pos);
      total.add_coeff(col, 1);
    }
    sys.facts.push_back(total);
  }
  return sys;
}

// ---------------------------------------------------------------------------
// P-quantifier elimination under a case

// Under the case's similarity pattern, a point exists with the required
// memberships iff within each similarity group the meet of the positive
// targets and the complements of the negative ones is nonbottom (groups sit
// at independent coordinates; nonbottom elements carry infinitely many
// points, so the finitely many excluded points never matter).
inline FormulaPtr eliminate_P(const DiagramCase& dc, const std::string& var,
                              const FormulaPtr& body) {
  DnfFormula dnf = to_dnf(nnf_split(body));
  std::vector<FormulaPtr> out;
  for (const auto& lits : dnf.disjuncts) {
    std::vector<FormulaPtr> parts;
    std::map<std::string, std::pair<bool, bool>> want;  // term key -> pos/neg
    std::map<std::string, TermPtr> terms;
    bool dead = false;
    std::optional<TermPtr> subst_to;
    for (const auto& l : lits) {
      const auto& a = l.atom;
      bool has_var = false;
      for (const auto& [n, s] : free_vars(a)) {
        (void)s;
        if (n == var) has_var = true;
      }
      if (!has_var) {
        parts.push_back(l.positive ? a : Formula::lnot(a));
        continue;
      }
      if (a->atom == AtomKind::Eq) {
        const TermPtr& other = a->args[0]->name == var &&
                                       a->args[0]->kind == TermKind::Var
                                   ? a->args[1]
                                   : a->args[0];
        bool self = other->kind == TermKind::Var && other->name == var;
        if (l.positive) {
          if (!self && !subst_to) subst_to = other;
        } else if (self) {
          dead = true;  // x != x
        }
        continue;  // x != p always avoidable
      }
      if (a->atom == AtomKind::Sqin) {
        TermPtr t = normalize_term(a->args[1]);
        if (t->kind == TermKind::Bot) {
          if (l.positive) dead = true;
          continue;
        }
        if (t->kind == TermKind::Top) {
          if (!l.positive) dead = true;
          continue;
        }
        std::string k = term_str(t);
        terms[k] = t;
        auto& w = want[k];
        (l.positive ? w.first : w.second) = true;
        continue;
      }
      throw std::invalid_argument("eliminate_P: unsupported literal on " + var);
    }
    if (dead) continue;
    if (subst_to) {
      // A positive equality pins the point; substitute and keep the literals.
      std::vector<FormulaPtr> sub;
      for (const auto& l : lits) {
        FormulaPtr g = simplify_atom(
            std::static_pointer_cast<const Formula>(subst(l.atom, {{var, *subst_to}})));
        sub.push_back(l.positive ? g : Formula::lnot(g));
      }
      out.push_back(Formula::land(std::move(sub)));
      continue;
    }
    for (const auto& [k, w] : want)
      if (w.first && w.second) dead = true;  // x in t and x not in t
    if (dead) continue;
    // Conditions per similarity group of the case's term partition; targets
    // not covered by the partition form their own groups.
    std::set<std::string> covered;
    auto group_condition = [&](const std::vector<TermPtr>& grp) -> FormulaPtr {
      TermPtr acc;
      for (const auto& t : grp) {
        std::string k = term_str(t);
        auto it = want.find(k);
        if (it == want.end()) continue;
        covered.insert(k);
        TermPtr piece = it->second.first ? t : Term::comp(t);
        acc = acc ? Term::meet(acc, piece) : piece;
      }
      if (!acc) return Formula::truef();
      return Formula::lnot(atom_eq(normalize_term(acc), Term::bot()));
    };
    for (const auto& grp : dc.term_partition) parts.push_back(group_condition(grp));
    for (const auto& [k, t] : terms)
      if (!covered.count(k)) parts.push_back(group_condition({t}));
    out.push_back(Formula::land(std::move(parts)));
  }
  return Formula::lor(std::move(out));
}

// ---------------------------------------------------------------------------
// The main eliminator

namespace detail {

inline bool formula_mentions(const FormulaPtr& f, const std::string& var) {
  for (const auto& [n, s] : free_vars(f)) {
    (void)s;
    if (n == var) return true;
  }
  return false;
}

inline void collect_symbols(const TermPtr& t, Sort sort,
                            std::map<std::string, TermPtr>& out) {
  if ((t->kind == TermKind::Var || t->kind == TermKind::Param) &&
      t->sort == sort) {
    out.emplace(t->name, t);
    return;
  }
  for (const auto& k : t->kids) collect_symbols(k, sort, out);
}

// All set partitions of {0..n-1}.
inline std::vector<std::vector<std::vector<int>>> set_partitions(int n) {
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<std::vector<int>> cur;
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (auto& grp : cur) {
      grp.push_back(i);
      rec(i + 1);
      grp.pop_back();
    }
    cur.push_back({i});
    rec(i + 1);
    cur.pop_back();
  };
  rec(0);
  return out;
}

inline FormulaPtr lit_formula(const Literal& l) {
  return l.positive ? l.atom : Formula::lnot(l.atom);
}

// --- R-sort existential over one DNF disjunct -------------------------------
inline FormulaPtr elim_disjunct_R(const std::string& var,
                                  const std::vector<Literal>& lits) {
  LinearSystem sys;
  int vcol = sys.column("r#" + var, Term::var(var, Sort::R));
  sys.existential.insert(vcol);
  std::vector<FormulaPtr> pass;
  std::function<void(const TermPtr&, const Rat&, LinConstraint&)> addterm =
      [&](const TermPtr& t, const Rat& coef, LinConstraint& row) {
        switch (t->kind) {
          case TermKind::Num: row.constant += coef * t->value; return;
          case TermKind::Add:
            addterm(t->kids[0], coef, row);
            addterm(t->kids[1], coef, row);
            return;
          case TermKind::Sub:
            addterm(t->kids[0], coef, row);
            addterm(t->kids[1], -coef, row);
            return;
          case TermKind::Scale:
            addterm(t->kids[0], coef * t->value, row);
            return;
          case TermKind::Var:
          case TermKind::Param:
            row.add_coeff(sys.column("r#" + t->name, t), coef);
            return;
          case TermKind::Ell: {
            TermPtr n = normalize_term(t);
            if (n->kind == TermKind::Num) {
              row.constant += coef * n->value;
              return;
            }
            row.add_coeff(sys.column("ell#" + term_str(n), n), coef);
            return;
          }
          default:
            throw std::invalid_argument("qe: non-linear R-sort term " +
                                        term_str(t));
        }
      };
  for (const auto& l : lits) {
    bool is_r = l.atom->kind == FormKind::Atom &&
                (l.atom->atom == AtomKind::Eq || l.atom->atom == AtomKind::Less) &&
                term_sort(l.atom->args[0]) == Sort::R;
    if (!is_r) {
      if (formula_mentions(l.atom, var))
        throw std::invalid_argument("qe: R variable in non-R literal");
      pass.push_back(lit_formula(l));
      continue;
    }
    if (!l.positive) throw std::logic_error("qe: negated R literal after nnf");
    LinConstraint row;
    row.op = l.atom->atom == AtomKind::Eq ? LinConstraint::EQ : LinConstraint::LT;
    addterm(l.atom->args[0], rat(1), row);
    addterm(l.atom->args[1], rat(-1), row);
    sys.cons.push_back(std::move(row));
  }
  FormulaPtr rendered = render_system(eliminate_R(std::move(sys)));
  pass.push_back(rendered);
  return Formula::land(std::move(pass));
}

// --- P-sort existential over one DNF disjunct -------------------------------
inline FormulaPtr elim_disjunct_P(const std::string& var,
                                  const std::vector<Literal>& lits) {
  // Gather the membership target terms and branch over their similarity
  // patterns; eliminate_P does the per-pattern reduction.
  std::map<std::string, TermPtr> targets;
  for (const auto& l : lits) {
    if (l.atom->kind != FormKind::Atom || l.atom->atom != AtomKind::Sqin)
      continue;
    if (!(l.atom->args[0]->kind == TermKind::Var &&
          l.atom->args[0]->name == var))
      continue;
    TermPtr t = normalize_term(l.atom->args[1]);
    if (t->kind == TermKind::Bot || t->kind == TermKind::Top) continue;
    targets.emplace(term_str(t), t);
  }
  // A pinned point (positive equality) needs no pattern split.
  for (const auto& l : lits)
    if (l.positive && l.atom->kind == FormKind::Atom &&
        l.atom->atom == AtomKind::Eq && formula_mentions(l.atom, var)) {
      DiagramCase dc;
      std::vector<FormulaPtr> conj;
      for (const auto& m : lits) conj.push_back(lit_formula(m));
      return eliminate_P(dc, var, Formula::land(std::move(conj)));
    }
  std::vector<TermPtr> tv;
  for (const auto& [k, t] : targets) tv.push_back(t);
  if (tv.size() > 6)
    throw std::invalid_argument("qe: case-split explosion (membership targets)");
  std::vector<FormulaPtr> conj;
  for (const auto& m : lits) conj.push_back(lit_formula(m));
  FormulaPtr body = Formula::land(std::move(conj));
  if (tv.size() <= 1) {
    DiagramCase dc;
    if (!tv.empty()) dc.term_partition = {{tv[0]}};
    return eliminate_P(dc, var, body);
  }
  std::vector<FormulaPtr> branches;
  for (const auto& part : set_partitions((int)tv.size())) {
    DiagramCase dc;
    for (const auto& grp : part) {
      std::vector<TermPtr> g;
      for (int i : grp) g.push_back(tv[i]);
      dc.term_partition.push_back(std::move(g));
    }
    branches.push_back(
        Formula::land({dc.guard(), eliminate_P(dc, var, body)}));
  }
  return Formula::lor(std::move(branches));
}

// --- Q-sort existential over one DNF disjunct -------------------------------
struct QBranchLimits {
  std::size_t max_symbols = 3;
  std::size_t max_points = 3;
  std::size_t max_class_gens = 3;
  std::size_t max_branches = 200000;
};

inline FormulaPtr elim_disjunct_Q(const std::string& var,
                                  const std::vector<Literal>& lits,
                                  TheoryId theory,
                                  const QBranchLimits& lim = {}) {
  std::vector<FormulaPtr> branches;
  // Substitution branches y := bot / top.
  for (const TermPtr& val : {Term::bot(), Term::top()}) {
    std::vector<FormulaPtr> conj;
    for (const auto& l : lits) {
      FormulaPtr g = nnf_split(
          std::static_pointer_cast<const Formula>(subst(l.atom, {{var, val}})),
          !l.positive);
      conj.push_back(g);
    }
    branches.push_back(Formula::land(std::move(conj)));
  }
  // Configuration branches: y proper.
  std::vector<Literal> varlits, pass;
  for (const auto& l : lits)
    (formula_mentions(l.atom, var) ? varlits : pass).push_back(l);
  std::map<std::string, TermPtr> symbols, points;
  for (const auto& l : varlits)
    for (const auto& a : l.atom->args) {
      collect_symbols(a, Sort::Q, symbols);
      collect_symbols(a, Sort::P, points);
    }
  symbols.erase(var);
  if (symbols.size() > lim.max_symbols || points.size() > lim.max_points)
    throw std::invalid_argument("qe: case-split explosion (Q configuration)");
  std::vector<std::string> syms;
  std::vector<TermPtr> symt;
  for (const auto& [n, t] : symbols) {
    syms.push_back(n);
    symt.push_back(t);
  }
  std::vector<std::string> pts;
  std::vector<TermPtr> ptt;
  for (const auto& [n, t] : points) {
    pts.push_back(n);
    ptt.push_back(t);
  }
  FormulaPtr passthrough;
  {
    std::vector<FormulaPtr> pf;
    for (const auto& l : pass) pf.push_back(lit_formula(l));
    passthrough = Formula::land(std::move(pf));
  }
  std::size_t branch_count = 0;
  auto bump = [&] {
    if (++branch_count > lim.max_branches)
      throw std::invalid_argument("qe: case-split explosion (branch budget)");
  };

  // Evaluates the case: decides the non-R var-literals and reduces the R ones;
  // pushes the resulting branch formula.
  auto emit_case = [&](const DiagramCase& dc) {
    bump();
    for (const auto& l : varlits) {
      if (l.atom->kind != FormKind::Atom) return;
      bool truth;
      switch (l.atom->atom) {
        case AtomKind::Eq: {
          if (term_sort(l.atom->args[0]) == Sort::R) continue;  // linear later
          if (term_sort(l.atom->args[0]) == Sort::P) return;    // cannot occur
          auto a = detail::eval_qterm_case(dc, var, l.atom->args[0]);
          auto b = detail::eval_qterm_case(dc, var, l.atom->args[1]);
          truth = detail::qval_equal(a, b);
          break;
        }
        case AtomKind::Sim: {
          auto a = detail::eval_qterm_case(dc, var, l.atom->args[0]);
          auto b = detail::eval_qterm_case(dc, var, l.atom->args[1]);
          truth = detail::qval_proper(a) && detail::qval_proper(b) &&
                  a.cls == b.cls;
          break;
        }
        case AtomKind::Sqin: {
          auto v = detail::eval_qterm_case(dc, var, l.atom->args[1]);
          if (v.kind == 0) {
            truth = false;
            break;
          }
          if (v.kind == 1) {
            truth = true;
            break;
          }
          if (v.cls != dc.target_class)
            throw std::logic_error("qe: membership escaped the target class");
          const std::string& pn = l.atom->args[0]->name;
          int grp = -1;
          for (std::size_t g = 0; g < dc.point_groups.size(); ++g)
            for (const auto& m : dc.point_groups[g])
              if (m == pn) grp = (int)g;
          if (grp < 0) throw std::logic_error("qe: unconfigured point " + pn);
          int base = dc.point_atom[grp];
          int refined = 2 * base + (dc.point_in[grp] ? 1 : 0);
          truth = v.atoms.count(refined) > 0;
          break;
        }
        case AtomKind::Less:
          continue;  // R-sort, handled linearly
        default:
          return;
      }
      if (truth != l.positive) return;  // literal fails under this case
    }
    FormulaPtr lin = Formula::truef();
    bool any_r = false;
    for (const auto& l : varlits)
      if (l.atom->kind == FormKind::Atom &&
          (l.atom->atom == AtomKind::Eq || l.atom->atom == AtomKind::Less) &&
          term_sort(l.atom->args[0]) == Sort::R)
        any_r = true;
    if (theory == TheoryId::THalfInfPQ) {
      if (any_r)
        throw std::invalid_argument("qe: measure atoms in the PQ reduct");
    } else {
      // Include the passthrough R-atoms too so shared ell-keys connect.
      std::vector<Literal> rlits = varlits;
      for (const auto& l : pass)
        if (l.positive && l.atom->kind == FormKind::Atom &&
            (l.atom->atom == AtomKind::Eq || l.atom->atom == AtomKind::Less) &&
            term_sort(l.atom->args[0]) == Sort::R)
          rlits.push_back(l);
      LinearSystem sys = reduce_Q_quantifier(dc, var, rlits);
      lin = render_system(eliminate_R(std::move(sys)));
      if (lin->kind == FormKind::False) return;
    }
    // Passthrough R-atoms were folded into the system; drop them from the
    // passthrough conjunct for THalfInf to avoid duplication.
    std::vector<FormulaPtr> conj{dc.guard()};
    for (const auto& l : pass) {
      bool folded = theory != TheoryId::THalfInfPQ && l.positive &&
                    l.atom->kind == FormKind::Atom &&
                    (l.atom->atom == AtomKind::Eq ||
                     l.atom->atom == AtomKind::Less) &&
                    term_sort(l.atom->args[0]) == Sort::R;
      if (!folded) conj.push_back(lit_formula(l));
    }
    conj.push_back(lin);
    branches.push_back(Formula::land(std::move(conj)));
  };

  // Enumerate statuses, class partitions, target choice, atom patterns,
  // sigma, and point placements.
  std::size_t ns = syms.size();
  std::vector<int> status(ns, 0);
  std::function<void(std::size_t)> enum_status = [&](std::size_t i) {
    if (i < ns) {
      for (int s = 0; s < 3; ++s) {
        status[i] = s;
        enum_status(i + 1);
      }
      return;
    }
    std::vector<int> proper;
    for (std::size_t k = 0; k < ns; ++k)
      if (status[k] == 2) proper.push_back((int)k);
    for (const auto& part : set_partitions((int)proper.size())) {
      // Classes from the partition; plus optionally a fresh target class.
      for (int target = -1; target < (int)part.size(); ++target) {
        DiagramCase base;
        for (std::size_t k = 0; k < ns; ++k) {
          base.status[syms[k]] = (DiagramCase::Status)status[k];
          base.symterm[syms[k]] = symt[k];
        }
        for (std::size_t c = 0; c < part.size(); ++c) {
          DiagramCase::ClassInfo ci;
          for (int pi : part[c]) {
            ci.gens.push_back(symt[proper[pi]]);
            base.cls[syms[proper[pi]]] = (int)c;
          }
          if (ci.gens.size() > lim.max_class_gens)
            throw std::invalid_argument("qe: case-split explosion (class size)");
          base.classes.push_back(std::move(ci));
        }
        if (target < 0) {
          base.classes.push_back({});  // fresh class, no generators
          base.target_class = (int)base.classes.size() - 1;
        } else {
          base.target_class = target;
        }
        // Atom nonbottom patterns per class.
        std::function<void(std::size_t, DiagramCase&)> enum_atoms =
            [&](std::size_t c, DiagramCase& dc) {
              if (c == dc.classes.size()) {
                // Sigma over the target atoms.
                auto& tci = dc.classes[dc.target_class];
                if (tci.gens.empty()) tci.atoms = {0u};
                std::size_t na = tci.atoms.size();
                dc.sigma.assign(na, 0);
                std::function<void(std::size_t)> enum_sigma =
                    [&](std::size_t i) {
                      if (i < na) {
                        int lo = 0, hi = 2;
                        if (tci.gens.empty()) lo = hi = 1;  // fresh: partial
                        for (int s = lo; s <= hi; ++s) {
                          dc.sigma[i] = s;
                          enum_sigma(i + 1);
                        }
                        return;
                      }
                      bool all_empty = true, all_full = true;
                      for (int s : dc.sigma) {
                        if (s != 0) all_empty = false;
                        if (s != 2) all_full = false;
                      }
                      if (all_empty || all_full) return;  // y = bot/top
                      // Point placements.
                      std::function<void(const std::vector<std::vector<int>>&)>
                          place;
                      auto enum_points = [&]() {
                        if (pts.empty()) {
                          emit_case(dc);
                          return;
                        }
                        for (const auto& ppart :
                             set_partitions((int)pts.size())) {
                          dc.point_groups.clear();
                          dc.point_term.clear();
                          for (const auto& grp : ppart) {
                            std::vector<std::string> g;
                            for (int i : grp) {
                              g.push_back(pts[i]);
                              dc.point_term[pts[i]] = ptt[i];
                            }
                            dc.point_groups.push_back(std::move(g));
                          }
                          std::size_t ng = dc.point_groups.size();
                          dc.point_atom.assign(ng, 0);
                          dc.point_in.assign(ng, 0);
                          std::function<void(std::size_t)> placep =
                              [&](std::size_t g) {
                                if (g == ng) {
                                  emit_case(dc);
                                  return;
                                }
                                for (std::size_t a = 0; a < tci.atoms.size();
                                     ++a) {
                                  dc.point_atom[g] = (int)a;
                                  if (dc.sigma[a] == 1) {
                                    for (char in : {char(0), char(1)}) {
                                      dc.point_in[g] = in;
                                      placep(g + 1);
                                    }
                                  } else {
                                    dc.point_in[g] = dc.sigma[a] == 2;
                                    placep(g + 1);
                                  }
                                }
                              };
                          placep(0);
                        }
                      };
                      (void)place;
                      enum_points();
                    };
                enum_sigma(0);
                if (tci.gens.empty()) tci.atoms.clear();
                return;
              }
              auto& ci = dc.classes[c];
              if (ci.gens.empty()) {
                enum_atoms(c + 1, dc);
                return;
              }
              std::size_t nmask = 1ull << ci.gens.size();
              for (unsigned long pat = 0; pat < (1ull << nmask); ++pat) {
                ci.atoms.clear();
                for (unsigned m = 0; m < nmask; ++m)
                  if ((pat >> m) & 1) ci.atoms.push_back(m);
                // Every generator must be proper: some atom on each side.
                bool ok = true;
                for (std::size_t gi = 0; gi < ci.gens.size(); ++gi) {
                  bool in = false, outside = false;
                  for (unsigned m : ci.atoms)
                    ((m >> gi) & 1 ? in : outside) = true;
                  if (!in || !outside) ok = false;
                }
                if (ok && !ci.atoms.empty()) enum_atoms(c + 1, dc);
              }
              ci.atoms.clear();
            };
        enum_atoms(0, base);
      }
    }
  };
  enum_status(0);
  return Formula::lor(std::move(branches));
}

}  // namespace detail

// Eliminates one existential quantifier over a quantifier-free body.
inline FormulaPtr exists_elim(const std::string& var, Sort sort,
                              const FormulaPtr& body, TheoryId theory) {
  DnfFormula dnf = to_dnf(nnf_split(body), 32);
  std::vector<FormulaPtr> out;
  for (const auto& lits : dnf.disjuncts) {
    switch (sort) {
      case Sort::R:
        if (theory == TheoryId::THalfInfPQ)
          throw std::invalid_argument("qe: R-sort quantifier in the PQ reduct");
        out.push_back(detail::elim_disjunct_R(var, lits));
        break;
      case Sort::P:
        out.push_back(detail::elim_disjunct_P(var, lits));
        break;
      case Sort::Q:
        out.push_back(detail::elim_disjunct_Q(var, lits, theory));
        break;
      default:
        throw std::invalid_argument("qe: unsupported quantifier sort");
    }
  }
  return Formula::lor(std::move(out));
}

inline FormulaPtr eliminate_quantifiers(const FormulaPtr& f, TheoryId theory) {
  if (theory != TheoryId::THalfInf && theory != TheoryId::THalfInfPQ)
    throw std::invalid_argument("eliminate_quantifiers: unsupported theory");
  switch (f->kind) {
    case FormKind::True:
    case FormKind::False:
      return f;
    case FormKind::Atom:
      return simplify_atom(f);
    case FormKind::Not:
      return Formula::lnot(eliminate_quantifiers(f->kids[0], theory));
    case FormKind::And:
    case FormKind::Or: {
      std::vector<FormulaPtr> kids;
      for (const auto& k : f->kids)
        kids.push_back(eliminate_quantifiers(k, theory));
      return f->kind == FormKind::And ? Formula::land(std::move(kids))
                                      : Formula::lor(std::move(kids));
    }
    case FormKind::Exists: {
      FormulaPtr body = eliminate_quantifiers(f->kids[0], theory);
      return simplify_bool(exists_elim(f->qvar, f->qsort, body, theory));
    }
    case FormKind::Forall: {
      FormulaPtr body = eliminate_quantifiers(f->kids[0], theory);
      return simplify_bool(Formula::lnot(
          exists_elim(f->qvar, f->qsort, Formula::lnot(body), theory)));
    }
  }
  throw std::logic_error("eliminate_quantifiers: unknown node");
}

}  // namespace kmlab
