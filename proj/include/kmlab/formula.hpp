#pragma once

// Multi-sorted first-order syntax trees shared by every theory backend:
// relational atoms (R/E), the P/Q membership and similarity atoms of the
// half-full theories, Q-sort lattice terms, and R-sort linear terms over
// l(...) values.  Trees are immutable and shared via shared_ptr.

#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmlab/rational.hpp"

namespace kmlab {

enum class Sort { P, Q, R, V };

inline std::string sort_name(Sort s) {
  switch (s) {
    case Sort::P: return "P";
    case Sort::Q: return "Q";
    case Sort::R: return "R";
    case Sort::V: return "V";
  }
  return "?";
}

inline std::optional<Sort> sort_from_name(const std::string& n) {
  if (n == "P") return Sort::P;
  if (n == "Q") return Sort::Q;
  if (n == "R") return Sort::R;
  if (n == "V" || n == "Vertex" || n == "vertex") return Sort::V;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Terms

enum class TermKind {
  Ident,  // unresolved name (parser output before sort resolution)
  Var,    // sorted variable
  Param,  // sorted fragment parameter
  Bot, Top, Meet, Join, Comp,  // Q-sort lattice
  Ell,                          // l(q-term), R-sort
  Num,                          // rational constant, R-sort
  Add, Sub, Scale               // R-sort linear arithmetic
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind;
  Sort sort = Sort::R;        // meaningful for Var/Param; fixed by kind otherwise
  std::string name;           // Ident/Var/Param
  std::vector<TermPtr> kids;  // Meet/Join/Comp/Ell/Add/Sub/Scale
  Rat value = 0;              // Num; also the coefficient of Scale

  static TermPtr ident(std::string n) {
    auto t = std::make_shared<Term>();
    t->kind = TermKind::Ident;
    t->name = std::move(n);
    return t;
  }
  static TermPtr var(std::string n, Sort s) {
    auto t = std::make_shared<Term>();
    t->kind = TermKind::Var;
    t->sort = s;
    t->name = std::move(n);
    return t;
  }
  static TermPtr param(std::string n, Sort s) {
    auto t = std::make_shared<Term>();
    t->kind = TermKind::Param;
    t->sort = s;
    t->name = std::move(n);
    return t;
  }
  static TermPtr node(TermKind k, std::vector<TermPtr> kids) {
    auto t = std::make_shared<Term>();
    t->kind = k;
    t->kids = std::move(kids);
    return t;
  }
  static TermPtr bot() { return node(TermKind::Bot, {}); }
  static TermPtr top() { return node(TermKind::Top, {}); }
  static TermPtr meet(TermPtr a, TermPtr b) { return node(TermKind::Meet, {a, b}); }
  static TermPtr join(TermPtr a, TermPtr b) { return node(TermKind::Join, {a, b}); }
  static TermPtr comp(TermPtr a) { return node(TermKind::Comp, {a}); }
  static TermPtr ell(TermPtr q) { return node(TermKind::Ell, {q}); }
  static TermPtr num(Rat v) {
    auto t = std::make_shared<Term>();
    t->kind = TermKind::Num;
    t->value = std::move(v);
    return t;
  }
  static TermPtr add(TermPtr a, TermPtr b) { return node(TermKind::Add, {a, b}); }
  static TermPtr sub(TermPtr a, TermPtr b) { return node(TermKind::Sub, {a, b}); }
  static TermPtr scale(Rat c, TermPtr a) {
    auto t = std::make_shared<Term>();
    t->kind = TermKind::Scale;
    t->value = std::move(c);
    t->kids = {a};
    return t;
  }
};

inline std::string term_str(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Ident:
    case TermKind::Var:
    case TermKind::Param: return t->name;
    case TermKind::Bot: return "bot";
    case TermKind::Top: return "top";
    case TermKind::Meet:
      return "(" + term_str(t->kids[0]) + " meet " + term_str(t->kids[1]) + ")";
    case TermKind::Join:
      return "(" + term_str(t->kids[0]) + " join " + term_str(t->kids[1]) + ")";
    case TermKind::Comp: return "(" + term_str(t->kids[0]) + ")^c";
    case TermKind::Ell: return "l(" + term_str(t->kids[0]) + ")";
    case TermKind::Num: return rat_str(t->value);
    case TermKind::Add:
      return "(" + term_str(t->kids[0]) + " + " + term_str(t->kids[1]) + ")";
    case TermKind::Sub:
      return "(" + term_str(t->kids[0]) + " - " + term_str(t->kids[1]) + ")";
    case TermKind::Scale:
      return "(" + rat_str(t->value) + " * " + term_str(t->kids[0]) + ")";
  }
  return "?";
}

inline bool term_eq(const TermPtr& a, const TermPtr& b) {
  return term_str(a) == term_str(b);
}

// Sort of a fully resolved term.
inline Sort term_sort(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Var:
    case TermKind::Param: return t->sort;
    case TermKind::Bot:
    case TermKind::Top:
    case TermKind::Meet:
    case TermKind::Join:
    case TermKind::Comp: return Sort::Q;
    default: return Sort::R;
  }
}

// ---------------------------------------------------------------------------
// Formulas

enum class FormKind { Atom, Not, And, Or, Exists, Forall, True, False };
enum class AtomKind { Sqin, Sim, Eq, Less, Rel };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FormKind kind;
  AtomKind atom = AtomKind::Rel;  // for Atom
  std::string rel;                // relation name (Rel atoms)
  std::vector<TermPtr> args;      // Atom arguments
  std::vector<FormulaPtr> kids;   // Not (1), And/Or (>=1), quantifier body (1)
  std::string qvar;               // quantified variable
  Sort qsort = Sort::P;

  static FormulaPtr truef() { auto f = std::make_shared<Formula>(); f->kind = FormKind::True; return f; }
  static FormulaPtr falsef() { auto f = std::make_shared<Formula>(); f->kind = FormKind::False; return f; }
  static FormulaPtr make_atom(AtomKind k, std::vector<TermPtr> args,
                              std::string rel = "") {
    auto f = std::make_shared<Formula>();
    f->kind = FormKind::Atom;
    f->atom = k;
    f->args = std::move(args);
    f->rel = std::move(rel);
    return f;
  }
  static FormulaPtr lnot(FormulaPtr a) {
    if (a->kind == FormKind::True) return falsef();
    if (a->kind == FormKind::False) return truef();
    auto f = std::make_shared<Formula>();
    f->kind = FormKind::Not;
    f->kids = {std::move(a)};
    return f;
  }
  static FormulaPtr land(std::vector<FormulaPtr> kids) {
    if (kids.empty()) return truef();
    if (kids.size() == 1) return kids[0];
    auto f = std::make_shared<Formula>();
    f->kind = FormKind::And;
    f->kids = std::move(kids);
    return f;
  }
  static FormulaPtr lor(std::vector<FormulaPtr> kids) {
    if (kids.empty()) return falsef();
    if (kids.size() == 1) return kids[0];
    auto f = std::make_shared<Formula>();
    f->kind = FormKind::Or;
    f->kids = std::move(kids);
    return f;
  }
  static FormulaPtr quant(FormKind k, std::string v, Sort s, FormulaPtr body) {
    auto f = std::make_shared<Formula>();
    f->kind = k;
    f->qvar = std::move(v);
    f->qsort = s;
    f->kids = {std::move(body)};
    return f;
  }
};

inline FormulaPtr atom_sqin(TermPtr p, TermPtr q) {
  return Formula::make_atom(AtomKind::Sqin, {p, q});
}
inline FormulaPtr atom_sim(TermPtr a, TermPtr b) {
  return Formula::make_atom(AtomKind::Sim, {a, b});
}
inline FormulaPtr atom_eq(TermPtr a, TermPtr b) {
  return Formula::make_atom(AtomKind::Eq, {a, b});
}
inline FormulaPtr atom_less(TermPtr a, TermPtr b) {
  return Formula::make_atom(AtomKind::Less, {a, b});
}
inline FormulaPtr atom_rel(std::string name, std::vector<TermPtr> args) {
  return Formula::make_atom(AtomKind::Rel, std::move(args), std::move(name));
}

inline std::string formula_str(const FormulaPtr& f) {
  switch (f->kind) {
    case FormKind::True: return "true";
    case FormKind::False: return "false";
    case FormKind::Atom:
      switch (f->atom) {
        case AtomKind::Sqin:
          return term_str(f->args[0]) + " sqin " + term_str(f->args[1]);
        case AtomKind::Sim:
          return term_str(f->args[0]) + " sim " + term_str(f->args[1]);
        case AtomKind::Eq:
          return term_str(f->args[0]) + " = " + term_str(f->args[1]);
        case AtomKind::Less:
          return term_str(f->args[0]) + " < " + term_str(f->args[1]);
        case AtomKind::Rel: {
          std::string s = f->rel + "(";
          for (std::size_t i = 0; i < f->args.size(); ++i) {
            if (i) s += ",";
            s += term_str(f->args[i]);
          }
          return s + ")";
        }
      }
      return "?";
    case FormKind::Not: return "!(" + formula_str(f->kids[0]) + ")";
    case FormKind::And:
    case FormKind::Or: {
      std::string op = f->kind == FormKind::And ? " & " : " | ";
      std::string s = "(";
      for (std::size_t i = 0; i < f->kids.size(); ++i) {
        if (i) s += op;
        s += formula_str(f->kids[i]);
      }
      return s + ")";
    }
    case FormKind::Exists:
    case FormKind::Forall: {
      std::string q = f->kind == FormKind::Exists ? "exists " : "forall ";
      return q + f->qvar + ":" + sort_name(f->qsort) + ". (" +
             formula_str(f->kids[0]) + ")";
    }
  }
  return "?";
}

inline bool formula_eq(const FormulaPtr& a, const FormulaPtr& b) {
  return formula_str(a) == formula_str(b);
}

inline bool is_qf(const FormulaPtr& f) {
  if (f->kind == FormKind::Exists || f->kind == FormKind::Forall) return false;
  for (const auto& k : f->kids)
    if (!is_qf(k)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Variable utilities

inline void collect_term_vars(const TermPtr& t,
                              std::map<std::string, Sort>& out) {
  if (t->kind == TermKind::Var) out[t->name] = t->sort;
  if (t->kind == TermKind::Ident)
    throw std::logic_error("collect_term_vars: unresolved identifier " + t->name);
  for (const auto& k : t->kids) collect_term_vars(k, out);
}

inline void collect_free_vars(const FormulaPtr& f, std::set<std::string>& bound,
                              std::map<std::string, Sort>& out) {
  if (f->kind == FormKind::Atom) {
    std::map<std::string, Sort> vars;
    for (const auto& a : f->args) collect_term_vars(a, vars);
    for (auto& [n, s] : vars)
      if (!bound.count(n)) out[n] = s;
    return;
  }
  if (f->kind == FormKind::Exists || f->kind == FormKind::Forall) {
    bool inserted = bound.insert(f->qvar).second;
    collect_free_vars(f->kids[0], bound, out);
    if (inserted) bound.erase(f->qvar);
    return;
  }
  for (const auto& k : f->kids) collect_free_vars(k, bound, out);
}

inline std::map<std::string, Sort> free_vars(const FormulaPtr& f) {
  std::set<std::string> bound;
  std::map<std::string, Sort> out;
  collect_free_vars(f, bound, out);
  return out;
}

inline void collect_term_params(const TermPtr& t,
                                std::map<std::string, Sort>& out) {
  if (t->kind == TermKind::Param) out[t->name] = t->sort;
  for (const auto& k : t->kids) collect_term_params(k, out);
}

inline void collect_params(const FormulaPtr& f, std::map<std::string, Sort>& out) {
  for (const auto& a : f->args) collect_term_params(a, out);
  for (const auto& k : f->kids) collect_params(k, out);
}

// Capture-naive substitution of terms for free variables; callers only
// substitute closed (variable-free) terms, so capture cannot occur.
inline TermPtr subst_term(const TermPtr& t,
                          const std::map<std::string, TermPtr>& repl) {
  if (t->kind == TermKind::Var) {
    auto it = repl.find(t->name);
    return it == repl.end() ? t : it->second;
  }
  if (t->kids.empty()) return t;
  auto copy = std::make_shared<Term>(*t);
  for (auto& k : copy->kids) k = subst_term(k, repl);
  return copy;
}

inline FormulaPtr subst(const FormulaPtr& f,
                        const std::map<std::string, TermPtr>& repl) {
  if (f->kind == FormKind::Atom) {
    auto copy = std::make_shared<Formula>(*f);
    for (auto& a : copy->args) a = subst_term(a, repl);
    return copy;
  }
  if (f->kind == FormKind::Exists || f->kind == FormKind::Forall) {
    auto inner = repl;
    inner.erase(f->qvar);
    auto copy = std::make_shared<Formula>(*f);
    copy->kids = {subst(f->kids[0], inner)};
    return copy;
  }
  if (f->kids.empty()) return f;
  auto copy = std::make_shared<Formula>(*f);
  for (auto& k : copy->kids) k = subst(k, repl);
  return copy;
}

// Renames a free variable into a parameter of the same sort.
inline FormulaPtr var_to_param(const FormulaPtr& f, const std::string& var,
                               const std::string& param, Sort s) {
  return subst(f, {{var, Term::param(param, s)}});
}

// ---------------------------------------------------------------------------
// Linear normal form for R-sort terms: constant + sum of coeff * basis, where
// a basis element is an R variable/parameter or an l(q-term) atom, keyed by
// its printed form.

struct LinForm {
  Rat constant = 0;
  std::map<std::string, std::pair<Rat, TermPtr>> coeffs;

  void add(const Rat& c, const TermPtr& basis) {
    std::string key = term_str(basis);
    auto [it, fresh] = coeffs.try_emplace(key, c, basis);
    if (!fresh) it->second.first += c;
    if (it->second.first == 0) coeffs.erase(it);
  }
  void add(const LinForm& o, const Rat& scale) {
    constant += o.constant * scale;
    for (const auto& [k, cb] : o.coeffs) add(cb.first * scale, cb.second);
  }
  bool is_constant() const { return coeffs.empty(); }
};

inline LinForm linearize(const TermPtr& t) {
  LinForm out;
  switch (t->kind) {
    case TermKind::Num: out.constant = t->value; break;
    case TermKind::Var:
    case TermKind::Param:
      if (t->sort != Sort::R)
        throw std::invalid_argument("linearize: non-R symbol " + t->name);
      out.add(1, t);
      break;
    case TermKind::Ell: out.add(1, t); break;
    case TermKind::Add:
      out = linearize(t->kids[0]);
      out.add(linearize(t->kids[1]), 1);
      break;
    case TermKind::Sub:
      out = linearize(t->kids[0]);
      out.add(linearize(t->kids[1]), -1);
      break;
    case TermKind::Scale:
      out = linearize(t->kids[0]);
      out.constant *= t->value;
      for (auto& [k, cb] : out.coeffs) cb.first *= t->value;
      {  // drop zeroed entries if scale was 0
        LinForm clean;
        clean.constant = out.constant;
        for (auto& [k, cb] : out.coeffs)
          if (cb.first != 0) clean.coeffs.emplace(k, cb);
        out = clean;
      }
      break;
    default:
      throw std::invalid_argument("linearize: not an R-sort term: " + term_str(t));
  }
  return out;
}

// lhs - rhs as a linear form (atom "lhs = rhs" becomes form = 0, "<" form < 0).
inline LinForm lin_diff(const TermPtr& lhs, const TermPtr& rhs) {
  LinForm out = linearize(lhs);
  out.add(linearize(rhs), -1);
  return out;
}

}  // namespace kmlab
