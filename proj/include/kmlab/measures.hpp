#pragma once

// Keisler measures over fragments: Dirac and averaging measures, the
// coin-flip measure, measures generated by independent families, the
// cube-Lebesgue measure on the point sort, definable schema measures,
// convex combinations, and rule-driven generic types.  All evaluation is
// exact rational.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmlab/dnf.hpp"
#include "kmlab/theories.hpp"
#include "kmlab/typespace.hpp"

namespace kmlab {

struct Measure;
using MeasurePtr = std::shared_ptr<const Measure>;

struct SchemaCell {
  FormulaPtr guard;  // over the parameter variables
  Rat value;
};

struct Measure {
  enum class Kind {
    Dirac,         // point mass at a standard element
    DiracType,     // point mass at a complete qf type
    Average,       // uniform average over a tuple of elements
    CoinFlip,      // generic measure (independent relation atoms)
    IndepFamily,   // product measure over an independent family
    CubeLebesgue,  // lambda* on the P sort of T^inf_{1/2}
    Schema,        // definable: (guard, value) partition over parameters
    Convex,        // weighted combination
    Generic        // rule-driven invariant type
  };

  Kind kind = Kind::Dirac;
  std::string var = "x";  // object variable
  Sort sort = Sort::V;
  std::string name;  // diagnostic label

  std::vector<StdValue> elements;              // Dirac (1) / Average (n)
  std::shared_ptr<const QfType> type;          // DiracType
  Rat bias = rat(1, 2);                        // CoinFlip
  std::vector<FormulaPtr> family;              // IndepFamily
  std::vector<Rat> fvals;                      // IndepFamily
  FormulaPtr pattern;                          // Schema: phi(x, ybar)
  std::vector<std::pair<std::string, Sort>> yvars;  // Schema parameters
  std::vector<SchemaCell> cells;               // Schema
  std::vector<Rat> weights;                    // Convex
  std::vector<MeasurePtr> components;          // Convex
  std::function<Rat(const FormulaPtr&, const Fragment&)> generic;  // Generic

  // Optional extras for Generic measures that are complete types:
  // `realizer` extends a fragment by one parameter realizing the type at
  // fragment scale and returns its name; `fiber` reduces phi(x, pt) to a
  // quantifier-free condition on the point variable pt whose truth equals the
  // {0,1}-valued fiber function F^phi (used against CubeLebesgue).
  std::function<std::string(Fragment&)> realizer;
  std::function<FormulaPtr(const FormulaPtr&, const std::string&,
                           const Fragment&)> fiber;
};

// ---------------------------------------------------------------------------
// Constructors

inline MeasurePtr dirac_measure(StdValue element, std::string var, Sort sort,
                                std::string name = "dirac") {
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::Dirac;
  m->elements = {std::move(element)};
  m->var = std::move(var);
  m->sort = sort;
  m->name = std::move(name);
  return m;
}

inline MeasurePtr dirac_type_measure(QfType t, std::string name = "dirac-type") {
  if (t.vars.size() != 1)
    throw std::invalid_argument("dirac_type_measure: expected a 1-variable type");
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::DiracType;
  m->var = t.vars[0].first;
  m->sort = t.vars[0].second;
  m->type = std::make_shared<const QfType>(std::move(t));
  m->name = std::move(name);
  return m;
}

inline MeasurePtr average_measure(std::vector<StdValue> elements,
                                  std::string var, Sort sort,
                                  std::string name = "average") {
  if (elements.empty())
    throw std::invalid_argument("average_measure: empty tuple");
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::Average;
  m->elements = std::move(elements);
  m->var = std::move(var);
  m->sort = sort;
  m->name = std::move(name);
  return m;
}

inline MeasurePtr coin_flip_measure(std::string var = "x",
                                    Rat bias = rat(1, 2),
                                    std::string name = "coin-flip") {
  if (bias < 0 || bias > 1)
    throw std::invalid_argument("coin_flip_measure: bias outside [0,1]");
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::CoinFlip;
  m->var = std::move(var);
  m->sort = Sort::V;
  m->bias = std::move(bias);
  m->name = std::move(name);
  return m;
}

inline MeasurePtr cube_lebesgue_measure(std::string var = "x",
                                        std::string name = "cube-lebesgue") {
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::CubeLebesgue;
  m->var = std::move(var);
  m->sort = Sort::P;
  m->name = std::move(name);
  return m;
}

inline MeasurePtr generic_type_measure(
    std::string var, Sort sort,
    std::function<Rat(const FormulaPtr&, const Fragment&)> eval,
    std::string name,
    std::function<std::string(Fragment&)> realizer = {},
    std::function<FormulaPtr(const FormulaPtr&, const std::string&,
                             const Fragment&)> fiber = {}) {
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::Generic;
  m->var = std::move(var);
  m->sort = sort;
  m->generic = std::move(eval);
  m->name = std::move(name);
  m->realizer = std::move(realizer);
  m->fiber = std::move(fiber);
  return m;
}

// A Generic measure that is a rule-driven complete type: evaluation realizes
// the rule over a scratch copy of the fragment and reads off the truth value.
inline MeasurePtr rule_type_measure(
    std::string var, Sort sort,
    std::function<std::string(Fragment&)> realizer,
    std::function<FormulaPtr(const FormulaPtr&, const std::string&,
                             const Fragment&)> fiber,
    std::string name) {
  if (!realizer)
    throw std::invalid_argument("rule_type_measure: realizer required");
  std::string v = var;
  auto eval = [v, sort, realizer](const FormulaPtr& phi,
                                  const Fragment& frag) -> Rat {
    Fragment ext = frag;
    std::string pn = realizer(ext);
    return eval_qf(ext, subst(phi, {{v, Term::param(pn, sort)}})) ? 1 : 0;
  };
  return generic_type_measure(std::move(var), sort, std::move(eval),
                              std::move(name), std::move(realizer),
                              std::move(fiber));
}

inline MeasurePtr convex_combine(std::vector<Rat> weights,
                                 std::vector<MeasurePtr> components,
                                 std::string name = "convex") {
  if (weights.size() != components.size() || components.empty())
    throw std::invalid_argument("convex_combine: size mismatch");
  Rat total = 0;
  for (const Rat& w : weights) {
    if (w < 0) throw std::invalid_argument("convex_combine: negative weight");
    total += w;
  }
  if (total != 1)
    throw std::invalid_argument("convex_combine: weights must sum to 1");
  for (std::size_t i = 1; i < components.size(); ++i)
    if (components[i]->var != components[0]->var ||
        components[i]->sort != components[0]->sort)
      throw std::invalid_argument("convex_combine: component variable mismatch");
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::Convex;
  m->var = components[0]->var;
  m->sort = components[0]->sort;
  m->weights = std::move(weights);
  m->components = std::move(components);
  m->name = std::move(name);
  return m;
}

// ---------------------------------------------------------------------------
// Independent families

struct IndependentFamilySpec {
  std::vector<FormulaPtr> family;  // one-variable qf formulas, distinct
  std::vector<Rat> f;              // biases in [0,1]
  std::string var = "x";
  Sort sort = Sort::V;
};

struct IndependenceViolation {
  std::vector<std::size_t> X;  // positive members of the failing pattern
  std::vector<std::size_t> Y;  // negated members
};

// True iff every full sign pattern of the family is realizable over the
// fragment (which implies independence for all disjoint index sets X, Y).
inline bool check_independence(const std::vector<FormulaPtr>& family,
                               const Fragment& frag,
                               IndependenceViolation* violation = nullptr) {
  if (family.size() > 16)
    throw std::invalid_argument("check_independence: family too large");
  for (std::size_t s = 0; s < (1u << family.size()); ++s) {
    std::vector<FormulaPtr> parts;
    for (std::size_t i = 0; i < family.size(); ++i)
      parts.push_back((s >> i) & 1 ? family[i] : Formula::lnot(family[i]));
    if (!realize_in_standard_model(frag, Formula::land(std::move(parts)))) {
      if (violation) {
        for (std::size_t i = 0; i < family.size(); ++i)
          ((s >> i) & 1 ? violation->X : violation->Y).push_back(i);
      }
      return false;
    }
  }
  return true;
}

inline MeasurePtr independent_family_measure(const IndependentFamilySpec& spec,
                                             const Fragment& frag,
                                             std::string name = "indep-family") {
  if (spec.family.size() != spec.f.size())
    throw std::invalid_argument("independent_family_measure: size mismatch");
  for (const Rat& v : spec.f)
    if (v < 0 || v > 1)
      throw std::invalid_argument("independent_family_measure: bias outside [0,1]");
  std::set<std::string> seen;
  for (const auto& g : spec.family)
    if (!seen.insert(formula_str(g)).second)
      throw std::invalid_argument("independent_family_measure: duplicate member");
  IndependenceViolation v;
  if (!spec.family.empty() && !check_independence(spec.family, frag, &v)) {
    std::string msg = "independent_family_measure: dependent family (X={";
    for (auto i : v.X) msg += std::to_string(i) + " ";
    msg += "}, Y={";
    for (auto i : v.Y) msg += std::to_string(i) + " ";
    throw std::invalid_argument(msg + "})");
  }
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::IndepFamily;
  m->var = spec.var;
  m->sort = spec.sort;
  m->family = spec.family;
  m->fvals = spec.f;
  m->name = std::move(name);
  return m;
}

// ---------------------------------------------------------------------------
// Schema measures

// Validates that the guards partition the parameter space over the fragment's
// theory (pairwise inconsistent, jointly exhaustive) using the standard-model
// realizers.
inline MeasurePtr make_schema_measure(
    const Fragment& frag, FormulaPtr pattern, std::string xvar, Sort xsort,
    std::vector<std::pair<std::string, Sort>> yvars,
    std::vector<SchemaCell> cells, std::string name = "schema") {
  if (cells.empty()) throw std::invalid_argument("schema: no cells");
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j)
      if (realize_in_standard_model(
              frag, Formula::land({cells[i].guard, cells[j].guard})))
        throw std::invalid_argument("schema: guards " + std::to_string(i) +
                                    " and " + std::to_string(j) + " overlap");
  std::vector<FormulaPtr> gs;
  for (const auto& c : cells) gs.push_back(c.guard);
  if (realize_in_standard_model(frag, Formula::lnot(Formula::lor(std::move(gs)))))
    throw std::invalid_argument("schema: guards do not cover the parameter space");
  for (const auto& c : cells)
    if (c.value < 0 || c.value > 1)
      throw std::invalid_argument("schema: cell value outside [0,1]");
  auto m = std::make_shared<Measure>();
  m->kind = Measure::Kind::Schema;
  m->var = std::move(xvar);
  m->sort = xsort;
  m->pattern = std::move(pattern);
  m->yvars = std::move(yvars);
  m->cells = std::move(cells);
  m->name = std::move(name);
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation

Rat eval_measure(const Measure& m, const FormulaPtr& phi, const Fragment& frag);

namespace detail {

inline void check_object_vars(const Measure& m, const FormulaPtr& phi) {
  for (const auto& [n, s] : free_vars(phi)) {
    if (n != m.var || s != m.sort)
      throw std::invalid_argument("eval_measure: free variable " + n +
                                  " does not match the measure's object variable");
  }
}

inline Rat eval_coin_flip(const Measure& m, const FormulaPtr& phi,
                          const Fragment& frag) {
  // Canonicalize symmetric edge atoms so E(x,a) and E(a,x) share one bit.
  auto canon = [](const FormulaPtr& a) {
    if (a->atom == AtomKind::Rel && a->rel == "E" &&
        term_str(a->args[0]) > term_str(a->args[1]))
      return atom_rel("E", {a->args[1], a->args[0]});
    return a;
  };
  auto raw_atoms = atoms_of(phi);
  std::vector<FormulaPtr> atoms;
  std::map<std::string, std::size_t> canon_index;
  std::vector<std::pair<std::string, std::size_t>> spelling;  // raw -> canon
  for (const auto& a : raw_atoms) {
    auto c = canon(a);
    std::string ck = formula_str(c);
    auto [it, fresh] = canon_index.try_emplace(ck, atoms.size());
    if (fresh) atoms.push_back(c);
    spelling.push_back({formula_str(a), it->second});
  }
  // Fast path: a conjunction of literals (e.g. a complete type's formula)
  // has mass equal to the product of per-literal factors.
  auto as_literal = [&](const FormulaPtr& f) -> std::optional<Literal> {
    if (f->kind == FormKind::Atom) return Literal{f, true};
    if (f->kind == FormKind::Not && f->kids[0]->kind == FormKind::Atom)
      return Literal{f->kids[0], false};
    return std::nullopt;
  };
  std::vector<Literal> conj;
  bool is_conj = true;
  if (auto l = as_literal(phi)) {
    conj.push_back(*l);
  } else if (phi->kind == FormKind::And) {
    for (const auto& k : phi->kids) {
      auto l = as_literal(k);
      if (!l) { is_conj = false; break; }
      conj.push_back(*l);
    }
  } else {
    is_conj = false;
  }
  if (is_conj) {
    std::map<std::string, bool> sign;
    Rat w = 1;
    for (const auto& l : conj) {
      auto a = canon(l.atom);
      auto [it, fresh] = sign.try_emplace(formula_str(a), l.positive);
      if (!fresh) {
        if (it->second != l.positive) return 0;
        continue;
      }
      std::map<std::string, Sort> avars;
      for (const auto& t : a->args) collect_term_vars(t, avars);
      bool has_var = !avars.empty();
      if (a->atom == AtomKind::Eq) {
        bool same = term_str(a->args[0]) == term_str(a->args[1]);
        bool value = has_var ? same && l.positive  // x=x true; x=a null
                             : same == l.positive;
        if (has_var && !l.positive && !same) value = true;  // x != a: co-null
        if (!value) return 0;
      } else if (a->atom == AtomKind::Rel) {
        if (has_var) {
          w *= l.positive ? m.bias : 1 - m.bias;
        } else {
          auto tv = frag.diagram_lookup(a);
          if (!tv)
            throw std::invalid_argument("coin-flip: diagram does not decide " +
                                        formula_str(a));
          if (*tv != l.positive) return 0;
        }
      } else {
        throw std::invalid_argument("coin-flip measure: unsupported atom " +
                                    formula_str(a));
      }
      if (w == 0) return 0;
    }
    return w;
  }
  if (atoms.size() > 20)
    throw std::invalid_argument("coin-flip evaluation: too many atoms");
  // Per-atom factors (positive weight, negative weight).
  std::vector<std::pair<Rat, Rat>> factor;
  for (const auto& a : atoms) {
    std::map<std::string, Sort> avars;
    for (const auto& t : a->args) collect_term_vars(t, avars);
    bool has_var = !avars.empty();
    if (a->atom == AtomKind::Eq) {
      if (has_var) {
        // Null rule: equality of the generic element to anything named is a
        // finite (measure-zero) condition; x = x is the trivial exception.
        bool trivial = term_str(a->args[0]) == term_str(a->args[1]);
        factor.push_back(trivial ? std::make_pair(Rat(1), Rat(0))
                                 : std::make_pair(Rat(0), Rat(1)));
      } else {
        bool same = term_str(a->args[0]) == term_str(a->args[1]);
        factor.push_back({Rat(same ? 1 : 0), Rat(same ? 0 : 1)});
      }
      continue;
    }
    if (a->atom != AtomKind::Rel)
      throw std::invalid_argument("coin-flip measure: unsupported atom " +
                                  formula_str(a));
    if (has_var) {
      factor.push_back({m.bias, 1 - m.bias});
    } else {
      auto tv = frag.diagram_lookup(a);
      if (!tv)
        throw std::invalid_argument("coin-flip: diagram does not decide " +
                                    formula_str(a));
      factor.push_back({Rat(*tv ? 1 : 0), Rat(*tv ? 0 : 1)});
    }
  }
  Rat total = 0;
  std::map<std::string, bool> assign;
  for (std::size_t s = 0; s < (1u << atoms.size()); ++s) {
    Rat w = 1;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const auto& [wp, wn] = factor[i];
      w *= (s >> i) & 1 ? wp : wn;
      if (w == 0) break;
    }
    if (w == 0) continue;
    for (const auto& [key, ci] : spelling) assign[key] = (s >> ci) & 1;
    if (eval_bool(phi, assign)) total += w;
  }
  return total;
}

inline Rat eval_indep_family(const Measure& m, const FormulaPtr& phi) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < m.family.size(); ++i)
    index[formula_str(m.family[i])] = i;
  // Truth of phi under a sign pattern of the family; subformulas matching a
  // family member verbatim are looked up, everything else must be Boolean
  // structure.
  std::function<bool(const FormulaPtr&, std::size_t)> truth =
      [&](const FormulaPtr& f, std::size_t s) -> bool {
    auto it = index.find(formula_str(f));
    if (it != index.end()) return (s >> it->second) & 1;
    switch (f->kind) {
      case FormKind::True: return true;
      case FormKind::False: return false;
      case FormKind::Not: return !truth(f->kids[0], s);
      case FormKind::And:
        for (const auto& k : f->kids)
          if (!truth(k, s)) return false;
        return true;
      case FormKind::Or:
        for (const auto& k : f->kids)
          if (truth(k, s)) return true;
        return false;
      default:
        throw std::invalid_argument(
            "independent-family measure: formula is not a Boolean combination "
            "of family members: " + formula_str(f));
    }
  };
  Rat total = 0;
  for (std::size_t s = 0; s < (1u << m.family.size()); ++s) {
    Rat w = 1;
    for (std::size_t i = 0; i < m.family.size(); ++i)
      w *= (s >> i) & 1 ? m.fvals[i] : 1 - m.fvals[i];
    if (w != 0 && truth(phi, s)) total += w;
  }
  return total;
}

inline Rat eval_schema(const Measure& m, const FormulaPtr& phi,
                       const Fragment& frag) {
  // Match phi as pattern(x, bbar) over fragment parameter tuples.
  std::string want = formula_str(phi);
  std::vector<std::vector<std::string>> pools;
  for (const auto& [yn, ys] : m.yvars) {
    (void)yn;
    std::vector<std::string> pool;
    for (const auto& [pn, psort] : frag.params)
      if (psort == ys) pool.push_back(pn);
    if (pool.empty())
      throw std::invalid_argument("schema: no fragment parameters of the "
                                  "required sort");
    pools.push_back(std::move(pool));
  }
  std::size_t total = 1;
  for (const auto& p : pools) {
    total *= p.size();
    if (total > 100000)
      throw std::invalid_argument("schema: parameter tuple space too large");
  }
  for (std::size_t step = 0; step < total; ++step) {
    std::map<std::string, TermPtr> repl;
    std::size_t rest = step;
    for (std::size_t i = 0; i < pools.size(); ++i) {
      repl[m.yvars[i].first] =
          Term::param(pools[i][rest % pools[i].size()], m.yvars[i].second);
      rest /= pools[i].size();
    }
    if (formula_str(subst(m.pattern, repl)) != want) continue;
    for (const auto& cell : m.cells)
      if (eval_qf(frag, subst(cell.guard, repl)))
        return cell.value;
    throw std::invalid_argument(
        "schema: parameters fall outside every partition cell");
  }
  throw std::invalid_argument(
      "schema measure: formula is not an instance of the schema pattern: " +
      want);
}

}  // namespace detail

inline Rat eval_measure(const Measure& m, const FormulaPtr& phi,
                        const Fragment& frag) {
  if (!is_qf(phi))
    throw std::invalid_argument("eval_measure: quantified formula");
  detail::check_object_vars(m, phi);
  switch (m.kind) {
    case Measure::Kind::Dirac:
      return eval_qf(frag, phi, {{m.var, m.elements[0]}}) ? 1 : 0;
    case Measure::Kind::DiracType:
      return type_contains(frag, *m.type, phi) ? 1 : 0;
    case Measure::Kind::Average: {
      Rat total = 0;
      for (const auto& e : m.elements)
        if (eval_qf(frag, phi, {{m.var, e}})) total += 1;
      return total / (long)m.elements.size();
    }
    case Measure::Kind::CoinFlip:
      return detail::eval_coin_flip(m, phi, frag);
    case Measure::Kind::IndepFamily:
      return detail::eval_indep_family(m, phi);
    case Measure::Kind::CubeLebesgue: {
      if (frag.theory != TheoryId::THalfInf &&
          frag.theory != TheoryId::THalfInfPQ)
        throw std::invalid_argument("cube-lebesgue: wrong theory");
      Rat total = 0;
      for (const auto& [cube, level] :
           cube_decompose(frag, m.var, {{phi, Rat(1)}}))
        total += level * cube.measure();
      return total;
    }
    case Measure::Kind::Schema:
      return detail::eval_schema(m, phi, frag);
    case Measure::Kind::Convex: {
      Rat total = 0;
      for (std::size_t i = 0; i < m.components.size(); ++i)
        total += m.weights[i] * eval_measure(*m.components[i], phi, frag);
      return total;
    }
    case Measure::Kind::Generic:
      return m.generic(phi, frag);
  }
  throw std::logic_error("eval_measure: unknown measure kind");
}

// A schema measure extends uniquely to instances at new
// parameters — evaluation in the extended fragment is that extension.
inline Rat extend_definable_schema(const Measure& m, const FormulaPtr& instance,
                                   const Fragment& extended) {
  if (m.kind != Measure::Kind::Schema)
    throw std::invalid_argument("extend_definable_schema: not a schema measure");
  return eval_measure(m, instance, extended);
}

}  // namespace kmlab
