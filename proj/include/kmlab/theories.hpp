#pragma once

// Standard-model backends: quantifier-free evaluation, diagram consistency,
// and witness construction for the random ternary relation T_R, the Henson
// graphs, the random graph, T_{1/2}, and T^inf_{1/2} (with its PQ reduct).

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kmlab/dnf.hpp"
#include "kmlab/formula.hpp"
#include "kmlab/fragment.hpp"
#include "kmlab/interval.hpp"
#include "kmlab/linear.hpp"

namespace kmlab {

using Assignment = std::map<std::string, StdValue>;

// --------------------------------------------------------------------------
// Symbol lookup: variables from the assignment, parameters from the fragment
// (assignment entries may override parameters, e.g. during realization).

inline const StdValue* lookup_symbol(const Fragment& frag,
                                     const Assignment& assign,
                                     const std::string& name) {
  auto it = assign.find(name);
  if (it != assign.end()) return &it->second;
  auto vt = frag.values.find(name);
  if (vt != frag.values.end()) return &vt->second;
  return nullptr;
}

inline const StdValue& require_symbol(const Fragment& frag,
                                      const Assignment& assign,
                                      const TermPtr& t) {
  if (t->kind != TermKind::Var && t->kind != TermKind::Param)
    throw std::invalid_argument("expected a variable or parameter, got " +
                                term_str(t));
  const StdValue* v = lookup_symbol(frag, assign, t->name);
  if (!v)
    throw std::invalid_argument("no standard value for symbol " + t->name);
  return *v;
}

// --------------------------------------------------------------------------
// Q-sort lattice on concrete elements (interval unions fiberwise over an
// index set, plus formal half-measure generators)

inline QElemV q_meet(const QElemV& a, const QElemV& b) {
  if (a.tag == QElemV::BotV || b.tag == QElemV::BotV) return QElemV::botv();
  if (a.tag == QElemV::TopV) return b;
  if (b.tag == QElemV::TopV) return a;
  if (a.index != b.index) return QElemV::botv();
  IntervalUnion z = a.set.intersect(b.set);
  if (z.is_empty()) return QElemV::botv();
  return QElemV::pair(a.index, z);  // proper: subset of proper a.set
}

inline QElemV q_join(const QElemV& a, const QElemV& b) {
  if (a.tag == QElemV::TopV || b.tag == QElemV::TopV) return QElemV::topv();
  if (a.tag == QElemV::BotV) return b;
  if (b.tag == QElemV::BotV) return a;
  if (a.index != b.index) return QElemV::topv();
  IntervalUnion z = a.set.unite(b.set);
  if (z.is_full()) return QElemV::topv();
  return QElemV::pair(a.index, z);
}

inline QElemV q_comp(const QElemV& a) {
  if (a.tag == QElemV::BotV) return QElemV::topv();
  if (a.tag == QElemV::TopV) return QElemV::botv();
  return QElemV::pair(a.index, a.set.complement());
}

inline QElemV eval_qterm(const Fragment& frag, const Assignment& assign,
                         const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Bot: return QElemV::botv();
    case TermKind::Top: return QElemV::topv();
    case TermKind::Meet:
      return q_meet(eval_qterm(frag, assign, t->kids[0]),
                    eval_qterm(frag, assign, t->kids[1]));
    case TermKind::Join:
      return q_join(eval_qterm(frag, assign, t->kids[0]),
                    eval_qterm(frag, assign, t->kids[1]));
    case TermKind::Comp:
      return q_comp(eval_qterm(frag, assign, t->kids[0]));
    case TermKind::Var:
    case TermKind::Param: {
      const StdValue& v = require_symbol(frag, assign, t);
      if (const auto* q = std::get_if<QElemV>(&v)) return *q;
      throw std::invalid_argument("symbol " + t->name + " is not a Q element");
    }
    default:
      throw std::invalid_argument("not a Q-sort term: " + term_str(t));
  }
}

// Coordinate of a point, materialized on demand (uniformly at random via the
// registry, preserving global injectivity of coordinates).
inline Rat point_coord(const Fragment& frag, const PPoint& p, long n) {
  auto it = p.coords->find(n);
  if (it != p.coords->end()) return it->second;
  Rat v = frag.registry->fresh_value_in(IntervalUnion::full());
  (*p.coords)[n] = v;
  return v;
}

// --------------------------------------------------------------------------
// Quantifier-free standard-model evaluation

namespace detail {

inline Rat eval_rterm(const Fragment& frag, const Assignment& assign,
                      const TermPtr& t) {
  LinForm lf = linearize(t);
  Rat out = lf.constant;
  for (const auto& [key, cb] : lf.coeffs) {
    const auto& [coeff, basis] = cb;
    Rat v;
    if (basis->kind == TermKind::Ell) {
      v = eval_qterm(frag, assign, basis->kids[0]).ell();
    } else {
      const StdValue& sv = require_symbol(frag, assign, basis);
      if (const auto* r = std::get_if<Rat>(&sv)) v = *r;
      else throw std::invalid_argument("symbol " + basis->name + " is not R-sort");
    }
    out += coeff * v;
  }
  return out;
}

inline std::string vertex_name(const Fragment& frag, const Assignment& assign,
                               const TermPtr& t) {
  if (t->kind != TermKind::Var && t->kind != TermKind::Param)
    throw std::invalid_argument("expected a vertex symbol, got " + term_str(t));
  const StdValue* v = lookup_symbol(frag, assign, t->name);
  if (!v) {
    // A relational parameter denotes itself.
    if (t->kind == TermKind::Param) return t->name;
    throw std::invalid_argument("no value for vertex variable " + t->name);
  }
  if (const auto* vr = std::get_if<VertexRef>(v)) return vr->name;
  throw std::invalid_argument("symbol " + t->name + " is not a vertex");
}

}  // namespace detail

inline bool eval_atom(const Fragment& frag, const FormulaPtr& f,
                      const Assignment& assign) {
  switch (f->atom) {
    case AtomKind::Rel: {
      std::vector<TermPtr> resolved;
      for (const auto& a : f->args)
        resolved.push_back(Term::param(detail::vertex_name(frag, assign, a), Sort::V));
      auto key = atom_rel(f->rel, resolved);
      auto tv = frag.diagram_lookup(key);
      if (tv) return *tv;
      if (f->rel == "E" && resolved.size() == 2 &&
          resolved[0]->name == resolved[1]->name)
        return false;  // edges are irreflexive
      throw std::invalid_argument("diagram does not decide " + formula_str(key));
    }
    case AtomKind::Sqin: {
      const StdValue& pv = require_symbol(frag, assign, f->args[0]);
      QElemV q;
      if (frag.theory == TheoryId::THalf) {
        const auto* point = std::get_if<Rat>(&pv);
        const StdValue& qv = require_symbol(frag, assign, f->args[1]);
        const auto* hs = std::get_if<THalfQ>(&qv);
        if (!point || !hs) throw std::invalid_argument("bad sqin operands");
        return hs->set.contains(*point);
      }
      q = eval_qterm(frag, assign, f->args[1]);
      if (q.tag == QElemV::TopV) return true;
      if (q.tag == QElemV::BotV) return false;
      const auto* point = std::get_if<PPoint>(&pv);
      if (!point) throw std::invalid_argument("sqin: left operand is not a point");
      return q.set.contains(point_coord(frag, *point, q.index));
    }
    case AtomKind::Sim: {
      QElemV a = eval_qterm(frag, assign, f->args[0]);
      QElemV b = eval_qterm(frag, assign, f->args[1]);
      return a.tag == QElemV::PairV && b.tag == QElemV::PairV &&
             a.index == b.index;
    }
    case AtomKind::Less:
      return detail::eval_rterm(frag, assign, f->args[0]) <
             detail::eval_rterm(frag, assign, f->args[1]);
    case AtomKind::Eq: {
      Sort s = term_sort(f->args[0]);
      if (s == Sort::R)
        return detail::eval_rterm(frag, assign, f->args[0]) ==
               detail::eval_rterm(frag, assign, f->args[1]);
      if (s == Sort::V)
        return detail::vertex_name(frag, assign, f->args[0]) ==
               detail::vertex_name(frag, assign, f->args[1]);
      if (s == Sort::Q) {
        if (frag.theory == TheoryId::THalf) {
          const auto* a = std::get_if<THalfQ>(&require_symbol(frag, assign, f->args[0]));
          const auto* b = std::get_if<THalfQ>(&require_symbol(frag, assign, f->args[1]));
          if (!a || !b) throw std::invalid_argument("bad Q equality operands");
          return *a == *b;
        }
        return eval_qterm(frag, assign, f->args[0]) ==
               eval_qterm(frag, assign, f->args[1]);
      }
      // P sort
      const StdValue& a = require_symbol(frag, assign, f->args[0]);
      const StdValue& b = require_symbol(frag, assign, f->args[1]);
      if (const auto* pa = std::get_if<PPoint>(&a)) {
        const auto* pb = std::get_if<PPoint>(&b);
        return pb && *pa == *pb;
      }
      if (const auto* ra = std::get_if<Rat>(&a)) {
        const auto* rb = std::get_if<Rat>(&b);
        return rb && *ra == *rb;
      }
      throw std::invalid_argument("bad P equality operands");
    }
  }
  throw std::logic_error("eval_atom: unknown atom kind");
}

// Truth of a quantifier-free formula under standard semantics.
inline bool eval_qf(const Fragment& frag, const FormulaPtr& f,
                    const Assignment& assign = {}) {
  switch (f->kind) {
    case FormKind::True: return true;
    case FormKind::False: return false;
    case FormKind::Atom: return eval_atom(frag, f, assign);
    case FormKind::Not: return !eval_qf(frag, f->kids[0], assign);
    case FormKind::And:
      for (const auto& k : f->kids)
        if (!eval_qf(frag, k, assign)) return false;
      return true;
    case FormKind::Or:
      for (const auto& k : f->kids)
        if (eval_qf(frag, k, assign)) return true;
      return false;
    default:
      throw std::invalid_argument("eval_qf: quantified formula");
  }
}

// --------------------------------------------------------------------------
// Relational theories: diagram consistency and realization

struct CheckResult {
  bool ok = false;
  std::string reason;
  Assignment witness;
};

namespace detail {

// Union-find over names.
struct NameUF {
  std::map<std::string, std::string> parent;
  std::string find(const std::string& x) {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) {
      parent[x] = x;
      return x;
    }
    return parent[x] = find(it->second);
  }
  void merge(const std::string& a, const std::string& b) {
    parent[find(a)] = find(b);
  }
};

// Positive-edge clique search (for the K_s-freeness of Henson graphs).
inline bool has_clique(const std::map<std::string, std::set<std::string>>& adj,
                       int s) {
  std::vector<std::string> verts;
  for (const auto& [v, n] : adj) verts.push_back(v);
  std::vector<int> pick;
  std::function<bool(std::size_t)> rec = [&](std::size_t start) -> bool {
    if ((int)pick.size() == s) return true;
    for (std::size_t i = start; i < verts.size(); ++i) {
      bool ok = true;
      for (int j : pick)
        if (!adj.at(verts[j]).count(verts[i])) { ok = false; break; }
      if (ok) {
        pick.push_back((int)i);
        if (rec(i + 1)) return true;
        pick.pop_back();
      }
    }
    return false;
  };
  return rec(0);
}

}  // namespace detail

// Consistency of a ground literal set for the relational theories: do the
// literals embed in the standard model (Fraisse limit)?  Distinct parameter
// names are identified only where a positive equality literal demands it.
inline CheckResult check_relational_diagram(TheoryId theory, int henson_s,
                                            const std::vector<Literal>& lits) {
  detail::NameUF uf;
  auto name_of = [&](const TermPtr& t) -> std::string {
    if (t->kind != TermKind::Param && t->kind != TermKind::Var)
      throw std::invalid_argument("non-ground relational literal");
    return t->name;
  };
  for (const auto& l : lits)
    if (l.atom->atom == AtomKind::Eq && l.positive)
      uf.merge(name_of(l.atom->args[0]), name_of(l.atom->args[1]));
  // Forced relation values on collapsed names.
  std::map<std::string, bool> forced;
  std::map<std::string, std::set<std::string>> pos_edges;
  for (const auto& l : lits) {
    if (l.atom->atom == AtomKind::Eq) {
      if (!l.positive &&
          uf.find(name_of(l.atom->args[0])) == uf.find(name_of(l.atom->args[1])))
        return {false, "x!=y contradicts forced equality", {}};
      continue;
    }
    if (l.atom->atom != AtomKind::Rel)
      return {false, "unknown atom kind for relational theory", {}};
    std::vector<std::string> names;
    for (const auto& a : l.atom->args) names.push_back(uf.find(name_of(a)));
    if (l.atom->rel == "E") {
      if (theory != TheoryId::Henson && theory != TheoryId::RandomGraph)
        return {false, "relation E undefined in this theory", {}};
      if (names.size() != 2) return {false, "E expects 2 arguments", {}};
      if (names[0] == names[1]) {
        if (l.positive) return {false, "E is irreflexive", {}};
        continue;
      }
      std::string a = std::min(names[0], names[1]), b = std::max(names[0], names[1]);
      std::string key = "E(" + a + "," + b + ")";
      auto [it, fresh] = forced.try_emplace(key, l.positive);
      if (!fresh && it->second != l.positive)
        return {false, "contradictory literals on " + key, {}};
      if (l.positive) {
        pos_edges[a].insert(b);
        pos_edges[b].insert(a);
      }
    } else if (l.atom->rel == "R") {
      if (theory != TheoryId::TR)
        return {false, "relation R undefined in this theory", {}};
      if (names.size() != 3) return {false, "R expects 3 arguments", {}};
      std::string key = "R(" + names[0] + "," + names[1] + "," + names[2] + ")";
      auto [it, fresh] = forced.try_emplace(key, l.positive);
      if (!fresh && it->second != l.positive)
        return {false, "contradictory literals on " + key, {}};
    } else {
      return {false, "unknown relation " + l.atom->rel, {}};
    }
  }
  if (theory == TheoryId::Henson && detail::has_clique(pos_edges, henson_s))
    return {false, "positive edges contain K_" + std::to_string(henson_s), {}};
  CheckResult out;
  out.ok = true;
  std::set<std::string> seen;
  for (const auto& l : lits)
    for (const auto& a : l.atom->args) {
      std::string n = name_of(a);
      if (seen.insert(n).second) out.witness[n] = VertexRef{uf.find(n)};
    }
  return out;
}

// --------------------------------------------------------------------------
// T_{1/2}: witness construction

// A union of exactly n intervals of I_{2n} containing `inside` and avoiding
// `outside`; tries increasing n starting at n_min.  Nullopt if the bound runs
// out (points must be distinct rationals in [0,1)).
inline std::optional<THalfQ> thalf_set_with(const std::vector<Rat>& inside,
                                            const std::vector<Rat>& outside,
                                            long n_min = 1, long n_cap = 512) {
  for (long n = std::max<long>(n_min, 1); n <= n_cap; ++n) {
    std::vector<int> cell_state(2 * n, 0);  // 0 free, 1 must-have, -1 banned
    bool bad = false;
    auto cell_of = [&](const Rat& x) { return (long)mpz_class(x * (2 * n)).get_si(); };
    for (const Rat& x : inside) {
      long c = cell_of(x);
      if (cell_state[c] == -1) { bad = true; break; }
      cell_state[c] = 1;
    }
    if (!bad)
      for (const Rat& x : outside) {
        long c = cell_of(x);
        if (cell_state[c] == 1) { bad = true; break; }
        cell_state[c] = -1;
      }
    if (bad) continue;
    long have = std::count(cell_state.begin(), cell_state.end(), 1);
    if (have > n) continue;
    std::vector<IntervalUnion::Piece> pieces;
    long taken = 0;
    for (long c = 0; c < 2 * n && taken < n; ++c)
      if (cell_state[c] == 1) {
        pieces.push_back({rat(c, 2 * n), rat(c + 1, 2 * n)});
        ++taken;
      }
    for (long c = 0; c < 2 * n && taken < n; ++c)
      if (cell_state[c] == 0) {
        pieces.push_back({rat(c, 2 * n), rat(c + 1, 2 * n)});
        ++taken;
      }
    if (taken < n) continue;
    return THalfQ::make(n, IntervalUnion::from_pieces(pieces));
  }
  return std::nullopt;
}

}  // namespace kmlab

#include "kmlab/halfinf_solver.hpp"

namespace kmlab {

// --------------------------------------------------------------------------
// Realization in the standard model

struct RealizeResult {
  Assignment assign;    // goal variables -> standard values
  Fragment extended;    // fragment possibly extended with fresh parameters
};

namespace detail {

// Relational realization: try assignments of goal variables to existing
// parameters or fresh vertices, checking each DNF disjunct.
inline std::optional<RealizeResult> realize_relational(const Fragment& frag,
                                                       const FormulaPtr& goal) {
  auto vars = free_vars(goal);
  std::vector<std::string> vnames;
  for (const auto& [n, s] : vars) {
    if (s != Sort::V)
      throw std::invalid_argument("relational realize: non-vertex variable " + n);
    vnames.push_back(n);
  }
  DnfFormula dnf = to_dnf(goal);
  std::vector<std::string> candidates = frag.param_names(Sort::V);

  for (const auto& disjunct : dnf.disjuncts) {
    // Candidate targets per variable: any parameter or the fresh vertex token
    // of any variable up to and including itself (so variables can coincide).
    std::vector<std::size_t> choice(vnames.size(), 0);
    auto options_for = [&](std::size_t i) {
      std::vector<std::string> opts = candidates;
      for (std::size_t j = 0; j <= i; ++j) opts.push_back("~" + vnames[j]);
      return opts;
    };
    std::function<std::optional<RealizeResult>(std::size_t,
                                               std::map<std::string, std::string>&)>
        rec = [&](std::size_t i, std::map<std::string, std::string>& target)
        -> std::optional<RealizeResult> {
      if (i == vnames.size()) {
        // Resolve literals under this identification.
        std::vector<Literal> resolved;
        bool uses_fresh = false;
        auto resolve = [&](const TermPtr& t) -> std::string {
          std::string n = t->name;
          auto it = target.find(n);
          std::string r = it != target.end() ? it->second : n;
          if (!r.empty() && r[0] == '~') uses_fresh = true;
          return r;
        };
        std::vector<Literal> lits;
        // Start from the fragment's own diagram (so Henson cliques spanning
        // old and new vertices are caught).
        for (const auto& dl : frag.diagram) {
          bool pos = dl->kind != FormKind::Not;
          lits.push_back({pos ? dl : dl->kids[0], pos});
        }
        for (const auto& l : disjunct) {
          std::vector<TermPtr> args;
          for (const auto& a : l.atom->args)
            args.push_back(Term::param(resolve(a), Sort::V));
          FormulaPtr atom = l.atom->atom == AtomKind::Eq
                                ? atom_eq(args[0], args[1])
                                : atom_rel(l.atom->rel, args);
          lits.push_back({atom, l.positive});
        }
        // Distinct existing parameters denote distinct vertices; fresh tokens
        // denote new vertices distinct from everything unless equated.
        // Positive equality between distinct parameter names is impossible.
        for (const auto& l : lits)
          if (l.atom->atom == AtomKind::Eq && l.positive) {
            std::string a = l.atom->args[0]->name, b = l.atom->args[1]->name;
            bool afresh = !a.empty() && a[0] == '~';
            bool bfresh = !b.empty() && b[0] == '~';
            if (!afresh && !bfresh && a != b) return std::nullopt;
          }
        CheckResult c = check_relational_diagram(frag.theory, frag.henson_s, lits);
        if (!c.ok) return std::nullopt;

        // Build the extension: add one parameter per fresh class
        // representative and complete its diagram (unforced atoms false).
        RealizeResult out;
        out.extended = frag;
        std::map<std::string, std::string> fresh_name;  // token class -> param
        auto final_name = [&](const std::string& tok) -> std::string {
          std::string rep = tok;
          if (auto wit = c.witness.find(tok); wit != c.witness.end())
            rep = std::get<VertexRef>(wit->second).name;
          if (rep.empty() || rep[0] != '~') return rep;
          auto it = fresh_name.find(rep);
          if (it != fresh_name.end()) return it->second;
          std::string nn = out.extended.fresh_param_name("w");
          out.extended.add_param(nn, Sort::V);
          fresh_name[rep] = nn;
          return nn;
        };
        for (const auto& v : vnames)
          out.assign[v] = VertexRef{final_name(target.at(v))};
        // Complete the extended diagram over new vertices.
        std::vector<std::string> all = out.extended.param_names(Sort::V);
        std::map<std::string, bool> forced;
        for (const auto& l : lits) {
          if (l.atom->atom != AtomKind::Rel) continue;
          std::vector<TermPtr> args;
          for (const auto& a : l.atom->args) {
            std::string n = a->name;
            if (!n.empty() && n[0] == '~') {
              const StdValue& w = c.witness.at(n);
              n = std::get<VertexRef>(w).name;
              if (!n.empty() && n[0] == '~') n = fresh_name.at(n);
            }
            args.push_back(Term::param(n, Sort::V));
          }
          forced[formula_str(atom_rel(l.atom->rel, args))] = l.positive;
          if (l.atom->rel == "E")
            forced.try_emplace(
                formula_str(atom_rel("E", {args[1], args[0]})), l.positive);
        }
        auto add_atom = [&](const FormulaPtr& atom, bool involves_new) {
          if (!involves_new) return;
          auto key = formula_str(atom);
          bool val = forced.count(key) ? forced[key] : false;
          out.extended.add_literal(val ? atom : Formula::lnot(atom));
        };
        auto is_new = [&](const std::string& n) {
          return !frag.params.count(n);
        };
        if (frag.theory == TheoryId::TR) {
          for (const auto& a : all)
            for (const auto& b : all)
              for (const auto& cn : all)
                add_atom(atom_rel("R", {Term::param(a, Sort::V),
                                        Term::param(b, Sort::V),
                                        Term::param(cn, Sort::V)}),
                         is_new(a) || is_new(b) || is_new(cn));
        } else {
          for (const auto& a : all)
            for (const auto& b : all)
              if (a < b)
                add_atom(atom_rel("E", {Term::param(a, Sort::V),
                                        Term::param(b, Sort::V)}),
                         is_new(a) || is_new(b));
        }
        (void)uses_fresh;
        return out;
      }
      for (const auto& opt : options_for(i)) {
        target[vnames[i]] = opt;
        if (auto r = rec(i + 1, target)) return r;
      }
      target.erase(vnames[i]);
      return std::nullopt;
    };
    std::map<std::string, std::string> target;
    if (auto r = rec(0, target)) return r;
  }
  return std::nullopt;
}

// T_{1/2} realization: pick point values, then build half-sets.
inline std::optional<RealizeResult> realize_thalf(const Fragment& frag,
                                                  const FormulaPtr& goal) {
  DnfFormula dnf = to_dnf(goal);
  auto vars = free_vars(goal);
  for (const auto& disjunct : dnf.disjuncts) {
    NameUF uf;
    bool bad = false;
    std::vector<std::pair<std::string, std::string>> neq;
    for (const auto& l : disjunct) {
      if (l.atom->atom != AtomKind::Eq) continue;
      std::string a = l.atom->args[0]->name, b = l.atom->args[1]->name;
      if (l.positive) uf.merge(a, b);
      else neq.push_back({a, b});
    }
    for (const auto& [a, b] : neq)
      if (uf.find(a) == uf.find(b)) { bad = true; break; }
    if (bad) continue;

    // Class values: fixed by any parameter member, else fresh.
    Assignment assign;
    std::map<std::string, Rat> pval;      // class rep -> point
    std::map<std::string, std::optional<THalfQ>> qfixed;  // class rep -> set
    std::map<std::string, std::pair<std::vector<Rat>, std::vector<Rat>>> qneed;
    auto class_sort = [&](const std::string& n) {
      if (frag.params.count(n)) return frag.params.at(n);
      return vars.at(n);
    };
    for (const auto& [n, s] : frag.params) {
      (void)s;
      if (!frag.has_value(n)) continue;
      std::string r = uf.find(n);
      if (const auto* rv = std::get_if<Rat>(&frag.value(n))) {
        auto [it, fresh] = pval.try_emplace(r, *rv);
        if (!fresh && it->second != *rv) { bad = true; break; }
      } else if (const auto* qv = std::get_if<THalfQ>(&frag.value(n))) {
        auto [it, fresh] = qfixed.try_emplace(r, *qv);
        if (!fresh && it->second && !(*it->second == *qv)) { bad = true; break; }
      }
    }
    if (bad) continue;
    // Fresh point values for unfixed P classes.
    std::set<std::string> mentioned;
    for (const auto& l : disjunct)
      for (const auto& a : l.atom->args) mentioned.insert(a->name);
    for (const auto& n : mentioned) {
      std::string r = uf.find(n);
      if (class_sort(n) == Sort::P && !pval.count(r))
        pval[r] = frag.registry->fresh_value_in(IntervalUnion::full());
    }
    // Membership requirements per Q class.
    for (const auto& l : disjunct) {
      if (l.atom->atom != AtomKind::Sqin) continue;
      std::string pr = uf.find(l.atom->args[0]->name);
      std::string qr = uf.find(l.atom->args[1]->name);
      auto& [ins, outs] = qneed[qr];
      (l.positive ? ins : outs).push_back(pval.at(pr));
    }
    bool ok = true;
    std::map<std::string, THalfQ> qval;
    for (const auto& n : mentioned) {
      if (class_sort(n) != Sort::Q) continue;
      std::string r = uf.find(n);
      if (qval.count(r)) continue;
      auto [ins, outs] = qneed.count(r) ? qneed[r]
                                        : std::pair<std::vector<Rat>, std::vector<Rat>>{};
      std::sort(ins.begin(), ins.end());
      ins.erase(std::unique(ins.begin(), ins.end()), ins.end());
      std::sort(outs.begin(), outs.end());
      outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
      for (const Rat& x : ins)
        if (std::binary_search(outs.begin(), outs.end(), x)) { ok = false; break; }
      if (!ok) break;
      if (qfixed.count(r)) {
        const THalfQ& v = *qfixed[r];
        for (const Rat& x : ins)
          if (!v.set.contains(x)) { ok = false; break; }
        for (const Rat& x : outs)
          if (v.set.contains(x)) { ok = false; break; }
        if (!ok) break;
        qval.emplace(r, v);
      } else {
        auto built = thalf_set_with(ins, outs);
        if (!built) { ok = false; break; }
        qval.emplace(r, *built);
      }
    }
    if (!ok) continue;
    // Also check negative equalities between distinct fixed values hold and
    // assemble the assignment.
    RealizeResult out;
    out.extended = frag;
    for (const auto& [n, s] : vars) {
      std::string r = uf.find(n);
      if (s == Sort::P) out.assign[n] = pval.at(r);
      else if (s == Sort::Q) out.assign[n] = qval.at(r);
      else throw std::invalid_argument("thalf: unexpected sort");
    }
    // Verify the disjunct end-to-end (cheap safety net).
    bool verified = true;
    for (const auto& l : disjunct)
      if (eval_qf(frag, l.positive ? l.atom : Formula::lnot(l.atom), out.assign) !=
          true) {
        verified = false;
        break;
      }
    if (verified) return out;
  }
  return std::nullopt;
}

}  // namespace detail

// Finds standard values for the free variables of a quantifier-free goal, or
// nullopt when the goal is unsatisfiable over the fragment.
inline std::optional<RealizeResult> realize_in_standard_model(
    const Fragment& frag, const FormulaPtr& goal) {
  if (!is_qf(goal))
    throw std::invalid_argument("realize_in_standard_model: goal not qf");
  if (is_relational(frag.theory)) return detail::realize_relational(frag, goal);
  if (frag.theory == TheoryId::THalf) return detail::realize_thalf(frag, goal);
  auto a = solve_half_inf(frag, goal);
  if (!a) return std::nullopt;
  if (!eval_qf(frag, goal, *a))
    throw std::logic_error("realize: constructed witness fails verification");
  RealizeResult out;
  out.assign = std::move(*a);
  out.extended = frag;
  return out;
}

// Does the ground literal set embed in the theory's standard model?
inline CheckResult check_diagram_consistency(TheoryId theory, int henson_s,
                                             const std::map<std::string, Sort>& params,
                                             const std::vector<FormulaPtr>& literals) {
  std::vector<Literal> lits;
  for (const auto& l : literals) {
    bool pos = l->kind != FormKind::Not;
    const FormulaPtr& atom = pos ? l : l->kids[0];
    if (atom->kind != FormKind::Atom)
      throw std::invalid_argument("check_diagram_consistency: not a literal");
    lits.push_back({atom, pos});
  }
  if (is_relational(theory))
    return check_relational_diagram(theory, henson_s, lits);

  // Half theories: treat the named parameters as fresh variables and ask the
  // witness constructor.
  Fragment scratch;
  scratch.theory = theory;
  std::vector<FormulaPtr> parts;
  std::map<std::string, TermPtr> as_vars;
  for (const auto& [n, s] : params) as_vars[n] = Term::var(n, s);
  for (const auto& l : lits) {
    auto atom = std::make_shared<Formula>(*l.atom);
    auto lifted = subst(l.positive ? FormulaPtr(atom) : Formula::lnot(atom),
                        as_vars);
    // Parameters inside terms need lifting to variables too.
    parts.push_back(lifted);
  }
  // Rewrite Param leaves as Vars (subst only touches Var leaves).
  std::function<TermPtr(const TermPtr&)> liftt = [&](const TermPtr& t) -> TermPtr {
    if (t->kind == TermKind::Param) return Term::var(t->name, t->sort);
    if (t->kids.empty()) return t;
    auto c = std::make_shared<Term>(*t);
    for (auto& k : c->kids) k = liftt(k);
    return c;
  };
  std::function<FormulaPtr(const FormulaPtr&)> liftf =
      [&](const FormulaPtr& f) -> FormulaPtr {
    auto c = std::make_shared<Formula>(*f);
    for (auto& a : c->args) a = liftt(a);
    for (auto& k : c->kids) k = liftf(k);
    return c;
  };
  std::vector<FormulaPtr> lifted;
  for (auto& p : parts) lifted.push_back(liftf(p));
  auto goal = Formula::land(std::move(lifted));
  auto r = realize_in_standard_model(scratch, goal);
  if (!r) return {false, "no standard-model witness", {}};
  CheckResult out;
  out.ok = true;
  out.witness = r->assign;
  return out;
}

inline CheckResult check_diagram_consistency(const Fragment& frag) {
  return check_diagram_consistency(frag.theory, frag.henson_s, frag.params,
                                   frag.diagram);
}

// --------------------------------------------------------------------------
// Cubes (products of per-index coordinate constraints)

struct Cube {
  std::map<long, IntervalUnion> fibers;  // coordinate -> constraint
  Rat measure() const {
    Rat m = 1;
    for (const auto& [n, X] : fibers) m *= X.measure();
    return m;
  }
  bool is_empty() const {
    for (const auto& [n, X] : fibers)
      if (X.is_empty()) return true;
    return false;
  }
};

// Decomposes a weighted sum of indicator functions of membership sets
// {a : a sqin t} (t ground Q-terms over the fragment, object variable pvar)
// into a partition of [0,1)^N by cubes with a level on each cube.
inline std::vector<std::pair<Cube, Rat>> cube_decompose(
    const Fragment& frag, const std::string& pvar,
    const std::vector<std::pair<FormulaPtr, Rat>>& indicators,
    std::size_t cell_cap = 65536) {
  // Gather membership atoms and evaluate their Q-terms.
  struct MemAtom {
    std::string key;
    QElemV elem;
  };
  std::vector<MemAtom> mems;
  std::map<std::string, std::size_t> mem_index;
  std::map<std::string, bool> ground_truth;
  for (const auto& [f, w] : indicators) {
    (void)w;
    for (const auto& atom : atoms_of(f)) {
      std::string key = formula_str(atom);
      if (atom->atom == AtomKind::Sqin && atom->args[0]->name == pvar) {
        if (!mem_index.count(key)) {
          mem_index[key] = mems.size();
          mems.push_back({key, eval_qterm(frag, {}, atom->args[1])});
        }
      } else {
        // Parameter-only atom: a constant.
        if (!ground_truth.count(key)) ground_truth[key] = eval_atom(frag, atom, {});
      }
    }
  }
  // Per coordinate: cell partition refined by every Pair set on it.
  std::map<long, std::vector<IntervalUnion>> cells;
  for (const auto& m : mems) {
    if (m.elem.tag != QElemV::PairV) continue;
    auto& cc = cells[m.elem.index];
    if (cc.empty()) cc.push_back(IntervalUnion::full());
    std::vector<IntervalUnion> next;
    for (const auto& c : cc) {
      auto in = c.intersect(m.elem.set), out = c.minus(m.elem.set);
      if (!in.is_empty()) next.push_back(in);
      if (!out.is_empty()) next.push_back(out);
    }
    cc = std::move(next);
  }
  std::vector<long> coords;
  std::size_t total = 1;
  for (const auto& [n, cc] : cells) {
    coords.push_back(n);
    total *= cc.size();
    if (total > cell_cap)
      throw std::invalid_argument("cube_decompose: cell count exceeds cap");
  }
  std::vector<std::pair<Cube, Rat>> out;
  std::vector<std::size_t> pick(coords.size(), 0);
  for (std::size_t step = 0; step < total; ++step) {
    Cube cube;
    std::size_t rest = step;
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const auto& cc = cells[coords[i]];
      cube.fibers[coords[i]] = cc[rest % cc.size()];
      rest /= cc.size();
    }
    // Atom truth on this cube.
    std::map<std::string, bool> assign = ground_truth;
    for (const auto& m : mems) {
      bool v;
      if (m.elem.tag == QElemV::TopV) v = true;
      else if (m.elem.tag == QElemV::BotV) v = false;
      else v = cube.fibers[m.elem.index].subset_of(m.elem.set);
      assign[m.key] = v;
    }
    Rat level = 0;
    for (const auto& [f, w] : indicators)
      if (eval_bool(f, assign)) level += w;
    out.push_back({std::move(cube), level});
  }
  return out;
}

}  // namespace kmlab
