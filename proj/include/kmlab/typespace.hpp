#pragma once

// Finite Stone spaces of complete quantifier-free types over a fragment, for
// the relational theories (where quantifier elimination makes qf diagrams
// complete types).  Types are stored as bit-vectors over a canonical atom
// ordering; enumeration is a depth-first walk with consistency pruning.

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmlab/dnf.hpp"
#include "kmlab/theories.hpp"

namespace kmlab {

struct QfType {
  std::vector<std::pair<std::string, Sort>> vars;  // sorted by name
  std::vector<FormulaPtr> atoms;                   // canonical order
  std::vector<char> bits;                          // truth per atom

  std::vector<FormulaPtr> literals() const {
    std::vector<FormulaPtr> out;
    for (std::size_t i = 0; i < atoms.size(); ++i)
      out.push_back(bits[i] ? atoms[i] : Formula::lnot(atoms[i]));
    return out;
  }
  FormulaPtr formula() const { return Formula::land(literals()); }
  std::string key() const {
    std::string s;
    for (char b : bits) s += b ? '1' : '0';
    return s;
  }
};

struct TypeSpace {
  Fragment fragment;
  std::vector<std::pair<std::string, Sort>> vars;
  std::vector<QfType> types;
};

// The canonical atom list over vars ∪ params for a relational theory:
// variable equalities (var-var and var-param), then every relation atom
// mentioning at least one variable.  Each block is ordered by printed form.
inline std::vector<FormulaPtr> relational_atom_basis(
    const Fragment& frag, const std::vector<std::pair<std::string, Sort>>& vars) {
  for (const auto& [n, s] : vars)
    if (s != Sort::V)
      throw std::invalid_argument("relational atom basis: non-vertex variable " + n);
  std::vector<TermPtr> vterms, all;
  for (const auto& [n, s] : vars) vterms.push_back(Term::var(n, s));
  all = vterms;
  for (const auto& n : frag.param_names(Sort::V))
    all.push_back(Term::param(n, Sort::V));

  auto has_var = [](std::initializer_list<TermPtr> ts) {
    for (const auto& t : ts)
      if (t->kind == TermKind::Var) return true;
    return false;
  };
  std::vector<FormulaPtr> eqs, rels;
  for (std::size_t i = 0; i < vterms.size(); ++i) {
    for (std::size_t j = i + 1; j < vterms.size(); ++j)
      eqs.push_back(atom_eq(vterms[i], vterms[j]));
    for (const auto& p : all)
      if (p->kind == TermKind::Param) eqs.push_back(atom_eq(vterms[i], p));
  }
  if (frag.theory == TheoryId::TR) {
    for (const auto& a : all)
      for (const auto& b : all)
        for (const auto& c : all)
          if (has_var({a, b, c})) rels.push_back(atom_rel("R", {a, b, c}));
  } else {
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (has_var({all[i], all[j]}))
          rels.push_back(atom_rel("E", {all[i], all[j]}));
  }
  auto by_str = [](const FormulaPtr& a, const FormulaPtr& b) {
    return formula_str(a) < formula_str(b);
  };
  std::sort(eqs.begin(), eqs.end(), by_str);
  std::sort(rels.begin(), rels.end(), by_str);
  eqs.insert(eqs.end(), rels.begin(), rels.end());
  return eqs;
}

namespace detail {

// Context literals shared by every type: the fragment's diagram plus
// pairwise distinctness of its parameters.
inline std::vector<Literal> fragment_context(const Fragment& frag) {
  std::vector<Literal> out;
  for (const auto& dl : frag.diagram) {
    bool pos = dl->kind != FormKind::Not;
    out.push_back({pos ? dl : dl->kids[0], pos});
  }
  auto names = frag.param_names(Sort::V);
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      out.push_back({atom_eq(Term::param(names[i], Sort::V),
                             Term::param(names[j], Sort::V)),
                     false});
  return out;
}

}  // namespace detail

// All complete consistent qf diagrams in the given variables over the
// fragment.  Relational theories only.
inline TypeSpace enumerate_types(const Fragment& frag,
                                 std::vector<std::pair<std::string, Sort>> vars,
                                 std::size_t candidate_cap = 1u << 22) {
  if (!is_relational(frag.theory))
    throw std::invalid_argument(
        "enumerate_types: theory has no finite type spaces; "
        "use symbolic evaluation");
  std::sort(vars.begin(), vars.end());
  TypeSpace space;
  space.fragment = frag;
  space.vars = vars;
  auto atoms = relational_atom_basis(frag, vars);

  std::vector<Literal> context = detail::fragment_context(frag);
  std::vector<char> bits(atoms.size(), 0);
  std::size_t visited = 0;

  // The basis lists equality atoms first.  Equality prefixes are validated by
  // the full diagram checker (they are few); once the equalities are fixed,
  // relation atoms collapse to canonical keys under the induced identification
  // and each key admits both truth values unless already forced — so the
  // relation phase needs only O(1) bookkeeping per node, plus an incremental
  // clique check for the Henson graphs.  Pruning is exact: every consistent
  // partial diagram extends (unforced atoms can be set false).
  std::size_t n_eq = 0;
  while (n_eq < atoms.size() && atoms[n_eq]->atom == AtomKind::Eq) ++n_eq;

  detail::NameUF uf;
  std::map<std::string, bool> decided;          // collapsed atom key -> value
  std::set<std::string> param_classes;          // classes containing a param
  std::map<std::string, std::set<std::string>> adj;  // positive E edges
  auto collapse_key = [&](const FormulaPtr& atom) {
    std::vector<std::string> names;
    for (const auto& a : atom->args) names.push_back(uf.find(a->name));
    if (atom->rel == "E" && names[0] > names[1]) std::swap(names[0], names[1]);
    std::string k = atom->rel + "(";
    for (std::size_t i = 0; i < names.size(); ++i) k += (i ? "," : "") + names[i];
    return k + ")";
  };
  // Does adding edge (u,v) close a K_s of positive edges?
  std::function<bool(const std::vector<std::string>&, int)> common_clique =
      [&](const std::vector<std::string>& cand, int need) -> bool {
    if (need == 0) return true;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      std::vector<std::string> next;
      for (std::size_t j = i + 1; j < cand.size(); ++j)
        if (adj[cand[i]].count(cand[j])) next.push_back(cand[j]);
      if ((int)next.size() >= need - 1 && common_clique(next, need - 1))
        return true;
    }
    return false;
  };

  std::function<void(std::size_t, std::vector<Literal>&)> rec =
      [&](std::size_t i, std::vector<Literal>& lits) {
        if (++visited > candidate_cap)
          throw std::invalid_argument("enumerate_types: candidate cap exceeded");
        if (i == atoms.size()) {
          QfType t;
          t.vars = vars;
          t.atoms = atoms;
          t.bits = bits;
          space.types.push_back(std::move(t));
          return;
        }
        if (i < n_eq) {
          for (char v : {char(1), char(0)}) {
            bits[i] = v;
            lits.push_back({atoms[i], v != 0});
            if (check_relational_diagram(frag.theory, frag.henson_s, lits).ok) {
              if (i + 1 == n_eq) {
                // Freeze the identification and seed the decided keys.
                uf = detail::NameUF();
                decided.clear();
                adj.clear();
                for (const auto& l : lits)
                  if (l.atom->atom == AtomKind::Eq && l.positive)
                    uf.merge(l.atom->args[0]->name, l.atom->args[1]->name);
                param_classes.clear();
                for (const auto& [pn, ps] : frag.params)
                  if (ps == Sort::V) param_classes.insert(uf.find(pn));
                bool ok = true;
                for (const auto& l : lits) {
                  if (l.atom->atom != AtomKind::Rel) continue;
                  auto [it, fresh] = decided.try_emplace(collapse_key(l.atom),
                                                         l.positive);
                  if (!fresh && it->second != l.positive) { ok = false; break; }
                  if (l.positive && l.atom->rel == "E") {
                    std::string u = uf.find(l.atom->args[0]->name);
                    std::string w = uf.find(l.atom->args[1]->name);
                    adj[u].insert(w);
                    adj[w].insert(u);
                  }
                }
                if (ok) rec(i + 1, lits);
              } else {
                rec(i + 1, lits);
              }
            }
            lits.pop_back();
          }
          return;
        }
        // Relation phase.
        const auto& atom = atoms[i];
        std::string key = collapse_key(atom);
        bool reflexive_e = false;
        std::string eu, ev;
        if (atom->rel == "E") {
          eu = uf.find(atom->args[0]->name);
          ev = uf.find(atom->args[1]->name);
          reflexive_e = eu == ev;
        }
        auto it = decided.find(key);
        // An atom whose arguments are all identified with parameters is a
        // ground fact about the fragment, not a degree of freedom of the
        // type; when the diagram leaves it open it defaults to false.
        bool param_ground = true;
        for (const auto& a : atom->args)
          if (!param_classes.count(uf.find(a->name))) param_ground = false;
        for (char v : {char(1), char(0)}) {
          if (it != decided.end() && (it->second ? 1 : 0) != v) continue;
          if (v && param_ground && it == decided.end()) continue;
          if (v && reflexive_e) continue;  // E irreflexive
          bool fresh_edge = false;
          if (v && !eu.empty() && it == decided.end()) {
            // Henson: adding this positive edge must not close a K_s.
            if (frag.theory == TheoryId::Henson) {
              std::vector<std::string> common;
              for (const auto& w : adj[eu])
                if (adj[ev].count(w)) common.push_back(w);
              if ((int)common.size() >= frag.henson_s - 2 &&
                  common_clique(common, frag.henson_s - 2))
                continue;
            }
            adj[eu].insert(ev);
            adj[ev].insert(eu);
            fresh_edge = true;
          }
          bool inserted = false;
          if (it == decided.end()) {
            decided[key] = v != 0;
            inserted = true;
          }
          bits[i] = v;
          rec(i + 1, lits);
          if (inserted) decided.erase(key);
          if (fresh_edge) {
            adj[eu].erase(ev);
            adj[ev].erase(eu);
          }
        }
      };
  if (n_eq == 0) {
    // No equality atoms: freeze the (identity) identification up front.
    for (const auto& [pn, ps] : frag.params)
      if (ps == Sort::V) param_classes.insert(pn);
    for (const auto& l : context) {
      if (l.atom->atom != AtomKind::Rel) continue;
      decided[collapse_key(l.atom)] = l.positive;
      if (l.positive && l.atom->rel == "E") {
        adj[l.atom->args[0]->name].insert(l.atom->args[1]->name);
        adj[l.atom->args[1]->name].insert(l.atom->args[0]->name);
      }
    }
  }
  rec(0, context);
  return space;
}

// Restriction map rho^x_{B,A}: drop every literal mentioning a parameter
// outside the subfragment.
inline QfType restrict_type(const QfType& t, const Fragment& sub,
                            const Fragment& full) {
  for (const auto& [n, s] : sub.params) {
    auto it = full.params.find(n);
    if (it == full.params.end() || it->second != s)
      throw std::invalid_argument("restrict_type: fragments not nested");
  }
  auto sub_atoms = relational_atom_basis(sub, t.vars);
  std::map<std::string, char> truth;
  for (std::size_t i = 0; i < t.atoms.size(); ++i)
    truth[formula_str(t.atoms[i])] = t.bits[i];
  QfType out;
  out.vars = t.vars;
  out.atoms = sub_atoms;
  for (const auto& a : sub_atoms) {
    auto it = truth.find(formula_str(a));
    if (it == truth.end())
      throw std::invalid_argument("restrict_type: atom missing from source type");
    out.bits.push_back(it->second);
  }
  return out;
}

// Truth of an atom over vars ∪ params per the type plus the fragment diagram.
inline bool type_atom_truth(const Fragment& frag, const QfType& t,
                            const FormulaPtr& atom) {
  std::map<std::string, char>* cache = nullptr;  // small; linear scan is fine
  (void)cache;
  auto find_bit = [&](const FormulaPtr& a) -> std::optional<bool> {
    std::string k = formula_str(a);
    for (std::size_t i = 0; i < t.atoms.size(); ++i)
      if (formula_str(t.atoms[i]) == k) return t.bits[i] != 0;
    return std::nullopt;
  };
  if (auto b = find_bit(atom)) return *b;
  // Argument-order variants: symmetric E, flipped equality.
  if (atom->atom == AtomKind::Eq) {
    if (auto b = find_bit(atom_eq(atom->args[1], atom->args[0]))) return *b;
    // Parameter-only equality: distinct names denote distinct elements.
    return term_str(atom->args[0]) == term_str(atom->args[1]);
  }
  if (atom->atom == AtomKind::Rel && atom->rel == "E") {
    if (auto b = find_bit(atom_rel("E", {atom->args[1], atom->args[0]})))
      return *b;
  }
  auto dv = frag.diagram_lookup(atom);
  if (!dv)
    throw std::invalid_argument("type does not decide " + formula_str(atom));
  return *dv;
}

// Does the clopen set of φ contain this type?
inline bool type_contains(const Fragment& frag, const QfType& t,
                          const FormulaPtr& qf) {
  std::map<std::string, bool> assign;
  for (const auto& a : atoms_of(qf))
    assign[formula_str(a)] = type_atom_truth(frag, t, a);
  return eval_bool(qf, assign);
}

}  // namespace kmlab
