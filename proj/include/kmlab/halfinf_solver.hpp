#pragma once

// Witness construction for quantifier-free formulas over T^inf_{1/2} (and its
// P/Q reduct).  Strategy: after choosing, for every free Q-sort variable, a
// "shape" (bot, top, or a similarity class shared with a named element or
// freshly created), each similarity class becomes a finitely generated
// subalgebra of the interval algebra.  Named generators refine [0,1) into
// cells; free generators split each cell into 2^k formal atoms whose Lebesgue
// masses are unknowns of an exact linear program.  An element of the
// subalgebra is nonempty iff its mass is positive, which turns the lattice
// collapse rules (meet to bot, join to top) into sign conditions on linear
// forms; point membership becomes "some allowed atom has positive mass".
// A feasible sample is converted into concrete interval sets by carving each
// cell (strict-sandwich realization) and into concrete point coordinates
// via the registry.

#include <algorithm>
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

namespace halfinf_detail {

struct MiniUF {
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

struct SymInfo {
  Sort sort = Sort::P;
  bool fixed = false;  // parameter with a standard value
  StdValue val;
};

// A similarity class under a fixed shape choice.
struct QClass {
  bool fresh = false;
  long index = -1;                       // concrete coordinate if !fresh
  std::vector<std::string> free_gens;    // free Q symbols living here
  std::vector<std::string> fixed_names;  // named generators
  std::vector<IntervalUnion> fixed_sets;
  std::vector<IntervalUnion> cells;      // refinement of [0,1) by fixed sets
  std::vector<std::vector<char>> fixed_in_cell;  // [gen][cell]
  int mass_base = 0;                     // first LP variable of this class

  int k() const { return (int)free_gens.size(); }
  std::size_t natoms() const { return cells.size() << k(); }
  int atom_var(std::size_t cell, std::size_t sigma) const {
    return mass_base + (int)((cell << k()) | sigma);
  }
  int gen_pos(const std::string& name) const {
    for (int i = 0; i < k(); ++i)
      if (free_gens[i] == name) return i;
    throw std::logic_error("gen_pos: unknown generator");
  }
};

// Value of a Q-term under one branch of the collapse case split.
struct TVal {
  enum Tag { B, T, PAIR } tag = B;
  int cls = -1;
  std::vector<char> in;  // formal atom membership, PAIR only
};

struct TBranch {
  TVal v;
  std::vector<LinConstraint> cons;
};

// Linear R-sort expression over the LP variables.
struct LinExpr {
  std::map<int, Rat> coeffs;
  Rat constant = 0;
};

struct RBranch {
  LinExpr e;
  std::vector<LinConstraint> cons;
};

struct MemReq {
  std::string pclass;
  int cls = -1;
  std::vector<char> in;  // atoms the point may occupy
};

struct Option {
  std::vector<LinConstraint> cons;
  std::vector<MemReq> mems;
};

class DisjunctSolver {
 public:
  DisjunctSolver(const Fragment& frag, const std::vector<Literal>& lits)
      : frag_(frag), lits_(lits) {}

  std::optional<Assignment> solve() {
    if (!scan_symbols()) return std::nullopt;
    if (!solve_p_equalities()) return std::nullopt;

    // Enumerate shapes for the free Q symbols.
    std::vector<int> shape(free_q_.size(), 0);
    return enumerate_shapes(0, shape);
  }

 private:
  const Fragment& frag_;
  const std::vector<Literal>& lits_;

  std::map<std::string, SymInfo> syms_;
  std::vector<std::string> free_q_;        // free Q symbols, sorted
  std::vector<long> fixed_indices_;        // distinct indices of named pairs
  MiniUF puf_;                             // P-sort equality classes
  std::map<std::string, PPoint> pfixed_;   // P class rep -> forced point

  // Per attempted shape:
  std::vector<QClass> classes_;
  std::map<long, int> class_of_index_;
  std::map<std::string, TVal> qsym_val_;   // Q symbol -> leaf value (PAIR/B/T)
  std::map<std::string, int> rvar_id_;     // free R symbol -> LP variable
  int nvars_ = 0;
  std::vector<LinConstraint> base_cons_;

  bool is_pq() const { return frag_.theory == TheoryId::THalfInfPQ; }

  void note_symbol(const TermPtr& t) {
    if (t->kind == TermKind::Var || t->kind == TermKind::Param) {
      SymInfo info;
      info.sort = t->sort;
      if (t->kind == TermKind::Param) {
        info.fixed = true;
        info.val = frag_.value(t->name);
      }
      auto [it, fresh] = syms_.try_emplace(t->name, info);
      if (!fresh && it->second.sort != info.sort)
        throw std::invalid_argument("symbol " + t->name + " used at two sorts");
      return;
    }
    for (const auto& k : t->kids) note_symbol(k);
  }

  bool scan_symbols() {
    for (const auto& l : lits_) {
      if (l.atom->atom == AtomKind::Rel)
        throw std::invalid_argument("relational atom in a half-full theory");
      if (is_pq() &&
          (l.atom->atom == AtomKind::Less ||
           (l.atom->atom == AtomKind::Eq && term_sort(l.atom->args[0]) == Sort::R)))
        throw std::invalid_argument("R-sort atom in the P/Q reduct");
      for (const auto& a : l.atom->args) note_symbol(a);
    }
    std::set<long> idx;
    for (const auto& [n, info] : syms_) {
      if (info.sort == Sort::V)
        throw std::invalid_argument("vertex symbol in a half-full theory");
      if (info.sort != Sort::Q) continue;
      if (info.fixed) {
        const auto* q = std::get_if<QElemV>(&info.val);
        if (!q) throw std::invalid_argument(n + " is not a Q element");
        if (q->tag == QElemV::PairV) idx.insert(q->index);
      } else {
        free_q_.push_back(n);
      }
    }
    fixed_indices_.assign(idx.begin(), idx.end());
    if (free_q_.size() > 6)
      throw std::invalid_argument("too many free Q variables in one disjunct");
    return true;
  }

  bool solve_p_equalities() {
    std::vector<std::pair<std::string, std::string>> neq;
    for (const auto& l : lits_) {
      if (l.atom->atom != AtomKind::Eq) continue;
      if (term_sort(l.atom->args[0]) != Sort::P) continue;
      const auto& a = l.atom->args[0];
      const auto& b = l.atom->args[1];
      if ((a->kind != TermKind::Var && a->kind != TermKind::Param) ||
          (b->kind != TermKind::Var && b->kind != TermKind::Param))
        throw std::invalid_argument("non-symbol P-sort equality");
      if (l.positive) puf_.merge(a->name, b->name);
      else neq.push_back({a->name, b->name});
    }
    // Forced point per class where a parameter is a member.
    for (const auto& [n, info] : syms_) {
      if (info.sort != Sort::P || !info.fixed) continue;
      const auto* p = std::get_if<PPoint>(&info.val);
      if (!p) throw std::invalid_argument(n + " is not a point");
      std::string r = puf_.find(n);
      auto [it, fresh] = pfixed_.try_emplace(r, *p);
      if (!fresh && !(it->second == *p)) return false;
    }
    for (const auto& [a, b] : neq) {
      std::string ra = puf_.find(a), rb = puf_.find(b);
      if (ra == rb) return false;
      auto ia = pfixed_.find(ra), ib = pfixed_.find(rb);
      if (ia != pfixed_.end() && ib != pfixed_.end() &&
          ia->second == ib->second)
        return false;
    }
    return true;
  }

  // Shape codes: 0 bot, 1 top, 2..2+F-1 the fixed indices, then fresh class
  // j (first-fit canonical: a fresh class id may only follow smaller ids).
  std::optional<Assignment> enumerate_shapes(std::size_t i,
                                             std::vector<int>& shape) {
    if (i == free_q_.size()) return attempt(shape);
    int fresh_seen = 0;
    for (std::size_t j = 0; j < i; ++j)
      fresh_seen = std::max(fresh_seen,
                            shape[j] - 1 - (int)fixed_indices_.size());
    int limit = 2 + (int)fixed_indices_.size() + fresh_seen + 1;
    for (int s = 0; s < limit; ++s) {
      shape[i] = s;
      if (auto a = enumerate_shapes(i + 1, shape)) return a;
    }
    return std::nullopt;
  }

  std::optional<Assignment> attempt(const std::vector<int>& shape) {
    classes_.clear();
    class_of_index_.clear();
    qsym_val_.clear();
    rvar_id_.clear();
    base_cons_.clear();
    nvars_ = 0;

    // Classes for every named index, plus the fresh ones this shape uses.
    for (long n : fixed_indices_) {
      QClass c;
      c.index = n;
      class_of_index_[n] = (int)classes_.size();
      classes_.push_back(std::move(c));
    }
    int max_fresh = -1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      int s = shape[i];
      int fbase = 2 + (int)fixed_indices_.size();
      if (s >= fbase) max_fresh = std::max(max_fresh, s - fbase);
    }
    std::vector<int> fresh_class_ids;
    for (int j = 0; j <= max_fresh; ++j) {
      QClass c;
      c.fresh = true;
      fresh_class_ids.push_back((int)classes_.size());
      classes_.push_back(std::move(c));
    }

    // Generators.
    for (const auto& [n, info] : syms_) {
      if (info.sort != Sort::Q || !info.fixed) continue;
      const auto& q = std::get<QElemV>(info.val);
      TVal v;
      if (q.tag == QElemV::BotV) v.tag = TVal::B;
      else if (q.tag == QElemV::TopV) v.tag = TVal::T;
      else {
        v.tag = TVal::PAIR;
        v.cls = class_of_index_.at(q.index);
        auto& c = classes_[v.cls];
        c.fixed_names.push_back(n);
        c.fixed_sets.push_back(q.set);
      }
      qsym_val_[n] = std::move(v);
    }
    for (std::size_t i = 0; i < free_q_.size(); ++i) {
      int s = shape[i];
      TVal v;
      if (s == 0) v.tag = TVal::B;
      else if (s == 1) v.tag = TVal::T;
      else {
        v.tag = TVal::PAIR;
        int fbase = 2 + (int)fixed_indices_.size();
        v.cls = s < fbase ? class_of_index_.at(fixed_indices_[s - 2])
                          : fresh_class_ids[s - fbase];
        classes_[v.cls].free_gens.push_back(free_q_[i]);
      }
      qsym_val_[free_q_[i]] = std::move(v);
    }

    // Cells and LP layout.
    for (auto& c : classes_) {
      c.cells = {IntervalUnion::full()};
      for (const auto& s : c.fixed_sets) {
        std::vector<IntervalUnion> next;
        for (const auto& cell : c.cells) {
          auto in = cell.intersect(s), out = cell.minus(s);
          if (!in.is_empty()) next.push_back(in);
          if (!out.is_empty()) next.push_back(out);
        }
        c.cells = std::move(next);
      }
      c.fixed_in_cell.assign(c.fixed_sets.size(), {});
      for (std::size_t g = 0; g < c.fixed_sets.size(); ++g)
        for (const auto& cell : c.cells)
          c.fixed_in_cell[g].push_back(cell.subset_of(c.fixed_sets[g]) ? 1 : 0);
      if (c.natoms() > 4096)
        throw std::invalid_argument("Q-class atom count exceeds cap");
      c.mass_base = nvars_;
      nvars_ += (int)c.natoms();
    }
    for (const auto& [n, info] : syms_)
      if (info.sort == Sort::R && !info.fixed) rvar_id_[n] = nvars_++;

    // Base constraints: nonnegative masses, cell totals, H_0 membership of
    // every free generator.
    for (const auto& c : classes_) {
      for (std::size_t a = 0; a < c.natoms(); ++a) {
        LinConstraint nn;
        nn.op = LinConstraint::LE;
        nn.add_coeff(c.mass_base + (int)a, -1);
        base_cons_.push_back(std::move(nn));
      }
      for (std::size_t cell = 0; cell < c.cells.size(); ++cell) {
        LinConstraint tot;
        tot.op = LinConstraint::EQ;
        for (std::size_t s = 0; s < (1u << c.k()); ++s)
          tot.add_coeff(c.atom_var(cell, s), 1);
        tot.constant = -c.cells[cell].measure();
        base_cons_.push_back(std::move(tot));
      }
      for (int g = 0; g < c.k(); ++g) {
        LinConstraint pos, negside;
        pos.op = LinConstraint::LT;
        negside.op = LinConstraint::LT;
        for (std::size_t cell = 0; cell < c.cells.size(); ++cell)
          for (std::size_t s = 0; s < (1u << c.k()); ++s)
            ((s >> g) & 1 ? pos : negside).add_coeff(c.atom_var(cell, s), -1);
        base_cons_.push_back(std::move(pos));
        base_cons_.push_back(std::move(negside));
      }
    }

    // Literal options, then the product over literals.
    std::vector<std::vector<Option>> options;
    for (const auto& l : lits_) {
      auto opts = literal_options(l);
      if (opts.empty()) return std::nullopt;
      options.push_back(std::move(opts));
    }
    std::size_t total = 1;
    for (const auto& o : options) {
      total *= o.size();
      if (total > 250000)
        throw std::invalid_argument("collapse case split exceeds cap");
    }
    std::vector<std::size_t> pick(options.size(), 0);
    for (std::size_t step = 0; step < total; ++step) {
      std::size_t rest = step;
      for (std::size_t i = 0; i < options.size(); ++i) {
        pick[i] = rest % options[i].size();
        rest /= options[i].size();
      }
      if (auto a = attempt_combo(options, pick)) return a;
    }
    return std::nullopt;
  }

  // ---- term evaluation under the case split -------------------------------

  std::vector<char> all_atoms(int cls, char fill) const {
    return std::vector<char>(classes_[cls].natoms(), fill);
  }

  LinConstraint sum_over(int cls, const std::vector<char>& in, bool inside,
                         LinConstraint::Op op) const {
    // op EQ: sum = 0; op LT used as sum > 0 (encoded -sum < 0).
    LinConstraint c;
    c.op = op;
    Rat coef = op == LinConstraint::LT ? -1 : 1;
    for (std::size_t a = 0; a < in.size(); ++a)
      if ((in[a] != 0) == inside)
        c.add_coeff(classes_[cls].mass_base + (int)a, coef);
    return c;
  }

  std::vector<TBranch> expand(int cls, std::vector<char> in,
                              std::vector<LinConstraint> cons) const {
    std::size_t cnt = std::count(in.begin(), in.end(), (char)1);
    if (cnt == 0) return {{TVal{TVal::B, -1, {}}, std::move(cons)}};
    if (cnt == in.size()) return {{TVal{TVal::T, -1, {}}, std::move(cons)}};
    std::vector<TBranch> out;
    {
      auto c = cons;
      c.push_back(sum_over(cls, in, true, LinConstraint::EQ));
      out.push_back({TVal{TVal::B, -1, {}}, std::move(c)});
    }
    {
      auto c = cons;
      c.push_back(sum_over(cls, in, false, LinConstraint::EQ));
      out.push_back({TVal{TVal::T, -1, {}}, std::move(c)});
    }
    {
      auto c = cons;
      c.push_back(sum_over(cls, in, true, LinConstraint::LT));
      c.push_back(sum_over(cls, in, false, LinConstraint::LT));
      out.push_back({TVal{TVal::PAIR, cls, std::move(in)}, std::move(c)});
    }
    return out;
  }

  TVal leaf_value(const std::string& name) const {
    const TVal& v = qsym_val_.at(name);
    if (v.tag != TVal::PAIR) return v;
    const QClass& c = classes_[v.cls];
    TVal out;
    out.tag = TVal::PAIR;
    out.cls = v.cls;
    out.in.assign(c.natoms(), 0);
    auto fit = std::find(c.fixed_names.begin(), c.fixed_names.end(), name);
    if (fit != c.fixed_names.end()) {
      std::size_t g = fit - c.fixed_names.begin();
      for (std::size_t cell = 0; cell < c.cells.size(); ++cell)
        if (c.fixed_in_cell[g][cell])
          for (std::size_t s = 0; s < (1u << c.k()); ++s)
            out.in[(cell << c.k()) | s] = 1;
    } else {
      int g = c.gen_pos(name);
      for (std::size_t cell = 0; cell < c.cells.size(); ++cell)
        for (std::size_t s = 0; s < (1u << c.k()); ++s)
          if ((s >> g) & 1) out.in[(cell << c.k()) | s] = 1;
    }
    return out;
  }

  std::vector<TBranch> eval_term(const TermPtr& t) const {
    switch (t->kind) {
      case TermKind::Bot: return {{TVal{TVal::B, -1, {}}, {}}};
      case TermKind::Top: return {{TVal{TVal::T, -1, {}}, {}}};
      case TermKind::Var:
      case TermKind::Param:
        return {{leaf_value(t->name), {}}};
      case TermKind::Comp: {
        auto kids = eval_term(t->kids[0]);
        for (auto& b : kids) {
          if (b.v.tag == TVal::B) b.v.tag = TVal::T;
          else if (b.v.tag == TVal::T) b.v.tag = TVal::B;
          else
            for (auto& bit : b.v.in) bit = bit ? 0 : 1;
        }
        return kids;
      }
      case TermKind::Meet:
      case TermKind::Join: {
        bool meet = t->kind == TermKind::Meet;
        auto lhs = eval_term(t->kids[0]);
        auto rhs = eval_term(t->kids[1]);
        std::vector<TBranch> out;
        for (const auto& a : lhs)
          for (const auto& b : rhs) {
            auto cons = a.cons;
            cons.insert(cons.end(), b.cons.begin(), b.cons.end());
            TVal::Tag absorb = meet ? TVal::B : TVal::T;
            if (a.v.tag == absorb || b.v.tag == absorb) {
              out.push_back({TVal{absorb, -1, {}}, std::move(cons)});
              continue;
            }
            if (a.v.tag != TVal::PAIR) {  // neutral element
              out.push_back({b.v, std::move(cons)});
              continue;
            }
            if (b.v.tag != TVal::PAIR) {
              out.push_back({a.v, std::move(cons)});
              continue;
            }
            if (a.v.cls != b.v.cls) {  // cross-class collapse
              out.push_back({TVal{absorb, -1, {}}, std::move(cons)});
              continue;
            }
            std::vector<char> in(a.v.in.size());
            for (std::size_t i = 0; i < in.size(); ++i)
              in[i] = meet ? (a.v.in[i] && b.v.in[i])
                           : (a.v.in[i] || b.v.in[i]);
            auto ex = expand(a.v.cls, std::move(in), std::move(cons));
            out.insert(out.end(), ex.begin(), ex.end());
          }
        return out;
      }
      default:
        throw std::invalid_argument("not a Q-sort term: " + term_str(t));
    }
  }

  std::vector<RBranch> eval_rexpr(const TermPtr& t) const {
    LinForm lf = linearize(t);
    std::vector<RBranch> out{{LinExpr{{}, lf.constant}, {}}};
    for (const auto& [key, cb] : lf.coeffs) {
      const auto& [coef, basis] = cb;
      std::vector<RBranch> contrib;
      if (basis->kind == TermKind::Ell) {
        for (const auto& tb : eval_term(basis->kids[0])) {
          LinExpr e;
          if (tb.v.tag == TVal::T) e.constant = 1;
          else if (tb.v.tag == TVal::PAIR)
            for (std::size_t a = 0; a < tb.v.in.size(); ++a)
              if (tb.v.in[a])
                e.coeffs[classes_[tb.v.cls].mass_base + (int)a] += 1;
          contrib.push_back({std::move(e), tb.cons});
        }
      } else {
        const SymInfo& info = syms_.at(basis->name);
        LinExpr e;
        if (info.fixed) e.constant = std::get<Rat>(info.val);
        else e.coeffs[rvar_id_.at(basis->name)] = 1;
        contrib.push_back({std::move(e), {}});
      }
      std::vector<RBranch> next;
      for (const auto& acc : out)
        for (const auto& c : contrib) {
          RBranch nb = acc;
          nb.e.constant += coef * c.e.constant;
          for (const auto& [v, cc] : c.e.coeffs) nb.e.coeffs[v] += coef * cc;
          nb.cons.insert(nb.cons.end(), c.cons.begin(), c.cons.end());
          next.push_back(std::move(nb));
        }
      out = std::move(next);
    }
    return out;
  }

  static LinConstraint expr_constraint(const LinExpr& e, LinConstraint::Op op,
                                       bool negate) {
    LinConstraint c;
    c.op = op;
    Rat s = negate ? -1 : 1;
    for (const auto& [v, cc] : e.coeffs)
      if (cc != 0) c.add_coeff(v, s * cc);
    c.constant = s * e.constant;
    return c;
  }

  // ---- literal handling ----------------------------------------------------

  std::vector<Option> literal_options(const Literal& l) const {
    const auto& atom = l.atom;
    std::vector<Option> out;
    switch (atom->atom) {
      case AtomKind::Eq: {
        Sort s = term_sort(atom->args[0]);
        if (s == Sort::P) {
          out.push_back({});  // handled up front
          return out;
        }
        if (s == Sort::R) {
          for (const auto& a : eval_rexpr(atom->args[0]))
            for (const auto& b : eval_rexpr(atom->args[1])) {
              LinExpr diff = a.e;
              diff.constant -= b.e.constant;
              for (const auto& [v, cc] : b.e.coeffs) diff.coeffs[v] -= cc;
              auto cons = a.cons;
              cons.insert(cons.end(), b.cons.begin(), b.cons.end());
              if (l.positive) {
                Option o{cons, {}};
                o.cons.push_back(expr_constraint(diff, LinConstraint::EQ, false));
                out.push_back(std::move(o));
              } else {
                Option lo{cons, {}}, hi{cons, {}};
                lo.cons.push_back(expr_constraint(diff, LinConstraint::LT, false));
                hi.cons.push_back(expr_constraint(diff, LinConstraint::LT, true));
                out.push_back(std::move(lo));
                out.push_back(std::move(hi));
              }
            }
          return out;
        }
        // Q-sort equality.
        for (const auto& a : eval_term(atom->args[0]))
          for (const auto& b : eval_term(atom->args[1])) {
            auto cons = a.cons;
            cons.insert(cons.end(), b.cons.begin(), b.cons.end());
            bool both_pair = a.v.tag == TVal::PAIR && b.v.tag == TVal::PAIR;
            if (!both_pair) {
              bool equal = a.v.tag == b.v.tag;
              if (equal == l.positive) out.push_back({std::move(cons), {}});
              continue;
            }
            if (a.v.cls != b.v.cls) {
              if (!l.positive) out.push_back({std::move(cons), {}});
              continue;
            }
            std::vector<char> symdiff(a.v.in.size());
            for (std::size_t i = 0; i < symdiff.size(); ++i)
              symdiff[i] = a.v.in[i] != b.v.in[i];
            bool formally_equal =
                std::count(symdiff.begin(), symdiff.end(), (char)1) == 0;
            if (l.positive) {
              Option o{std::move(cons), {}};
              if (!formally_equal)
                o.cons.push_back(
                    sum_over(a.v.cls, symdiff, true, LinConstraint::EQ));
              out.push_back(std::move(o));
            } else if (!formally_equal) {
              Option o{std::move(cons), {}};
              o.cons.push_back(
                  sum_over(a.v.cls, symdiff, true, LinConstraint::LT));
              out.push_back(std::move(o));
            }
          }
        return out;
      }
      case AtomKind::Less: {
        for (const auto& a : eval_rexpr(atom->args[0]))
          for (const auto& b : eval_rexpr(atom->args[1])) {
            LinExpr diff = a.e;
            diff.constant -= b.e.constant;
            for (const auto& [v, cc] : b.e.coeffs) diff.coeffs[v] -= cc;
            Option o{a.cons, {}};
            o.cons.insert(o.cons.end(), b.cons.begin(), b.cons.end());
            // lhs < rhs: diff < 0.  Negated: rhs <= lhs, i.e. -diff <= 0.
            o.cons.push_back(expr_constraint(
                diff, l.positive ? LinConstraint::LT : LinConstraint::LE,
                !l.positive));
            out.push_back(std::move(o));
          }
        return out;
      }
      case AtomKind::Sim: {
        for (const auto& a : eval_term(atom->args[0]))
          for (const auto& b : eval_term(atom->args[1])) {
            bool related = a.v.tag == TVal::PAIR && b.v.tag == TVal::PAIR &&
                           a.v.cls == b.v.cls;
            if (related != l.positive) continue;
            auto cons = a.cons;
            cons.insert(cons.end(), b.cons.begin(), b.cons.end());
            out.push_back({std::move(cons), {}});
          }
        return out;
      }
      case AtomKind::Sqin: {
        const auto& psym = atom->args[0];
        if (psym->kind != TermKind::Var && psym->kind != TermKind::Param)
          throw std::invalid_argument("sqin: compound P-sort operand");
        // The class representative of the point symbol (const_cast-free:
        // replay find on a copy).
        MiniUF uf = puf_;
        std::string rep = uf.find(psym->name);
        for (const auto& b : eval_term(atom->args[1])) {
          if (b.v.tag == TVal::T) {
            if (l.positive) out.push_back({b.cons, {}});
            continue;
          }
          if (b.v.tag == TVal::B) {
            if (!l.positive) out.push_back({b.cons, {}});
            continue;
          }
          std::vector<char> in = b.v.in;
          if (!l.positive)
            for (auto& bit : in) bit = bit ? 0 : 1;
          Option o{b.cons, {MemReq{rep, b.v.cls, std::move(in)}}};
          out.push_back(std::move(o));
        }
        return out;
      }
      default:
        throw std::invalid_argument("unsupported atom in half-full theory");
    }
  }

  // ---- assembling one case and constructing the witness -------------------

  std::optional<Assignment> attempt_combo(
      const std::vector<std::vector<Option>>& options,
      const std::vector<std::size_t>& pick) {
    std::vector<LinConstraint> cons = base_cons_;
    // Merge membership requirements per (point class, Q class).
    std::map<std::pair<std::string, int>, std::vector<char>> allowed;
    for (std::size_t i = 0; i < options.size(); ++i) {
      const Option& o = options[i][pick[i]];
      cons.insert(cons.end(), o.cons.begin(), o.cons.end());
      for (const auto& m : o.mems) {
        auto key = std::make_pair(m.pclass, m.cls);
        auto it = allowed.find(key);
        if (it == allowed.end()) {
          allowed[key] = m.in;
        } else {
          for (std::size_t a = 0; a < m.in.size(); ++a)
            it->second[a] = it->second[a] && m.in[a];
        }
      }
    }
    // Restrict by already materialized coordinates of named points.
    for (auto& [key, in] : allowed) {
      const auto& [rep, cls] = key;
      const QClass& c = classes_[cls];
      auto fp = pfixed_.find(rep);
      if (fp == pfixed_.end() || c.fresh) continue;
      auto co = fp->second.coords->find(c.index);
      if (co == fp->second.coords->end()) continue;
      for (std::size_t cell = 0; cell < c.cells.size(); ++cell)
        if (!c.cells[cell].contains(co->second))
          for (std::size_t s = 0; s < (1u << c.k()); ++s)
            in[(cell << c.k()) | s] = 0;
    }
    for (const auto& [key, in] : allowed) {
      if (std::count(in.begin(), in.end(), (char)1) == 0) return std::nullopt;
      cons.push_back(sum_over(key.second, in, true, LinConstraint::LT));
    }
    auto sol = lin_feasible_sample(cons, nvars_);
    if (!sol) return std::nullopt;
    return construct(*sol, allowed);
  }

  std::optional<Assignment> construct(
      const std::vector<Rat>& sol,
      const std::map<std::pair<std::string, int>, std::vector<char>>& allowed) {
    auto& reg = *frag_.registry;
    // Coordinate indices.
    for (auto& c : classes_)
      if (c.fresh) c.index = reg.fresh_q_index();
    // Point values per P class.
    std::map<std::string, PPoint> pvalue = pfixed_;
    auto point_of = [&](const std::string& rep) -> PPoint& {
      auto it = pvalue.find(rep);
      if (it != pvalue.end()) return it->second;
      PPoint p;
      p.id = reg.fresh_point_id();
      return pvalue.emplace(rep, std::move(p)).first->second;
    };
    // Atom choice and coordinate materialization per membership.
    // chosen[(cls, atom)] -> coordinates of points placed there.
    std::map<std::pair<int, std::size_t>, std::vector<Rat>> placed;
    for (const auto& [key, in] : allowed) {
      const auto& [rep, cls] = key;
      const QClass& c = classes_[cls];
      std::size_t atom = c.natoms();
      for (std::size_t a = 0; a < c.natoms(); ++a)
        if (in[a] && sol[c.mass_base + a] > 0) { atom = a; break; }
      if (atom == c.natoms()) return std::nullopt;  // defensive; cannot happen
      PPoint& p = point_of(rep);
      Rat coord;
      auto co = p.coords->find(c.index);
      if (co != p.coords->end()) {
        coord = co->second;
      } else {
        coord = reg.fresh_value_in(c.cells[atom >> c.k()]);
        (*p.coords)[c.index] = coord;
      }
      placed[{cls, atom}].push_back(coord);
    }
    // Carve each class cell into the 2^k formal atom regions.
    std::map<std::pair<int, std::size_t>, IntervalUnion> region;
    for (std::size_t ci = 0; ci < classes_.size(); ++ci) {
      const QClass& c = classes_[ci];
      for (std::size_t cell = 0; cell < c.cells.size(); ++cell)
        split_cell(c, (int)ci, cell, 0, 0, c.cells[cell], sol, placed, region);
    }
    // Assemble the assignment for the free variables.
    Assignment out;
    for (const auto& [n, info] : syms_) {
      if (info.fixed) continue;
      if (info.sort == Sort::P) {
        MiniUF uf = puf_;
        out[n] = point_of(uf.find(n));
      } else if (info.sort == Sort::R) {
        out[n] = sol[rvar_id_.at(n)];
      } else {
        const TVal& v = qsym_val_.at(n);
        if (v.tag == TVal::B) { out[n] = QElemV::botv(); continue; }
        if (v.tag == TVal::T) { out[n] = QElemV::topv(); continue; }
        const QClass& c = classes_[v.cls];
        int g = c.gen_pos(n);
        IntervalUnion set;
        for (std::size_t cell = 0; cell < c.cells.size(); ++cell)
          for (std::size_t s = 0; s < (1u << c.k()); ++s)
            if ((s >> g) & 1)
              set = set.unite(region.at({v.cls, (cell << c.k()) | s}));
        out[n] = QElemV::pair(c.index, std::move(set));
      }
    }
    return out;
  }

  void split_cell(
      const QClass& c, int ci, std::size_t cell, int depth, std::size_t prefix,
      const IntervalUnion& reg, const std::vector<Rat>& sol,
      const std::map<std::pair<int, std::size_t>, std::vector<Rat>>& placed,
      std::map<std::pair<int, std::size_t>, IntervalUnion>& region) const {
    if (depth == c.k()) {
      region[{ci, (cell << c.k()) | prefix}] = reg;
      return;
    }
    // Mass and points on the positive side of generator `depth` among atoms
    // extending the prefix.
    Rat mass_plus = 0, mass_total = 0;
    std::vector<Rat> pts_in, pts_out;
    std::size_t suffixes = 1ull << (c.k() - depth);
    for (std::size_t ext = 0; ext < suffixes; ++ext) {
      std::size_t sigma = prefix | (ext << depth);
      std::size_t atom = (cell << c.k()) | sigma;
      bool plus = (sigma >> depth) & 1;
      mass_total += sol[c.mass_base + atom];
      if (plus) mass_plus += sol[c.mass_base + atom];
      auto it = placed.find({ci, atom});
      if (it != placed.end()) {
        auto& dst = plus ? pts_in : pts_out;
        dst.insert(dst.end(), it->second.begin(), it->second.end());
      }
    }
    IntervalUnion plus_region, minus_region;
    if (mass_plus == 0) {
      minus_region = reg;
    } else if (mass_plus == mass_total) {
      plus_region = reg;
    } else {
      plus_region = carve_interval_subset(reg, pts_in, mass_plus, pts_out);
      minus_region = reg.minus(plus_region);
    }
    auto recurse = [&](bool plus, const IntervalUnion& sub) {
      std::size_t np = prefix | ((plus ? 1ull : 0ull) << depth);
      if (sub.is_empty()) {
        // All deeper atoms on this side are empty.
        std::size_t deeper = 1ull << (c.k() - depth - 1);
        for (std::size_t ext = 0; ext < deeper; ++ext) {
          std::size_t sigma = np | (ext << (depth + 1));
          region[{ci, (cell << c.k()) | sigma}] = IntervalUnion::empty();
        }
        return;
      }
      split_cell(c, ci, cell, depth + 1, np, sub, sol, placed, region);
    };
    recurse(true, plus_region);
    recurse(false, minus_region);
  }
};

}  // namespace halfinf_detail

// Standard values for the free variables of a quantifier-free formula over
// T^inf_{1/2} (or its P/Q reduct), or nullopt when unsatisfiable over the
// fragment.  Variables absent from the satisfied disjunct get generic values.
inline std::optional<Assignment> solve_half_inf(const Fragment& frag,
                                                const FormulaPtr& goal) {
  if (frag.theory != TheoryId::THalfInf && frag.theory != TheoryId::THalfInfPQ)
    throw std::invalid_argument("solve_half_inf: wrong theory");
  DnfFormula dnf = to_dnf(goal);
  for (const auto& disjunct : dnf.disjuncts) {
    halfinf_detail::DisjunctSolver solver(frag, disjunct);
    auto a = solver.solve();
    if (!a) continue;
    // Fill in variables the disjunct does not mention.
    for (const auto& [n, s] : free_vars(goal)) {
      if (a->count(n)) continue;
      if (s == Sort::P) {
        PPoint p;
        p.id = frag.registry->fresh_point_id();
        (*a)[n] = std::move(p);
      } else if (s == Sort::Q) {
        (*a)[n] = QElemV::pair(
            frag.registry->fresh_q_index(),
            IntervalUnion::from_pieces({{rat(0), rat(1, 2)}}));
      } else if (s == Sort::R) {
        (*a)[n] = Rat(0);
      } else {
        throw std::invalid_argument("vertex variable in a half-full theory");
      }
    }
    return a;
  }
  return std::nullopt;
}

}  // namespace kmlab
