#pragma once

// Recursive-descent parser for the ASCII formula grammar (see README for the
// EBNF).  Parsing happens in two stages: a backtracking syntactic pass that
// leaves every name as an unresolved Ident, then a sort-resolution pass that
// unifies sorts from atom positions, lattice/linear structure, quantifier
// annotations, and a caller-supplied symbol table of parameter sorts.

#include <cctype>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmlab/formula.hpp"

namespace kmlab {

struct ParseError : std::runtime_error {
  std::size_t position;
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " (at offset " + std::to_string(pos) + ")"),
        position(pos) {}
};

namespace detail {

enum class Tok {
  Ident, Number, LParen, RParen, Comma, Dot, Amp, Pipe, Bang,
  Eq, Neq, Lt, Plus, Minus, Star, Colon, CompSuffix, End
};

struct Token {
  Tok kind;
  std::string text;
  Rat number;
  std::size_t pos;
};

inline std::vector<Token> lex(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](Tok k, std::string t, std::size_t p) {
    out.push_back({k, std::move(t), 0, p});
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace((unsigned char)c)) { ++i; continue; }
    std::size_t p = i;
    if (std::isdigit((unsigned char)c)) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit((unsigned char)s[j])) ++j;
      if (j < s.size() && s[j] == '/' && j + 1 < s.size() &&
          std::isdigit((unsigned char)s[j + 1])) {
        ++j;
        while (j < s.size() && std::isdigit((unsigned char)s[j])) ++j;
      }
      Token t{Tok::Number, s.substr(i, j - i), 0, p};
      t.number = *parse_rat(t.text);
      out.push_back(std::move(t));
      i = j;
      continue;
    }
    if (std::isalpha((unsigned char)c) || c == '_') {
      std::size_t j = i;
      while (j < s.size() &&
             (std::isalnum((unsigned char)s[j]) || s[j] == '_' || s[j] == '\''))
        ++j;
      push(Tok::Ident, s.substr(i, j - i), p);
      i = j;
      continue;
    }
    switch (c) {
      case '(': push(Tok::LParen, "(", p); ++i; break;
      case ')': push(Tok::RParen, ")", p); ++i; break;
      case ',': push(Tok::Comma, ",", p); ++i; break;
      case '.': push(Tok::Dot, ".", p); ++i; break;
      case '&': push(Tok::Amp, "&", p); ++i; break;
      case '|': push(Tok::Pipe, "|", p); ++i; break;
      case '=': push(Tok::Eq, "=", p); ++i; break;
      case '<': push(Tok::Lt, "<", p); ++i; break;
      case '+': push(Tok::Plus, "+", p); ++i; break;
      case '-': push(Tok::Minus, "-", p); ++i; break;
      case '*': push(Tok::Star, "*", p); ++i; break;
      case ':': push(Tok::Colon, ":", p); ++i; break;
      case '!':
        if (i + 1 < s.size() && s[i + 1] == '=') {
          push(Tok::Neq, "!=", p);
          i += 2;
        } else {
          push(Tok::Bang, "!", p);
          ++i;
        }
        break;
      case '^':
        if (i + 1 < s.size() && s[i + 1] == 'c') {
          push(Tok::CompSuffix, "^c", p);
          i += 2;
        } else {
          throw ParseError("stray '^'", p);
        }
        break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", p);
    }
  }
  out.push_back({Tok::End, "", 0, s.size()});
  return out;
}

inline bool is_keyword(const std::string& w) {
  static const std::set<std::string> kw = {"sqin", "sim", "meet", "join", "comp",
                                           "bot",  "top", "l",    "exists",
                                           "forall", "true", "false"};
  return kw.count(w) > 0;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(lex(text)) {}

  FormulaPtr formula() {
    auto f = parse_formula();
    expect(Tok::End, "trailing input");
    return f;
  }

 private:
  std::vector<Token> toks_;
  std::size_t i_ = 0;

  const Token& cur() const { return toks_[i_]; }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_word(const char* w) const {
    return cur().kind == Tok::Ident && cur().text == w;
  }
  Token take() { return toks_[i_++]; }
  void expect(Tok k, const char* what) {
    if (!at(k)) throw ParseError(std::string("expected ") + what, cur().pos);
    ++i_;
  }

  FormulaPtr parse_formula() {  // lowest precedence: | over &
    auto lhs = parse_and();
    std::vector<FormulaPtr> parts{lhs};
    while (at(Tok::Pipe)) {
      take();
      parts.push_back(parse_and());
    }
    return Formula::lor(std::move(parts));
  }

  FormulaPtr parse_and() {
    std::vector<FormulaPtr> parts{parse_unary()};
    while (at(Tok::Amp)) {
      take();
      parts.push_back(parse_unary());
    }
    return Formula::land(std::move(parts));
  }

  FormulaPtr parse_unary() {
    if (at(Tok::Bang)) {
      take();
      return Formula::lnot(parse_unary());
    }
    if (at_word("true")) { take(); return Formula::truef(); }
    if (at_word("false")) { take(); return Formula::falsef(); }
    if (at_word("exists") || at_word("forall")) return parse_quant();
    if (at(Tok::LParen)) {
      // Could be a parenthesized subformula or a parenthesized term beginning
      // an atom; try the formula reading first and backtrack.
      std::size_t mark = i_;
      take();
      try {
        auto f = parse_formula();
        expect(Tok::RParen, "')'");
        // A comparison operator after the closing paren means the parens
        // belonged to a term after all.
        if (!at_word("sqin") && !at_word("sim") && !at(Tok::Eq) &&
            !at(Tok::Neq) && !at(Tok::Lt) && !at(Tok::Plus) &&
            !at(Tok::Minus) && !at_word("meet") && !at_word("join") &&
            !at(Tok::CompSuffix))
          return f;
      } catch (const ParseError&) {
        // fall through to the atom reading
      }
      i_ = mark;
    }
    return parse_atom();
  }

  FormulaPtr parse_quant() {
    bool ex = cur().text == "exists";
    take();
    if (!at(Tok::Ident) || is_keyword(cur().text))
      throw ParseError("expected variable after quantifier", cur().pos);
    std::string v = take().text;
    Sort s = Sort::P;
    bool annotated = false;
    if (at(Tok::Colon)) {
      take();
      if (!at(Tok::Ident)) throw ParseError("expected sort name", cur().pos);
      auto so = sort_from_name(take().text);
      if (!so) throw ParseError("unknown sort", cur().pos);
      s = *so;
      annotated = true;
    }
    expect(Tok::Dot, "'.' after quantified variable");
    auto body = parse_unary();
    auto f = Formula::quant(ex ? FormKind::Exists : FormKind::Forall, v, s, body);
    // An unannotated quantifier is marked by storing the variable also as an
    // Ident-sorted placeholder; the resolver recognizes annotation via qsort
    // plus this side table.
    if (!annotated) unannotated_.insert(formula_key(f));
    return f;
  }

 public:
  // Formulas created without a sort annotation (resolver infers their sort).
  std::set<const Formula*> unannotated_raw_;

 private:
  std::set<std::string> unannotated_;
  std::string formula_key(const FormulaPtr& f) {
    unannotated_raw_.insert(f.get());
    return "";
  }

  FormulaPtr parse_atom() {
    auto lhs = parse_expr();
    if (at_word("sqin")) { take(); return atom_sqin(lhs, parse_expr()); }
    if (at_word("sim")) { take(); return atom_sim(lhs, parse_expr()); }
    if (at(Tok::Eq)) { take(); return atom_eq(lhs, parse_expr()); }
    if (at(Tok::Neq)) { take(); return Formula::lnot(atom_eq(lhs, parse_expr())); }
    if (at(Tok::Lt)) { take(); return atom_less(lhs, parse_expr()); }
    // A bare relation application R(...), E(...) is itself an atom.
    if (lhs->kind == TermKind::Ident && rel_args_.count(lhs.get()))
      return atom_rel(lhs->name, rel_args_[lhs.get()]);
    throw ParseError("expected a comparison operator", cur().pos);
  }

  // Relation applications are detected during term parsing: an identifier that
  // is immediately applied to arguments and is not 'l'/'comp'.  The argument
  // vector is stashed here keyed by the placeholder Ident node.
  std::map<const Term*, std::vector<TermPtr>> rel_args_;

  TermPtr parse_expr() {  // R-level sums over lattice-level operands
    bool neg = false;
    if (at(Tok::Minus)) { take(); neg = true; }
    TermPtr acc = parse_addend();
    if (neg) acc = Term::sub(Term::num(0), acc);
    while (at(Tok::Plus) || at(Tok::Minus)) {
      bool plus = at(Tok::Plus);
      take();
      auto rhs = parse_addend();
      acc = plus ? Term::add(acc, rhs) : Term::sub(acc, rhs);
    }
    return acc;
  }

  TermPtr parse_addend() {
    if (at(Tok::Number)) {
      Rat n = take().number;
      if (at(Tok::Star)) {
        take();
        return Term::scale(n, parse_addend());
      }
      return Term::num(n);
    }
    return parse_lattice();
  }

  TermPtr parse_lattice() {  // join over meet over unary
    TermPtr acc = parse_meets();
    while (at_word("join")) {
      take();
      acc = Term::join(acc, parse_meets());
    }
    return acc;
  }

  TermPtr parse_meets() {
    TermPtr acc = parse_tunary();
    while (at_word("meet")) {
      take();
      acc = Term::meet(acc, parse_tunary());
    }
    return acc;
  }

  TermPtr parse_tunary() {
    TermPtr t = parse_tprimary();
    while (at(Tok::CompSuffix)) {
      take();
      t = Term::comp(t);
    }
    return t;
  }

  TermPtr parse_tprimary() {
    if (at_word("bot")) { take(); return Term::bot(); }
    if (at_word("top")) { take(); return Term::top(); }
    if (at_word("comp")) {
      take();
      expect(Tok::LParen, "'(' after comp");
      auto t = parse_lattice();
      expect(Tok::RParen, "')'");
      return Term::comp(t);
    }
    if (at_word("l")) {
      take();
      expect(Tok::LParen, "'(' after l");
      auto t = parse_lattice();
      expect(Tok::RParen, "')'");
      return Term::ell(t);
    }
    if (at(Tok::Number)) return Term::num(take().number);
    if (at(Tok::Ident)) {
      if (is_keyword(cur().text))
        throw ParseError("keyword '" + cur().text + "' used as a name", cur().pos);
      std::string name = take().text;
      auto id = Term::ident(name);
      if (at(Tok::LParen)) {  // relation application
        take();
        std::vector<TermPtr> args;
        if (!at(Tok::RParen)) {
          args.push_back(parse_expr());
          while (at(Tok::Comma)) {
            take();
            args.push_back(parse_expr());
          }
        }
        expect(Tok::RParen, "')'");
        rel_args_[id.get()] = std::move(args);
      }
      return id;
    }
    if (at(Tok::LParen)) {
      take();
      auto t = parse_expr();
      expect(Tok::RParen, "')'");
      return t;
    }
    throw ParseError("expected a term", cur().pos);
  }
};

// --------------------------------------------------------------------------
// Sort resolution: union-find over name slots with sort constraints.

class SortResolver {
 public:
  explicit SortResolver(const std::map<std::string, Sort>& params)
      : params_(params) {}

  FormulaPtr resolve(const FormulaPtr& f,
                     const std::set<const Formula*>& unannotated) {
    unannotated_ = &unannotated;
    std::map<std::string, int> scope;
    // Pass 1: create slots and gather structural constraints.
    scan_formula(f, scope);
    // Pass 2: rebuild the tree with resolved Var/Param nodes.
    return rebuild_formula(f, scope);
  }

 private:
  const std::map<std::string, Sort>& params_;
  const std::set<const Formula*>* unannotated_ = nullptr;
  std::vector<int> uf_;
  std::vector<std::optional<Sort>> sort_;
  std::map<std::string, int> global_;  // free-variable slots by name

  int fresh_slot() {
    uf_.push_back((int)uf_.size());
    sort_.push_back(std::nullopt);
    return (int)uf_.size() - 1;
  }
  int find(int x) { return uf_[x] == x ? x : uf_[x] = find(uf_[x]); }
  void merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (sort_[a] && sort_[b] && *sort_[a] != *sort_[b])
      throw ParseError("sort conflict between unified names", 0);
    if (!sort_[a]) sort_[a] = sort_[b];
    uf_[b] = a;
  }
  void constrain(int slot, Sort s) {
    slot = find(slot);
    if (sort_[slot] && *sort_[slot] != s)
      throw ParseError("sort conflict: needs " + sort_name(s) +
                           " but already " + sort_name(*sort_[slot]),
                       0);
    sort_[slot] = s;
  }

  int slot_of(const std::string& name, std::map<std::string, int>& scope) {
    auto it = scope.find(name);
    if (it != scope.end()) return it->second;
    auto git = global_.find(name);
    if (git != global_.end()) return git->second;
    int s = fresh_slot();
    auto pit = params_.find(name);
    if (pit != params_.end()) constrain(s, pit->second);
    global_[name] = s;
    return s;
  }

  // Returns the slot if the term is a bare name, -1 otherwise, and applies
  // structural constraints.  `want` is the sort demanded by the context (or
  // nullopt when the context is sort-agnostic, e.g. '=').
  int scan_term(const TermPtr& t, std::map<std::string, int>& scope,
                std::optional<Sort> want) {
    switch (t->kind) {
      case TermKind::Ident: {
        int s = slot_of(t->name, scope);
        if (want) constrain(s, *want);
        return s;
      }
      case TermKind::Bot:
      case TermKind::Top:
        check_want(want, Sort::Q);
        return -1;
      case TermKind::Meet:
      case TermKind::Join:
        check_want(want, Sort::Q);
        scan_term(t->kids[0], scope, Sort::Q);
        scan_term(t->kids[1], scope, Sort::Q);
        return -1;
      case TermKind::Comp:
        check_want(want, Sort::Q);
        scan_term(t->kids[0], scope, Sort::Q);
        return -1;
      case TermKind::Ell:
        check_want(want, Sort::R);
        scan_term(t->kids[0], scope, Sort::Q);
        return -1;
      case TermKind::Num:
        check_want(want, Sort::R);
        return -1;
      case TermKind::Add:
      case TermKind::Sub:
        check_want(want, Sort::R);
        scan_term(t->kids[0], scope, Sort::R);
        scan_term(t->kids[1], scope, Sort::R);
        return -1;
      case TermKind::Scale:
        check_want(want, Sort::R);
        scan_term(t->kids[0], scope, Sort::R);
        return -1;
      default:
        return -1;
    }
  }

  static void check_want(std::optional<Sort> want, Sort have) {
    if (want && *want != have)
      throw ParseError("sort conflict: term is " + sort_name(have) +
                           " where " + sort_name(*want) + " expected",
                       0);
  }

  void scan_formula(const FormulaPtr& f, std::map<std::string, int>& scope) {
    switch (f->kind) {
      case FormKind::Atom:
        switch (f->atom) {
          case AtomKind::Sqin:
            scan_term(f->args[0], scope, Sort::P);
            scan_term(f->args[1], scope, Sort::Q);
            break;
          case AtomKind::Sim:
            scan_term(f->args[0], scope, Sort::Q);
            scan_term(f->args[1], scope, Sort::Q);
            break;
          case AtomKind::Less:
            scan_term(f->args[0], scope, Sort::R);
            scan_term(f->args[1], scope, Sort::R);
            break;
          case AtomKind::Rel:
            for (const auto& a : f->args) scan_term(a, scope, Sort::V);
            break;
          case AtomKind::Eq: {
            // Equality is polymorphic: structural sorts win; bare names unify.
            int s0 = scan_term(f->args[0], scope, structural_sort(f->args[0]));
            int s1 = scan_term(f->args[1], scope, structural_sort(f->args[1]));
            if (s0 >= 0 && s1 >= 0) merge(s0, s1);
            else if (s0 >= 0) constrain(s0, *structural_sort(f->args[1]));
            else if (s1 >= 0) constrain(s1, *structural_sort(f->args[0]));
            break;
          }
        }
        break;
      case FormKind::Exists:
      case FormKind::Forall: {
        auto inner = scope;
        int slot = fresh_slot();
        qslots_[f.get()] = slot;
        if (!unannotated_->count(f.get())) constrain(slot, f->qsort);
        inner[f->qvar] = slot;
        scan_formula(f->kids[0], inner);
        break;
      }
      default:
        for (const auto& k : f->kids) scan_formula(k, scope);
    }
  }

  // Sort forced by a term's own structure, if any.
  static std::optional<Sort> structural_sort(const TermPtr& t) {
    switch (t->kind) {
      case TermKind::Ident: return std::nullopt;
      case TermKind::Bot:
      case TermKind::Top:
      case TermKind::Meet:
      case TermKind::Join:
      case TermKind::Comp: return Sort::Q;
      default: return Sort::R;
    }
  }

  Sort resolved(int slot, const std::string& name) {
    slot = find(slot);
    if (!sort_[slot])
      throw ParseError("cannot infer the sort of '" + name +
                           "'; add a quantifier annotation or use it in a "
                           "sorted position",
                       0);
    return *sort_[slot];
  }

  TermPtr rebuild_term(const TermPtr& t, std::map<std::string, int>& scope,
                       const std::set<std::string>& bound) {
    if (t->kind == TermKind::Ident) {
      int slot = scope.count(t->name) ? scope[t->name] : global_[t->name];
      Sort s = resolved(slot, t->name);
      if (!bound.count(t->name) && params_.count(t->name))
        return Term::param(t->name, s);
      return Term::var(t->name, s);
    }
    if (t->kids.empty()) return t;
    auto copy = std::make_shared<Term>(*t);
    for (auto& k : copy->kids) k = rebuild_term(k, scope, bound);
    return copy;
  }

  FormulaPtr rebuild_formula(const FormulaPtr& f,
                             std::map<std::string, int>& scope,
                             std::set<std::string> bound = {}) {
    if (f->kind == FormKind::Atom) {
      auto copy = std::make_shared<Formula>(*f);
      for (auto& a : copy->args) a = rebuild_term(a, scope, bound);
      return copy;
    }
    if (f->kind == FormKind::Exists || f->kind == FormKind::Forall) {
      auto inner = scope;
      // scan_formula assigned the slot in its own traversal order; repeat it.
      int slot = fresh_rebuild_slot_for(f);
      inner[f->qvar] = slot;
      bound.insert(f->qvar);
      auto copy = std::make_shared<Formula>(*f);
      copy->qsort = resolved(slot, f->qvar);
      copy->kids = {rebuild_formula(f->kids[0], inner, bound)};
      return copy;
    }
    if (f->kids.empty()) return f;
    auto copy = std::make_shared<Formula>(*f);
    for (auto& k : copy->kids) k = rebuild_formula(k, scope, bound);
    return copy;
  }

  // Quantifier slots are recorded during the scan pass keyed by node address.
  std::map<const Formula*, int> qslots_;
  int fresh_rebuild_slot_for(const FormulaPtr& f) { return qslots_.at(f.get()); }

 public:
  std::map<const Formula*, int>* qslot_sink() { return &qslots_; }
};

}  // namespace detail

// Parses `text` against the grammar, resolving parameter names and sorts from
// `param_sorts`.  Throws ParseError on syntax or sort problems.
inline FormulaPtr parse_formula(const std::string& text,
                                const std::map<std::string, Sort>& param_sorts = {}) {
  detail::Parser p(text);
  auto raw = p.formula();
  detail::SortResolver r(param_sorts);
  return r.resolve(raw, p.unannotated_raw_);
}

}  // namespace kmlab
