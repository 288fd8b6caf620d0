#pragma once

// Structured-text loaders for fragment and scenario files, and the
// named-constructor measure-spec syntax used on the command line and in
// scenario files.  Schemas are documented in the README.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmlab/measures.hpp"
#include "kmlab/parser.hpp"
#include "kmlab/scenarios.hpp"

namespace kmlab {

namespace io_detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

inline Rat need_rat(const std::string& tok, const std::string& ctx) {
  auto r = parse_rat(tok);
  if (!r) throw std::invalid_argument(ctx + ": bad rational '" + tok + "'");
  return *r;
}

inline long need_long(const std::string& tok, const std::string& ctx) {
  try {
    std::size_t used = 0;
    long v = std::stol(tok, &used);
    if (used == tok.size()) return v;
  } catch (...) {
  }
  throw std::invalid_argument(ctx + ": bad integer '" + tok + "'");
}

// A piece token "lo:hi" with half-open meaning [lo, hi).
inline IntervalUnion::Piece parse_piece(const std::string& tok,
                                        const std::string& ctx) {
  std::size_t c = tok.find(':');
  if (c == std::string::npos)
    throw std::invalid_argument(ctx + ": piece must be lo:hi, got '" + tok +
                                "'");
  return {need_rat(tok.substr(0, c), ctx), need_rat(tok.substr(c + 1), ctx)};
}

inline IntervalUnion parse_pieces(const std::vector<std::string>& toks,
                                  std::size_t from, const std::string& ctx) {
  std::vector<IntervalUnion::Piece> pieces;
  for (std::size_t i = from; i < toks.size(); ++i)
    pieces.push_back(parse_piece(toks[i], ctx));
  return IntervalUnion::from_pieces(std::move(pieces));
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Fragment files.  Line-oriented; '#' starts a comment.  Directives:
//   theory <tr|henson|random-graph|thalf|thalf-inf|thalf-inf-pq>
//   henson-s <n>
//   param <name> <V|P|Q>
//   value <name> rat <p/q>
//   value <name> point <k>:<p/q> ...
//   value <name> qbot | qtop
//   value <name> qpair <index> <lo>:<hi> ...
//   value <name> halfq <n> <lo>:<hi> ...
//   literal <ground literal in the formula grammar>

inline Fragment parse_fragment_text(std::istream& in) {
  using namespace io_detail;
  Fragment frag;
  bool theory_set = false;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto toks = words(line);
    if (toks.empty()) continue;
    std::string ctx = "fragment file line " + std::to_string(lineno);
    const std::string& d = toks[0];
    if (d == "theory") {
      if (toks.size() != 2)
        throw std::invalid_argument(ctx + ": theory needs one name");
      auto t = theory_from_name(toks[1]);
      if (!t) throw std::invalid_argument(ctx + ": unknown theory " + toks[1]);
      frag.theory = *t;
      theory_set = true;
    } else if (d == "henson-s") {
      if (toks.size() != 2)
        throw std::invalid_argument(ctx + ": henson-s needs one integer");
      long s = need_long(toks[1], ctx);
      if (s < 3) throw std::invalid_argument(ctx + ": henson-s must be >= 3");
      frag.henson_s = (int)s;
    } else if (d == "param") {
      if (toks.size() != 3)
        throw std::invalid_argument(ctx + ": param needs name and sort");
      auto s = sort_from_name(toks[2]);
      if (!s) throw std::invalid_argument(ctx + ": unknown sort " + toks[2]);
      frag.add_param(toks[1], *s);
    } else if (d == "value") {
      if (toks.size() < 3)
        throw std::invalid_argument(ctx + ": value needs name and kind");
      const std::string& nm = toks[1];
      const std::string& kind = toks[2];
      if (kind == "rat") {
        if (toks.size() != 4)
          throw std::invalid_argument(ctx + ": value rat needs one rational");
        frag.set_value(nm, need_rat(toks[3], ctx));
      } else if (kind == "point") {
        PPoint p;
        p.id = frag.registry->fresh_point_id();
        for (std::size_t i = 3; i < toks.size(); ++i) {
          std::size_t c = toks[i].find(':');
          if (c == std::string::npos)
            throw std::invalid_argument(ctx + ": point coord must be k:p/q");
          (*p.coords)[need_long(toks[i].substr(0, c), ctx)] =
              need_rat(toks[i].substr(c + 1), ctx);
        }
        frag.set_value(nm, p);
      } else if (kind == "qbot") {
        frag.set_value(nm, QElemV::botv());
      } else if (kind == "qtop") {
        frag.set_value(nm, QElemV::topv());
      } else if (kind == "qpair") {
        if (toks.size() < 5)
          throw std::invalid_argument(ctx +
                                      ": qpair needs index and pieces");
        frag.set_value(nm, QElemV::pair(need_long(toks[3], ctx),
                                        parse_pieces(toks, 4, ctx)));
      } else if (kind == "halfq") {
        if (toks.size() < 5)
          throw std::invalid_argument(ctx + ": halfq needs n and pieces");
        frag.set_value(nm, THalfQ::make(need_long(toks[3], ctx),
                                        parse_pieces(toks, 4, ctx)));
      } else {
        throw std::invalid_argument(ctx + ": unknown value kind " + kind);
      }
    } else if (d == "literal") {
      std::size_t pos = line.find("literal");
      std::string src = trim(line.substr(pos + 7));
      std::map<std::string, Sort> psorts;
      for (const auto& [n, s] : frag.params) psorts[n] = s;
      FormulaPtr f = parse_formula(src, psorts);
      bool neg = f->kind == FormKind::Not;
      const FormulaPtr& atom = neg ? f->kids[0] : f;
      if (atom->kind != FormKind::Atom)
        throw std::invalid_argument(ctx + ": literal must be a ground "
                                          "(possibly negated) atom");
      frag.add_literal(f);
    } else {
      throw std::invalid_argument(ctx + ": unknown directive " + d);
    }
  }
  if (!theory_set)
    throw std::invalid_argument("fragment file: missing theory directive");
  return frag;
}

inline Fragment load_fragment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open fragment file " + path);
  return parse_fragment_text(in);
}

// ---------------------------------------------------------------------------
// Measure specs: named constructors with rational parameters.
//   dirac(<var>, <param>)            point mass at a named fragment value
//   average(<var>, <p1>, <p2>, ...)  uniform average over named values
//   coinflip(<var>[, <bias p/q>])    the generically random relational type
//   lebesgue(<var>)                  cube Lebesgue on the P sort
//   pairtype(<var>)                  the generic pair type on the Q sort
//   convex(<r p/q>, <spec>, <spec>)  r*first + (1-r)*second

namespace io_detail {

// Splits "name(arg, arg, ...)" respecting nested parentheses.
inline std::pair<std::string, std::vector<std::string>> split_ctor(
    const std::string& src) {
  std::string s = trim(src);
  std::size_t open = s.find('(');
  if (open == std::string::npos) return {s, {}};  // bare name: default args
  if (s.back() != ')')
    throw std::invalid_argument("measure spec must be name(args): " + src);
  std::string name = trim(s.substr(0, open));
  std::vector<std::string> args;
  std::string cur;
  int depth = 0;
  for (std::size_t i = open + 1; i + 1 < s.size(); ++i) {
    char c = s[i];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      args.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) args.push_back(trim(cur));
  return {name, args};
}

inline StdValue named_element(const Fragment& frag, const std::string& name,
                              Sort* sort_out) {
  auto it = frag.params.find(name);
  if (it == frag.params.end())
    throw std::invalid_argument("measure spec: unknown parameter " + name);
  if (sort_out) *sort_out = it->second;
  if (frag.has_value(name)) return frag.value(name);
  if (it->second == Sort::V) return VertexRef{name};
  throw std::invalid_argument("measure spec: parameter " + name +
                              " has no standard value");
}

}  // namespace io_detail

inline MeasurePtr parse_measure_spec(const std::string& src,
                                     const Fragment& frag) {
  using namespace io_detail;
  auto [name, args] = split_ctor(src);
  if (name == "dirac") {
    if (args.size() != 2)
      throw std::invalid_argument("dirac(var, param) takes two arguments");
    Sort s = Sort::V;
    StdValue v = named_element(frag, args[1], &s);
    return dirac_measure(std::move(v), args[0], s);
  }
  if (name == "average") {
    if (args.size() < 2)
      throw std::invalid_argument("average(var, p1, ...) needs elements");
    Sort s = Sort::V;
    std::vector<StdValue> elems;
    for (std::size_t i = 1; i < args.size(); ++i) {
      Sort si = Sort::V;
      elems.push_back(named_element(frag, args[i], &si));
      if (i == 1) s = si;
      else if (si != s)
        throw std::invalid_argument("average: mixed element sorts");
    }
    return average_measure(std::move(elems), args[0], s);
  }
  if (name == "coinflip") {
    if (args.empty()) return coin_flip_measure();
    if (args.size() == 1) return coin_flip_measure(args[0]);
    if (args.size() == 2)
      return coin_flip_measure(args[0],
                               need_rat(args[1], "coinflip bias"));
    throw std::invalid_argument("coinflip([var[, bias]]) takes 0-2 arguments");
  }
  if (name == "lebesgue") {
    if (args.empty()) return cube_lebesgue_measure();
    if (args.size() != 1)
      throw std::invalid_argument("lebesgue([var]) takes 0-1 arguments");
    return cube_lebesgue_measure(args[0]);
  }
  if (name == "pairtype") {
    if (args.empty()) return generic_pair_type_measure();
    if (args.size() != 1)
      throw std::invalid_argument("pairtype([var]) takes 0-1 arguments");
    return generic_pair_type_measure(args[0]);
  }
  if (name == "convex") {
    if (args.size() != 3)
      throw std::invalid_argument("convex(r, spec, spec) takes three "
                                  "arguments");
    Rat r = need_rat(args[0], "convex weight");
    return convex_combine({r, 1 - r}, {parse_measure_spec(args[1], frag),
                                       parse_measure_spec(args[2], frag)});
  }
  throw std::invalid_argument("unknown measure constructor: " + name);
}

// ---------------------------------------------------------------------------
// Scenario files: `scenario <name>` plus `param <key> <value>` lines.

struct ScenarioSpec {
  std::string name;
  std::map<std::string, std::string> params;
};

inline ScenarioSpec parse_scenario_text(std::istream& in) {
  using namespace io_detail;
  ScenarioSpec spec;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto toks = words(line);
    if (toks.empty()) continue;
    std::string ctx = "scenario file line " + std::to_string(lineno);
    if (toks[0] == "scenario") {
      if (toks.size() != 2)
        throw std::invalid_argument(ctx + ": scenario needs one name");
      spec.name = toks[1];
    } else if (toks[0] == "param") {
      if (toks.size() < 3)
        throw std::invalid_argument(ctx + ": param needs key and value");
      std::string val = toks[2];
      for (std::size_t i = 3; i < toks.size(); ++i) val += " " + toks[i];
      spec.params[toks[1]] = val;
    } else {
      throw std::invalid_argument(ctx + ": unknown directive " + toks[0]);
    }
  }
  if (spec.name.empty())
    throw std::invalid_argument("scenario file: missing scenario directive");
  return spec;
}

inline ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file " + path);
  return parse_scenario_text(in);
}

}  // namespace kmlab
