#pragma once

// Fragments: the finite stand-in for "a small model over a parameter set A".
// A fragment names finitely many parameters with sorts, carries a complete
// quantifier-free diagram (for the relational theories) or concrete standard
// values (for the half-full theories), and owns a freshness registry that
// doles out new Q-sort coordinate indices and point coordinate values while
// preserving global injectivity of (point, coordinate) -> value.

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "kmlab/formula.hpp"
#include "kmlab/interval.hpp"

namespace kmlab {

enum class TheoryId { TR, Henson, RandomGraph, THalf, THalfInf, THalfInfPQ };

inline std::string theory_name(TheoryId t) {
  switch (t) {
    case TheoryId::TR: return "tr";
    case TheoryId::Henson: return "henson";
    case TheoryId::RandomGraph: return "random-graph";
    case TheoryId::THalf: return "thalf";
    case TheoryId::THalfInf: return "thalf-inf";
    case TheoryId::THalfInfPQ: return "thalf-inf-pq";
  }
  return "?";
}

inline std::optional<TheoryId> theory_from_name(const std::string& n) {
  if (n == "tr") return TheoryId::TR;
  if (n == "henson") return TheoryId::Henson;
  if (n == "random-graph" || n == "randomgraph") return TheoryId::RandomGraph;
  if (n == "thalf") return TheoryId::THalf;
  if (n == "thalf-inf" || n == "thalfinf") return TheoryId::THalfInf;
  if (n == "thalf-inf-pq" || n == "thalfinfpq") return TheoryId::THalfInfPQ;
  return std::nullopt;
}

inline bool is_relational(TheoryId t) {
  return t == TheoryId::TR || t == TheoryId::Henson || t == TheoryId::RandomGraph;
}

// --------------------------------------------------------------------------
// Standard-model values

// An element of the P sort of T^inf_{1/2}: a lazily materialized map from
// coordinate index to value in [0,1).  Identity is by id; the coordinate map
// is shared so on-demand materialization persists across copies.
struct PPoint {
  long id = -1;
  std::shared_ptr<std::map<long, Rat>> coords =
      std::make_shared<std::map<long, Rat>>();
  bool operator==(const PPoint& o) const { return id == o.id; }
};

// An element of the Q sort of T^inf_{1/2}.
struct QElemV {
  enum Tag { BotV, TopV, PairV } tag = BotV;
  long index = -1;       // PairV only
  IntervalUnion set;     // PairV only; proper nonempty subset of [0,1)

  static QElemV botv() { return {}; }
  static QElemV topv() { QElemV q; q.tag = TopV; return q; }
  static QElemV pair(long n, IntervalUnion X) {
    if (X.is_empty() || X.is_full())
      throw std::invalid_argument("QElemV: set must be proper and nonempty");
    QElemV q;
    q.tag = PairV;
    q.index = n;
    q.set = std::move(X);
    return q;
  }
  Rat ell() const {
    if (tag == BotV) return 0;
    if (tag == TopV) return 1;
    return set.measure();
  }
  bool operator==(const QElemV& o) const {
    if (tag != o.tag) return false;
    if (tag != PairV) return true;
    return index == o.index && set == o.set;
  }
  std::string str() const {
    if (tag == BotV) return "bot";
    if (tag == TopV) return "top";
    return "(" + std::to_string(index) + "," + set.str() + ")";
  }
};

// An element of the Q sort of T_{1/2}: a union of exactly n distinct
// intervals of I_{2n}.  The subset of [0,1) is the element; n documents the
// defining level and is validated at construction.
struct THalfQ {
  long n = 0;
  IntervalUnion set;

  static THalfQ make(long n, const IntervalUnion& set) {
    if (n < 1) throw std::invalid_argument("THalfQ: n must be >= 1");
    // Must be a union of exactly n distinct members of I_{2n}.
    long count = 0;
    IntervalUnion rebuilt;
    for (long i = 0; i < 2 * n; ++i) {
      IntervalUnion cell =
          IntervalUnion::from_pieces({{rat(i, 2 * n), rat(i + 1, 2 * n)}});
      if (cell.subset_of(set)) {
        ++count;
        rebuilt = rebuilt.unite(cell);
      }
    }
    if (count != n || !(rebuilt == set))
      throw std::invalid_argument(
          "THalfQ: set is not a union of exactly n intervals of I_{2n}");
    return THalfQ{n, set};
  }
  bool operator==(const THalfQ& o) const { return set == o.set; }
};

// A vertex of a relational standard model is abstract: it is identified with
// a (possibly freshly added) fragment parameter name.
struct VertexRef {
  std::string name;
  bool operator==(const VertexRef& o) const { return name == o.name; }
};

using StdValue = std::variant<std::monostate, Rat, VertexRef, PPoint, QElemV, THalfQ>;

// --------------------------------------------------------------------------
// Freshness registry (global coordinate injectivity + deterministic
// randomness)

class FreshRegistry {
 public:
  explicit FreshRegistry(unsigned long seed = 20240101) : rng_(seed) {}

  long fresh_q_index() { return next_q_index_++; }
  void reserve_q_index(long n) {
    if (n >= next_q_index_) next_q_index_ = n + 1;
  }
  long fresh_point_id() { return next_point_id_++; }

  // A value in X never handed out before (keeps (point, coord) -> value
  // injective).  Deterministic given the seed and call sequence.
  Rat fresh_value_in(const IntervalUnion& X) {
    if (X.is_empty()) throw std::invalid_argument("fresh_value_in: empty set");
    for (int attempt = 0; attempt < 4096; ++attempt) {
      const auto& pieces = X.pieces();
      const auto& [lo, hi] = pieces[rng_() % pieces.size()];
      unsigned long den = 1ul << 16;
      unsigned long num = 1 + rng_() % (den - 1);
      Rat v = lo + (hi - lo) * rat((long)num, (long)den);
      if (used_values_.insert(v).second) return v;
    }
    throw std::logic_error("fresh_value_in: exhausted attempts");
  }
  void reserve_value(const Rat& v) { used_values_.insert(v); }

  std::mt19937_64& rng() { return rng_; }

 private:
  long next_q_index_ = 0;
  long next_point_id_ = 0;
  std::set<Rat> used_values_;
  std::mt19937_64 rng_;
};

// --------------------------------------------------------------------------
// Fragment

struct Fragment {
  TheoryId theory = TheoryId::TR;
  int henson_s = 3;  // clique bound for Henson(s)
  std::map<std::string, Sort> params;
  std::map<std::string, StdValue> values;
  std::vector<FormulaPtr> diagram;  // ground literals; relational theories
  std::shared_ptr<FreshRegistry> registry = std::make_shared<FreshRegistry>();

  // The lookup index is a cache; copies drop it and rebuild lazily.
  Fragment() = default;
  Fragment(const Fragment& o)
      : theory(o.theory),
        henson_s(o.henson_s),
        params(o.params),
        values(o.values),
        diagram(o.diagram),
        registry(o.registry) {}
  Fragment& operator=(const Fragment& o) {
    theory = o.theory;
    henson_s = o.henson_s;
    params = o.params;
    values = o.values;
    diagram = o.diagram;
    registry = o.registry;
    index_.clear();
    indexed_ = false;
    return *this;
  }
  Fragment(Fragment&&) = default;
  Fragment& operator=(Fragment&&) = default;

  void add_param(const std::string& name, Sort sort) {
    if (params.count(name))
      throw std::invalid_argument("fragment: duplicate parameter " + name);
    params[name] = sort;
  }

  void set_value(const std::string& name, StdValue v) {
    if (!params.count(name))
      throw std::invalid_argument("fragment: unknown parameter " + name);
    values[name] = std::move(v);
    if (auto* q = std::get_if<QElemV>(&values[name]);
        q && q->tag == QElemV::PairV)
      registry->reserve_q_index(q->index);
  }

  bool has_value(const std::string& name) const { return values.count(name) > 0; }

  const StdValue& value(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end())
      throw std::invalid_argument("fragment: no standard value for " + name);
    return it->second;
  }

  // Adds a ground literal (atom or negated atom) to the diagram.
  void add_literal(const FormulaPtr& lit) {
    diagram.push_back(lit);
    if (indexed_) index_literal(lit);
  }

  // Truth of a ground atom per the stored diagram.  Relation atoms for the
  // symmetric edge relation E are looked up under both argument orders.
  std::optional<bool> diagram_lookup(const FormulaPtr& atom) const {
    if (!indexed_) {
      for (const auto& lit : diagram) index_literal(lit);
      indexed_ = true;
    }
    auto it = index_.find(formula_str(atom));
    if (it != index_.end()) return it->second;
    if (atom->kind == FormKind::Atom && atom->atom == AtomKind::Rel &&
        atom->rel == "E" && atom->args.size() == 2) {
      auto swapped = atom_rel("E", {atom->args[1], atom->args[0]});
      auto it2 = index_.find(formula_str(swapped));
      if (it2 != index_.end()) return it2->second;
    }
    return std::nullopt;
  }

  std::string fresh_param_name(const std::string& prefix) const {
    for (long i = 0;; ++i) {
      std::string n = prefix + std::to_string(i);
      if (!params.count(n)) return n;
    }
  }

  std::vector<std::string> param_names(Sort s) const {
    std::vector<std::string> out;
    for (const auto& [n, so] : params)
      if (so == s) out.push_back(n);
    return out;
  }

 private:
  mutable std::unordered_map<std::string, bool> index_;
  mutable bool indexed_ = false;
  void index_literal(const FormulaPtr& lit) const {
    bool positive = lit->kind != FormKind::Not;
    const FormulaPtr& atom = positive ? lit : lit->kids[0];
    if (atom->kind != FormKind::Atom)
      throw std::invalid_argument("fragment diagram: not a literal");
    index_[formula_str(atom)] = positive;
  }
};

}  // namespace kmlab
