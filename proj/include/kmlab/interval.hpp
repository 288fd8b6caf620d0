#pragma once

// Finite unions of half-open rational intervals [a, b) inside [0, 1), with the
// Boolean set operations and exact Lebesgue measure.  This is the interval
// algebra H; elements other than {} and [0,1) form H_0, the carrier of the
// Q-sort pairs in the T^inf_{1/2} standard model.

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kmlab/rational.hpp"

namespace kmlab {

class IntervalUnion {
 public:
  using Piece = std::pair<Rat, Rat>;  // [first, second)

  IntervalUnion() = default;

  // Builds from arbitrary (possibly overlapping, unsorted) pieces.
  static IntervalUnion from_pieces(std::vector<Piece> pieces) {
    for (const auto& [a, b] : pieces) {
      if (a < 0 || b > 1 || a >= b)
        throw std::invalid_argument("IntervalUnion: piece outside [0,1) or empty");
    }
    std::sort(pieces.begin(), pieces.end());
    IntervalUnion out;
    for (auto& p : pieces) {
      if (!out.pieces_.empty() && p.first <= out.pieces_.back().second) {
        if (p.second > out.pieces_.back().second)
          out.pieces_.back().second = p.second;
      } else {
        out.pieces_.push_back(std::move(p));
      }
    }
    return out;
  }

  static IntervalUnion empty() { return IntervalUnion(); }
  static IntervalUnion full() { return from_pieces({{rat(0), rat(1)}}); }

  const std::vector<Piece>& pieces() const { return pieces_; }
  bool is_empty() const { return pieces_.empty(); }
  bool is_full() const {
    return pieces_.size() == 1 && pieces_[0].first == 0 && pieces_[0].second == 1;
  }

  Rat measure() const {
    Rat m = 0;
    for (const auto& [a, b] : pieces_) m += b - a;
    return m;
  }

  bool contains(const Rat& x) const {
    for (const auto& [a, b] : pieces_) {
      if (x < a) return false;
      if (x < b) return true;
    }
    return false;
  }

  IntervalUnion unite(const IntervalUnion& o) const {
    std::vector<Piece> all = pieces_;
    all.insert(all.end(), o.pieces_.begin(), o.pieces_.end());
    return from_pieces(std::move(all));
  }

  IntervalUnion intersect(const IntervalUnion& o) const {
    std::vector<Piece> out;
    for (const auto& [a, b] : pieces_)
      for (const auto& [c, d] : o.pieces_) {
        Rat lo = std::max(a, c), hi = std::min(b, d);
        if (lo < hi) out.push_back({lo, hi});
      }
    return from_pieces(std::move(out));
  }

  // Complement within [0, 1).
  IntervalUnion complement() const {
    std::vector<Piece> out;
    Rat cursor = 0;
    for (const auto& [a, b] : pieces_) {
      if (cursor < a) out.push_back({cursor, a});
      cursor = b;
    }
    if (cursor < 1) out.push_back({cursor, rat(1)});
    return from_pieces(std::move(out));
  }

  IntervalUnion minus(const IntervalUnion& o) const {
    return intersect(o.complement());
  }

  bool operator==(const IntervalUnion& o) const { return pieces_ == o.pieces_; }
  bool operator!=(const IntervalUnion& o) const { return pieces_ != o.pieces_; }
  bool subset_of(const IntervalUnion& o) const { return minus(o).is_empty(); }

  // "{[a,b),[c,d)}"
  std::string str() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      if (i) os << ',';
      os << '[' << rat_str(pieces_[i].first) << ',' << rat_str(pieces_[i].second)
         << ')';
    }
    os << '}';
    return os.str();
  }

  static std::optional<IntervalUnion> parse(const std::string& text);

 private:
  std::vector<Piece> pieces_;  // sorted, disjoint, non-adjacent
};

inline std::optional<IntervalUnion> IntervalUnion::parse(const std::string& text) {
  std::size_t i = 0;
  auto skip_ws = [&] { while (i < text.size() && std::isspace((unsigned char)text[i])) ++i; };
  skip_ws();
  if (i >= text.size() || text[i] != '{') return std::nullopt;
  ++i;
  std::vector<Piece> pieces;
  skip_ws();
  if (i < text.size() && text[i] == '}') { ++i; return IntervalUnion(); }
  while (true) {
    skip_ws();
    if (i >= text.size() || text[i] != '[') return std::nullopt;
    ++i;
    std::size_t comma = text.find(',', i);
    if (comma == std::string::npos) return std::nullopt;
    auto lo = parse_rat(std::string(text, i, comma - i));
    std::size_t close = text.find(')', comma);
    if (!lo || close == std::string::npos) return std::nullopt;
    auto hi = parse_rat(std::string(text, comma + 1, close - comma - 1));
    if (!hi) return std::nullopt;
    if (*lo < 0 || *hi > 1 || *lo >= *hi) return std::nullopt;
    pieces.push_back({*lo, *hi});
    i = close + 1;
    skip_ws();
    if (i < text.size() && text[i] == ',') { ++i; continue; }
    if (i < text.size() && text[i] == '}') { ++i; break; }
    return std::nullopt;
  }
  skip_ws();
  if (i != text.size()) return std::nullopt;
  return IntervalUnion::from_pieces(std::move(pieces));
}

// Strict-sandwich realization: a set Y with include ⊂ Y ⊂ X (both strict) and
// measure(Y) = r, avoiding every point of `exclude`.  Canonical rule: a small
// interval rightward of each included point, remaining mass filled from the
// left of X.  The public three-argument form is the documented operation; the
// exclusion set is needed internally when realizing diagram cases.
inline IntervalUnion carve_interval_subset(const IntervalUnion& X,
                                           const std::vector<Rat>& include,
                                           const Rat& r,
                                           const std::vector<Rat>& exclude = {}) {
  if (!(r > 0) || !(r < X.measure()))
    throw std::invalid_argument("carve: r must lie strictly in (0, measure(X))");
  std::vector<Rat> pts = include;
  std::sort(pts.begin(), pts.end());
  if (std::adjacent_find(pts.begin(), pts.end()) != pts.end())
    throw std::invalid_argument("carve: include points must be distinct");
  for (const Rat& a : pts)
    if (!X.contains(a)) throw std::invalid_argument("carve: include point outside X");
  for (const Rat& b : exclude) {
    if (std::binary_search(pts.begin(), pts.end(), b))
      throw std::invalid_argument("carve: include/exclude overlap");
  }

  // Small interval right of each include point, staying inside its component,
  // stopping short of the next include/exclude point, total at most r/2.
  std::vector<Rat> cuts = pts;
  cuts.insert(cuts.end(), exclude.begin(), exclude.end());
  std::sort(cuts.begin(), cuts.end());
  Rat base = pts.empty() ? Rat(0) : Rat(r / (2 * (long)pts.size()));
  std::vector<IntervalUnion::Piece> seeds;
  for (const Rat& a : pts) {
    Rat end(1);
    for (const auto& [lo, hi] : X.pieces())
      if (a >= lo && a < hi) end = hi;
    for (const Rat& c : cuts)
      if (c > a && c < end) { end = c; break; }
    Rat delta = std::min(Rat(end - a), base);
    // Halve to keep strictly clear of the stopping point (half-open helps on
    // the right, but the next cut must stay outside).
    seeds.push_back({a, a + delta / 2});
  }
  IntervalUnion Y = IntervalUnion::from_pieces(seeds);
  Rat need = r - Y.measure();  // >= r/2 > 0 by the budget above

  // Region still available for filling: X minus the seeds, minus a guard
  // interval right of each excluded point.  Guards are sized so that enough
  // fillable mass remains (total guard mass <= (measure(X) - r)/2).
  IntervalUnion avail = X.minus(Y);
  if (!exclude.empty()) {
    Rat guard = (X.measure() - r) / (2 * (long)exclude.size());
    std::vector<IntervalUnion::Piece> guards;
    for (const Rat& b : exclude) {
      Rat hi = std::min(Rat(b + guard), rat(1));
      if (b < hi) guards.push_back({b, hi});
    }
    if (!guards.empty()) avail = avail.minus(IntervalUnion::from_pieces(guards));
  }

  // Greedy left-to-right fill.
  std::vector<IntervalUnion::Piece> fill;
  for (const auto& [lo, hi] : avail.pieces()) {
    if (need == 0) break;
    Rat take = std::min(Rat(hi - lo), need);
    fill.push_back({lo, lo + take});
    need -= take;
  }
  if (need != 0) throw std::logic_error("carve: internal fill shortfall");
  return Y.unite(IntervalUnion::from_pieces(fill));
}

}  // namespace kmlab
