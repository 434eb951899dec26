#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nrsw/errors.hpp"
#include "nrsw/lattice.hpp"

namespace nrsw {

// Above: the black occupied set {f >= -p}; Below: its white complement.
enum class Side { Above, Below };
enum class Direction { LeftRight, TopBottom };
enum class PivotalPattern { None, Alt4Interior, Alt3Boundary };

namespace detail {

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    for (std::size_t k = 0; k < n; ++k) parent_[k] = k;
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

  bool same(std::size_t a, std::size_t b) { return find(a) == find(b); }

private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// Dense enumeration of half-grid points over a region's bounding box.
struct BoxIndex {
  long long x0, x1, y0, y1, ny;

  explicit BoxIndex(const EpsRegion& region)
      : x0(region.bbox_x0()), x1(region.bbox_x1()), y0(region.bbox_y0()),
        y1(region.bbox_y1()), ny(y1 - y0 + 1) {}

  std::size_t size() const {
    return std::size_t(x1 - x0 + 1) * std::size_t(ny);
  }
  std::size_t at(HalfPoint v) const {
    return std::size_t(v.i - x0) * std::size_t(ny) + std::size_t(v.j - y0);
  }
};

inline void require_region_in_window(const FccLattice& lat,
                                     const EpsRegion& region,
                                     const char* what) {
  if (region.bbox_x0() < lat.x0 || region.bbox_x1() > lat.x1 ||
      region.bbox_y0() < lat.y0 || region.bbox_y1() > lat.y1)
    throw InvalidRegionError(std::string(what) +
                             ": region exceeds lattice window");
}

// Forward halves of the adjacency offsets. Pushing the integer set from
// integer vertices and the diagonal set from face centers visits every
// undirected lattice edge exactly once.
inline constexpr std::array<HalfPoint, 4> kForwardInteger = {
    HalfPoint{2, 0}, HalfPoint{1, 1}, HalfPoint{0, 2}, HalfPoint{1, -1}};
inline constexpr std::array<HalfPoint, 2> kForwardCenter = {
    HalfPoint{1, 1}, HalfPoint{1, -1}};

// Unions all monochromatic edges of the requested color whose endpoints both
// lie in the closed region.
inline void unite_colored_edges(const Coloring& col, const EpsRegion& region,
                                const BoxIndex& box, bool want_black,
                                UnionFind& uf) {
  for (long long i = box.x0; i <= box.x1; ++i)
    for (long long j = box.y0; j <= box.y1; ++j) {
      const HalfPoint v{i, j};
      if (!is_vertex(v) || !region.contains(v) ||
          !col.colored(v, want_black))
        continue;
      const auto link = [&](HalfPoint d) {
        const HalfPoint u{v.i + d.i, v.j + d.j};
        if (region.contains(u) && col.colored(u, want_black))
          uf.unite(box.at(v), box.at(u));
      };
      if (is_integer_vertex(v))
        for (auto d : kForwardInteger) link(d);
      else
        for (auto d : kForwardCenter) link(d);
    }
}

// True iff some monochromatic path of the requested color inside the closed
// region joins a source vertex to a destination vertex.
template <class SrcPred, class DstPred>
bool terminals_connected(const Coloring& col, const EpsRegion& region,
                         bool want_black, SrcPred&& is_src,
                         DstPred&& is_dst) {
  require_region_in_window(col.lattice(), region, "event");
  const BoxIndex box(region);
  UnionFind uf(box.size() + 2);
  const std::size_t src = box.size(), dst = box.size() + 1;
  unite_colored_edges(col, region, box, want_black, uf);
  for (long long i = box.x0; i <= box.x1; ++i)
    for (long long j = box.y0; j <= box.y1; ++j) {
      const HalfPoint v{i, j};
      if (!is_vertex(v) || !region.contains(v) ||
          !col.colored(v, want_black))
        continue;
      if (is_src(v)) uf.unite(box.at(v), src);
      if (is_dst(v)) uf.unite(box.at(v), dst);
    }
  return uf.same(src, dst);
}

}  // namespace detail

/**
 * Side-to-side crossing of a closed eps-drawn rectangle by a path of
 * same-colored vertices (black for Above, white for Below), using lattice
 * adjacency restricted to vertices in the rectangle. A vertex lies on a side
 * iff its coordinate attains the side's value exactly; all comparisons are
 * done in integer half-units, so there is no floating-point tie-breaking.
 */
inline bool crossing(const Coloring& col, const EpsRegion& rect,
                     Direction dir, Side side) {
  if (rect.kind() != EpsRegion::Kind::Rectangle)
    throw InvalidRegionError("crossing: rectangle region required");
  const bool want_black = side == Side::Above;
  if (dir == Direction::LeftRight)
    return detail::terminals_connected(
        col, rect, want_black,
        [&](HalfPoint v) { return v.i == rect.x0(); },
        [&](HalfPoint v) { return v.i == rect.x1(); });
  return detail::terminals_connected(
      col, rect, want_black,
      [&](HalfPoint v) { return v.j == rect.y1(); },
      [&](HalfPoint v) { return v.j == rect.y0(); });
}

/**
 * Exact self-duality of the triangulated lattice: a black left-right
 * crossing exists iff there is no white top-bottom crossing. Returns the
 * XOR of the two detections, which must be true for every coloring.
 */
inline bool duality_holds(const Coloring& col, const EpsRegion& rect) {
  return crossing(col, rect, Direction::LeftRight, Side::Above) !=
         crossing(col, rect, Direction::TopBottom, Side::Below);
}

// Monochromatic path across a closed annulus, inner to outer boundary.
inline bool arm(const Coloring& col, const EpsRegion& annulus, Side side) {
  if (annulus.kind() != EpsRegion::Kind::Annulus)
    throw InvalidRegionError("arm: annulus region required");
  if (annulus.inner() >= annulus.outer())
    throw InvalidRegionError("arm: annulus must have positive width");
  return detail::terminals_connected(
      col, annulus, side == Side::Above,
      [&](HalfPoint v) { return annulus.on_inner_boundary(v); },
      [&](HalfPoint v) { return annulus.on_outer_boundary(v); });
}

// Arm event in the origin-centered annulus [-s,s]^2 \ ]-r,r[^2.
inline bool arm(const Coloring& col, double r, double s, Side side) {
  const EpsRegion annulus =
      EpsRegion::annulus(col.lattice().eps, 0.0, 0.0, s, r);
  return arm(col, annulus, side);
}

/**
 * Monochromatic circuit separating the inner from the outer boundary of a
 * closed annulus. Detected through triangulation duality: a black circuit
 * exists iff no white vertex path inside the closed annulus joins the inner
 * boundary to the outer boundary, and symmetrically.
 */
inline bool circuit(const Coloring& col, const EpsRegion& annulus,
                    Side side) {
  if (annulus.kind() != EpsRegion::Kind::Annulus)
    throw InvalidRegionError("circuit: annulus region required");
  const Side blocking = side == Side::Above ? Side::Below : Side::Above;
  return !arm(col, annulus, blocking);
}

/**
 * Half-plane three-arm style connection of Tassion's construction: a black
 * path inside the square [-s/2,s/2]^2 from the full left side to the
 * right-side sub-segment {s/2} x [alpha, beta].
 */
inline bool tassion_H(const Coloring& col, double s, double alpha,
                      double beta) {
  if (!(s > 0)) throw InvalidRegionError("tassion: s must be > 0");
  const double eps = col.lattice().eps;
  const EpsRegion square =
      EpsRegion::rectangle(eps, -0.5 * s, 0.5 * s, -0.5 * s, 0.5 * s);
  const long long ah = detail::to_eps_units_half(alpha, eps, "tassion alpha");
  const long long bh = detail::to_eps_units_half(beta, eps, "tassion beta");
  if (!(0 <= ah && ah <= bh && bh <= square.x1()))
    throw InvalidRegionError("tassion: need 0 <= alpha <= beta <= s/2");
  return detail::terminals_connected(
      col, square, true, [&](HalfPoint v) { return v.i == square.x0(); },
      [&](HalfPoint v) {
        return v.i == square.x1() && v.j >= ah && v.j <= bh;
      });
}

/**
 * Four-petal connection event: one black cluster of the closed square
 * [-s/2,s/2]^2 touches all four boundary sub-segments
 * {-s/2} x [-s/2,-alpha], {-s/2} x [alpha,s/2], {s/2} x [-s/2,-alpha],
 * {s/2} x [alpha,s/2]. This realizes the two side paths and the connector
 * within a single cluster.
 */
inline bool tassion_X(const Coloring& col, double s, double alpha) {
  if (!(s > 0)) throw InvalidRegionError("tassion: s must be > 0");
  const double eps = col.lattice().eps;
  const EpsRegion square =
      EpsRegion::rectangle(eps, -0.5 * s, 0.5 * s, -0.5 * s, 0.5 * s);
  const long long ah = detail::to_eps_units_half(alpha, eps, "tassion alpha");
  if (!(0 <= ah && ah <= square.x1()))
    throw InvalidRegionError("tassion: need 0 <= alpha <= s/2");
  detail::require_region_in_window(col.lattice(), square, "tassion");
  const detail::BoxIndex box(square);
  detail::UnionFind uf(box.size());
  detail::unite_colored_edges(col, square, box, true, uf);
  std::vector<std::uint8_t> touches(box.size(), 0);
  bool found = false;
  for (long long i : {square.x0(), square.x1()}) {
    const std::uint8_t side_bit = i == square.x0() ? 1 : 4;
    for (long long j = square.y0(); j <= square.y1(); ++j) {
      const HalfPoint v{i, j};
      if (!is_vertex(v) || !col.black(v)) continue;
      std::uint8_t bits = 0;
      if (j <= -ah) bits |= side_bit;
      if (j >= ah) bits |= side_bit << 1;
      if (!bits) continue;
      const std::size_t root = uf.find(box.at(v));
      touches[root] |= bits;
      if (touches[root] == 0xF) {
        found = true;
        break;
      }
    }
    if (found) break;
  }
  return found;
}

// --- Discrete nodal curves -------------------------------------------------

// Planar point in integer quarter-units of eps: position = eps/4 * (i, j).
// Midpoints of lattice edges land exactly on this grid.
struct QuarterPoint {
  long long i = 0;
  long long j = 0;
  bool operator==(const QuarterPoint&) const = default;
};

// Level-set segment crossing one triangular face, joining the midpoints of
// its two bi-colored edges.
struct NodalSegment {
  TriFace face;
  QuarterPoint a;
  QuarterPoint b;
};

struct NodalComponent {
  std::vector<std::size_t> segments;  // indices into NodalCurveSet::segments
  std::vector<QuarterPoint> points;   // ordered polyline, no closing repeat
  bool closed = false;                // false <=> the curve exits the window
};

struct NodalCurveSet {
  double eps = 1.0;
  FccLattice window;
  std::vector<NodalSegment> segments;
  std::vector<NodalComponent> components;
};

namespace detail {

inline std::uint64_t quarter_key(QuarterPoint q) {
  return (std::uint64_t(std::uint32_t(std::int32_t(q.i))) << 32) |
         std::uint64_t(std::uint32_t(std::int32_t(q.j)));
}

inline QuarterPoint quarter_unkey(std::uint64_t key) {
  return QuarterPoint{std::int32_t(std::uint32_t(key >> 32)),
                      std::int32_t(std::uint32_t(key))};
}

// Groups segments into polylines by shared edge midpoints. Interior
// bi-colored edges are shared by exactly two faces, so interior midpoints
// have degree two; degree-one midpoints occur only on the window boundary.
inline void assemble_components(NodalCurveSet& set) {
  std::unordered_map<std::uint64_t, std::array<std::uint32_t, 2>> incident;
  std::unordered_map<std::uint64_t, std::uint8_t> degree;
  incident.reserve(set.segments.size() * 2);
  degree.reserve(set.segments.size() * 2);
  for (std::size_t id = 0; id < set.segments.size(); ++id)
    for (const QuarterPoint q : {set.segments[id].a, set.segments[id].b}) {
      const std::uint64_t key = quarter_key(q);
      auto& deg = degree[key];
      if (deg >= 2)
        throw SpecMismatchError("nodal trace: midpoint degree exceeds two");
      incident[key][deg++] = std::uint32_t(id);
    }

  std::vector<std::uint8_t> visited(set.segments.size(), 0);
  const auto other_end = [](const NodalSegment& s, QuarterPoint p) {
    return s.a == p ? s.b : s.a;
  };
  const auto walk = [&](QuarterPoint start, std::size_t first) {
    NodalComponent comp;
    comp.points.push_back(start);
    QuarterPoint pt = start;
    std::size_t seg = first;
    for (;;) {
      visited[seg] = 1;
      comp.segments.push_back(seg);
      const QuarterPoint nxt = other_end(set.segments[seg], pt);
      if (nxt == start) {
        comp.closed = true;
        break;
      }
      comp.points.push_back(nxt);
      const std::uint64_t key = quarter_key(nxt);
      const std::uint8_t deg = degree[key];
      const auto& ids = incident[key];
      std::size_t next_seg = std::size_t(-1);
      for (std::uint8_t k = 0; k < deg; ++k)
        if (!visited[ids[k]]) next_seg = ids[k];
      if (next_seg == std::size_t(-1)) break;  // open end on the boundary
      pt = nxt;
      seg = next_seg;
    }
    set.components.push_back(std::move(comp));
  };

  // Open chains first, each started from a true endpoint so the walk covers
  // the whole curve; whatever remains unvisited closes on itself.
  for (const auto& [key, deg] : degree)
    if (deg == 1 && !visited[incident[key][0]])
      walk(quarter_unkey(key), incident[key][0]);
  for (std::size_t id = 0; id < set.segments.size(); ++id)
    if (!visited[id]) walk(set.segments[id].a, id);
}

}  // namespace detail

/**
 * Traces the discrete level curves of a coloring. Every triangular face has
 * zero or two bi-colored edges; each face with two contributes the segment
 * joining their midpoints. Segments are assembled into components flagged
 * closed or window-exiting.
 */
inline NodalCurveSet trace_nodal(const Coloring& col) {
  const FccLattice& lat = col.lattice();
  NodalCurveSet set;
  set.eps = lat.eps;
  set.window = lat;
  const auto mid = [](HalfPoint u, HalfPoint v) {
    return QuarterPoint{u.i + v.i, u.j + v.j};
  };
  for_each_face(lat, [&](const TriFace& f) {
    const bool bc = col.black(f.center);
    const bool ba = col.black(f.a);
    const bool bb = col.black(f.b);
    std::array<QuarterPoint, 3> m;
    int k = 0;
    if (bc != ba) m[std::size_t(k++)] = mid(f.center, f.a);
    if (bc != bb) m[std::size_t(k++)] = mid(f.center, f.b);
    if (ba != bb) m[std::size_t(k++)] = mid(f.a, f.b);
    if (k == 2) set.segments.push_back(NodalSegment{f, m[0], m[1]});
  });
  detail::assemble_components(set);
  return set;
}

inline NodalCurveSet trace_nodal(const FieldSample& field, double eps,
                                 double p) {
  return trace_nodal(color_field(field, eps, p));
}

/**
 * Number of components that are closed loops and lie entirely inside the
 * closed rectangle. The rectangle must keep a 2*eps margin from the window
 * so that containment of a component is decided away from boundary effects;
 * window-exiting components never count.
 */
inline std::size_t count_components(const NodalCurveSet& curves,
                                    const EpsRegion& rect) {
  if (rect.kind() != EpsRegion::Kind::Rectangle)
    throw InvalidRegionError("count_components: rectangle region required");
  if (std::abs(rect.eps() - curves.eps) > 1e-12 * curves.eps)
    throw SpecMismatchError(
        "count_components: region mesh differs from curve mesh");
  const FccLattice& w = curves.window;
  if (rect.x0() < w.x0 + 4 || rect.x1() > w.x1 - 4 || rect.y0() < w.y0 + 4 ||
      rect.y1() > w.y1 - 4)
    throw InvalidRegionError(
        "count_components: rectangle must keep a 2*eps margin inside the "
        "window");
  const long long qx0 = 2 * rect.x0(), qx1 = 2 * rect.x1();
  const long long qy0 = 2 * rect.y0(), qy1 = 2 * rect.y1();
  std::size_t n = 0;
  for (const NodalComponent& comp : curves.components) {
    if (!comp.closed) continue;
    bool inside = true;
    for (const QuarterPoint q : comp.points)
      if (q.i < qx0 || q.i > qx1 || q.j < qy0 || q.j > qy1) {
        inside = false;
        break;
      }
    n += inside ? 1 : 0;
  }
  return n;
}

// JSON export: {"eps":e,"components":[{"closed":b,"points":[[x,y],...]},...]}
inline std::string nodal_to_json(const NodalCurveSet& curves) {
  std::string out;
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
  };
  out += "{\"eps\":";
  num(curves.eps);
  out += ",\"components\":[";
  for (std::size_t c = 0; c < curves.components.size(); ++c) {
    const NodalComponent& comp = curves.components[c];
    if (c) out += ',';
    out += "{\"closed\":";
    out += comp.closed ? "true" : "false";
    out += ",\"points\":[";
    for (std::size_t k = 0; k < comp.points.size(); ++k) {
      if (k) out += ',';
      out += '[';
      num(0.25 * curves.eps * double(comp.points[k].i));
      out += ',';
      num(0.25 * curves.eps * double(comp.points[k].j));
      out += ']';
    }
    out += "]}";
  }
  out += "]}";
  return out;
}

// --- Pivotal patterns ------------------------------------------------------

namespace detail {

// Neighbor offsets in the closed half-plane on the region side of each
// boundary line, in anticlockwise angular order along the arc.
inline constexpr std::array<HalfPoint, 5> kArcLeft = {
    HalfPoint{0, -2}, HalfPoint{1, -1}, HalfPoint{2, 0}, HalfPoint{1, 1},
    HalfPoint{0, 2}};
inline constexpr std::array<HalfPoint, 5> kArcRight = {
    HalfPoint{0, 2}, HalfPoint{-1, 1}, HalfPoint{-2, 0}, HalfPoint{-1, -1},
    HalfPoint{0, -2}};
inline constexpr std::array<HalfPoint, 5> kArcBottom = {
    HalfPoint{2, 0}, HalfPoint{1, 1}, HalfPoint{0, 2}, HalfPoint{-1, 1},
    HalfPoint{-2, 0}};
inline constexpr std::array<HalfPoint, 5> kArcTop = {
    HalfPoint{-2, 0}, HalfPoint{-1, -1}, HalfPoint{0, -2}, HalfPoint{1, -1},
    HalfPoint{2, 0}};

template <class Offsets>
int color_transitions(const Coloring& col, HalfPoint v,
                      const Offsets& offsets, bool cyclic) {
  const std::size_t n = offsets.size();
  std::array<bool, 8> color{};
  for (std::size_t k = 0; k < n; ++k)
    color[k] = col.black(HalfPoint{v.i + offsets[k].i, v.j + offsets[k].j});
  int transitions = 0;
  const std::size_t last = cyclic ? n : n - 1;
  for (std::size_t k = 0; k < last; ++k)
    transitions += color[k] != color[(k + 1) % n] ? 1 : 0;
  return transitions;
}

}  // namespace detail

/**
 * Local alternation pattern at a vertex of an eps-drawn rectangle.
 * Interior vertices report Alt4Interior iff the cyclic sequence of neighbor
 * colors, taken in anticlockwise order, changes at least four times (which
 * is exactly when four neighbors of alternating color can be selected in
 * cyclic order). Boundary non-corner vertices report Alt3Boundary iff the
 * colors along the closed half-plane arc on the region side change at least
 * twice. Corner vertices are refused.
 */
inline PivotalPattern pivotal_pattern(const Coloring& col, HalfPoint v,
                                      const EpsRegion& region) {
  if (region.kind() != EpsRegion::Kind::Rectangle)
    throw InvalidRegionError("pivotal_pattern: rectangle region required");
  detail::require_region_in_window(col.lattice(), region, "pivotal_pattern");
  if (!is_vertex(v) || !region.contains(v))
    throw InvalidVertexError("pivotal_pattern: vertex not in region");

  const bool on_left = v.i == region.x0(), on_right = v.i == region.x1();
  const bool on_bottom = v.j == region.y0(), on_top = v.j == region.y1();
  const int sides = int(on_left) + int(on_right) + int(on_bottom) +
                    int(on_top);
  if (sides >= 2)
    throw UnsupportedVertexError("pivotal_pattern: region corner");

  if (sides == 0) {
    const int transitions =
        is_integer_vertex(v)
            ? detail::color_transitions(col, v, kIntegerOffsets, true)
            : detail::color_transitions(col, v, kCenterOffsets, true);
    return transitions >= 4 ? PivotalPattern::Alt4Interior
                            : PivotalPattern::None;
  }

  // Boundary lines sit on even coordinates, so v is an integer vertex and
  // the five half-plane neighbors all lie inside the closed region.
  const auto& arc = on_left    ? detail::kArcLeft
                    : on_right ? detail::kArcRight
                    : on_bottom ? detail::kArcBottom
                                : detail::kArcTop;
  const int transitions = detail::color_transitions(col, v, arc, false);
  return transitions >= 2 ? PivotalPattern::Alt3Boundary
                          : PivotalPattern::None;
}

// --- Event specifications --------------------------------------------------

enum class EventKind { LeftRight, TopBottom, Circuit, Arm, TassionH,
                       TassionX };

/**
 * Declarative event description: a region, the event kind, the color side,
 * and the Tassion sub-segment parameters where applicable. Crossings need a
 * rectangle; Circuit and Arm need an annulus; TassionH and TassionX need an
 * origin-centered square.
 */
struct EventSpec {
  EpsRegion region;
  EventKind kind = EventKind::LeftRight;
  Side side = Side::Above;
  double alpha = 0.0;
  double beta = 0.0;
};

inline bool evaluate_event(const Coloring& col, const EventSpec& spec) {
  switch (spec.kind) {
    case EventKind::LeftRight:
      return crossing(col, spec.region, Direction::LeftRight, spec.side);
    case EventKind::TopBottom:
      return crossing(col, spec.region, Direction::TopBottom, spec.side);
    case EventKind::Circuit:
      return circuit(col, spec.region, spec.side);
    case EventKind::Arm:
      return arm(col, spec.region, spec.side);
    case EventKind::TassionH:
    case EventKind::TassionX: {
      if (spec.region.kind() != EpsRegion::Kind::Rectangle ||
          spec.region.x0() != -spec.region.x1() ||
          spec.region.y0() != -spec.region.y1() ||
          spec.region.x1() != spec.region.y1())
        throw InvalidRegionError(
            "event: origin-centered square region required");
      const double s = double(spec.region.x1()) * spec.region.eps();
      return spec.kind == EventKind::TassionH
                 ? tassion_H(col, s, spec.alpha, spec.beta)
                 : tassion_X(col, s, spec.alpha);
    }
  }
  throw InvalidRegionError("event: unknown kind");
}

}  // namespace nrsw
