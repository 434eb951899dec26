#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nrsw/errors.hpp"
#include "nrsw/sampler.hpp"

namespace nrsw {

// Global lattice coordinates in integer units of eps/2. The face-centered
// lattice at mesh eps is the sub-grid {(i,j) : i+j even}: both-even points
// are the integer vertices eps*(i/2, j/2), both-odd points are the face
// centers eps*(i/2, j/2) = eps*(k+1/2, l+1/2).
struct HalfPoint {
  long long i = 0;
  long long j = 0;
  bool operator==(const HalfPoint&) const = default;
  bool operator<(const HalfPoint& o) const {
    return i != o.i ? i < o.i : j < o.j;
  }
};

inline bool is_vertex(HalfPoint v) { return ((v.i + v.j) & 1) == 0; }
inline bool is_integer_vertex(HalfPoint v) {
  return (v.i & 1) == 0 && (v.j & 1) == 0;
}
inline bool is_face_center(HalfPoint v) {
  return (v.i & 1) != 0 && (v.j & 1) != 0;
}

namespace detail {

inline long long to_half_units(double value, double eps, const char* what) {
  const double q = 2.0 * value / eps;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q)))
    throw InvalidRegionError(std::string(what) +
                             ": coordinate is not aligned to eps/2");
  return static_cast<long long>(r);
}

inline long long to_eps_units_half(double value, double eps,
                                   const char* what) {
  const long long h = to_half_units(value, eps, what);
  if (h & 1)
    throw InvalidRegionError(std::string(what) +
                             ": parameter is not an integer multiple of eps");
  return h;
}

}  // namespace detail

/**
 * Face-centered square lattice T^eps restricted to a rectangular window.
 * Integer vertices have four axis neighbors at distance eps and four face
 * centers at distance eps/sqrt(2); face centers have only their four
 * corners. Every bounded face is a triangle, which is what makes black/
 * white crossing duality exact downstream.
 */
struct FccLattice {
  double eps = 1.0;
  // window [x0,x1] x [y0,y1], inclusive, in half-units
  long long x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool in_window(HalfPoint v) const {
    return v.i >= x0 && v.i <= x1 && v.j >= y0 && v.j <= y1;
  }
  long long nx() const { return x1 - x0 + 1; }
  long long ny() const { return y1 - y0 + 1; }

  double coord_x(HalfPoint v) const { return 0.5 * eps * double(v.i); }
  double coord_y(HalfPoint v) const { return 0.5 * eps * double(v.j); }
};

inline FccLattice make_lattice(double eps, double wx0, double wy0,
                               double wx1, double wy1) {
  if (!(eps > 0)) throw InvalidRegionError("lattice: eps must be > 0");
  FccLattice lat;
  lat.eps = eps;
  lat.x0 = detail::to_half_units(wx0, eps, "lattice window");
  lat.y0 = detail::to_half_units(wy0, eps, "lattice window");
  lat.x1 = detail::to_half_units(wx1, eps, "lattice window");
  lat.y1 = detail::to_half_units(wy1, eps, "lattice window");
  if (lat.x0 > lat.x1 || lat.y0 > lat.y1)
    throw InvalidRegionError("lattice: empty window");
  return lat;
}

inline FccLattice lattice_of(const FieldSample& field, double eps) {
  if (std::abs(field.grid.spacing - 0.5 * eps) > 1e-12 * eps)
    throw SpecMismatchError("lattice_of: grid spacing must equal eps/2");
  FccLattice lat;
  lat.eps = eps;
  lat.x0 = field.grid.origin_ix();
  lat.y0 = field.grid.origin_iy();
  lat.x1 = lat.x0 + field.grid.nx - 1;
  lat.y1 = lat.y0 + field.grid.ny - 1;
  return lat;
}

// Neighbor offsets in anticlockwise angular order starting from +x.
inline constexpr std::array<HalfPoint, 8> kIntegerOffsets = {
    HalfPoint{2, 0}, HalfPoint{1, 1},  HalfPoint{0, 2},  HalfPoint{-1, 1},
    HalfPoint{-2, 0}, HalfPoint{-1, -1}, HalfPoint{0, -2}, HalfPoint{1, -1}};
inline constexpr std::array<HalfPoint, 4> kCenterOffsets = {
    HalfPoint{1, 1}, HalfPoint{-1, 1}, HalfPoint{-1, -1}, HalfPoint{1, -1}};

inline std::vector<HalfPoint> neighbors(const FccLattice& lat, HalfPoint v) {
  if (!is_vertex(v)) throw InvalidVertexError("neighbors: not a lattice vertex");
  if (!lat.in_window(v)) throw InvalidVertexError("neighbors: vertex outside window");
  std::vector<HalfPoint> out;
  auto push = [&](HalfPoint d) {
    HalfPoint u{v.i + d.i, v.j + d.j};
    if (lat.in_window(u)) out.push_back(u);
  };
  if (is_integer_vertex(v))
    for (auto d : kIntegerOffsets) push(d);
  else
    for (auto d : kCenterOffsets) push(d);
  return out;
}

/**
 * Closed eps-drawn region: a rectangle [a,b]x[c,d] or an annulus
 * x + [-a,a]^2 \ ]-b,b[^2, all parameters integer multiples of eps.
 * Region boundaries run along lattice edges, vertices exactly on the
 * boundary belong to the region.
 */
class EpsRegion {
public:
  enum class Kind { Rectangle, Annulus };

  static EpsRegion rectangle(double eps, double a, double b, double c,
                             double d) {
    EpsRegion r;
    r.kind_ = Kind::Rectangle;
    r.eps_ = eps;
    r.x0_ = detail::to_eps_units_half(a, eps, "rectangle");
    r.x1_ = detail::to_eps_units_half(b, eps, "rectangle");
    r.y0_ = detail::to_eps_units_half(c, eps, "rectangle");
    r.y1_ = detail::to_eps_units_half(d, eps, "rectangle");
    if (r.x0_ > r.x1_ || r.y0_ > r.y1_)
      throw InvalidRegionError("rectangle: empty region");
    return r;
  }

  static EpsRegion annulus(double eps, double center_x, double center_y,
                           double outer, double inner) {
    EpsRegion r;
    r.kind_ = Kind::Annulus;
    r.eps_ = eps;
    r.cx_ = detail::to_eps_units_half(center_x, eps, "annulus center");
    r.cy_ = detail::to_eps_units_half(center_y, eps, "annulus center");
    r.outer_ = detail::to_eps_units_half(outer, eps, "annulus");
    r.inner_ = detail::to_eps_units_half(inner, eps, "annulus");
    if (!(0 < r.inner_ && r.inner_ <= r.outer_))
      throw InvalidRegionError("annulus: need 0 < b <= a");
    return r;
  }

  Kind kind() const { return kind_; }
  double eps() const { return eps_; }

  bool contains(HalfPoint v) const {
    if (kind_ == Kind::Rectangle)
      return v.i >= x0_ && v.i <= x1_ && v.j >= y0_ && v.j <= y1_;
    const long long m = chebyshev(v);
    return m >= inner_ && m <= outer_;
  }

  // Rectangle accessors (half-units).
  long long x0() const { return x0_; }
  long long x1() const { return x1_; }
  long long y0() const { return y0_; }
  long long y1() const { return y1_; }
  // Annulus accessors (half-units).
  long long center_i() const { return cx_; }
  long long center_j() const { return cy_; }
  long long outer() const { return outer_; }
  long long inner() const { return inner_; }

  long long chebyshev(HalfPoint v) const {
    return std::max(std::llabs(v.i - cx_), std::llabs(v.j - cy_));
  }

  bool on_inner_boundary(HalfPoint v) const {
    return kind_ == Kind::Annulus && chebyshev(v) == inner_;
  }
  bool on_outer_boundary(HalfPoint v) const {
    return kind_ == Kind::Annulus && chebyshev(v) == outer_;
  }

  bool on_boundary(HalfPoint v) const {
    if (!contains(v)) return false;
    if (kind_ == Kind::Rectangle)
      return v.i == x0_ || v.i == x1_ || v.j == y0_ || v.j == y1_;
    return on_inner_boundary(v) || on_outer_boundary(v);
  }

  // Bounding box in half-units.
  long long bbox_x0() const {
    return kind_ == Kind::Rectangle ? x0_ : cx_ - outer_;
  }
  long long bbox_x1() const {
    return kind_ == Kind::Rectangle ? x1_ : cx_ + outer_;
  }
  long long bbox_y0() const {
    return kind_ == Kind::Rectangle ? y0_ : cy_ - outer_;
  }
  long long bbox_y1() const {
    return kind_ == Kind::Rectangle ? y1_ : cy_ + outer_;
  }

private:
  Kind kind_ = Kind::Rectangle;
  double eps_ = 1.0;
  long long x0_ = 0, x1_ = 0, y0_ = 0, y1_ = 0;
  long long cx_ = 0, cy_ = 0, outer_ = 0, inner_ = 0;
};

inline std::vector<HalfPoint> vertices_in(const FccLattice& lat,
                                          const EpsRegion& region) {
  if (region.bbox_x0() < lat.x0 || region.bbox_x1() > lat.x1 ||
      region.bbox_y0() < lat.y0 || region.bbox_y1() > lat.y1)
    throw InvalidRegionError("vertices_in: region exceeds lattice window");
  std::vector<HalfPoint> out;
  for (long long i = region.bbox_x0(); i <= region.bbox_x1(); ++i)
    for (long long j = region.bbox_y0(); j <= region.bbox_y1(); ++j) {
      HalfPoint v{i, j};
      if (is_vertex(v) && region.contains(v)) out.push_back(v);
    }
  return out;
}

/**
 * Correlated site percolation configuration: black(x) <=> f(x) >= -p.
 * Ties are black; the inequality is weak.
 */
class Coloring {
public:
  Coloring(FccLattice lat, double level, std::vector<std::uint8_t> black)
      : lattice_(lat), level_(level), black_(std::move(black)) {
    if (black_.size() != std::size_t(lattice_.nx()) * lattice_.ny())
      throw SpecMismatchError("coloring: bitmap does not match window");
  }

  const FccLattice& lattice() const { return lattice_; }
  double level() const { return level_; }

  bool black(HalfPoint v) const {
    return black_[std::size_t(v.i - lattice_.x0) * lattice_.ny() +
                  std::size_t(v.j - lattice_.y0)] != 0;
  }
  bool colored(HalfPoint v, bool want_black) const {
    return black(v) == want_black;
  }

  std::size_t vertex_count() const {
    std::size_t n = 0;
    for (long long i = lattice_.x0; i <= lattice_.x1; ++i)
      for (long long j = lattice_.y0; j <= lattice_.y1; ++j)
        if (((i + j) & 1) == 0) ++n;
    return n;
  }

private:
  FccLattice lattice_;
  double level_;
  std::vector<std::uint8_t> black_;
};

inline Coloring color_field(const FieldSample& field, double eps, double p) {
  const FccLattice lat = lattice_of(field, eps);
  std::vector<std::uint8_t> black(field.values.size());
  for (std::size_t k = 0; k < field.values.size(); ++k)
    black[k] = field.values[k] >= -p ? 1 : 0;
  return Coloring(lat, p, std::move(black));
}

// Triangular face (center, two adjacent cell corners); used by the face
// audit and the nodal tracer.
struct TriFace {
  HalfPoint center;
  HalfPoint a;
  HalfPoint b;
};

template <class Fn>
void for_each_face(const FccLattice& lat, Fn&& fn) {
  // eps-cells whose four corners and center lie in the window
  for (long long i = lat.x0 + ((lat.x0 & 1) ? 1 : 0); i + 2 <= lat.x1;
       i += 2)
    for (long long j = lat.y0 + ((lat.y0 & 1) ? 1 : 0); j + 2 <= lat.y1;
         j += 2) {
      const HalfPoint c{i + 1, j + 1};
      const HalfPoint p00{i, j}, p10{i + 2, j}, p11{i + 2, j + 2},
          p01{i, j + 2};
      fn(TriFace{c, p00, p10});
      fn(TriFace{c, p10, p11});
      fn(TriFace{c, p11, p01});
      fn(TriFace{c, p01, p00});
    }
}

}  // namespace nrsw
