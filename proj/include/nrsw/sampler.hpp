#pragma once

#include <algorithm>
#include <bit>
#include <memory>
#include <type_traits>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "nrsw/detail/fft.hpp"
#include "nrsw/errors.hpp"
#include "nrsw/kernels.hpp"
#include "nrsw/rng.hpp"

namespace nrsw {

/**
 * Regular sampling window. spacing is half the lattice mesh (the
 * face-centered vertex set at mesh eps lives on the sub-grid {i+j even}
 * of this grid), and the origin snaps to an integer multiple of spacing
 * so that windows from different calls stay mutually aligned.
 */
struct GridSpec {
  double spacing = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  int nx = 2;
  int ny = 2;

  double x(int ix) const { return origin_x + spacing * ix; }
  double y(int iy) const { return origin_y + spacing * iy; }

  // Integer origin coordinates in units of spacing.
  long long origin_ix() const { return llround(origin_x / spacing); }
  long long origin_iy() const { return llround(origin_y / spacing); }

  bool operator==(const GridSpec&) const = default;

private:
  static long long llround(double v) { return std::llround(v); }
};

inline GridSpec make_grid(double spacing, double origin_x, double origin_y,
                          int nx, int ny) {
  if (!(spacing > 0)) throw InvalidRegionError("grid: spacing must be > 0");
  if (nx < 2 || ny < 2) throw InvalidRegionError("grid: extent must be >= 2");
  for (double o : {origin_x, origin_y}) {
    const double q = o / spacing;
    if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, std::abs(q)))
      throw InvalidRegionError(
          "grid: origin must be an integer multiple of spacing");
  }
  return GridSpec{spacing, origin_x, origin_y, nx, ny};
}

struct SeedTrace {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::uint64_t stream = 0;
};

struct FieldSample {
  GridSpec grid;
  std::vector<double> values;  // row-major: index ix*ny + iy
  SeedTrace seed_trace;

  double at(int ix, int iy) const {
    return values[std::size_t(ix) * grid.ny + iy];
  }
  double& at(int ix, int iy) {
    return values[std::size_t(ix) * grid.ny + iy];
  }
};

/**
 * Exact stationary Gaussian synthesis by circulant embedding.
 *
 * The kernel is wrapped onto a padded torus, its eigenvalue array is one
 * 2-D FFT, and each replica costs one inverse FFT of spectrally colored
 * noise. Padding starts at twice the window and doubles up to 16x; only
 * eigenvalues above -1e-8 times the largest may be clamped to zero, and
 * anything below that fails loudly, since silently flooring a large
 * negative mass would corrupt the covariance.
 */
class CirculantSampler {
public:
  CirculantSampler(const Kernel& kernel, const GridSpec& grid)
      : grid_(grid) {
    if (grid.nx < 2 || grid.ny < 2)
      throw InvalidRegionError("sampler: extent must be >= 2");
    double worst = 0.0;
    for (int factor : {2, 4, 8, 16}) {
      mx_ = detail::next_fast_even(factor * grid.nx);
      my_ = detail::next_fast_even(factor * grid.ny);
      std::vector<std::complex<double>> c(std::size_t(mx_) * my_);
      for (int i = 0; i < mx_; ++i) {
        const double dx = grid.spacing * (i <= mx_ / 2 ? i : i - mx_);
        for (int j = 0; j < my_; ++j) {
          const double dy = grid.spacing * (j <= my_ / 2 ? j : j - my_);
          c[std::size_t(i) * my_ + j] = kernel.evaluate(dx, dy);
        }
      }
      detail::fft2_inplace(c, mx_, my_, FFTW_FORWARD);
      double mn = 0.0, mxv = 0.0;
      for (const auto& z : c) {
        mn = std::min(mn, z.real());
        mxv = std::max(mxv, z.real());
      }
      worst = std::min(worst, mn);
      if (mn >= -1e-8 * mxv) {
        sqrt_eigs_.resize(c.size());
        for (std::size_t k = 0; k < c.size(); ++k)
          sqrt_eigs_[k] = std::sqrt(std::max(c[k].real(), 0.0));
        return;
      }
    }
    throw EmbeddingError(
        "circulant embedding not positive semidefinite at 16x padding; "
        "most negative eigenvalue " + std::to_string(worst),
        worst);
  }

  const GridSpec& grid() const { return grid_; }
  int torus_nx() const { return mx_; }
  int torus_ny() const { return my_; }

  FieldSample sample(std::uint64_t seed, std::uint64_t replica,
                     std::uint64_t stream_tag = stream::field) const {
    CounterRng rng(seed, replica, stream_tag);
    std::vector<std::complex<double>> buf(sqrt_eigs_.size());
    for (std::size_t k = 0; k < buf.size(); ++k) {
      double z0, z1;
      rng.next_normal_pair(z0, z1);
      buf[k] = std::complex<double>(z0 * sqrt_eigs_[k], z1 * sqrt_eigs_[k]);
    }
    detail::fft2_inplace(buf, mx_, my_, FFTW_BACKWARD);
    const double scale = 1.0 / std::sqrt(double(mx_) * double(my_));
    FieldSample out;
    out.grid = grid_;
    out.seed_trace = {seed, replica, stream_tag};
    out.values.resize(std::size_t(grid_.nx) * grid_.ny);
    for (int ix = 0; ix < grid_.nx; ++ix)
      for (int iy = 0; iy < grid_.ny; ++iy)
        out.values[std::size_t(ix) * grid_.ny + iy] =
            buf[std::size_t(ix) * my_ + iy].real() * scale;
    return out;
  }

private:
  GridSpec grid_;
  int mx_ = 0, my_ = 0;
  std::vector<double> sqrt_eigs_;
};

inline FieldSample sample_field(const Kernel& kernel, const GridSpec& grid,
                                std::uint64_t seed, std::uint64_t replica) {
  return CirculantSampler(kernel, grid).sample(seed, replica);
}

namespace detail {

inline bool windows_disjoint(const GridSpec& a, const GridSpec& b) {
  const double ax1 = a.origin_x + a.spacing * (a.nx - 1);
  const double ay1 = a.origin_y + a.spacing * (a.ny - 1);
  const double bx1 = b.origin_x + b.spacing * (b.nx - 1);
  const double by1 = b.origin_y + b.spacing * (b.ny - 1);
  const bool overlap_x = a.origin_x <= bx1 && b.origin_x <= ax1;
  const bool overlap_y = a.origin_y <= by1 && b.origin_y <= ay1;
  return !(overlap_x && overlap_y);
}

}  // namespace detail

inline std::pair<FieldSample, FieldSample> sample_independent_pair(
    const Kernel& kernel, const GridSpec& grid1, const GridSpec& grid2,
    std::uint64_t seed, std::uint64_t replica) {
  if (!detail::windows_disjoint(grid1, grid2))
    throw InvalidRegionError("independent pair: windows must be disjoint");
  return {CirculantSampler(kernel, grid1).sample(seed, replica, stream::pair_a),
          CirculantSampler(kernel, grid2).sample(seed, replica, stream::pair_b)};
}

/**
 * Interpolated field sqrt(t)*f + sqrt(1-t)*g on two disjoint windows:
 * one f draw spans both windows, g is an independent pair, so covariance
 * is kappa within each window and t*kappa across them.
 */
class InterpolatedSampler {
public:
  InterpolatedSampler(const Kernel& kernel, const GridSpec& grid1,
                      const GridSpec& grid2)
      : g1_(grid1), g2_(grid2) {
    if (grid1.spacing != grid2.spacing)
      throw InvalidRegionError("interpolated: spacings differ");
    if (!detail::windows_disjoint(grid1, grid2))
      throw InvalidRegionError("interpolated: windows must be disjoint");
    GridSpec bound;
    bound.spacing = grid1.spacing;
    bound.origin_x = std::min(grid1.origin_x, grid2.origin_x);
    bound.origin_y = std::min(grid1.origin_y, grid2.origin_y);
    auto span = [&](double o, int n, double bo) {
      return int(std::llround((o - bo) / bound.spacing)) + n;
    };
    bound.nx = std::max(span(grid1.origin_x, grid1.nx, bound.origin_x),
                        span(grid2.origin_x, grid2.nx, bound.origin_x));
    bound.ny = std::max(span(grid1.origin_y, grid1.ny, bound.origin_y),
                        span(grid2.origin_y, grid2.ny, bound.origin_y));
    full_ = std::make_unique<CirculantSampler>(kernel, bound);
    part1_ = std::make_unique<CirculantSampler>(kernel, grid1);
    part2_ = std::make_unique<CirculantSampler>(kernel, grid2);
  }

  std::pair<FieldSample, FieldSample> sample(double t, std::uint64_t seed,
                                             std::uint64_t replica) const {
    if (!(t >= 0.0 && t <= 1.0))
      throw InvalidRegionError("interpolated: t must lie in [0,1]");
    const FieldSample f = full_->sample(seed, replica, stream::interp);
    const FieldSample h1 = part1_->sample(seed, replica, stream::pair_a);
    const FieldSample h2 = part2_->sample(seed, replica, stream::pair_b);
    const double rt = std::sqrt(t), rs = std::sqrt(1.0 - t);
    auto blend = [&](const GridSpec& g, const FieldSample& h) {
      FieldSample out = h;
      const int ox = int(std::llround((g.origin_x - f.grid.origin_x) / g.spacing));
      const int oy = int(std::llround((g.origin_y - f.grid.origin_y) / g.spacing));
      for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.ny; ++iy)
          out.at(ix, iy) = rt * f.at(ox + ix, oy + iy) + rs * h.at(ix, iy);
      out.seed_trace = {seed, replica, stream::interp};
      return out;
    };
    return {blend(g1_, h1), blend(g2_, h2)};
  }

private:
  GridSpec g1_, g2_;
  std::unique_ptr<CirculantSampler> full_, part1_, part2_;
};

inline std::pair<FieldSample, FieldSample> sample_interpolated(
    const Kernel& kernel, const GridSpec& grid1, const GridSpec& grid2,
    double t, std::uint64_t seed, std::uint64_t replica) {
  return InterpolatedSampler(kernel, grid1, grid2).sample(t, seed, replica);
}

struct LagEstimate {
  int dx = 0, dy = 0;
  double estimate = 0.0;
  double std_error = 0.0;
};

// Spatial-and-replica averaged covariance at integer grid offsets; the
// field mean is known to be zero, so f(x)f(x+v) is already unbiased.
inline std::vector<LagEstimate> empirical_covariance(
    const std::vector<FieldSample>& samples,
    const std::vector<std::pair<int, int>>& lags) {
  if (samples.size() < 2)
    throw SpecMismatchError("empirical_covariance: need >= 2 samples");
  const GridSpec& g = samples.front().grid;
  for (const auto& s : samples)
    if (!(s.grid == g))
      throw SpecMismatchError("empirical_covariance: grids differ");
  std::vector<LagEstimate> out;
  for (auto [dx, dy] : lags) {
    if (std::abs(dx) >= g.nx || std::abs(dy) >= g.ny)
      throw OutOfRangeError("empirical_covariance: lag beyond window");
    const int x0 = std::max(0, -dx), x1 = g.nx - std::max(0, dx);
    const int y0 = std::max(0, -dy), y1 = g.ny - std::max(0, dy);
    const double npairs = double(x1 - x0) * double(y1 - y0);
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (const auto& s : samples) {
      double acc = 0.0;
      for (int ix = x0; ix < x1; ++ix)
        for (int iy = y0; iy < y1; ++iy)
          acc += s.at(ix, iy) * s.at(ix + dx, iy + dy);
      acc /= npairs;
      ++k;
      const double d = acc - mean;
      mean += d / double(k);
      m2 += d * (acc - mean);
    }
    const double n = double(samples.size());
    out.push_back({dx, dy, mean, std::sqrt(m2 / (n - 1) / n)});
  }
  return out;
}

// --- binary dump -----------------------------------------------------

namespace detail {

template <class T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  is.read(reinterpret_cast<char*>(b), sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_field(const FieldSample& f, std::ostream& os) {
  os.write("NRSW", 4);
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<double>(os, f.grid.spacing);
  detail::write_le<double>(os, f.grid.origin_x);
  detail::write_le<double>(os, f.grid.origin_y);
  detail::write_le<std::uint32_t>(os, std::uint32_t(f.grid.nx));
  detail::write_le<std::uint32_t>(os, std::uint32_t(f.grid.ny));
  for (double v : f.values) detail::write_le<double>(os, v);
}

inline void write_field(const FieldSample& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_field(f, os);
}

inline FieldSample read_field(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "NRSW", 4) != 0)
    throw std::runtime_error("field dump: bad magic");
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("field dump: bad version");
  FieldSample f;
  f.grid.spacing = detail::read_le<double>(is);
  f.grid.origin_x = detail::read_le<double>(is);
  f.grid.origin_y = detail::read_le<double>(is);
  f.grid.nx = int(detail::read_le<std::uint32_t>(is));
  f.grid.ny = int(detail::read_le<std::uint32_t>(is));
  f.values.resize(std::size_t(f.grid.nx) * f.grid.ny);
  for (double& v : f.values) v = detail::read_le<double>(is);
  if (!is) throw std::runtime_error("field dump: truncated");
  return f;
}

inline FieldSample read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_field(is);
}

}  // namespace nrsw
