#pragma once

#include <cmath>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nrsw::detail {

struct GaussLegendre {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

inline GaussLegendre compute_gauss_legendre(int n) {
  GaussLegendre gl;
  gl.x.resize(std::size_t(n));
  gl.w.resize(std::size_t(n));
  for (int k = 1; k <= n; ++k) {
    double z = std::cos(std::numbers::pi * (k - 0.25) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * z * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    gl.x[std::size_t(k - 1)] = z;
    gl.w[std::size_t(k - 1)] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return gl;
}

inline const GaussLegendre& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::unordered_map<int, GaussLegendre> cache;
  std::scoped_lock lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

// Integrates fn over [a, b] with an n-node Gauss-Legendre rule.
template <class Fn>
double integrate(double a, double b, int n, Fn&& fn) {
  const GaussLegendre& gl = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t k = 0; k < gl.x.size(); ++k)
    sum += gl.w[k] * fn(mid + half * gl.x[k]);
  return half * sum;
}

}  // namespace nrsw::detail
