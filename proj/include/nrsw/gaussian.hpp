#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "nrsw/detail/quadrature.hpp"
#include "nrsw/errors.hpp"
#include "nrsw/kernels.hpp"
#include "nrsw/rng.hpp"

namespace nrsw {

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long long n = 0;
};

/**
 * Finite-dimensional Gaussian law. The covariance is kept symmetric; make
 * it through make_model so symmetry and positive semidefiniteness (within
 * 1e-10 relative tolerance) are enforced.
 */
struct GaussianVectorModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return int(mean.size()); }
};

inline GaussianVectorModel make_model(const Eigen::VectorXd& mean,
                                      const Eigen::MatrixXd& cov) {
  const int n = int(mean.size());
  if (cov.rows() != n || cov.cols() != n)
    throw SpecMismatchError("model: covariance shape does not match mean");
  GaussianVectorModel model;
  model.mean = mean;
  model.cov = 0.5 * (cov + cov.transpose());
  if (n == 0) return model;
  const double scale = std::max(1.0, model.cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw SpecMismatchError("model: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.cov);
  if (es.info() != Eigen::Success)
    throw SpecMismatchError("model: eigendecomposition failed");
  const double lmax = std::max(0.0, es.eigenvalues().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, lmax))
    throw SpecMismatchError("model: covariance is not positive semidefinite");
  return model;
}

inline GaussianVectorModel standard_model(int n) {
  return GaussianVectorModel{Eigen::VectorXd::Zero(n),
                             Eigen::MatrixXd::Identity(n, n)};
}

// --- Threshold events ------------------------------------------------------

/**
 * Event generated by the half-spaces {x_i >= q_i}: membership depends only
 * on the sign pattern, stored as a truth table indexed by the bitmask with
 * bit i set iff x_i >= q_i. Dimension is capped at 24 (16 MiB table).
 */
struct ThresholdEvent {
  Eigen::VectorXd q;
  std::vector<std::uint8_t> table;

  int dim() const { return int(q.size()); }
  bool contains_pattern(std::uint32_t pattern) const {
    return table[pattern] != 0;
  }
  std::uint32_t pattern_of(const Eigen::VectorXd& x) const {
    std::uint32_t p = 0;
    for (int k = 0; k < dim(); ++k)
      if (x[k] >= q[k]) p |= std::uint32_t(1) << k;
    return p;
  }
  bool contains(const Eigen::VectorXd& x) const {
    return contains_pattern(pattern_of(x));
  }
};

template <class Fn>
ThresholdEvent make_threshold_event(const Eigen::VectorXd& q,
                                    Fn&& indicator) {
  const int n = int(q.size());
  if (n > 24)
    throw SpecMismatchError("threshold event: dimension exceeds 24");
  ThresholdEvent ev;
  ev.q = q;
  ev.table.resize(std::size_t(1) << n);
  for (std::uint32_t p = 0; p < ev.table.size(); ++p)
    ev.table[p] = indicator(p) ? 1 : 0;
  return ev;
}

inline ThresholdEvent halfspace_event(const Eigen::VectorXd& q, int i) {
  if (i < 0 || i >= q.size())
    throw OutOfRangeError("halfspace event: coordinate out of range");
  return make_threshold_event(
      q, [&](std::uint32_t p) { return (p >> i) & 1u; });
}

inline ThresholdEvent full_event(const Eigen::VectorXd& q) {
  return make_threshold_event(q, [](std::uint32_t) { return true; });
}

inline ThresholdEvent complement_event(const ThresholdEvent& ev) {
  ThresholdEvent out = ev;
  for (auto& b : out.table) b = b ? 0 : 1;
  return out;
}

inline ThresholdEvent intersect_event(const ThresholdEvent& a,
                                      const ThresholdEvent& b) {
  if (a.dim() != b.dim() || a.q != b.q)
    throw SpecMismatchError("event intersection: thresholds differ");
  ThresholdEvent out = a;
  for (std::size_t p = 0; p < out.table.size(); ++p)
    out.table[p] = (a.table[p] && b.table[p]) ? 1 : 0;
  return out;
}

inline ThresholdEvent union_event(const ThresholdEvent& a,
                                  const ThresholdEvent& b) {
  if (a.dim() != b.dim() || a.q != b.q)
    throw SpecMismatchError("event union: thresholds differ");
  ThresholdEvent out = a;
  for (std::size_t p = 0; p < out.table.size(); ++p)
    out.table[p] = (a.table[p] || b.table[p]) ? 1 : 0;
  return out;
}

// True iff membership never depends on the sign of the given coordinate.
inline bool event_ignores(const ThresholdEvent& ev, int coordinate) {
  const std::uint32_t bit = std::uint32_t(1) << coordinate;
  for (std::uint32_t p = 0; p < ev.table.size(); ++p)
    if (!(p & bit) && ev.table[p] != ev.table[p | bit]) return false;
  return true;
}

/**
 * Pivotal set of a coordinate: the sign patterns of the other coordinates
 * for which flipping coordinate i changes membership. Identical for an
 * event and its complement.
 */
struct PivSet {
  int coord = 0;
  Eigen::VectorXd q;                // thresholds of the base event
  std::vector<std::uint8_t> table;  // over the remaining dim-1 coordinates

  int base_dim() const { return int(q.size()); }
  bool contains_reduced(std::uint32_t pattern) const {
    return table[pattern] != 0;
  }
  bool contains(const Eigen::VectorXd& x) const {
    std::uint32_t p = 0;
    int bit = 0;
    for (int k = 0; k < base_dim(); ++k) {
      if (k == coord) continue;
      if (x[k] >= q[k]) p |= std::uint32_t(1) << bit;
      ++bit;
    }
    return contains_reduced(p);
  }
};

inline PivSet piv_set(const ThresholdEvent& event, int i) {
  const int n = event.dim();
  if (i < 0 || i >= n)
    throw OutOfRangeError("piv_set: coordinate out of range");
  PivSet piv;
  piv.coord = i;
  piv.q = event.q;
  piv.table.resize(std::size_t(1) << (n - 1));
  const std::uint32_t low = (std::uint32_t(1) << i) - 1;
  for (std::uint32_t r = 0; r < piv.table.size(); ++r) {
    const std::uint32_t base = ((r & ~low) << 1) | (r & low);
    piv.table[r] =
        event.table[base] != event.table[base | (std::uint32_t(1) << i)] ? 1
                                                                         : 0;
  }
  return piv;
}

// --- Regression and sampling -----------------------------------------------

/**
 * Conditional law of the unobserved coordinates given exact values of the
 * observed ones: covariance A - B D^-1 B^t and mean shifted by B D^-1 times
 * the centered observation. Conditioning on nothing returns the input.
 */
inline GaussianVectorModel regression(const GaussianVectorModel& joint,
                                      const std::vector<int>& observed,
                                      const Eigen::VectorXd& values) {
  const int n = joint.dim();
  if (int(observed.size()) != values.size())
    throw SpecMismatchError("regression: observation size mismatch");
  if (observed.empty()) return joint;

  std::vector<std::uint8_t> is_obs(std::size_t(n), 0);
  for (int idx : observed) {
    if (idx < 0 || idx >= n)
      throw OutOfRangeError("regression: index out of range");
    if (is_obs[std::size_t(idx)])
      throw SpecMismatchError("regression: repeated index");
    is_obs[std::size_t(idx)] = 1;
  }
  std::vector<int> hidden;
  for (int k = 0; k < n; ++k)
    if (!is_obs[std::size_t(k)]) hidden.push_back(k);

  const int no = int(observed.size()), nh = int(hidden.size());
  Eigen::MatrixXd A(nh, nh), B(nh, no), D(no, no);
  Eigen::VectorXd mean_h(nh), mean_o(no);
  for (int r = 0; r < nh; ++r) {
    mean_h[r] = joint.mean[hidden[std::size_t(r)]];
    for (int c = 0; c < nh; ++c)
      A(r, c) = joint.cov(hidden[std::size_t(r)], hidden[std::size_t(c)]);
    for (int c = 0; c < no; ++c)
      B(r, c) = joint.cov(hidden[std::size_t(r)], observed[std::size_t(c)]);
  }
  for (int r = 0; r < no; ++r) {
    mean_o[r] = joint.mean[observed[std::size_t(r)]];
    for (int c = 0; c < no; ++c)
      D(r, c) = joint.cov(observed[std::size_t(r)], observed[std::size_t(c)]);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
  if (es.info() != Eigen::Success)
    throw DegenerateConditioningError("regression: decomposition failed");
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin >= 1e12)
    throw DegenerateConditioningError(
        "regression: observed block is singular or ill-conditioned");
  const Eigen::MatrixXd dinv = es.eigenvectors() *
                               es.eigenvalues().cwiseInverse().asDiagonal() *
                               es.eigenvectors().transpose();
  const Eigen::MatrixXd gain = B * dinv;

  GaussianVectorModel out;
  out.mean = mean_h + gain * (values - mean_o);
  const Eigen::MatrixXd cov = A - gain * B.transpose();
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

/**
 * Exact sampler for a Gaussian vector model through the eigendecomposition
 * square root; round-off eigenvalues are clamped to zero within the model
 * tolerance.
 */
class ModelSampler {
public:
  explicit ModelSampler(const GaussianVectorModel& model)
      : mean_(model.mean) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.cov);
    if (model.dim() > 0 && es.info() != Eigen::Success)
      throw DegenerateConditioningError(
          "model sampler: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    const double lmax = model.dim() > 0 ? std::max(0.0, lam.maxCoeff()) : 0.0;
    for (int k = 0; k < lam.size(); ++k) {
      if (lam[k] < -1e-10 * std::max(1.0, lmax))
        throw SpecMismatchError(
            "model sampler: covariance is not positive semidefinite");
      lam[k] = std::max(lam[k], 0.0);
    }
    root_ = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
  }

  int dim() const { return int(mean_.size()); }

  Eigen::VectorXd sample(CounterRng& rng) const {
    Eigen::VectorXd z(dim());
    for (int k = 0; k < dim(); ++k) z[k] = rng.next_normal();
    return mean_ + root_ * z;
  }

private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd root_;
};

inline Eigen::MatrixXd interpolated_cov(const Eigen::MatrixXd& cov, int k1,
                                        int k2, double t) {
  if (cov.rows() != cov.cols() || k1 < 0 || k2 < 0 ||
      k1 + k2 != cov.rows())
    throw SpecMismatchError(
        "interpolated_cov: block sizes must sum to the dimension");
  if (!(t >= 0.0 && t <= 1.0))
    throw OutOfRangeError("interpolated_cov: t must lie in [0,1]");
  Eigen::MatrixXd out = cov;
  out.topRightCorner(k1, k2) *= t;
  out.bottomLeftCorner(k2, k1) *= t;
  return out;
}

// --- Quasi-independence ----------------------------------------------------

namespace detail {

inline double std_normal_upper(double q) {
  return 0.5 * std::erfc(q / std::numbers::sqrt2);
}

// P[X1 >= q1, X2 >= q2] for standard bivariate normal with correlation rho,
// through the derivative identity dP/drho = bivariate density at (q1, q2).
inline double bivariate_upper(double q1, double q2, double rho) {
  if (!(std::abs(rho) < 1.0))
    throw DegenerateConditioningError(
        "bivariate orthant: |correlation| must be < 1");
  const double base = std_normal_upper(q1) * std_normal_upper(q2);
  const double tail = integrate(0.0, rho, 64, [&](double r) {
    const double o = 1.0 - r * r;
    return std::exp(-0.5 * (q1 * q1 - 2 * r * q1 * q2 + q2 * q2) / o) /
           (2.0 * std::numbers::pi * std::sqrt(o));
  });
  return base + tail;
}

inline bool is_halfspace(const ThresholdEvent& ev, int i) {
  for (std::uint32_t p = 0; p < ev.table.size(); ++p)
    if (ev.table[p] != ((p >> i) & 1u)) return false;
  return true;
}

inline void require_qi_blocks(const GaussianVectorModel& model, int k1,
                              int k2, const ThresholdEvent& U,
                              const ThresholdEvent& V) {
  const int n = model.dim();
  if (k1 < 1 || k2 < 1 || k1 + k2 != n)
    throw SpecMismatchError("qi: block sizes must be positive and sum to n");
  if (U.dim() != n || V.dim() != n)
    throw SpecMismatchError("qi: events must live on the full dimension");
  for (int c = k1; c < n; ++c)
    if (!event_ignores(U, c))
      throw SpecMismatchError("qi: U must ignore the second block");
  for (int c = 0; c < k1; ++c)
    if (!event_ignores(V, c))
      throw SpecMismatchError("qi: V must ignore the first block");
}

}  // namespace detail

/**
 * |P[X in U and V] - P[X in U] P[X in V]| estimated with common random
 * numbers; the standard error comes from the influence function of the
 * plug-in estimator. The bivariate pure-orthant case is evaluated in closed
 * form (zero standard error).
 */
inline McEstimate qi_lhs(const GaussianVectorModel& model, int k1, int k2,
                         const ThresholdEvent& U, const ThresholdEvent& V,
                         long long samples, std::uint64_t seed) {
  detail::require_qi_blocks(model, k1, k2, U, V);
  const int n = model.dim();

  if (n == 2 && detail::is_halfspace(U, 0) && detail::is_halfspace(V, 1) &&
      model.mean.cwiseAbs().maxCoeff() < 1e-12 &&
      std::abs(model.cov(0, 0) - 1.0) < 1e-12 &&
      std::abs(model.cov(1, 1) - 1.0) < 1e-12) {
    const double puv =
        detail::bivariate_upper(U.q[0], V.q[1], model.cov(0, 1));
    const double pu = detail::std_normal_upper(U.q[0]);
    const double pv = detail::std_normal_upper(V.q[1]);
    return McEstimate{std::abs(puv - pu * pv), 0.0, 0};
  }

  if (samples < 2) throw OutOfRangeError("qi_lhs: need at least 2 samples");
  const ModelSampler sampler(model);
  CounterRng rng(seed, 0, stream::vectors);
  long long cu = 0, cv = 0, cuv = 0;
  for (long long k = 0; k < samples; ++k) {
    const Eigen::VectorXd x = sampler.sample(rng);
    const bool in_u = U.contains(x);
    const bool in_v = V.contains(x);
    cu += in_u ? 1 : 0;
    cv += in_v ? 1 : 0;
    cuv += (in_u && in_v) ? 1 : 0;
  }
  const double m = double(samples);
  const double pu = cu / m, pv = cv / m, puv = cuv / m;
  // influence function h = 1{UV} - pv 1{U} - pu 1{V}; indicators make all
  // cross moments collapse onto the three counters
  const double sh = cuv - pv * cu - pu * cv;
  const double sh2 = cuv + pv * pv * cu + pu * pu * cv -
                     2.0 * (pv + pu - pu * pv) * cuv;
  const double var_h = std::max(0.0, sh2 / m - (sh / m) * (sh / m));
  return McEstimate{std::abs(puv - pu * pv), std::sqrt(var_h / m), samples};
}

/**
 * Interpolation upper bound: sum over cross-block pairs (i, j) of
 * |Sigma_ij| times the t-averaged conditional probability that the
 * interpolated vector is jointly pivotal for U at i and V at j given
 * X_t(i)=q_i, X_t(j)=q_j, times the standardized bivariate density factor
 * exp(-(q_i^2+q_j^2)/2) / (2 pi sqrt(1-Sigma_ij^2)). The t-average uses
 * Gauss-Legendre nodes; each conditional law comes from regression on the
 * interpolated covariance and is integrated by Monte Carlo.
 */
inline McEstimate qi_rhs(const GaussianVectorModel& model, int k1, int k2,
                         const ThresholdEvent& U, const ThresholdEvent& V,
                         const Eigen::VectorXd& q, int t_nodes,
                         long long samples_per_node, std::uint64_t seed) {
  detail::require_qi_blocks(model, k1, k2, U, V);
  const int n = model.dim();
  if (q.size() != n) throw SpecMismatchError("qi_rhs: threshold size");
  for (int k = 0; k < n; ++k)
    if (std::abs(model.cov(k, k) - 1.0) > 1e-9)
      throw SpecMismatchError("qi_rhs: unit diagonal required");
  if (t_nodes < 1) throw OutOfRangeError("qi_rhs: need at least one t node");
  if (samples_per_node < 1)
    throw OutOfRangeError("qi_rhs: need a positive sample budget");
  const auto& gl = detail::gauss_legendre(t_nodes);

  double total = 0.0, var_total = 0.0;
  int pair_index = 0;
  for (int i = 0; i < k1; ++i)
    for (int j = k1; j < n; ++j) {
      const int pair = pair_index++;
      const double s = model.cov(i, j);
      if (std::abs(s) >= 1.0)
        throw DegenerateConditioningError(
            "qi_rhs: |cross correlation| must be < 1");
      if (s == 0.0) continue;
      const PivSet piv_u = piv_set(U, i);
      const PivSet piv_v = piv_set(V, j);
      const double pref = std::abs(s) *
                          std::exp(-0.5 * (q[i] * q[i] + q[j] * q[j])) /
                          (2.0 * std::numbers::pi * std::sqrt(1.0 - s * s));

      double integral = 0.0, var_integral = 0.0;
      for (int node = 0; node < t_nodes; ++node) {
        const double t = 0.5 * (gl.x[std::size_t(node)] + 1.0);
        const double w = 0.5 * gl.w[std::size_t(node)];
        const GaussianVectorModel model_t{
            model.mean, interpolated_cov(model.cov, k1, k2, t)};
        Eigen::VectorXd obs(2);
        obs << q[i], q[j];
        const GaussianVectorModel cond = regression(model_t, {i, j}, obs);

        double p = 0.0, var_p = 0.0;
        if (n == 2) {
          Eigen::VectorXd x(2);
          x[i] = q[i];
          x[j] = q[j];
          p = piv_u.contains(x) && piv_v.contains(x) ? 1.0 : 0.0;
        } else {
          std::vector<int> hidden;
          for (int k = 0; k < n; ++k)
            if (k != i && k != j) hidden.push_back(k);
          const ModelSampler cs(cond);
          CounterRng rng(seed, std::uint64_t(pair) * 4096 + std::uint64_t(node),
                         stream::quadrature);
          long long count = 0;
          Eigen::VectorXd x(n);
          for (long long m = 0; m < samples_per_node; ++m) {
            const Eigen::VectorXd z = cs.sample(rng);
            for (std::size_t r = 0; r < hidden.size(); ++r)
              x[hidden[r]] = z[int(r)];
            x[i] = q[i];
            x[j] = q[j];
            if (piv_u.contains(x) && piv_v.contains(x)) ++count;
          }
          p = double(count) / double(samples_per_node);
          var_p = p * (1.0 - p) / double(samples_per_node);
        }
        integral += w * p;
        var_integral += w * w * var_p;
      }
      total += pref * integral;
      var_total += pref * pref * var_integral;
    }
  return McEstimate{total, std::sqrt(var_total), samples_per_node};
}

// Convenience overload: thresholds merged from the events (first block from
// U, second from V), 8 t-nodes per the quadrature design.
inline McEstimate qi_rhs(const GaussianVectorModel& model, int k1, int k2,
                         const ThresholdEvent& U, const ThresholdEvent& V,
                         long long samples_per_node, std::uint64_t seed) {
  Eigen::VectorXd q(model.dim());
  for (int k = 0; k < model.dim(); ++k) q[k] = k < k1 ? U.q[k] : V.q[k];
  return qi_rhs(model, k1, k2, U, V, q, 8, samples_per_node, seed);
}

// --- Density identities ----------------------------------------------------

namespace detail {

inline void require_positive_definite(const Eigen::MatrixXd& cov,
                                      const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw DegenerateConditioningError(std::string(what) +
                                      ": decomposition failed");
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 1e-10 * std::max(1.0, lmax)))
    throw DegenerateConditioningError(std::string(what) +
                                      ": covariance is near-singular");
}

inline double gaussian_density(const Eigen::VectorXd& x,
                               const Eigen::MatrixXd& cov) {
  const int n = int(x.size());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw DegenerateConditioningError(
        "gaussian density: covariance not positive definite");
  double logdet = 0.0;
  for (int k = 0; k < n; ++k) logdet += std::log(llt.matrixL()(k, k));
  logdet *= 2.0;
  const double quad = x.dot(llt.solve(x));
  return std::exp(-0.5 * (quad + logdet +
                          n * std::log(2.0 * std::numbers::pi)));
}

// Tensor-product Gauss-Legendre over an axis-aligned box; fn takes the
// point. Zero-dimensional boxes integrate to fn at the empty point.
template <class Fn>
double box_quadrature(const std::vector<std::pair<double, double>>& box,
                      int nodes, Fn&& fn) {
  const int d = int(box.size());
  Eigen::VectorXd x(d);
  if (d == 0) return fn(x);
  const GaussLegendre& gl = gauss_legendre(nodes);
  const std::size_t dim = std::size_t(d);
  std::vector<std::vector<double>> xs(dim), ws(dim);
  for (int k = 0; k < d; ++k) {
    const double mid = 0.5 * (box[std::size_t(k)].first +
                              box[std::size_t(k)].second);
    const double half = 0.5 * (box[std::size_t(k)].second -
                               box[std::size_t(k)].first);
    xs[std::size_t(k)].resize(std::size_t(nodes));
    ws[std::size_t(k)].resize(std::size_t(nodes));
    for (int m = 0; m < nodes; ++m) {
      xs[std::size_t(k)][std::size_t(m)] = mid + half * gl.x[std::size_t(m)];
      ws[std::size_t(k)][std::size_t(m)] = half * gl.w[std::size_t(m)];
    }
  }
  std::vector<int> idx(std::size_t(d), 0);
  double sum = 0.0;
  for (;;) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      x[k] = xs[std::size_t(k)][std::size_t(idx[std::size_t(k)])];
      w *= ws[std::size_t(k)][std::size_t(idx[std::size_t(k)])];
    }
    sum += w * fn(x);
    int k = 0;
    while (k < d && ++idx[std::size_t(k)] == nodes) {
      idx[std::size_t(k)] = 0;
      ++k;
    }
    if (k == d) break;
  }
  return sum;
}

}  // namespace detail

/**
 * Numeric check of the density heat identity: the derivative of the
 * Gaussian density in the symmetric off-diagonal covariance entry (i, j)
 * equals the mixed second derivative in (x_i, x_j). Returns the absolute
 * difference of the two second-order central difference schemes at step h.
 */
inline double heat_identity_residual(const Eigen::MatrixXd& cov,
                                     const Eigen::VectorXd& x, int i, int j,
                                     double h) {
  const int n = int(x.size());
  if (cov.rows() != n || cov.cols() != n)
    throw SpecMismatchError("heat identity: shape mismatch");
  if (!(0 <= i && i < j && j < n))
    throw OutOfRangeError("heat identity: need 0 <= i < j < n");
  if (!(h > 0)) throw OutOfRangeError("heat identity: step must be > 0");
  detail::require_positive_definite(cov, "heat identity");

  Eigen::MatrixXd up = cov, down = cov;
  up(i, j) += h;
  up(j, i) += h;
  down(i, j) -= h;
  down(j, i) -= h;
  const double lhs = (detail::gaussian_density(x, up) -
                      detail::gaussian_density(x, down)) /
                     (2.0 * h);

  Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
  xpp[i] += h;
  xpp[j] += h;
  xpm[i] += h;
  xpm[j] -= h;
  xmp[i] -= h;
  xmp[j] += h;
  xmm[i] -= h;
  xmm[j] -= h;
  const double rhs = (detail::gaussian_density(xpp, cov) -
                      detail::gaussian_density(xpm, cov) -
                      detail::gaussian_density(xmp, cov) +
                      detail::gaussian_density(xmm, cov)) /
                     (4.0 * h * h);
  return std::abs(lhs - rhs);
}

/**
 * Numeric check of the threshold differentiation identity: the integral of
 * the density's x_i derivative over a threshold event equals the signed
 * density mass on the pivotal boundary slice {x_i = q_i}. Both sides are
 * computed by tensor Gauss-Legendre quadrature with tails truncated at nine
 * marginal standard deviations. Dimensions above 4 are refused.
 */
inline double threshold_identity_residual(const Eigen::MatrixXd& cov,
                                          const ThresholdEvent& U, int i) {
  const int n = U.dim();
  if (cov.rows() != n || cov.cols() != n)
    throw SpecMismatchError("threshold identity: shape mismatch");
  if (n < 1 || n > 4)
    throw UnsupportedOrderError(
        "threshold identity: dimension must be between 1 and 4");
  if (i < 0 || i >= n)
    throw OutOfRangeError("threshold identity: coordinate out of range");
  detail::require_positive_definite(cov, "threshold identity");

  const Eigen::MatrixXd prec = cov.inverse();
  const int nodes = n <= 2 ? 48 : n == 3 ? 32 : 24;
  const auto interval = [&](int k, bool upper) {
    const double sd = 9.0 * std::sqrt(cov(k, k));
    const double qk = U.q[k];
    return upper ? std::make_pair(qk, std::max(qk, sd))
                 : std::make_pair(std::min(qk, -sd), qk);
  };

  // LHS: integral of d(phi)/dx_i over every cell of the event
  double lhs = 0.0;
  for (std::uint32_t c = 0; c < U.table.size(); ++c) {
    if (!U.table[c]) continue;
    std::vector<std::pair<double, double>> box;
    for (int k = 0; k < n; ++k) box.push_back(interval(k, (c >> k) & 1u));
    lhs += detail::box_quadrature(box, nodes, [&](const Eigen::VectorXd& x) {
      return -(prec.row(i) * x)(0) * detail::gaussian_density(x, cov);
    });
  }

  // RHS: signed density mass over the pivotal slice x_i = q_i
  const PivSet piv = piv_set(U, i);
  const std::uint32_t low = (std::uint32_t(1) << i) - 1;
  double rhs = 0.0;
  for (std::uint32_t r = 0; r < piv.table.size(); ++r) {
    const std::uint32_t base = ((r & ~low) << 1) | (r & low);
    const int eps_i = int(U.table[base]) -
                      int(U.table[base | (std::uint32_t(1) << i)]);
    if (eps_i == 0) continue;
    std::vector<std::pair<double, double>> box;
    std::vector<int> coords;
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      const int bit = int(coords.size());
      box.push_back(interval(k, (r >> bit) & 1u));
      coords.push_back(k);
    }
    Eigen::VectorXd full(n);
    rhs += eps_i * detail::box_quadrature(
                       box, nodes, [&](const Eigen::VectorXd& y) {
                         for (std::size_t k = 0; k < coords.size(); ++k)
                           full[coords[k]] = y[int(k)];
                         full[i] = U.q[i];
                         return detail::gaussian_density(full, cov);
                       });
  }
  return std::abs(lhs - rhs);
}

// --- Conditional product moments -------------------------------------------

struct ProdMomentBound {
  McEstimate lhs;
  double rhs = 0.0;
};

/**
 * Conditional absolute product moment E[prod |X_i| given Y = mu] against
 * the explicit dominating bound C(n) max(sqrt(A_ii), |B_ik D^-1_kj mu_j|)^n
 * with C(n) = n^2 2^n n!. The left side is estimated by Monte Carlo over
 * the regression law; both are returned for the inequality audit.
 */
inline ProdMomentBound prod_moment_bound(const GaussianVectorModel& joint,
                                         const std::vector<int>& x_indices,
                                         const Eigen::VectorXd& mu,
                                         long long samples,
                                         std::uint64_t seed) {
  const int n_total = joint.dim();
  const int n = int(x_indices.size());
  if (n < 1) throw SpecMismatchError("prod moment: empty X block");
  if (samples < 2) throw OutOfRangeError("prod moment: need >= 2 samples");
  std::vector<std::uint8_t> is_x(std::size_t(n_total), 0);
  for (int idx : x_indices) {
    if (idx < 0 || idx >= n_total)
      throw OutOfRangeError("prod moment: index out of range");
    if (is_x[std::size_t(idx)])
      throw SpecMismatchError("prod moment: repeated index");
    is_x[std::size_t(idx)] = 1;
  }
  std::vector<int> y_indices;
  for (int k = 0; k < n_total; ++k)
    if (!is_x[std::size_t(k)]) y_indices.push_back(k);
  if (int(y_indices.size()) != mu.size())
    throw SpecMismatchError("prod moment: observation size mismatch");

  const GaussianVectorModel cond = regression(joint, y_indices, mu);
  const ModelSampler cs(cond);
  CounterRng rng(seed, 0, stream::vectors);
  double mean = 0.0, m2 = 0.0;
  for (long long k = 0; k < samples; ++k) {
    const Eigen::VectorXd z = cs.sample(rng);
    double prod = 1.0;
    for (int r = 0; r < n; ++r) prod *= std::abs(z[r]);
    const double d = prod - mean;
    mean += d / double(k + 1);
    m2 += d * (prod - mean);
  }
  const double se =
      std::sqrt(m2 / double(samples - 1) / double(samples));

  const int no = int(y_indices.size());
  double big = 0.0;
  for (int r = 0; r < n; ++r)
    big = std::max(big, std::sqrt(joint.cov(x_indices[std::size_t(r)],
                                            x_indices[std::size_t(r)])));
  if (no > 0) {
    Eigen::MatrixXd D(no, no), B(n, no);
    for (int r = 0; r < no; ++r)
      for (int c = 0; c < no; ++c)
        D(r, c) = joint.cov(y_indices[std::size_t(r)],
                            y_indices[std::size_t(c)]);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < no; ++c)
        B(r, c) = joint.cov(x_indices[std::size_t(r)],
                            y_indices[std::size_t(c)]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin >= 1e12)
      throw DegenerateConditioningError(
          "prod moment: observed block is singular or ill-conditioned");
    const Eigen::MatrixXd dinv =
        es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < no; ++k)
        for (int j = 0; j < no; ++j)
          big = std::max(big, std::abs(B(r, k) * dinv(k, j) * mu[j]));
  }
  double factorial = 1.0;
  for (int k = 2; k <= n; ++k) factorial *= k;
  const double cn = double(n) * double(n) * std::ldexp(1.0, n) * factorial;
  return ProdMomentBound{McEstimate{mean, se, samples},
                         cn * std::pow(big, n)};
}

// --- Expected zero counts --------------------------------------------------

namespace detail {

inline double binomial(int n, int k) {
  double out = 1.0;
  for (int j = 1; j <= k; ++j) out *= double(n - k + j) / double(j);
  return out;
}

// Cov(d_{u}^a f(z1), d_{v}^b f(z2)) for directional derivatives along unit
// vectors u and v, expanded multinomially over axis partial derivatives.
inline double directional_cov(const Kernel& kernel, int a, double ux,
                              double uy, int b, double vx, double vy,
                              double dx, double dy) {
  double total = 0.0;
  for (int p = 0; p <= a; ++p) {
    const double cu = binomial(a, p) * std::pow(ux, p) *
                      std::pow(uy, a - p);
    if (cu == 0.0) continue;
    for (int r = 0; r <= b; ++r) {
      const double cv = binomial(b, r) * std::pow(vx, r) *
                        std::pow(vy, b - r);
      if (cv == 0.0) continue;
      total += cu * cv *
               kernel.deriv_covariance(MultiIndex{p, a - p},
                                       MultiIndex{r, b - r}, dx, dy);
    }
  }
  return total;
}

}  // namespace detail

/**
 * Expected number of zeros over a length-L segment of the derivative
 * process of the field along a unit direction (shift 0: the field itself;
 * shift 1: its first directional derivative). Stationarity reduces the
 * count to L/pi times sqrt of the ratio of consecutive spectral moments.
 */
inline double kac_rice_zeros(const Kernel& kernel, double ux, double uy,
                             double length, int shift) {
  if (std::abs(std::hypot(ux, uy) - 1.0) > 1e-9)
    throw SpecMismatchError("kac_rice: direction must be a unit vector");
  if (shift < 0 || shift > 1)
    throw UnsupportedOrderError("kac_rice: derivative shift must be 0 or 1");
  if (!(length >= 0))
    throw OutOfRangeError("kac_rice: length must be nonnegative");
  const double var =
      detail::directional_cov(kernel, shift, ux, uy, shift, ux, uy, 0, 0);
  const double curv =
      -detail::directional_cov(kernel, shift, ux, uy, shift + 2, ux, uy, 0,
                               0);
  if (!(var > 0.0) || !(curv > 0.0))
    throw DegenerateConditioningError("kac_rice: degenerate process");
  return length * std::sqrt(curv / var) / std::numbers::pi;
}

/**
 * Expected number of zero pairs over two segments: the segment from
 * (a1x,a1y) along unit (u1x,u1y) of length L1 crossed with the second one.
 * The two-point Rice density is integrated by tensor Gauss-Legendre; the
 * conditional absolute moment of the two slope variables given both levels
 * zero has the closed bivariate form (2/pi) s1 s2 (sqrt(1-rho^2) +
 * rho asin rho).
 */
inline double kac_rice_zero_pairs(const Kernel& kernel, double a1x,
                                  double a1y, double u1x, double u1y,
                                  double length1, int shift1, double a2x,
                                  double a2y, double u2x, double u2y,
                                  double length2, int shift2, int nodes) {
  if (std::abs(std::hypot(u1x, u1y) - 1.0) > 1e-9 ||
      std::abs(std::hypot(u2x, u2y) - 1.0) > 1e-9)
    throw SpecMismatchError("kac_rice: directions must be unit vectors");
  if (shift1 < 0 || shift2 < 0 || shift1 + shift2 > 2)
    throw UnsupportedOrderError(
        "kac_rice pairs: combined derivative order too high");
  if (!(length1 >= 0) || !(length2 >= 0))
    throw OutOfRangeError("kac_rice: lengths must be nonnegative");
  if (nodes < 1) throw OutOfRangeError("kac_rice: need quadrature nodes");
  if (length1 == 0.0 || length2 == 0.0) return 0.0;

  const auto& gl = detail::gauss_legendre(nodes);
  const auto dc = [&](int a, double ux, double uy, int b, double vx,
                      double vy, double dx, double dy) {
    return detail::directional_cov(kernel, a, ux, uy, b, vx, vy, dx, dy);
  };

  double total = 0.0;
  for (int is = 0; is < nodes; ++is) {
    const double s = 0.5 * length1 * (gl.x[std::size_t(is)] + 1.0);
    const double ws = 0.5 * length1 * gl.w[std::size_t(is)];
    for (int it = 0; it < nodes; ++it) {
      const double t = 0.5 * length2 * (gl.x[std::size_t(it)] + 1.0);
      const double wt = 0.5 * length2 * gl.w[std::size_t(it)];
      const double dx = (a2x + t * u2x) - (a1x + s * u1x);
      const double dy = (a2y + t * u2y) - (a1y + s * u1y);

      // joint law of (level1, level2, slope1, slope2)
      Eigen::MatrixXd cov(4, 4);
      cov(0, 0) = dc(shift1, u1x, u1y, shift1, u1x, u1y, 0, 0);
      cov(1, 1) = dc(shift2, u2x, u2y, shift2, u2x, u2y, 0, 0);
      cov(0, 1) = cov(1, 0) =
          dc(shift1, u1x, u1y, shift2, u2x, u2y, dx, dy);
      cov(2, 2) = dc(shift1 + 1, u1x, u1y, shift1 + 1, u1x, u1y, 0, 0);
      cov(3, 3) = dc(shift2 + 1, u2x, u2y, shift2 + 1, u2x, u2y, 0, 0);
      cov(2, 3) = cov(3, 2) =
          dc(shift1 + 1, u1x, u1y, shift2 + 1, u2x, u2y, dx, dy);
      cov(0, 2) = cov(2, 0) =
          dc(shift1, u1x, u1y, shift1 + 1, u1x, u1y, 0, 0);
      cov(0, 3) = cov(3, 0) =
          dc(shift1, u1x, u1y, shift2 + 1, u2x, u2y, dx, dy);
      cov(1, 2) = cov(2, 1) =
          dc(shift2, u2x, u2y, shift1 + 1, u1x, u1y, -dx, -dy);
      cov(1, 3) = cov(3, 1) =
          dc(shift2, u2x, u2y, shift2 + 1, u2x, u2y, 0, 0);

      const double det2 =
          cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
      if (!(det2 > 0.0))
        throw DegenerateConditioningError(
            "kac_rice pairs: degenerate level pair");
      const double density =
          1.0 / (2.0 * std::numbers::pi * std::sqrt(det2));

      Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
      const GaussianVectorModel cond = regression(
          GaussianVectorModel{Eigen::VectorXd::Zero(4), cov}, {0, 1}, zero);
      const double s1 = std::sqrt(std::max(0.0, cond.cov(0, 0)));
      const double s2 = std::sqrt(std::max(0.0, cond.cov(1, 1)));
      if (!(s1 > 0.0) || !(s2 > 0.0))
        throw DegenerateConditioningError(
            "kac_rice pairs: degenerate slope pair");
      double rho = cond.cov(0, 1) / (s1 * s2);
      rho = std::clamp(rho, -1.0, 1.0);
      const double moment =
          (2.0 / std::numbers::pi) * s1 * s2 *
          (std::sqrt(std::max(0.0, 1.0 - rho * rho)) +
           rho * std::asin(rho));
      total += ws * wt * density * moment;
    }
  }
  return total;
}

}  // namespace nrsw
