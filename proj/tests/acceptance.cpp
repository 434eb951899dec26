// Acceptance suite: one line per criterion, exit 0 only if all pass.
// Optionally pass criterion numbers to run a subset: ./acceptance 2 7

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nrsw/nrsw.hpp>

using namespace nrsw;

namespace {

struct Checker {
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  template <class... Args>
  void expectf(bool ok, const char* fmt, Args... args) {
    if (ok) return;
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    failures.emplace_back(buf);
  }
};

std::vector<ResultRecord> pick(const std::vector<ResultRecord>& records,
                               const std::string& experiment) {
  std::vector<ResultRecord> out;
  for (const auto& r : records)
    if (r.experiment == experiment) out.push_back(r);
  return out;
}

ExperimentConfig base_config(const std::string& experiment,
                             std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.seed = seed;
  return cfg;
}

Eigen::MatrixXd random_corr(CounterRng& rng, int n) {
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.next_normal();
  Eigen::MatrixXd cov = g * g.transpose();
  const Eigen::VectorXd d = cov.diagonal().cwiseSqrt();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cov(i, j) /= d[i] * d[j];
  return 0.9 * cov + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

// c1: duality audit must hold in every sample at every level and aspect
void c01(Checker& c) {
  ExperimentConfig cfg = base_config("duality-audit", 1);
  cfg.s_values = {8};
  cfg.replicas = 500;
  const auto recs = run_experiment(cfg);
  c.expectf(recs.size() == 6, "expected 6 audit records, got %zu",
            recs.size());
  for (const auto& r : recs)
    c.expectf(r.estimate == 1.0, "duality rate %.6f at p=%g rho=%g",
              r.estimate, r.p, r.param2);
}

// c2: self-dual square crossing probability is 1/2 for both kernels
void c02(Checker& c) {
  for (const char* family : {"bargmann_fock", "cauchy"}) {
    ExperimentConfig cfg = base_config("crossing", 2);
    cfg.kernel.family = family;
    cfg.rho = 1.0;
    cfg.s_values = {4, 8, 16};
    const auto recs = pick(run_experiment(cfg), "crossing");
    c.expectf(recs.size() == 3, "%s: expected 3 records", family);
    for (const auto& r : recs)
      c.expectf(std::abs(r.estimate - 0.5) <= 0.024,
                "%s s=%g: phat %.4f off 0.5 by more than 0.024", family,
                r.param1, r.estimate);
  }
}

// c3: increasing crossing events are positively associated
void c03(Checker& c) {
  ExperimentConfig cfg = base_config("fkg", 3);
  cfg.s_values = {4};
  const auto recs = pick(run_experiment(cfg), "fkg");
  c.expectf(recs.size() == 3, "expected 3 event pairs, got %zu", recs.size());
  for (const auto& r : recs)
    c.expectf(r.estimate >= -3.0 * r.std_error,
              "pair %g: gap %.5f below -3se %.5f", r.param1, r.estimate,
              -3.0 * r.std_error);
}

// c4: long-direction crossings of a 2:1 rectangle stay above a fixed floor
void c04(Checker& c) {
  ExperimentConfig cfg = base_config("crossing", 4);
  const auto recs = pick(run_experiment(cfg), "crossing");
  c.expectf(recs.size() == 4, "expected 4 records, got %zu", recs.size());
  for (const auto& r : recs)
    c.expectf(r.estimate >= 0.05, "s=%g: phat %.4f under the 0.05 floor",
              r.param1, r.estimate);
}

// c5: crossing estimates are stable across the mesh grid
void c05(Checker& c) {
  ExperimentConfig cfg = base_config("mesh-uniformity", 5);
  cfg.s_values = {4};
  const auto recs = pick(run_experiment(cfg), "mesh-uniformity");
  c.expectf(recs.size() == 8, "expected 8 records, got %zu", recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    c.expectf(r.estimate >= 0.05, "rho=%g eps=%g: phat %.4f under 0.05",
              r.param2, r.param1, r.estimate);
    if (i > 0 && recs[i - 1].param2 == r.param2) {
      const double tol =
          0.05 + 3.0 * std::hypot(recs[i - 1].std_error, r.std_error);
      c.expectf(std::abs(recs[i - 1].estimate - r.estimate) <= tol,
                "rho=%g eps %g->%g: jump %.4f over %.4f", r.param2,
                recs[i - 1].param1, r.param1,
                std::abs(recs[i - 1].estimate - r.estimate), tol);
    }
  }
}

// c6: crossing correlations die off with separation
void c06(Checker& c) {
  {
    ExperimentConfig cfg = base_config("qi-fields", 6);
    cfg.replicas = 20000;
    const auto recs = pick(run_experiment(cfg), "qi-fields");
    c.expectf(recs.size() == 4, "expected 4 distances, got %zu", recs.size());
    for (const auto& r : recs)
      if (r.param1 >= 12.0)
        c.expectf(r.estimate <= 0.012, "d=%g: |gap| %.5f over 0.012",
                  r.param1, r.estimate);
  }
  {
    ExperimentConfig cfg = base_config("qi-fields", 6);
    cfg.kernel.family = "cauchy";
    cfg.replicas = 20000;
    const auto recs = pick(run_experiment(cfg), "qi-fields");
    for (std::size_t i = 1; i < recs.size(); ++i) {
      const double tol =
          3.0 * std::hypot(recs[i - 1].std_error, recs[i].std_error);
      c.expectf(recs[i].estimate <= recs[i - 1].estimate + tol,
                "cauchy d=%g->%g: gap rose %.5f to %.5f (tol %.5f)",
                recs[i - 1].param1, recs[i].param1, recs[i - 1].estimate,
                recs[i].estimate, tol);
    }
  }
}

// c7: interpolation inequality, exact orthant control plus randomized models
void c07(Checker& c) {
  ExperimentConfig cfg = base_config("qi-vectors", 7);
  cfg.cases = 20;
  cfg.mc = 20000;
  const auto recs = run_experiment(cfg);
  const auto lhs = pick(recs, "qi-orthant-lhs");
  const auto rhs = pick(recs, "qi-orthant-rhs");
  c.expect(lhs.size() == 1 && rhs.size() == 1, "missing orthant control");
  if (!lhs.empty()) {
    c.expectf(std::abs(lhs[0].estimate - 1.0 / 12.0) <= 1e-12,
              "orthant lhs %.15f is not 1/12", lhs[0].estimate);
    c.expect(lhs[0].std_error == 0.0, "orthant lhs is not exact");
  }
  if (!rhs.empty()) {
    c.expectf(std::abs(rhs[0].estimate - 0.09188814923696535) <= 1e-3,
              "orthant rhs %.6f off the closed form", rhs[0].estimate);
    c.expect(lhs[0].estimate <= rhs[0].estimate, "orthant lhs exceeds rhs");
  }
  const auto margins = pick(recs, "qi-vectors");
  c.expectf(margins.size() == 20, "expected 20 cases, got %zu",
            margins.size());
  for (const auto& r : margins)
    c.expectf(r.estimate >= 0.0, "case %g: lhs exceeds rhs+3se by %.5f",
              r.param1, -r.estimate);
}

// c8: expected zero counts, closed form and simulation
void c08(Checker& c) {
  ExperimentConfig cfg = base_config("kac-rice", 8);
  cfg.replicas = 10000;
  const auto recs = run_experiment(cfg);
  const auto theory = pick(recs, "kac-rice-theory");
  const auto emp = pick(recs, "kac-rice-empirical");
  c.expect(theory.size() == 1 && emp.size() == 1, "missing records");
  if (!theory.empty())
    c.expectf(std::abs(theory[0].estimate - 1.0) <= 0.02,
              "pi-length rate %.5f off 1.0", theory[0].estimate);
  if (!emp.empty())
    c.expectf(std::abs(emp[0].estimate - 1.0) <= 3.0 * emp[0].std_error,
              "empirical %.4f +- %.4f misses 1.0", emp[0].estimate,
              emp[0].std_error);
  const double cr = kac_rice_zeros(Kernel::generalized_cauchy(3.0), 1.0, 0.0,
                                   1.0, 0);
  c.expectf(std::abs(cr - 0.7797) <= 0.02, "cauchy rate %.5f off 0.7797", cr);
}

// c9: density identities hold to 1e-6 on randomized instances
void c09(Checker& c) {
  CounterRng rng(9, 0, stream::vectors);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + int(rng.next() % 3);
    const Eigen::MatrixXd cov = random_corr(rng, n);
    Eigen::VectorXd x(n);
    for (int k = 0; k < n; ++k) x[k] = rng.next_normal();
    const int i = int(rng.next() % std::uint64_t(n - 1));
    const int j = i + 1 + int(rng.next() % std::uint64_t(n - 1 - i));
    const double res = heat_identity_residual(cov, x, i, j, 5e-5);
    c.expectf(res <= 1e-6, "heat rep %d: residual %.3e", rep, res);
  }
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + rep % 4;
    const Eigen::MatrixXd cov = random_corr(rng, n);
    Eigen::VectorXd q(n);
    for (int k = 0; k < n; ++k) q[k] = 2.0 * rng.next_unit() - 1.0;
    ThresholdEvent ev;
    do {
      ev = make_threshold_event(
          q, [&](std::uint32_t) { return rng.next_unit() < 0.5; });
    } while (event_ignores(ev, 0) && n == 1);
    const int i = int(rng.next() % std::uint64_t(n));
    const double res = threshold_identity_residual(cov, ev, i);
    c.expectf(res <= 1e-6, "threshold rep %d (n=%d): residual %.3e", rep, n,
              res);
  }
}

// c10: nodal component density stabilizes and its spread tightens
void c10(Checker& c) {
  ExperimentConfig cfg = base_config("ns-density", 10);
  cfg.epsilon = 0.2;
  cfg.s_values = {10, 20, 40};
  cfg.replicas = 400;
  const auto recs = pick(run_experiment(cfg), "ns-density");
  c.expectf(recs.size() == 3, "expected 3 records, got %zu", recs.size());
  if (recs.size() == 3) {
    const double c20 = recs[1].estimate, c40 = recs[2].estimate;
    c.expectf(std::abs(c40 - c20) <= 0.1 * c40,
              "density drift |%.4f - %.4f| over 10%% of %.4f", c40, c20, c40);
    c.expectf(recs[0].param2 > recs[1].param2 &&
                  recs[1].param2 > recs[2].param2,
              "sd not strictly decreasing: %.4f, %.4f, %.4f", recs[0].param2,
              recs[1].param2, recs[2].param2);
  }
}

// c11: the lower density tail thins out with scale
void c11(Checker& c) {
  ExperimentConfig cfg = base_config("concentration", 11);
  cfg.epsilon = 0.2;
  cfg.s_values = {10, 20, 40};
  cfg.replicas = 400;
  const auto recs = pick(run_experiment(cfg), "concentration");
  c.expectf(recs.size() == 3, "expected 3 records, got %zu", recs.size());
  if (recs.size() == 3) {
    c.expectf(recs[0].estimate >= recs[1].estimate &&
                  recs[1].estimate >= recs[2].estimate,
              "tail not nonincreasing: %.4f, %.4f, %.4f", recs[0].estimate,
              recs[1].estimate, recs[2].estimate);
    c.expectf(recs[2].estimate <= 0.05, "tail at s=40 is %.4f over 0.05",
              recs[2].estimate);
  }
}

// c12: one-arm probabilities decay with a positive fitted exponent
void c12(Checker& c) {
  ExperimentConfig cfg = base_config("one-arm", 12);
  cfg.replicas = 8000;
  const auto recs = run_experiment(cfg);
  const auto arms = pick(recs, "one-arm");
  c.expectf(arms.size() == 4, "expected 4 scales, got %zu", arms.size());
  for (std::size_t i = 1; i < arms.size(); ++i) {
    const double drop = arms[i - 1].estimate - arms[i].estimate;
    const double tol =
        3.0 * std::hypot(arms[i - 1].std_error, arms[i].std_error);
    c.expectf(drop > tol, "s=%g->%g: drop %.4f not beyond 3se %.4f",
              arms[i - 1].param1, arms[i].param1, drop, tol);
  }
  const auto eta = pick(recs, "one-arm-eta");
  c.expect(eta.size() == 1, "missing exponent fit");
  if (!eta.empty())
    c.expectf(eta[0].estimate > 1.645 * eta[0].std_error,
              "eta %.4f +- %.4f not positive at 95%%", eta[0].estimate,
              eta[0].std_error);
}

// c13: four-alternation density scales like a power between 1.5 and 2.5
void c13(Checker& c) {
  ExperimentConfig cfg = base_config("pivotal-scaling", 13);
  cfg.s_values = {4};
  const auto slope = pick(run_experiment(cfg), "pivotal-alt4-slope");
  c.expect(slope.size() == 1, "missing slope record");
  if (!slope.empty())
    c.expectf(slope[0].estimate >= 1.5 && slope[0].estimate <= 2.5,
              "alt4 slope %.3f outside [1.5, 2.5]", slope[0].estimate);
}

// c14: the nodal tracer counts synthetic circles exactly at every mesh
void c14(Checker& c) {
  const auto count_for = [&](double eps, auto&& fn) {
    const double half = eps / 2.0;
    const int nx = int(std::llround(7.2 / half)) + 1;
    const int ny = int(std::llround(4.0 / half)) + 1;
    FieldSample f;
    f.grid = make_grid(half, -3.6, -2.0, nx, ny);
    f.values.resize(std::size_t(nx) * ny);
    for (int ix = 0; ix < nx; ++ix)
      for (int iy = 0; iy < ny; ++iy)
        f.at(ix, iy) = fn(f.grid.x(ix), f.grid.y(iy));
    const EpsRegion rect = EpsRegion::rectangle(eps, -3, 3, -1.6, 1.6);
    return count_components(trace_nodal(f, eps, 0.0), rect);
  };
  const auto one = [](double x, double y) { return 1.0 - x * x - y * y; };
  const auto two = [](double x, double y) {
    return (1.0 - (x + 1.5) * (x + 1.5) - y * y) *
           (1.0 - (x - 1.5) * (x - 1.5) - y * y);
  };
  for (double eps : {0.2, 0.1, 0.05}) {
    const long long n1 = count_for(eps, one);
    const long long n2 = count_for(eps, two);
    c.expectf(n1 == 1, "eps=%g: circle count %lld != 1", eps, n1);
    c.expectf(n2 == 2, "eps=%g: two-circle count %lld != 2", eps, n2);
  }
}

// c15: sampled fields carry the requested covariance at small lags
void c15(Checker& c) {
  const std::vector<std::pair<int, int>> lags = {
      {0, 0}, {1, 0}, {2, 0}, {1, 1}};
  for (const char* family : {"bargmann_fock", "cauchy"}) {
    const Kernel kernel = family == std::string("bargmann_fock")
                              ? Kernel::bargmann_fock()
                              : Kernel::generalized_cauchy(3.0);
    const GridSpec grid = make_grid(0.5, 0, 0, 33, 33);
    const CirculantSampler sampler(kernel, grid);
    std::vector<FieldSample> samples;
    samples.reserve(2000);
    for (int k = 0; k < 2000; ++k)
      samples.push_back(sampler.sample(15, std::uint64_t(k)));
    for (const LagEstimate& lag : empirical_covariance(samples, lags)) {
      const double truth = kernel.evaluate(0.5 * lag.dx, 0.5 * lag.dy);
      c.expectf(std::abs(lag.estimate - truth) <= 3.0 * lag.std_error,
                "%s lag (%d,%d): %.4f vs %.4f (3se %.4f)", family, lag.dx,
                lag.dy, lag.estimate, truth, 3.0 * lag.std_error);
    }
  }
}

struct Criterion {
  int id;
  const char* label;
  std::function<void(Checker&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));

  const std::vector<Criterion> criteria = {
      {1, "exact crossing duality", c01},
      {2, "square crossing at one half", c02},
      {3, "positive association", c03},
      {4, "rectangle crossing floor", c04},
      {5, "mesh uniformity", c05},
      {6, "crossing decorrelation", c06},
      {7, "interpolation inequality", c07},
      {8, "zero count rates", c08},
      {9, "density identities", c09},
      {10, "component density stability", c10},
      {11, "lower tail concentration", c11},
      {12, "one-arm decay", c12},
      {13, "four-alternation scaling", c13},
      {14, "nodal tracer oracle", c14},
      {15, "sampler covariance fidelity", c15},
  };

  int failed = 0, ran = 0;
  for (const auto& crit : criteria) {
    if (!only.empty() && !only.count(crit.id)) continue;
    ++ran;
    Checker checker;
    const auto start = std::chrono::steady_clock::now();
    try {
      crit.fn(checker);
    } catch (const std::exception& e) {
      checker.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start)
            .count();
    if (checker.failures.empty()) {
      std::printf("c%02d PASS %-32s [%.1fs]\n", crit.id, crit.label, secs);
    } else {
      ++failed;
      std::printf("c%02d FAIL %-32s [%.1fs]\n", crit.id, crit.label, secs);
      for (const auto& f : checker.failures)
        std::printf("     - %s\n", f.c_str());
    }
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
