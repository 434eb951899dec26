#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <climits>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nrsw/detail/parallel.hpp>
#include <nrsw/detail/sha256.hpp>
#include <nrsw/errors.hpp>
#include <nrsw/events.hpp>
#include <nrsw/gaussian.hpp>
#include <nrsw/kernels.hpp>
#include <nrsw/lattice.hpp>
#include <nrsw/rng.hpp>
#include <nrsw/sampler.hpp>

namespace nrsw {

inline constexpr const char* kToolVersion = "1.0.0";

// --- Configuration -----------------------------------------------------------

struct KernelConfig {
  std::string family = "bargmann_fock";  // bargmann_fock | cauchy
  double beta = 3.0;                     // cauchy only
};

/**
 * One experiment invocation. Fields beyond (experiment, kernel, epsilon, p,
 * replicas, seed, threads, out) are geometry knobs that individual runners
 * consume as documented on each run_* function; unused knobs are ignored but
 * still participate in the config hash.
 */
struct ExperimentConfig {
  std::string experiment;
  KernelConfig kernel;
  double epsilon = 0.25;
  double p = 0.0;
  std::vector<double> s_values = {4, 8, 16, 32};
  double rho = 2.0;   // rectangle aspect: [0, rho*s] x [0, s]
  double r = 1.0;     // arm event inner radius
  std::vector<double> d_values = {5, 10, 15, 20};
  std::vector<double> eps_values;  // empty: per-experiment default grid
  std::vector<double> p_values = {-0.5, 0.0, 0.5};
  double alpha_step = 0.5;
  double tail_eps = 0.2;  // relative density deficit for the lower tail
  double length = 0.0;    // line length for kac-rice; 0 = kernel default
  int cases = 20;         // randomized model count for qi-vectors
  int mc = 20000;         // Monte Carlo samples per vector-model estimate
  long long replicas = 4000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  std::string out;  // output directory; empty = no files
  bool plot = false;
  std::string format = "csv";  // csv | json
};

inline KernelConfig parse_kernel_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("kernel: expected an object");
  KernelConfig kc;
  for (const auto& [key, value] : j.items()) {
    if (key == "family")
      kc.family = value.get<std::string>();
    else if (key == "beta")
      kc.beta = value.get<double>();
    else
      throw ConfigError("unknown kernel config key: " + key);
  }
  if (kc.family != "bargmann_fock" && kc.family != "cauchy")
    throw ConfigError("unknown kernel family: " + kc.family);
  if (!(kc.beta > 0)) throw ConfigError("kernel beta must be positive");
  return kc;
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (!(cfg.epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (cfg.replicas < 1) throw ConfigError("replicas must be >= 1");
  if (cfg.threads < 0) throw ConfigError("threads must be >= 0");
  if (cfg.cases < 1) throw ConfigError("cases must be >= 1");
  if (cfg.mc < 1) throw ConfigError("mc must be >= 1");
  if (!(cfg.rho > 0)) throw ConfigError("rho must be positive");
  if (!(cfg.r > 0)) throw ConfigError("r must be positive");
  if (!(cfg.alpha_step > 0)) throw ConfigError("alpha_step must be positive");
  if (!(cfg.tail_eps > 0 && cfg.tail_eps < 1))
    throw ConfigError("tail_eps must lie in (0,1)");
  if (!(cfg.length >= 0)) throw ConfigError("length must be nonnegative");
  if (cfg.s_values.empty()) throw ConfigError("s_values must be nonempty");
  for (double s : cfg.s_values)
    if (!(s > 0)) throw ConfigError("s_values must be positive");
  for (double d : cfg.d_values)
    if (!(d > 0)) throw ConfigError("d_values must be positive");
  for (double e : cfg.eps_values)
    if (!(e > 0)) throw ConfigError("eps_values must be positive");
  if (cfg.format != "csv" && cfg.format != "json")
    throw ConfigError("format must be csv or json");
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "experiment")
        cfg.experiment = value.get<std::string>();
      else if (key == "kernel")
        cfg.kernel = parse_kernel_config(value);
      else if (key == "epsilon")
        cfg.epsilon = value.get<double>();
      else if (key == "p")
        cfg.p = value.get<double>();
      else if (key == "s_values")
        cfg.s_values = value.get<std::vector<double>>();
      else if (key == "rho")
        cfg.rho = value.get<double>();
      else if (key == "r")
        cfg.r = value.get<double>();
      else if (key == "d_values")
        cfg.d_values = value.get<std::vector<double>>();
      else if (key == "eps_values")
        cfg.eps_values = value.get<std::vector<double>>();
      else if (key == "p_values")
        cfg.p_values = value.get<std::vector<double>>();
      else if (key == "alpha_step")
        cfg.alpha_step = value.get<double>();
      else if (key == "tail_eps")
        cfg.tail_eps = value.get<double>();
      else if (key == "length")
        cfg.length = value.get<double>();
      else if (key == "cases")
        cfg.cases = value.get<int>();
      else if (key == "mc")
        cfg.mc = value.get<int>();
      else if (key == "replicas")
        cfg.replicas = value.get<long long>();
      else if (key == "seed")
        cfg.seed = value.get<std::uint64_t>();
      else if (key == "threads")
        cfg.threads = value.get<int>();
      else if (key == "out")
        cfg.out = value.get<std::string>();
      else if (key == "plot")
        cfg.plot = value.get<bool>();
      else if (key == "format")
        cfg.format = value.get<std::string>();
      else
        throw ConfigError("unknown config key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

inline Kernel make_kernel(const KernelConfig& kc) {
  if (kc.family == "bargmann_fock") return Kernel::bargmann_fock();
  if (kc.family == "cauchy") return Kernel::generalized_cauchy(kc.beta);
  throw ConfigError("unknown kernel family: " + kc.family);
}

// Canonical form: every effective field materialized, keys sorted by the
// JSON object representation, compact dump. The hash identifies a run's
// inputs independently of how sparse the config file was.
inline nlohmann::json canonical_config(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = cfg.experiment;
  j["kernel"] = {{"family", cfg.kernel.family}, {"beta", cfg.kernel.beta}};
  j["epsilon"] = cfg.epsilon;
  j["p"] = cfg.p;
  j["s_values"] = cfg.s_values;
  j["rho"] = cfg.rho;
  j["r"] = cfg.r;
  j["d_values"] = cfg.d_values;
  j["eps_values"] = cfg.eps_values;
  j["p_values"] = cfg.p_values;
  j["alpha_step"] = cfg.alpha_step;
  j["tail_eps"] = cfg.tail_eps;
  j["length"] = cfg.length;
  j["cases"] = cfg.cases;
  j["mc"] = cfg.mc;
  j["replicas"] = cfg.replicas;
  j["seed"] = cfg.seed;
  j["format"] = cfg.format;
  return j;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  return detail::sha256_hex(canonical_config(cfg).dump());
}

// --- Result records ----------------------------------------------------------

struct ResultRecord {
  std::string experiment;
  std::string kernel;
  double epsilon = 0.0;
  double p = 0.0;
  double param1 = 0.0;
  double param2 = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  long long n = 0;
  std::uint64_t seed = 0;
  double elapsed_ms = 0.0;
  std::string config_hash;
};

namespace detail {

inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline double binomial_se(double phat, long long n) {
  return std::sqrt(std::max(0.0, phat * (1.0 - phat) / double(n)));
}

// Standard error of p11 - (p11+p10)(p11+p01) from joint indicator counts
// (multinomial delta method).
inline double covariance_gap_se(long long n11, long long n10, long long n01,
                                long long n) {
  const double p11 = double(n11) / double(n);
  const double p10 = double(n10) / double(n);
  const double p01 = double(n01) / double(n);
  const double pa = p11 + p10, pb = p11 + p01;
  const double g11 = 1.0 - pa - pb, g10 = -pb, g01 = -pa;
  const double mean = g11 * p11 + g10 * p10 + g01 * p01;
  const double var =
      g11 * g11 * p11 + g10 * g10 * p10 + g01 * g01 * p01 - mean * mean;
  return std::sqrt(std::max(0.0, var / double(n)));
}

// Standard error of p_a - p_b when both indicators come from the same sample.
inline double paired_diff_se(long long na, long long nb, long long nab,
                             long long n) {
  const double pa = double(na) / double(n);
  const double pb = double(nb) / double(n);
  const double pab = double(nab) / double(n);
  const double var = pa + pb - 2.0 * pab - (pa - pb) * (pa - pb);
  return std::sqrt(std::max(0.0, var / double(n)));
}

struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n-1)
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  long double sum = 0.0L;
  for (double x : xs) sum += x;
  out.mean = double(sum / xs.size());
  if (xs.size() < 2) return out;
  long double ss = 0.0L;
  for (double x : xs) {
    const long double d = x - out.mean;
    ss += d * d;
  }
  out.sd = double(std::sqrt(ss / (xs.size() - 1)));
  return out;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
  }
};

// Least-squares line y = a + b x with per-point variances known a priori;
// slope uncertainty propagated from those variances, not from residuals.
struct LineFit {
  double slope = 0.0;
  double slope_se = 0.0;
  int points = 0;
};

inline LineFit fit_line(const std::vector<double>& x,
                        const std::vector<double>& y,
                        const std::vector<double>& yvar) {
  LineFit fit;
  fit.points = int(x.size());
  if (x.size() < 2) return fit;
  double xbar = 0.0;
  for (double v : x) xbar += v;
  xbar /= double(x.size());
  double sxx = 0.0, sxy = 0.0, varsum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - xbar;
    sxx += dx * dx;
    sxy += dx * y[k];
    varsum += dx * dx * yvar[k];
  }
  if (sxx <= 0) return fit;
  fit.slope = sxy / sxx;
  fit.slope_se = std::sqrt(std::max(0.0, varsum)) / sxx;
  return fit;
}

}  // namespace detail

inline std::string csv_string(const std::vector<ResultRecord>& records) {
  std::string out =
      "experiment,kernel,epsilon,p,param1,param2,estimate,stderr,n,seed,"
      "elapsed_ms\n";
  for (const auto& r : records) {
    out += r.experiment;
    out += ',';
    out += r.kernel;
    out += ',';
    out += detail::fmt_g(r.epsilon);
    out += ',';
    out += detail::fmt_g(r.p);
    out += ',';
    out += detail::fmt_g(r.param1);
    out += ',';
    out += detail::fmt_g(r.param2);
    out += ',';
    out += detail::fmt_g(r.estimate);
    out += ',';
    out += detail::fmt_g(r.std_error);
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += detail::fmt_g(r.elapsed_ms);
    out += '\n';
  }
  return out;
}

inline nlohmann::json records_json(const std::vector<ResultRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records)
    arr.push_back({{"experiment", r.experiment},
                   {"kernel", r.kernel},
                   {"epsilon", r.epsilon},
                   {"p", r.p},
                   {"param1", r.param1},
                   {"param2", r.param2},
                   {"estimate", r.estimate},
                   {"stderr", r.std_error},
                   {"n", r.n},
                   {"seed", r.seed},
                   {"elapsed_ms", r.elapsed_ms},
                   {"config_hash", r.config_hash}});
  return arr;
}

namespace detail {

inline std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << content;
}

}  // namespace detail

/**
 * Minimal SVG scatter/line plot of (x, estimate) with +-1.96 stderr bars.
 * Auxiliary artifact only; no external assets.
 */
inline std::string svg_plot(const std::string& title, const std::string& xlabel,
                            const std::string& ylabel,
                            const std::vector<std::array<double, 3>>& pts) {
  const double width = 640, height = 420;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!pts.empty()) {
    xmin = xmax = pts[0][0];
    ymin = pts[0][1] - 1.96 * pts[0][2];
    ymax = pts[0][1] + 1.96 * pts[0][2];
    for (const auto& p : pts) {
      xmin = std::min(xmin, p[0]);
      xmax = std::max(xmax, p[0]);
      ymin = std::min(ymin, p[1] - 1.96 * p[2]);
      ymax = std::max(ymax, p[1] + 1.96 * p[2]);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double xpad = 0.06 * (xmax - xmin), ypad = 0.08 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;
  const auto sx = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  const auto sy = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"420\" viewBox=\"0 0 640 420\">\n";
  svg += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  const auto line = [&](double x1, double y1, double x2, double y2,
                        const char* stroke) {
    svg += "<line x1=\"" + detail::fmt_g(x1) + "\" y1=\"" + detail::fmt_g(y1) +
           "\" x2=\"" + detail::fmt_g(x2) + "\" y2=\"" + detail::fmt_g(y2) +
           "\" stroke=\"" + stroke + "\"/>\n";
  };
  line(ml, mt, ml, height - mb, "black");
  line(ml, height - mb, width - mr, height - mb, "black");
  const auto text = [&](double x, double y, const std::string& s,
                        const char* anchor) {
    svg += "<text x=\"" + detail::fmt_g(x) + "\" y=\"" + detail::fmt_g(y) +
           "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"" +
           anchor + "\">" + s + "</text>\n";
  };
  text(width / 2, 20, title, "middle");
  text(width / 2, height - 12, xlabel, "middle");
  text(14, mt - 10, ylabel, "start");
  text(ml, height - mb + 16, detail::fmt_g(xmin + xpad), "middle");
  text(width - mr, height - mb + 16, detail::fmt_g(xmax - xpad), "middle");
  text(ml - 6, height - mb, detail::fmt_g(ymin + ypad), "end");
  text(ml - 6, mt + 8, detail::fmt_g(ymax - ypad), "end");
  std::string poly;
  for (const auto& p : pts)
    poly += detail::fmt_g(sx(p[0])) + "," + detail::fmt_g(sy(p[1])) + " ";
  if (pts.size() > 1)
    svg += "<polyline fill=\"none\" stroke=\"#336699\" points=\"" + poly +
           "\"/>\n";
  for (const auto& p : pts) {
    line(sx(p[0]), sy(p[1] - 1.96 * p[2]), sx(p[0]), sy(p[1] + 1.96 * p[2]),
         "#336699");
    svg += "<circle cx=\"" + detail::fmt_g(sx(p[0])) + "\" cy=\"" +
           detail::fmt_g(sy(p[1])) + "\" r=\"3\" fill=\"#336699\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// --- Runners -------------------------------------------------------------

namespace detail {

// Shared per-runner context: kernel, its display name, and the config hash.
struct RunContext {
  Kernel kernel;
  std::string kname;
  std::string hash;
  explicit RunContext(const ExperimentConfig& cfg)
      : kernel(make_kernel(cfg.kernel)),
        kname(kernel.name()),
        hash(config_hash(cfg)) {}
};

// Grid with spacing eps/2 covering [x0,x1] x [y0,y1]; bounds must be
// eps-multiples so the window is lattice-drawn.
inline GridSpec window_grid(double eps, double x0, double x1, double y0,
                            double y1) {
  const double step = eps / 2.0;
  const int nx = int(std::llround((x1 - x0) / step)) + 1;
  const int ny = int(std::llround((y1 - y0) / step)) + 1;
  return make_grid(step, x0, y0, nx, ny);
}

}  // namespace detail

/**
 * Crossing probability of [0, rho*s] x [0, s] (black, left-right) per s,
 * with a per-sample duality audit on the same rectangles.
 */
inline std::vector<ResultRecord> run_crossing(const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  std::vector<ResultRecord> records;
  for (double s : cfg.s_values) {
    detail::Timer timer;
    const double w = cfg.rho * s;
    const GridSpec grid = detail::window_grid(cfg.epsilon, 0, w, 0, s);
    const CirculantSampler sampler(ctx.kernel, grid);
    const EpsRegion rect = EpsRegion::rectangle(cfg.epsilon, 0, w, 0, s);
    std::vector<std::uint8_t> crossed(std::size_t(cfg.replicas));
    std::vector<std::uint8_t> dual(std::size_t(cfg.replicas));
    detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
      const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
      const Coloring col = color_field(f, cfg.epsilon, cfg.p);
      crossed[std::size_t(k)] =
          crossing(col, rect, Direction::LeftRight, Side::Above);
      dual[std::size_t(k)] = duality_holds(col, rect);
    });
    long long nc = 0, nd = 0;
    for (long long k = 0; k < cfg.replicas; ++k) {
      nc += crossed[std::size_t(k)];
      nd += dual[std::size_t(k)];
    }
    const double phat = double(nc) / double(cfg.replicas);
    const double dhat = double(nd) / double(cfg.replicas);
    const double elapsed = timer.ms();
    records.push_back({"crossing", ctx.kname, cfg.epsilon, cfg.p, s, cfg.rho,
                       phat, detail::binomial_se(phat, cfg.replicas),
                       cfg.replicas, cfg.seed, elapsed, ctx.hash});
    records.push_back({"crossing-duality", ctx.kname, cfg.epsilon, cfg.p, s,
                       cfg.rho, dhat, detail::binomial_se(dhat, cfg.replicas),
                       cfg.replicas, cfg.seed, elapsed, ctx.hash});
  }
  return records;
}

/**
 * Positive association of increasing crossing events: three overlapping
 * rectangle pairs at side s = s_values.front(); reports
 * p[A and B] - p[A]p[B] with its delta-method standard error.
 */
inline std::vector<ResultRecord> run_fkg(const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  const double s = cfg.s_values.front();
  const double w = 1.5 * s;
  const GridSpec grid = detail::window_grid(cfg.epsilon, 0, w, 0, w);
  const CirculantSampler sampler(ctx.kernel, grid);
  const EpsRegion square = EpsRegion::rectangle(cfg.epsilon, 0, s, 0, s);
  const EpsRegion right =
      EpsRegion::rectangle(cfg.epsilon, 0.5 * s, 1.5 * s, 0, s);
  const EpsRegion upper =
      EpsRegion::rectangle(cfg.epsilon, 0, s, 0.5 * s, 1.5 * s);
  struct Pair {
    EpsRegion a_rect, b_rect;
    Direction a_dir, b_dir;
  };
  const std::array<Pair, 3> pairs = {
      Pair{square, square, Direction::LeftRight, Direction::TopBottom},
      Pair{square, right, Direction::LeftRight, Direction::LeftRight},
      Pair{square, upper, Direction::LeftRight, Direction::TopBottom}};
  detail::Timer timer;
  std::vector<std::array<std::uint8_t, 3>> amask(std::size_t(cfg.replicas));
  std::vector<std::array<std::uint8_t, 3>> bmask(std::size_t(cfg.replicas));
  detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
    const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
    const Coloring col = color_field(f, cfg.epsilon, cfg.p);
    for (int i = 0; i < 3; ++i) {
      amask[std::size_t(k)][std::size_t(i)] =
          crossing(col, pairs[std::size_t(i)].a_rect,
                   pairs[std::size_t(i)].a_dir, Side::Above);
      bmask[std::size_t(k)][std::size_t(i)] =
          crossing(col, pairs[std::size_t(i)].b_rect,
                   pairs[std::size_t(i)].b_dir, Side::Above);
    }
  });
  const double elapsed = timer.ms();
  std::vector<ResultRecord> records;
  for (int i = 0; i < 3; ++i) {
    long long n11 = 0, n10 = 0, n01 = 0;
    for (long long k = 0; k < cfg.replicas; ++k) {
      const bool a = amask[std::size_t(k)][std::size_t(i)];
      const bool b = bmask[std::size_t(k)][std::size_t(i)];
      n11 += a && b;
      n10 += a && !b;
      n01 += !a && b;
    }
    const double pa = double(n11 + n10) / double(cfg.replicas);
    const double pb = double(n11 + n01) / double(cfg.replicas);
    const double gap = double(n11) / double(cfg.replicas) - pa * pb;
    records.push_back({"fkg", ctx.kname, cfg.epsilon, cfg.p, double(i + 1), s,
                       gap,
                       detail::covariance_gap_se(n11, n10, n01, cfg.replicas),
                       cfg.replicas, cfg.seed, elapsed, ctx.hash});
  }
  return records;
}

/**
 * Quasi-independence decay over distance: A = left-right crossing of [0,5]^2,
 * B = left-right crossing of [d,d+5] x [0,5]; reports |p[AB]-p[A]p[B]| per d
 * plus the covariance ceiling eta(d) and the decay-shape reference
 * eta/sqrt(1-eta^2) (1+|p|)^4 exp(-p^2) (unit constant).
 */
inline std::vector<ResultRecord> run_qi_decay(const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  std::vector<ResultRecord> records;
  for (double d : cfg.d_values) {
    detail::Timer timer;
    const GridSpec grid = detail::window_grid(cfg.epsilon, 0, d + 5, 0, 5);
    const CirculantSampler sampler(ctx.kernel, grid);
    const EpsRegion a_rect = EpsRegion::rectangle(cfg.epsilon, 0, 5, 0, 5);
    const EpsRegion b_rect =
        EpsRegion::rectangle(cfg.epsilon, d, d + 5, 0, 5);
    std::vector<std::array<std::uint8_t, 2>> hits(std::size_t(cfg.replicas));
    detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
      const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
      const Coloring col = color_field(f, cfg.epsilon, cfg.p);
      hits[std::size_t(k)][0] =
          crossing(col, a_rect, Direction::LeftRight, Side::Above);
      hits[std::size_t(k)][1] =
          crossing(col, b_rect, Direction::LeftRight, Side::Above);
    });
    long long n11 = 0, n10 = 0, n01 = 0;
    for (long long k = 0; k < cfg.replicas; ++k) {
      const bool a = hits[std::size_t(k)][0], b = hits[std::size_t(k)][1];
      n11 += a && b;
      n10 += a && !b;
      n01 += !a && b;
    }
    const double pa = double(n11 + n10) / double(cfg.replicas);
    const double pb = double(n11 + n01) / double(cfg.replicas);
    const double gap =
        std::abs(double(n11) / double(cfg.replicas) - pa * pb);
    const double elapsed = timer.ms();
    records.push_back({"qi-fields", ctx.kname, cfg.epsilon, cfg.p, d, 0.0, gap,
                       detail::covariance_gap_se(n11, n10, n01, cfg.replicas),
                       cfg.replicas, cfg.seed, elapsed, ctx.hash});
    // Largest |kappa| over pairs of points in the two closed squares.
    const double eta =
        std::abs(ctx.kernel.evaluate(std::max(0.0, d - 5.0), 0.0));
    records.push_back({"qi-eta", ctx.kname, cfg.epsilon, cfg.p, d, 0.0, eta,
                       0.0, cfg.replicas, cfg.seed, 0.0, ctx.hash});
    if (eta < 0.999) {
      const double shape = eta / std::sqrt(1.0 - eta * eta) *
                           std::pow(1.0 + std::abs(cfg.p), 4) *
                           std::exp(-cfg.p * cfg.p);
      records.push_back({"qi-rhs-shape", ctx.kname, cfg.epsilon, cfg.p, d, 0.0,
                         shape, 0.0, cfg.replicas, cfg.seed, 0.0, ctx.hash});
    }
  }
  return records;
}

namespace detail {

// Nodal component density of one replica: trace at level p inside the
// window and count closed components inside [-s/2, s/2]^2. Optionally count
// per-tile components for the 5x5 tiling of the square (tile side s/5).
struct NodalCounts {
  double density = 0.0;
  std::array<std::uint16_t, 25> tiles{};
};

inline NodalCounts nodal_counts(const CirculantSampler& sampler,
                                const ExperimentConfig& cfg, double s,
                                long long k, bool want_tiles) {
  const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
  const NodalCurveSet curves = trace_nodal(f, cfg.epsilon, cfg.p);
  const EpsRegion rect =
      EpsRegion::rectangle(cfg.epsilon, -0.5 * s, 0.5 * s, -0.5 * s, 0.5 * s);
  NodalCounts out;
  out.density = double(count_components(curves, rect)) / (s * s);
  if (want_tiles) {
    const double r = s / 5.0;
    for (int ti = 0; ti < 5; ++ti)
      for (int tj = 0; tj < 5; ++tj) {
        const EpsRegion tile = EpsRegion::rectangle(
            cfg.epsilon, -0.5 * s + ti * r, -0.5 * s + (ti + 1) * r,
            -0.5 * s + tj * r, -0.5 * s + (tj + 1) * r);
        out.tiles[std::size_t(ti * 5 + tj)] =
            std::uint16_t(count_components(curves, tile));
      }
  }
  return out;
}

struct DensityRun {
  std::vector<double> density;                       // per replica
  std::vector<std::array<std::uint16_t, 25>> tiles;  // per replica
  double elapsed_ms = 0.0;
};

inline DensityRun density_run(const RunContext& ctx,
                              const ExperimentConfig& cfg, double s,
                              bool want_tiles) {
  Timer timer;
  const double m = 0.5 * s + 2.0 * cfg.epsilon;
  const GridSpec grid = window_grid(cfg.epsilon, -m, m, -m, m);
  const CirculantSampler sampler(ctx.kernel, grid);
  DensityRun run;
  run.density.resize(std::size_t(cfg.replicas));
  if (want_tiles) run.tiles.resize(std::size_t(cfg.replicas));
  parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
    const NodalCounts c = nodal_counts(sampler, cfg, s, k, want_tiles);
    run.density[std::size_t(k)] = c.density;
    if (want_tiles) run.tiles[std::size_t(k)] = c.tiles;
  });
  run.elapsed_ms = timer.ms();
  return run;
}

}  // namespace detail

/**
 * Nodal component density per unit area: mean and sample std of N/s^2 over
 * replicas, per s. param2 carries the sample std.
 */
inline std::vector<ResultRecord> run_ns_density(const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  std::vector<ResultRecord> records;
  for (double s : cfg.s_values) {
    const detail::DensityRun run = detail::density_run(ctx, cfg, s, false);
    const detail::MeanStd ms = detail::mean_std(run.density);
    records.push_back({"ns-density", ctx.kname, cfg.epsilon, cfg.p, s, ms.sd,
                       ms.mean, ms.sd / std::sqrt(double(cfg.replicas)),
                       cfg.replicas, cfg.seed, run.elapsed_ms, ctx.hash});
  }
  return records;
}

/**
 * Lower-tail concentration of the component density. The reference density
 * c_hat is the mean at the largest s; per s the estimate is
 * P[N/s^2 <= (1-tail_eps) c_hat], plus a tiling diagnostic: mean number of
 * deficient s/5-tiles per sample.
 */
inline std::vector<ResultRecord> run_concentration(
    const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  std::vector<double> svals = cfg.s_values;
  std::vector<std::size_t> order(svals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return svals[a] > svals[b]; });
  std::vector<detail::DensityRun> runs(svals.size());
  double chat = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t i = order[rank];
    runs[i] = detail::density_run(ctx, cfg, svals[i], true);
    if (rank == 0) chat = detail::mean_std(runs[i].density).mean;
  }
  const double floor_density = (1.0 - cfg.tail_eps) * chat;
  std::vector<ResultRecord> records;
  for (std::size_t i = 0; i < svals.size(); ++i) {
    const double s = svals[i];
    const double r = s / 5.0;
    long long tail = 0;
    std::vector<double> deficient(runs[i].density.size());
    for (std::size_t k = 0; k < runs[i].density.size(); ++k) {
      tail += runs[i].density[k] <= floor_density;
      int bad = 0;
      for (int t = 0; t < 25; ++t)
        bad += double(runs[i].tiles[k][std::size_t(t)]) / (r * r) <=
               floor_density;
      deficient[k] = double(bad);
    }
    const double phat = double(tail) / double(cfg.replicas);
    records.push_back({"concentration", ctx.kname, cfg.epsilon, cfg.p, s,
                       floor_density, phat,
                       detail::binomial_se(phat, cfg.replicas), cfg.replicas,
                       cfg.seed, runs[i].elapsed_ms, ctx.hash});
    const detail::MeanStd ms = detail::mean_std(deficient);
    records.push_back({"concentration-tiles", ctx.kname, cfg.epsilon, cfg.p, s,
                       r, ms.mean, ms.sd / std::sqrt(double(cfg.replicas)),
                       cfg.replicas, cfg.seed, 0.0, ctx.hash});
  }
  return records;
}

/**
 * One-arm probability from radius r to s over the s grid, plus a log-log
 * least-squares fit: estimate of the decay exponent eta (slope negated).
 */
inline std::vector<ResultRecord> run_one_arm(const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  std::vector<ResultRecord> records;
  std::vector<double> lx, ly, lvar;
  for (double s : cfg.s_values) {
    detail::Timer timer;
    const GridSpec grid = detail::window_grid(cfg.epsilon, -s, s, -s, s);
    const CirculantSampler sampler(ctx.kernel, grid);
    std::vector<std::uint8_t> hit(std::size_t(cfg.replicas));
    detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
      const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
      const Coloring col = color_field(f, cfg.epsilon, cfg.p);
      hit[std::size_t(k)] = arm(col, cfg.r, s, Side::Above);
    });
    long long nh = 0;
    for (long long k = 0; k < cfg.replicas; ++k) nh += hit[std::size_t(k)];
    const double phat = double(nh) / double(cfg.replicas);
    records.push_back({"one-arm", ctx.kname, cfg.epsilon, cfg.p, s, cfg.r,
                       phat, detail::binomial_se(phat, cfg.replicas),
                       cfg.replicas, cfg.seed, timer.ms(), ctx.hash});
    // Tail-unreliable points are excluded from the fit.
    if (phat >= 5.0 / double(cfg.replicas) && phat < 1.0) {
      lx.push_back(std::log(s / cfg.r));
      ly.push_back(std::log(phat));
      lvar.push_back((1.0 - phat) / (phat * double(cfg.replicas)));
    }
  }
  const detail::LineFit fit = detail::fit_line(lx, ly, lvar);
  records.push_back({"one-arm-eta", ctx.kname, cfg.epsilon, cfg.p,
                     double(fit.points), cfg.r, -fit.slope, fit.slope_se,
                     cfg.replicas, cfg.seed, 0.0, ctx.hash});
  return records;
}

namespace detail {

// Per-replica summary of every Tassion quantity on the square
// [-s/2, s/2]^2, from one union-find pass:
//   reach_min/reach_max: least/greatest j >= 0 (half-units) on the right
//     side reachable from the left side within black, so
//     H(0, alpha) = reach_min <= a and H(alpha, s/2) = reach_max >= a;
//   mstar: max over black clusters of min(-Lmin, Lmax, -Rmin, Rmax) over the
//     cluster's boundary contacts, so X(alpha) = mstar >= a.
struct TassionSummary {
  long long reach_min = LLONG_MAX;
  long long reach_max = LLONG_MIN;
  long long mstar = LLONG_MIN;
};

inline TassionSummary tassion_summary(const Coloring& col, double s) {
  const double eps = col.lattice().eps;
  const EpsRegion square =
      EpsRegion::rectangle(eps, -0.5 * s, 0.5 * s, -0.5 * s, 0.5 * s);
  require_region_in_window(col.lattice(), square, "tassion");
  const BoxIndex box(square);
  UnionFind uf(box.size() + 1);
  const std::size_t term = box.size();
  unite_colored_edges(col, square, box, true, uf);
  TassionSummary out;
  // Cluster boundary contacts first, while roots still identify clusters.
  struct Contacts {
    long long lmin = LLONG_MAX, lmax = LLONG_MIN;
    long long rmin = LLONG_MAX, rmax = LLONG_MIN;
  };
  std::unordered_map<std::size_t, Contacts> contacts;
  for (long long j = square.y0(); j <= square.y1(); ++j) {
    for (int side = 0; side < 2; ++side) {
      const HalfPoint v{side == 0 ? square.x0() : square.x1(), j};
      if (!is_vertex(v) || !col.black(v)) continue;
      Contacts& c = contacts[uf.find(box.at(v))];
      if (side == 0) {
        c.lmin = std::min(c.lmin, j);
        c.lmax = std::max(c.lmax, j);
      } else {
        c.rmin = std::min(c.rmin, j);
        c.rmax = std::max(c.rmax, j);
      }
    }
  }
  for (const auto& [root, c] : contacts) {
    if (c.lmin == LLONG_MAX || c.rmin == LLONG_MAX) continue;
    const long long m =
        std::min(std::min(-c.lmin, c.lmax), std::min(-c.rmin, c.rmax));
    out.mstar = std::max(out.mstar, m);
  }
  // Left-side terminal, then the reachable right-side segment [0, s/2].
  for (long long j = square.y0(); j <= square.y1(); ++j) {
    const HalfPoint v{square.x0(), j};
    if (is_vertex(v) && col.black(v)) uf.unite(term, box.at(v));
  }
  for (long long j = 0; j <= square.y1(); ++j) {
    const HalfPoint v{square.x1(), j};
    if (!is_vertex(v) || !col.black(v)) continue;
    if (!uf.same(term, box.at(v))) continue;
    out.reach_min = std::min(out.reach_min, j);
    out.reach_max = std::max(out.reach_max, j);
  }
  return out;
}

}  // namespace detail

/**
 * Tassion crossing diagnostics per s: phi(alpha) = P[H(0,alpha)] -
 * P[H(alpha, s/2)] over the alpha grid, the empirical alpha_s (first grid
 * alpha with phi > 1/8, else s/2) and P[X(alpha)] for alpha <= alpha_s.
 */
inline std::vector<ResultRecord> run_tassion_diag(const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  std::vector<ResultRecord> records;
  for (double s : cfg.s_values) {
    detail::Timer timer;
    const GridSpec grid =
        detail::window_grid(cfg.epsilon, -0.5 * s, 0.5 * s, -0.5 * s, 0.5 * s);
    const CirculantSampler sampler(ctx.kernel, grid);
    std::vector<detail::TassionSummary> sums(std::size_t(cfg.replicas));
    detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
      const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
      const Coloring col = color_field(f, cfg.epsilon, cfg.p);
      sums[std::size_t(k)] = detail::tassion_summary(col, s);
    });
    const double elapsed = timer.ms();
    std::vector<double> alphas;
    for (double a = 0.0; a <= 0.5 * s + 1e-9; a += cfg.alpha_step)
      alphas.push_back(a);
    double alpha_hat = 0.5 * s;
    bool found = false;
    for (double a : alphas) {
      const long long ah =
          detail::to_eps_units_half(a, cfg.epsilon, "tassion alpha");
      long long na = 0, nb = 0, nab = 0;
      for (const auto& t : sums) {
        const bool ha = t.reach_min <= ah;
        const bool hb = t.reach_max >= ah;
        na += ha;
        nb += hb;
        nab += ha && hb;
      }
      const double phi =
          double(na) / double(cfg.replicas) - double(nb) / double(cfg.replicas);
      records.push_back({"tassion-phi", ctx.kname, cfg.epsilon, cfg.p, s, a,
                         phi, detail::paired_diff_se(na, nb, nab, cfg.replicas),
                         cfg.replicas, cfg.seed, elapsed, ctx.hash});
      if (!found && phi > 0.125) {
        alpha_hat = a;
        found = true;
      }
    }
    records.push_back({"tassion-alpha", ctx.kname, cfg.epsilon, cfg.p, s,
                       found ? 1.0 : 0.0, alpha_hat, 0.0, cfg.replicas,
                       cfg.seed, 0.0, ctx.hash});
    for (double a : alphas) {
      if (a > alpha_hat + 1e-9) break;
      const long long ah =
          detail::to_eps_units_half(a, cfg.epsilon, "tassion alpha");
      long long nx = 0;
      for (const auto& t : sums) nx += t.mstar >= ah;
      const double phat = double(nx) / double(cfg.replicas);
      records.push_back({"tassion-x", ctx.kname, cfg.epsilon, cfg.p, s, a,
                         phat, detail::binomial_se(phat, cfg.replicas),
                         cfg.replicas, cfg.seed, 0.0, ctx.hash});
    }
  }
  return records;
}

/**
 * Alternation pattern frequencies at level p over an epsilon grid: mean
 * Alt4Interior count per unit area and Alt3Boundary count per unit boundary
 * length in [0,s]^2 (s = s_values.front()), plus fitted log-log slopes.
 */
inline std::vector<ResultRecord> run_pivotal_scaling(
    const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  const std::vector<double> grid_eps =
      cfg.eps_values.empty() ? std::vector<double>{0.4, 0.2, 0.1}
                             : cfg.eps_values;
  const double s = cfg.s_values.front();
  std::vector<ResultRecord> records;
  std::vector<double> l4x, l4y, l4var, l3x, l3y, l3var;
  for (double eps : grid_eps) {
    detail::Timer timer;
    const GridSpec grid = detail::window_grid(eps, 0, s, 0, s);
    const CirculantSampler sampler(ctx.kernel, grid);
    const EpsRegion region = EpsRegion::rectangle(eps, 0, s, 0, s);
    std::vector<double> alt4(std::size_t(cfg.replicas));
    std::vector<double> alt3(std::size_t(cfg.replicas));
    detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
      const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
      const Coloring col = color_field(f, eps, cfg.p);
      const FccLattice& lat = col.lattice();
      long long c4 = 0, c3 = 0;
      for (long long i = region.x0(); i <= region.x1(); ++i)
        for (long long j = region.y0(); j <= region.y1(); ++j) {
          const HalfPoint v{i, j};
          if (!is_vertex(v)) continue;
          const bool on_x = i == region.x0() || i == region.x1();
          const bool on_y = j == region.y0() || j == region.y1();
          if (on_x && on_y) continue;  // corners are out of scope
          (void)lat;
          const PivotalPattern pat = pivotal_pattern(col, v, region);
          c4 += pat == PivotalPattern::Alt4Interior;
          c3 += pat == PivotalPattern::Alt3Boundary;
        }
      alt4[std::size_t(k)] = double(c4) / (s * s);
      alt3[std::size_t(k)] = double(c3) / (4.0 * s);
    });
    const double elapsed = timer.ms();
    const detail::MeanStd m4 = detail::mean_std(alt4);
    const detail::MeanStd m3 = detail::mean_std(alt3);
    const double se4 = m4.sd / std::sqrt(double(cfg.replicas));
    const double se3 = m3.sd / std::sqrt(double(cfg.replicas));
    records.push_back({"pivotal-alt4", ctx.kname, eps, cfg.p, eps, s, m4.mean,
                       se4, cfg.replicas, cfg.seed, elapsed, ctx.hash});
    records.push_back({"pivotal-alt3", ctx.kname, eps, cfg.p, eps, s, m3.mean,
                       se3, cfg.replicas, cfg.seed, 0.0, ctx.hash});
    if (m4.mean > 0) {
      l4x.push_back(std::log(eps));
      l4y.push_back(std::log(m4.mean));
      l4var.push_back(se4 * se4 / (m4.mean * m4.mean));
    }
    if (m3.mean > 0) {
      l3x.push_back(std::log(eps));
      l3y.push_back(std::log(m3.mean));
      l3var.push_back(se3 * se3 / (m3.mean * m3.mean));
    }
  }
  const detail::LineFit f4 = detail::fit_line(l4x, l4y, l4var);
  const detail::LineFit f3 = detail::fit_line(l3x, l3y, l3var);
  records.push_back({"pivotal-alt4-slope", ctx.kname, cfg.epsilon, cfg.p,
                     double(f4.points), s, f4.slope, f4.slope_se, cfg.replicas,
                     cfg.seed, 0.0, ctx.hash});
  records.push_back({"pivotal-alt3-slope", ctx.kname, cfg.epsilon, cfg.p,
                     double(f3.points), s, f3.slope, f3.slope_se, cfg.replicas,
                     cfg.seed, 0.0, ctx.hash});
  return records;
}

/**
 * Crossing probability of the same rectangles across a mesh grid
 * (default {1, 0.5, 0.25, 0.125}) at aspect ratios 2 and 1; reports the
 * max pairwise estimate difference per aspect.
 */
inline std::vector<ResultRecord> run_mesh_uniformity(
    const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  const std::vector<double> grid_eps =
      cfg.eps_values.empty() ? std::vector<double>{1.0, 0.5, 0.25, 0.125}
                             : cfg.eps_values;
  const double s = cfg.s_values.front();
  std::vector<ResultRecord> records;
  for (double rho : {2.0, 1.0}) {
    std::vector<double> phats, ses;
    for (double eps : grid_eps) {
      detail::Timer timer;
      const double w = rho * s;
      const GridSpec grid = detail::window_grid(eps, 0, w, 0, s);
      const CirculantSampler sampler(ctx.kernel, grid);
      const EpsRegion rect = EpsRegion::rectangle(eps, 0, w, 0, s);
      std::vector<std::uint8_t> crossed(std::size_t(cfg.replicas));
      detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
        const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
        const Coloring col = color_field(f, eps, cfg.p);
        crossed[std::size_t(k)] =
            crossing(col, rect, Direction::LeftRight, Side::Above);
      });
      long long nc = 0;
      for (long long k = 0; k < cfg.replicas; ++k)
        nc += crossed[std::size_t(k)];
      const double phat = double(nc) / double(cfg.replicas);
      phats.push_back(phat);
      ses.push_back(detail::binomial_se(phat, cfg.replicas));
      records.push_back({"mesh-uniformity", ctx.kname, eps, cfg.p, eps, rho,
                         phat, ses.back(), cfg.replicas, cfg.seed, timer.ms(),
                         ctx.hash});
    }
    double spread = 0.0, spread_se = 0.0;
    for (std::size_t i = 0; i < phats.size(); ++i)
      for (std::size_t j = i + 1; j < phats.size(); ++j)
        if (std::abs(phats[i] - phats[j]) > spread) {
          spread = std::abs(phats[i] - phats[j]);
          spread_se = std::hypot(ses[i], ses[j]);
        }
    records.push_back({"mesh-uniformity-spread", ctx.kname, cfg.epsilon, cfg.p,
                       rho, s, spread, spread_se, cfg.replicas, cfg.seed, 0.0,
                       ctx.hash});
  }
  return records;
}

/**
 * Quasi-independence audit on randomized 4-dim vector models plus the exact
 * bivariate orthant control. Per case: lhs, rhs, and the slack
 * rhs + 3 sigma - lhs (nonnegative when the inequality holds within noise).
 */
inline std::vector<ResultRecord> run_qi_vectors(const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  std::vector<ResultRecord> records;
  detail::Timer timer;
  {
    // Orthant control: rho = 0.5, thresholds 0; lhs = 1/12 exactly.
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, 0.5, 0.5, 1.0;
    const GaussianVectorModel model =
        make_model(Eigen::VectorXd::Zero(2), cov);
    const Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
    const ThresholdEvent uev = halfspace_event(q, 0);
    const ThresholdEvent vev = halfspace_event(q, 1);
    const McEstimate lhs = qi_lhs(model, 1, 1, uev, vev, cfg.mc, cfg.seed);
    const McEstimate rhs =
        qi_rhs(model, 1, 1, uev, vev, q, 8, cfg.mc, cfg.seed);
    records.push_back({"qi-orthant-lhs", "vector", 0.0, 0.0, 0.5, 0.0,
                       lhs.value, lhs.std_error, lhs.n, cfg.seed, 0.0,
                       ctx.hash});
    records.push_back({"qi-orthant-rhs", "vector", 0.0, 0.0, 0.5, 0.0,
                       rhs.value, rhs.std_error, rhs.n, cfg.seed, 0.0,
                       ctx.hash});
  }
  for (int c = 0; c < cfg.cases; ++c) {
    const std::uint64_t case_seed =
        mix64(cfg.seed + 0x9e3779b97f4a7c15ULL * std::uint64_t(c + 1));
    CounterRng rng(case_seed, 0, stream::vectors);
    // Random correlation matrix with unit diagonal, shrunk toward identity.
    Eigen::MatrixXd g(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) g(i, j) = rng.next_normal();
    Eigen::MatrixXd cov = g * g.transpose();
    Eigen::VectorXd d = cov.diagonal().cwiseSqrt();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) cov(i, j) /= d[i] * d[j];
    cov = 0.9 * cov + 0.1 * Eigen::MatrixXd::Identity(4, 4);
    Eigen::VectorXd q(4);
    for (int i = 0; i < 4; ++i) q[i] = 2.0 * rng.next_unit() - 1.0;
    // Random nontrivial tables on coordinate pairs {0,1} and {2,3}.
    const auto random_table = [&] {
      std::uint32_t t = 0;
      do {
        t = 0;
        for (int b = 0; b < 4; ++b)
          t |= (rng.next_unit() > 0.5 ? 1u : 0u) << b;
      } while (t == 0 || t == 0xF);
      return t;
    };
    const std::uint32_t tu = random_table(), tv = random_table();
    const ThresholdEvent uev = make_threshold_event(
        q, [&](std::uint32_t pat) { return (tu >> (pat & 3u)) & 1u; });
    const ThresholdEvent vev = make_threshold_event(
        q, [&](std::uint32_t pat) { return (tv >> ((pat >> 2) & 3u)) & 1u; });
    const GaussianVectorModel model = make_model(Eigen::VectorXd::Zero(4), cov);
    const McEstimate lhs = qi_lhs(model, 2, 2, uev, vev, cfg.mc,
                                  mix64(case_seed + 1));
    const McEstimate rhs = qi_rhs(
        model, 2, 2, uev, vev, q, 8,
        std::max<long long>(1000, cfg.mc / 8), mix64(case_seed + 2));
    const double sigma = std::hypot(lhs.std_error, rhs.std_error);
    const double margin = rhs.value + 3.0 * sigma - lhs.value;
    records.push_back({"qi-vectors-lhs", "vector", 0.0, 0.0, double(c), 0.0,
                       lhs.value, lhs.std_error, lhs.n, cfg.seed, 0.0,
                       ctx.hash});
    records.push_back({"qi-vectors-rhs", "vector", 0.0, 0.0, double(c), 0.0,
                       rhs.value, rhs.std_error, rhs.n, cfg.seed, 0.0,
                       ctx.hash});
    records.push_back({"qi-vectors", "vector", 0.0, 0.0, double(c), 0.0,
                       margin, sigma, lhs.n, cfg.seed, 0.0, ctx.hash});
  }
  if (!records.empty()) records.front().elapsed_ms = timer.ms();
  return records;
}

/**
 * Duality audit across levels and aspect ratios: fraction of samples where
 * exactly one of the dual crossings occurs (must be 1 by construction).
 */
inline std::vector<ResultRecord> run_duality_audit(
    const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  std::vector<ResultRecord> records;
  for (double s : cfg.s_values)
    for (double rho : {1.0, 2.0}) {
      detail::Timer timer;
      const double w = rho * s;
      const GridSpec grid = detail::window_grid(cfg.epsilon, 0, w, 0, s);
      const CirculantSampler sampler(ctx.kernel, grid);
      const EpsRegion rect = EpsRegion::rectangle(cfg.epsilon, 0, w, 0, s);
      const std::size_t np = cfg.p_values.size();
      std::vector<std::uint8_t> ok(std::size_t(cfg.replicas) * np);
      detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
        const FieldSample f = sampler.sample(cfg.seed, std::uint64_t(k));
        for (std::size_t ip = 0; ip < np; ++ip) {
          const Coloring col = color_field(f, cfg.epsilon, cfg.p_values[ip]);
          ok[std::size_t(k) * np + ip] = duality_holds(col, rect);
        }
      });
      const double elapsed = timer.ms();
      for (std::size_t ip = 0; ip < np; ++ip) {
        long long nok = 0;
        for (long long k = 0; k < cfg.replicas; ++k)
          nok += ok[std::size_t(k) * np + ip];
        const double phat = double(nok) / double(cfg.replicas);
        records.push_back({"duality-audit", ctx.kname, cfg.epsilon,
                           cfg.p_values[ip], s, rho, phat,
                           detail::binomial_se(phat, cfg.replicas),
                           cfg.replicas, cfg.seed, elapsed, ctx.hash});
      }
    }
  return records;
}

namespace detail {

/**
 * Circulant embedding of the field's restriction to a line. The window
 * covers at most half the torus, so pairwise covariances inside it are the
 * exact kernel values; padding and eigenvalue clamping follow the same
 * policy as the planar sampler.
 */
class LineSampler {
public:
  LineSampler(const Kernel& kernel, double spacing, int n) : n_(n) {
    if (n < 2) throw InvalidRegionError("line sampler: extent must be >= 2");
    double worst = 0.0;
    for (int factor : {2, 4, 8, 16}) {
      m_ = next_fast_even(factor * n);
      std::vector<std::complex<double>> c(static_cast<std::size_t>(m_));
      for (int i = 0; i < m_; ++i) {
        const double d = spacing * (i <= m_ / 2 ? i : i - m_);
        c[std::size_t(i)] = kernel.evaluate(d, 0.0);
      }
      fft2_inplace(c, m_, 1, FFTW_FORWARD);
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
        "line embedding not positive semidefinite at 16x padding; "
        "most negative eigenvalue " + std::to_string(worst),
        worst);
  }

  std::vector<double> sample(std::uint64_t seed, std::uint64_t replica) const {
    CounterRng rng(seed, replica, stream::field);
    std::vector<std::complex<double>> buf(sqrt_eigs_.size());
    for (std::size_t k = 0; k < buf.size(); ++k) {
      double z0, z1;
      rng.next_normal_pair(z0, z1);
      buf[k] = std::complex<double>(z0 * sqrt_eigs_[k], z1 * sqrt_eigs_[k]);
    }
    fft2_inplace(buf, m_, 1, FFTW_BACKWARD);
    const double scale = 1.0 / std::sqrt(double(m_));
    std::vector<double> out(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i)
      out[std::size_t(i)] = buf[std::size_t(i)].real() * scale;
    return out;
  }

private:
  int n_ = 0, m_ = 0;
  std::vector<double> sqrt_eigs_;
};

}  // namespace detail

/**
 * Expected zero count of the line restriction: closed-form rate times length
 * next to an empirical sign-change count over replicas on a fine 1-d grid.
 */
inline std::vector<ResultRecord> run_kac_rice(const ExperimentConfig& cfg) {
  const detail::RunContext ctx(cfg);
  const double length =
      cfg.length > 0 ? cfg.length
                     : (cfg.kernel.family == "bargmann_fock"
                            ? 3.14159265358979323846
                            : 1.0);
  std::vector<ResultRecord> records;
  const double theory = kac_rice_zeros(ctx.kernel, 1.0, 0.0, length, 0);
  records.push_back({"kac-rice-theory", ctx.kname, 0.0, cfg.p, length, 0.0,
                     theory, 0.0, 1, cfg.seed, 0.0, ctx.hash});
  detail::Timer timer;
  const double h = 1e-3;
  const int nx = int(std::llround(length / h)) + 1;
  const detail::LineSampler sampler(ctx.kernel, h, nx);
  std::vector<double> counts(std::size_t(cfg.replicas));
  detail::parallel_for_index(cfg.replicas, cfg.threads, [&](long long k) {
    const std::vector<double> f = sampler.sample(cfg.seed, std::uint64_t(k));
    long long zc = 0;
    for (std::size_t ix = 0; ix + 1 < std::size_t(nx); ++ix)
      zc += f[ix] * f[ix + 1] < 0;
    counts[std::size_t(k)] = double(zc);
  });
  const detail::MeanStd ms = detail::mean_std(counts);
  records.push_back({"kac-rice-empirical", ctx.kname, 0.0, cfg.p, length, h,
                     ms.mean, ms.sd / std::sqrt(double(cfg.replicas)),
                     cfg.replicas, cfg.seed, timer.ms(), ctx.hash});
  return records;
}

inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.experiment == "crossing") return run_crossing(cfg);
  if (cfg.experiment == "fkg") return run_fkg(cfg);
  if (cfg.experiment == "qi-fields") return run_qi_decay(cfg);
  if (cfg.experiment == "qi-vectors") return run_qi_vectors(cfg);
  if (cfg.experiment == "ns-density") return run_ns_density(cfg);
  if (cfg.experiment == "concentration") return run_concentration(cfg);
  if (cfg.experiment == "one-arm") return run_one_arm(cfg);
  if (cfg.experiment == "tassion") return run_tassion_diag(cfg);
  if (cfg.experiment == "pivotal-scaling") return run_pivotal_scaling(cfg);
  if (cfg.experiment == "mesh-uniformity") return run_mesh_uniformity(cfg);
  if (cfg.experiment == "kac-rice") return run_kac_rice(cfg);
  if (cfg.experiment == "duality-audit") return run_duality_audit(cfg);
  throw ConfigError("unknown experiment: " + cfg.experiment);
}

/**
 * Runs the configured experiment and, when cfg.out is set, writes
 * <experiment>.<format>, <experiment>.manifest.json and (optionally)
 * <experiment>.svg into that directory.
 */
inline std::vector<ResultRecord> run_to_disk(const ExperimentConfig& cfg) {
  const auto started = std::chrono::system_clock::now();
  const std::vector<ResultRecord> records = run_experiment(cfg);
  const auto finished = std::chrono::system_clock::now();
  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    if (cfg.format == "csv")
      detail::write_text_file(dir / (cfg.experiment + ".csv"),
                              csv_string(records));
    else
      detail::write_text_file(dir / (cfg.experiment + ".json"),
                              records_json(records).dump(2) + "\n");
    nlohmann::json manifest;
    manifest["config"] = canonical_config(cfg);
    manifest["config_sha256"] = config_hash(cfg);
    manifest["tool_version"] = kToolVersion;
    manifest["seed"] = cfg.seed;
    manifest["started_utc"] = detail::iso8601_utc(started);
    manifest["finished_utc"] = detail::iso8601_utc(finished);
    detail::write_text_file(dir / (cfg.experiment + ".manifest.json"),
                            manifest.dump(2) + "\n");
    if (cfg.plot) {
      std::vector<std::array<double, 3>> pts;
      for (const auto& r : records)
        if (r.experiment == cfg.experiment)
          pts.push_back({r.param1, r.estimate, r.std_error});
      detail::write_text_file(
          dir / (cfg.experiment + ".svg"),
          svg_plot(cfg.experiment, "parameter", "estimate", pts));
    }
  }
  return records;
}

}  // namespace nrsw
