// Command-line front end: kernel validation, single-field sampling, and the
// Monte Carlo experiment suite with CSV/JSON/manifest/SVG outputs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <nrsw/nrsw.hpp>

namespace {

struct CommonOpts {
  std::string config;
  std::uint64_t seed = 1;
  long long replicas = 4000;
  int threads = 0;
  std::string out;
  bool plot = false;
  std::string format = "csv";
  std::string kernel = "bargmann_fock";
  double beta = 3.0;
  double epsilon = 0.25;
  double p = 0.0;
};

void attach_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--replicas", o.replicas, "Monte Carlo replica count");
  sub->add_option("--threads", o.threads, "worker threads (0 = hardware)");
  sub->add_option("--out", o.out, "output directory");
  sub->add_flag("--plot", o.plot, "emit an SVG plot next to the table");
  sub->add_option("--format", o.format, "output table format")
      ->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--kernel", o.kernel, "kernel family")
      ->check(CLI::IsMember({"bargmann_fock", "cauchy"}));
  sub->add_option("--beta", o.beta, "cauchy decay exponent");
  sub->add_option("--epsilon", o.epsilon, "lattice mesh");
  sub->add_option("--p", o.p, "level parameter");
}

nrsw::ExperimentConfig build_config(const std::string& name,
                                    const CLI::App* sub,
                                    const CommonOpts& o) {
  nrsw::ExperimentConfig cfg;
  if (!o.config.empty()) cfg = nrsw::load_config(o.config);
  cfg.experiment = name;
  if (sub->count("--seed")) cfg.seed = o.seed;
  if (sub->count("--replicas")) cfg.replicas = o.replicas;
  if (sub->count("--threads")) cfg.threads = o.threads;
  if (sub->count("--out")) cfg.out = o.out;
  if (sub->count("--plot")) cfg.plot = o.plot;
  if (sub->count("--format")) cfg.format = o.format;
  if (sub->count("--kernel")) cfg.kernel.family = o.kernel;
  if (sub->count("--beta")) cfg.kernel.beta = o.beta;
  if (sub->count("--epsilon")) cfg.epsilon = o.epsilon;
  if (sub->count("--p")) cfg.p = o.p;
  return cfg;
}

int run_experiment_command(const std::string& name, const CLI::App* sub,
                           const CommonOpts& o) {
  const nrsw::ExperimentConfig cfg = build_config(name, sub, o);
  const std::vector<nrsw::ResultRecord> records = nrsw::run_to_disk(cfg);
  std::cout << nrsw::csv_string(records);
  if (!cfg.out.empty()) {
    const std::string table =
        cfg.experiment + (cfg.format == "csv" ? ".csv" : ".json");
    std::cerr << "wrote " << (std::filesystem::path(cfg.out) / table).string()
              << " and manifest\n";
  }
  return 0;
}

const char* yesno(bool v) { return v ? "yes" : "no"; }

int run_validate_kernel(const CommonOpts& o) {
  nrsw::KernelConfig kc;
  kc.family = o.kernel;
  kc.beta = o.beta;
  const nrsw::Kernel kernel = nrsw::make_kernel(kc);
  const nrsw::KernelReport rep = kernel.validate();
  std::printf("kernel: %s\n", rep.kernel.c_str());
  std::printf("normalized_ok: %s\n", yesno(rep.normalized_ok));
  std::printf("symmetric_ok: %s\n", yesno(rep.symmetric_ok));
  std::printf("bounded_ok: %s\n", yesno(rep.bounded_ok));
  std::printf("nonnegative_ok: %s\n", yesno(rep.nonnegative_ok));
  std::printf("isotropy_ok: %s\n", yesno(rep.isotropy_ok));
  std::printf("ray_monotone_ok: %s\n", yesno(rep.ray_monotone_ok));
  std::printf("plane_integral: %.10g (ok: %s)\n", rep.plane_integral,
              yesno(rep.plane_integral_ok));
  std::printf("density_min: %.10g (nonnegative: %s)\n", rep.density_min,
              yesno(rep.density_nonneg_ok));
  std::printf("density_max: %.10g\n", rep.density_max);
  const bool all = rep.normalized_ok && rep.symmetric_ok && rep.bounded_ok &&
                   rep.nonnegative_ok && rep.isotropy_ok &&
                   rep.ray_monotone_ok && rep.plane_integral_ok &&
                   rep.density_nonneg_ok;
  std::printf("verdict: %s\n", all ? "pass" : "fail");
  return all ? 0 : 1;
}

std::string field_heatmap_svg(const nrsw::FieldSample& f) {
  const int nx = f.grid.nx, ny = f.grid.ny;
  double vmax = 0.0;
  for (double v : f.values) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0.0) vmax = 1.0;
  const int stride = std::max(1, std::max(nx, ny) / 240);
  const double cell = 600.0 / std::max(nx, ny) * stride;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" "
                    "height=\"600\">\n";
  char buf[160];
  for (int ix = 0; ix < nx; ix += stride)
    for (int iy = 0; iy < ny; iy += stride) {
      const double t = f.at(ix, iy) / vmax;  // [-1, 1]
      const int r = int(255 * std::min(1.0, 1.0 + std::min(0.0, t)));
      const int b = int(255 * std::min(1.0, 1.0 - std::max(0.0, t)));
      const int g = std::min(r, b);
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" "
                    "height=\"%.2f\" fill=\"rgb(%d,%d,%d)\"/>\n",
                    ix / double(stride) * cell,
                    (ny - 1 - iy) / double(stride) * cell, cell + 0.5,
                    cell + 0.5, r, g, b);
      svg += buf;
    }
  svg += "</svg>\n";
  return svg;
}

struct SampleOpts {
  double spacing = 0.125;
  int nx = 129;
  int ny = 129;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::uint64_t replica = 0;
};

int run_sample(const CommonOpts& o, const SampleOpts& s) {
  nrsw::KernelConfig kc;
  kc.family = o.kernel;
  kc.beta = o.beta;
  const nrsw::Kernel kernel = nrsw::make_kernel(kc);
  const nrsw::GridSpec grid =
      nrsw::make_grid(s.spacing, s.origin_x, s.origin_y, s.nx, s.ny);
  const nrsw::FieldSample field =
      nrsw::sample_field(kernel, grid, o.seed, s.replica);
  double lo = field.values.front(), hi = lo;
  for (double v : field.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::printf("kernel: %s\n", kernel.name().c_str());
  std::printf("grid: %d x %d, spacing %.10g, origin (%.10g, %.10g)\n", s.nx,
              s.ny, s.spacing, s.origin_x, s.origin_y);
  std::printf("seed: %llu replica: %llu\n",
              (unsigned long long)field.seed_trace.seed,
              (unsigned long long)field.seed_trace.replica);
  std::printf("value range: [%.10g, %.10g]\n", lo, hi);
  if (!o.out.empty()) {
    const std::filesystem::path dir(o.out);
    std::filesystem::create_directories(dir);
    nrsw::write_field(field, (dir / "field.bin").string());
    std::printf("wrote %s\n", (dir / "field.bin").string().c_str());
    if (o.plot) {
      nrsw::detail::write_text_file(dir / "field.svg",
                                    field_heatmap_svg(field));
      std::printf("wrote %s\n", (dir / "field.svg").string().c_str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian field percolation laboratory"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<CommonOpts>> opt_store;
  int rc = 0;

  {
    auto o = std::make_unique<CommonOpts>();
    CLI::App* sub =
        app.add_subcommand("validate-kernel", "check kernel admissibility");
    attach_common(sub, *o);
    CommonOpts* op = o.get();
    sub->callback([op, &rc] { rc = run_validate_kernel(*op); });
    opt_store.push_back(std::move(o));
  }
  {
    auto o = std::make_unique<CommonOpts>();
    auto s = std::make_shared<SampleOpts>();
    CLI::App* sub =
        app.add_subcommand("sample", "draw one field and dump it");
    attach_common(sub, *o);
    sub->add_option("--spacing", s->spacing, "grid spacing");
    sub->add_option("--nx", s->nx, "grid points in x");
    sub->add_option("--ny", s->ny, "grid points in y");
    sub->add_option("--origin-x", s->origin_x, "grid origin x");
    sub->add_option("--origin-y", s->origin_y, "grid origin y");
    sub->add_option("--replica", s->replica, "replica index");
    CommonOpts* op = o.get();
    sub->callback([op, s, &rc] { rc = run_sample(*op, *s); });
    opt_store.push_back(std::move(o));
  }
  const char* experiments[] = {
      "crossing",      "fkg",           "qi-fields",      "qi-vectors",
      "ns-density",    "concentration", "one-arm",        "tassion",
      "pivotal-scaling", "mesh-uniformity", "kac-rice",   "duality-audit"};
  for (const char* name : experiments) {
    auto o = std::make_unique<CommonOpts>();
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name +
                                                 " experiment");
    attach_common(sub, *o);
    CommonOpts* op = o.get();
    const std::string id = name;
    sub->callback(
        [id, sub, op, &rc] { rc = run_experiment_command(id, sub, *op); });
    opt_store.push_back(std::move(o));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
