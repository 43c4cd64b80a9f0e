#include "runners.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>

#include "eitsim/io.hpp"
#include "eitsim/oracle.hpp"

#ifndef EITSIM_VERSION
#define EITSIM_VERSION "unknown"
#endif

namespace eitsim::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run metadata. The only file with wall-clock content; every other output is
// a pure function of the configuration and the binary.
class Manifest {
 public:
  Manifest(const std::string& command, const RunConfig& config)
      : start_(std::chrono::steady_clock::now()) {
    j_["schema_version"] = io::kSchemaVersion;
    j_["command"] = command;
    j_["code_version"] = EITSIM_VERSION;
    j_["rng"] = kRngAlgorithm;
    j_["started_utc"] = utc_now();
    j_["threads"] = config.threads;
    j_["master_seed"] = config.spectrum.plan.master_seed;
    j_["config"] = config.effective;
  }

  json& operator[](const char* key) { return j_[key]; }

  void write(const fs::path& dir, const std::string& status) {
    j_["status"] = status;
    j_["finished_utc"] = utc_now();
    j_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::write_text((dir / "manifest.json").string(), j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

json diagnostics(const SpectrumResult& r) {
  json out = json::array();
  for (const auto& rec : r.realizations) {
    out.push_back({{"realization", rec.index},
                   {"seed", rec.seed},
                   {"atoms", rec.atoms},
                   {"max_residual", rec.max_residual},
                   {"max_gamma_t", rec.max_time},
                   {"steps", rec.steps},
                   {"has_window", rec.metrics.has_value()},
                   {"negative_s33_samples", rec.physicality.negative_s33},
                   {"oversized_coherence_samples", rec.physicality.oversized_coherence}});
  }
  return out;
}

json failure_json(const SpectrumFailure& f) {
  return {{"realization", f.realization},
          {"delta1", f.delta1},
          {"convergence", f.convergence},
          {"message", f.message}};
}

void warn_physicality(const PhysicalityReport& p, const std::string& what) {
  if (p.clean()) return;
  std::cerr << "warning: " << what << ": " << p.negative_s33 << " samples with s33 < -1e-6, "
            << p.oversized_coherence << " with |coherence| > 1 + 1e-6\n";
}

ProgressFn progress_printer(const std::string& label, int realizations) {
  auto lock = std::make_shared<std::mutex>();
  return [lock, label, realizations](int r, int done, int total) {
    const int step = std::max(1, total / 4);
    if (done != total && done % step != 0) return;
    std::lock_guard<std::mutex> g(*lock);
    std::cerr << '[' << label << "] realization " << (r + 1) << '/' << realizations << ": " << done
              << '/' << total << " detunings\n";
  };
}

fs::path prepare(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

struct SpectrumOutcome {
  SpectrumResult result;
  bool failed = false;
  bool convergence = false;
};

// Writes spectrum<suffix>.csv and metrics<suffix>.json.
SpectrumOutcome spectrum_to(const SpectrumConfig& base, const fs::path& dir,
                            const std::string& suffix, const std::string& label) {
  SpectrumConfig c = base;
  c.stop_on_error = false;
  SpectrumOutcome out;
  out.result = spectrum(c, progress_printer(label, c.plan.realizations));
  json metrics = io::metrics_json(out.result);
  if (out.result.failure) {
    out.failed = true;
    out.convergence = out.result.failure->convergence;
    metrics["failure"] = failure_json(*out.result.failure);
    std::cerr << "error: " << out.result.failure->message << '\n';
  }
  io::write_text((dir / ("spectrum" + suffix + ".csv")).string(), io::spectrum_csv(out.result));
  io::write_text((dir / ("metrics" + suffix + ".json")).string(), metrics.dump(2) + "\n");
  for (const auto& rec : out.result.realizations) {
    warn_physicality(rec.physicality, label + " realization " + std::to_string(rec.index));
  }
  return out;
}

std::string csv_number(const std::optional<double>& v) {
  return v ? io::format_double(*v) : std::string("nan");
}

}  // namespace

int run_spectrum(const RunConfig& config) {
  const fs::path dir = prepare(config.output_dir);
  Manifest manifest("spectrum", config);

  const SpectrumOutcome main = spectrum_to(config.spectrum, dir, "", "spectrum");
  manifest["seeds"] = main.result.seeds();
  manifest["diagnostics"] = diagnostics(main.result);
  json outputs = {"spectrum.csv", "metrics.json"};
  bool failed = main.failed, convergence = main.convergence;
  if (main.failed) manifest["failure"] = failure_json(*main.result.failure);

  if (config.compare_none && !main.failed) {
    SpectrumConfig off = config.spectrum;
    off.params.kernel_mode = KernelMode::none;
    const SpectrumOutcome none = spectrum_to(off, dir, "_none", "spectrum/none");
    manifest["diagnostics_none"] = diagnostics(none.result);
    outputs.push_back("spectrum_none.csv");
    outputs.push_back("metrics_none.json");
    if (none.failed) manifest["failure_none"] = failure_json(*none.result.failure);
    failed = failed || none.failed;
    convergence = convergence || none.convergence;
  }
  manifest["outputs"] = outputs;
  manifest.write(dir, failed ? "partial" : "ok");
  if (!failed) return kOk;
  return convergence ? kConvergenceFailure : kCheckFailed;
}

int run_stirap(const RunConfig& config) {
  const fs::path dir = prepare(config.output_dir);
  Manifest manifest("stirap", config);
  try {
    const StirapResult r = run_stirap_ensemble(config.stirap);
    io::write_text((dir / "stirap.csv").string(), io::stirap_csv(r));
    manifest["seeds"] = r.seeds;
    json modes = json::array();
    for (const auto& m : r.modes) {
      modes.push_back({{"mode", std::string(to_string(m.mode))},
                       {"final_mean_s11", m.mean.empty() ? 0.0 : m.mean.back().mean_s11},
                       {"final_s11_per_realization", m.final_s11},
                       {"steps", m.steps},
                       {"negative_s33_samples", m.physicality.negative_s33},
                       {"oversized_coherence_samples", m.physicality.oversized_coherence}});
      warn_physicality(m.physicality, "stirap " + std::string(to_string(m.mode)));
    }
    manifest["atoms"] = r.atoms;
    manifest["modes"] = modes;
    manifest["outputs"] = {"stirap.csv"};
    manifest.write(dir, "ok");
    return kOk;
  } catch (const StiffnessError& e) {
    std::cerr << "error: " << e.what() << " at Gamma t = " << e.time() << '\n';
    manifest["failure"] = {{"message", e.what()}, {"gamma_t", e.time()}, {"step", e.step()}};
    manifest.write(dir, "failed");
    return kConvergenceFailure;
  }
}

int run_oracle(const RunConfig& config) {
  const fs::path dir = prepare(config.output_dir);
  Manifest manifest("oracle", config);
  const SpectrumConfig& s = config.spectrum;
  const oracle::SlabGeometry slab{atom_count(s.radius_kR, s.thickness_kL, s.density), s.radius_kR,
                                  s.thickness_kL};
  std::vector<io::OracleRow> rows;
  for (double d : config.oracle_grid) {
    LambdaParams p = s.params;
    p.delta1 = d;
    io::OracleRow row;
    row.delta1 = d;
    row.sigma33 = oracle::sigma33_steady(p);
    row.cross_section_k2 = oracle::scattering_cross_section(p);
    row.optical_thickness = oracle::optical_thickness(p, slab);
    rows.push_back(row);
  }
  io::write_text((dir / "oracle.csv").string(), io::oracle_csv(rows));
  manifest["atoms"] = slab.atoms;
  manifest["outputs"] = {"oracle.csv"};
  manifest.write(dir, "ok");
  return kOk;
}

int run_sweep(const RunConfig& config) {
  const fs::path dir = prepare(config.output_dir);
  Manifest manifest("sweep", config);
  const SweepPlan& plan = config.sweep;

  std::ostringstream summary;
  summary << plan.axis << ",fwhm_mean,fwhm_stderr,tmin_mean,tmin_stderr,mode\n";
  json points = json::array();
  json failures = json::array();

  for (std::size_t i = 0; i < plan.values.size(); ++i) {
    for (KernelMode mode : plan.modes) {
      SpectrumConfig c = config.spectrum;
      (plan.axis == "density" ? c.density : c.thickness_kL) = plan.values[i];
      c.params.kernel_mode = mode;
      char name[64];
      std::snprintf(name, sizeof name, "point_%03zu_%s", i, std::string(to_string(mode)).c_str());
      const fs::path pdir = prepare((dir / name).string());
      const std::string label = "sweep " + plan.axis + "=" + io::format_double(plan.values[i]) +
                                " " + std::string(to_string(mode));

      std::optional<double> fm, fe, tm, te;
      json point = {{"directory", name}, {"value", plan.values[i]}, {"mode", std::string(to_string(mode))}};
      try {
        const SpectrumOutcome out = spectrum_to(c, pdir, "", label);
        point["seeds"] = out.result.seeds();
        point["diagnostics"] = diagnostics(out.result);
        if (out.failed) {
          json f = failure_json(*out.result.failure);
          f["point"] = name;
          failures.push_back(f);
        } else {
          try {
            const EnsembleStats f = out.result.fwhm_stats();
            const EnsembleStats t = out.result.tmin_stats();
            fm = f.mean;
            fe = f.std_error;
            tm = t.mean;
            te = t.std_error;
          } catch (const ShapeError& e) {
            failures.push_back({{"point", name}, {"message", e.what()}, {"convergence", false}});
          }
        }
      } catch (const std::exception& e) {
        std::cerr << "error: " << label << ": " << e.what() << '\n';
        failures.push_back({{"point", name}, {"message", e.what()}, {"convergence", false}});
      }
      summary << io::format_double(plan.values[i]) << ',' << csv_number(fm) << ',' << csv_number(fe)
              << ',' << csv_number(tm) << ',' << csv_number(te) << ',' << to_string(mode) << '\n';
      points.push_back(point);
    }
  }

  io::write_text((dir / "summary.csv").string(), summary.str());
  manifest["points"] = points;
  manifest["failures"] = failures;
  manifest["outputs"] = {"summary.csv"};
  manifest.write(dir, failures.empty() ? "ok" : "partial");
  return failures.empty() ? kOk : kPartialSweep;
}

namespace {

struct Check {
  std::string name;
  bool ok;
  std::string detail;
};

Check check_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    LambdaParams p;
    p.gamma1_frac = 0.1 + 0.8 * u(rng);
    p.gamma2_frac = 1.0 - p.gamma1_frac;
    p.omega1 = 0.05 + 0.45 * u(rng);
    p.omega2 = 0.05 + 0.45 * u(rng);
    p.delta1 = 2.0 * u(rng) - 1.0;
    CloudGeometry one;
    one.positions = {{0, 0, 0}};
    const SteadyState ss = solve_steady_state(one, build_matrices(one, p), p);
    const double ref = oracle::sigma33_steady(p);
    const double err = std::abs(ss.state.s33(0) - ref);
    worst = std::max(worst, err / std::max(std::abs(ref), 1e-4));
  }
  return {"single-atom steady state matches the closed form", worst < 1e-6,
          "worst relative error " + io::format_double(worst)};
}

Check check_dark_state() {
  double worst = 0.0;
  for (KernelMode mode : {KernelMode::none, KernelMode::scalar, KernelMode::vectorial}) {
    LambdaParams p;
    p.kernel_mode = mode;
    p.k2_over_k1 = 1.1;
    const CloudGeometry cloud = sample_cloud(4, 4, 0.2, 11);
    const auto n = static_cast<Eigen::Index>(cloud.size());
    EnsembleState s(n);
    const double norm = p.omega1 * p.omega1 + p.omega2 * p.omega2;
    for (Eigen::Index j = 0; j < n; ++j) {
      s.s11()[j] = p.omega2 * p.omega2 / norm;
      s.s22()[j] = p.omega1 * p.omega1 / norm;
      s.s12()[j] = -(p.omega1 / p.omega2) *
                   std::polar(1.0, (1.0 - p.k2_over_k1) * cloud.positions[static_cast<std::size_t>(j)][2]) *
                   s.s11()[j];
    }
    const InteractionMatrices m = build_matrices(cloud, p);
    Eigen::VectorXcd d;
    MeanFieldSystem(cloud, m, p).derivative(s.packed(), Drives{p.omega1, p.omega2}, d);
    worst = std::max(worst, derivative_max_norm(d));
  }
  return {"dark state is a fixed point in every kernel mode", worst < 1e-12,
          "max |derivative| " + io::format_double(worst)};
}

Check check_matrices() {
  const CloudGeometry cloud = sample_cloud(6, 6, 0.05, 3);
  bool ok = true;
  for (KernelMode mode : {KernelMode::scalar, KernelMode::vectorial}) {
    LambdaParams p;
    p.kernel_mode = mode;
    const InteractionMatrices m = build_matrices(cloud, p);
    ok = ok && m.g1 == m.g1.transpose() && m.g1.diagonal().isZero(0.0) && m.g1.allFinite();
  }
  LambdaParams off;
  off.kernel_mode = KernelMode::none;
  ok = ok && build_matrices(cloud, off).g1.isZero(0.0);
  return {"interaction matrices symmetric, zero diagonal, zero when off", ok,
          std::to_string(cloud.size()) + " atoms"};
}

Check check_cloud() {
  const CloudGeometry c = sample_cloud(20, 20, 0.01, 5);
  bool inside = true;
  for (const Vec3& p : c.positions) {
    inside = inside && p[0] * p[0] + p[1] * p[1] <= 400.0 && std::abs(p[2]) <= 10.0;
  }
  const bool same = sample_cloud(20, 20, 0.01, 5).positions == c.positions;
  return {"cloud containment, exclusion and reproducibility",
          c.size() == 251 && inside && min_pair_distance(c) >= 0.05 && same,
          std::to_string(c.size()) + " atoms"};
}

Check check_determinism(int threads) {
  SpectrumConfig c;
  c.radius_kR = 6.0;
  c.thickness_kL = 6.0;
  c.delta1_grid = uniform_grid(-0.4, 0.4, 9);
  c.plan.realizations = 2;
  c.threads = 1;
  auto render = [](const SpectrumResult& r) {
    return io::spectrum_csv(r) + io::metrics_json(r).dump();
  };
  const std::string a = render(spectrum(c));
  c.threads = std::max(2, threads);
  const std::string b = render(spectrum(c));
  return {"spectrum outputs identical across runs and thread counts", a == b,
          std::to_string(a.size()) + " bytes compared"};
}

Check check_transparency() {
  SpectrumConfig c;
  c.radius_kR = 10.0;
  c.thickness_kL = 6.0;
  c.delta1_grid = {0.0};
  c.plan.realizations = 1;
  const double t = spectrum(c).t_mean[0];
  return {"transmission on resonance equals one", std::abs(t - 1.0) < 1e-3,
          "T = " + io::format_double(t)};
}

Check check_optical_thickness() {
  LambdaParams p;
  p.delta1 = 0.125;
  const double b = oracle::optical_thickness(p, {atom_count(50, 40, 0.01), 50, 40});
  return {"optical thickness at the reference EIT point", std::abs(b - 0.36) <= 0.02,
          "b = " + io::format_double(b)};
}

}  // namespace

int run_validate(const RunConfig& config) {
  std::vector<std::function<Check()>> checks = {
      check_oracle, check_dark_state, check_matrices, check_cloud,
      [&] { return check_determinism(config.threads); }, check_transparency,
      check_optical_thickness};
  int failed = 0;
  for (const auto& fn : checks) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c = {"(check threw)", false, e.what()};
    }
    std::cout << (c.ok ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    failed += c.ok ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed")
            << '\n';
  return failed == 0 ? kOk : kCheckFailed;
}

}  // namespace eitsim::cli
