#include "eitsim/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eitsim::io {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::string spectrum_csv(const SpectrumResult& result) {
  std::ostringstream os;
  os << "delta1_over_gamma,t_mean,t_stderr,n_realizations\n";
  for (std::size_t i = 0; i < result.delta1_grid.size(); ++i) {
    os << format_double(result.delta1_grid[i]) << ',' << format_double(result.t_mean[i]) << ','
       << (result.t_stderr[i] ? format_double(*result.t_stderr[i]) : std::string("nan")) << ','
       << result.realizations.size() << '\n';
  }
  return os.str();
}

namespace {

void trajectory_rows(std::ostringstream& os, const std::vector<TrajectorySample>& samples,
                     const std::string& prefix) {
  for (const auto& s : samples) {
    os << prefix << format_double(s.t) << ',' << format_double(s.mean_s11) << ','
       << format_double(s.mean_s22) << ',' << format_double(s.mean_s33) << ','
       << format_double(s.omega1) << ',' << format_double(s.omega2) << '\n';
  }
}

}  // namespace

std::string trajectory_csv(const std::vector<TrajectorySample>& samples) {
  std::ostringstream os;
  os << "t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2\n";
  trajectory_rows(os, samples, "");
  return os.str();
}

std::string stirap_csv(const StirapResult& result) {
  if (result.modes.size() == 1) return trajectory_csv(result.modes.front().mean);
  std::ostringstream os;
  os << "mode,t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2\n";
  for (const auto& m : result.modes) {
    trajectory_rows(os, m.mean, std::string(to_string(m.mode)) + ",");
  }
  return os.str();
}

std::string oracle_csv(const std::vector<OracleRow>& rows) {
  std::ostringstream os;
  os << "delta1_over_gamma,sigma33,sigma_sc_k1sq,b\n";
  for (const auto& r : rows) {
    os << format_double(r.delta1) << ',' << format_double(r.sigma33) << ','
       << format_double(r.cross_section_k2) << ',' << format_double(r.optical_thickness) << '\n';
  }
  return os.str();
}

std::string positions_csv(const CloudGeometry& cloud) {
  std::ostringstream os;
  os << "atom_index,kx,ky,kz\n";
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const auto& p = cloud.positions[j];
    os << j << ',' << format_double(p[0]) << ',' << format_double(p[1]) << ','
       << format_double(p[2]) << '\n';
  }
  return os.str();
}

std::string state_csv(const EnsembleState& s) {
  std::ostringstream os;
  os << "atom_index,s11,s22,s33,re_s13,im_s13,re_s23,im_s23,re_s12,im_s12\n";
  for (Eigen::Index j = 0; j < s.atoms(); ++j) {
    os << j << ',' << format_double(s.s11()[j].real()) << ',' << format_double(s.s22()[j].real())
       << ',' << format_double(s.s33(j)) << ',' << format_double(s.s13()[j].real()) << ','
       << format_double(s.s13()[j].imag()) << ',' << format_double(s.s23()[j].real()) << ','
       << format_double(s.s23()[j].imag()) << ',' << format_double(s.s12()[j].real()) << ','
       << format_double(s.s12()[j].imag()) << '\n';
  }
  return os.str();
}

nlohmann::ordered_json to_json(const LambdaParams& p) {
  return {{"gamma1_frac", p.gamma1_frac},
          {"gamma2_frac", p.gamma2_frac},
          {"omega1", p.omega1},
          {"omega2", p.omega2},
          {"delta1", p.delta1},
          {"delta2", p.delta2},
          {"k2_over_k1", p.k2_over_k1},
          {"kernel_mode", std::string(to_string(p.kernel_mode))},
          {"population_feed", std::string(to_string(p.population_feed))}};
}

nlohmann::ordered_json to_json(const WindowMetrics& m) {
  return {{"fwhm", m.fwhm},
          {"t_peak", m.t_peak},
          {"delta_peak", m.delta_peak},
          {"t_min", m.t_min},
          {"valley_left", m.valley_left},
          {"valley_right", m.valley_right},
          {"t_valley_left", m.t_valley_left},
          {"t_valley_right", m.t_valley_right}};
}

nlohmann::ordered_json to_json(const CloudGeometry& c) {
  return {{"radius_kR", c.radius_kR},
          {"thickness_kL", c.thickness_kL},
          {"density", c.density},
          {"atom_count", c.size()},
          {"seed", c.seed},
          {"min_pair_separation_k", c.min_pair_separation_k},
          {"rng", kRngAlgorithm}};
}

nlohmann::ordered_json metrics_json(const SpectrumResult& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  try {
    const WindowMetrics m = r.mean_metrics();
    j["window"] = to_json(m);
    j["fwhm"] = m.fwhm;
    j["t_peak"] = m.t_peak;
    j["t_min"] = m.t_min;
    j["valley_detunings"] = {m.valley_left, m.valley_right};
  } catch (const ShapeError& e) {
    j["window"] = nullptr;
    j["fwhm"] = nullptr;
    j["shape_error"] = e.what();
  }
  auto stat = [&](const char* mean_key, const char* err_key, auto&& fn) {
    try {
      const EnsembleStats st = fn();
      j[mean_key] = st.mean;
      j[err_key] = st.std_error ? nlohmann::ordered_json(*st.std_error) : nlohmann::ordered_json();
    } catch (const ShapeError&) {
      j[mean_key] = nullptr;
      j[err_key] = nullptr;
    }
  };
  stat("fwhm_mean", "fwhm_stderr", [&] { return r.fwhm_stats(); });
  stat("tmin_mean", "tmin_stderr", [&] { return r.tmin_stats(); });

  int windows = 0;
  for (const auto& rec : r.realizations) windows += rec.metrics ? 1 : 0;
  j["n_realizations"] = r.realizations.size();
  j["n_realizations_with_window"] = windows;

  const SpectrumConfig& c = r.config;
  j["parameters"] = {{"radius_kR", c.radius_kR},
                     {"thickness_kL", c.thickness_kL},
                     {"density", c.density},
                     {"min_pair_separation_k", c.min_pair_separation_k},
                     {"lambda", to_json(c.params)},
                     {"detector",
                      {{"z0_offset", c.detector.z0_offset},
                       {"s_max_fraction", c.detector.s_max_fraction},
                       {"radial_nodes", c.detector.radial_nodes},
                       {"angular_nodes", c.detector.angular_nodes}}},
                     {"master_seed", c.plan.master_seed}};
  j["seeds"] = r.seeds();
  return j;
}

}  // namespace eitsim::io
