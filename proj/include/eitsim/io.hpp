#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "eitsim/cloud.hpp"
#include "eitsim/dynamics.hpp"
#include "eitsim/observables.hpp"
#include "eitsim/stirap.hpp"

namespace eitsim::io {

inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form ("%.17g"), so equal doubles give equal bytes.
std::string format_double(double x);

/// Writes `content` to `path`, throwing std::runtime_error on failure.
void write_text(const std::string& path, const std::string& content);

/// delta1_over_gamma,t_mean,t_stderr,n_realizations
std::string spectrum_csv(const SpectrumResult& result);

/// t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2 (one block per kernel
/// mode, with a leading `mode` column when more than one mode is present).
std::string stirap_csv(const StirapResult& result);
std::string trajectory_csv(const std::vector<TrajectorySample>& samples);

struct OracleRow {
  double delta1 = 0.0;
  double sigma33 = 0.0;
  double cross_section_k2 = 0.0;
  double optical_thickness = 0.0;
};
/// delta1_over_gamma,sigma33,sigma_sc_k1sq,b
std::string oracle_csv(const std::vector<OracleRow>& rows);

/// atom_index,kx,ky,kz
std::string positions_csv(const CloudGeometry& cloud);

/// Per-atom steady-state dump for debugging.
std::string state_csv(const EnsembleState& state);

nlohmann::ordered_json to_json(const LambdaParams& p);
nlohmann::ordered_json to_json(const WindowMetrics& m);
nlohmann::ordered_json to_json(const CloudGeometry& cloud);  // parameters, no positions

/// fwhm (mean curve), fwhm_mean/fwhm_stderr (per realization), t_peak, t_min,
/// valleys, parameter snapshot and seeds. Contains nothing time-dependent.
nlohmann::ordered_json metrics_json(const SpectrumResult& result);

}  // namespace eitsim::io
