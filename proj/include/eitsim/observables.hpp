#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitsim/cloud.hpp"
#include "eitsim/dynamics.hpp"
#include "eitsim/kernel.hpp"
#include "eitsim/params.hpp"

namespace eitsim {

class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Probe field at `point` (k1 units) normalized to the incident amplitude:
///   e^{i z} - (Gamma1 / (2 Omega1)) sum_j s13_j e^{i d_j} / d_j,  d_j = |r - r_j|.
/// Throws SingularityError when the point is closer than the exclusion
/// distance to an atom, std::domain_error when Omega1 == 0.
cdouble total_field(const Vec3& point, const EnsembleState& state, const CloudGeometry& cloud,
                    const LambdaParams& params);

/// |total_field|^2 + (Gamma1 / (2 Omega1))^2 sum_j (s33_j - |s13_j|^2) / d_j^2.
double intensity(const Vec3& point, const EnsembleState& state, const CloudGeometry& cloud,
                 const LambdaParams& params);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Disk quadrature (Gauss-Legendre in s, uniform in angle) with the field
/// propagators from every atom to every node cached. Building it costs
/// O(nodes x atoms); each transmission evaluation is then two dense products.
class DetectorProjector {
 public:
  DetectorProjector(const CloudGeometry& cloud, const DetectorDisk& detector);

  /// Mean of the intensity over the disk, in units of the incident intensity.
  double transmission(const EnsembleState& state, const LambdaParams& params) const;

  Eigen::Index node_count() const { return static_cast<Eigen::Index>(weights_.size()); }

 private:
  Eigen::VectorXd weights_;      // already divided by the disk area
  Eigen::VectorXcd incident_;    // e^{i z0}
  Eigen::MatrixXcd spherical_;   // e^{i d} / d
  Eigen::MatrixXd inverse_sq_;   // 1 / d^2
};

/// T = (1 / (pi s_max^2)) * integral over the disk of intensity(s, z0).
double transmission(const EnsembleState& state, const CloudGeometry& cloud,
                    const LambdaParams& params, const DetectorDisk& detector);

struct EnsembleStats {
  double mean = 0.0;
  std::optional<double> std_error;  // absent for a single value
  std::size_t count = 0;
};

/// Arithmetic mean and sample standard deviation / sqrt(n).
EnsembleStats ensemble_stats(const std::vector<double>& values);

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WindowMetrics {
  double fwhm = 0.0;
  double t_peak = 0.0;
  double t_min = 0.0;
  double valley_left = 0.0;   // detuning of the Delta1 < 0 valley
  double valley_right = 0.0;  // detuning of the Delta1 > 0 valley
  double t_valley_left = 0.0;
  double t_valley_right = 0.0;
  double delta_peak = 0.0;
};

/// Width of the transparency window. The valleys are the lowest points on
/// each side of Delta1 = 0, the peak is the highest point between them and
/// the half level is (peak + mean valley) / 2; crossings are linearly
/// interpolated. Throws ShapeError when the curve has no such structure.
WindowMetrics window_metrics(const std::vector<double>& delta1_grid,
                             const std::vector<double>& curve);

/// Uniform grid of `points` detunings over [lo, hi].
std::vector<double> uniform_grid(double lo, double hi, int points);

struct DetectorSpec {
  double z0_offset = 10.0;      // z0 = L/2 + offset
  double s_max_fraction = 0.6;  // s_max = fraction * R
  int radial_nodes = 64;
  int angular_nodes = 128;

  DetectorDisk for_cloud(const CloudGeometry& cloud) const;
};

struct RealizationPlan {
  std::uint64_t master_seed = 1;
  int realizations = 8;  // fixed count, or the cap in adaptive mode
  bool adaptive = false;
  int min_realizations = 4;
  double target_relative_stderr = 0.02;  // FWHM standard error / mean
};

struct SpectrumConfig {
  double radius_kR = 20.0;
  double thickness_kL = 20.0;
  double density = 0.01;
  double min_pair_separation_k = 0.05;
  LambdaParams params;
  DetectorSpec detector;
  std::vector<double> delta1_grid = uniform_grid(-0.5, 0.5, 101);
  RealizationPlan plan;
  SteadyStateOptions steady;
  int threads = 1;
  /// When false, a failing realization ends the run but the completed
  /// realizations are returned with SpectrumResult::failure set.
  bool stop_on_error = true;
};

struct RealizationRecord {
  int index = 0;
  std::uint64_t seed = 0;
  std::size_t atoms = 0;
  std::vector<double> transmission;
  std::optional<WindowMetrics> metrics;  // absent when the curve has no window
  double max_residual = 0.0;
  double max_time = 0.0;
  long steps = 0;
  PhysicalityReport physicality;
};

struct SpectrumFailure {
  int realization = 0;
  double delta1 = 0.0;
  bool convergence = false;
  std::string message;
};

struct SpectrumResult {
  std::vector<double> delta1_grid;
  std::vector<RealizationRecord> realizations;
  std::vector<double> t_mean;
  std::vector<std::optional<double>> t_stderr;
  SpectrumConfig config;
  std::optional<SpectrumFailure> failure;  // only with stop_on_error == false

  std::vector<std::uint64_t> seeds() const;
  /// Metrics of the mean curve; throws ShapeError if it has no window.
  WindowMetrics mean_metrics() const;
  /// Statistics of the per-realization FWHM / T_min (realizations without a window skipped).
  EnsembleStats fwhm_stats() const;
  EnsembleStats tmin_stats() const;
};

/// Failure of one (realization, Delta1) task.
class SpectrumError : public std::runtime_error {
 public:
  SpectrumError(const std::string& what, int realization, double delta1, bool convergence)
      : std::runtime_error(what),
        realization_(realization),
        delta1_(delta1),
        convergence_(convergence) {}
  int realization() const { return realization_; }
  double delta1() const { return delta1_; }
  /// True when the cause was a steady-state or integrator failure.
  bool convergence_failure() const { return convergence_; }

 private:
  int realization_;
  double delta1_;
  bool convergence_;
};

using ProgressFn = std::function<void(int realization, int done_points, int total_points)>;

/// For every realization: a fresh cloud from derive_seed(master, index), its
/// interaction matrices, and a steady state plus transmission at every grid
/// detuning. Grid points of one realization run on `config.threads` workers.
SpectrumResult spectrum(const SpectrumConfig& config, const ProgressFn& progress = {});

}  // namespace eitsim
