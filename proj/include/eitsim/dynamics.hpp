#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "eitsim/cloud.hpp"
#include "eitsim/integrator.hpp"
#include "eitsim/kernel.hpp"
#include "eitsim/params.hpp"

namespace eitsim {

/// Per-atom expectation values, stored component-major in one vector of
/// length 5N: [s11 | s22 | s13 | s23 | s12]. Populations carry a zero
/// imaginary part. s33 is never stored; it is 1 - s11 - s22.
class EnsembleState {
 public:
  EnsembleState() = default;
  explicit EnsembleState(Eigen::Index atoms);
  EnsembleState(Eigen::Index atoms, Eigen::VectorXcd packed, double time = 0.0);

  /// Every atom in |1>.
  static EnsembleState ground(Eigen::Index atoms);

  Eigen::Index atoms() const { return n_; }
  double time = 0.0;

  auto s11() { return data_.segment(0, n_); }
  auto s22() { return data_.segment(n_, n_); }
  auto s13() { return data_.segment(2 * n_, n_); }
  auto s23() { return data_.segment(3 * n_, n_); }
  auto s12() { return data_.segment(4 * n_, n_); }
  auto s11() const { return data_.segment(0, n_); }
  auto s22() const { return data_.segment(n_, n_); }
  auto s13() const { return data_.segment(2 * n_, n_); }
  auto s23() const { return data_.segment(3 * n_, n_); }
  auto s12() const { return data_.segment(4 * n_, n_); }

  double s33(Eigen::Index j) const { return 1.0 - data_[j].real() - data_[n_ + j].real(); }
  Eigen::VectorXd s33() const;

  const Eigen::VectorXcd& packed() const { return data_; }
  Eigen::VectorXcd& packed() { return data_; }

  double mean_s11() const;
  double mean_s22() const;
  double mean_s33() const;

 private:
  Eigen::Index n_ = 0;
  Eigen::VectorXcd data_;
};

/// Pulse shapes for the counterintuitive sequence. `shifted` measures the
/// ramp phase from t0 so both drives are continuous; `literal` uses pi t / (2 tr)
/// from t = 0, with jumps at t0 and tf when t0 != 0.
enum class PulseConvention { shifted, literal };

std::string_view to_string(PulseConvention c);
PulseConvention pulse_convention_from_string(std::string_view name);

struct StirapSchedule {
  double omega_max = 0.5;
  double t0 = 10.0;
  double tr = 60.0;
  PulseConvention convention = PulseConvention::shifted;

  double tf() const { return t0 + tr; }
  void validate() const;
};

struct Drives {
  double omega1 = 0.0;
  double omega2 = 0.0;
};

Drives stirap_drives(double t, const StirapSchedule& schedule);

/// Constant drive taken from LambdaParams::omega1/omega2.
struct StaticDrive {};
using DriveSpec = std::variant<StaticDrive, StirapSchedule>;

/// Immutable per-realization context for right-hand-side evaluation: the
/// plane-wave phases e^{i k_n z_j} and the interaction matrices.
class MeanFieldSystem {
 public:
  MeanFieldSystem(const CloudGeometry& cloud, const InteractionMatrices& matrices,
                  const LambdaParams& params);

  Eigen::Index atoms() const { return n_; }
  const LambdaParams& params() const { return params_; }

  /// F_n^j = i Omega_n e^{i k_n z_j} + sum_{l != j} G_n^{jl} s_n3^l for n = 1, 2.
  void effective_fields(const EnsembleState& state, const Drives& drives, Eigen::VectorXcd& f1,
                        Eigen::VectorXcd& f2) const;
  /// Same, on the packed layout.
  void effective_fields(const Eigen::VectorXcd& packed, const Drives& drives,
                        Eigen::VectorXcd& f1, Eigen::VectorXcd& f2) const;

  /// Time derivative in the packed layout.
  void derivative(const Eigen::VectorXcd& packed, const Drives& drives,
                  Eigen::VectorXcd& out) const;

 private:
  Eigen::Index n_;
  LambdaParams params_;
  const InteractionMatrices* matrices_;
  Eigen::VectorXcd phase1_, phase2_;
  mutable Eigen::MatrixXcd scratch_in_, scratch_out_;
};

/// Effective fields for a single transition (1 or 2).
Eigen::VectorXcd effective_field(const EnsembleState& state, const InteractionMatrices& matrices,
                                 const LambdaParams& params, const CloudGeometry& cloud,
                                 int transition);

/// Local equations of motion given precomputed fields.
EnsembleState rhs(const EnsembleState& state, const Eigen::VectorXcd& f1,
                  const Eigen::VectorXcd& f2, const LambdaParams& params);

/// Largest |component| of the packed derivative.
double derivative_max_norm(const Eigen::VectorXcd& d);

struct PhysicalityReport {
  long negative_s33 = 0;       // samples with s33 < -1e-6
  long oversized_coherence = 0;  // samples with |coherence| > 1 + 1e-6
  bool clean() const { return negative_s33 == 0 && oversized_coherence == 0; }
};

void check_physicality(const EnsembleState& state, PhysicalityReport& report);

struct TrajectorySample {
  double t = 0.0;
  double mean_s11 = 0.0;
  double mean_s22 = 0.0;
  double mean_s33 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  EnsembleState final_state;
  /// Full states at the sample times, only when requested.
  std::vector<EnsembleState> states;
  long steps = 0;
  long rhs_evaluations = 0;
  PhysicalityReport physicality;
};

struct IntegrateOptions {
  Tolerances tolerances;
  bool keep_states = false;
};

/// Integrates from `initial` (time taken from initial.time) to t_end and
/// records samples at `sample_times` (sorted, inside [initial.time, t_end])
/// via dense output. Pulse breakpoints t0 and tf are always hit exactly.
Trajectory integrate(const EnsembleState& initial, const CloudGeometry& cloud,
                     const InteractionMatrices& matrices, const LambdaParams& params,
                     const DriveSpec& drive, double t_end, const std::vector<double>& sample_times,
                     const IntegrateOptions& options = {});

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<std::pair<double, double>> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  /// (Gamma t, residual max-norm) pairs sampled during the run.
  const std::vector<std::pair<double, double>>& history() const { return history_; }

 private:
  std::vector<std::pair<double, double>> history_;
};

struct SteadyStateOptions {
  // Tighter than the trajectory defaults: once steps are stability limited
  // the state carries noise near the tolerance, which would keep the
  // derivative norm above residual_target.
  Tolerances tolerances{1e-10, 1e-12};
  double residual_target = 1e-8;  // max-norm of the derivative, units of Gamma
  double t_max = 2000.0;
  /// Newton refinement of an integrated state once its residual is below
  /// polish_threshold, for systems up to polish_max_atoms atoms. Zero disables.
  double polish_threshold = 1e-5;
  Eigen::Index polish_max_atoms = 16;
  /// Last attempt at t_max: a state whose residual is below fallback_threshold
  /// is refined by Newton steps (up to fallback_max_atoms atoms) and accepted
  /// only if it reaches residual_target and passes the physicality check.
  /// Close pairs far off resonance relax on time scales of 1e4-1e5 / Gamma.
  double fallback_threshold = 1e-3;
  Eigen::Index fallback_max_atoms = 400;
};

struct SteadyState {
  EnsembleState state;
  double residual = 0.0;
  double time = 0.0;
  long steps = 0;
  bool polished = false;
  PhysicalityReport physicality;
};

/// Integrates from all atoms in |1> under a static drive until the
/// derivative max-norm drops below residual_target.
SteadyState solve_steady_state(const CloudGeometry& cloud, const InteractionMatrices& matrices,
                               const LambdaParams& params, const SteadyStateOptions& options = {});

}  // namespace eitsim
