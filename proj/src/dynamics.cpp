#include "eitsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace eitsim {

EnsembleState::EnsembleState(Eigen::Index atoms) : n_(atoms), data_(Eigen::VectorXcd::Zero(5 * atoms)) {}

EnsembleState::EnsembleState(Eigen::Index atoms, Eigen::VectorXcd packed, double t)
    : time(t), n_(atoms), data_(std::move(packed)) {
  if (data_.size() != 5 * n_) throw std::invalid_argument("EnsembleState: packed size must be 5N");
}

EnsembleState EnsembleState::ground(Eigen::Index atoms) {
  EnsembleState s(atoms);
  s.s11().setOnes();
  return s;
}

Eigen::VectorXd EnsembleState::s33() const {
  Eigen::VectorXd out(n_);
  for (Eigen::Index j = 0; j < n_; ++j) out[j] = s33(j);
  return out;
}

double EnsembleState::mean_s11() const { return n_ == 0 ? 0.0 : s11().real().mean(); }
double EnsembleState::mean_s22() const { return n_ == 0 ? 0.0 : s22().real().mean(); }
double EnsembleState::mean_s33() const {
  return n_ == 0 ? 0.0 : 1.0 - mean_s11() - mean_s22();
}

std::string_view to_string(PulseConvention c) {
  return c == PulseConvention::shifted ? "shifted" : "literal";
}

PulseConvention pulse_convention_from_string(std::string_view name) {
  if (name == "shifted") return PulseConvention::shifted;
  if (name == "literal") return PulseConvention::literal;
  throw std::invalid_argument("unknown pulse convention '" + std::string(name) +
                              "' (expected shifted or literal)");
}

void StirapSchedule::validate() const {
  if (!(t0 >= 0.0)) throw std::invalid_argument("stirap: t0 must be >= 0");
  if (!(tr > 0.0)) throw std::invalid_argument("stirap: tr must be > 0");
  if (!(omega_max >= 0.0)) throw std::invalid_argument("stirap: omega_max must be >= 0");
}

namespace {

enum class PulseRegion { before, ramp, after };

PulseRegion region_of(double t, const StirapSchedule& s) {
  if (t < s.t0) return PulseRegion::before;
  if (t > s.tf()) return PulseRegion::after;
  return PulseRegion::ramp;
}

Drives drives_in(PulseRegion region, double t, const StirapSchedule& s) {
  switch (region) {
    case PulseRegion::before: return {0.0, s.omega_max};
    case PulseRegion::after: return {s.omega_max, 0.0};
    case PulseRegion::ramp: break;
  }
  const double origin = s.convention == PulseConvention::shifted ? s.t0 : 0.0;
  const double phase = std::numbers::pi * (t - origin) / (2.0 * s.tr);
  return {s.omega_max * std::sin(phase), s.omega_max * std::cos(phase)};
}

}  // namespace

Drives stirap_drives(double t, const StirapSchedule& schedule) {
  return drives_in(region_of(t, schedule), t, schedule);
}

MeanFieldSystem::MeanFieldSystem(const CloudGeometry& cloud, const InteractionMatrices& matrices,
                                 const LambdaParams& params)
    : n_(static_cast<Eigen::Index>(cloud.size())), params_(params), matrices_(&matrices) {
  if (matrices.size() != n_) {
    throw std::invalid_argument("MeanFieldSystem: interaction matrices do not match the cloud size");
  }
  phase1_.resize(n_);
  phase2_.resize(n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    const double z = cloud.positions[static_cast<std::size_t>(j)][2];
    phase1_[j] = std::polar(1.0, z);
    phase2_[j] = std::polar(1.0, params.k2_over_k1 * z);
  }
  scratch_in_.resize(n_, 2);
  scratch_out_.resize(n_, 2);
}

void MeanFieldSystem::effective_fields(const Eigen::VectorXcd& packed, const Drives& drives,
                                       Eigen::VectorXcd& f1, Eigen::VectorXcd& f2) const {
  if (packed.size() != 5 * n_) {
    throw std::invalid_argument("effective_fields: state size does not match the system");
  }
  const cdouble i1(0.0, drives.omega1);
  const cdouble i2(0.0, drives.omega2);
  f1.noalias() = i1 * phase1_;
  f2.noalias() = i2 * phase2_;
  if (matrices_->mode == KernelMode::none || n_ < 2) return;

  const auto s13 = packed.segment(2 * n_, n_);
  const auto s23 = packed.segment(3 * n_, n_);
  if (matrices_->shared) {
    scratch_in_.col(0) = s13;
    scratch_in_.col(1) = s23;
    scratch_out_.noalias() = matrices_->g1 * scratch_in_;
    f1 += scratch_out_.col(0);
    f2 += scratch_out_.col(1);
  } else {
    f1.noalias() += matrices_->g1 * s13;
    f2.noalias() += matrices_->g2 * s23;
  }
}

void MeanFieldSystem::effective_fields(const EnsembleState& state, const Drives& drives,
                                       Eigen::VectorXcd& f1, Eigen::VectorXcd& f2) const {
  if (state.atoms() != n_) {
    throw std::invalid_argument("effective_fields: state size does not match the system");
  }
  effective_fields(state.packed(), drives, f1, f2);
}

namespace {

// Local (per-atom) part of the equations of motion. `in` and `out` use the
// packed layout; f1, f2 are the effective fields.
void local_derivative(const Eigen::VectorXcd& in, const Eigen::VectorXcd& f1,
                      const Eigen::VectorXcd& f2, const LambdaParams& p, Eigen::VectorXcd& out) {
  const Eigen::Index n = f1.size();
  out.resize(5 * n);
  const double feed = p.population_feed == PopulationFeed::physical ? 1.0 : 0.5;
  const double g1 = feed * p.gamma1_frac;
  const double g2 = feed * p.gamma2_frac;
  const double half_gamma = 0.5 * (p.gamma1_frac + p.gamma2_frac);
  const cdouble decay13(half_gamma, p.delta1);
  const cdouble decay23(half_gamma, p.delta2);
  const cdouble rot12(0.0, p.delta2 - p.delta1);

  const cdouble* y = in.data();
  cdouble* d = out.data();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double s11 = y[j].real();
    const double s22 = y[n + j].real();
    const cdouble s13 = y[2 * n + j];
    const cdouble s23 = y[3 * n + j];
    const cdouble s12 = y[4 * n + j];
    const double s33 = 1.0 - s11 - s22;
    const cdouble F1 = f1[j];
    const cdouble F2 = f2[j];

    d[j] = g1 * s33 + (std::conj(s13) * F1).real();
    d[n + j] = g2 * s33 + (std::conj(s23) * F2).real();
    d[2 * n + j] = -decay13 * s13 - 0.5 * ((s11 - s33) * F1 + s12 * F2);
    d[3 * n + j] = -decay23 * s23 - 0.5 * ((s22 - s33) * F2 + std::conj(s12) * F1);
    d[4 * n + j] = rot12 * s12 + 0.5 * (std::conj(s23) * F1 + s13 * std::conj(F2));
  }
}

}  // namespace

void MeanFieldSystem::derivative(const Eigen::VectorXcd& packed, const Drives& drives,
                                 Eigen::VectorXcd& out) const {
  thread_local Eigen::VectorXcd f1, f2;
  f1.resize(n_);
  f2.resize(n_);
  effective_fields(packed, drives, f1, f2);
  local_derivative(packed, f1, f2, params_, out);
}

Eigen::VectorXcd effective_field(const EnsembleState& state, const InteractionMatrices& matrices,
                                 const LambdaParams& params, const CloudGeometry& cloud,
                                 int transition) {
  if (transition != 1 && transition != 2) {
    throw std::invalid_argument("effective_field: transition must be 1 or 2");
  }
  if (state.atoms() != static_cast<Eigen::Index>(cloud.size())) {
    throw std::invalid_argument("effective_field: state size does not match the cloud");
  }
  MeanFieldSystem sys(cloud, matrices, params);
  Eigen::VectorXcd f1(state.atoms()), f2(state.atoms());
  sys.effective_fields(state, Drives{params.omega1, params.omega2}, f1, f2);
  return transition == 1 ? f1 : f2;
}

EnsembleState rhs(const EnsembleState& state, const Eigen::VectorXcd& f1,
                  const Eigen::VectorXcd& f2, const LambdaParams& params) {
  if (f1.size() != state.atoms() || f2.size() != state.atoms()) {
    throw std::invalid_argument("rhs: field sizes do not match the state");
  }
  Eigen::VectorXcd out;
  local_derivative(state.packed(), f1, f2, params, out);
  return EnsembleState(state.atoms(), std::move(out), state.time);
}

double derivative_max_norm(const Eigen::VectorXcd& d) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) m = std::max(m, std::abs(d[i]));
  return m;
}

void check_physicality(const EnsembleState& state, PhysicalityReport& report) {
  constexpr double tol = 1e-6;
  for (Eigen::Index j = 0; j < state.atoms(); ++j) {
    if (state.s33(j) < -tol) ++report.negative_s33;
    if (std::abs(state.s13()[j]) > 1.0 + tol || std::abs(state.s23()[j]) > 1.0 + tol ||
        std::abs(state.s12()[j]) > 1.0 + tol) {
      ++report.oversized_coherence;
    }
  }
}

namespace {

TrajectorySample summarize(const EnsembleState& s, double t, const Drives& d) {
  return {t, s.mean_s11(), s.mean_s22(), s.mean_s33(), d.omega1, d.omega2};
}

}  // namespace

Trajectory integrate(const EnsembleState& initial, const CloudGeometry& cloud,
                     const InteractionMatrices& matrices, const LambdaParams& params,
                     const DriveSpec& drive, double t_end, const std::vector<double>& sample_times,
                     const IntegrateOptions& options) {
  const MeanFieldSystem sys(cloud, matrices, params);
  if (initial.atoms() != sys.atoms()) {
    throw std::invalid_argument("integrate: initial state does not match the cloud size");
  }
  const double t_start = initial.time;
  if (!(t_end >= t_start)) throw std::invalid_argument("integrate: t_end precedes the initial time");
  if (!std::is_sorted(sample_times.begin(), sample_times.end())) {
    throw std::invalid_argument("integrate: sample times must be sorted");
  }

  const auto* schedule = std::get_if<StirapSchedule>(&drive);
  if (schedule) schedule->validate();

  // Segment boundaries: pulse breakpoints inside (t_start, t_end).
  std::vector<double> bounds{t_start};
  if (schedule) {
    for (double b : {schedule->t0, schedule->tf()}) {
      if (b > t_start && b < t_end) bounds.push_back(b);
    }
  }
  bounds.push_back(t_end);

  auto drives_at = [&](double t, PulseRegion region) -> Drives {
    if (!schedule) return {params.omega1, params.omega2};
    return drives_in(region, t, *schedule);
  };

  Trajectory traj;
  std::size_t next_sample = 0;
  while (next_sample < sample_times.size() && sample_times[next_sample] < t_start) ++next_sample;

  auto record = [&](const EnsembleState& s, double t, PulseRegion region) {
    traj.samples.push_back(summarize(s, t, drives_at(t, region)));
    check_physicality(s, traj.physicality);
    if (options.keep_states) traj.states.push_back(s);
  };

  Eigen::VectorXcd y = initial.packed();
  const Eigen::Index n = sys.atoms();
  for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
    const double a = bounds[seg];
    const double b = bounds[seg + 1];
    const PulseRegion region =
        schedule ? region_of(0.5 * (a + b), *schedule) : PulseRegion::ramp;

    while (next_sample < sample_times.size() && sample_times[next_sample] == a) {
      record(EnsembleState(n, y, a), a, region);
      ++next_sample;
    }

    Dopri5 stepper(
        [&](double t, const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
          sys.derivative(in, drives_at(t, region), out);
        },
        a, y, options.tolerances);
    while (stepper.t() < b) {
      stepper.step(b);
      while (next_sample < sample_times.size() && sample_times[next_sample] <= stepper.t() &&
             sample_times[next_sample] <= t_end) {
        const double ts = sample_times[next_sample];
        if (ts == stepper.t()) {
          if (ts == b && seg + 2 < bounds.size()) break;  // recorded by the next segment
          record(EnsembleState(n, stepper.y(), ts), ts, region);
        } else {
          record(EnsembleState(n, stepper.interpolate(ts), ts), ts, region);
        }
        ++next_sample;
      }
    }
    traj.steps += stepper.accepted_steps();
    traj.rhs_evaluations += stepper.rhs_evaluations();
    y = stepper.y();
  }
  traj.final_state = EnsembleState(n, std::move(y), t_end);
  return traj;
}

namespace {

// Real-valued view of the packed state used by the Newton refinement:
// [Re s11, Re s22, Re/Im s13, Re/Im s23, Re/Im s12] (8N unknowns).
Eigen::VectorXd to_real(const Eigen::VectorXcd& packed, Eigen::Index n) {
  Eigen::VectorXd x(8 * n);
  x.segment(0, n) = packed.segment(0, n).real();
  x.segment(n, n) = packed.segment(n, n).real();
  for (int c = 0; c < 3; ++c) {
    x.segment(2 * n + 2 * c * n, n) = packed.segment((2 + c) * n, n).real();
    x.segment(3 * n + 2 * c * n, n) = packed.segment((2 + c) * n, n).imag();
  }
  return x;
}

Eigen::VectorXcd from_real(const Eigen::VectorXd& x, Eigen::Index n) {
  Eigen::VectorXcd p(5 * n);
  p.segment(0, n) = x.segment(0, n).cast<cdouble>();
  p.segment(n, n) = x.segment(n, n).cast<cdouble>();
  for (int c = 0; c < 3; ++c) {
    for (Eigen::Index j = 0; j < n; ++j) {
      p[(2 + c) * n + j] = cdouble(x[2 * n + 2 * c * n + j], x[3 * n + 2 * c * n + j]);
    }
  }
  return p;
}

// Newton iteration on the real form of the derivative. The right-hand side is
// at most quadratic in the state, so central differences give the Jacobian up
// to rounding. Returns true when the residual reached `target`.
bool newton_polish(const MeanFieldSystem& sys, const Drives& drives, Eigen::VectorXcd& packed,
                   double target, double& residual) {
  const Eigen::Index n = sys.atoms();
  const Eigen::Index dim = 8 * n;
  Eigen::VectorXcd d(5 * n);
  auto residual_vec = [&](const Eigen::VectorXd& x) {
    sys.derivative(from_real(x, n), drives, d);
    return to_real(d, n);
  };

  Eigen::VectorXd x = to_real(packed, n);
  Eigen::VectorXd r = residual_vec(x);
  // Steps are accepted on the Euclidean norm, along which the Newton
  // direction is always a descent direction.
  double best = r.norm();
  constexpr double h = 1e-4;
  for (int iter = 0; iter < 40; ++iter) {
    Eigen::MatrixXd jac(dim, dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      jac.col(k) = (residual_vec(xp) - residual_vec(xm)) / (2.0 * h);
    }
    const Eigen::VectorXd dx = jac.partialPivLu().solve(-r);
    if (!dx.allFinite()) return false;
    // Backtracking: halve the step until the residual drops.
    bool improved = false;
    for (double lambda = 1.0; lambda >= 1.0 / 1024.0; lambda *= 0.5) {
      const Eigen::VectorXd x_new = x + lambda * dx;
      const Eigen::VectorXd r_new = residual_vec(x_new);
      const double norm_new = r_new.norm();
      if (norm_new < best) {
        x = x_new;
        r = r_new;
        best = norm_new;
        improved = true;
        break;
      }
    }
    if (!improved || r.lpNorm<Eigen::Infinity>() < 1e-3 * target) break;
  }
  // Residual is reported on the complex components, as in the integrator loop.
  packed = from_real(x, n);
  sys.derivative(packed, drives, d);
  residual = derivative_max_norm(d);
  return residual < target;
}

}  // namespace

SteadyState solve_steady_state(const CloudGeometry& cloud, const InteractionMatrices& matrices,
                               const LambdaParams& params, const SteadyStateOptions& options) {
  const MeanFieldSystem sys(cloud, matrices, params);
  const Eigen::Index n = sys.atoms();
  SteadyState result;
  if (n == 0) {
    result.state = EnsembleState(0);
    return result;
  }

  const Drives drives{params.omega1, params.omega2};
  Dopri5 stepper(
      [&](double, const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
        sys.derivative(in, drives, out);
      },
      0.0, EnsembleState::ground(n).packed(), options.tolerances);

  std::vector<std::pair<double, double>> history;
  double residual = derivative_max_norm(stepper.dydt());
  history.emplace_back(0.0, residual);
  double next_history = 10.0;
  const bool polish_enabled = options.polish_threshold > 0.0 && n <= options.polish_max_atoms;
  double polish_gate = options.polish_threshold;

  while (residual >= options.residual_target) {
    if (polish_enabled && residual < polish_gate) {
      Eigen::VectorXcd y = stepper.y();
      double r = residual;
      const bool ok = newton_polish(sys, drives, y, options.residual_target, r);
      if (ok) {
        result.state = EnsembleState(n, std::move(y), stepper.t());
        result.residual = r;
        result.time = stepper.t();
        result.steps = stepper.accepted_steps();
        result.polished = true;
        check_physicality(result.state, result.physicality);
        return result;
      }
      if (r < residual) {
        stepper.reset(stepper.t(), std::move(y));
        residual = r;
      }
      polish_gate = 0.1 * residual;
    }
    if (stepper.t() >= options.t_max) {
      history.emplace_back(stepper.t(), residual);
      if (n <= options.fallback_max_atoms && residual < options.fallback_threshold) {
        Eigen::VectorXcd y = stepper.y();
        double r = residual;
        if (newton_polish(sys, drives, y, options.residual_target, r)) {
          EnsembleState polished(n, std::move(y), stepper.t());
          PhysicalityReport report;
          check_physicality(polished, report);
          if (report.clean()) {
            result.state = std::move(polished);
            result.residual = r;
            result.time = stepper.t();
            result.steps = stepper.accepted_steps();
            result.polished = true;
            result.physicality = report;
            return result;
          }
        }
        history.emplace_back(stepper.t(), r);
      }
      std::ostringstream msg;
      msg << "steady state not reached by Gamma t = " << options.t_max << " (residual "
          << residual << ", target " << options.residual_target << ")";
      throw ConvergenceError(msg.str(), std::move(history));
    }
    stepper.step(options.t_max);
    residual = derivative_max_norm(stepper.dydt());
    if (stepper.t() >= next_history) {
      history.emplace_back(stepper.t(), residual);
      next_history += 10.0;
    }
  }
  result.state = EnsembleState(n, stepper.y(), stepper.t());
  result.residual = residual;
  result.time = stepper.t();
  result.steps = stepper.accepted_steps();
  check_physicality(result.state, result.physicality);
  return result;
}

}  // namespace eitsim
