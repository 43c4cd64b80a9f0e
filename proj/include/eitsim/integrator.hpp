#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace eitsim {

struct Tolerances {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0: automatic
  double max_step = 0.0;      // 0: unbounded
  long max_steps = 50'000'000;
};

/// Thrown when the step size collapses below the resolution of t or the step
/// budget is exhausted. Carries the last accepted state.
class StiffnessError : public std::runtime_error {
 public:
  StiffnessError(const std::string& what, double t, double h, Eigen::VectorXcd state)
      : std::runtime_error(what), t_(t), h_(h), state_(std::move(state)) {}
  double time() const { return t_; }
  double step() const { return h_; }
  const Eigen::VectorXcd& state() const { return state_; }

 private:
  double t_;
  double h_;
  Eigen::VectorXcd state_;
};

/// Dormand-Prince 5(4) with FSAL, PI step control and the 4th-order
/// continuous extension. Error is measured per complex component,
/// |err_i| / (atol + rtol max(|y_i|, |y_new_i|)), combined as an RMS norm.
class Dopri5 {
 public:
  using Rhs = std::function<void(double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dydt)>;

  Dopri5(Rhs rhs, double t0, Eigen::VectorXcd y0, Tolerances tol);

  /// Advance by one accepted step, never past t_limit.
  void step(double t_limit);

  double t() const { return t_; }
  double t_prev() const { return t_old_; }
  double last_step() const { return t_ - t_old_; }
  const Eigen::VectorXcd& y() const { return y_; }
  /// Derivative at (t(), y()), available without another evaluation.
  const Eigen::VectorXcd& dydt() const { return k1_; }
  /// Dense output inside the last accepted step [t_prev(), t()].
  Eigen::VectorXcd interpolate(double t) const;

  long accepted_steps() const { return accepted_; }
  long rejected_steps() const { return rejected_; }
  long rhs_evaluations() const { return evaluations_; }

  /// Replace the state (e.g. after an external correction) and restart the FSAL chain.
  void reset(double t, Eigen::VectorXcd y);

 private:
  double initial_step();
  double error_norm(const Eigen::VectorXcd& err, const Eigen::VectorXcd& y_new) const;
  void eval(double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& out);

  Rhs rhs_;
  Tolerances tol_;
  double t_ = 0.0;
  double t_old_ = 0.0;
  double h_ = 0.0;
  double err_old_ = 1e-4;
  Eigen::VectorXcd y_, y_old_, y_new_, tmp_;
  Eigen::VectorXcd k1_, k2_, k3_, k4_, k5_, k6_, k7_;
  Eigen::VectorXcd cont_[5];
  long accepted_ = 0;
  long rejected_ = 0;
  long evaluations_ = 0;
};

}  // namespace eitsim
