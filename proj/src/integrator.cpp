#include "eitsim/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eitsim {

namespace {

// Dormand & Prince (1980) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension (Hairer, Norsett & Wanner, DOPRI5 contd5).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;   // largest shrink 1/5
constexpr double kFacMax = 10.0;  // largest growth
constexpr double kBeta = 0.04;

}  // namespace

Dopri5::Dopri5(Rhs rhs, double t0, Eigen::VectorXcd y0, Tolerances tol)
    : rhs_(std::move(rhs)), tol_(tol) {
  if (!(tol_.rtol > 0.0) || !(tol_.atol > 0.0)) {
    throw std::invalid_argument("Dopri5: tolerances must be positive");
  }
  const auto n = y0.size();
  for (auto* v : {&y_old_, &y_new_, &tmp_, &k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_}) {
    v->resize(n);
  }
  for (auto& c : cont_) c.resize(n);
  reset(t0, std::move(y0));
}

void Dopri5::reset(double t, Eigen::VectorXcd y) {
  t_ = t;
  t_old_ = t;
  y_ = std::move(y);
  eval(t_, y_, k1_);
  h_ = tol_.initial_step > 0.0 ? tol_.initial_step : initial_step();
  if (tol_.max_step > 0.0) h_ = std::min(h_, tol_.max_step);
  err_old_ = 1e-4;
}

void Dopri5::eval(double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& out) {
  rhs_(t, y, out);
  ++evaluations_;
}

double Dopri5::error_norm(const Eigen::VectorXcd& err, const Eigen::VectorXcd& y_new) const {
  const auto n = err.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc = tol_.atol + tol_.rtol * std::max(std::abs(y_[i]), std::abs(y_new[i]));
    const double r = std::abs(err[i]) / sc;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

double Dopri5::initial_step() {
  const auto n = y_.size();
  if (n == 0) return 1.0;
  auto norm = [&](const Eigen::VectorXcd& v) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = std::abs(v[i]) / (tol_.atol + tol_.rtol * std::abs(y_[i]));
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(n));
  };
  const double dnf = norm(k1_);
  const double dny = norm(y_);
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
  tmp_ = y_ + h * k1_;
  eval(t_ + h, tmp_, k2_);
  const double der2 = norm(k2_ - k1_) / h;
  const double der12 = std::max(der2, dnf);
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  return std::min(100.0 * h, h1);
}

void Dopri5::step(double t_limit) {
  if (!(t_limit > t_)) throw std::invalid_argument("Dopri5::step: t_limit must exceed t");
  const double expo1 = 0.2 - kBeta * 0.75;
  for (;;) {
    if (accepted_ + rejected_ >= tol_.max_steps) {
      throw StiffnessError("integrator: step budget exhausted", t_, h_, y_);
    }
    double h = h_;
    if (tol_.max_step > 0.0) h = std::min(h, tol_.max_step);
    bool last = false;
    // Stretch the final step rather than leave a sliver behind.
    if (t_ + 1.01 * h >= t_limit) {
      h = t_limit - t_;
      last = true;
    }
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_))) {
      throw StiffnessError("integrator: step size underflow (problem too stiff?)", t_, h, y_);
    }

    tmp_ = y_ + h * a21 * k1_;
    eval(t_ + c2 * h, tmp_, k2_);
    tmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
    eval(t_ + c3 * h, tmp_, k3_);
    tmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    eval(t_ + c4 * h, tmp_, k4_);
    tmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    eval(t_ + c5 * h, tmp_, k5_);
    tmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    const double t_new = last ? t_limit : t_ + h;
    eval(t_new, tmp_, k6_);
    y_new_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    eval(t_new, y_new_, k7_);
    tmp_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

    const double err = error_norm(tmp_, y_new_);
    if (!std::isfinite(err)) {
      ++rejected_;
      h_ = h * kFacMin;
      continue;
    }
    const double fac11 = std::pow(std::max(err, 1e-300), expo1);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(err_old_, kBeta);
      fac = std::clamp(fac / kSafety, 1.0 / kFacMax, 1.0 / kFacMin);
      err_old_ = std::max(err, 1e-4);

      cont_[0] = y_;
      cont_[1] = y_new_ - y_;
      cont_[2] = h * k1_ - cont_[1];
      cont_[3] = cont_[1] - h * k7_ - cont_[2];
      cont_[4] = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);

      t_old_ = t_;
      t_ = t_new;
      y_.swap(y_new_);
      k1_.swap(k7_);
      h_ = h / fac;
      ++accepted_;
      return;
    }
    ++rejected_;
    h_ = h / std::min(1.0 / kFacMin, fac11 / kSafety);
  }
}

Eigen::VectorXcd Dopri5::interpolate(double t) const {
  const double h = t_ - t_old_;
  if (h <= 0.0) return y_;
  const double theta = (t - t_old_) / h;
  const double theta1 = 1.0 - theta;
  return cont_[0] +
         theta * (cont_[1] + theta1 * (cont_[2] + theta * (cont_[3] + theta1 * cont_[4])));
}

}  // namespace eitsim
