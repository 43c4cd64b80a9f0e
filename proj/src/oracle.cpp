#include "eitsim/oracle.hpp"

#include <cmath>
#include <numbers>

namespace eitsim::oracle {

double sigma33_steady(const LambdaParams& p) {
  const double g = p.gamma1_frac + p.gamma2_frac;
  const double g1 = p.gamma1_frac;
  const double g2 = p.gamma2_frac;
  const double d2 = p.delta1 * p.delta1;
  const double w1 = p.omega1 * p.omega1;
  const double w2 = p.omega2 * p.omega2;
  const double wsum2 = (w1 + w2) * (w1 + w2);

  // Grouped by the Omega1^2 and Omega2^2 prefactors.
  const double num = 4.0 * g * d2 * w1 * w2;
  const double probe_term = g2 * w1 * (4.0 * g * g * d2 + wsum2);
  const double control_term =
      w2 * (g1 * (4.0 * d2 * (g * g - 2.0 * w2) + 16.0 * d2 * d2 + wsum2) + 8.0 * g * d2 * w1);
  const double den = probe_term + control_term;
  if (den == 0.0) {
    if (num == 0.0) {
      throw DegenerateParameters("sigma33_steady: 0/0 (no drive or no decay)");
    }
    throw DegenerateParameters("sigma33_steady: vanishing denominator");
  }
  return num / den;
}

double scattering_cross_section(const LambdaParams& p) {
  if (!(p.omega1 > 0.0)) throw std::domain_error("scattering_cross_section: omega1 must be > 0");
  const double r = p.gamma1_frac / p.omega1;
  return std::numbers::pi * r * r * sigma33_steady(p);
}

double optical_thickness(const LambdaParams& p, const SlabGeometry& geo) {
  if (!(p.omega1 > 0.0)) throw std::domain_error("optical_thickness: omega1 must be > 0");
  if (!(geo.radius_kR > 0.0)) throw std::domain_error("optical_thickness: radius must be > 0");
  if (geo.atoms == 0) return 0.0;
  const double r = p.gamma1_frac / p.omega1;
  return r * r * sigma33_steady(p) * static_cast<double>(geo.atoms) /
         (geo.radius_kR * geo.radius_kR);
}

}  // namespace eitsim::oracle
