#pragma once

#include <cstddef>
#include <stdexcept>

#include "eitsim/params.hpp"

namespace eitsim::oracle {

class DegenerateParameters : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Closed-form steady-state excited population of one atom with the control
/// field on resonance (Delta2 = 0). Uses gamma fractions, omega1, omega2 and
/// delta1 from `params`; delta2 and the kernel settings are ignored.
double sigma33_steady(const LambdaParams& params);

/// pi (Gamma1 / (k1 Omega1))^2 sigma33, in units of 1/k1^2.
double scattering_cross_section(const LambdaParams& params);

struct SlabGeometry {
  std::size_t atoms = 0;
  double radius_kR = 0.0;
  double thickness_kL = 0.0;
};

/// (Gamma1 / Omega1)^2 sigma33 N / (k1 R)^2.
double optical_thickness(const LambdaParams& params, const SlabGeometry& geometry);

}  // namespace eitsim::oracle
