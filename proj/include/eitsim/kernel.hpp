#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "eitsim/cloud.hpp"
#include "eitsim/params.hpp"

namespace eitsim {

/// Gamma_n e^{i kr} / (i kr). Throws std::domain_error for kr <= 0.
cdouble scalar_green(double gamma_n, double k_r);

/// Dipole kernel with both transition dipoles along the cylinder axis:
///   (3 Gamma_n / 2) e^{ikr}/(ikr) [1 + i/kr - 1/kr^2 - (z/r)^2 (1 + 3i/kr - 3/kr^2)].
/// Throws std::domain_error for kr <= 0 or |z/r| > 1.
cdouble vectorial_green(double gamma_n, double k_r, double z_over_r);

/// Dense pair couplings for both transitions, in units of Gamma. Symmetric
/// with zero diagonal; all-zero when mode == none.
struct InteractionMatrices {
  Eigen::MatrixXcd g1;
  Eigen::MatrixXcd g2;
  KernelMode mode = KernelMode::none;
  /// True when g1 and g2 are identical entry for entry (k2 == k1 and
  /// Gamma1 == Gamma2, or mode == none). Lets callers use one product.
  bool shared = false;

  Eigen::Index size() const { return g1.rows(); }
};

InteractionMatrices build_matrices(const CloudGeometry& cloud, const LambdaParams& params);

/// Row-major little-endian dump: int64 N, then g1 then g2 as (re, im) float64 pairs.
void write_matrices_binary(const InteractionMatrices& m, const std::string& path);

}  // namespace eitsim
