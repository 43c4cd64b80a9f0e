#pragma once

#include <complex>
#include <string_view>

namespace eitsim {

using cdouble = std::complex<double>;

enum class KernelMode { scalar, vectorial, none };

std::string_view to_string(KernelMode mode);
/// Accepts "scalar", "vectorial", "none"; throws std::invalid_argument otherwise.
KernelMode kernel_mode_from_string(std::string_view name);

/// Rate at which the excited population refills the ground state n.
///   physical: Gamma_n * s33 (excited state decays at Gamma; the single-atom
///             steady state then agrees with the closed-form oracle)
///   printed:  (Gamma_n / 2) * s33
enum class PopulationFeed { physical, printed };

std::string_view to_string(PopulationFeed feed);
PopulationFeed population_feed_from_string(std::string_view name);

/// Lambda-system parameters. Rates, Rabi frequencies and detunings are in
/// units of Gamma = Gamma1 + Gamma2; wavenumbers in units of k1.
struct LambdaParams {
  double gamma1_frac = 0.5;
  double gamma2_frac = 0.5;
  double omega1 = 0.1;
  double omega2 = 0.5;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double k2_over_k1 = 1.0;
  KernelMode kernel_mode = KernelMode::scalar;
  PopulationFeed population_feed = PopulationFeed::physical;

  /// Throws std::invalid_argument on gamma fractions not summing to one,
  /// negative fractions or Rabi frequencies, or non-positive k2/k1.
  void validate() const;
};

}  // namespace eitsim
