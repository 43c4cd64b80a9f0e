#include "eitsim/kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace eitsim {

std::string_view to_string(KernelMode mode) {
  switch (mode) {
    case KernelMode::scalar: return "scalar";
    case KernelMode::vectorial: return "vectorial";
    case KernelMode::none: return "none";
  }
  return "none";
}

KernelMode kernel_mode_from_string(std::string_view name) {
  if (name == "scalar") return KernelMode::scalar;
  if (name == "vectorial") return KernelMode::vectorial;
  if (name == "none") return KernelMode::none;
  throw std::invalid_argument("unknown kernel mode '" + std::string(name) +
                              "' (expected scalar, vectorial or none)");
}

std::string_view to_string(PopulationFeed feed) {
  return feed == PopulationFeed::physical ? "physical" : "printed";
}

PopulationFeed population_feed_from_string(std::string_view name) {
  if (name == "physical") return PopulationFeed::physical;
  if (name == "printed") return PopulationFeed::printed;
  throw std::invalid_argument("unknown population feed '" + std::string(name) +
                              "' (expected physical or printed)");
}

void LambdaParams::validate() const {
  if (gamma1_frac < 0.0 || gamma2_frac < 0.0 ||
      std::abs(gamma1_frac + gamma2_frac - 1.0) > 1e-12) {
    throw std::invalid_argument("gamma1_frac and gamma2_frac must be non-negative and sum to 1");
  }
  if (omega1 < 0.0 || omega2 < 0.0) {
    throw std::invalid_argument("Rabi frequencies must be non-negative");
  }
  if (!(k2_over_k1 > 0.0)) {
    throw std::invalid_argument("k2_over_k1 must be positive");
  }
}

cdouble scalar_green(double gamma_n, double k_r) {
  if (!(k_r > 0.0)) throw std::domain_error("scalar_green: k r must be positive");
  const cdouble ikr(0.0, k_r);
  return gamma_n * std::exp(ikr) / ikr;
}

cdouble vectorial_green(double gamma_n, double k_r, double z_over_r) {
  if (!(k_r > 0.0)) throw std::domain_error("vectorial_green: k r must be positive");
  if (!(std::abs(z_over_r) <= 1.0)) {
    throw std::domain_error("vectorial_green: |z/r| must not exceed 1");
  }
  const double inv = 1.0 / k_r;
  const double inv2 = inv * inv;
  const double c2 = z_over_r * z_over_r;
  const cdouble bracket = cdouble(1.0 - inv2, inv) - c2 * cdouble(1.0 - 3.0 * inv2, 3.0 * inv);
  const cdouble ikr(0.0, k_r);
  return 1.5 * gamma_n * std::exp(ikr) / ikr * bracket;
}

InteractionMatrices build_matrices(const CloudGeometry& cloud, const LambdaParams& params) {
  const auto n = static_cast<Eigen::Index>(cloud.size());
  InteractionMatrices m;
  m.mode = params.kernel_mode;
  m.g1 = Eigen::MatrixXcd::Zero(n, n);
  m.shared = params.kernel_mode == KernelMode::none ||
             (params.k2_over_k1 == 1.0 && params.gamma1_frac == params.gamma2_frac);
  if (params.kernel_mode == KernelMode::none) {
    m.g2 = m.g1;
    return m;
  }
  m.g2 = Eigen::MatrixXcd::Zero(n, n);

  const double k2 = params.k2_over_k1;
  const bool vectorial = params.kernel_mode == KernelMode::vectorial;
  const auto& p = cloud.positions;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index l = j + 1; l < n; ++l) {
      const double dx = p[j][0] - p[l][0];
      const double dy = p[j][1] - p[l][1];
      const double dz = p[j][2] - p[l][2];
      const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
      cdouble a, b;
      if (vectorial) {
        const double c = std::clamp(dz / r, -1.0, 1.0);
        a = vectorial_green(params.gamma1_frac, r, c);
        b = vectorial_green(params.gamma2_frac, k2 * r, c);
      } else {
        a = scalar_green(params.gamma1_frac, r);
        b = scalar_green(params.gamma2_frac, k2 * r);
      }
      m.g1(j, l) = a;
      m.g1(l, j) = a;
      m.g2(j, l) = b;
      m.g2(l, j) = b;
    }
  }
  return m;
}

void write_matrices_binary(const InteractionMatrices& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  static_assert(std::endian::native == std::endian::little, "dump assumes a little-endian host");
  const std::int64_t n = m.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const Eigen::MatrixXcd* g : {&m.g1, &m.g2}) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index l = 0; l < n; ++l) {
        const double re = (*g)(j, l).real();
        const double im = (*g)(j, l).imag();
        out.write(reinterpret_cast<const char*>(&re), sizeof re);
        out.write(reinterpret_cast<const char*>(&im), sizeof im);
      }
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace eitsim
