#include "eitsim/cloud.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace eitsim {

namespace {

constexpr int kMaxAttemptsPerAtom = 10000;

// Top 53 bits of a 64-bit draw. std::uniform_real_distribution is not
// specified bit-for-bit across standard libraries, this is.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

DetectorDisk DetectorDisk::defaults_for(const CloudGeometry& cloud) {
  DetectorDisk d;
  d.z0_k = 0.5 * cloud.thickness_kL + 10.0;
  d.s_max_k = 0.6 * cloud.radius_kR;
  return d;
}

void DetectorDisk::validate(const CloudGeometry& cloud) const {
  if (!(s_max_k > 0.0) || !(s_max_k < cloud.radius_kR)) {
    throw std::invalid_argument("detector: s_max must satisfy 0 < s_max < R");
  }
  if (!(z0_k > 0.5 * cloud.thickness_kL)) {
    throw std::invalid_argument("detector: z0 must lie beyond the slab (z0 > L/2)");
  }
  if (radial_nodes < 1 || angular_nodes < 1) {
    throw std::invalid_argument("detector: quadrature node counts must be positive");
  }
}

std::size_t atom_count(double radius_kR, double thickness_kL, double density) {
  const double n = density * std::numbers::pi * radius_kR * radius_kR * thickness_kL;
  return static_cast<std::size_t>(std::llround(n));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CloudGeometry sample_cloud(double radius_kR, double thickness_kL, double density,
                           std::uint64_t seed, double min_pair_separation_k) {
  if (!(radius_kR > 0.0) || !(thickness_kL > 0.0) || !(density > 0.0) ||
      !(min_pair_separation_k >= 0.0)) {
    throw std::invalid_argument(
        "sample_cloud: need radius > 0, thickness > 0, density > 0, min separation >= 0");
  }

  CloudGeometry cloud;
  cloud.radius_kR = radius_kR;
  cloud.thickness_kL = thickness_kL;
  cloud.density = density;
  cloud.seed = seed;
  cloud.min_pair_separation_k = min_pair_separation_k;

  const std::size_t n = atom_count(radius_kR, thickness_kL, density);
  cloud.positions.reserve(n);

  std::mt19937_64 rng(seed);
  const double min2 = min_pair_separation_k * min_pair_separation_k;

  auto draw = [&]() -> Vec3 {
    const double s = radius_kR * std::sqrt(uniform01(rng));
    const double phi = 2.0 * std::numbers::pi * uniform01(rng);
    const double z = thickness_kL * (uniform01(rng) - 0.5);
    return {s * std::cos(phi), s * std::sin(phi), z};
  };

  for (std::size_t j = 0; j < n; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttemptsPerAtom && !placed; ++attempt) {
      const Vec3 p = draw();
      bool ok = true;
      if (min2 > 0.0) {
        for (const Vec3& q : cloud.positions) {
          if (dist2(p, q) < min2) {
            ok = false;
            break;
          }
        }
      }
      if (ok) {
        cloud.positions.push_back(p);
        placed = true;
      }
    }
    if (!placed) {
      std::ostringstream msg;
      msg << "sample_cloud: could not place atom " << j << " of " << n << " with exclusion "
          << min_pair_separation_k << " after " << kMaxAttemptsPerAtom << " attempts";
      throw PlacementError(msg.str());
    }
  }
  return cloud;
}

double min_pair_distance(const CloudGeometry& cloud) {
  double best = std::numeric_limits<double>::infinity();
  const auto& p = cloud.positions;
  for (std::size_t j = 0; j < p.size(); ++j) {
    for (std::size_t l = j + 1; l < p.size(); ++l) {
      best = std::min(best, dist2(p[j], p[l]));
    }
  }
  return std::sqrt(best);
}

}  // namespace eitsim
