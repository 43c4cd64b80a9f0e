#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace eitsim {

using Vec3 = std::array<double, 3>;

/// Identifier of the random stream used for cloud sampling. Written to every
/// run manifest so a position list can be regenerated from (seed, parameters).
inline constexpr const char* kRngAlgorithm = "mt19937_64;seed=splitmix64(master,index);uniform=53bit";

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Homogeneous cylindrical cloud. All lengths are in units of 1/k1, the
/// cylinder axis is z and the slab spans |z| <= thickness_kL / 2.
struct CloudGeometry {
  double radius_kR = 0.0;
  double thickness_kL = 0.0;
  double density = 0.0;  // rho / k1^3
  std::uint64_t seed = 0;
  double min_pair_separation_k = 0.05;
  std::vector<Vec3> positions;

  std::size_t size() const { return positions.size(); }
};

/// Observation disk perpendicular to the axis at z = z0_k.
struct DetectorDisk {
  double z0_k = 0.0;
  double s_max_k = 0.0;
  int radial_nodes = 64;
  int angular_nodes = 128;

  /// Defaults: z0 = L/2 + 10, s_max = 0.6 R.
  static DetectorDisk defaults_for(const CloudGeometry& cloud);
  /// Throws std::invalid_argument if the disk is not inside the cloud
  /// radius or not downstream of the slab.
  void validate(const CloudGeometry& cloud) const;
};

/// round(rho * pi * R^2 * L).
std::size_t atom_count(double radius_kR, double thickness_kL, double density);

/// SplitMix64 finalizer applied to master + (index + 1) * golden gamma. This is
/// the only way per-realization seeds are produced.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Uniform sampling inside the cylinder with hard-core exclusion. A point that
/// violates the exclusion distance is redrawn, at most 10^4 times per atom.
CloudGeometry sample_cloud(double radius_kR, double thickness_kL, double density,
                           std::uint64_t seed, double min_pair_separation_k = 0.05);

/// Smallest pairwise distance (infinity for fewer than two atoms).
double min_pair_distance(const CloudGeometry& cloud);

}  // namespace eitsim
