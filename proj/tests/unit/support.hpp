#pragma once

#include <complex>
#include <filesystem>
#include <random>
#include <string>

#include "eitsim/cloud.hpp"
#include "eitsim/dynamics.hpp"

namespace testing {

inline eitsim::CloudGeometry cloud_at(std::vector<eitsim::Vec3> positions, double radius = 10.0,
                                      double thickness = 10.0) {
  eitsim::CloudGeometry c;
  c.radius_kR = radius;
  c.thickness_kL = thickness;
  c.positions = std::move(positions);
  return c;
}

// Random (not necessarily physical) state; good enough for algebraic checks.
inline eitsim::EnsembleState random_state(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::uniform_real_distribution<double> p(0.0, 0.5);
  eitsim::EnsembleState s(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    s.s11()[j] = p(rng);
    s.s22()[j] = p(rng);
    s.s13()[j] = {u(rng), u(rng)};
    s.s23()[j] = {u(rng), u(rng)};
    s.s12()[j] = {u(rng), u(rng)};
  }
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("eitsim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
