#include <doctest.h>

#include <cmath>
#include <set>

#include "eitsim/cloud.hpp"

using namespace eitsim;

TEST_SUITE("cloud") {

TEST_CASE("atom count rounds rho pi R^2 L") {
  CHECK(atom_count(50, 40, 0.01) == 3142);
  CHECK(atom_count(20, 20, 0.01) == 251);
  CHECK(atom_count(15, 30, 0.01) == 212);
  CHECK(atom_count(1, 1, 0.1) == 0);  // 0.314 rounds to zero
}

TEST_CASE("tiny geometry gives an empty cloud") {
  const CloudGeometry c = sample_cloud(1.0, 1.0, 0.1, 7);
  CHECK(c.size() == 0);
  CHECK(std::isinf(min_pair_distance(c)));
}

TEST_CASE("positions stay inside the cylinder and respect the exclusion distance") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const CloudGeometry c = sample_cloud(20, 20, 0.01, seed);
    REQUIRE(c.size() == 251);
    for (const Vec3& p : c.positions) {
      CHECK(p[0] * p[0] + p[1] * p[1] <= 400.0);
      CHECK(std::abs(p[2]) <= 10.0);
    }
    CHECK(min_pair_distance(c) >= 0.05);
  }
  const CloudGeometry hard = sample_cloud(10, 10, 0.01, 3, 2.0);
  CHECK(min_pair_distance(hard) >= 2.0);
}

TEST_CASE("same seed, same positions; different seed, different positions") {
  const CloudGeometry a = sample_cloud(12, 8, 0.02, 99);
  const CloudGeometry b = sample_cloud(12, 8, 0.02, 99);
  const CloudGeometry c = sample_cloud(12, 8, 0.02, 100);
  CHECK(a.positions == b.positions);
  CHECK(a.positions != c.positions);
}

TEST_CASE("marginals of a large cloud without exclusion are uniform") {
  const double R = 50.0, L = 40.0;
  const double rho = 100000.0 / (std::acos(-1.0) * R * R * L);
  const CloudGeometry c = sample_cloud(R, L, rho, 2024, 0.0);
  const double n = static_cast<double>(c.size());
  REQUIRE(n >= 100000);
  double mz = 0.0, ms = 0.0;
  for (const Vec3& p : c.positions) {
    mz += p[2];
    ms += (p[0] * p[0] + p[1] * p[1]) / (R * R);
  }
  mz /= n;
  ms /= n;
  // z ~ U(-L/2, L/2) and s^2/R^2 ~ U(0, 1).
  CHECK(std::abs(mz) < 3.0 * (L / std::sqrt(12.0)) / std::sqrt(n));
  CHECK(std::abs(ms - 0.5) < 3.0 * (1.0 / std::sqrt(12.0)) / std::sqrt(n));
}

TEST_CASE("overfull geometry raises a placement error") {
  CHECK_THROWS_AS(sample_cloud(2.0, 2.0, 1.0, 1, 1.5), PlacementError);
}

TEST_CASE("invalid arguments") {
  CHECK_THROWS_AS(sample_cloud(0.0, 1.0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_cloud(1.0, -1.0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_cloud(1.0, 1.0, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_cloud(1.0, 1.0, 0.1, 1, -0.1), std::invalid_argument);
}

TEST_CASE("derived seeds") {
  // First output of the reference SplitMix64 generator seeded with 0.
  CHECK(derive_seed(0, 0) == 0xE220A8397B1DCDAFULL);
  CHECK(derive_seed(0, 1) == 0x6E789E6AA1B965F4ULL);
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(42, 3) == derive_seed(42, 3));
  CHECK(derive_seed(42, 3) != derive_seed(43, 3));
}

TEST_CASE("detector defaults and validation") {
  const CloudGeometry c = sample_cloud(20, 20, 0.01, 1);
  const DetectorDisk d = DetectorDisk::defaults_for(c);
  CHECK(d.z0_k == doctest::Approx(20.0));
  CHECK(d.s_max_k == doctest::Approx(12.0));
  CHECK_NOTHROW(d.validate(c));
  DetectorDisk wide = d;
  wide.s_max_k = 20.0;
  CHECK_THROWS_AS(wide.validate(c), std::invalid_argument);
  DetectorDisk inside = d;
  inside.z0_k = 5.0;
  CHECK_THROWS_AS(inside.validate(c), std::invalid_argument);
}

}
