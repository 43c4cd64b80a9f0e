#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eitsim/dynamics.hpp"
#include "eitsim/oracle.hpp"
#include "support.hpp"

using namespace eitsim;
using std::conj;

namespace {

constexpr cdouble I{0.0, 1.0};

// Single-atom equations written out component by component from the
// textbook form (atom at the origin, F_n = i Omega_n), independent of the
// packed implementation. For n = 2 the ground coherence enters as s21.
struct Single {
  cdouble d11, d22, d13, d23, d12;
};

Single single_atom_rhs(cdouble s11, cdouble s22, cdouble s13, cdouble s23, cdouble s12,
                       const LambdaParams& p) {
  const double g1 = p.gamma1_frac, g2 = p.gamma2_frac, g = g1 + g2;
  const double o1 = p.omega1, o2 = p.omega2, d1 = p.delta1, d2 = p.delta2;
  const double feed = p.population_feed == PopulationFeed::printed ? 0.5 : 1.0;
  const cdouble s33 = 1.0 - s11 - s22;
  const cdouble s31 = conj(s13), s32 = conj(s23), s21 = conj(s12);
  Single r;
  r.d11 = feed * g1 * s33 - 0.5 * I * o1 * (s13 - s31);
  r.d22 = feed * g2 * s33 - 0.5 * I * o2 * (s23 - s32);
  r.d12 = -I * (d1 - d2) * s12 + 0.5 * I * o1 * s32 - 0.5 * I * o2 * s13;
  r.d13 = -(g / 2 + I * d1) * s13 - 0.5 * I * o1 * (s11 - s33) - 0.5 * I * o2 * s12;
  r.d23 = -(g / 2 + I * d2) * s23 - 0.5 * I * o2 * (s22 - s33) - 0.5 * I * o1 * s21;
  return r;
}

LambdaParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LambdaParams p;
  p.gamma1_frac = 0.1 + 0.8 * u(rng);
  p.gamma2_frac = 1.0 - p.gamma1_frac;
  p.omega1 = u(rng);
  p.omega2 = u(rng);
  p.delta1 = 2.0 * u(rng) - 1.0;
  p.delta2 = 2.0 * u(rng) - 1.0;
  return p;
}

EnsembleState dark_state(const CloudGeometry& cloud, const LambdaParams& p) {
  const auto n = static_cast<Eigen::Index>(cloud.size());
  EnsembleState s(n);
  const double norm = p.omega1 * p.omega1 + p.omega2 * p.omega2;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double z = cloud.positions[static_cast<std::size_t>(j)][2];
    const double s11 = p.omega2 * p.omega2 / norm;
    s.s11()[j] = s11;
    s.s22()[j] = p.omega1 * p.omega1 / norm;
    s.s12()[j] = -(p.omega1 / p.omega2) * std::exp(I * (1.0 - p.k2_over_k1) * z) * s11;
  }
  return s;
}

double max_abs(const EnsembleState& s) { return derivative_max_norm(s.packed()); }

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("ground state without drive is stationary") {
  LambdaParams p;
  p.omega1 = p.omega2 = 0.0;
  const CloudGeometry cloud = sample_cloud(5, 5, 0.05, 3);
  const InteractionMatrices m = build_matrices(cloud, p);
  const EnsembleState g = EnsembleState::ground(static_cast<Eigen::Index>(cloud.size()));
  const EnsembleState d = rhs(g, effective_field(g, m, p, cloud, 1), effective_field(g, m, p, cloud, 2), p);
  CHECK(max_abs(d) == 0.0);
}

TEST_CASE("excited population refills the ground states") {
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  LambdaParams p;
  p.omega1 = p.omega2 = 0.0;
  p.gamma1_frac = 0.3;
  p.gamma2_frac = 0.7;
  EnsembleState s(1);
  s.s11()[0] = 0.5;
  s.s22()[0] = 0.2;  // s33 = 0.3
  const InteractionMatrices m = build_matrices(one, p);
  const Eigen::VectorXcd f = Eigen::VectorXcd::Zero(1);

  p.population_feed = PopulationFeed::printed;
  EnsembleState d = rhs(s, f, f, p);
  CHECK(d.s11()[0].real() == doctest::Approx(0.15 * 0.3));
  CHECK(d.s22()[0].real() == doctest::Approx(0.35 * 0.3));

  p.population_feed = PopulationFeed::physical;
  d = rhs(s, f, f, p);
  CHECK(d.s11()[0].real() == doctest::Approx(0.3 * 0.3));
  CHECK(d.s22()[0].real() == doctest::Approx(0.7 * 0.3));
  CHECK(d.s13()[0] == cdouble(0));
}

TEST_CASE("single-atom reduction on random states") {
  std::mt19937_64 rng(11);
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  for (int trial = 0; trial < 200; ++trial) {
    LambdaParams p = random_params(rng);
    p.population_feed = trial % 2 ? PopulationFeed::printed : PopulationFeed::physical;
    p.kernel_mode = trial % 3 == 0 ? KernelMode::vectorial : KernelMode::scalar;
    const EnsembleState s = testing::random_state(1, rng);
    const InteractionMatrices m = build_matrices(one, p);
    const EnsembleState d =
        rhs(s, effective_field(s, m, p, one, 1), effective_field(s, m, p, one, 2), p);
    const Single ref = single_atom_rhs(s.s11()[0], s.s22()[0], s.s13()[0], s.s23()[0], s.s12()[0], p);
    CHECK(std::abs(d.s11()[0] - ref.d11.real()) < 1e-15);
    CHECK(std::abs(d.s22()[0] - ref.d22.real()) < 1e-15);
    CHECK(std::abs(d.s13()[0] - ref.d13) < 1e-15);
    CHECK(std::abs(d.s23()[0] - ref.d23) < 1e-15);
    CHECK(std::abs(d.s12()[0] - ref.d12) < 1e-15);
    CHECK(d.s11()[0].imag() == 0.0);
    CHECK(d.s22()[0].imag() == 0.0);
  }
}

TEST_CASE("single-atom dark state is a fixed point") {
  LambdaParams p;  // Delta1 = Delta2 = 0, Omega1 = 0.1, Omega2 = 0.5
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  EnsembleState s(1);
  s.s11()[0] = 0.25 / 0.26;
  s.s22()[0] = 0.01 / 0.26;
  s.s12()[0] = -0.05 / 0.26;
  const InteractionMatrices m = build_matrices(one, p);
  const EnsembleState d =
      rhs(s, effective_field(s, m, p, one, 1), effective_field(s, m, p, one, 2), p);
  CHECK(max_abs(d) < 1e-16);
}

TEST_CASE("dark state of random clouds is a fixed point in every kernel mode") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.8);
  for (std::size_t n : {1u, 7u, 23u, 50u}) {
    for (KernelMode mode : {KernelMode::none, KernelMode::scalar, KernelMode::vectorial}) {
      for (double k2 : {1.0, 1.17}) {
        LambdaParams p;
        p.kernel_mode = mode;
        p.k2_over_k1 = k2;
        p.omega1 = u(rng);
        p.omega2 = u(rng);
        p.delta1 = p.delta2 = (n % 2 ? 0.0 : 0.3);
        const double L = 6.0;
        const double rho = static_cast<double>(n) / (std::numbers::pi * 9.0 * L);
        const CloudGeometry cloud = sample_cloud(3.0, L, rho, rng());
        REQUIRE(cloud.size() == n);
        const InteractionMatrices m = build_matrices(cloud, p);
        const MeanFieldSystem sys(cloud, m, p);
        Eigen::VectorXcd d;
        sys.derivative(dark_state(cloud, p).packed(), Drives{p.omega1, p.omega2}, d);
        CHECK(derivative_max_norm(d) < 1e-12);
      }
    }
  }
}

TEST_CASE("effective fields") {
  LambdaParams p;
  p.kernel_mode = KernelMode::scalar;
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  EnsembleState s(1);
  InteractionMatrices m = build_matrices(one, p);
  CHECK(std::abs(effective_field(s, m, p, one, 1)[0] - cdouble(0, 0.1)) < 1e-16);
  s.s13()[0] = {0.3, 0.4};
  s.s23()[0] = {-0.1, 0.2};
  CHECK(std::abs(effective_field(s, m, p, one, 1)[0] - cdouble(0, 0.1)) < 1e-16);
  CHECK(std::abs(effective_field(s, m, p, one, 2)[0] - cdouble(0, 0.5)) < 1e-16);

  const CloudGeometry two = testing::cloud_at({{0, 0, 0}, {1.0, 0.5, 2.0}});
  p.omega1 = 0.0;
  m = build_matrices(two, p);
  EnsembleState t(2);
  const cdouble c(0.2, -0.3);
  t.s13()[1] = c;
  const Eigen::VectorXcd f1 = effective_field(t, m, p, two, 1);
  CHECK(std::abs(f1[0] - m.g1(0, 1) * c) < 1e-16);
  CHECK(std::abs(f1[1]) == 0.0);

  // drive phase follows the atom's axial position
  p.omega1 = 0.1;
  p.omega2 = 0.4;
  p.k2_over_k1 = 1.5;
  p.kernel_mode = KernelMode::none;
  m = build_matrices(two, p);
  CHECK(std::abs(effective_field(t, m, p, two, 1)[1] - 0.1 * I * std::exp(2.0 * I)) < 1e-16);
  CHECK(std::abs(effective_field(t, m, p, two, 2)[1] - 0.4 * I * std::exp(3.0 * I)) < 1e-16);
  CHECK_THROWS_AS(effective_field(t, m, p, two, 3), std::invalid_argument);
}

TEST_CASE("packed derivative matches fields plus local equations") {
  std::mt19937_64 rng(17);
  const CloudGeometry cloud = sample_cloud(4, 4, 0.1, 8);
  for (KernelMode mode : {KernelMode::scalar, KernelMode::vectorial, KernelMode::none}) {
    for (double k2 : {1.0, 0.9}) {
      LambdaParams p = random_params(rng);
      p.kernel_mode = mode;
      p.k2_over_k1 = k2;
      const InteractionMatrices m = build_matrices(cloud, p);
      const EnsembleState s = testing::random_state(static_cast<Eigen::Index>(cloud.size()), rng);
      const EnsembleState ref =
          rhs(s, effective_field(s, m, p, cloud, 1), effective_field(s, m, p, cloud, 2), p);
      Eigen::VectorXcd fast;
      MeanFieldSystem(cloud, m, p).derivative(s.packed(), Drives{p.omega1, p.omega2}, fast);
      CHECK((fast - ref.packed()).lpNorm<Eigen::Infinity>() < 1e-13);

      // explicit double loop for the interaction sums
      Eigen::VectorXcd f1 = effective_field(s, m, p, cloud, 1);
      for (Eigen::Index j = 0; j < s.atoms(); ++j) {
        cdouble sum = I * p.omega1 * std::exp(I * cloud.positions[j][2]);
        for (Eigen::Index l = 0; l < s.atoms(); ++l) {
          if (l != j) sum += m.g1(j, l) * s.s13()[l];
        }
        CHECK(std::abs(f1[j] - sum) < 1e-13);
      }
    }
  }
}

TEST_CASE("pulse schedule") {
  StirapSchedule s;  // 0.5, 10, 60, shifted
  Drives d = stirap_drives(5.0, s);
  CHECK(d.omega1 == 0.0);
  CHECK(d.omega2 == 0.5);
  d = stirap_drives(40.0, s);
  CHECK(d.omega1 == doctest::Approx(0.5 * std::sqrt(0.5)));
  CHECK(d.omega2 == doctest::Approx(0.5 * std::sqrt(0.5)));
  d = stirap_drives(100.0, s);
  CHECK(d.omega1 == 0.5);
  CHECK(d.omega2 == 0.0);
  // shifted form is continuous at both ends of the ramp
  CHECK(stirap_drives(10.0 + 1e-9, s).omega1 == doctest::Approx(0.0));
  CHECK(stirap_drives(70.0 - 1e-9, s).omega2 == doctest::Approx(0.0).epsilon(1e-8));

  s.convention = PulseConvention::literal;
  CHECK(stirap_drives(5.0, s).omega1 == 0.0);
  d = stirap_drives(70.0 - 1e-9, s);
  CHECK(d.omega2 == doctest::Approx(0.5 * std::cos(105.0 * std::numbers::pi / 180.0)));
  CHECK(d.omega1 == doctest::Approx(0.5 * std::sin(105.0 * std::numbers::pi / 180.0)));
  d = stirap_drives(70.0 + 1e-9, s);
  CHECK(d.omega1 == 0.5);
  CHECK(d.omega2 == 0.0);

  s.tr = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK(pulse_convention_from_string("literal") == PulseConvention::literal);
  CHECK_THROWS_AS(pulse_convention_from_string("sideways"), std::invalid_argument);
}

TEST_CASE("optical pumping into the second ground state") {
  LambdaParams p;
  p.omega1 = 0.1;
  p.omega2 = 0.0;
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  const InteractionMatrices m = build_matrices(one, p);
  const Trajectory tr = integrate(EnsembleState::ground(1), one, m, p, StaticDrive{}, 500.0,
                                  {0.0, 100.0, 250.0, 500.0});
  REQUIRE(tr.samples.size() == 4);
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    CHECK(tr.samples[i].mean_s22 > tr.samples[i - 1].mean_s22);
  }
  // weak drive: excitation rate Omega1^2 / Gamma, half of it lands in |2>
  CHECK(tr.final_state.mean_s11() == doctest::Approx(std::exp(-0.005 * 500.0)).epsilon(0.05));
  CHECK(tr.final_state.mean_s22() > 0.9);
  CHECK(tr.final_state.mean_s33() < 1e-3);

  const Trajectory longer = integrate(EnsembleState::ground(1), one, m, p, StaticDrive{}, 4000.0, {});
  CHECK(longer.final_state.mean_s22() > 1.0 - 1e-6);
  CHECK(longer.final_state.mean_s33() < 1e-8);
}

TEST_CASE("no drive keeps the trajectory constant") {
  LambdaParams p;
  p.omega1 = p.omega2 = 0.0;
  const CloudGeometry cloud = sample_cloud(5, 5, 0.05, 1);
  const auto n = static_cast<Eigen::Index>(cloud.size());
  const InteractionMatrices m = build_matrices(cloud, p);
  const Trajectory tr = integrate(EnsembleState::ground(n), cloud, m, p, StaticDrive{}, 50.0,
                                  {0.0, 25.0, 50.0});
  CHECK(tr.final_state.packed() == EnsembleState::ground(n).packed());
  for (const auto& s : tr.samples) CHECK(s.mean_s11 == 1.0);

  StirapSchedule off;
  off.omega_max = 0.0;
  const Trajectory st = integrate(EnsembleState::ground(n), cloud, m, p, off, 200.0, {200.0});
  CHECK(st.final_state.mean_s11() == 1.0);
}

TEST_CASE("single-atom adiabatic transfer") {
  LambdaParams p;
  p.delta1 = p.delta2 = 0.0;
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  const InteractionMatrices m = build_matrices(one, p);
  const Trajectory tr = integrate(EnsembleState::ground(1), one, m, p, StirapSchedule{}, 200.0,
                                  {0.0, 10.0, 40.0, 70.0, 200.0});
  CHECK(tr.final_state.mean_s11() < 1e-3);
  CHECK(tr.samples.back().omega1 == 0.5);
  CHECK(tr.samples.back().omega2 == 0.0);
  CHECK(tr.physicality.clean());

  StirapSchedule literal;
  literal.convention = PulseConvention::literal;
  const Trajectory lit = integrate(EnsembleState::ground(1), one, m, p, literal, 200.0, {200.0});
  CHECK(std::isfinite(lit.final_state.mean_s11()));
}

TEST_CASE("trace identity along a trajectory") {
  LambdaParams p;
  p.delta1 = 0.2;
  p.kernel_mode = KernelMode::vectorial;
  const CloudGeometry cloud = sample_cloud(5, 8, 0.05, 9);
  const auto n = static_cast<Eigen::Index>(cloud.size());
  const InteractionMatrices m = build_matrices(cloud, p);
  IntegrateOptions opt;
  opt.keep_states = true;
  const Trajectory tr = integrate(EnsembleState::ground(n), cloud, m, p, StaticDrive{}, 30.0,
                                  {0.0, 5.0, 10.0, 20.0, 30.0}, opt);
  REQUIRE(tr.states.size() == 5);
  for (const EnsembleState& s : tr.states) {
    for (Eigen::Index j = 0; j < n; ++j) {
      CHECK(std::abs(s.s11()[j].real() + s.s22()[j].real() + s.s33(j) - 1.0) <= 4e-16);
      CHECK(s.s11()[j].imag() == 0.0);
      CHECK(s.s22()[j].imag() == 0.0);
    }
  }
}

TEST_CASE("independent atoms reproduce single-atom runs at their local phases") {
  LambdaParams p;
  p.kernel_mode = KernelMode::none;
  p.delta1 = 0.15;
  p.delta2 = -0.05;
  p.k2_over_k1 = 1.2;
  const CloudGeometry cloud = sample_cloud(4, 6, 0.05, 21);
  const auto n = static_cast<Eigen::Index>(cloud.size());
  REQUIRE(n >= 5);
  IntegrateOptions opt;
  opt.tolerances = Tolerances{1e-11, 1e-13};
  const InteractionMatrices m = build_matrices(cloud, p);
  const Trajectory all = integrate(EnsembleState::ground(n), cloud, m, p, StaticDrive{}, 40.0, {}, opt);
  for (Eigen::Index j = 0; j < n; ++j) {
    const CloudGeometry one = testing::cloud_at({cloud.positions[static_cast<std::size_t>(j)]});
    const Trajectory single = integrate(EnsembleState::ground(1), one, build_matrices(one, p), p,
                                        StaticDrive{}, 40.0, {}, opt);
    const EnsembleState& a = all.final_state;
    const EnsembleState& b = single.final_state;
    CHECK(std::abs(a.s11()[j] - b.s11()[0]) < 1e-8);
    CHECK(std::abs(a.s22()[j] - b.s22()[0]) < 1e-8);
    CHECK(std::abs(a.s13()[j] - b.s13()[0]) < 1e-8);
    CHECK(std::abs(a.s23()[j] - b.s23()[0]) < 1e-8);
    CHECK(std::abs(a.s12()[j] - b.s12()[0]) < 1e-8);
  }
}

TEST_CASE("steady state: dark state on resonance") {
  LambdaParams p;
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  const SteadyState ss = solve_steady_state(one, build_matrices(one, p), p);
  CHECK(ss.residual < 1e-8);
  CHECK(std::abs(ss.state.s13()[0]) < 1e-8);
  CHECK(std::abs(ss.state.s23()[0]) < 1e-8);
  CHECK(ss.state.s33(0) < 1e-10);
  CHECK(ss.state.s11()[0].real() == doctest::Approx(0.25 / 0.26).epsilon(1e-6));
}

TEST_CASE("steady state: matches the closed form off resonance") {
  LambdaParams p;
  p.delta1 = 0.125;
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  const SteadyState ss = solve_steady_state(one, build_matrices(one, p), p);
  CHECK(ss.state.s33(0) == doctest::Approx(oracle::sigma33_steady(p)).epsilon(1e-6));
  CHECK(ss.physicality.clean());

  SteadyStateOptions no_polish;
  no_polish.polish_threshold = 0.0;
  const SteadyState plain = solve_steady_state(one, build_matrices(one, p), p, no_polish);
  CHECK(!plain.polished);
  CHECK(plain.residual < 1e-8);
  CHECK(plain.state.s33(0) == doctest::Approx(oracle::sigma33_steady(p)).epsilon(1e-5));
}

TEST_CASE("steady state: empty cloud") {
  LambdaParams p;
  const CloudGeometry empty = testing::cloud_at({});
  const SteadyState ss = solve_steady_state(empty, build_matrices(empty, p), p);
  CHECK(ss.state.atoms() == 0);
  CHECK(ss.residual == 0.0);
}

TEST_CASE("steady state: convergence failure carries the residual history") {
  LambdaParams p;
  p.delta1 = 0.3;
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  SteadyStateOptions opt;
  opt.t_max = 30.0;
  opt.polish_threshold = 0.0;
  opt.fallback_threshold = 0.0;
  bool thrown = false;
  try {
    solve_steady_state(one, build_matrices(one, p), p, opt);
  } catch (const ConvergenceError& e) {
    thrown = true;
    REQUIRE(e.history().size() >= 2);
    CHECK(e.history().front().first == 0.0);
    CHECK(e.history().back().first == doctest::Approx(30.0));
    CHECK(e.history().back().second > 1e-8);
  }
  CHECK(thrown);
}

TEST_CASE("steady state: Newton fallback finishes a stalled integration") {
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  LambdaParams p;
  p.omega1 = 0.01;
  p.omega2 = 0.01;
  p.delta1 = 0.8;
  SteadyStateOptions opt;
  opt.polish_threshold = 0.0;
  const SteadyState ss = solve_steady_state(one, build_matrices(one, p), p, opt);
  CHECK(ss.polished);
  CHECK(ss.time == opt.t_max);
  CHECK(ss.residual < 1e-8);
  CHECK(ss.state.s33(0) == doctest::Approx(oracle::sigma33_steady(p)).epsilon(1e-6));
  opt.fallback_threshold = 0.0;
  CHECK_THROWS_AS(solve_steady_state(one, build_matrices(one, p), p, opt), ConvergenceError);

  // Close pair in the near field: the pair relaxes on a ~1e4 / Gamma scale.
  const CloudGeometry pair = testing::cloud_at({{0, 0, 0}, {0.1, 0, 0.06}, {3, 1, -2}});
  LambdaParams v;
  v.kernel_mode = KernelMode::vectorial;
  v.delta1 = 0.125;
  const InteractionMatrices m = build_matrices(pair, v);
  SteadyStateOptions fallback_only;
  fallback_only.polish_threshold = 0.0;
  const SteadyState near = solve_steady_state(pair, m, v, fallback_only);
  CHECK(near.polished);
  CHECK(near.residual < 1e-8);
  CHECK(near.physicality.clean());
  // The refined state is a fixed point that the dynamics keep.
  const double t1 = near.state.time + 100.0;
  const Trajectory tr = integrate(near.state, pair, m, v, StaticDrive{}, t1, {t1});
  CHECK((tr.final_state.packed() - near.state.packed()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("weak probe: coherence scales linearly with the probe") {
  const CloudGeometry one = testing::cloud_at({{0, 0, 0}});
  double amp[2];
  int i = 0;
  for (double o1 : {0.01, 0.02}) {
    LambdaParams p;
    p.omega1 = o1;
    p.omega2 = 0.5;
    p.delta1 = 0.125;
    amp[i++] = std::abs(solve_steady_state(one, build_matrices(one, p), p).state.s13()[0]);
  }
  CHECK(amp[1] / amp[0] == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("physicality monitor") {
  EnsembleState s(2);
  s.s11()[0] = 0.7;
  s.s22()[0] = 0.4;  // s33 = -0.1
  s.s11()[1] = 1.0;
  s.s13()[1] = 1.5;
  PhysicalityReport r;
  check_physicality(s, r);
  CHECK(r.negative_s33 == 1);
  CHECK(r.oversized_coherence == 1);
  CHECK(!r.clean());
}

}
