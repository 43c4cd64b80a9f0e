#include <doctest.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include "eitsim/io.hpp"
#include "support.hpp"

using namespace eitsim;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

SpectrumResult small_spectrum() {
  SpectrumConfig c;
  c.radius_kR = 6.0;
  c.thickness_kL = 6.0;
  c.delta1_grid = uniform_grid(-0.5, 0.5, 11);
  c.plan.realizations = 2;
  return spectrum(c);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(std::strtod(io::format_double(x).c_str(), nullptr) == x);
  }
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(std::nan("")) == "nan");
}

TEST_CASE("spectrum table and metrics") {
  const SpectrumResult r = small_spectrum();
  const auto rows = lines(io::spectrum_csv(r));
  REQUIRE(rows.size() == 12);
  CHECK(rows[0] == "delta1_over_gamma,t_mean,t_stderr,n_realizations");
  CHECK(rows[1].rfind("-0.5,", 0) == 0);
  CHECK(rows[1].substr(rows[1].size() - 2) == ",2");

  const nlohmann::ordered_json m = io::metrics_json(r);
  for (const char* key : {"schema_version", "fwhm", "fwhm_mean", "fwhm_stderr", "tmin_mean",
                          "tmin_stderr", "t_peak", "t_min", "valley_detunings", "parameters", "seeds"}) {
    CHECK_MESSAGE(m.contains(key), key);
  }
  CHECK(m["seeds"].size() == 2);
  CHECK(m["seeds"][1].get<std::uint64_t>() == derive_seed(1, 1));
  CHECK(io::metrics_json(r).dump() == m.dump());
}

TEST_CASE("trajectory tables") {
  StirapResult r;
  r.sample_times = {0.0, 1.0};
  for (KernelMode mode : {KernelMode::none, KernelMode::vectorial}) {
    StirapModeResult m;
    m.mode = mode;
    m.mean = {TrajectorySample{0.0, 1.0, 0.0, 0.0, 0.0, 0.5}, TrajectorySample{1.0, 0.9, 0.05, 0.05, 0.0, 0.5}};
    r.modes.push_back(m);
  }
  auto rows = lines(io::stirap_csv(r));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "mode,t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2");
  CHECK(rows[3] == "vectorial,0,1,0,0,0,0.5");
  r.modes.pop_back();
  rows = lines(io::stirap_csv(r));
  CHECK(rows[0] == "t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2");
  CHECK(rows.size() == 3);
}

TEST_CASE("oracle, position and state tables") {
  CHECK(lines(io::oracle_csv({{0.1, 0.2, 0.3, 0.4}})) ==
        std::vector<std::string>{"delta1_over_gamma,sigma33,sigma_sc_k1sq,b", "0.10000000000000001,0.20000000000000001,0.29999999999999999,0.40000000000000002"});
  const CloudGeometry c = testing::cloud_at({{1, 2, 3}, {-1, 0.5, 0}});
  const auto pos = lines(io::positions_csv(c));
  REQUIRE(pos.size() == 3);
  CHECK(pos[0] == "atom_index,kx,ky,kz");
  CHECK(pos[2] == "1,-1,0.5,0");
  const auto st = lines(io::state_csv(EnsembleState::ground(2)));
  CHECK(st.size() == 3);
  CHECK(st[1] == "0,1,0,0,0,0,0,0,0,0");
}

}
