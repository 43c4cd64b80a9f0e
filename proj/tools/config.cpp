#include "config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "eitsim/parallel.hpp"

namespace eitsim::cli {

namespace {

std::string join(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void overlay(json& base, const json& user, const std::string& prefix,
             std::vector<std::string>& problems) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) {
      problems.push_back(key + ": unknown key");
      continue;
    }
    json& slot = base[it.key()];
    if (slot.is_object()) {
      if (!it->is_object()) {
        problems.push_back(key + ": expected an object");
        continue;
      }
      overlay(slot, *it, key, problems);
    } else if (!same_kind(slot, *it)) {
      problems.push_back(key + ": expected " + std::string(slot.type_name()) + ", got " +
                         it->type_name());
    } else {
      slot = *it;
    }
  }
}

// Reads typed values out of the merged tree and records range problems.
class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& at(const std::string& path) const {
    const json* node = &root_;
    std::istringstream in(path);
    std::string part;
    while (std::getline(in, part, '.')) node = &node->at(part);
    return *node;
  }

  double number(const std::string& path) { return at(path).get<double>(); }

  double positive(const std::string& path) {
    const double v = number(path);
    if (!(v > 0.0) || !std::isfinite(v)) fail(path, "must be > 0");
    return v;
  }

  double non_negative(const std::string& path) {
    const double v = number(path);
    if (!(v >= 0.0) || !std::isfinite(v)) fail(path, "must be >= 0");
    return v;
  }

  int count(const std::string& path, int min) {
    const json& j = at(path);
    if (!j.is_number_integer() || j.get<long long>() < min || j.get<long long>() > 1'000'000'000) {
      fail(path, "must be an integer >= " + std::to_string(min));
      return min;
    }
    return static_cast<int>(j.get<long long>());
  }

  KernelMode mode(const json& j, const std::string& path) {
    try {
      return kernel_mode_from_string(j.get<std::string>());
    } catch (const std::exception&) {
      fail(path, "must be one of scalar, vectorial, none");
      return KernelMode::none;
    }
  }

  std::vector<KernelMode> modes(const std::string& path) {
    const json& j = at(path);
    std::vector<KernelMode> out;
    if (j.empty()) fail(path, "must list at least one kernel mode");
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_string()) {
        fail(path, "entries must be strings");
        continue;
      }
      out.push_back(mode(j[i], path));
    }
    return out;
  }

  void fail(const std::string& path, const std::string& why) { problems.push_back(path + ": " + why); }

  std::vector<std::string> problems;

 private:
  const json& root_;
};

LambdaParams read_lambda(Reader& r) {
  LambdaParams p;
  p.gamma1_frac = r.non_negative("lambda.gamma1_frac");
  p.gamma2_frac = r.non_negative("lambda.gamma2_frac");
  if (std::abs(p.gamma1_frac + p.gamma2_frac - 1.0) > 1e-12) {
    r.fail("lambda.gamma2_frac", "gamma1_frac + gamma2_frac must equal 1");
  }
  p.omega1 = r.non_negative("lambda.omega1");
  p.omega2 = r.non_negative("lambda.omega2");
  p.delta1 = r.number("lambda.delta1");
  p.delta2 = r.number("lambda.delta2");
  p.k2_over_k1 = r.positive("lambda.k2_over_k1");
  p.kernel_mode = r.mode(r.at("lambda.kernel_mode"), "lambda.kernel_mode");
  try {
    p.population_feed = population_feed_from_string(r.at("lambda.population_feed").get<std::string>());
  } catch (const std::exception&) {
    r.fail("lambda.population_feed", "must be physical or printed");
  }
  return p;
}

std::vector<double> read_grid(Reader& r, const std::string& section) {
  const double lo = r.number(section + ".delta1_min");
  const double hi = r.number(section + ".delta1_max");
  const int points = r.count(section + ".points", 1);
  if (!(lo < hi) && points > 1) r.fail(section + ".delta1_max", "must exceed delta1_min");
  return uniform_grid(lo, hi, points);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

json default_config() {
  return json::parse(R"({
    "output_dir": "out",
    "threads": 0,
    "seed": 1,
    "lambda": {
      "gamma1_frac": 0.5, "gamma2_frac": 0.5,
      "omega1": 0.1, "omega2": 0.5,
      "delta1": 0.0, "delta2": 0.0,
      "k2_over_k1": 1.0,
      "kernel_mode": "scalar",
      "population_feed": "physical"
    },
    "cloud": {"radius_kR": 20.0, "thickness_kL": 20.0, "density": 0.01, "min_pair_separation_k": 0.05},
    "detector": {"z0_offset": 10.0, "s_max_fraction": 0.6, "radial_nodes": 64, "angular_nodes": 128},
    "spectrum": {
      "delta1_min": -0.5, "delta1_max": 0.5, "points": 101,
      "realizations": 8, "adaptive": false, "min_realizations": 4, "target_relative_stderr": 0.02,
      "compare_none": false
    },
    "steady_state": {"residual_target": 1e-8, "t_max": 2000.0, "rtol": 1e-10, "atol": 1e-12, "polish_max_atoms": 16,
                     "fallback_threshold": 1e-3, "fallback_max_atoms": 400},
    "stirap": {
      "radius_kR": 15.0, "thickness_kL": 30.0, "density": 0.01,
      "omega_max": 0.5, "t0": 10.0, "tr": 60.0, "convention": "shifted",
      "t_end": 200.0, "sample_dt": 1.0,
      "modes": ["none", "scalar", "vectorial"],
      "realizations": 4,
      "rtol": 1e-8, "atol": 1e-10
    },
    "sweep": {"axis": "density", "values": [0.002, 0.005, 0.01], "modes": ["scalar", "none"]},
    "oracle": {"delta1_min": -0.5, "delta1_max": 0.5, "points": 101}
  })");
}

json load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json merged = default_config();
  std::vector<std::string> problems;

  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot open config file"});
    json user;
    try {
      user = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError({path + ": " + e.what()});
    }
    if (!user.is_object()) throw ConfigError({path + ": top level must be an object"});
    overlay(merged, user, "", problems);
  }

  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      problems.push_back(item + ": override must look like key.path=value");
      continue;
    }
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json patch = json::object();
    json* node = &patch;
    std::istringstream in(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(in, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
    overlay(merged, patch, "", problems);
  }

  if (!problems.empty()) throw ConfigError(problems);
  return merged;
}

RunConfig parse_config(const json& merged) {
  Reader r(merged);
  RunConfig c;
  c.effective = merged;
  c.output_dir = r.at("output_dir").get<std::string>();
  if (c.output_dir.empty()) r.fail("output_dir", "must not be empty");
  const int threads = r.count("threads", 0);
  const json& seed = r.at("seed");
  std::uint64_t master = 0;
  if (seed.is_number_unsigned()) {
    master = seed.get<std::uint64_t>();
  } else if (seed.is_number_integer() && seed.get<long long>() >= 0) {
    master = static_cast<std::uint64_t>(seed.get<long long>());
  } else {
    r.fail("seed", "must be a non-negative integer");
  }

  const LambdaParams lambda = read_lambda(r);

  SpectrumConfig& s = c.spectrum;
  s.radius_kR = r.positive("cloud.radius_kR");
  s.thickness_kL = r.positive("cloud.thickness_kL");
  s.density = r.non_negative("cloud.density");
  s.min_pair_separation_k = r.non_negative("cloud.min_pair_separation_k");
  s.params = lambda;
  if (!(lambda.omega1 > 0.0)) r.fail("lambda.omega1", "must be > 0 for transmission spectra");
  s.detector.z0_offset = r.positive("detector.z0_offset");
  s.detector.s_max_fraction = r.positive("detector.s_max_fraction");
  if (s.detector.s_max_fraction >= 1.0) r.fail("detector.s_max_fraction", "must be < 1");
  s.detector.radial_nodes = r.count("detector.radial_nodes", 1);
  s.detector.angular_nodes = r.count("detector.angular_nodes", 1);
  s.delta1_grid = read_grid(r, "spectrum");
  s.plan.master_seed = master;
  s.plan.realizations = r.count("spectrum.realizations", 1);
  s.plan.adaptive = r.at("spectrum.adaptive").get<bool>();
  s.plan.min_realizations = r.count("spectrum.min_realizations", 1);
  s.plan.target_relative_stderr = r.positive("spectrum.target_relative_stderr");
  c.compare_none = r.at("spectrum.compare_none").get<bool>();
  s.steady.residual_target = r.positive("steady_state.residual_target");
  s.steady.t_max = r.positive("steady_state.t_max");
  s.steady.tolerances.rtol = r.positive("steady_state.rtol");
  s.steady.tolerances.atol = r.positive("steady_state.atol");
  s.steady.polish_max_atoms = r.count("steady_state.polish_max_atoms", 0);
  s.steady.fallback_threshold = r.non_negative("steady_state.fallback_threshold");
  s.steady.fallback_max_atoms = r.count("steady_state.fallback_max_atoms", 0);

  StirapConfig& st = c.stirap;
  st.radius_kR = r.positive("stirap.radius_kR");
  st.thickness_kL = r.positive("stirap.thickness_kL");
  st.density = r.non_negative("stirap.density");
  st.min_pair_separation_k = s.min_pair_separation_k;
  st.params = lambda;
  st.schedule.omega_max = r.non_negative("stirap.omega_max");
  st.schedule.t0 = r.non_negative("stirap.t0");
  st.schedule.tr = r.positive("stirap.tr");
  try {
    st.schedule.convention = pulse_convention_from_string(r.at("stirap.convention").get<std::string>());
  } catch (const std::exception&) {
    r.fail("stirap.convention", "must be shifted or literal");
  }
  st.t_end = r.non_negative("stirap.t_end");
  st.sample_dt = r.positive("stirap.sample_dt");
  st.modes = r.modes("stirap.modes");
  st.realizations = r.count("stirap.realizations", 1);
  st.master_seed = master;
  st.tolerances.rtol = r.positive("stirap.rtol");
  st.tolerances.atol = r.positive("stirap.atol");

  c.sweep.axis = r.at("sweep.axis").get<std::string>();
  if (c.sweep.axis != "density" && c.sweep.axis != "thickness") {
    r.fail("sweep.axis", "must be density or thickness");
  }
  const json& values = r.at("sweep.values");
  if (values.empty()) r.fail("sweep.values", "must list at least one value");
  for (const json& v : values) {
    if (!v.is_number() || !(v.get<double>() > 0.0)) {
      r.fail("sweep.values", "entries must be positive numbers");
      break;
    }
    c.sweep.values.push_back(v.get<double>());
  }
  c.sweep.modes = r.modes("sweep.modes");

  c.oracle_grid = read_grid(r, "oracle");

  if (!r.problems.empty()) throw ConfigError(r.problems);
  c.threads = resolve_threads(threads);
  s.threads = c.threads;
  st.threads = c.threads;
  return c;
}

}  // namespace eitsim::cli
