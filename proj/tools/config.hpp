#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eitsim/observables.hpp"
#include "eitsim/stirap.hpp"

namespace eitsim::cli {

using json = nlohmann::ordered_json;

/// Every problem found in a configuration, one message per offending key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// The full default configuration. Every accepted key appears here.
json default_config();

/// Defaults overlaid with the JSON file (if `path` is non-empty) and then the
/// `key.path=value` overrides. Values are parsed as JSON, falling back to a
/// plain string.
json load_config(const std::string& path, const std::vector<std::string>& overrides);

struct SweepPlan {
  std::string axis;  // "density" or "thickness"
  std::vector<double> values;
  std::vector<KernelMode> modes;
};

struct RunConfig {
  json effective;  // echoed into manifests
  std::string output_dir;
  int threads = 1;
  SpectrumConfig spectrum;
  bool compare_none = false;
  StirapConfig stirap;
  SweepPlan sweep;
  std::vector<double> oracle_grid;
};

/// Converts a merged configuration, checking every range. Throws ConfigError.
RunConfig parse_config(const json& merged);

}  // namespace eitsim::cli
