#pragma once

#include <string>

#include "config.hpp"

namespace eitsim::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfigError = 2,
  kConvergenceFailure = 3,
  kPartialSweep = 4,
};

/// spectrum.csv + metrics.json + manifest.json (plus *_none files when
/// spectrum.compare_none is set).
int run_spectrum(const RunConfig& config);

/// stirap.csv + manifest.json.
int run_stirap(const RunConfig& config);

/// oracle.csv + manifest.json; geometry for b comes from the cloud section.
int run_oracle(const RunConfig& config);

/// One spectrum per (sweep value, mode) under point_XXX_<mode>/, plus
/// summary.csv and manifest.json. Failed points are recorded and skipped.
int run_sweep(const RunConfig& config);

/// Quick invariant checks; one line per check on stdout.
int run_validate(const RunConfig& config);

}  // namespace eitsim::cli
