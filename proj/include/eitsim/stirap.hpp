#pragma once

#include <cstdint>
#include <vector>

#include "eitsim/dynamics.hpp"
#include "eitsim/params.hpp"

namespace eitsim {

struct StirapConfig {
  double radius_kR = 15.0;
  double thickness_kL = 30.0;
  double density = 0.01;
  double min_pair_separation_k = 0.05;
  LambdaParams params;  // omega1/omega2 are replaced by the schedule
  StirapSchedule schedule;
  std::vector<KernelMode> modes{KernelMode::none, KernelMode::scalar, KernelMode::vectorial};
  int realizations = 4;
  std::uint64_t master_seed = 1;
  double t_end = 200.0;
  double sample_dt = 1.0;
  Tolerances tolerances;
  int threads = 1;
};

struct StirapModeResult {
  KernelMode mode = KernelMode::none;
  /// Realization-averaged ensemble means at the sample times.
  std::vector<TrajectorySample> mean;
  /// Final ensemble-mean s11 of every realization, in index order.
  std::vector<double> final_s11;
  PhysicalityReport physicality;
  long steps = 0;
};

struct StirapResult {
  std::vector<double> sample_times;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> atoms;
  std::vector<StirapModeResult> modes;
};

std::vector<double> stirap_sample_times(double t_end, double dt);

/// Every realization uses the same cloud for all kernel modes; realizations
/// (per mode) run on `threads` workers and are reduced in index order.
StirapResult run_stirap_ensemble(const StirapConfig& config);

}  // namespace eitsim
