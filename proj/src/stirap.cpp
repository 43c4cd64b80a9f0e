#include "eitsim/stirap.hpp"

#include <cmath>
#include <stdexcept>

#include "eitsim/cloud.hpp"
#include "eitsim/kernel.hpp"
#include "eitsim/parallel.hpp"

namespace eitsim {

std::vector<double> stirap_sample_times(double t_end, double dt) {
  if (!(dt > 0.0) || !(t_end >= 0.0)) {
    throw std::invalid_argument("stirap: need sample_dt > 0 and t_end >= 0");
  }
  const auto count = static_cast<long>(std::floor(t_end / dt + 1e-9));
  std::vector<double> t;
  for (long i = 0; i <= count; ++i) t.push_back(static_cast<double>(i) * dt);
  if (t.back() < t_end) t.push_back(t_end);
  return t;
}

StirapResult run_stirap_ensemble(const StirapConfig& config) {
  config.schedule.validate();
  config.params.validate();
  if (config.realizations < 1) throw std::invalid_argument("stirap: need >= 1 realization");
  if (config.modes.empty()) throw std::invalid_argument("stirap: no kernel modes requested");

  StirapResult result;
  result.sample_times = stirap_sample_times(config.t_end, config.sample_dt);
  const auto nr = static_cast<std::size_t>(config.realizations);

  std::vector<CloudGeometry> clouds(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    const std::uint64_t seed = derive_seed(config.master_seed, r);
    result.seeds.push_back(seed);
    if (atom_count(config.radius_kR, config.thickness_kL, config.density) == 0) {
      clouds[r].radius_kR = config.radius_kR;
      clouds[r].thickness_kL = config.thickness_kL;
      clouds[r].seed = seed;
    } else {
      clouds[r] = sample_cloud(config.radius_kR, config.thickness_kL, config.density, seed,
                               config.min_pair_separation_k);
    }
    result.atoms.push_back(clouds[r].size());
  }

  for (KernelMode mode : config.modes) {
    LambdaParams p = config.params;
    p.kernel_mode = mode;
    std::vector<Trajectory> runs(nr);
    parallel_for(nr, config.threads, [&](std::size_t r) {
      const InteractionMatrices m = build_matrices(clouds[r], p);
      IntegrateOptions opt;
      opt.tolerances = config.tolerances;
      runs[r] = integrate(EnsembleState::ground(static_cast<Eigen::Index>(clouds[r].size())),
                          clouds[r], m, p, config.schedule, config.t_end, result.sample_times,
                          opt);
    });

    StirapModeResult mr;
    mr.mode = mode;
    mr.mean.resize(result.sample_times.size());
    for (std::size_t i = 0; i < mr.mean.size(); ++i) {
      TrajectorySample acc;
      acc.t = result.sample_times[i];
      for (const auto& run : runs) {
        acc.mean_s11 += run.samples[i].mean_s11;
        acc.mean_s22 += run.samples[i].mean_s22;
        acc.mean_s33 += run.samples[i].mean_s33;
      }
      const double inv = 1.0 / static_cast<double>(nr);
      acc.mean_s11 *= inv;
      acc.mean_s22 *= inv;
      acc.mean_s33 *= inv;
      acc.omega1 = runs.front().samples[i].omega1;
      acc.omega2 = runs.front().samples[i].omega2;
      mr.mean[i] = acc;
    }
    for (const auto& run : runs) {
      mr.final_s11.push_back(run.final_state.mean_s11());
      mr.physicality.negative_s33 += run.physicality.negative_s33;
      mr.physicality.oversized_coherence += run.physicality.oversized_coherence;
      mr.steps += run.steps;
    }
    result.modes.push_back(std::move(mr));
  }
  return result;
}

}  // namespace eitsim
