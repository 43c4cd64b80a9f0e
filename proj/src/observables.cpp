#include "eitsim/observables.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "eitsim/parallel.hpp"

namespace eitsim {

namespace {

double scatter_prefactor(const LambdaParams& params) {
  if (!(params.omega1 > 0.0)) {
    throw std::domain_error("probe observables need omega1 > 0 (field is normalized by it)");
  }
  return params.gamma1_frac / (2.0 * params.omega1);
}

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void check_sizes(const EnsembleState& state, const CloudGeometry& cloud) {
  if (state.atoms() != static_cast<Eigen::Index>(cloud.size())) {
    throw std::invalid_argument("observables: state size does not match the cloud");
  }
}

double singular_radius(const CloudGeometry& cloud) {
  return std::max(cloud.min_pair_separation_k, 1e-9);
}

}  // namespace

cdouble total_field(const Vec3& point, const EnsembleState& state, const CloudGeometry& cloud,
                    const LambdaParams& params) {
  check_sizes(state, cloud);
  const double pref = scatter_prefactor(params);
  const double rmin = singular_radius(cloud);
  cdouble scattered = 0.0;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const double d = distance(point, cloud.positions[j]);
    if (d < rmin) throw SingularityError("total_field: observation point coincides with an atom");
    scattered += state.s13()[static_cast<Eigen::Index>(j)] * std::polar(1.0 / d, d);
  }
  return std::polar(1.0, point[2]) - pref * scattered;
}

double intensity(const Vec3& point, const EnsembleState& state, const CloudGeometry& cloud,
                 const LambdaParams& params) {
  const cdouble e = total_field(point, state, cloud, params);
  const double pref = scatter_prefactor(params);
  double incoherent = 0.0;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double d = distance(point, cloud.positions[j]);
    incoherent += (state.s33(jj) - std::norm(state.s13()[jj])) / (d * d);
  }
  return std::norm(e) + pref * pref * incoherent;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (x * p0 - p1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = mid - half * x;
    rule.nodes[hi] = mid + half * x;
    rule.weights[lo] = half * w;
    rule.weights[hi] = half * w;
  }
  return rule;
}

DetectorProjector::DetectorProjector(const CloudGeometry& cloud, const DetectorDisk& detector) {
  detector.validate(cloud);
  const QuadratureRule radial = gauss_legendre(detector.radial_nodes, 0.0, detector.s_max_k);
  const int na = detector.angular_nodes;
  const Eigen::Index m = static_cast<Eigen::Index>(radial.nodes.size()) * na;
  const auto n = static_cast<Eigen::Index>(cloud.size());
  const double area = std::numbers::pi * detector.s_max_k * detector.s_max_k;
  const double dphi = 2.0 * std::numbers::pi / na;
  const double rmin = singular_radius(cloud);

  weights_.resize(m);
  incident_ = Eigen::VectorXcd::Constant(m, std::polar(1.0, detector.z0_k));
  spherical_.resize(m, n);
  inverse_sq_.resize(m, n);

  Eigen::Index row = 0;
  for (std::size_t ir = 0; ir < radial.nodes.size(); ++ir) {
    const double s = radial.nodes[ir];
    for (int ia = 0; ia < na; ++ia, ++row) {
      const double phi = dphi * (ia + 0.5);
      const Vec3 p{s * std::cos(phi), s * std::sin(phi), detector.z0_k};
      weights_[row] = radial.weights[ir] * s * dphi / area;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = distance(p, cloud.positions[static_cast<std::size_t>(j)]);
        if (d < rmin) throw SingularityError("detector node coincides with an atom");
        spherical_(row, j) = std::polar(1.0 / d, d);
        inverse_sq_(row, j) = 1.0 / (d * d);
      }
    }
  }
}

double DetectorProjector::transmission(const EnsembleState& state,
                                       const LambdaParams& params) const {
  if (state.atoms() != spherical_.cols()) {
    throw std::invalid_argument("DetectorProjector: state size does not match the cloud");
  }
  if (state.atoms() == 0) return weights_.sum();
  const double pref = scatter_prefactor(params);
  const Eigen::VectorXcd field = incident_ - pref * (spherical_ * state.s13());
  Eigen::VectorXd excess(state.atoms());
  for (Eigen::Index j = 0; j < state.atoms(); ++j) {
    excess[j] = state.s33(j) - std::norm(state.s13()[j]);
  }
  const Eigen::VectorXd incoherent = inverse_sq_ * excess;
  return weights_.dot(field.cwiseAbs2() + pref * pref * incoherent);
}

double transmission(const EnsembleState& state, const CloudGeometry& cloud,
                    const LambdaParams& params, const DetectorDisk& detector) {
  check_sizes(state, cloud);
  return DetectorProjector(cloud, detector).transmission(state, params);
}

EnsembleStats ensemble_stats(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("ensemble_stats: need at least one value");
  EnsembleStats st;
  st.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    st.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return st;
}

WindowMetrics window_metrics(const std::vector<double>& grid, const std::vector<double>& curve) {
  if (grid.size() != curve.size()) throw ShapeError("window_metrics: grid and curve sizes differ");
  const std::size_t n = grid.size();
  if (n < 5) throw ShapeError("window_metrics: need at least five points");
  if (!std::is_sorted(grid.begin(), grid.end())) throw ShapeError("window_metrics: grid not sorted");

  const auto first_positive = static_cast<std::size_t>(
      std::upper_bound(grid.begin(), grid.end(), 0.0) - grid.begin());
  const auto last_negative_end = static_cast<std::size_t>(
      std::lower_bound(grid.begin(), grid.end(), 0.0) - grid.begin());
  if (last_negative_end == 0 || first_positive >= n) {
    throw ShapeError("window_metrics: grid must extend to both sides of zero detuning");
  }

  const auto left = static_cast<std::size_t>(
      std::min_element(curve.begin(), curve.begin() + static_cast<long>(last_negative_end)) -
      curve.begin());
  const auto right = static_cast<std::size_t>(
      std::min_element(curve.begin() + static_cast<long>(first_positive), curve.end()) -
      curve.begin());
  if (right <= left + 1) throw ShapeError("window_metrics: no point between the valleys");

  const auto peak = static_cast<std::size_t>(
      std::max_element(curve.begin() + static_cast<long>(left) + 1,
                       curve.begin() + static_cast<long>(right)) -
      curve.begin());
  const double t_peak = curve[peak];
  const double scale = std::max({std::abs(t_peak), std::abs(curve[left]), std::abs(curve[right]), 1e-300});
  if (!(t_peak - std::max(curve[left], curve[right]) > 1e-12 * scale)) {
    throw ShapeError("window_metrics: no peak rises above both valleys");
  }

  const double half = 0.5 * (t_peak + 0.5 * (curve[left] + curve[right]));
  auto crossing = [&](std::size_t a, std::size_t b) {
    // Linear interpolation of the half level between grid points a and b.
    return grid[a] + (half - curve[a]) * (grid[b] - grid[a]) / (curve[b] - curve[a]);
  };

  std::size_t i = peak;
  while (i > left && curve[i] >= half) --i;
  if (curve[i] >= half) throw ShapeError("window_metrics: left valley does not reach the half level");
  const double x_left = crossing(i, i + 1);

  std::size_t k = peak;
  while (k < right && curve[k] >= half) ++k;
  if (curve[k] >= half) {
    throw ShapeError("window_metrics: right valley does not reach the half level");
  }
  const double x_right = crossing(k - 1, k);

  WindowMetrics w;
  w.fwhm = x_right - x_left;
  w.t_peak = t_peak;
  w.delta_peak = grid[peak];
  w.valley_left = grid[left];
  w.valley_right = grid[right];
  w.t_valley_left = curve[left];
  w.t_valley_right = curve[right];
  w.t_min = std::min(curve[left], curve[right]);
  return w;
}

std::vector<double> uniform_grid(double lo, double hi, int points) {
  if (points < 1) throw std::invalid_argument("uniform_grid: need at least one point");
  std::vector<double> g(static_cast<std::size_t>(points));
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  for (int i = 0; i < points; ++i) {
    g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  }
  // Centred grids get an exact zero.
  for (double& x : g) {
    if (std::abs(x) < 1e-14 * std::max(std::abs(lo), std::abs(hi))) x = 0.0;
  }
  return g;
}

DetectorDisk DetectorSpec::for_cloud(const CloudGeometry& cloud) const {
  DetectorDisk d;
  d.z0_k = 0.5 * cloud.thickness_kL + z0_offset;
  d.s_max_k = s_max_fraction * cloud.radius_kR;
  d.radial_nodes = radial_nodes;
  d.angular_nodes = angular_nodes;
  return d;
}

std::vector<std::uint64_t> SpectrumResult::seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& r : realizations) out.push_back(r.seed);
  return out;
}

WindowMetrics SpectrumResult::mean_metrics() const { return window_metrics(delta1_grid, t_mean); }

EnsembleStats SpectrumResult::fwhm_stats() const {
  std::vector<double> v;
  for (const auto& r : realizations) {
    if (r.metrics) v.push_back(r.metrics->fwhm);
  }
  if (v.empty()) throw ShapeError("no realization produced a transparency window");
  return ensemble_stats(v);
}

EnsembleStats SpectrumResult::tmin_stats() const {
  std::vector<double> v;
  for (const auto& r : realizations) {
    if (r.metrics) v.push_back(r.metrics->t_min);
  }
  if (v.empty()) throw ShapeError("no realization produced a transparency window");
  return ensemble_stats(v);
}

namespace {

CloudGeometry realization_cloud(const SpectrumConfig& c, std::uint64_t seed) {
  // A slab that rounds to zero atoms is still a valid (empty) realization.
  if (atom_count(c.radius_kR, c.thickness_kL, c.density) == 0 || c.density <= 0.0) {
    CloudGeometry empty;
    empty.radius_kR = c.radius_kR;
    empty.thickness_kL = c.thickness_kL;
    empty.density = std::max(c.density, 0.0);
    empty.seed = seed;
    empty.min_pair_separation_k = c.min_pair_separation_k;
    return empty;
  }
  return sample_cloud(c.radius_kR, c.thickness_kL, c.density, seed, c.min_pair_separation_k);
}

RealizationRecord run_realization(const SpectrumConfig& config, int index,
                                  const ProgressFn& progress) {
  RealizationRecord rec;
  rec.index = index;
  rec.seed = derive_seed(config.plan.master_seed, static_cast<std::uint64_t>(index));
  const CloudGeometry cloud = realization_cloud(config, rec.seed);
  rec.atoms = cloud.size();
  const InteractionMatrices matrices = build_matrices(cloud, config.params);
  const DetectorProjector projector(cloud, config.detector.for_cloud(cloud));

  const std::size_t g = config.delta1_grid.size();
  rec.transmission.assign(g, 0.0);
  std::vector<SteadyState> states(g);
  std::atomic<int> done{0};
  parallel_for(g, config.threads, [&](std::size_t i) {
    LambdaParams p = config.params;
    p.delta1 = config.delta1_grid[i];
    try {
      SteadyState ss = solve_steady_state(cloud, matrices, p, config.steady);
      rec.transmission[i] = projector.transmission(ss.state, p);
      states[i] = std::move(ss);
    } catch (const ConvergenceError& e) {
      std::ostringstream msg;
      msg << "realization " << index << ", delta1 = " << p.delta1 << ": " << e.what();
      throw SpectrumError(msg.str(), index, p.delta1, true);
    } catch (const StiffnessError& e) {
      std::ostringstream msg;
      msg << "realization " << index << ", delta1 = " << p.delta1 << ": " << e.what();
      throw SpectrumError(msg.str(), index, p.delta1, true);
    }
    if (progress) progress(index, ++done, static_cast<int>(g));
  });

  for (const auto& ss : states) {
    rec.max_residual = std::max(rec.max_residual, ss.residual);
    rec.max_time = std::max(rec.max_time, ss.time);
    rec.steps += ss.steps;
    rec.physicality.negative_s33 += ss.physicality.negative_s33;
    rec.physicality.oversized_coherence += ss.physicality.oversized_coherence;
  }
  try {
    rec.metrics = window_metrics(config.delta1_grid, rec.transmission);
  } catch (const ShapeError&) {
    rec.metrics.reset();
  }
  return rec;
}

}  // namespace

SpectrumResult spectrum(const SpectrumConfig& config, const ProgressFn& progress) {
  if (!std::is_sorted(config.delta1_grid.begin(), config.delta1_grid.end())) {
    throw std::invalid_argument("spectrum: delta1 grid must be sorted");
  }
  if (config.delta1_grid.empty()) throw std::invalid_argument("spectrum: empty delta1 grid");
  if (config.plan.realizations < 1) throw std::invalid_argument("spectrum: need >= 1 realization");
  config.params.validate();

  SpectrumResult result;
  result.config = config;
  result.delta1_grid = config.delta1_grid;

  for (int r = 0; r < config.plan.realizations; ++r) {
    try {
      result.realizations.push_back(run_realization(config, r, progress));
    } catch (const SpectrumError& e) {
      if (config.stop_on_error) throw;
      result.failure = SpectrumFailure{e.realization(), e.delta1(), e.convergence_failure(), e.what()};
      break;
    }
    if (config.plan.adaptive && r + 1 >= std::max(2, config.plan.min_realizations)) {
      try {
        const EnsembleStats st = result.fwhm_stats();
        if (st.std_error && st.mean > 0.0 &&
            *st.std_error < config.plan.target_relative_stderr * st.mean) {
          break;
        }
      } catch (const ShapeError&) {
      }
    }
  }

  const std::size_t g = config.delta1_grid.size();
  result.t_mean.resize(g);
  result.t_stderr.resize(g);
  std::vector<double> column(result.realizations.size());
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t r = 0; r < result.realizations.size(); ++r) {
      column[r] = result.realizations[r].transmission[i];
    }
    if (column.empty()) {
      result.t_mean[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const EnsembleStats st = ensemble_stats(column);
    result.t_mean[i] = st.mean;
    result.t_stderr[i] = st.std_error;
  }
  return result;
}

}  // namespace eitsim
