#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "permsphere/embedding.hpp"
#include "permsphere/filter.hpp"
#include "permsphere/permutation.hpp"
#include "permsphere/rng.hpp"
#include "permsphere/trajectories.hpp"
#include "permsphere/vmf.hpp"

namespace permsphere {

/// Observation concentration used when nu = 0 requests noiseless
/// observations. Large enough that the likelihood dominates, small enough to
/// stay inside the continued fraction's iteration budget for every d.
constexpr double kExactObservationKappa = 3000.0;

// Stream labels for deriving independent RNG substreams from the base seed.
namespace stream {
constexpr std::uint64_t kCalibration = 1;
constexpr std::uint64_t kSynthetic = 2;
constexpr std::uint64_t kTrackingWorld = 3;
constexpr std::uint64_t kTrackingObs = 4;
constexpr std::uint64_t kTrajectories = 5;
}  // namespace stream

struct SyntheticConfig {
  int n = 25;
  int steps = 100;
  double nu = 0.1;
  double missing_frac = 0.0;
  int repeats = 10;
  std::uint64_t seed = 1;
  /// Transition concentration for the predict step; disengaged (static
  /// hidden permutation, predict skipped) when empty.
  std::optional<double> kappa_tr;
  /// Calibration sample count; 0 selects the default.
  int calibration_draws = 0;

  void validate() const {
    if (n < 2) throw std::invalid_argument("SyntheticConfig: n must be >= 2");
    if (steps < 1)
      throw std::invalid_argument("SyntheticConfig: steps must be >= 1");
    if (!(nu >= 0.0 && nu <= 1.0))
      throw std::invalid_argument("SyntheticConfig: nu must be in [0, 1]");
    if (!(missing_frac >= 0.0 && missing_frac < 1.0))
      throw std::invalid_argument(
          "SyntheticConfig: missing_frac must be in [0, 1)");
    if (repeats < 1)
      throw std::invalid_argument("SyntheticConfig: repeats must be >= 1");
    if (kappa_tr && !(*kappa_tr >= 0.0))
      throw std::invalid_argument("SyntheticConfig: kappa_tr must be >= 0");
  }
};

/// One aggregated row of an experiment: statistics of the misassignment
/// fraction at a step (or the run summary when step = -1).
struct ErrorReportRow {
  double nu;
  double missing_frac;
  int step;
  double mean_error;
  double std_error;
  int repeats;
};

struct ErrorReport {
  std::vector<ErrorReportRow> rows;

  const ErrorReportRow& summary() const {
    for (const auto& r : rows)
      if (r.step == -1) return r;
    throw std::logic_error("ErrorReport: no summary row");
  }

  /// CSV with a fixed numeric format so identical runs are byte-identical.
  std::string to_csv() const {
    std::string out = "nu,missing_frac,step,mean_error,std_error,repeats\n";
    char buf[160];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%g,%g,%d,%.9f,%.9f,%d\n", r.nu,
                    r.missing_frac, r.step, r.mean_error, r.std_error,
                    r.repeats);
      out += buf;
    }
    return out;
  }

  void write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc | std::ios::binary);
    if (!os)
      throw std::runtime_error("ErrorReport: cannot open: " + path.string());
    os << to_csv();
    if (!os) throw std::runtime_error("ErrorReport: write failed");
  }
};

namespace detail {

/// Monte-Carlo estimate of the misobservation fraction at concentration
/// kappa: draw a random hidden permutation, sample the observation direction,
/// round it back to a permutation and count misassigned identities. Lifting
/// is batched into matrix products, which dominates the cost at large n.
inline double misassignment_rate(const EmbeddingBasis& basis, double kappa,
                                 int draws, std::uint64_t stream_seed) {
  const int n = basis.n();
  const int m = basis.sphere_dim();
  std::mt19937_64 rng(stream_seed);

  constexpr int kChunk = 256;
  Eigen::MatrixXd directions(m, kChunk);
  std::vector<PermutationMatrix> hidden;
  hidden.reserve(kChunk);

  long mistakes = 0;
  int done = 0;
  while (done < draws) {
    const int batch = std::min(kChunk, draws - done);
    hidden.clear();
    for (int k = 0; k < batch; ++k) {
      PermutationMatrix p = random_permutation(n, rng);
      SpherePoint mu = to_sphere(p, basis);
      if (kappa > 0.0) {
        directions.col(k) = sample(VonMisesFisher(mu.coords(), kappa), rng);
      } else {
        directions.col(k) = uniform_sphere_sample(m, rng);
      }
      hidden.push_back(std::move(p));
    }
    const Eigen::MatrixXd lifted =
        basis.Q() * directions.leftCols(batch);  // n^2 x batch
    for (int k = 0; k < batch; ++k) {
      Eigen::MatrixXd costs(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          costs(i, j) = -(basis.radius() *
                              lifted(static_cast<Eigen::Index>(i) * n + j, k) +
                          1.0 / n);
      const PermutationMatrix rounded = solve_lap(CostMatrix(std::move(costs)));
      for (int i = 0; i < n; ++i)
        if (rounded.identity_of(i) != hidden[static_cast<std::size_t>(k)].identity_of(i))
          ++mistakes;
      ++done;
    }
  }
  return static_cast<double>(mistakes) / (static_cast<double>(draws) * n);
}

inline int default_calibration_draws(int n) {
  return std::max(2000, 120000 / n);
}

/// Sample standard deviation over values (0 for a single value).
inline double sample_std(const std::vector<double>& values) {
  const std::size_t k = values.size();
  if (k < 2) return 0.0;
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(k);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(k - 1));
}

/// ceil(frac * n) with a guard against ties from binary representation.
inline int hidden_identity_count(double frac, int n) {
  return static_cast<int>(std::ceil(frac * n - 1e-9));
}

/// k distinct identities drawn uniformly without replacement.
inline std::vector<int> draw_hidden_identities(int n, int k,
                                               std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> d(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(d(rng))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace detail

/// Finds kappa such that the Monte-Carlo misobservation fraction is within
/// +-0.02 of nu (the internal target is tighter). Monotone bisection over
/// [0, kappa_hi], doubling kappa_hi until the bracket is valid; every
/// estimate reuses the same substream so the bisected function is
/// deterministic.
inline double calibrate_kappa(const EmbeddingBasis& basis, double nu,
                              std::uint64_t seed, int draws = 0) {
  if (!(nu > 0.0 && nu < 1.0))
    throw std::invalid_argument("calibrate_kappa: nu must be in (0, 1)");
  const int n = basis.n();
  if (draws <= 0) draws = detail::default_calibration_draws(n);
  const std::uint64_t stream_seed = mix_seed(seed, stream::kCalibration);
  constexpr double kTol = 0.005;

  const auto estimate = [&](double kappa) {
    return detail::misassignment_rate(basis, kappa, draws, stream_seed);
  };

  const double err0 = estimate(0.0);
  if (std::abs(err0 - nu) <= kTol) return 0.0;
  if (err0 < nu)
    throw std::runtime_error(
        "calibrate_kappa: target nu exceeds the no-skill error 1 - 1/n");

  double lo = 0.0;
  double hi = 1.0;
  double err_hi = estimate(hi);
  int doublings = 0;
  while (err_hi > nu) {
    if (std::abs(err_hi - nu) <= kTol) return hi;
    lo = hi;
    hi *= 2.0;
    if (++doublings > 60)
      throw std::runtime_error("calibrate_kappa: failed to bracket nu");
    err_hi = estimate(hi);
  }

  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double err = estimate(mid);
    if (std::abs(err - nu) <= kTol) return mid;
    if (err > nu)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-9 * hi) break;
  }
  // The estimator noise floor can sit above the tight internal target;
  // accept the midpoint if it satisfies the contract tolerance.
  const double mid = 0.5 * (lo + hi);
  if (std::abs(estimate(mid) - nu) <= 0.02) return mid;
  throw std::runtime_error("calibrate_kappa: bisection did not converge");
}

namespace detail {

struct StepObservation {
  PermutationMatrix rounded;
  PartialObservation masked;
};

/// One observation of the hidden permutation: vMF-perturb its embedding,
/// round back to a permutation, then hide the chosen identities. nu = 0
/// short-circuits to the exact permutation.
inline StepObservation observe(const PermutationMatrix& hidden,
                               const SpherePoint& hidden_embedded, double nu,
                               double kappa_obs, int hidden_count,
                               const EmbeddingBasis& basis,
                               std::mt19937_64& rng) {
  PermutationMatrix rounded =
      nu == 0.0
          ? hidden
          : from_sphere(
                SpherePoint(basis.n(),
                            sample(VonMisesFisher(hidden_embedded.coords(),
                                                  kappa_obs),
                                   rng)),
                basis);
  std::vector<int> hide = draw_hidden_identities(basis.n(), hidden_count, rng);
  PartialObservation masked = PartialObservation::mask_identities(rounded, hide);
  return StepObservation{std::move(rounded), std::move(masked)};
}

inline ErrorReport aggregate_report(
    double nu, double missing_frac, int repeats,
    const std::vector<std::vector<double>>& errors_by_repeat,
    bool summary_is_final_step) {
  const int steps = static_cast<int>(errors_by_repeat.front().size());
  ErrorReport report;
  std::vector<double> at_step(static_cast<std::size_t>(repeats));
  for (int s = 0; s < steps; ++s) {
    for (int r = 0; r < repeats; ++r)
      at_step[static_cast<std::size_t>(r)] =
          errors_by_repeat[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
    const double mean =
        std::accumulate(at_step.begin(), at_step.end(), 0.0) / repeats;
    const double se = sample_std(at_step) / std::sqrt(static_cast<double>(repeats));
    report.rows.push_back({nu, missing_frac, s, mean, se, repeats});
  }
  if (summary_is_final_step) {
    ErrorReportRow last = report.rows.back();
    last.step = -1;
    report.rows.push_back(last);
  } else {
    std::vector<double> per_repeat(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
      const auto& e = errors_by_repeat[static_cast<std::size_t>(r)];
      per_repeat[static_cast<std::size_t>(r)] =
          std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
    }
    const double mean =
        std::accumulate(per_repeat.begin(), per_repeat.end(), 0.0) / repeats;
    const double se =
        sample_std(per_repeat) / std::sqrt(static_cast<double>(repeats));
    report.rows.push_back({nu, missing_frac, -1, mean, se, repeats});
  }
  return report;
}

}  // namespace detail

/// Static hidden permutation inferred from noisy partial observations.
/// Per repeat: draw the hidden permutation; per step: observe (vMF sample,
/// round, mask), optionally predict, update, and record the misassignment
/// fraction of the MAP estimate. The summary row (step = -1) carries the
/// final-step statistics.
inline ErrorReport run_synthetic(const SyntheticConfig& cfg,
                                 const EmbeddingBasis& basis) {
  cfg.validate();
  if (basis.n() != cfg.n)
    throw std::invalid_argument("run_synthetic: basis does not match n");
  if (cfg.nu == 1.0)
    throw std::invalid_argument("run_synthetic: nu = 1 is not calibratable");

  const double kappa_obs =
      cfg.nu == 0.0 ? kExactObservationKappa
                    : calibrate_kappa(basis, cfg.nu, cfg.seed,
                                      cfg.calibration_draws);
  const int hidden_count = detail::hidden_identity_count(cfg.missing_frac, cfg.n);

  std::vector<std::vector<double>> errors(
      static_cast<std::size_t>(cfg.repeats),
      std::vector<double>(static_cast<std::size_t>(cfg.steps), 0.0));
  for (int r = 0; r < cfg.repeats; ++r) {
    std::mt19937_64 rng = make_stream(cfg.seed, stream::kSynthetic, r);
    const PermutationMatrix hidden = random_permutation(cfg.n, rng);
    const SpherePoint hidden_embedded = to_sphere(hidden, basis);
    FilterState state = init_uniform(basis);
    for (int s = 0; s < cfg.steps; ++s) {
      if (cfg.kappa_tr) state = predict(state, *cfg.kappa_tr);
      detail::StepObservation obs = detail::observe(
          hidden, hidden_embedded, cfg.nu, kappa_obs, hidden_count, basis, rng);
      state = update_partial(state, obs.masked, kappa_obs, basis);
      errors[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)] =
          hamming_fraction(map_estimate(state, basis), hidden);
    }
  }
  return detail::aggregate_report(cfg.nu, cfg.missing_frac, cfg.repeats, errors,
                                  /*summary_is_final_step=*/true);
}

/// Expected number of pair swaps per frame under the proximity model.
inline double expected_swaps_per_frame(const TrackDataset& data,
                                       const SwapModelParams& params) {
  params.validate();
  double total = 0.0;
  for (const auto& frame : data.frames)
    for (std::size_t i = 0; i < frame.size(); ++i)
      for (std::size_t j = i + 1; j < frame.size(); ++j)
        total += swap_probability((frame[i] - frame[j]).norm(), params);
  return total / static_cast<double>(data.frames.size());
}

/// Transition concentration whose one-step diffusion matches the expected
/// per-frame displacement of the swap process. A single pair swap moves an
/// embedded permutation by cosine 1 - 2/(n-1), so to first order in the
/// (small) swap rate the expected per-frame cosine is
///   1 - (2/(n-1)) * E[swaps per frame],
/// and kappa_tr solves A_m(kappa_tr) = that target. Swap-free data gives
/// noiseless dynamics.
inline double default_tracking_kappa_tr(const TrackDataset& data,
                                        const SwapModelParams& params) {
  const int n = data.objects;
  const int m = (n - 1) * (n - 1);
  const double rate = expected_swaps_per_frame(data, params);
  const double target = 1.0 - 2.0 / (n - 1) * rate;
  if (target <= 0.0) return 0.0;
  if (target >= 1.0 - 1e-9) return kNoiselessTransitionKappa;
  return inv_bessel_ratio(m, target);
}

/// Tracking over a trajectory dataset: the hidden permutation evolves by the
/// proximity swap model, observations are noisy partial views as in
/// run_synthetic, and the filter alternates predict and update. The summary
/// row (step = -1) averages over all frames and repeats.
inline ErrorReport run_tracking(const TrackDataset& data,
                                const SwapModelParams& params, double nu,
                                double missing_frac,
                                std::optional<double> kappa_tr, int repeats,
                                std::uint64_t seed,
                                const EmbeddingBasis& basis,
                                int calibration_draws = 0) {
  params.validate();
  if (data.objects != basis.n())
    throw std::invalid_argument("run_tracking: basis does not match dataset");
  if (data.frame_count() < 1)
    throw std::invalid_argument("run_tracking: dataset has no frames");
  if (!(nu >= 0.0 && nu < 1.0))
    throw std::invalid_argument("run_tracking: nu must be in [0, 1)");
  if (!(missing_frac >= 0.0 && missing_frac < 1.0))
    throw std::invalid_argument("run_tracking: missing_frac must be in [0, 1)");
  if (repeats < 1)
    throw std::invalid_argument("run_tracking: repeats must be >= 1");

  const int n = data.objects;
  const int frames = data.frame_count();
  const double kappa_obs =
      nu == 0.0 ? kExactObservationKappa
                : calibrate_kappa(basis, nu, seed, calibration_draws);
  const double kappa_tr_value =
      kappa_tr ? *kappa_tr : default_tracking_kappa_tr(data, params);
  if (!(kappa_tr_value >= 0.0))
    throw std::invalid_argument("run_tracking: kappa_tr must be >= 0");
  const int hidden_count = detail::hidden_identity_count(missing_frac, n);

  std::vector<std::vector<double>> errors(
      static_cast<std::size_t>(repeats),
      std::vector<double>(static_cast<std::size_t>(frames), 0.0));
  for (int r = 0; r < repeats; ++r) {
    std::mt19937_64 world_rng = make_stream(seed, stream::kTrackingWorld, r);
    const std::vector<PermutationMatrix> hidden_seq =
        apply_swap_model(data, params, world_rng);
    std::mt19937_64 obs_rng = make_stream(seed, stream::kTrackingObs, r);
    FilterState state = init_uniform(basis);
    for (int t = 0; t < frames; ++t) {
      state = predict(state, kappa_tr_value);
      const PermutationMatrix& hidden = hidden_seq[static_cast<std::size_t>(t)];
      const SpherePoint hidden_embedded = to_sphere(hidden, basis);
      detail::StepObservation obs =
          detail::observe(hidden, hidden_embedded, nu, kappa_obs, hidden_count,
                          basis, obs_rng);
      state = update_partial(state, obs.masked, kappa_obs, basis);
      errors[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)] =
          hamming_fraction(map_estimate(state, basis), hidden);
    }
  }
  return detail::aggregate_report(nu, missing_frac, repeats, errors,
                                  /*summary_is_final_step=*/false);
}

}  // namespace permsphere
