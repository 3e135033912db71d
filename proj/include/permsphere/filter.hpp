#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "permsphere/embedding.hpp"
#include "permsphere/vmf.hpp"

namespace permsphere {

/// Transition concentrations at or above this are treated as noiseless
/// dynamics: predict returns the state unchanged.
constexpr double kNoiselessTransitionKappa = 1e8;

/// Posterior belief over the hidden permutation, represented as a vMF on the
/// unit sphere in (n-1)^2 dimensions. Immutable; filter steps return new
/// states.
struct FilterState {
  int n;
  VonMisesFisher posterior;
};

/// The identities revealed at a subset of tracks: o distinct
/// (track, identity) pairs, o <= n.
class PartialObservation {
 public:
  PartialObservation(int n, std::vector<std::pair<int, int>> pairs)
      : n_(n), pairs_(std::move(pairs)) {
    if (n < 1) throw std::invalid_argument("PartialObservation: n must be >= 1");
    if (pairs_.size() > static_cast<std::size_t>(n))
      throw std::invalid_argument("PartialObservation: more pairs than objects");
    std::vector<char> track_seen(static_cast<std::size_t>(n), 0);
    std::vector<char> ident_seen(static_cast<std::size_t>(n), 0);
    for (const auto& [t, i] : pairs_) {
      if (t < 0 || t >= n || i < 0 || i >= n)
        throw std::invalid_argument("PartialObservation: index out of range");
      if (track_seen[static_cast<std::size_t>(t)])
        throw std::invalid_argument("PartialObservation: duplicate track");
      if (ident_seen[static_cast<std::size_t>(i)])
        throw std::invalid_argument("PartialObservation: duplicate identity");
      track_seen[static_cast<std::size_t>(t)] = 1;
      ident_seen[static_cast<std::size_t>(i)] = 1;
    }
  }

  static PartialObservation full(const PermutationMatrix& p) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(p.n()));
    for (int t = 0; t < p.n(); ++t) pairs.emplace_back(t, p.identity_of(t));
    return PartialObservation(p.n(), std::move(pairs));
  }

  /// Observation of p with the given identities hidden: every (track,
  /// identity) pair of p whose identity is not in hidden_identities.
  static PartialObservation mask_identities(
      const PermutationMatrix& p, const std::vector<int>& hidden_identities) {
    std::vector<char> hidden(static_cast<std::size_t>(p.n()), 0);
    for (int i : hidden_identities) {
      if (i < 0 || i >= p.n())
        throw std::invalid_argument("mask_identities: identity out of range");
      hidden[static_cast<std::size_t>(i)] = 1;
    }
    std::vector<std::pair<int, int>> pairs;
    for (int t = 0; t < p.n(); ++t)
      if (!hidden[static_cast<std::size_t>(p.identity_of(t))])
        pairs.emplace_back(t, p.identity_of(t));
    return PartialObservation(p.n(), std::move(pairs));
  }

  int n() const { return n_; }
  int observed_count() const { return static_cast<int>(pairs_.size()); }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

 private:
  int n_;
  std::vector<std::pair<int, int>> pairs_;
};

/// Observed component of a partially observed permutation after projection
/// onto the sphere's coordinate frame. norm_star is 1 for a full observation
/// and 0 for an empty one.
struct SplitProjection {
  Eigen::VectorXd y_star;
  double norm_star;
};

/// Uniform prior: kappa = 0; mu holds the embedded identity permutation as a
/// deterministic placeholder direction.
inline FilterState init_uniform(const EmbeddingBasis& basis) {
  SpherePoint id = to_sphere(PermutationMatrix::identity(basis.n()), basis);
  return FilterState{basis.n(), VonMisesFisher(id.coords(), 0.0)};
}

/// Time update. The transition kernel is symmetric about the previous state,
/// so the mean direction is unchanged and only the concentration diffuses:
/// kappa_new = A_d^{-1}(A_d(kappa) A_d(kappa_tr)), d = (n-1)^2.
inline FilterState predict(const FilterState& state, double kappa_tr) {
  if (!(kappa_tr >= 0.0))
    throw std::invalid_argument("predict: kappa_tr must be >= 0");
  if (kappa_tr >= kNoiselessTransitionKappa) return state;
  const double kappa_new =
      convolve_predict(state.posterior.kappa(), kappa_tr, state.posterior.dim());
  return FilterState{state.n,
                     VonMisesFisher(state.posterior.mu(), kappa_new)};
}

/// Measurement update with a fully observed direction: the product of two
/// vMF densities is a vMF with natural parameters added,
///   kappa_t mu_t = kappa_obs y + kappa_pos mu_pos.
/// Antipodal cancellation collapses to the uniform distribution with the
/// previous mean kept as placeholder.
inline FilterState update_full(const FilterState& state, const SpherePoint& y_obs,
                               double kappa_obs) {
  if (y_obs.n() != state.n)
    throw std::invalid_argument("update_full: dimension mismatch");
  if (!(kappa_obs >= 0.0))
    throw std::invalid_argument("update_full: kappa_obs must be >= 0");
  const Eigen::VectorXd v =
      kappa_obs * y_obs.coords() + state.posterior.kappa() * state.posterior.mu();
  const double norm = v.norm();
  if (norm < 1e-12)
    return FilterState{state.n, VonMisesFisher(state.posterior.mu(), 0.0)};
  return FilterState{state.n, VonMisesFisher(v / norm, norm)};
}

/// Splits a partial observation into its determined component on the sphere.
/// An observed pair (t, i) pins row t and column i of the permutation matrix
/// entirely (the 1 at (t, i), zeros elsewhere in that row and column). The
/// ambient vector carrying (entry - 1/n) on determined coordinates and 0 on
/// undetermined ones is projected by Q^T and scaled by 1/sqrt(n-1).
inline SplitProjection split_projection(const PartialObservation& obs,
                                        const EmbeddingBasis& basis) {
  if (obs.n() != basis.n())
    throw std::invalid_argument("split_projection: dimension mismatch");
  const int n = basis.n();
  std::vector<char> track_obs(static_cast<std::size_t>(n), 0);
  std::vector<char> ident_obs(static_cast<std::size_t>(n), 0);
  for (const auto& [t, i] : obs.pairs()) {
    track_obs[static_cast<std::size_t>(t)] = 1;
    ident_obs[static_cast<std::size_t>(i)] = 1;
  }
  Eigen::VectorXd ambient =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * n);
  for (int t = 0; t < n; ++t)
    for (int i = 0; i < n; ++i)
      if (track_obs[static_cast<std::size_t>(t)] ||
          ident_obs[static_cast<std::size_t>(i)])
        ambient[static_cast<Eigen::Index>(t) * n + i] = -1.0 / n;
  for (const auto& [t, i] : obs.pairs())
    ambient[static_cast<Eigen::Index>(t) * n + i] = 1.0 - 1.0 / n;

  Eigen::VectorXd y_star = (basis.Q().transpose() * ambient) / basis.radius();
  const double norm_star = y_star.norm();
  return SplitProjection{std::move(y_star), norm_star};
}

/// Measurement update with a partial observation. Marginalizing the
/// unobserved component of the likelihood leaves a vMF with
///   mu = y_star / ||y_star||,  kappa = kappa_obs ||y_star||,
/// which then multiplies the prior as in update_full. An empty observation
/// leaves the state unchanged.
inline FilterState update_partial(const FilterState& state,
                                  const PartialObservation& obs,
                                  double kappa_obs,
                                  const EmbeddingBasis& basis) {
  if (obs.n() != state.n)
    throw std::invalid_argument("update_partial: dimension mismatch");
  SplitProjection split = split_projection(obs, basis);
  if (split.norm_star < 1e-15) return state;
  const Eigen::VectorXd v = kappa_obs * split.y_star +
                            state.posterior.kappa() * state.posterior.mu();
  const double norm = v.norm();
  if (norm < 1e-12)
    return FilterState{state.n, VonMisesFisher(state.posterior.mu(), 0.0)};
  return FilterState{state.n, VonMisesFisher(v / norm, norm)};
}

/// Posterior-mode permutation. The vMF density is monotone in mu^T x, so the
/// maximizer over embedded permutations is the L2-nearest permutation to the
/// mean direction.
inline PermutationMatrix map_estimate(const FilterState& state,
                                      const EmbeddingBasis& basis) {
  return from_sphere(SpherePoint(state.n, state.posterior.mu()), basis);
}

}  // namespace permsphere
