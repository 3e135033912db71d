#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace permsphere {

/// An n-by-n permutation matrix, stored as the mapping track -> identity
/// (the column index of the single 1 in each row). The matrix view is
/// materialized on demand; row-major vectorization is the serialization
/// convention throughout.
class PermutationMatrix {
 public:
  explicit PermutationMatrix(std::vector<int> track_to_identity)
      : map_(std::move(track_to_identity)) {
    validate();
  }

  static PermutationMatrix identity(int n) {
    if (n < 1) throw std::invalid_argument("PermutationMatrix: n must be >= 1");
    std::vector<int> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), 0);
    return PermutationMatrix(std::move(m));
  }

  /// Builds from a dense 0/1 matrix, enforcing the doubly stochastic
  /// integrality invariants (row sums 1, column sums 1, entries in {0,1}).
  static PermutationMatrix from_dense(const Eigen::MatrixXd& m,
                                      double tol = 1e-9) {
    if (m.rows() != m.cols() || m.rows() < 1)
      throw std::invalid_argument("PermutationMatrix: matrix must be square");
    const int n = static_cast<int>(m.rows());
    std::vector<int> map(static_cast<std::size_t>(n), -1);
    std::vector<int> col_hits(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double v = m(i, j);
        if (std::abs(v) <= tol) continue;
        if (std::abs(v - 1.0) > tol)
          throw std::invalid_argument(
              "PermutationMatrix: entries must be 0 or 1");
        if (map[static_cast<std::size_t>(i)] != -1)
          throw std::invalid_argument(
              "PermutationMatrix: row sum exceeds 1 at row " +
              std::to_string(i));
        map[static_cast<std::size_t>(i)] = j;
        ++col_hits[static_cast<std::size_t>(j)];
      }
      if (map[static_cast<std::size_t>(i)] == -1)
        throw std::invalid_argument("PermutationMatrix: empty row " +
                                    std::to_string(i));
    }
    for (int j = 0; j < n; ++j)
      if (col_hits[static_cast<std::size_t>(j)] != 1)
        throw std::invalid_argument(
            "PermutationMatrix: column sum != 1 at column " +
            std::to_string(j));
    return PermutationMatrix(std::move(map));
  }

  int n() const { return static_cast<int>(map_.size()); }

  /// Identity assigned to the given track (column of the 1 in that row).
  int identity_of(int track) const { return map_[static_cast<std::size_t>(track)]; }

  const std::vector<int>& mapping() const { return map_; }

  double entry(int i, int j) const {
    return map_[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0;
  }

  /// Row-major vectorization, length n^2.
  Eigen::VectorXd ambient_vector() const {
    const int nn = n();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nn) * nn);
    for (int i = 0; i < nn; ++i)
      v[static_cast<Eigen::Index>(i) * nn + map_[static_cast<std::size_t>(i)]] = 1.0;
    return v;
  }

  Eigen::MatrixXd dense() const {
    const int nn = n();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nn, nn);
    for (int i = 0; i < nn; ++i) m(i, map_[static_cast<std::size_t>(i)]) = 1.0;
    return m;
  }

  /// Returns a copy with the identities carried by tracks a and b exchanged.
  PermutationMatrix with_tracks_swapped(int a, int b) const {
    std::vector<int> m = map_;
    std::swap(m[static_cast<std::size_t>(a)], m[static_cast<std::size_t>(b)]);
    return PermutationMatrix(std::move(m));
  }

  friend bool operator==(const PermutationMatrix& a,
                         const PermutationMatrix& b) {
    return a.map_ == b.map_;
  }
  friend bool operator!=(const PermutationMatrix& a,
                         const PermutationMatrix& b) {
    return !(a == b);
  }

 private:
  void validate() const {
    const int nn = n();
    if (nn < 1) throw std::invalid_argument("PermutationMatrix: n must be >= 1");
    std::vector<char> seen(static_cast<std::size_t>(nn), 0);
    for (int v : map_) {
      if (v < 0 || v >= nn)
        throw std::invalid_argument("PermutationMatrix: index out of range");
      if (seen[static_cast<std::size_t>(v)])
        throw std::invalid_argument("PermutationMatrix: duplicate identity");
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }

  std::vector<int> map_;
};

/// Fraction of tracks whose identity differs between the two permutations.
inline double hamming_fraction(const PermutationMatrix& a,
                               const PermutationMatrix& b) {
  if (a.n() != b.n())
    throw std::invalid_argument("hamming_fraction: size mismatch");
  int diff = 0;
  for (int i = 0; i < a.n(); ++i)
    if (a.identity_of(i) != b.identity_of(i)) ++diff;
  return static_cast<double>(diff) / a.n();
}

/// Uniformly random permutation (Fisher-Yates).
inline PermutationMatrix random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> m(static_cast<std::size_t>(n));
  std::iota(m.begin(), m.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> d(0, i);
    std::swap(m[static_cast<std::size_t>(i)], m[static_cast<std::size_t>(d(rng))]);
  }
  return PermutationMatrix(std::move(m));
}

}  // namespace permsphere
