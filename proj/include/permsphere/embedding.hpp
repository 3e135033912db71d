#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "permsphere/assignment.hpp"
#include "permsphere/permutation.hpp"

namespace permsphere {

/// A point on the unit hypersphere in (n-1)^2 dimensions. Permutations and
/// posterior mean directions both live here; the sqrt(n-1) radius of the
/// ambient embedding is factored out so that directional statistics always
/// see unit vectors.
class SpherePoint {
 public:
  SpherePoint(int n, Eigen::VectorXd coords)
      : n_(n), coords_(std::move(coords)) {
    const Eigen::Index want =
        static_cast<Eigen::Index>(n - 1) * static_cast<Eigen::Index>(n - 1);
    if (n < 2 || coords_.size() != want)
      throw std::invalid_argument("SpherePoint: coordinate size must be (n-1)^2");
    if (std::abs(coords_.norm() - 1.0) > 1e-10)
      throw std::invalid_argument("SpherePoint: coordinates must have unit norm");
  }

  int n() const { return n_; }
  const Eigen::VectorXd& coords() const { return coords_; }

 private:
  int n_;
  Eigen::VectorXd coords_;
};

/// Orthonormal basis of the (n-1)^2-dimensional subspace parallel to the
/// affine hull of the doubly stochastic matrices, plus the center-of-mass
/// offset (1/n at every coordinate) and the embedding radius sqrt(n-1).
/// Immutable after construction and safe to share across threads.
class EmbeddingBasis {
 public:
  /// Builds the basis for n objects. The 2n-1 independent row/column-sum
  /// constraint normals (all n row normals, first n-1 column normals) are
  /// orthonormalized by a Householder QR and the complementary columns of
  /// the full orthogonal factor form Q. Each column is sign-fixed so its
  /// first coordinate above 1e-12 in magnitude is positive, which makes the
  /// construction reproducible.
  static EmbeddingBasis build(int n) {
    if (n < 2) throw std::invalid_argument("EmbeddingBasis: n must be >= 2");
    const Eigen::Index nn = static_cast<Eigen::Index>(n) * n;
    const Eigen::Index k = 2 * static_cast<Eigen::Index>(n) - 1;
    const Eigen::Index m =
        static_cast<Eigen::Index>(n - 1) * static_cast<Eigen::Index>(n - 1);

    Eigen::MatrixXd normals = Eigen::MatrixXd::Zero(nn, k);
    for (int i = 0; i < n; ++i)  // row-sum normals
      for (int j = 0; j < n; ++j)
        normals(static_cast<Eigen::Index>(i) * n + j, i) = 1.0;
    for (int j = 0; j + 1 < n; ++j)  // first n-1 column-sum normals
      for (int i = 0; i < n; ++i)
        normals(static_cast<Eigen::Index>(i) * n + j, n + j) = 1.0;

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(normals);
    Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(nn, nn);
    Eigen::MatrixXd q = full.rightCols(m);

    for (Eigen::Index c = 0; c < q.cols(); ++c) {
      for (Eigen::Index r = 0; r < q.rows(); ++r) {
        const double v = q(r, c);
        if (std::abs(v) > 1e-12) {
          if (v < 0.0) q.col(c) = -q.col(c);
          break;
        }
      }
    }

    Eigen::VectorXd center = Eigen::VectorXd::Constant(nn, 1.0 / n);
    Eigen::VectorXd center_proj = q.transpose() * center;
    return EmbeddingBasis(n, std::move(q), std::move(center),
                          std::move(center_proj));
  }

  int n() const { return n_; }
  /// Dimension of the sphere's ambient space, (n-1)^2.
  int sphere_dim() const { return static_cast<int>(q_.cols()); }
  /// n^2 x (n-1)^2 matrix with orthonormal columns spanning the subspace.
  const Eigen::MatrixXd& Q() const { return q_; }
  const Eigen::VectorXd& center() const { return center_; }
  double radius() const { return std::sqrt(static_cast<double>(n_ - 1)); }

  /// Q^T c, cached so the centered projection stays cheap for sparse inputs.
  const Eigen::VectorXd& center_projection() const { return center_proj_; }

 private:
  EmbeddingBasis(int n, Eigen::MatrixXd q, Eigen::VectorXd center,
                 Eigen::VectorXd center_proj)
      : n_(n),
        q_(std::move(q)),
        center_(std::move(center)),
        center_proj_(std::move(center_proj)) {}

  int n_;
  Eigen::MatrixXd q_;
  Eigen::VectorXd center_;
  Eigen::VectorXd center_proj_;

  friend EmbeddingBasis read_basis_cache(const std::filesystem::path&);
};

inline EmbeddingBasis build_basis(int n) { return EmbeddingBasis::build(n); }

/// Process-wide memoized basis, one per n.
inline std::shared_ptr<const EmbeddingBasis> shared_basis(int n) {
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const EmbeddingBasis>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto basis = std::make_shared<const EmbeddingBasis>(EmbeddingBasis::build(n));
  cache.emplace(n, basis);
  return basis;
}

/// Projects a permutation onto the unit sphere:
/// coords = Q^T (vec(P) - center) / sqrt(n-1).
/// vec(P) has a single 1 per row, so the product reduces to summing n rows
/// of Q; the cached Q^T c completes the centering.
inline SpherePoint to_sphere(const PermutationMatrix& p,
                             const EmbeddingBasis& basis) {
  if (p.n() != basis.n())
    throw std::invalid_argument("to_sphere: dimension mismatch");
  const int n = basis.n();
  Eigen::VectorXd coords = -basis.center_projection();
  for (int i = 0; i < n; ++i)
    coords += basis.Q().row(static_cast<Eigen::Index>(i) * n + p.identity_of(i));
  coords /= basis.radius();
  return SpherePoint(n, std::move(coords));
}

/// Inverse of the linear part of to_sphere: restores the radius, lifts back
/// to ambient space and re-adds the center. Row-major reshape to n x n.
inline Eigen::MatrixXd lift(const SpherePoint& y, const EmbeddingBasis& basis) {
  if (y.n() != basis.n())
    throw std::invalid_argument("lift: dimension mismatch");
  const int n = basis.n();
  Eigen::VectorXd ambient =
      basis.radius() * (basis.Q() * y.coords()) + basis.center();
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = ambient[static_cast<Eigen::Index>(i) * n + j];
  return out;
}

/// Nearest permutation in the L2 sense. For the lifted point T, minimizing
/// ||T - P||_F^2 over permutations equals, up to terms independent of P,
/// maximizing the sum of T over the assigned cells, so the assignment runs
/// on costs -T.
inline PermutationMatrix from_sphere(const SpherePoint& y,
                                     const EmbeddingBasis& basis) {
  if (y.n() != basis.n())
    throw std::invalid_argument("from_sphere: dimension mismatch");
  return solve_lap(CostMatrix(-lift(y, basis)));
}

// --- binary basis cache -----------------------------------------------------
//
// Layout: 4 magic bytes "PSQB", uint32 version, uint32 n (both little-endian),
// then (n-1)^2 columns of Q, each n^2 doubles, little-endian IEEE-754.

namespace detail {

constexpr char kBasisCacheMagic[4] = {'P', 'S', 'Q', 'B'};
constexpr std::uint32_t kBasisCacheVersion = 1;

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline double get_f64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

inline void write_basis_cache(const std::filesystem::path& path,
                              const EmbeddingBasis& basis) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("basis cache: cannot open for writing: " +
                                    path.string());
  os.write(detail::kBasisCacheMagic, 4);
  detail::put_u32_le(os, detail::kBasisCacheVersion);
  detail::put_u32_le(os, static_cast<std::uint32_t>(basis.n()));
  const Eigen::MatrixXd& q = basis.Q();
  for (Eigen::Index c = 0; c < q.cols(); ++c)
    for (Eigen::Index r = 0; r < q.rows(); ++r) detail::put_f64_le(os, q(r, c));
  if (!os) throw std::runtime_error("basis cache: write failed: " + path.string());
}

inline EmbeddingBasis read_basis_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("basis cache: cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, detail::kBasisCacheMagic, 4) != 0)
    throw std::runtime_error("basis cache: bad magic: " + path.string());
  const std::uint32_t version = detail::get_u32_le(is);
  if (version != detail::kBasisCacheVersion)
    throw std::runtime_error("basis cache: unsupported version " +
                             std::to_string(version));
  const std::uint32_t n = detail::get_u32_le(is);
  if (!is || n < 2)
    throw std::runtime_error("basis cache: invalid n: " + path.string());
  const Eigen::Index nn = static_cast<Eigen::Index>(n) * n;
  const Eigen::Index m =
      static_cast<Eigen::Index>(n - 1) * static_cast<Eigen::Index>(n - 1);
  Eigen::MatrixXd q(nn, m);
  for (Eigen::Index c = 0; c < m; ++c)
    for (Eigen::Index r = 0; r < nn; ++r) q(r, c) = detail::get_f64_le(is);
  if (!is) throw std::runtime_error("basis cache: truncated file: " + path.string());
  Eigen::VectorXd center = Eigen::VectorXd::Constant(nn, 1.0 / n);
  Eigen::VectorXd center_proj = q.transpose() * center;
  return EmbeddingBasis(static_cast<int>(n), std::move(q), std::move(center),
                        std::move(center_proj));
}

/// Loads the basis from the cache file when it exists and matches n;
/// otherwise builds it and, if a path is given, writes the cache.
inline EmbeddingBasis load_or_build_basis(
    int n, const std::optional<std::filesystem::path>& cache = std::nullopt) {
  if (cache && std::filesystem::exists(*cache)) {
    EmbeddingBasis b = read_basis_cache(*cache);
    if (b.n() != n)
      throw std::runtime_error("basis cache: file holds n=" +
                               std::to_string(b.n()) + ", wanted n=" +
                               std::to_string(n));
    return b;
  }
  EmbeddingBasis b = EmbeddingBasis::build(n);
  if (cache) write_basis_cache(*cache, b);
  return b;
}

}  // namespace permsphere
