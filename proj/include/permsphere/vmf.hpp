#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "permsphere/bessel.hpp"

namespace permsphere {

/// von Mises-Fisher distribution on the unit sphere in R^m:
///   f(x | mu, kappa) = Z_m(kappa) exp(kappa mu^T x),
///   Z_m(kappa) = kappa^{m/2-1} / ((2 pi)^{m/2} I_{m/2-1}(kappa)).
/// kappa = 0 is the uniform distribution. m = 1 (the two-point sphere) is
/// admitted so that the n = 2 permutation space works end to end.
class VonMisesFisher {
 public:
  VonMisesFisher(Eigen::VectorXd mu, double kappa)
      : mu_(std::move(mu)), kappa_(kappa) {
    if (mu_.size() < 1)
      throw std::invalid_argument("VonMisesFisher: dimension must be >= 1");
    if (!(kappa_ >= 0.0) || !std::isfinite(kappa_))
      throw std::invalid_argument("VonMisesFisher: kappa must be finite, >= 0");
    if (std::abs(mu_.norm() - 1.0) > 1e-10)
      throw std::invalid_argument("VonMisesFisher: mu must have unit norm");
  }

  int dim() const { return static_cast<int>(mu_.size()); }
  const Eigen::VectorXd& mu() const { return mu_; }
  double kappa() const { return kappa_; }

 private:
  Eigen::VectorXd mu_;
  double kappa_;
};

/// log of the surface area of the unit sphere S^{m-1} in R^m.
inline double log_sphere_area(int m) {
  if (m < 1) throw std::invalid_argument("log_sphere_area: m must be >= 1");
  if (m == 1) return std::log(2.0);  // two points, counting measure
  return std::log(2.0) + 0.5 * m * std::log(M_PI) - std::lgamma(0.5 * m);
}

/// log Z_m(kappa). The kappa -> 0 limit is the uniform normalizer.
inline double log_normalizer(int m, double kappa) {
  if (m < 1) throw std::invalid_argument("log_normalizer: m must be >= 1");
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw std::invalid_argument("log_normalizer: kappa must be finite, >= 0");
  if (kappa == 0.0) return -log_sphere_area(m);
  const double half = 0.5 * m;
  return (half - 1.0) * std::log(kappa) - half * std::log(2.0 * M_PI) -
         log_bessel_i(half - 1.0, kappa);
}

inline double log_density(const VonMisesFisher& vmf, const Eigen::VectorXd& x) {
  if (x.size() != vmf.mu().size())
    throw std::invalid_argument("log_density: dimension mismatch");
  if (std::abs(x.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("log_density: x must have unit norm");
  return log_normalizer(vmf.dim(), vmf.kappa()) + vmf.kappa() * vmf.mu().dot(x);
}

inline Eigen::VectorXd uniform_sphere_sample(int m, std::mt19937_64& rng) {
  if (m < 1) throw std::invalid_argument("uniform_sphere_sample: m must be >= 1");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x(m);
  do {
    for (int i = 0; i < m; ++i) x[i] = gauss(rng);
  } while (x.norm() < 1e-12);
  return x / x.norm();
}

/// Draws one vMF sample: Wood's rejection scheme for the cosine of the polar
/// angle (beta proposals against the tilted envelope), combined with a
/// uniform tangential direction obtained by projecting isotropic noise
/// orthogonally to mu.
inline Eigen::VectorXd sample(const VonMisesFisher& vmf, std::mt19937_64& rng) {
  const int m = vmf.dim();
  const double kappa = vmf.kappa();
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  if (m == 1) {
    const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * kappa));
    const double sign = unif(rng) < p_plus ? 1.0 : -1.0;
    Eigen::VectorXd x(1);
    x[0] = sign * vmf.mu()[0];
    return x;
  }
  if (kappa == 0.0) return uniform_sphere_sample(m, rng);

  const double dm1 = m - 1.0;
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);

  std::gamma_distribution<double> gamma(0.5 * dm1, 1.0);
  double w = 0.0;
  for (;;) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double z = g1 / (g1 + g2);  // Beta((m-1)/2, (m-1)/2)
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = unif(rng);
    if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(m);
  double norm = 0.0;
  do {
    for (int i = 0; i < m; ++i) v[i] = gauss(rng);
    v -= v.dot(vmf.mu()) * vmf.mu();
    norm = v.norm();
  } while (norm < 1e-12);
  v /= norm;

  Eigen::VectorXd x = w * vmf.mu() + std::sqrt(std::max(0.0, 1.0 - w * w)) * v;
  return x / x.norm();
}

/// Concentration after diffusing a kappa_a-concentrated state by a
/// kappa_b-concentrated transition on S^{d-1}:
///   kappa = A_d^{-1}(A_d(kappa_a) A_d(kappa_b)).
/// The result never exceeds min(kappa_a, kappa_b).
inline double convolve_predict(double kappa_a, double kappa_b, int d) {
  if (!(kappa_a >= 0.0) || !(kappa_b >= 0.0))
    throw std::invalid_argument("convolve_predict: kappas must be >= 0");
  if (kappa_a == 0.0 || kappa_b == 0.0) return 0.0;
  return inv_bessel_ratio(d, bessel_ratio(d, kappa_a) * bessel_ratio(d, kappa_b));
}

}  // namespace permsphere
