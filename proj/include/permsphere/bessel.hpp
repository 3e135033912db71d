#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace permsphere {
namespace detail {

constexpr double kLentzTiny = 1e-300;
constexpr double kLentzTol = 1e-15;
constexpr int kLentzMaxIter = 10000;

/// Gauss continued fraction for r = I_{nu+1}(x) / I_nu(x),
///   r = x / (2(nu+1) + x^2 / (2(nu+2) + x^2 / ...)),
/// evaluated with the modified Lentz scheme. The number of iterations grows
/// roughly like max(0, x - nu); callers dispatch to the backward evaluation
/// when that estimate exceeds the cap.
inline double bessel_ratio_lentz(double nu, double x) {
  double f = kLentzTiny;
  double c = f;
  double d = 0.0;
  for (int k = 1; k <= kLentzMaxIter; ++k) {
    const double a = (k == 1) ? x : x * x;
    const double b = 2.0 * (nu + k);
    d = b + a * d;
    if (d == 0.0) d = kLentzTiny;
    c = b + a / c;
    if (c == 0.0) c = kLentzTiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < kLentzTol) return f;
  }
  throw std::runtime_error(
      "bessel_ratio: continued fraction failed to converge (nu=" +
      std::to_string(nu) + ", x=" + std::to_string(x) + ")");
}

/// The same continued fraction evaluated bottom-up at a fixed depth chosen
/// from the argument. The downward pass contracts errors (each step maps the
/// tail ratio through r -> x / (2 mu + x r), with derivative bounded by r^2),
/// so seeding the tail with 0 is enough.
inline double bessel_ratio_backward(double nu, double x) {
  const double top = std::max(nu, x) + 2.0 * std::sqrt(x) + 60.0;
  const long depth = static_cast<long>(top - nu) + 1;
  double r = 0.0;
  for (long k = depth; k >= 1; --k) r = x / (2.0 * (nu + k) + x * r);
  return r;
}

/// Large-argument (Hankel) expansion of the ratio: the asymptotic series of
/// numerator and denominator share the e^x / sqrt(2 pi x) prefactor, so the
/// ratio of the truncated sums is accurate once x dominates nu^2.
inline double bessel_ratio_asymptotic(double nu, double x) {
  const auto hankel_sum = [x](double order) {
    double term = 1.0;
    double sum = 1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 60; ++k) {
      const double num = 4.0 * order * order - (2.0 * k - 1.0) * (2.0 * k - 1.0);
      term *= -num / (8.0 * k * x);
      if (std::abs(term) >= prev) break;  // series turned; stop at the minimum
      sum += term;
      prev = std::abs(term);
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  };
  return hankel_sum(nu + 1.0) / hankel_sum(nu);
}

inline double asymptotic_ratio_threshold(double nu) {
  return std::max(4000.0, 3.0 * (nu + 1.0) * (nu + 1.0));
}

/// log I_nu(x) by the ascending series with overflow rescaling. All terms are
/// positive, so the only hazards are magnitude (handled by the scale factor)
/// and iteration count (~x/2 terms), which the callers bound by routing large
/// x elsewhere.
inline double log_bessel_i_series(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  double log_scale = 0.0;
  for (int k = 1; k <= 200000; ++k) {
    term *= q / (k * (nu + k));
    sum += term;
    if (term < 1e-18 * sum) {
      return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) + std::log(sum) +
             log_scale;
    }
    if (sum > 1e280) {
      log_scale += std::log(sum);
      term /= sum;
      sum = 1.0;
    }
  }
  throw std::runtime_error("log_bessel_i: series failed to converge");
}

/// log I_nu(x) for x > 30, nu in [0, 1): Hankel expansion. The second
/// exponential branch is ~e^{-2x} relative and ignorable at these arguments.
inline double log_bessel_i_hankel(double nu, double x) {
  double term = 1.0;
  double sum = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 60; ++k) {
    const double num = 4.0 * nu * nu - (2.0 * k - 1.0) * (2.0 * k - 1.0);
    term *= -num / (8.0 * k * x);
    if (std::abs(term) >= prev) break;
    sum += term;
    prev = std::abs(term);
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return x - 0.5 * std::log(2.0 * M_PI * x) + std::log(sum);
}

}  // namespace detail

/// Mean resultant ratio A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa).
/// Strictly increasing in kappa with values in [0, 1). d >= 1.
inline double bessel_ratio(int d, double kappa) {
  if (d < 1) throw std::invalid_argument("bessel_ratio: d must be >= 1");
  if (kappa < 0.0 || !std::isfinite(kappa))
    throw std::invalid_argument("bessel_ratio: kappa must be finite and >= 0");
  if (kappa == 0.0) return 0.0;
  const double nu = 0.5 * d - 1.0;
  if (kappa >= detail::asymptotic_ratio_threshold(nu))
    return detail::bessel_ratio_asymptotic(nu, kappa);
  if (kappa - nu + 100.0 <= detail::kLentzMaxIter)
    return detail::bessel_ratio_lentz(nu, kappa);
  return detail::bessel_ratio_backward(nu, kappa);
}

/// log I_nu(x) for nu >= -1/2, x >= 0. Series for x <= max(30, nu); above
/// that the order is reduced to [0, 1) through the ratio recurrence
/// I_{mu+1} = r_mu I_mu and the fractional order is handled by the Hankel
/// expansion (x > 30 holds there by construction).
inline double log_bessel_i(double nu, double x) {
  if (nu < -0.5 || x < 0.0)
    throw std::invalid_argument("log_bessel_i: need nu >= -0.5 and x >= 0");
  if (x == 0.0)
    return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (x <= std::max(30.0, nu)) return detail::log_bessel_i_series(nu, x);

  double frac = nu;
  long steps = 0;
  while (frac >= 1.0) {
    frac -= 1.0;
    ++steps;
  }
  // frac is in [-1/2, 1) and x > 30 here; the Hankel expansion covers both.
  double log_i = detail::log_bessel_i_hankel(frac, x);
  double mu = frac;
  for (long s = 0; s < steps; ++s, mu += 1.0) {
    const double r = (x - mu + 100.0 <= detail::kLentzMaxIter)
                         ? detail::bessel_ratio_lentz(mu, x)
                         : detail::bessel_ratio_backward(mu, x);
    log_i += std::log(r);
  }
  return log_i;
}

/// Inverse of A_d: returns kappa >= 0 with A_d(kappa) = r, for r in [0, 1).
/// Newton from the standard seed r(d - r^2)/(1 - r^2), kept inside a
/// doubling-established bracket, with bisection as the fallback step.
inline double inv_bessel_ratio(int d, double r) {
  if (d < 1) throw std::invalid_argument("inv_bessel_ratio: d must be >= 1");
  if (!(r >= 0.0 && r < 1.0))
    throw std::domain_error("inv_bessel_ratio: r must lie in [0, 1)");
  if (r == 0.0) return 0.0;

  double lo = 0.0;
  double hi = std::max(1.0, r * (d - r * r) / (1.0 - r * r));
  int doublings = 0;
  while (bessel_ratio(d, hi) < r) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200)
      throw std::runtime_error("inv_bessel_ratio: failed to bracket");
  }

  double kappa = std::min(std::max(r * (d - r * r) / (1.0 - r * r), lo), hi);
  if (kappa <= lo || kappa >= hi) kappa = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double a = bessel_ratio(d, kappa);
    const double g = a - r;
    if (std::abs(g) <= 1e-13 * r + 1e-16) return kappa;
    if (g < 0.0)
      lo = kappa;
    else
      hi = kappa;
    const double da = 1.0 - a * a - (d - 1.0) / kappa * a;  // dA_d/dkappa
    double next = (da > 0.0) ? kappa - g / da : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - kappa) <= 1e-13 * kappa) {
      kappa = next;
      break;
    }
    kappa = next;
  }
  if (std::abs(bessel_ratio(d, kappa) - r) > 1e-10)
    throw std::runtime_error("inv_bessel_ratio: did not converge");
  return kappa;
}

}  // namespace permsphere
