#pragma once

// Executable error bounds for quasi-Newton iterations with an inexact
// correction (relative error E) and an inexact update (relative error D).
//
// All quantities are relative forward errors r = |z - x| / |z| in the 2-norm.
// The constants K, L, M bound |F'(x)^-1|, the Lipschitz constant of F', and
// |F'(x)| near the zero z.

#include <cmath>
#include <string>
#include <utility>

#include "newton_lab/errors.hpp"
#include "newton_lab/linalg.hpp"

namespace newton_lab::theory {

struct TheoryParams {
  double K = 1.0;       ///< bound on |F'(x)^-1|
  double L = 1.0;       ///< Lipschitz constant of F'
  double M = 1.0;       ///< bound on |F'(x)|
  double D = 0.0;       ///< bound on the update error |D_k|
  double E = 0.0;       ///< bound on the correction error |E_k|
  double z_norm = 1.0;  ///< |z|, strictly positive

  void validate() const {
    auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw DomainError(std::string("TheoryParams: ") + name +
                          " must be finite and nonnegative");
    };
    nonneg(K, "K");
    nonneg(L, "L");
    nonneg(M, "M");
    nonneg(D, "D");
    nonneg(E, "E");
    if (!(z_norm > 0.0) || !std::isfinite(z_norm))
      throw DomainError("TheoryParams: z_norm must be positive");
  }

  /// EMK(1+D): the correction-error contribution to the linear rate.
  double correction_term() const { return E * M * K * (1.0 + D); }
  /// LK(1+D)|z|: twice the leading coefficient of the quadratic term.
  double curvature_term() const { return L * K * (1.0 + D) * z_norm; }
};

/// Rank-one operator E = (y - x) x^T / (x^T x), so that (I + E) x = y.
class ErrorOperator {
public:
  ErrorOperator(Vector direction, Vector reference, double norm)
      : direction_(std::move(direction)), reference_(std::move(reference)), norm2_(norm) {}

  std::size_t size() const noexcept { return reference_.size(); }
  /// |E|_2 = |y - x|_2 / |x|_2.
  double norm2() const noexcept { return norm2_; }

  /// E v, using the rank-one structure.
  Vector apply(const Vector& v) const { return dot(reference_, v) * direction_; }

  /// (I + E) v.
  Vector apply_shifted(const Vector& v) const { return v + apply(v); }

  Matrix matrix() const {
    Matrix e(size(), size());
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = 0; j < size(); ++j) e(i, j) = direction_[i] * reference_[j];
    return e;
  }

private:
  Vector direction_;  // (y - x) / (x^T x)
  Vector reference_;  // x
  double norm2_;
};

inline ErrorOperator error_operator(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw ConfigError("error_operator: size mismatch");
  const double xx = dot(x, x);
  const double xn = newton_lab::norm2(x);
  if (xn == 0.0 || xx == 0.0) throw ZeroReference("error_operator: reference vector is zero");
  Vector diff = y - x;
  const double dn = newton_lab::norm2(diff);
  // |(y-x) x^T|_2 / |x|^2 = |y-x| |x| / |x|^2.
  const double norm = dn / xn;
  diff *= 1.0 / xx;
  return ErrorOperator(std::move(diff), x, norm);
}

/// Right-hand side of the one-step bound
///   r_{k+1} <= 1/2 LK(1+D)|z| r_k^2 + EKM(1+D) r_k + D.
inline double error_bound_step(double r_k, const TheoryParams& p) {
  return 0.5 * p.curvature_term() * r_k * r_k + p.correction_term() * r_k + p.D;
}

struct StagnationRoots {
  double minus;
  double plus;
};

/// Roots of D - [1 - EMK(1+D)] r + 1/2 LK(1+D)|z| r^2. Between them the
/// one-step bound guarantees r_{k+1} < r_k.
inline StagnationRoots stagnation_roots(const TheoryParams& p) {
  p.validate();
  const double a = 0.5 * p.curvature_term();
  const double b = 1.0 - p.correction_term();
  const double c = p.D;
  if (!(a > 0.0)) throw DegenerateQuadratic("stagnation_roots: LK(1+D)|z| is zero");
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0)
    throw NoRealRoots("stagnation_roots: negative discriminant, no interval of decrease");
  // Larger-magnitude root first, the other from the product c / a.
  const double sq = std::sqrt(disc);
  const double big = (b >= 0.0) ? (b + sq) / (2.0 * a) : (b - sq) / (2.0 * a);
  const double small = big != 0.0 ? (c / a) / big : 0.0;
  if (small <= big) return {small, big};
  return {big, small};
}

/// First-order estimate of the stagnation level, D / (1 - EMK(1+D))^2.
inline double stagnation_estimate(const TheoryParams& p) {
  p.validate();
  const double w = p.correction_term();
  if (!(w < 1.0)) throw EstimateInvalid("stagnation_estimate: EMK(1+D) >= 1");
  return p.D / ((1.0 - w) * (1.0 - w));
}

/// Linear contraction factor rho_k = 1/2 LK(1+D)|z| r_k + EKM(1+D) + C,
/// valid while D <= C r_k.
inline double linear_rate(double r_k, const TheoryParams& p, double C) {
  return 0.5 * p.curvature_term() * r_k + p.correction_term() + C;
}

/// Bound on r_{k+1} when |E_k| <= C1 r_k^lambda and D <= C2 r_k^(1+lambda).
inline double superlinear_bound(double r_k, const TheoryParams& p, double C1, double C2,
                                double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw DomainError("superlinear_bound: lambda must lie in (0, 1]");
  if (r_k == 0.0) return 0.0;
  const double coeff = 0.5 * p.curvature_term() * std::pow(r_k, 1.0 - lambda) +
                       C1 * p.K * p.M * (1.0 + p.D) + C2;
  return coeff * std::pow(r_k, 1.0 + lambda);
}

/// Correction accuracy beyond which quadratic convergence gains nothing:
/// |E_k| of order sqrt(D).
inline double sufficient_correction_accuracy(const TheoryParams& p) {
  return std::sqrt(p.D);
}

}  // namespace newton_lab::theory
