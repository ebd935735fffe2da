#pragma once

#include <Eigen/SVD>

#include "skit/cholesky.hpp"
#include "skit/common.hpp"

namespace skit {

enum class DependenceCriterion { COCO, KCC };

/// Coefficients of the witness pair g = sum_i alpha_i (phi(X_i) - mean) and
/// h = sum_i beta_i (psi(Y_i) - mean), normalized to unit RKHS norm.
struct WitnessCoefficients {
  Vector alpha;
  Vector beta;
  DependenceCriterion criterion{DependenceCriterion::COCO};
  double kappa1{0.0};
  double kappa2{0.0};
};

namespace detail {

inline constexpr double kSingularValueCutoff = 1e-10;

struct CenteredSvd {
  Matrix u;       // n x r, columns centered (zero column sums)
  Vector lambda;  // r singular values above cutoff
};

/// Thin SVD of the centered factor HG, dropping singular values < 1e-10.
inline CenteredSvd centered_thin_svd(const Matrix& g) {
  Matrix hg = g.rowwise() - g.colwise().mean();
  Eigen::JacobiSVD<Matrix> svd(hg, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) >= kSingularValueCutoff) ++r;
  if (r == 0) throw DegenerateDataError("centered factor has no usable directions");
  return {svd.matrixU().leftCols(r), sv.head(r)};
}

/// Leading singular triple of M via power iteration on M^T M.
/// Deterministic start, tolerance 1e-12, at most 1e4 iterations.
inline void top_singular_triple(const Matrix& m, Vector& u, Vector& v, double& gamma) {
  v = Vector::Ones(m.cols()).normalized();
  double prev = -1.0;
  for (int it = 0; it < 10000; ++it) {
    Vector w = m.transpose() * (m * v);
    const double norm = w.norm();
    if (norm <= 0.0) break;
    v = w / norm;
    const double sigma = (m * v).norm();
    if (std::abs(sigma - prev) <= 1e-12 * std::max(1.0, sigma)) {
      prev = sigma;
      break;
    }
    prev = sigma;
  }
  gamma = std::max(prev, 0.0);
  if (gamma < 1e-15) throw DegenerateDataError("leading singular value is numerically zero");
  u = (m * v) / gamma;
}

}  // namespace detail

/// COCO witness pair from low-rank kernel factors (Appendix-style pipeline:
/// center, thin SVD, leading singular triple of (1/n) L1 U1'U2 L2, then the
/// linear-time normalization with the achieved-residual correction term).
inline std::pair<WitnessCoefficients, double> solve_coco(const LowRankFactor& factor_x,
                                                         const LowRankFactor& factor_y,
                                                         Eigen::Index n) {
  if (factor_x.g.rows() != n || factor_y.g.rows() != n) {
    throw InputError("solve_coco: factors must share n rows");
  }
  const auto sx = detail::centered_thin_svd(factor_x.g);
  const auto sy = detail::centered_thin_svd(factor_y.g);

  const Matrix m = (1.0 / static_cast<double>(n)) *
                   (sx.lambda.asDiagonal() * (sx.u.transpose() * sy.u) *
                    sy.lambda.asDiagonal());
  Vector u, v;
  double gamma = 0.0;
  detail::top_singular_triple(m, u, v, gamma);

  Vector alpha0 = sx.u * (u.array() / sx.lambda.array()).matrix();
  Vector beta0 = sy.u * (v.array() / sy.lambda.array()).matrix();

  // ||G'H a0||^2 = ||u||^2 by construction; the achieved residual trace is
  // used for the delta-correction (tighter than the requested tolerance).
  const Vector ha = alpha0.array() - alpha0.mean();
  const Vector hb = beta0.array() - beta0.mean();
  const double na =
      std::sqrt(u.squaredNorm() + factor_x.residual_trace * ha.squaredNorm());
  const double nb =
      std::sqrt(v.squaredNorm() + factor_y.residual_trace * hb.squaredNorm());

  WitnessCoefficients coeffs;
  coeffs.criterion = DependenceCriterion::COCO;
  coeffs.alpha = alpha0 / na;
  coeffs.beta = beta0 / nb;

  // Eigenvectors are sign-ambiguous; fix the pair jointly so that alpha's
  // largest-magnitude entry is positive.
  Eigen::Index imax;
  coeffs.alpha.cwiseAbs().maxCoeff(&imax);
  if (coeffs.alpha(imax) < 0.0) {
    coeffs.alpha = -coeffs.alpha;
    coeffs.beta = -coeffs.beta;
  }
  return {coeffs, gamma};
}

/// KCC variant: scales the core matrix by rho_kappa(Lambda) = 1/sqrt(Lambda^2/n + kappa)
/// on both sides and carries the same scaling into the coefficients.
inline std::pair<WitnessCoefficients, double> solve_kcc(const LowRankFactor& factor_x,
                                                        const LowRankFactor& factor_y,
                                                        Eigen::Index n, double kappa1,
                                                        double kappa2) {
  if (factor_x.g.rows() != n || factor_y.g.rows() != n) {
    throw InputError("solve_kcc: factors must share n rows");
  }
  if (!(kappa1 > 0.0 && kappa2 > 0.0)) throw InputError("solve_kcc: kappas must be positive");
  const auto sx = detail::centered_thin_svd(factor_x.g);
  const auto sy = detail::centered_thin_svd(factor_y.g);
  const double dn = static_cast<double>(n);

  const Array rho1 = (sx.lambda.array().square() / dn + kappa1).rsqrt();
  const Array rho2 = (sy.lambda.array().square() / dn + kappa2).rsqrt();

  const Matrix m = (1.0 / dn) * ((rho1 * sx.lambda.array()).matrix().asDiagonal() *
                                 (sx.u.transpose() * sy.u) *
                                 (sy.lambda.array() * rho2).matrix().asDiagonal());
  Vector u, v;
  double gamma = 0.0;
  detail::top_singular_triple(m, u, v, gamma);

  Vector alpha0 = sx.u * (u.array() * rho1 / sx.lambda.array()).matrix();
  Vector beta0 = sy.u * (v.array() * rho2 / sy.lambda.array()).matrix();

  const Vector ha = alpha0.array() - alpha0.mean();
  const Vector hb = beta0.array() - beta0.mean();
  const double na = std::sqrt((u.array() * rho1).matrix().squaredNorm() +
                              factor_x.residual_trace * ha.squaredNorm());
  const double nb = std::sqrt((v.array() * rho2).matrix().squaredNorm() +
                              factor_y.residual_trace * hb.squaredNorm());

  WitnessCoefficients coeffs;
  coeffs.criterion = DependenceCriterion::KCC;
  coeffs.kappa1 = kappa1;
  coeffs.kappa2 = kappa2;
  coeffs.alpha = alpha0 / na;
  coeffs.beta = beta0 / nb;

  Eigen::Index imax;
  coeffs.alpha.cwiseAbs().maxCoeff(&imax);
  if (coeffs.alpha(imax) < 0.0) {
    coeffs.alpha = -coeffs.alpha;
    coeffs.beta = -coeffs.beta;
  }
  return {coeffs, gamma};
}

}  // namespace skit
