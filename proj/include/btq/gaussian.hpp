#pragma once
// Closed linear-model calculus of Gaussian kernels
//
//   K(Z, Z') = c * exp(-pi [ (Z-Z')^T M (Z-Z') + i Omega(Z, Z') ])
//
// on R^{2n}, with M complex symmetric and Re M positive definite. The kernel
// attached to a compatible structure J is the "pure" case c = 1, M = G_J / 2.
// Compositions integrate the shared middle variable over R^{2n}; the result
// stays in the family, and polynomial weights transform by Gaussian moments
// of the induced middle-variable distribution (Wick pair sums).

#include <btq/error.hpp>
#include <btq/linalg.hpp>
#include <btq/polynomial.hpp>

#include <optional>

namespace btq {

struct ModelKernel {
  int n = 0;
  cplx c{1.0, 0.0};
  CMat M;  // 2n x 2n, complex symmetric, Re M > 0

  cplx operator()(const Vec& Z, const Vec& Zp) const {
    const CVec U = (Z - Zp).cast<cplx>();
    const cplx quad = (U.transpose() * M * U)(0, 0);
    const double phase = symplectic_pairing(Z, Zp);
    return c * std::exp(-kPi * (quad + kI * phase));
  }

  static ModelKernel validate(int n, cplx c, const CMat& M, double tol = 1e-9) {
    require(M.rows() == 2 * n && M.cols() == 2 * n, ErrorKind::DimensionMismatch,
            "kernel matrix must be 2n x 2n");
    require((M - M.transpose()).cwiseAbs().maxCoeff() <= tol, ErrorKind::NotSymplectic,
            "kernel matrix must be (complex) symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(M.real()));
    require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0,
            ErrorKind::NotPositive, "kernel matrix must have positive definite real part");
    ModelKernel k;
    k.n = n;
    k.c = c;
    k.M = 0.5 * (M + M.transpose());
    return k;
  }

  // True when the kernel is the pure Gaussian of a compatible structure.
  bool is_pure(double tol = 1e-9) const {
    if (M.imag().cwiseAbs().maxCoeff() > tol) return false;
    const Mat G = 2.0 * M.real();
    const Mat J = structure_of_metric(G);
    const Mat I2n = Mat::Identity(2 * n, 2 * n);
    return (J * J + I2n).cwiseAbs().maxCoeff() <= 1e-7;
  }

  CompatibleStructure structure(double tol = 1e-8) const {
    require(M.imag().cwiseAbs().maxCoeff() <= tol, ErrorKind::UsageError,
            "kernel is not the pure Gaussian of a structure (complex M)");
    return CompatibleStructure::validate(structure_of_metric(2.0 * M.real()), 1e-7);
  }
};

// The coherent-state projector kernel of a compatible structure.
inline ModelKernel kernel_of(const CompatibleStructure& Js) {
  ModelKernel k;
  k.n = Js.n;
  k.c = 1.0;
  k.M = 0.5 * Js.metric.cast<cplx>();
  return k;
}

// A kernel together with a polynomial weight in (Z, Z') — the closed class
// produced by weighted compositions. Variables 0..2n-1 are Z, 2n..4n-1 are Z'.
struct PolyKernel {
  ModelKernel base;
  Polynomial weight;  // 4n variables

  cplx operator()(const Vec& Z, const Vec& Zp) const {
    CVec x(4 * base.n);
    x.head(2 * base.n) = Z.cast<cplx>();
    x.tail(2 * base.n) = Zp.cast<cplx>();
    return base(Z, Zp) * weight.eval(x);
  }
};

namespace detail {

struct CompositionData {
  CMat S;     // M_l + M_r (middle-variable quadratic form)
  CMat Sinv;
  CMat mean;  // mean of the middle variable is mean * (Z - Z') + Z'
  CMat cov;   // Wick covariance (2 pi S)^{-1}
  cplx csqrt; // det(S)^{-1/2}
};

inline CompositionData composition_data(const ModelKernel& lhs, const ModelKernel& rhs) {
  require(lhs.n == rhs.n, ErrorKind::DimensionMismatch, "kernel dimension mismatch");
  const int n = lhs.n;
  CompositionData d;
  d.S = lhs.M + rhs.M;
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(d.S.real()));
    require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 1e-14,
            ErrorKind::SingularInterpolation,
            "middle-variable form is not positive definite");
  }
  d.Sinv = d.S.inverse();
  const CMat J0 = standard_complex_structure(n).cast<cplx>();
  d.mean = 0.5 * d.Sinv * (2.0 * lhs.M - kI * J0);
  d.cov = d.Sinv / (2.0 * kPi);
  d.csqrt = 1.0 / sqrt_det_repos(d.S);
  return d;
}

}  // namespace detail

// Composition (K_l o K_r)(Z, Z') = Int K_l(Z, Y) K_r(Y, Z') dY, in closed
// form. The det branch is continued from the positive-definite real part.
inline ModelKernel compose(const ModelKernel& lhs, const ModelKernel& rhs) {
  const auto d = detail::composition_data(lhs, rhs);
  const int n = lhs.n;
  const CMat J0 = standard_complex_structure(n).cast<cplx>();
  ModelKernel out;
  out.n = n;
  out.c = lhs.c * rhs.c * d.csqrt;
  const CMat M = lhs.M - 0.25 * (2.0 * lhs.M + kI * J0) * d.Sinv * (2.0 * lhs.M - kI * J0);
  out.M = 0.5 * (M + M.transpose());
  return out;
}

// Weighted composition Int K_l(Z, Y) F(Y) K_r(Y, Z') dY for a polynomial F
// of the middle variable (2n vars, degree <= 8). Exact via Wick moments.
inline PolyKernel compose_poly(const ModelKernel& lhs, const Polynomial& F,
                               const ModelKernel& rhs) {
  const int n = lhs.n;
  require(F.nvars() == 2 * n, ErrorKind::DimensionMismatch,
          "middle-variable polynomial must have 2n variables");
  require(F.degree() <= 8, ErrorKind::DimensionMismatch,
          "weighted composition supports degree <= 8");
  const auto d = detail::composition_data(lhs, rhs);

  // Affine substitution Y = V + m(Z, Z') with V centered Gaussian:
  // L_i = sum_j mean(i,j) z_j + (delta_ij - mean(i,j)) z'_j, as a polynomial
  // in the 4n outer variables.
  std::vector<Polynomial> L;
  L.reserve(static_cast<size_t>(2 * n));
  for (int i = 0; i < 2 * n; ++i) {
    Polynomial li(4 * n);
    for (int j = 0; j < 2 * n; ++j) {
      const cplx mij = d.mean(i, j);
      if (mij != cplx(0.0)) li += Polynomial::variable(4 * n, j, mij);
      const cplx dij = (i == j ? cplx(1.0) : cplx(0.0)) - mij;
      if (dij != cplx(0.0)) li += Polynomial::variable(4 * n, 2 * n + j, dij);
    }
    L.push_back(std::move(li));
  }

  // Binomial expansion of each monomial of F around the mean, with the
  // centered factors integrated by the pair-partition sum.
  Polynomial weight(4 * n);
  std::vector<std::vector<double>> binom(9, std::vector<double>(9, 0.0));
  for (int a = 0; a <= 8; ++a) {
    binom[static_cast<size_t>(a)][0] = 1.0;
    for (int b = 1; b <= a; ++b)
      binom[static_cast<size_t>(a)][static_cast<size_t>(b)] =
          binom[static_cast<size_t>(a - 1)][static_cast<size_t>(b - 1)] +
          (b <= a - 1 ? binom[static_cast<size_t>(a - 1)][static_cast<size_t>(b)] : 0.0);
  }
  for (const auto& [alpha, f] : F.terms()) {
    // Iterate over beta <= alpha (the V-exponents).
    Polynomial::Key beta(alpha.size(), 0);
    while (true) {
      int total_beta = 0;
      for (int b : beta) total_beta += b;
      if (total_beta % 2 == 0) {
        const cplx mom = wick_moment_multi(d.cov, beta);
        if (mom != cplx(0.0)) {
          double combo = 1.0;
          for (size_t i = 0; i < alpha.size(); ++i)
            combo *= binom[static_cast<size_t>(alpha[i])][static_cast<size_t>(beta[i])];
          Polynomial term = Polynomial::constant(4 * n, f * combo * mom);
          for (size_t i = 0; i < alpha.size(); ++i)
            if (alpha[i] - beta[i] > 0) term = term * L[i].pow(alpha[i] - beta[i]);
          weight += term;
        }
      }
      // Odometer over beta <= alpha.
      size_t pos = 0;
      while (pos < beta.size()) {
        if (beta[pos] < alpha[pos]) {
          ++beta[pos];
          break;
        }
        beta[pos] = 0;
        ++pos;
      }
      if (pos == beta.size()) break;
    }
  }
  weight.prune(0.0);

  PolyKernel out;
  out.base = compose(lhs, rhs);
  out.weight = std::move(weight);
  return out;
}

// Anchored quadratic moments in closed form: the weighted composition with
//   left:  F(Z, Y)  = <B (Z - Y), (Z - Y)>
//   right: F(Y, Z') = <B (Y - Z'), (Y - Z')>
// for pure structure kernels. Both reduce to a quadratic form in U = Z - Z'
// applied through an interpolation projector, plus the same trace term.
enum class MomentSide { Left, Right };

inline PolyKernel quadratic_moment(const ModelKernel& lhs, const CMat& B,
                                   const ModelKernel& rhs, MomentSide side) {
  const int n = lhs.n;
  require(B.rows() == 2 * n && B.cols() == 2 * n, ErrorKind::DimensionMismatch,
          "quadratic form must be 2n x 2n");
  require((B - B.transpose()).cwiseAbs().maxCoeff() <= 1e-10, ErrorKind::UsageError,
          "quadratic form must be symmetric");
  const CompatibleStructure Jl = lhs.structure();
  const CompatibleStructure Jr = rhs.structure();
  const auto d = detail::composition_data(lhs, rhs);

  CMat Q;
  if (side == MomentSide::Left) {
    Q = interpolation_operators(Jl, Jr).Pi.conjugate();  // Z - Y = conj(Pi_l^r) U + centered
  } else {
    Q = interpolation_operators(Jr, Jl).Pi;              // Y - Z' = Pi_r^l U + centered
  }
  const CMat C = Q.transpose() * B * Q;
  const cplx trace_term = (B * d.Sinv).trace() / (2.0 * kPi);

  Polynomial weight = Polynomial::constant(4 * n, trace_term);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j) {
      const cplx cij = C(i, j);
      if (cij == cplx(0.0)) continue;
      const Polynomial ui = Polynomial::variable(4 * n, i) -
                            Polynomial::variable(4 * n, 2 * n + i);
      const Polynomial uj = Polynomial::variable(4 * n, j) -
                            Polynomial::variable(4 * n, 2 * n + j);
      weight += cij * (ui * uj);
    }
  weight.prune(0.0);

  PolyKernel out;
  out.base = compose(lhs, rhs);
  out.weight = std::move(weight);
  return out;
}

}  // namespace btq
