#pragma once
// Leading coefficients of the localization of composed-kernel traces at the
// fixed points of a linear symplectic map dphi. The data at one fixed point
// (or one linear fixed component) bundle the map, the structure path from
// J_0 to J_1 = dphi J_0 dphi^{-1}, the transport factor mu along it, a
// unit-modulus multiplier lambda, and an auxiliary bundle factor.
//
// The central object is the complex quadratic form with matrix
//   W = G_0 (Pi_0^1 - dphi^{-1} conj(Pi_1^0)) (I - dphi)
// in the coordinates of R^{2n}. The operator D (I - dphi) is self-adjoint
// for the metric G_0 of the anchor structure, so raising by G_0 makes W a
// symmetric matrix; since det G_0 = 1 the raising leaves det W unchanged.
// Re W is positive definite on every non-degenerate datum, and the
// isolated-point coefficient is
//   a0 = conj(mu)^{-1} phiE_tauE det(W)^{-1/2}
// with the square root branch-continued from the positive-definite real
// part. For a fixed component, W is restricted to a transverse subspace N as
// a bilinear form, and a metric volume factor converts the result into a
// density against the component's chosen tangent basis.

#include <btq/error.hpp>
#include <btq/linalg.hpp>
#include <btq/quadrature.hpp>
#include <btq/structure_path.hpp>
#include <btq/transport.hpp>

#include <cmath>
#include <vector>

namespace btq {

struct FixedPointDatum {
  int n = 0;
  Mat dphi;                    // real 2n x 2n, symplectic
  cplx lambda{1.0, 0.0};       // unit-modulus multiplier at the point
  CompatibleStructure J0;      // structure at the fixed point
  StructurePath path;          // from J0 to dphi J0 dphi^{-1}
  cplx mu{1.0, 0.0};           // transport factor along `path` at t = 1
  cplx phiE_tauE{1.0, 0.0};    // auxiliary bundle factor (1 for trivial data)

  void validate() const {
    const int m = 2 * n;
    require(n >= 1 && dphi.rows() == m && dphi.cols() == m,
            ErrorKind::DimensionMismatch, "dphi must be 2n x 2n");
    require(is_symplectic(dphi), ErrorKind::NotSymplectic,
            "dphi is not symplectic");
    require(std::abs(std::abs(lambda) - 1.0) <= 1e-10, ErrorKind::UsageError,
            "lambda must have unit modulus");
    const auto start = path.at(0.0);
    require((start.J - J0.J).cwiseAbs().maxCoeff() <= 1e-8, ErrorKind::UsageError,
            "path(0) does not match the datum's J0");
    const Mat J1 = dphi * J0.J * dphi.inverse();
    const auto end = path.at(1.0);
    require((end.J - J1).cwiseAbs().maxCoeff() <= 1e-8, ErrorKind::UsageError,
            "path(1) does not match dphi J0 dphi^{-1}");
  }

  // Builds a datum whose mu is computed by transport along `path`.
  static FixedPointDatum from_map(const Mat& dphi, const CompatibleStructure& J0,
                                  const StructurePath& path,
                                  cplx lambda = cplx(1.0, 0.0),
                                  const PathDiscretization& d = {}) {
    FixedPointDatum out;
    out.n = J0.n;
    out.dphi = dphi;
    out.lambda = lambda;
    out.J0 = J0;
    out.path = path;
    out.mu = transport_factor(path, 1.0, d);
    out.validate();
    return out;
  }
};

struct CoefficientReport {
  cplx value;             // a0 for a point, nu0 for a component
  BranchedSqrtDet branch; // audit of the determinant square root
  int sign_class = 0;     // quarter-turn count of the root's phase, mod 4
};

namespace detail {

// Pi_0^1 - dphi^{-1} conj(Pi_1^0): acts as +I on V_0^(1,0) and carries
// dphi V_0^(0,1) back by -dphi^{-1}.
inline CMat projector_difference(const FixedPointDatum& fp,
                                 const CompatibleStructure& J1) {
  const CMat Pi01 = interpolation_operators(fp.J0, J1).Pi;
  const CMat Pi10 = interpolation_operators(J1, fp.J0).Pi;
  return Pi01 - fp.dphi.inverse().cast<cplx>() * Pi10.conjugate();
}

inline void check_nondegenerate(const Mat& dphi) {
  const Mat IM = Mat::Identity(dphi.rows(), dphi.cols()) - dphi;
  Eigen::JacobiSVD<Mat> svd(IM);
  const double smin = svd.singularValues().minCoeff();
  require(smin > 1e-6, ErrorKind::DegenerateFixedPoint,
          "smallest singular value of I - dphi is " + fmt(smin));
}

// The quadratic form W = G_0 (Pi_0^1 - dphi^{-1} conj(Pi_1^0))(I - dphi);
// asserts the symmetry and positive semidefinite real part it is guaranteed
// to have (the kernel of Re W is exactly the fixed subspace of dphi, so Re W
// is definite precisely for an isolated fixed point).
inline CMat fixed_point_form(const FixedPointDatum& fp) {
  fp.validate();
  const auto J1 = fp.path.at(1.0);
  const int m = 2 * fp.n;
  const CMat D = projector_difference(fp, J1);
  CMat W = fp.J0.metric.cast<cplx>() * D *
           (CMat::Identity(m, m) - fp.dphi.cast<cplx>());
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  require((W - W.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale,
          ErrorKind::UsageError,
          "fixed-point form is not symmetric; datum is inconsistent");
  W = 0.5 * (W + W.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(W.real());
  require(es.info() == Eigen::Success &&
              es.eigenvalues().minCoeff() > -1e-10 * scale,
          ErrorKind::NotPositive,
          "fixed-point form must have positive semidefinite real part");
  return W;
}

inline int quarter_turns_mod4(double total_arg) {
  const int k = static_cast<int>(std::lround(total_arg / kPi));
  return ((k % 4) + 4) % 4;
}

inline CoefficientReport report_from_form(const FixedPointDatum& fp, const CMat& form,
                                          double extra_factor) {
  CoefficientReport out;
  out.branch = sqrt_det_repos_tracked(form);
  out.sign_class = quarter_turns_mod4(out.branch.total_arg);
  out.value = fp.phiE_tauE / std::conj(fp.mu) / out.branch.value * extra_factor;
  return out;
}

}  // namespace detail

// ------------------------------------------------------- isolated points

inline CoefficientReport leading_coeff_isolated(const FixedPointDatum& fp) {
  detail::check_nondegenerate(fp.dphi);
  return detail::report_from_form(fp, detail::fixed_point_form(fp), 1.0);
}

// Evaluates conj(mu)^{-1} phiE_tauE Int exp(-pi <W Z, Z>) dZ by tensor
// quadrature; must agree with leading_coeff_isolated in modulus and phase.
inline cplx gaussian_fixed_point_oracle(const FixedPointDatum& fp,
                                        const QuadratureSpec& spec = {}) {
  detail::check_nondegenerate(fp.dphi);
  const CMat W = detail::fixed_point_form(fp);
  return fp.phiE_tauE / std::conj(fp.mu) * gaussian_box_integral(W, spec);
}

// Residual of the determinant identity tying the projector difference to the
// canonical-bundle data:
//   mu^2 conj(det D) = (-1)^n phiK / tauK,
// phiK = det of dphi: V_0^(0,1) -> V_1^(0,1) in the unitary frames of the
// transport convention, tauK from canonical_transport. (|det D| = |mu|^{-2},
// |phiK| = |tauK| = 1, so both sides are unit-modulus times |mu|^2 / |mu|^2.)
inline double geometric_identity_check(const FixedPointDatum& fp,
                                       const PathDiscretization& d = {}) {
  fp.validate();
  const auto J1 = fp.path.at(1.0);
  const cplx detD = detail::projector_difference(fp, J1).determinant();
  const CMat E0 = antiholo_unitary_frame(fp.J0);
  const CMat E1 = antiholo_unitary_frame(J1);
  const cplx phiK = frame_matrix(E1, fp.dphi.cast<cplx>(), E0).determinant();
  const cplx tauK = canonical_transport(fp.path, 1.0, d).tauK;
  const cplx lhs = fp.mu * fp.mu * std::conj(detD);
  const cplx rhs = (fp.n % 2 == 0 ? 1.0 : -1.0) * phiK / tauK;
  return std::abs(lhs - rhs);
}

// ------------------------------------------------------- fixed components

struct FixedComponentDatum {
  FixedPointDatum base;
  Mat fixed_subspace;         // 2n x d basis of ker(I - dphi); d may be 0
  Mat N_subspace;             // 2n x (2n - d) basis of a transverse subspace
  double density_ratio = 1.0; // metric volume factor (see density_ratio_linear)
  double volume = 1.0;        // component volume in fixed_subspace coordinates

  void validate() const {
    base.validate();
    const int m = 2 * base.n;
    const int d = static_cast<int>(fixed_subspace.cols());
    require(N_subspace.cols() + d == m && N_subspace.rows() == m &&
                (d == 0 || fixed_subspace.rows() == m),
            ErrorKind::DimensionMismatch,
            "fixed_subspace and N_subspace must split R^{2n}");
    if (d > 0) {
      const Mat r = (base.dphi - Mat::Identity(m, m)) * fixed_subspace;
      require(r.cwiseAbs().maxCoeff() <= 1e-8, ErrorKind::UsageError,
              "dphi does not fix the fixed_subspace pointwise");
    }
    Mat full(m, m);
    if (d > 0) full << fixed_subspace, N_subspace;
    else full = N_subspace;
    require(std::abs(full.determinant()) > 1e-10, ErrorKind::DegenerateOnN,
            "fixed_subspace + N_subspace do not span R^{2n}");
    require(density_ratio > 0.0 && volume > 0.0, ErrorKind::UsageError,
            "density_ratio and volume must be positive");
  }
};

// Metric volume of the combined frame [F N] in the metric of J0: the factor
// converting the restricted-determinant coefficient into a density against
// the F coordinates. Chosen so that nu0 is invariant under change of basis
// of N and reduces to a0 when d = 0 (any basis of N).
inline double density_ratio_linear(const Mat& F, const Mat& N, const Mat& metric) {
  const int m = static_cast<int>(metric.rows());
  const int d = static_cast<int>(F.cols());
  Mat full(m, m);
  if (d > 0) full << F, N;
  else full = N;
  const Mat gram = full.transpose() * metric * full;
  const double det = gram.determinant();
  require(det > 0.0, ErrorKind::DegenerateOnN, "degenerate frame Gram matrix");
  return std::sqrt(det);
}

inline CoefficientReport leading_density_component(const FixedComponentDatum& comp) {
  comp.validate();
  const CMat W = detail::fixed_point_form(comp.base);
  const CMat BN = comp.N_subspace.cast<cplx>();
  const CMat WN = BN.transpose() * W * BN;  // restriction as a bilinear form
  const double scale = std::max(1.0, WN.cwiseAbs().maxCoeff());
  require(std::abs(WN.determinant()) > 1e-10 * scale, ErrorKind::DegenerateOnN,
          "restricted fixed-point form is singular on N");
  return detail::report_from_form(comp.base, WN, comp.density_ratio);
}

// Leading-order trace prediction: sum over components of
// p^{d/2} lambda^p nu0 volume (an isolated point is a d = 0 component).
inline cplx trace_prediction(const std::vector<FixedComponentDatum>& comps, int p) {
  require(p >= 1, ErrorKind::UsageError, "trace prediction needs p >= 1");
  cplx total = 0.0;
  for (const auto& comp : comps) {
    const double d = static_cast<double>(comp.fixed_subspace.cols());
    const cplx nu0 = leading_density_component(comp).value;
    total += std::pow(static_cast<double>(p), 0.5 * d) *
             std::pow(comp.base.lambda, static_cast<double>(p)) * nu0 * comp.volume;
  }
  return total;
}

}  // namespace btq
