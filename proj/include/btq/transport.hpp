#pragma once
// Transport along a path of compatible structures: the scalar factor mu_t
// solving the projected-derivative equation for the kernel family, the
// canonical frame transport on antiholomorphic spaces (ODE v' = (I-P) P' v),
// and the residuals of the defining kernel identities, evaluated honestly by
// composition quadrature plus centered finite differences in t.
//
// Closed forms used by the tests: for the hyperbolic scaling family with
// rate s, mu_t = cosh(st)^{n/2}; the frame-determinant pair is
// (tauK, detPiBar) = (1, sech(st)^n) and conj(mu_t)^{-2} tauK = detPiBar
// holds along every path.

#include <btq/error.hpp>
#include <btq/gaussian.hpp>
#include <btq/linalg.hpp>
#include <btq/quadrature.hpp>
#include <btq/structure_path.hpp>

namespace btq {

struct PathDiscretization {
  int steps = 256;    // Simpson subintervals / RK4 steps on [0, t]
  double tol = 1e-7;  // relative doubling-check tolerance
};

namespace detail {

// The logarithmic derivative of mu at time s: the interpolation projector
// paired with the metric velocity through the anchor metric,
//   rate = (1/4) Tr[Pi_s^0 G_0^{-1} dG_s]
//        = (1/4) Tr[S^{-1} dG_s Pbar_0],   S = (G_s + G_0)/2,
// using Pi_s^0 G_0^{-1} = S^{-1} (I + i J_0^T)/2 and a transpose of the
// trace. The anchor raising matters: without it the real part no longer
// matches d/dt log det(S)^{1/4} once G_0 != I, and the kernel identities
// fail. (Derivable from the Gaussian composition rule: rate = -c'/c
// + (1/2) Tr[dM^c (M_t + M^c)^{-1}] for the composed kernel's data.)
inline cplx transport_rate(const StructurePath& path, const CompatibleStructure& anchor,
                           double s) {
  const auto Js = path.at(s);
  const Mat S = 0.5 * (Js.metric + anchor.metric);
  const CMat SinvdG = S.ldlt().solve(path.dmetric(s)).cast<cplx>();
  return 0.25 * (SinvdG * projector_antiholo(anchor.J)).trace();
}

// Composite Simpson of a complex integrand on [0, t] with a free half-grid
// convergence check (the coarse sum reuses the even samples).
inline cplx simpson_with_check(const std::function<cplx(double)>& f, double t,
                               int steps, double tol, const char* what) {
  if (t == 0.0) return 0.0;
  int m = steps;
  if (m % 2 != 0) ++m;
  if (m < 8) m = 8;
  const double h = t / m;
  std::vector<cplx> v(static_cast<size_t>(m) + 1);
  for (int k = 0; k <= m; ++k) v[static_cast<size_t>(k)] = f(h * k);
  auto simpson = [&](int stride) {
    cplx s = v[0] + v[static_cast<size_t>(m)];
    for (int k = stride; k < m; k += stride)
      s += ((k / stride) % 2 == 1 ? 4.0 : 2.0) * v[static_cast<size_t>(k)];
    return s * (h * stride / 3.0);
  };
  const cplx fine = simpson(1);
  const cplx coarse = simpson(2);
  const double err = std::abs(fine - coarse) / std::max(1.0, std::abs(fine));
  require(err <= std::max(tol, 1e-12), ErrorKind::ConvergenceFailure,
          std::string(what) + ": Simpson halving check " + fmt(err) +
              " exceeds tolerance " + fmt(tol));
  return fine;
}

}  // namespace detail

// ----------------------------------------------------------- scalar factor

inline cplx transport_factor(const StructurePath& path, double t,
                             const PathDiscretization& d = {}) {
  const auto anchor = path.at(0.0);
  const cplx logmu = detail::simpson_with_check(
      [&](double s) { return detail::transport_rate(path, anchor, s); }, t, d.steps,
      d.tol, "transport factor");
  return std::exp(logmu);
}

// --------------------------------------------------------- frame transport

struct CanonicalTransport {
  cplx tauK;      // det of the ODE-transported frame in the target unitary frame
  cplx detPiBar;  // det of conj(Pi_t^0) mapping the base frame to the target
  CMat frame;     // transported frame columns (2n x n)
};

inline CanonicalTransport canonical_transport(const StructurePath& path, double t,
                                              const PathDiscretization& d = {}) {
  const int n = path.n();
  const auto J0s = path.at(0.0);
  const CMat E0 = antiholo_unitary_frame(J0s);

  // v' = (I - P_s) P_s' v on the antiholomorphic spaces, P_s = (I + iJ_s)/2,
  // P_s' = i J_s' / 2. Classical fixed-step RK4.
  auto rhs = [&](double s, const CMat& V) -> CMat {
    const CMat P = projector_antiholo(path.J(s));
    const CMat dP = 0.5 * kI * path.dJ(s).cast<cplx>();
    return (CMat::Identity(2 * n, 2 * n) - P) * (dP * V);
  };
  int m = std::max(d.steps, 8);
  const double h = t / m;
  CMat V = E0;
  if (t > 0.0) {
    for (int k = 0; k < m; ++k) {
      const double s = k * h;
      const CMat k1 = rhs(s, V);
      const CMat k2 = rhs(s + 0.5 * h, V + 0.5 * h * k1);
      const CMat k3 = rhs(s + 0.5 * h, V + 0.5 * h * k2);
      const CMat k4 = rhs(s + h, V + h * k3);
      V += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }

  const auto Jts = path.at(t);
  const CMat Et = antiholo_unitary_frame(Jts);
  CanonicalTransport out;
  out.frame = V;
  out.tauK = frame_matrix(Et, CMat::Identity(2 * n, 2 * n), V).determinant();
  const CMat PiBar = interpolation_operators(Jts, J0s).Pi.conjugate();
  out.detPiBar = frame_matrix(Et, PiBar, E0).determinant();
  return out;
}

// |conj(mu_t)^{-2} tauK - detPiBar|: the determinant identity tying the
// scalar factor to the canonical frame transport.
inline double transport_identity_residual(const StructurePath& path, double t,
                                          const PathDiscretization& d = {}) {
  const cplx mu = transport_factor(path, t, d);
  const auto ct = canonical_transport(path, t, d);
  const cplx lhs = ct.tauK / (std::conj(mu) * std::conj(mu));
  return std::abs(lhs - ct.detPiBar);
}

// -------------------------------------------- kernel derivative identities
//
// Residuals, at one sample point pair (Z, Z'), of the defining properties of
// the transported kernel family K_t = kernel of path(t), C_t = K_t o K_0:
//   projected derivative: P_t (d/dt C_t) + (mu'/mu) C_t = 0
//   parallel kernel:      P_t d/dt (mu_t C_t)           = 0
//   central value:        mu_t C_t(0,0) = conj(mu_t)^{-1}
//   normalization:        d/dt det(A_t^0)^{1/2}
//                           = -(1/4) Tr[A_t^0 G_0^{-1} dG_t] det(A_t^0)^{1/2}
// The outer compositions are evaluated by quadrature; d/dt is a centered
// difference with step 1e-5. Residuals are normalized by max(1, |C_t(Z,Z')|).

struct KernelIdentityResiduals {
  double projected_derivative;  // first identity
  double parallel_kernel;       // second identity
  double central_value;         // third identity
  double normalization;         // determinant derivative identity
};

// How the outer projection P_t o C is evaluated. Quadrature integrates the
// composition numerically (fully independent of the closed-form algebra);
// ClosedForm uses the Gaussian composition rule. Quadrature is the default
// for n = 1. For n >= 2 the tensor-product quadrature error (~1e-8 relative)
// is amplified by the 1/(2h) of the centered difference past the identity
// tolerances, so the derivative identities are checked there with the closed
// composition, which is itself verified against quadrature elsewhere.
enum class OuterEvaluation { Quadrature, ClosedForm };

inline KernelIdentityResiduals kernel_identity_residuals(
    const StructurePath& path, double t, const Vec& Z, const Vec& Zp,
    const PathDiscretization& d = {}, const QuadratureSpec& spec = {},
    OuterEvaluation outer = OuterEvaluation::Quadrature) {
  const double h = kPathFdStep;
  const auto Jt = path.at(t);
  const auto J0s = path.at(0.0);
  const ModelKernel Kt = kernel_of(Jt);
  const ModelKernel K0 = kernel_of(J0s);

  const ModelKernel Cp = compose(kernel_of(path.at(t + h)), K0);
  const ModelKernel Cm = compose(kernel_of(path.at(t - h)), K0);
  const ModelKernel Ct = compose(Kt, K0);

  cplx Qp, Qm;
  if (outer == OuterEvaluation::Quadrature) {
    Qp = quadrature_compose(Kt, nullptr, Cp, Z, Zp, spec);
    Qm = quadrature_compose(Kt, nullptr, Cm, Z, Zp, spec);
  } else {
    Qp = compose(Kt, Cp)(Z, Zp);
    Qm = compose(Kt, Cm)(Z, Zp);
  }
  const cplx PdC = (Qp - Qm) / (2.0 * h);

  const cplx mu = transport_factor(path, t, d);
  const cplx mup = transport_factor(path, t + h, d);
  const cplx mum = transport_factor(path, t - h, d);
  const cplx rate = detail::transport_rate(path, J0s, t);  // mu'/mu

  const cplx Cval = Ct(Z, Zp);
  const double scale = std::max(1.0, std::abs(Cval));

  KernelIdentityResiduals r;
  r.projected_derivative = std::abs(PdC + rate * Cval) / scale;
  r.parallel_kernel = std::abs(mup * Qp - mum * Qm) / (2.0 * h) / scale;

  const Vec zero = Vec::Zero(2 * path.n());
  r.central_value = std::abs(mu * Ct(zero, zero) - 1.0 / std::conj(mu));

  auto half_det = [&](double s) {
    const Mat A = interpolation_operators(path.at(s), J0s).A;
    return sqrt_det_repos(A.cast<cplx>());
  };
  const cplx dd = (half_det(t + h) - half_det(t - h)) / (2.0 * h);
  // d/dt det(A_t^0)^{1/2} = -(1/4) Tr[A_t^0 G_0^{-1} dG] det(A_t^0)^{1/2},
  // and A_t^0 G_0^{-1} = S^{-1} with S = (G_t + G_0)/2.
  const Mat St = 0.5 * (Jt.metric + J0s.metric);
  const cplx rhs_norm =
      -0.25 * St.ldlt().solve(path.dmetric(t)).trace() * half_det(t);
  r.normalization = std::abs(dd - rhs_norm);
  return r;
}

}  // namespace btq
