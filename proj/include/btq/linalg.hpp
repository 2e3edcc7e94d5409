#pragma once
// Linear symplectic geometry over R^{2n}: compatible complex structures, the
// associated metrics, holomorphic/antiholomorphic projectors, two-structure
// interpolation operators, branch-tracked determinant square roots, and the
// Siegel parametrization of the space of compatible structures.
//
// Conventions (fixed once, used everywhere):
//   * Coordinates are ordered (x_1, y_1, x_2, y_2, ...).
//   * The standard complex structure J_std is block-diagonal with planes
//     [[0, -1], [1, 0]]; the symplectic form matrix is Omega = J_std^T, i.e.
//     Omega(u, v) = u^T Omega v, with Omega(e_x, e_y) = +1 in every plane.
//   * A compatible J has metric G(J) = -J_std * J (symmetric positive
//     definite, det G = 1) and J = J_std * G.
//   * V^{(1,0)}(J) = +i eigenspace of J, projector (I - iJ)/2.

#include <btq/error.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace btq {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

inline constexpr double kAlgTol = 1e-10;   // verification tolerance for exact algebraic identities
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr cplx kI{0.0, 1.0};

namespace detail {
inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}
}  // namespace detail

// ----------------------------------------------------------- standard frame

inline Mat standard_complex_structure(int n) {
  Mat J = Mat::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    J(2 * k, 2 * k + 1) = -1.0;
    J(2 * k + 1, 2 * k) = 1.0;
  }
  return J;
}

inline Mat standard_symplectic_form(int n) {
  return standard_complex_structure(n).transpose();
}

// Omega(u, v) = u^T Omega v.
inline double symplectic_pairing(const Vec& u, const Vec& v) {
  const int n = static_cast<int>(u.size()) / 2;
  double s = 0.0;
  for (int k = 0; k < n; ++k)
    s += u(2 * k) * v(2 * k + 1) - u(2 * k + 1) * v(2 * k);
  return s;
}

inline cplx symplectic_pairing(const CVec& u, const CVec& v) {
  const int n = static_cast<int>(u.size()) / 2;
  cplx s = 0.0;
  for (int k = 0; k < n; ++k)
    s += u(2 * k) * v(2 * k + 1) - u(2 * k + 1) * v(2 * k);
  return s;
}

inline bool is_symplectic(const Mat& S, double tol = kAlgTol) {
  const int n = static_cast<int>(S.rows()) / 2;
  const Mat Om = standard_symplectic_form(n);
  return (S.transpose() * Om * S - Om).cwiseAbs().maxCoeff() <= tol;
}

// ---------------------------------------------------- compatible structures

struct CompatibleStructure {
  int n = 0;
  Mat J;       // the complex structure, J*J = -I
  Mat metric;  // G = -J_std * J, symmetric positive definite

  // Validates J*J = -I, symplectic compatibility, and metric positivity.
  static CompatibleStructure validate(const Mat& J, double tol = kAlgTol) {
    require(J.rows() == J.cols() && J.rows() % 2 == 0, ErrorKind::DimensionMismatch,
            "complex structure must be square of even size");
    const int n = static_cast<int>(J.rows()) / 2;
    const Mat I2n = Mat::Identity(2 * n, 2 * n);
    const double sq = (J * J + I2n).cwiseAbs().maxCoeff();
    require(sq <= tol, ErrorKind::NotAlmostComplex,
            "J*J + I deviates from zero by " + detail::fmt(sq));
    const Mat Om = standard_symplectic_form(n);
    const double sp = (J.transpose() * Om * J - Om).cwiseAbs().maxCoeff();
    require(sp <= tol, ErrorKind::NotSymplectic,
            "J^T Omega J - Omega deviates from zero by " + detail::fmt(sp));
    Mat G = -standard_complex_structure(n) * J;
    const double asym = (G - G.transpose()).cwiseAbs().maxCoeff();
    require(asym <= tol, ErrorKind::NotSymplectic,
            "metric of J not symmetric, deviation " + detail::fmt(asym));
    G = 0.5 * (G + G.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > tol,
            ErrorKind::NotPositive,
            "metric of J not positive definite (min eigenvalue " +
                detail::fmt(es.info() == Eigen::Success ? es.eigenvalues().minCoeff()
                                                        : std::nan("")) + ")");
    return CompatibleStructure{n, J, G};
  }

  static CompatibleStructure standard(int n) {
    return CompatibleStructure{n, standard_complex_structure(n),
                               Mat::Identity(2 * n, 2 * n)};
  }
};

inline Mat metric_of(const Mat& J) {
  const int n = static_cast<int>(J.rows()) / 2;
  Mat G = -standard_complex_structure(n) * J;
  return 0.5 * (G + G.transpose());
}

inline Mat structure_of_metric(const Mat& G) {
  const int n = static_cast<int>(G.rows()) / 2;
  return standard_complex_structure(n) * G;
}

// Projector onto V^{(1,0)}(J), the +i eigenspace of J.
inline CMat projector_holo(const Mat& J) {
  const int m = static_cast<int>(J.rows());
  return 0.5 * (CMat::Identity(m, m) - kI * J.cast<cplx>());
}

// Projector onto V^{(0,1)}(J), the -i eigenspace of J.
inline CMat projector_antiholo(const Mat& J) {
  const int m = static_cast<int>(J.rows());
  return 0.5 * (CMat::Identity(m, m) + kI * J.cast<cplx>());
}

// ------------------------------------------------- interpolation operators
//
// For two compatible structures (J_a, J_b) the averaged-structure operator
//   A_a^b = ((I - J_b J_a) / 2)^{-1} = 2 (G_b + G_a)^{-1} G_b
// is real and invertible, and Pi_a^b = A_a^b P_b^{(1,0)} is the projector
// onto V_a^{(1,0)} along V_b^{(0,1)}.

struct Interpolation {
  Mat A;    // A_a^b, real
  CMat Pi;  // Pi_a^b = A_a^b * (I - i J_b)/2
};

inline Interpolation interpolation_operators(const CompatibleStructure& Ja,
                                             const CompatibleStructure& Jb) {
  require(Ja.n == Jb.n, ErrorKind::DimensionMismatch,
          "interpolation requires structures of equal dimension");
  const Mat sum = Jb.metric + Ja.metric;
  Eigen::PartialPivLU<Mat> lu(sum);
  const double rc = lu.rcond();
  require(rc > 1e-14, ErrorKind::SingularInterpolation,
          "metric sum nearly singular, rcond " + detail::fmt(rc));
  Mat A = 2.0 * lu.solve(Jb.metric);
  Interpolation out;
  out.A = A;
  out.Pi = A.cast<cplx>() * projector_holo(Jb.J);
  return out;
}

// ------------------------------------------- branch-tracked det square root
//
// Follows det(path(t)) continuously for t in [0, 1], refusing to step if the
// argument jumps by >= pi/2 between adjacent samples even after refinement.
// Returns det(path(1))^{1/2} on the branch continued from t = 0, where the
// branch is the principal square root of det(path(0)).

struct BranchedSqrtDet {
  cplx value;        // det(path(1))^{1/2}, branch-continued
  cplx det_start;    // det(path(0))
  cplx det_end;      // det(path(1))
  double total_arg;  // accumulated argument of det at t = 1
  int steps_used;
};

inline BranchedSqrtDet sqrt_det_tracked(const std::function<CMat(double)>& path,
                                        int steps = 64) {
  require(steps >= 1, ErrorKind::UsageError, "sqrt_det_tracked needs steps >= 1");
  constexpr int kMaxSteps = 1 << 14;
  for (int m = steps; m <= kMaxSteps; m *= 2) {
    std::vector<cplx> dets(static_cast<size_t>(m) + 1);
    bool ok = true;
    for (int k = 0; k <= m; ++k) {
      const cplx d = CMat(path(static_cast<double>(k) / m)).determinant();
      if (!(std::abs(d) > 1e-300)) {
        fail(ErrorKind::ZeroDeterminant,
             "determinant vanished along tracked family at t = " +
                 detail::fmt(static_cast<double>(k) / m));
      }
      dets[static_cast<size_t>(k)] = d;
    }
    double theta = std::arg(dets[0]);  // principal branch anchor at t = 0
    for (int k = 1; k <= m && ok; ++k) {
      const double inc = std::arg(dets[static_cast<size_t>(k)] /
                                  dets[static_cast<size_t>(k - 1)]);
      if (std::abs(inc) >= kPi / 2) {
        ok = false;  // refine
        break;
      }
      theta += inc;
    }
    if (!ok) continue;
    BranchedSqrtDet out;
    out.det_start = dets[0];
    out.det_end = dets[static_cast<size_t>(m)];
    out.total_arg = theta;
    out.steps_used = m;
    out.value = std::sqrt(std::abs(out.det_end)) * std::exp(kI * (theta / 2.0));
    return out;
  }
  fail(ErrorKind::BranchJump,
       "argument of det jumped by >= pi/2 between adjacent samples even at "
       "the maximal refinement");
}

// det(M)^{1/2} for a single complex matrix whose real part is positive
// definite: branch continued from the (SPD) real part.
inline BranchedSqrtDet sqrt_det_repos_tracked(const CMat& M) {
  const Mat re = M.real();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (re + re.transpose()));
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0,
          ErrorKind::NotPositive,
          "sqrt_det_repos requires a matrix with positive definite real part");
  const CMat R = re.cast<cplx>();
  const CMat Im = M - R;
  return sqrt_det_tracked([&](double t) { return CMat(R + t * Im); }, 16);
}

inline cplx sqrt_det_repos(const CMat& M) { return sqrt_det_repos_tracked(M).value; }

// ------------------------------------------------------------ SPD functional
// calculus (symmetric square roots of metrics and their inverses).

inline Mat spd_power(const Mat& G, double p) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (G + G.transpose()));
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0,
          ErrorKind::NotPositive, "spd_power requires positive definite input");
  Vec d = es.eigenvalues();
  for (int i = 0; i < d.size(); ++i) d(i) = std::pow(d(i), p);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

// ------------------------------------------------------ Siegel coordinates
//
// V^{(0,1)}(J) is the graph {(-Z w, w)} over the y-coordinates, with Z the
// n x n symmetric Siegel parameter, Im Z positive definite. For n = 1 the
// parameter is the classical upper-half-plane coordinate tau (tau = i is the
// standard structure), via
//   J_tau = (1/tau_2) [[-tau_1, -|tau|^2], [1, tau_1]].

inline CMat siegel_parameter(const CompatibleStructure& Js) {
  const int n = Js.n;
  // Columns of P^{(0,1)} applied to the y-basis vectors span V^{(0,1)}.
  CMat B(2 * n, n);
  const CMat P = projector_antiholo(Js.J);
  for (int j = 0; j < n; ++j) B.col(j) = P.col(2 * j + 1);
  CMat X(n, n), Y(n, n);
  for (int i = 0; i < n; ++i) {
    X.row(i) = B.row(2 * i);
    Y.row(i) = B.row(2 * i + 1);
  }
  Eigen::PartialPivLU<CMat> lu(Y.transpose().eval());
  CMat Z = -(lu.solve(X.transpose()).transpose());  // -X Y^{-1}
  const double asym = (Z - Z.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-8, ErrorKind::NotSymplectic,
          "Siegel parameter not symmetric, deviation " + detail::fmt(asym));
  Z = 0.5 * (Z + Z.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(Z.imag());
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0,
          ErrorKind::NotPositive, "Siegel parameter must have Im Z > 0");
  return Z;
}

inline CompatibleStructure structure_from_siegel(const CMat& Z) {
  const int n = static_cast<int>(Z.rows());
  require(Z.cols() == n, ErrorKind::DimensionMismatch, "Siegel parameter must be square");
  require((Z - Z.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          ErrorKind::UsageError, "Siegel parameter must be symmetric");
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(Z.imag()));
    require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0,
            ErrorKind::NotPositive, "Siegel parameter must have Im Z > 0");
  }
  // Basis of V^{(0,1)}: columns of [-Z; I] interleaved into (x_i, y_i) order.
  CMat B(2 * n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      B(2 * i, j) = -Z(i, j);
      B(2 * i + 1, j) = (i == j) ? 1.0 : 0.0;
    }
  }
  CMat T(2 * n, 2 * n);
  T.leftCols(n) = B;
  T.rightCols(n) = B.conjugate();
  CVec d(2 * n);
  for (int j = 0; j < n; ++j) d(j) = -kI;
  for (int j = n; j < 2 * n; ++j) d(j) = kI;
  const CMat Jc = T * d.asDiagonal() * T.inverse();
  require(Jc.imag().cwiseAbs().maxCoeff() <= 1e-9, ErrorKind::NotAlmostComplex,
          "reconstructed structure has a nontrivial imaginary part");
  return CompatibleStructure::validate(Jc.real(), 1e-8);
}

inline cplx upper_half_parameter(const CompatibleStructure& Js) {
  require(Js.n == 1, ErrorKind::DimensionMismatch,
          "upper_half_parameter is the n = 1 Siegel coordinate");
  return siegel_parameter(Js)(0, 0);
}

inline CompatibleStructure structure_from_tau(cplx tau) {
  require(tau.imag() > 0.0, ErrorKind::NotPositive,
          "upper-half-plane parameter needs Im tau > 0");
  const double t1 = tau.real(), t2 = tau.imag();
  Mat J(2, 2);
  J << -t1 / t2, -(t1 * t1 + t2 * t2) / t2, 1.0 / t2, t1 / t2;
  return CompatibleStructure::validate(J, 1e-9);
}

// Parameter of A J_tau A^{-1} for an integer symplectic A = [[a,b],[c,d]]
// acting on (x, y): the induced Moebius action (a tau - b) / (d - c tau).
inline cplx mapped_tau(const Mat& A, cplx tau) {
  require(A.rows() == 2 && A.cols() == 2, ErrorKind::DimensionMismatch,
          "mapped_tau expects a 2x2 matrix");
  require(std::abs(A.determinant() - 1.0) <= 1e-12, ErrorKind::NotSymplectic,
          "mapped_tau expects det A = 1");
  const double a = A(0, 0), b = A(0, 1), c = A(1, 0), d = A(1, 1);
  return (a * tau - b) / (d - c * tau);
}

// --------------------------------------------- metric-unitary (0,1) frames
//
// h_J(u, v) = conj(u)^T G_J v is a positive sesquilinear form on V^{(0,1)}.
// The frame below Gram-Schmidts the antiholomorphic projections of the
// y-basis vectors with positive diagonal normalizations; it varies smoothly
// along any smooth family of structures.

inline CMat antiholo_unitary_frame(const CompatibleStructure& Js) {
  const int n = Js.n;
  const CMat P = projector_antiholo(Js.J);
  const CMat G = Js.metric.cast<cplx>();
  CMat E(2 * n, n);
  for (int j = 0; j < n; ++j) {
    CVec v = P.col(2 * j + 1);
    for (int k = 0; k < j; ++k) {
      const cplx proj = (E.col(k).adjoint() * G * v)(0, 0);
      v -= proj * E.col(k);
    }
    const double nrm2 = std::real((v.adjoint() * G * v)(0, 0));
    require(nrm2 > 1e-20, ErrorKind::SingularInterpolation,
            "antiholomorphic frame degenerated during orthonormalization");
    E.col(j) = v / std::sqrt(nrm2);
  }
  return E;
}

// Matrix of a linear map acting between two (0,1) frames: solves
// E_target * C = L * E_source in the least-squares sense and verifies the
// residual (the image must lie in the span of the target frame).
inline CMat frame_matrix(const CMat& E_target, const CMat& L, const CMat& E_source) {
  const CMat rhs = L * E_source;
  Eigen::ColPivHouseholderQR<CMat> qr(E_target);
  const CMat C = qr.solve(rhs);
  const double resid = (E_target * C - rhs).cwiseAbs().maxCoeff();
  require(resid <= 1e-8, ErrorKind::DimensionMismatch,
          "frame_matrix: image not contained in the target subspace, residual " +
              detail::fmt(resid));
  return C;
}

// --------------------------------------------------------------- randomness
//
// Moderately conditioned random compatible structures through random Siegel
// parameters: Z = A + i B with A symmetric, B SPD with eigenvalues in a band.

inline CompatibleStructure random_compatible_structure(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> ua(-0.7, 0.7);
  Mat A(n, n), B0(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      A(i, j) = ua(rng);
      B0(i, j) = ua(rng);
    }
  A = 0.5 * (A + A.transpose()).eval();
  Mat B = Mat::Identity(n, n) + 0.35 * (B0 + B0.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(B);
  Vec d = es.eigenvalues();
  for (int i = 0; i < d.size(); ++i) d(i) = std::min(std::max(d(i), 0.45), 2.2);
  B = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  CMat Z = A.cast<cplx>() + kI * B.cast<cplx>();
  return structure_from_siegel(Z);
}

inline Mat random_symplectic(std::mt19937_64& rng, int n, double scale = 0.4) {
  std::uniform_real_distribution<double> ua(-1.0, 1.0);
  Mat S0(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j) S0(i, j) = ua(rng);
  const Mat Sym = 0.5 * (S0 + S0.transpose());
  const Mat H = scale * standard_complex_structure(n) * Sym;  // Hamiltonian
  // exp(H) is symplectic for Hamiltonian H; scaling-and-squaring via Eigen.
  Mat E = Mat::Identity(2 * n, 2 * n);
  Mat term = Mat::Identity(2 * n, 2 * n);
  const int kSquarings = 6;
  const Mat Hs = H / static_cast<double>(1 << kSquarings);
  for (int k = 1; k <= 16; ++k) {
    term = (term * Hs / static_cast<double>(k)).eval();
    E += term;
  }
  for (int s = 0; s < kSquarings; ++s) E = (E * E).eval();
  return E;
}

}  // namespace btq
