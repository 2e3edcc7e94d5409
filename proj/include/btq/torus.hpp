#pragma once
// Exact quantization of the flat two-torus R^2/Z^2 with symplectic form
// dx ^ dy at integer level p: theta bases of the p-dimensional spaces of
// holomorphic sections, L^2 Gram and Toeplitz pairings on periodic grids,
// parallel transport of the L^2 connection along modulus segments,
// quantized integral symplectic maps, and trace studies comparing exact
// traces with the fixed-point predictions of the linear calculus.
//
// Conventions. The complex coordinate at modulus tau (Im tau > 0) is
// z = x + tau y, matching structure_from_tau: the (0,1) direction is
// tau d_x - d_y, and an integer symplectic A carries J_tau to J_tau' with
// tau' = mapped_tau(A, tau). The prequantum connection uses the symmetric
// potential alpha = (-y/2, x/2), i.e. nabla = d - 2 pi i p (a1 dx + a2 dy),
// of curvature -2 pi i p dx ^ dy; the deck multipliers are then
//   psi(x+1, y) = exp( i pi p y) psi(x, y),
//   psi(x, y+1) = exp(-i pi p x) psi(x, y),
// and the level-p theta sections
//   psi_j(x, y) = sum_k exp(i pi p [tau q^2 + 2 x q - x y]),  q = k + j/p + y,
// satisfy both identities and the holomorphy equation term by term.

#include <btq/error.hpp>
#include <btq/fixed_point.hpp>
#include <btq/linalg.hpp>
#include <btq/structure_path.hpp>
#include <btq/transport.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace btq {

// ------------------------------------------------------------ bundle gauge

// The fixed symmetric gauge for the level-p bundle. The potential is linear,
// so its curvature coefficient d_x(a2) - d_y(a1) = 1/2 + 1/2 is exact.
struct LineBundleGauge {
  int p = 1;

  static double alpha1(double /*x*/, double y) { return -0.5 * y; }
  static double alpha2(double x, double /*y*/) { return 0.5 * x; }
  static double curvature_coefficient() { return 1.0; }

  cplx m1(double /*x*/, double y) const { return std::exp(kI * kPi * double(p) * y); }
  cplx m2(double x, double /*y*/) const { return std::exp(-kI * kPi * double(p) * x); }

  // Multiplier of the deck translation by an integer vector u, so that
  // psi(v + u) = deck(v, u) psi(v) for every section.
  cplx deck(double x, double y, long long u1, long long u2) const {
    const double e = double(u1) * y - double(u2) * x - double(u1) * double(u2);
    return std::exp(kI * kPi * double(p) * e);
  }

  // Ratio of the two ways around the fundamental-domain corner; equals
  // exp(2 pi i p) = 1 for every integer level.
  cplx corner_commutator(double x, double y) const {
    return m1(x, y + 1.0) * m2(x, y) / (m2(x + 1.0, y) * m1(x, y));
  }
};

struct TorusGeometry {
  int p = 1;
  cplx tau = cplx(0.0, 1.0);
  LineBundleGauge gauge{};

  static TorusGeometry validate(int p, cplx tau) {
    require(p >= 1, ErrorKind::UsageError, "level p must be a positive integer");
    require(tau.imag() > 0.0, ErrorKind::NotPositive,
            "torus modulus needs Im tau > 0");
    return TorusGeometry{p, tau, LineBundleGauge{p}};
  }
};

// ------------------------------------------------------------- theta basis

namespace torus_detail {

// Smallest safe lattice window: dropped terms have |k + j/p + y| >= K - 1
// over the fundamental cell, so their size is below exp(-pi p t2 (K-1)^2).
inline int auto_truncation(int p, double tau2) {
  const double need = 16.0 * std::log(10.0) / (kPi * double(p) * tau2);
  return std::max(3, 1 + static_cast<int>(std::ceil(std::sqrt(need))));
}

inline int default_grid(int p) { return std::max(64, 8 * p); }

inline void check_grid(int p, int N) {
  require(N >= default_grid(p), ErrorKind::GridTooCoarse,
          "grid must have at least max(64, 8p) nodes per axis");
}

// Values of the lattice-sum coefficients c_{j,k}(y_b) = exp(i pi p tau q^2),
// q = k + j/p + y_b, on the y-grid; the x-dependence of the sections is the
// pure frequency exp(2 pi i x (p k + j)) times the shared gauge factor
// exp(i pi p x y), so these tables determine every grid pairing exactly.
struct ThetaTables {
  int p = 0, K = 0, N = 0;
  cplx tau;
  std::vector<cplx> c;

  const cplx& at(int j, int kk, int b) const {
    return c[(static_cast<size_t>(j) * (2 * K + 1) + kk) * N + b];
  }
  cplx& at(int j, int kk, int b) {
    return c[(static_cast<size_t>(j) * (2 * K + 1) + kk) * N + b];
  }
};

inline ThetaTables build_tables(int p, cplx tau, int K, int N) {
  ThetaTables T;
  T.p = p, T.K = K, T.N = N, T.tau = tau;
  T.c.resize(static_cast<size_t>(p) * (2 * K + 1) * N);
  const cplx ipp = kI * kPi * double(p);
  for (int j = 0; j < p; ++j)
    for (int k = -K; k <= K; ++k)
      for (int b = 0; b < N; ++b) {
        const double q = double(k) + double(j) / p + double(b) / N;
        T.at(j, k + K, b) = std::exp(ipp * tau * (q * q));
      }
  return T;
}

// Exact reorganization of the N x N trapezoid pairing
//   (1/N^2) sum_{a,b} conj(psi_i(x_a, y_b)) chi_j(x_a, y_b):
// the gauge factors cancel and the x-sum of each frequency pair is N times
// the indicator of p(l - k) + (j - i) == 0 (mod N), aliases included.
inline CMat structured_pairing(const ThetaTables& Ta, const ThetaTables& Tb) {
  require(Ta.p == Tb.p && Ta.K == Tb.K && Ta.N == Tb.N,
          ErrorKind::DimensionMismatch,
          "paired theta tables must share level, window, and grid");
  const int p = Ta.p, K = Ta.K, N = Ta.N;
  CMat out = CMat::Zero(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      cplx acc = 0.0;
      for (int d = -2 * K; d <= 2 * K; ++d) {
        if ((static_cast<long long>(p) * d + j - i) % N != 0) continue;
        const int klo = std::max(-K, -K - d), khi = std::min(K, K - d);
        for (int k = klo; k <= khi; ++k)
          for (int b = 0; b < N; ++b)
            acc += std::conj(Ta.at(i, k + K, b)) * Tb.at(j, k + d + K, b);
      }
      out(i, j) = acc / double(N);
    }
  return out;
}

}  // namespace torus_detail

struct ThetaBasis {
  TorusGeometry geom;
  int K = 0;

  // Pointwise lattice sum with the window recentred on the argument, so the
  // evaluation stays accurate a few cells outside the fundamental domain.
  cplx value(int j, double x, double y) const {
    const int p = geom.p;
    const cplx ipp = kI * kPi * double(p);
    const int c0 = -static_cast<int>(std::lround(y + double(j) / p));
    cplx acc = 0.0;
    for (int k = c0 - K - 2; k <= c0 + K + 2; ++k) {
      const double q = double(k) + double(j) / p + y;
      acc += std::exp(ipp * (geom.tau * (q * q) + 2.0 * x * q - x * y));
    }
    return acc;
  }

  // Section values on the uniform N x N grid, one column per basis index,
  // the grid point (a, b) in row a*N + b.
  CMat grid_matrix(int N) const {
    torus_detail::check_grid(geom.p, N);
    const int p = geom.p;
    const auto tab = torus_detail::build_tables(p, geom.tau, K, N);
    std::vector<cplx> W(N);
    for (int m = 0; m < N; ++m)
      W[m] = std::exp(cplx(0.0, 2.0 * kPi * double(m) / N));
    CMat out(N * N, p);
    for (int j = 0; j < p; ++j)
      for (int a = 0; a < N; ++a) {
        for (int b = 0; b < N; ++b) {
          cplx acc = 0.0;
          for (int k = -K; k <= K; ++k) {
            const long long m = static_cast<long long>(a) * (static_cast<long long>(p) * k + j);
            acc += tab.at(j, k + K, b) * W[static_cast<int>(((m % N) + N) % N)];
          }
          const cplx E = std::exp(kI * kPi * double(p) * double(a) * double(b) /
                                  (double(N) * double(N)));
          out(a * N + b, j) = E * acc;
        }
      }
    return out;
  }
};

inline ThetaBasis theta_basis(int p, cplx tau, int K = 0) {
  const auto geom = TorusGeometry::validate(p, tau);
  const int Kmin = torus_detail::auto_truncation(p, tau.imag());
  if (K == 0) K = Kmin;
  require(std::exp(-kPi * p * tau.imag() * double(K - 1) * double(K - 1)) < 1e-14,
          ErrorKind::TruncationTooSmall,
          "lattice window too small for the stated tail tolerance");
  ThetaBasis basis{geom, K};

  // Quasi-periodicity at boundary sample points, against both multipliers.
  std::mt19937_64 g(12021);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < 25; ++s) {
    const double x = u(g), y = u(g);
    const int j = s % p;
    const cplx v = basis.value(j, x, y);
    // Sections are sums of at most 2K+1 unit-modulus-bounded terms but have
    // zeros, so residuals are measured against an order-one scale.
    const double scale = std::max(1.0, std::abs(v));
    worst = std::max(worst,
                     std::abs(basis.value(j, x + 1.0, y) - geom.gauge.m1(x, y) * v) / scale);
    worst = std::max(worst,
                     std::abs(basis.value(j, x, y + 1.0) - geom.gauge.m2(x, y) * v) / scale);
  }
  require(worst <= 1e-10, ErrorKind::PeriodicityFailure,
          "theta sections fail quasi-periodicity: residual " + detail::fmt(worst));

  // Holomorphy: the (0,1) part of the connection derivative, computed with
  // five-point finite differences, must vanish against the section scale.
  const double h = 1e-5;
  auto d5 = [&](const std::function<cplx(double)>& f) {
    return (-f(2 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2 * h)) / (12.0 * h);
  };
  worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    const double x = u(g), y = u(g);
    const int j = s % p;
    const cplx v = basis.value(j, x, y);
    const cplx dx = d5([&](double e) { return basis.value(j, x + e, y); });
    const cplx dy = d5([&](double e) { return basis.value(j, x, y + e); });
    const cplx ipp = kI * kPi * double(p);
    const cplx res = geom.tau * (dx + ipp * y * v) - (dy - ipp * x * v);
    const double scale =
        kPi * p * std::max({1.0, std::abs(v), std::abs(dx), std::abs(dy)});
    worst = std::max(worst, std::abs(res) / scale);
  }
  require(worst <= 1e-8, ErrorKind::HolomorphyFailure,
          "theta sections fail the holomorphy residual: " + detail::fmt(worst));
  return basis;
}

// -------------------------------------------------------------- L^2 pairings

// Gram matrix of the basis by the periodic trapezoid rule.
inline CMat gram(const ThetaBasis& basis, int N = 0) {
  if (N == 0) N = torus_detail::default_grid(basis.geom.p);
  const CMat Psi = basis.grid_matrix(N);
  return CMat(Psi.adjoint() * Psi) / (double(N) * double(N));
}

// Largest entry change when the grid is doubled: the convergence witness.
inline double gram_doubling_defect(const ThetaBasis& basis, int N = 0) {
  if (N == 0) N = torus_detail::default_grid(basis.geom.p);
  return (gram(basis, N) - gram(basis, 2 * N)).cwiseAbs().maxCoeff();
}

namespace torus_detail {

inline CMat hermitian_power(const CMat& G, double expo) {
  const CMat H = 0.5 * (G + G.adjoint());
  require((G - H).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, G.cwiseAbs().maxCoeff()),
          ErrorKind::NotPositive, "Gram matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(H);
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0,
          ErrorKind::NotPositive, "Gram matrix is not positive definite");
  CVec d(es.eigenvalues().size());
  for (int i = 0; i < d.size(); ++i) d(i) = std::pow(es.eigenvalues()(i), expo);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace torus_detail

// A p x p coefficient matrix between theta frames, carrying the Gram data of
// its domain and codomain so norms can be taken in the L^2 inner products.
struct OperatorMatrix {
  CMat matrix;
  cplx tau_domain, tau_codomain;
  CMat gram_domain, gram_codomain;

  CMat whitened() const {
    return torus_detail::hermitian_power(gram_codomain, 0.5) * matrix *
           torus_detail::hermitian_power(gram_domain, -0.5);
  }
  double whitened_norm() const {
    Eigen::JacobiSVD<CMat> svd(whitened());
    return svd.singularValues().maxCoeff();
  }
  double unitary_defect() const {
    Eigen::JacobiSVD<CMat> svd(whitened());
    return (svd.singularValues().array() - 1.0).abs().maxCoeff();
  }
};

// Matrix of P_b f P_a between the two theta frames: G_b^{-1} <psi_b, f psi_a>
// with the bracket computed by the periodic trapezoid rule.
inline OperatorMatrix toeplitz_matrix(const std::function<cplx(double, double)>& f,
                                      const ThetaBasis& basis_b,
                                      const ThetaBasis& basis_a, int N = 0) {
  require(basis_b.geom.p == basis_a.geom.p, ErrorKind::DimensionMismatch,
          "Toeplitz pairing needs a shared level");
  const int p = basis_a.geom.p;
  if (N == 0) N = torus_detail::default_grid(p);
  const CMat Pb = basis_b.grid_matrix(N);
  CMat Pa = basis_a.grid_matrix(N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      Pa.row(a * N + b) *= f(double(a) / N, double(b) / N);
  const double w = 1.0 / (double(N) * double(N));
  const CMat bracket = CMat(Pb.adjoint() * Pa) * w;
  const CMat Gb = CMat(Pb.adjoint() * Pb) * w;
  const CMat Ga = gram(basis_a, N);
  OperatorMatrix out;
  out.matrix = Gb.ldlt().solve(bracket);
  out.tau_domain = basis_a.geom.tau;
  out.tau_codomain = basis_b.geom.tau;
  out.gram_domain = Ga;
  out.gram_codomain = Gb;
  return out;
}

// ------------------------------------------------------ L^2-connection ODE

// Parallel transport of the L^2 connection along the straight modulus
// segment tau0 -> tau1: solves dT/dt = -C(t) T for the coefficient matrix in
// the moving theta frame, C(t) = G_t^{-1} <psi_t, d_t psi_t> with the
// t-derivative taken by centered differences and every bracket evaluated as
// the exact trapezoid pairing on the N x N grid. A doubled-step rerun must
// agree to disc.tol.
inline OperatorMatrix l2_transport(int p, cplx tau0, cplx tau1, int N = 0,
                                   const PathDiscretization& disc = {}) {
  const auto basis0 = theta_basis(p, tau0);
  const auto basis1 = theta_basis(p, tau1);
  if (N == 0) N = torus_detail::default_grid(p);
  torus_detail::check_grid(p, N);
  const int K = torus_detail::auto_truncation(p, std::min(tau0.imag(), tau1.imag()));

  OperatorMatrix out;
  out.matrix = CMat::Identity(p, p);
  out.tau_domain = tau0;
  out.tau_codomain = tau1;
  out.gram_domain = gram(basis0, N);
  out.gram_codomain = gram(basis1, N);
  if (std::abs(tau1 - tau0) == 0.0) return out;  // d_t psi = 0, so C = 0

  const double hfd = 1e-4;
  auto tau_at = [&](double t) { return tau0 + t * (tau1 - tau0); };
  auto connection = [&](double t) {
    using torus_detail::build_tables;
    const auto tab0 = build_tables(p, tau_at(t), K, N);
    const auto tabp = build_tables(p, tau_at(t + hfd), K, N);
    const auto tabm = build_tables(p, tau_at(t - hfd), K, N);
    torus_detail::ThetaTables dot = tab0;
    for (size_t i = 0; i < dot.c.size(); ++i)
      dot.c[i] = (tabp.c[i] - tabm.c[i]) / (2.0 * hfd);
    const CMat G = torus_detail::structured_pairing(tab0, tab0);
    const CMat B = torus_detail::structured_pairing(tab0, dot);
    return CMat(G.ldlt().solve(B));
  };

  // All RK4 stage times of both runs are dyadic points m / (4 steps).
  const int S = disc.steps;
  std::vector<std::optional<CMat>> memo(4 * S + 1);
  auto C_at = [&](int m) -> const CMat& {
    if (!memo[m]) memo[m] = connection(double(m) / double(4 * S));
    return *memo[m];
  };
  auto run = [&](int steps) {
    const int stride = 4 * S / steps;
    const double h = 1.0 / steps;
    CMat T = CMat::Identity(p, p);
    for (int n = 0; n < steps; ++n) {
      const CMat& C0 = C_at(n * stride);
      const CMat& Ch = C_at(n * stride + stride / 2);
      const CMat& C1 = C_at((n + 1) * stride);
      const CMat k1 = -C0 * T;
      const CMat k2 = -Ch * (T + 0.5 * h * k1);
      const CMat k3 = -Ch * (T + 0.5 * h * k2);
      const CMat k4 = -C1 * (T + h * k3);
      T += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return T;
  };
  const CMat coarse = run(S);
  const CMat fine = run(2 * S);
  require((coarse - fine).cwiseAbs().maxCoeff() <= disc.tol,
          ErrorKind::ConvergenceFailure,
          "transport ODE failed its step-doubling check");
  out.matrix = fine;
  return out;
}

// ------------------------------------------------------- quantized mappings

// A level-p lift of v -> A v + w exists exactly when both diagonal products
// of the linear part have even level multiples.
inline bool lift_compatible(const Mat& A, int p) {
  const long long a = llround(A(0, 0)), b = llround(A(0, 1));
  const long long c = llround(A(1, 0)), d = llround(A(1, 1));
  return (p * a * c) % 2 == 0 && (p * b * d) % 2 == 0;
}

namespace torus_detail {

inline void check_integer_map(const Mat& A) {
  require(A.rows() == 2 && A.cols() == 2, ErrorKind::DimensionMismatch,
          "torus maps are 2 x 2");
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      require(std::abs(A(i, j) - std::nearbyint(A(i, j))) <= 1e-12,
              ErrorKind::UsageError, "torus maps need integer entries");
  require(std::abs(A.determinant() - 1.0) <= 1e-12, ErrorKind::NotSymplectic,
          "torus maps need determinant one");
}

// Translation part of the lift multiplier: exp(i pi p Omega(A^{-1} w, v)).
inline cplx lift_phase(const Mat& A, const std::array<double, 2>& w, int p,
                       double x, double y) {
  const Mat Ainv = A.inverse();
  const double w1 = Ainv(0, 0) * w[0] + Ainv(0, 1) * w[1];
  const double w2 = Ainv(1, 0) * w[0] + Ainv(1, 1) * w[1];
  return std::exp(kI * kPi * double(p) * (w1 * y - w2 * x));
}

// Value of the composed quasi-periodic pullback at an arbitrary point.
inline cplx pullback_value(const ThetaBasis& source, const Mat& A,
                           const std::array<double, 2>& w, int j, double x,
                           double y) {
  const int p = source.geom.p;
  const double xs = A(0, 0) * x + A(0, 1) * y + w[0];
  const double ys = A(1, 0) * x + A(1, 1) * y + w[1];
  return lift_phase(A, w, p, x, y) * source.value(j, xs, ys);
}

}  // namespace torus_detail

// Matrix of the pullback phi*: H_p(A tau) -> H_p(tau) for phi(v) = A v + w,
// with the connection-preserving lift normalized to phase one at the origin.
inline OperatorMatrix pullback_matrix(const Mat& A, const ThetaBasis& basis_target,
                                      const ThetaBasis& basis_source, int N = 0,
                                      const std::array<double, 2>& w = {0.0, 0.0}) {
  torus_detail::check_integer_map(A);
  require(basis_target.geom.p == basis_source.geom.p, ErrorKind::DimensionMismatch,
          "pullback needs a shared level");
  const int p = basis_target.geom.p;
  require(lift_compatible(A, p), ErrorKind::LiftInconsistent,
          "the linear part admits no level-" + std::to_string(p) + " lift");
  require(std::abs(basis_source.geom.tau - mapped_tau(A, basis_target.geom.tau)) <= 1e-10,
          ErrorKind::UsageError,
          "source modulus must be the mapped modulus of the target");
  if (N == 0) N = torus_detail::default_grid(p);
  torus_detail::check_grid(p, N);
  for (double wi : w)
    require(std::abs(wi * N - std::nearbyint(wi * N)) <= 1e-9, ErrorKind::UsageError,
            "translation part must be representable on the grid");

  // Connection preservation and quasi-periodicity of the lifted sections,
  // checked pointwise before any pairing is formed.
  {
    std::mt19937_64 g(47);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& gauge = basis_target.geom.gauge;
    double worst = 0.0;
    for (int s = 0; s < 25; ++s) {
      const double x = u(g), y = u(g);
      const int j = s % p;
      const cplx v = torus_detail::pullback_value(basis_source, A, w, j, x, y);
      const double scale = std::max(1.0, std::abs(v));
      const cplx vx = torus_detail::pullback_value(basis_source, A, w, j, x + 1.0, y);
      const cplx vy = torus_detail::pullback_value(basis_source, A, w, j, x, y + 1.0);
      worst = std::max(worst, std::abs(vx - gauge.m1(x, y) * v) / scale);
      worst = std::max(worst, std::abs(vy - gauge.m2(x, y) * v) / scale);
    }
    require(worst <= 1e-6, ErrorKind::LiftInconsistent,
            "lifted sections fail quasi-periodicity: residual " + detail::fmt(worst));
  }

  const CMat Pt = basis_target.grid_matrix(N);
  const CMat Ps = basis_source.grid_matrix(N);
  const long long a00 = llround(A(0, 0)), a01 = llround(A(0, 1));
  const long long a10 = llround(A(1, 0)), a11 = llround(A(1, 1));
  const long long W1 = llround(w[0] * N), W2 = llround(w[1] * N);
  const auto& gauge = basis_target.geom.gauge;
  CMat Phi(N * N, p);
  for (long long a = 0; a < N; ++a)
    for (long long b = 0; b < N; ++b) {
      const long long nx = a00 * a + a01 * b + W1;
      const long long ny = a10 * a + a11 * b + W2;
      const long long ax = ((nx % N) + N) % N, by = ((ny % N) + N) % N;
      const long long u1 = (nx - ax) / N, u2 = (ny - by) / N;
      const cplx factor =
          torus_detail::lift_phase(A, w, p, double(a) / N, double(b) / N) *
          gauge.deck(double(ax) / N, double(by) / N, u1, u2);
      Phi.row(a * N + b) = factor * Ps.row(ax * N + by);
    }
  const double wq = 1.0 / (double(N) * double(N));
  const CMat bracket = CMat(Pt.adjoint() * Phi) * wq;
  const CMat Gt = CMat(Pt.adjoint() * Pt) * wq;
  OperatorMatrix out;
  out.matrix = Gt.ldlt().solve(bracket);
  out.tau_domain = basis_source.geom.tau;
  out.tau_codomain = basis_target.geom.tau;
  out.gram_domain = CMat(Ps.adjoint() * Ps) * wq;
  out.gram_codomain = Gt;
  return out;
}

// ------------------------------------------------- fixed sets on the torus

// Fixed components of v -> A v + w on the torus, packaged as linear data for
// the trace prediction: the structure path runs from J_tau to the mapped
// structure, mu is the transport factor along it, and each component carries
// the level-one lift multiplier (whose level-p value is its p-th power).
struct TorusFixedComponents {
  std::vector<FixedComponentDatum> components;
  std::vector<std::array<double, 2>> anchors;  // one sample point per component
  int max_dim = 0;
  bool fixed_point_free = false;
};

namespace torus_detail {

inline cplx lambda_level1(const Mat& A, const std::array<double, 2>& w, double x,
                          double y) {
  const double vx = A(0, 0) * x + A(0, 1) * y + w[0];
  const double vy = A(1, 0) * x + A(1, 1) * y + w[1];
  const double u1d = x - vx, u2d = y - vy;
  const long long u1 = llround(u1d), u2 = llround(u2d);
  require(std::abs(u1d - u1) <= 1e-9 && std::abs(u2d - u2) <= 1e-9,
          ErrorKind::UsageError, "lift multiplier requested off the fixed set");
  LineBundleGauge g1{1};
  return lift_phase(A, w, 1, x, y) / g1.deck(vx, vy, u1, u2);
}

inline long long igcd(long long a, long long b) { return std::gcd(std::llabs(a), std::llabs(b)); }

}  // namespace torus_detail

inline TorusFixedComponents torus_fixed_components(const Mat& A, cplx tau,
                                                   const std::array<double, 2>& w = {0.0, 0.0},
                                                   const PathDiscretization& disc = {}) {
  torus_detail::check_integer_map(A);
  const auto J0 = structure_from_tau(tau);
  const cplx tau1 = mapped_tau(A, tau);
  const auto path = StructurePath::upper_half_segment(tau, tau1);
  const Mat B = A - Mat::Identity(2, 2);
  const double detB = B.determinant();

  TorusFixedComponents out;
  auto base_datum = [&]() {
    return FixedPointDatum::from_map(A, J0, path, 1.0, disc);
  };

  if (std::abs(detB) > 0.5) {
    // Isolated fixed points: x = B^{-1}(m - w) for integer m, |det B| of
    // them modulo the lattice.
    const int count = static_cast<int>(llround(std::abs(detB)));
    const int L = static_cast<int>(std::ceil(B.cwiseAbs().sum() + std::abs(w[0]) +
                                             std::abs(w[1]))) + 2;
    const Mat Binv = B.inverse();
    std::vector<std::array<double, 2>> pts;
    for (int m1 = -L; m1 <= L && static_cast<int>(pts.size()) < count; ++m1)
      for (int m2 = -L; m2 <= L && static_cast<int>(pts.size()) < count; ++m2) {
        double x = Binv(0, 0) * (m1 - w[0]) + Binv(0, 1) * (m2 - w[1]);
        double y = Binv(1, 0) * (m1 - w[0]) + Binv(1, 1) * (m2 - w[1]);
        x -= std::floor(x), y -= std::floor(y);
        if (x > 1.0 - 1e-9) x = 0.0;
        if (y > 1.0 - 1e-9) y = 0.0;
        bool dup = false;
        for (const auto& q : pts)
          dup = dup || (std::abs(q[0] - x) < 1e-9 && std::abs(q[1] - y) < 1e-9);
        if (!dup) pts.push_back({x, y});
      }
    require(static_cast<int>(pts.size()) == count, ErrorKind::UsageError,
            "fixed-point enumeration did not reach |det(A - I)| points");
    const auto base = base_datum();
    for (const auto& q : pts) {
      FixedComponentDatum comp;
      comp.base = base;
      comp.base.lambda = torus_detail::lambda_level1(A, w, q[0], q[1]);
      comp.fixed_subspace = Mat(2, 0);
      comp.N_subspace = Mat::Identity(2, 2);
      comp.density_ratio = density_ratio_linear(comp.fixed_subspace,
                                                comp.N_subspace, J0.metric);
      comp.volume = 1.0;
      out.components.push_back(comp);
      out.anchors.push_back(q);
    }
    return out;
  }

  if (B.cwiseAbs().maxCoeff() <= 1e-12) {
    // Pure translation. A nonzero shift is fixed-point free; the identity
    // map has no localized prediction at all.
    const bool trivial = std::abs(w[0] - std::nearbyint(w[0])) <= 1e-12 &&
                         std::abs(w[1] - std::nearbyint(w[1])) <= 1e-12;
    require(!trivial, ErrorKind::UsageError,
            "the identity map does not localize at fixed points");
    out.fixed_point_free = true;
    return out;
  }

  // Rank-one B: the fixed set is a union of parallel primitive circles.
  require(std::abs(w[0]) + std::abs(w[1]) <= 1e-12, ErrorKind::UsageError,
          "affine maps with parabolic linear part are not supported");
  long long r1, r2;
  if (llround(B(0, 0)) != 0 || llround(B(0, 1)) != 0)
    r1 = llround(B(0, 0)), r2 = llround(B(0, 1));
  else
    r1 = llround(B(1, 0)), r2 = llround(B(1, 1));
  const long long gr = torus_detail::igcd(r1, r2);
  r1 /= gr, r2 /= gr;
  // B = v r^T for an integer column v; the number of circles is gcd(v).
  long long v1, v2;
  if (r1 != 0)
    v1 = llround(B(0, 0)) / r1, v2 = llround(B(1, 0)) / r1;
  else
    v1 = llround(B(0, 1)) / r2, v2 = llround(B(1, 1)) / r2;
  const long long g = torus_detail::igcd(v1, v2);
  const double rr = double(r1 * r1 + r2 * r2);
  const Mat tangent = (Mat(2, 1) << double(r2), double(-r1)).finished();
  const Mat normal = (Mat(2, 1) << double(r1), double(r2)).finished();
  const auto base = base_datum();
  for (long long m = 0; m < g; ++m) {
    const std::array<double, 2> x0 = {double(m) / g * r1 / rr,
                                      double(m) / g * r2 / rr};
    cplx lam = torus_detail::lambda_level1(A, w, x0[0], x0[1]);
    for (int s = 1; s <= 6; ++s) {
      const double t = double(s) / 7.0;
      const cplx ls = torus_detail::lambda_level1(A, w, x0[0] + t * tangent(0, 0),
                                                  x0[1] + t * tangent(1, 0));
      require(std::abs(ls - lam) <= 1e-12, ErrorKind::UsageError,
              "lift multiplier is not constant along a fixed circle");
    }
    FixedComponentDatum comp;
    comp.base = base;
    comp.base.lambda = lam;
    comp.fixed_subspace = tangent;
    comp.N_subspace = normal;
    comp.density_ratio = density_ratio_linear(tangent, normal, J0.metric);
    comp.volume = 1.0;  // the primitive tangent closes the circle at time one
    out.components.push_back(comp);
    out.anchors.push_back(x0);
    out.max_dim = 1;
  }
  return out;
}

// --------------------------------------------------------------- studies

inline double fit_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size() && xs.size() >= 2, ErrorKind::UsageError,
          "slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    require(xs[i] > 0.0 && ys[i] > 0.0, ErrorKind::UsageError,
            "slope fit needs positive data");
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  const double n = double(xs.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Sum of squared residuals of the best affine fit of log y against log p
// with the slope FIXED: used for model comparison between decay exponents.
inline double fixed_slope_fit_sse(const std::vector<double>& xs,
                                  const std::vector<double>& ys, double slope) {
  require(xs.size() == ys.size() && xs.size() >= 2, ErrorKind::UsageError,
          "fit needs at least two points");
  double c = 0.0;
  for (size_t i = 0; i < xs.size(); ++i)
    c += std::log(ys[i]) - slope * std::log(xs[i]);
  c /= double(xs.size());
  double sse = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = std::log(ys[i]) - slope * std::log(xs[i]) - c;
    sse += r * r;
  }
  return sse;
}

struct TraceRecord {
  int p = 0;
  cplx trace;
  cplx prediction;
  double residual = 0.0;
};

struct TraceStudy {
  std::vector<TraceRecord> records;
  int component_dim = 0;          // largest fixed-component dimension
  bool fixed_point_free = false;  // map has no fixed points; prediction is 0
  bool below_floor = false;       // residuals at the numerical noise floor
  double residual_slope = 0.0;  // fit of log |trace - prediction| vs log p
  double normalized_slope = 0.0;  // same after dividing by p^{d/2}
};

// Exact trace of the quantized map against the fixed-point prediction.
inline TraceStudy trace_study(const Mat& A, cplx tau, const std::vector<int>& p_list,
                              const std::array<double, 2>& w = {0.0, 0.0},
                              const PathDiscretization& disc = {}) {
  require(!p_list.empty(), ErrorKind::UsageError, "trace study needs levels");
  const cplx tau1 = mapped_tau(A, tau);
  const auto fixed = torus_fixed_components(A, tau, w, disc);

  TraceStudy out;
  out.component_dim = fixed.max_dim;
  out.fixed_point_free = fixed.fixed_point_free;
  for (int p : p_list) {
    const auto basis_t = theta_basis(p, tau);
    const auto basis_s = theta_basis(p, tau1);
    const auto T = l2_transport(p, tau, tau1, 0, disc);
    const auto Phi = pullback_matrix(A, basis_t, basis_s, 0, w);
    TraceRecord rec;
    rec.p = p;
    rec.trace = (Phi.matrix * T.matrix).trace();
    rec.prediction = fixed.fixed_point_free
                         ? cplx(0.0, 0.0)
                         : trace_prediction(fixed.components, p);
    rec.residual = std::abs(rec.trace - rec.prediction);
    out.records.push_back(rec);
  }

  std::vector<double> ps, rs, rs_norm;
  for (const auto& rec : out.records) {
    const double floor = 1e-12 * std::max(1.0, std::abs(rec.trace));
    if (rec.residual <= floor) continue;
    ps.push_back(double(rec.p));
    rs.push_back(rec.residual);
    rs_norm.push_back(rec.residual / std::pow(double(rec.p), 0.5 * out.component_dim));
  }
  if (ps.size() < 3) {
    out.below_floor = true;
  } else {
    out.residual_slope = fit_log_slope(ps, rs);
    out.normalized_slope = fit_log_slope(ps, rs_norm);
  }
  return out;
}

struct ApproxRecord {
  int p = 0;
  double deviation = 0.0;  // |T - mu_1 P_1 P_0| in whitened operator norm
  double control = 0.0;    // same with the coefficient replaced by 1
};

struct ApproxStudy {
  std::vector<ApproxRecord> records;
  cplx mu1;
  double slope = 0.0;
  double control_slope = 0.0;
};

// Deviation of parallel transport from the coefficient-weighted projector
// pairing along a modulus segment, with the constant-coefficient control.
inline ApproxStudy approx_study(cplx tau0, cplx tau1, const std::vector<int>& p_list,
                                const PathDiscretization& disc = {}) {
  require(!p_list.empty(), ErrorKind::UsageError, "approx study needs levels");
  ApproxStudy out;
  out.mu1 = std::abs(tau1 - tau0) == 0.0
                ? cplx(1.0, 0.0)
                : transport_factor(StructurePath::upper_half_segment(tau0, tau1),
                                   1.0, disc);
  for (int p : p_list) {
    const auto basis0 = theta_basis(p, tau0);
    const auto basis1 = theta_basis(p, tau1);
    const auto T = l2_transport(p, tau0, tau1, 0, disc);
    const auto P = toeplitz_matrix([](double, double) { return cplx(1.0, 0.0); },
                                   basis1, basis0);
    ApproxRecord rec;
    rec.p = p;
    OperatorMatrix dev = T;
    dev.matrix = T.matrix - out.mu1 * P.matrix;
    rec.deviation = dev.whitened_norm();
    dev.matrix = T.matrix - P.matrix;
    rec.control = dev.whitened_norm();
    out.records.push_back(rec);
  }
  if (out.records.size() >= 2) {
    std::vector<double> ps, ds, cs;
    for (const auto& r : out.records) {
      ps.push_back(double(r.p));
      ds.push_back(std::max(r.deviation, 1e-15));
      cs.push_back(std::max(r.control, 1e-15));
    }
    out.slope = fit_log_slope(ps, ds);
    out.control_slope = fit_log_slope(ps, cs);
  }
  return out;
}

}  // namespace btq
