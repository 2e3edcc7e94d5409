// Gaussian kernel calculus: the quadrature oracle validates itself first,
// then every closed form (composition, weighted composition, anchored
// quadratic moments) is held against it.

#include <btq/gaussian.hpp>
#include <btq/quadrature.hpp>

#include "testutil.hpp"

using namespace btq;
using namespace btqtest;

namespace {

ModelKernel hyperbolic_kernel(double a) {
  Mat G(2, 2);
  G << 1.0 / (a * a), 0.0, 0.0, a * a;
  return kernel_of(CompatibleStructure::validate(structure_of_metric(G)));
}

}  // namespace

TEST_CASE("Gauss-Legendre rule: exactness and Gaussian tails") {
  const auto& g = GaussLegendre::rule(12);
  for (int k = 0; k <= 8; ++k) {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += g.weights(i) * std::pow(g.nodes(i), k);
    const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
    REQUIRE(std::abs(s - exact) < 1e-13);
  }
  // One-dimensional unit Gaussian over [-6, 6].
  const auto& g96 = GaussLegendre::rule(96);
  double s = 0.0;
  for (int i = 0; i < 96; ++i)
    s += g96.weights(i) * std::exp(-kPi * 36.0 * g96.nodes(i) * g96.nodes(i));
  REQUIRE(std::abs(6.0 * s - 1.0) < 1e-13);
}

TEST_CASE("box integration: normalized Gaussians in 2 and 4 dimensions") {
  for (int dim : {2, 4}) {
    const Vec c = Vec::Zero(dim);
    const cplx v = integrate_box(dim, dim == 2 ? 96 : 48, 5.5, c, [&](const Vec& y) {
      return cplx(std::exp(-kPi * y.squaredNorm()), 0.0);
    });
    REQUIRE(cdist(v, cplx(1.0, 0.0)) < (dim == 2 ? 1e-12 : 1e-9));
  }
  // Complex quadratic form against the closed form det(W)^{-1/2}.
  CMat W(2, 2);
  W << cplx(1.2, 0.7), cplx(0.1, -0.3), cplx(0.1, -0.3), cplx(0.9, -0.4);
  const cplx got = gaussian_box_integral(W);
  const cplx want = 1.0 / sqrt_det_repos(W);
  REQUIRE(rel_err(got, want) < 1e-10);
}

TEST_CASE("model kernels: pointwise values") {
  const auto K = kernel_of(CompatibleStructure::standard(1));
  Vec z(2), zp(2);
  z << 1.0, 0.0;
  zp << 0.0, 0.0;
  // exp(-pi/2), no phase along a real axis offset.
  REQUIRE(cdist(K(z, zp), cplx(std::exp(-kPi / 2.0), 0.0)) < 1e-15);
  REQUIRE(cdist(K(z, z), cplx(1.0, 0.0)) < 1e-15);
  // Hermitian symmetry for pure kernels.
  auto g = rng(21);
  const auto s = random_compatible_structure(g, 2);
  const auto K2 = kernel_of(s);
  const Vec a = random_point(g, 4), b = random_point(g, 4);
  REQUIRE(cdist(K2(a, b), std::conj(K2(b, a))) < 1e-14);
  REQUIRE(K2.is_pure());
  REQUIRE(mat_dist(K2.structure().J, s.J) < 1e-9);
}

TEST_CASE("oracle self-check: stability under refinement") {
  auto g = rng(22);
  const auto Kl = kernel_of(random_compatible_structure(g, 1));
  const auto Kr = kernel_of(random_compatible_structure(g, 1));
  const Vec Z = random_point(g, 2), Zp = random_point(g, 2);
  QuadratureSpec base;  // auto: 96 nodes
  QuadratureSpec finer;
  finer.nodes_per_axis = 144;
  QuadratureSpec wider;
  wider.nodes_per_axis = 120;
  wider.tail_tol = 1e-14;  // forces a larger box
  const cplx v0 = quadrature_compose(Kl, nullptr, Kr, Z, Zp, base);
  const cplx v1 = quadrature_compose(Kl, nullptr, Kr, Z, Zp, finer);
  const cplx v2 = quadrature_compose(Kl, nullptr, Kr, Z, Zp, wider);
  REQUIRE(cdist(v0, v1) < 1e-11);
  REQUIRE(cdist(v0, v2) < 1e-11);
  // An explicitly undersized box is rejected.
  QuadratureSpec tiny;
  tiny.half_width = 0.8;
  REQUIRE_THROWS_AS(quadrature_compose(Kl, nullptr, Kr, Z, Zp, tiny), Error);
}

TEST_CASE("composition: hand-computed hyperbolic pair and idempotence") {
  const auto K1 = hyperbolic_kernel(2.0);
  const auto K0 = kernel_of(CompatibleStructure::standard(1));
  const auto C = compose(K1, K0);
  REQUIRE(cdist(C.c, cplx(0.8, 0.0)) < 1e-12);
  CMat M(2, 2);
  M << cplx(0.2, 0.0), cplx(0.0, 0.3), cplx(0.0, 0.3), cplx(0.8, 0.0);
  REQUIRE(mat_dist(C.M, M) < 1e-12);
  // Composing a structure kernel with itself reproduces it exactly.
  const auto P = compose(K0, K0);
  REQUIRE(cdist(P.c, K0.c) < 1e-14);
  REQUIRE(mat_dist(P.M, K0.M) < 1e-14);
  auto g = rng(23);
  const auto Ks = kernel_of(random_compatible_structure(g, 2));
  const auto Ps = compose(Ks, Ks);
  REQUIRE(cdist(Ps.c, Ks.c) < 1e-12);
  REQUIRE(mat_dist(Ps.M, Ks.M) < 1e-11);
}

TEST_CASE("composition agrees with the oracle") {
  auto g = rng(24);
  for (int rep = 0; rep < 5; ++rep) {
    const auto Kl = kernel_of(random_compatible_structure(g, 1));
    const auto Kr = kernel_of(random_compatible_structure(g, 1));
    const auto C = compose(Kl, Kr);
    for (int pt = 0; pt < 2; ++pt) {
      const Vec Z = random_point(g, 2), Zp = random_point(g, 2);
      const cplx direct = quadrature_compose(Kl, nullptr, Kr, Z, Zp);
      REQUIRE(rel_err(C(Z, Zp), direct) < 1e-9);
    }
  }
}

TEST_CASE("composition is associative across the whole family") {
  auto g = rng(25);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int n : {1, 2}) {
    // Pure structures and genuinely complex kernels.
    const auto K1 = kernel_of(random_compatible_structure(g, n));
    const auto K2 = kernel_of(random_compatible_structure(g, n));
    CMat M3 = K1.M;  // complex symmetric perturbation, Re M stays dominant
    for (int i = 0; i < 2 * n; ++i)
      for (int j = i; j < 2 * n; ++j) {
        const cplx d(0.3 * u(g), u(g));
        M3(i, j) += d;
        if (i != j) M3(j, i) += d;
      }
    const auto K3 = ModelKernel::validate(n, cplx(0.7, 0.4), M3);
    const auto L = compose(compose(K1, K2), K3);
    const auto R = compose(K1, compose(K2, K3));
    REQUIRE(cdist(L.c, R.c) < 1e-11);
    REQUIRE(mat_dist(L.M, R.M) < 1e-11);
  }
}

TEST_CASE("weighted composition: trivial, parity, and oracle checks") {
  const auto K1 = hyperbolic_kernel(2.0);
  const auto K0 = kernel_of(CompatibleStructure::standard(1));
  // F = 1 reduces to the unweighted composition.
  const auto triv = compose_poly(K1, Polynomial::constant(2, 1.0), K0);
  REQUIRE(cdist(triv.weight.eval(CVec::Zero(4)), cplx(1.0, 0.0)) < 1e-14);
  REQUIRE(triv.weight.degree() == 0);

  // Odd monomial weights vanish at coincident anchor points.
  Polynomial y3 = Polynomial::variable(2, 1).pow(3);
  const auto odd = compose_poly(K1, y3, K0);
  Vec zero = Vec::Zero(2);
  REQUIRE(std::abs(odd(zero, zero)) < 1e-14);

  auto g = rng(26);
  for (int n : {1, 2}) {
    const auto Kl = kernel_of(random_compatible_structure(g, n));
    const auto Kr = kernel_of(random_compatible_structure(g, n));
    const Polynomial F = random_polynomial(g, 2 * n, 4);
    const auto W = compose_poly(Kl, F, Kr);
    const Vec Z = random_point(g, 2 * n), Zp = random_point(g, 2 * n);
    const cplx direct = quadrature_compose(Kl, &F, Kr, Z, Zp);
    REQUIRE(rel_err(W(Z, Zp), direct) < 5e-7);
  }

  // The closed class is exact for complex (non-pure) kernels too.
  CMat M = K0.M;
  M(0, 0) += cplx(0.2, 0.5);
  M(1, 1) += cplx(-0.1, -0.3);
  const auto Kc = ModelKernel::validate(1, cplx(1.1, -0.2), M);
  const Polynomial F = random_polynomial(g, 2, 3);
  const auto W = compose_poly(Kc, F, K1);
  const Vec Z = random_point(g, 2), Zp = random_point(g, 2);
  const cplx direct = quadrature_compose(Kc, &F, K1, Z, Zp);
  REQUIRE(rel_err(W(Z, Zp), direct) < 1e-8);

  REQUIRE_THROWS_AS(
      compose_poly(K1, Polynomial::variable(2, 0).pow(9), K0), Error);
}

TEST_CASE("anchored quadratic moments: hand value, symmetry, oracle") {
  const auto K1 = hyperbolic_kernel(2.0);
  const auto K0 = kernel_of(CompatibleStructure::standard(1));
  Mat B(2, 2);
  B << 1.0, 0.0, 0.0, 0.0;

  // Right-anchored weight at Z = Z' = 0 is the pure trace term
  // (1/2pi) tr(B S^{-1}) = (1/2pi)(8/5) = 4/(5pi); the kernel value
  // multiplies in det^{1/2} = 4/5.
  const auto right = quadratic_moment(K1, B.cast<cplx>(), K0, MomentSide::Right);
  const Vec zero = Vec::Zero(2);
  REQUIRE(cdist(right.weight.eval(CVec::Zero(4)), cplx(4.0 / (5.0 * kPi), 0.0)) <
          1e-12);
  REQUIRE(cdist(right(zero, zero), cplx(16.0 / (25.0 * kPi), 0.0)) < 1e-12);

  // Left and right anchors coincide at Z = Z'.
  const auto left = quadratic_moment(K1, B.cast<cplx>(), K0, MomentSide::Left);
  REQUIRE(cdist(left(zero, zero), right(zero, zero)) < 1e-13);

  auto g = rng(27);
  for (int n : {1, 2}) {
    const auto Kl = kernel_of(random_compatible_structure(g, n));
    const auto Kr = kernel_of(random_compatible_structure(g, n));
    Mat B0(2 * n, 2 * n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j) B0(i, j) = u(g);
    const Mat Bs = 0.5 * (B0 + B0.transpose());
    const Vec Z = random_point(g, 2 * n), Zp = random_point(g, 2 * n);

    // Against the weighted composition with the anchor frozen numerically:
    // left weight F(Y) = <B (Z - Y), (Z - Y)>.
    const auto lhs = quadratic_moment(Kl, Bs.cast<cplx>(), Kr, MomentSide::Left);
    Polynomial FZ(2 * n);
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j) {
        if (Bs(i, j) == 0.0) continue;
        const Polynomial di = Polynomial::constant(2 * n, Z(i)) -
                              Polynomial::variable(2 * n, i);
        const Polynomial dj = Polynomial::constant(2 * n, Z(j)) -
                              Polynomial::variable(2 * n, j);
        FZ += Bs(i, j) * (di * dj);
      }
    const auto via_poly = compose_poly(Kl, FZ, Kr);
    REQUIRE(cdist(lhs(Z, Zp), via_poly(Z, Zp)) < 1e-10 * std::max(1.0, std::abs(lhs(Z, Zp))));

    // Against the oracle directly.
    const cplx direct = quadrature_compose(Kl, &FZ, Kr, Z, Zp);
    REQUIRE(rel_err(lhs(Z, Zp), direct) < 5e-7);

    // Right-anchored variant against its own oracle.
    const auto rhs = quadratic_moment(Kl, Bs.cast<cplx>(), Kr, MomentSide::Right);
    Polynomial FZp(2 * n);
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j) {
        if (Bs(i, j) == 0.0) continue;
        const Polynomial di = Polynomial::variable(2 * n, i) -
                              Polynomial::constant(2 * n, Zp(i));
        const Polynomial dj = Polynomial::variable(2 * n, j) -
                              Polynomial::constant(2 * n, Zp(j));
        FZp += Bs(i, j) * (di * dj);
      }
    const cplx direct_r = quadrature_compose(Kl, &FZp, Kr, Z, Zp);
    REQUIRE(rel_err(rhs(Z, Zp), direct_r) < 5e-7);
  }
}

TEST_CASE("Wick moments: closed Gaussian values") {
  // Scalar covariance c: E[V^2] = c, E[V^4] = 3 c^2, E[V^6] = 15 c^3.
  CMat C(1, 1);
  C(0, 0) = cplx(0.3, 0.1);
  const cplx c = C(0, 0);
  REQUIRE(cdist(wick_moment(C, {0, 0}), c) < 1e-15);
  REQUIRE(cdist(wick_moment(C, {0, 0, 0, 0}), 3.0 * c * c) < 1e-15);
  REQUIRE(cdist(wick_moment(C, {0, 0, 0, 0, 0, 0}), 15.0 * c * c * c) < 1e-14);
  REQUIRE(std::abs(wick_moment(C, {0, 0, 0})) == 0.0);
  // Two variables: E[V0 V0 V1 V1] = C00 C11 + 2 C01^2.
  CMat D(2, 2);
  D << cplx(0.5, 0.0), cplx(0.2, 0.1), cplx(0.2, 0.1), cplx(0.7, -0.2);
  const cplx want = D(0, 0) * D(1, 1) + 2.0 * D(0, 1) * D(0, 1);
  REQUIRE(cdist(wick_moment(D, {0, 0, 1, 1}), want) < 1e-15);
}
