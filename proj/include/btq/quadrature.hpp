#pragma once
// Brute-force numerical integration used as the independent oracle for the
// closed-form kernel calculus: tensor-product Gauss-Legendre over a box whose
// half-width is sized from the Gaussian decay rate and the requested tail
// tolerance. Nothing here reuses the closed-form Gaussian integrals it is
// meant to check; the integrand is merely evaluated through its exponent
// (the product of two exponentials written as one exponential).

#include <btq/error.hpp>
#include <btq/gaussian.hpp>
#include <btq/linalg.hpp>
#include <btq/polynomial.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <map>

namespace btq {

struct GaussLegendre {
  Vec nodes;    // on [-1, 1]
  Vec weights;

  // Golub-Welsch: eigen-decomposition of the Jacobi matrix.
  static const GaussLegendre& rule(int N) {
    static std::map<int, GaussLegendre> cache;
    auto it = cache.find(N);
    if (it != cache.end()) return it->second;
    require(N >= 2, ErrorKind::GridTooCoarse, "need at least 2 quadrature nodes");
    Mat T = Mat::Zero(N, N);
    for (int k = 1; k < N; ++k) {
      const double b = k / std::sqrt(4.0 * k * k - 1.0);
      T(k, k - 1) = b;
      T(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(T);
    require(es.info() == Eigen::Success, ErrorKind::ConvergenceFailure,
            "Jacobi matrix eigensolve failed");
    GaussLegendre g;
    g.nodes = es.eigenvalues();
    g.weights = Vec(N);
    for (int i = 0; i < N; ++i) {
      const double v0 = es.eigenvectors()(0, i);
      g.weights(i) = 2.0 * v0 * v0;
    }
    return cache.emplace(N, std::move(g)).first->second;
  }
};

struct QuadratureSpec {
  int nodes_per_axis = 0;   // 0 = auto by dimension
  double half_width = 0.0;  // 0 = auto from decay rate
  double tail_tol = 1e-12;

  int resolve_nodes(int dim) const {
    if (nodes_per_axis > 0) {
      require(nodes_per_axis >= 8, ErrorKind::GridTooCoarse,
              "fewer than 8 nodes per axis cannot meet any stated tolerance");
      return nodes_per_axis;
    }
    return dim <= 2 ? 160 : 56;
  }
};

namespace detail {

// A polynomial flattened for fast evaluation at real points.
struct PackedPoly {
  struct Term {
    cplx coeff;
    std::array<std::uint8_t, 16> exp{};
  };
  int nvars = 0;
  std::vector<Term> terms;

  static PackedPoly pack(const Polynomial& F) {
    require(F.nvars() <= 16, ErrorKind::DimensionMismatch, "too many variables");
    PackedPoly p;
    p.nvars = F.nvars();
    for (const auto& [k, c] : F.terms()) {
      Term t;
      t.coeff = c;
      for (size_t i = 0; i < k.size(); ++i) {
        require(k[i] <= 255, ErrorKind::DimensionMismatch, "exponent too large");
        t.exp[i] = static_cast<std::uint8_t>(k[i]);
      }
      p.terms.push_back(t);
    }
    return p;
  }

  cplx eval(const double* y) const {
    cplx s = 0.0;
    for (const Term& t : terms) {
      cplx m = t.coeff;
      for (int i = 0; i < nvars; ++i) {
        const int e = t.exp[static_cast<size_t>(i)];
        for (int r = 0; r < e; ++r) m *= y[i];
      }
      s += m;
    }
    return s;
  }
};

// Half-width so that exp(-pi * lam * R^2) * (1 + R)^{deg} <= tol beyond the
// farthest sample point; throws if an explicit width is insufficient.
inline double sized_half_width(double lam, double point_radius, int poly_degree,
                               const QuadratureSpec& spec) {
  require(lam > 1e-12, ErrorKind::NotPositive,
          "integrand lacks Gaussian decay (degenerate quadratic form)");
  double R = std::sqrt(std::log(1.0 / spec.tail_tol) / (kPi * lam));
  auto tail = [&](double r) {
    return std::exp(-kPi * lam * r * r) * std::pow(1.0 + point_radius + r, poly_degree);
  };
  while (tail(R) > spec.tail_tol && R < 60.0) R += 0.25;
  const double L = point_radius + R;
  if (spec.half_width > 0.0) {
    const double reach = spec.half_width - point_radius;
    require(reach > 0.0 && tail(reach) <= spec.tail_tol * 10.0,
            ErrorKind::TailBoundViolated,
            "requested box half-width " + fmt(spec.half_width) +
                " too small for the integrand decay rate " + fmt(lam));
    return spec.half_width;
  }
  require(tail(L - point_radius) <= spec.tail_tol * 10.0, ErrorKind::TailBoundViolated,
          "auto-sized box cannot meet the tail tolerance");
  return L;
}

// Tensor Gauss-Legendre integral of
//   prefactor * exp(-pi (y^T S y + b^T y + kappa)) * (F ? F(y) : 1)
// over the box prod_i [center_i - L, center_i + L]. Tight scalar loop; no
// closed-form Gaussian identities involved.
inline cplx integrate_gaussian_box(int dim, int N, double L, const Vec& center,
                                   const CMat& S, const CVec& b, cplx kappa,
                                   cplx prefactor, const PackedPoly* F) {
  const GaussLegendre& g = GaussLegendre::rule(N);
  std::vector<double> axis(static_cast<size_t>(N)), wts(static_cast<size_t>(N));
  std::vector<cplx> Sf(static_cast<size_t>(dim * dim));
  std::vector<cplx> bf(static_cast<size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    bf[static_cast<size_t>(i)] = b(i);
    for (int j = 0; j < dim; ++j) Sf[static_cast<size_t>(i * dim + j)] = S(i, j);
  }
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  std::vector<double> y(static_cast<size_t>(dim));
  for (int k = 0; k < N; ++k) {
    axis[static_cast<size_t>(k)] = L * g.nodes(k);
    wts[static_cast<size_t>(k)] = g.weights(k);
  }
  for (int a = 0; a < dim; ++a)
    y[static_cast<size_t>(a)] = center(a) + axis[0];

  cplx total = 0.0;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) w *= wts[static_cast<size_t>(idx[static_cast<size_t>(a)])];
    cplx e = kappa;
    for (int i = 0; i < dim; ++i) {
      const double yi = y[static_cast<size_t>(i)];
      cplx row = bf[static_cast<size_t>(i)];
      const cplx* srow = &Sf[static_cast<size_t>(i * dim)];
      for (int j = 0; j < dim; ++j) row += srow[j] * y[static_cast<size_t>(j)];
      e += yi * row;
    }
    cplx v = std::exp(-kPi * e);
    if (F) v *= F->eval(y.data());
    total += w * v;

    int pos = 0;
    while (pos < dim) {
      auto& ip = idx[static_cast<size_t>(pos)];
      if (++ip < N) {
        y[static_cast<size_t>(pos)] = center(pos) + axis[static_cast<size_t>(ip)];
        break;
      }
      ip = 0;
      y[static_cast<size_t>(pos)] = center(pos) + axis[0];
      ++pos;
    }
    if (pos == dim) break;
  }
  return prefactor * total * std::pow(L, dim);
}

}  // namespace detail

// Integrates fn over the box [center_i - L, center_i + L]^dim (generic path,
// used where the integrand is not of Gaussian-times-polynomial shape).
inline cplx integrate_box(int dim, int N, double L, const Vec& center,
                          const std::function<cplx(const Vec&)>& fn) {
  const GaussLegendre& g = GaussLegendre::rule(N);
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  Vec Y(dim);
  cplx total = 0.0;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      Y(a) = center(a) + L * g.nodes(idx[static_cast<size_t>(a)]);
      w *= g.weights(idx[static_cast<size_t>(a)]);
    }
    total += w * fn(Y);
    int pos = 0;
    while (pos < dim) {
      if (++idx[static_cast<size_t>(pos)] < N) break;
      idx[static_cast<size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == dim) break;
  }
  return total * std::pow(L, dim);
}

// Int K_l(Z, Y) F(Y) K_r(Y, Z') dY by tensor Gauss-Legendre (F optional).
// The product of the two kernels is evaluated through its combined exponent
//   (Z-Y)^T M_l (Z-Y) + (Y-Z')^T M_r (Y-Z') + i Omega(Z,Y) + i Omega(Y,Z'),
// expanded as a quadratic in Y.
inline cplx quadrature_compose(const ModelKernel& lhs, const Polynomial* F,
                               const ModelKernel& rhs, const Vec& Z, const Vec& Zp,
                               const QuadratureSpec& spec = {}) {
  require(lhs.n == rhs.n, ErrorKind::DimensionMismatch, "kernel dimension mismatch");
  const int n = lhs.n;
  const int dim = 2 * n;
  if (F) {
    require(F->nvars() == dim, ErrorKind::DimensionMismatch,
            "middle-variable polynomial must have 2n variables");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat((lhs.M + rhs.M).real()));
  const double lam = es.eigenvalues().minCoeff();
  const Vec center = 0.5 * (Z + Zp);
  double pr = 0.0;
  for (int i = 0; i < dim; ++i)
    pr = std::max({pr, std::abs(Z(i) - center(i)), std::abs(Zp(i) - center(i))});
  const double L = detail::sized_half_width(lam, pr, F ? F->degree() : 0, spec);
  const int N = spec.resolve_nodes(dim);

  const CMat S = lhs.M + rhs.M;
  const CMat Om = standard_symplectic_form(n).cast<cplx>();
  const CVec Zc = Z.cast<cplx>(), Zpc = Zp.cast<cplx>();
  const CVec b = -2.0 * (lhs.M * Zc) - 2.0 * (rhs.M * Zpc) - kI * (Om * (Zc - Zpc));
  const cplx kappa = (Zc.transpose() * lhs.M * Zc)(0, 0) +
                     (Zpc.transpose() * rhs.M * Zpc)(0, 0);
  detail::PackedPoly packed;
  if (F) packed = detail::PackedPoly::pack(*F);
  return detail::integrate_gaussian_box(dim, N, L, center, S, b, kappa,
                                        lhs.c * rhs.c, F ? &packed : nullptr);
}

// Int exp(-pi z^T W z) dz over R^m for complex symmetric W with Re W > 0,
// by tensor quadrature (the oracle for closed-form Gaussian determinants).
inline cplx gaussian_box_integral(const CMat& W, const QuadratureSpec& spec = {}) {
  const int dim = static_cast<int>(W.rows());
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(W.real()));
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0,
          ErrorKind::NotPositive, "box integral requires positive definite real part");
  const double lam = es.eigenvalues().minCoeff();
  const double L = detail::sized_half_width(lam, 0.0, 0, spec);
  const int N = spec.resolve_nodes(dim);
  return detail::integrate_gaussian_box(dim, N, L, Vec::Zero(dim), W,
                                        CVec::Zero(dim), 0.0, 1.0, nullptr);
}

}  // namespace btq
