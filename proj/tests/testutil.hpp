#pragma once
// Shared helpers for the unit suites: deterministic RNG, random admissible
// inputs, and complex/matrix comparison with readable failure output.

#include <btq/linalg.hpp>
#include <btq/polynomial.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <random>

namespace btqtest {

using namespace btq;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double cdist(cplx a, cplx b) { return std::abs(a - b); }

inline double rel_err(cplx got, cplx want) {
  const double scale = std::max(1.0, std::abs(want));
  return std::abs(got - want) / scale;
}

inline double mat_dist(const CMat& A, const CMat& B) {
  return (A - B).cwiseAbs().maxCoeff();
}

inline double mat_dist(const Mat& A, const Mat& B) {
  return (A - B).cwiseAbs().maxCoeff();
}

inline Vec random_point(std::mt19937_64& g, int dim, double radius = 1.2) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = u(g);
  return v;
}

inline Polynomial random_polynomial(std::mt19937_64& g, int nvars, int max_deg,
                                    int nterms = 6) {
  std::uniform_int_distribution<int> ud(0, max_deg);
  std::uniform_int_distribution<int> uv(0, nvars - 1);
  std::uniform_real_distribution<double> uc(-1.0, 1.0);
  Polynomial p(nvars);
  for (int t = 0; t < nterms; ++t) {
    Polynomial::Key k(static_cast<size_t>(nvars), 0);
    int deg = ud(g);
    for (int d = 0; d < deg; ++d) ++k[static_cast<size_t>(uv(g))];
    p.add_term(k, cplx(uc(g), uc(g)));
  }
  if (p.empty()) p.add_term(Polynomial::Key(static_cast<size_t>(nvars), 0), 1.0);
  return p;
}

}  // namespace btqtest
