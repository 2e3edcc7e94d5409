#pragma once
// Smooth paths t in [0,1] |-> compatible complex structure J_t, with the
// derivative dJ/dt available analytically where cheap and by centered finite
// differences (h = 1e-5) otherwise. Paths evaluate on a slightly larger
// interval so centered differences remain usable at the endpoints.

#include <btq/error.hpp>
#include <btq/linalg.hpp>

#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

namespace btq {

inline constexpr double kPathFdStep = 1e-5;

class StructurePath {
 public:
  StructurePath() = default;

  int n() const { return n_; }

  Mat J(double t) const { return j_(t); }

  Mat dJ(double t) const {
    if (dj_) return dj_(t);
    return (j_(t + kPathFdStep) - j_(t - kPathFdStep)) / (2.0 * kPathFdStep);
  }

  CompatibleStructure at(double t) const {
    return CompatibleStructure::validate(j_(t), 1e-8);
  }

  Mat metric(double t) const { return metric_of(j_(t)); }

  // dG/dt = -J_std * dJ/dt.
  Mat dmetric(double t) const {
    return -standard_complex_structure(n_) * dJ(t);
  }

  // ------------------------------------------------------------- factories

  static StructurePath constant(const CompatibleStructure& Js) {
    StructurePath p;
    p.n_ = Js.n;
    Mat J = Js.J;
    p.j_ = [J](double) { return J; };
    const Mat Z = Mat::Zero(J.rows(), J.cols());
    p.dj_ = [Z](double) { return Z; };
    return p;
  }

  // Hyperbolic scaling in every symplectic plane: the metric at time t is
  // diag(e^{2st}, e^{-2st}) per plane, so J_t = J_std G_t.
  static StructurePath diagonal_scaling(int n, double s) {
    require(n >= 1, ErrorKind::DimensionMismatch, "need n >= 1");
    StructurePath p;
    p.n_ = n;
    const Mat J0 = standard_complex_structure(n);
    p.j_ = [n, s, J0](double t) {
      Mat G = Mat::Zero(2 * n, 2 * n);
      for (int k = 0; k < n; ++k) {
        G(2 * k, 2 * k) = std::exp(2.0 * s * t);
        G(2 * k + 1, 2 * k + 1) = std::exp(-2.0 * s * t);
      }
      return Mat(J0 * G);
    };
    p.dj_ = [n, s, J0](double t) {
      Mat dG = Mat::Zero(2 * n, 2 * n);
      for (int k = 0; k < n; ++k) {
        dG(2 * k, 2 * k) = 2.0 * s * std::exp(2.0 * s * t);
        dG(2 * k + 1, 2 * k + 1) = -2.0 * s * std::exp(-2.0 * s * t);
      }
      return Mat(J0 * dG);
    };
    return p;
  }

  // Straight segment in the upper half-plane (n = 1).
  static StructurePath upper_half_segment(cplx tau0, cplx tau1) {
    require(tau0.imag() > 0.0 && tau1.imag() > 0.0, ErrorKind::NotPositive,
            "upper-half-plane parameters need positive imaginary part");
    StructurePath p;
    p.n_ = 1;
    p.j_ = [tau0, tau1](double t) {
      const cplx tau = tau0 + t * (tau1 - tau0);
      return structure_from_tau(tau).J;
    };
    p.dj_ = [tau0, tau1](double t) {
      const cplx tau = tau0 + t * (tau1 - tau0);
      const double t1 = tau.real(), t2 = tau.imag();
      const double dt1 = (tau1 - tau0).real(), dt2 = (tau1 - tau0).imag();
      Mat d1(2, 2), d2(2, 2);
      d1 << -1.0 / t2, -2.0 * t1 / t2, 0.0, 1.0 / t2;
      d2 << t1 / (t2 * t2), (t1 * t1 + t2 * t2) / (t2 * t2) - 2.0,
          -1.0 / (t2 * t2), -t1 / (t2 * t2);
      return Mat(dt1 * d1 + dt2 * d2);
    };
    return p;
  }

  // Straight segment in the Siegel domain (any n); the domain is convex.
  static StructurePath siegel_segment(const CMat& Z0, const CMat& Z1) {
    require(Z0.rows() == Z1.rows() && Z0.cols() == Z1.cols() && Z0.rows() == Z0.cols(),
            ErrorKind::DimensionMismatch, "Siegel endpoints must be square and equal-sized");
    StructurePath p;
    p.n_ = static_cast<int>(Z0.rows());
    if (p.n_ == 1) {
      return upper_half_segment(Z0(0, 0), Z1(0, 0));
    }
    CMat A = Z0, B = Z1;
    p.j_ = [A, B](double t) {
      const CMat Z = A + t * (B - A);
      return structure_from_siegel(Z).J;
    };
    return p;
  }

  // Catmull-Rom interpolation through sampled structures, performed on the
  // Siegel parameters (entrywise) so intermediate values remain admissible
  // for mildly varying data; every evaluation is re-validated.
  static StructurePath sampled(const std::vector<std::pair<double, Mat>>& knots) {
    require(knots.size() >= 2, ErrorKind::UsageError, "need at least two knots");
    const int n = static_cast<int>(knots.front().second.rows()) / 2;
    std::vector<double> ts;
    std::vector<CMat> zs;
    ts.reserve(knots.size());
    zs.reserve(knots.size());
    for (const auto& [t, J] : knots) {
      require(ts.empty() || t > ts.back(), ErrorKind::UsageError,
              "knot times must be strictly increasing");
      ts.push_back(t);
      zs.push_back(siegel_parameter(CompatibleStructure::validate(J, 1e-8)));
    }
    require(ts.front() <= 0.0 + 1e-12 && ts.back() >= 1.0 - 1e-12,
            ErrorKind::UsageError, "knots must cover [0, 1]");
    StructurePath p;
    p.n_ = n;
    p.j_ = [ts, zs, n](double t) {
      const int m = static_cast<int>(ts.size());
      int i = static_cast<int>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin()) - 1;
      i = std::clamp(i, 0, m - 2);
      const double h = ts[i + 1] - ts[i];
      const double u = (t - ts[i]) / h;
      // Hermite slopes from neighbouring knots (one-sided at the ends).
      const CMat m0 = (i == 0) ? CMat((zs[1] - zs[0]) / (ts[1] - ts[0]))
                               : CMat((zs[i + 1] - zs[i - 1]) / (ts[i + 1] - ts[i - 1]));
      const CMat m1 = (i == m - 2)
                          ? CMat((zs[m - 1] - zs[m - 2]) / (ts[m - 1] - ts[m - 2]))
                          : CMat((zs[i + 2] - zs[i]) / (ts[i + 2] - ts[i]));
      const double u2 = u * u, u3 = u2 * u;
      const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
      const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
      const CMat Z = h00 * zs[i] + (h10 * h) * m0 + h01 * zs[i + 1] + (h11 * h) * m1;
      return structure_from_siegel(Z).J;
    };
    return p;
  }

  // S^{-1} J S for a fixed real symplectic S (compatibility is preserved).
  StructurePath conjugated(const Mat& S) const {
    require(is_symplectic(S, 1e-9), ErrorKind::NotSymplectic,
            "conjugation requires a symplectic matrix");
    StructurePath p;
    p.n_ = n_;
    auto j = j_;
    const Mat Sinv = S.inverse();
    const Mat Sc = S;
    p.j_ = [j, Sinv, Sc](double t) { return Mat(Sinv * j(t) * Sc); };
    if (dj_) {
      auto dj = dj_;
      p.dj_ = [dj, Sinv, Sc](double t) { return Mat(Sinv * dj(t) * Sc); };
    }
    return p;
  }

  // J(s(t)) for a smooth monotone reparametrization s with s(0)=0, s(1)=1.
  StructurePath reparametrized(std::function<double(double)> s) const {
    StructurePath p;
    p.n_ = n_;
    auto j = j_;
    p.j_ = [j, s](double t) { return j(s(t)); };
    return p;
  }

 private:
  int n_ = 0;
  std::function<Mat(double)> j_;
  std::function<Mat(double)> dj_;
};

}  // namespace btq
