#pragma once
// Sparse multivariate polynomials with complex coefficients (exponent
// multi-index -> coefficient), plus Gaussian pair-partition (Wick) moments
// for centered complex-covariance integrals. Degrees stay tiny (<= 8), so a
// map-based representation is both simple and fast enough.

#include <btq/error.hpp>
#include <btq/linalg.hpp>

#include <map>
#include <vector>

namespace btq {

class Polynomial {
 public:
  using Key = std::vector<int>;

  explicit Polynomial(int nvars = 0) : nvars_(nvars) {}

  static Polynomial constant(int nvars, cplx c) {
    Polynomial p(nvars);
    if (c != cplx(0.0)) p.terms_[Key(static_cast<size_t>(nvars), 0)] = c;
    return p;
  }

  static Polynomial variable(int nvars, int i, cplx coeff = 1.0) {
    require(i >= 0 && i < nvars, ErrorKind::DimensionMismatch, "variable index out of range");
    Polynomial p(nvars);
    Key k(static_cast<size_t>(nvars), 0);
    k[static_cast<size_t>(i)] = 1;
    p.terms_[k] = coeff;
    return p;
  }

  int nvars() const { return nvars_; }
  const std::map<Key, cplx>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const auto& [k, c] : terms_) {
      int s = 0;
      for (int e : k) s += e;
      d = std::max(d, s);
    }
    return d;
  }

  void add_term(const Key& k, cplx c) {
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      if (c != cplx(0.0)) terms_[k] = c;
    } else {
      it->second += c;
      if (std::abs(it->second) == 0.0) terms_.erase(it);
    }
  }

  Polynomial& operator+=(const Polynomial& o) {
    require(nvars_ == o.nvars_, ErrorKind::DimensionMismatch, "polynomial arity mismatch");
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
  }

  Polynomial& operator-=(const Polynomial& o) {
    require(nvars_ == o.nvars_, ErrorKind::DimensionMismatch, "polynomial arity mismatch");
    for (const auto& [k, c] : o.terms_) add_term(k, -c);
    return *this;
  }

  Polynomial& operator*=(cplx s) {
    if (s == cplx(0.0)) {
      terms_.clear();
      return *this;
    }
    for (auto& [k, c] : terms_) c *= s;
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, cplx s) { return a *= s; }
  friend Polynomial operator*(cplx s, Polynomial a) { return a *= s; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    require(a.nvars_ == b.nvars_, ErrorKind::DimensionMismatch, "polynomial arity mismatch");
    Polynomial out(a.nvars_);
    for (const auto& [ka, ca] : a.terms_)
      for (const auto& [kb, cb] : b.terms_) {
        Key k(ka);
        for (size_t i = 0; i < k.size(); ++i) k[i] += kb[i];
        out.add_term(k, ca * cb);
      }
    return out;
  }

  Polynomial pow(int e) const {
    require(e >= 0, ErrorKind::UsageError, "negative polynomial power");
    Polynomial out = constant(nvars_, 1.0);
    for (int i = 0; i < e; ++i) out = out * (*this);
    return out;
  }

  cplx eval(const CVec& x) const {
    require(static_cast<int>(x.size()) == nvars_, ErrorKind::DimensionMismatch,
            "evaluation point arity mismatch");
    cplx s = 0.0;
    for (const auto& [k, c] : terms_) {
      cplx m = c;
      for (int i = 0; i < nvars_; ++i)
        for (int e = 0; e < k[static_cast<size_t>(i)]; ++e) m *= x(i);
      s += m;
    }
    return s;
  }

  Polynomial derivative(int i) const {
    require(i >= 0 && i < nvars_, ErrorKind::DimensionMismatch, "variable index out of range");
    Polynomial out(nvars_);
    for (const auto& [k, c] : terms_) {
      const int e = k[static_cast<size_t>(i)];
      if (e == 0) continue;
      Key kd(k);
      kd[static_cast<size_t>(i)] = e - 1;
      out.add_term(kd, c * static_cast<double>(e));
    }
    return out;
  }

  void prune(double eps = 0.0) {
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (std::abs(it->second) <= eps)
        it = terms_.erase(it);
      else
        ++it;
    }
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& [k, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  // True iff every stored monomial has even (odd) total degree.
  bool pure_parity(int parity) const {
    for (const auto& [k, c] : terms_) {
      int s = 0;
      for (int e : k) s += e;
      if ((s & 1) != parity) return false;
    }
    return true;
  }

 private:
  int nvars_;
  std::map<Key, cplx> terms_;
};

// --------------------------------------------------------------- Wick sums
//
// For a centered (complex, symmetric-matrix) covariance C with
// E[V_i V_j] = C(i, j), the moment of a product of entries is the sum over
// pair partitions of products of covariances. Odd counts vanish.

namespace detail {
inline cplx wick_pairings(std::vector<int>& idx, const CMat& C) {
  const size_t m = idx.size();
  if (m == 0) return 1.0;
  if (m % 2 == 1) return 0.0;
  const int first = idx[0];
  cplx total = 0.0;
  for (size_t j = 1; j < m; ++j) {
    const int partner = idx[j];
    std::vector<int> rest;
    rest.reserve(m - 2);
    for (size_t k = 1; k < m; ++k)
      if (k != j) rest.push_back(idx[k]);
    total += C(first, partner) * wick_pairings(rest, C);
  }
  return total;
}
}  // namespace detail

// E[prod_k V_{indices[k]}] for centered Gaussian V with covariance C.
inline cplx wick_moment(const CMat& C, std::vector<int> indices) {
  require(indices.size() <= 12, ErrorKind::DimensionMismatch,
          "moment order too large for the pair-partition sum");
  return detail::wick_pairings(indices, C);
}

// E[V^k] for a multi-index k over the covariance's variables.
inline cplx wick_moment_multi(const CMat& C, const Polynomial::Key& k) {
  std::vector<int> idx;
  for (size_t i = 0; i < k.size(); ++i)
    for (int e = 0; e < k[i]; ++e) idx.push_back(static_cast<int>(i));
  return wick_moment(C, std::move(idx));
}

}  // namespace btq
