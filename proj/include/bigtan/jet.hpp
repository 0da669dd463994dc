#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "bigtan/expr.hpp"

namespace bigtan {

/// Largest derivative order a jet space may be built for.
inline constexpr int kMaxJetOrder = 8;

/// Multi-index bookkeeping for truncated Taylor series in n variables up to order K.
/// Monomials are stored graded by total degree, so a jet of order k < K uses a prefix.
class JetSpace {
 public:
  struct MulEntry {
    int i, j, k;
  };

  JetSpace(int nvars, int order) : n_(nvars), order_(order) {
    if (nvars < 1 || order < 0 || order > kMaxJetOrder) throw Error("invalid jet space");
    std::vector<int> cur(n_, 0);
    upto_.assign(order_ + 1, 0);
    for (int d = 0; d <= order_; ++d) {
      enumerate(d, 0, d, cur);
      upto_[d] = static_cast<int>(mono_.size());
    }
    std::map<std::vector<int>, int> lookup;
    for (int i = 0; i < size(); ++i) lookup[mono_[i]] = i;
    shift_.assign(static_cast<std::size_t>(size()) * n_, -1);
    for (int i = 0; i < size(); ++i) {
      if (deg_[i] == order_) continue;
      for (int v = 0; v < n_; ++v) {
        auto e = mono_[i];
        ++e[v];
        shift_[static_cast<std::size_t>(i) * n_ + v] = lookup.at(e);
      }
    }
    // All products of monomials with total degree <= K, ordered by that degree.
    std::vector<std::vector<MulEntry>> by_deg(order_ + 1);
    for (int i = 0; i < size(); ++i)
      for (int j = 0; j < count(order_ - deg_[i]); ++j) {
        const int d = deg_[i] + deg_[j];
        std::vector<int> e(n_);
        for (int v = 0; v < n_; ++v) e[v] = mono_[i][v] + mono_[j][v];
        by_deg[d].push_back({i, j, lookup.at(e)});
      }
    mul_upto_.assign(order_ + 1, 0);
    for (int d = 0; d <= order_; ++d) {
      mul_.insert(mul_.end(), by_deg[d].begin(), by_deg[d].end());
      mul_upto_[d] = static_cast<int>(mul_.size());
    }
    fact_.resize(size());
    for (int i = 0; i < size(); ++i) {
      double f = 1;
      for (int v = 0; v < n_; ++v)
        for (int q = 2; q <= mono_[i][v]; ++q) f *= q;
      fact_[i] = f;
    }
  }

  int nvars() const { return n_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(mono_.size()); }
  /// Number of monomials of total degree <= d.
  int count(int d) const { return d < 0 ? 0 : upto_[std::min(d, order_)]; }
  int degree(int i) const { return deg_[i]; }
  const std::vector<int>& exponents(int i) const { return mono_[i]; }
  /// Index of monomial i times x_v, or -1 past the top order.
  int shift(int i, int v) const { return shift_[static_cast<std::size_t>(i) * n_ + v]; }
  double factorial(int i) const { return fact_[i]; }
  const MulEntry* mul_begin() const { return mul_.data(); }
  const MulEntry* mul_end(int d) const { return mul_.data() + mul_upto_[d]; }

  int index_of(const std::vector<int>& e) const {
    int d = 0;
    for (int x : e) d += x;
    if (static_cast<int>(e.size()) != n_ || d > order_) return -1;
    for (int i = count(d - 1); i < count(d); ++i)
      if (mono_[i] == e) return i;
    return -1;
  }

 private:
  void enumerate(int d, int v, int left, std::vector<int>& cur) {
    if (v == n_ - 1) {
      cur[v] = left;
      mono_.push_back(cur);
      deg_.push_back(d);
      cur[v] = 0;
      return;
    }
    for (int a = left; a >= 0; --a) {
      cur[v] = a;
      enumerate(d, v + 1, left - a, cur);
    }
    cur[v] = 0;
  }

  int n_, order_;
  std::vector<std::vector<int>> mono_;
  std::vector<int> deg_, upto_, shift_, mul_upto_;
  std::vector<MulEntry> mul_;
  std::vector<double> fact_;
};

/// Shared, immutable jet space for (nvars, order). Thread-safe.
inline const JetSpace* jet_space(int nvars, int order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<JetSpace>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{nvars, order}];
  if (!slot) slot = std::make_unique<JetSpace>(nvars, order);
  return slot.get();
}

/// Truncated multivariate Taylor series. Coefficients are Taylor coefficients
/// (partial derivative divided by the multi-index factorial). A jet remembers the
/// order up to which it is exact; order -1 marks a jet with no valid data.
class Jet {
 public:
  using Storage = boost::container::small_vector<double, 36>;

  Jet() = default;
  Jet(const JetSpace* s, int order) : s_(s), order_(std::min(order, s->order())) {
    c_.assign(static_cast<std::size_t>(s_->count(order_)), 0.0);
  }

  static Jet constant(const JetSpace* s, double v, int order = -2) {
    Jet j(s, order == -2 ? s->order() : order);
    if (j.order_ >= 0) j.c_[0] = v;
    return j;
  }
  static Jet variable(const JetSpace* s, int var, double v, int order = -2) {
    Jet j = constant(s, v, order);
    if (j.order_ >= 1) j.c_[1 + var] = 1.0;
    return j;
  }

  const JetSpace* space() const { return s_; }
  int order() const { return order_; }
  bool valid() const { return s_ != nullptr && order_ >= 0; }
  const Storage& coeffs() const { return c_; }
  Storage& coeffs() { return c_; }

  double value() const {
    if (!valid()) throw Error("jet has no valid value (insufficient derivative order)");
    return c_[0];
  }
  /// Partial derivative for a multi-index of exponents.
  double partial(const std::vector<int>& e) const {
    const int i = s_->index_of(e);
    if (i < 0 || s_->degree(i) > order_) throw Error("partial beyond jet order");
    return c_[i] * s_->factorial(i);
  }
  /// First partial with respect to variable v.
  double d1(int v) const {
    if (order_ < 1) throw Error("partial beyond jet order");
    return c_[1 + v];
  }

  /// Jet truncated to a lower order.
  Jet truncated(int k) const {
    Jet r = *this;
    r.order_ = std::min(k, order_);
    r.c_.resize(static_cast<std::size_t>(s_->count(r.order_)));
    return r;
  }

  /// d/dx_v; exact to one order less.
  Jet diff(int v) const {
    Jet r(s_, order_ - 1);
    if (r.order_ < 0) return r;
    const int n = s_->count(r.order_);
    for (int i = 0; i < n; ++i) {
      const int k = s_->shift(i, v);
      r.c_[i] = (s_->exponents(i)[v] + 1) * c_[k];
    }
    return r;
  }

  Jet& operator+=(const Jet& o) {
    combine(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    combine(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(double a) {
    for (double& x : c_) x *= a;
    return *this;
  }
  Jet& operator+=(double a) {
    if (order_ >= 0) c_[0] += a;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (double& x : a.c_) x = -x;
    return a;
  }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a += -s; }
  friend Jet operator-(double s, const Jet& a) { return (-a) + s; }
  friend Jet operator/(Jet a, double s) { return a *= 1.0 / s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    const JetSpace* s = common(a, b);
    Jet r(s, std::min(a.order_, b.order_));
    if (r.order_ < 0) return r;
    const double* pa = a.c_.data();
    const double* pb = b.c_.data();
    double* pr = r.c_.data();
    for (auto* e = s->mul_begin(), *end = s->mul_end(r.order_); e != end; ++e) pr[e->k] += pa[e->i] * pb[e->j];
    return r;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }

  /// f(a) from the Taylor coefficients f^(n)(a0)/n!, n = 0..order, by Horner on a - a0.
  Jet compose(const std::vector<double>& series) const {
    Jet h = *this;
    if (order_ < 0) return h;
    h.c_[0] = 0.0;
    Jet r = constant(s_, series[order_], order_);
    for (int n = order_ - 1; n >= 0; --n) {
      r = r * h;
      r.c_[0] += series[n];
    }
    return r;
  }

  static const JetSpace* common(const Jet& a, const Jet& b) {
    if (a.s_ != b.s_) throw Error("jets from different spaces");
    return a.s_;
  }

 private:
  void combine(const Jet& o) {
    common(*this, o);
    if (o.order_ < order_) {
      order_ = o.order_;
      c_.resize(static_cast<std::size_t>(s_->count(order_)));
    }
  }

  const JetSpace* s_ = nullptr;
  int order_ = -1;
  Storage c_;
};

inline Jet recip(const Jet& a) {
  const double a0 = a.value();
  if (a0 == 0.0) throw DomainError("division by zero");
  std::vector<double> s(a.order() + 1);
  double p = 1.0 / a0;
  for (int n = 0; n <= a.order(); ++n, p /= -a0) s[n] = p;
  return a.compose(s);
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * recip(b); }
inline Jet operator/(double a, const Jet& b) { return recip(b) * a; }

inline Jet sin(const Jet& a) {
  const double v = a.value(), sv = std::sin(v), cv = std::cos(v);
  std::vector<double> s(a.order() + 1);
  const double cyc[4] = {sv, cv, -sv, -cv};
  double f = 1;
  for (int n = 0; n <= a.order(); ++n) {
    if (n > 0) f *= n;
    s[n] = cyc[n % 4] / f;
  }
  return a.compose(s);
}

inline Jet cos(const Jet& a) {
  const double v = a.value(), sv = std::sin(v), cv = std::cos(v);
  std::vector<double> s(a.order() + 1);
  const double cyc[4] = {cv, -sv, -cv, sv};
  double f = 1;
  for (int n = 0; n <= a.order(); ++n) {
    if (n > 0) f *= n;
    s[n] = cyc[n % 4] / f;
  }
  return a.compose(s);
}

inline Jet exp(const Jet& a) {
  const double e = std::exp(a.value());
  std::vector<double> s(a.order() + 1);
  double f = 1;
  for (int n = 0; n <= a.order(); ++n) {
    if (n > 0) f *= n;
    s[n] = e / f;
  }
  return a.compose(s);
}

inline Jet log(const Jet& a) {
  const double v = a.value();
  if (!(v > 0.0)) throw DomainError("log of non-positive value");
  std::vector<double> s(a.order() + 1);
  s[0] = std::log(v);
  double p = 1.0 / v;
  for (int n = 1; n <= a.order(); ++n, p /= -v) s[n] = p / n;
  return a.compose(s);
}

inline Jet sqrt(const Jet& a) {
  const double v = a.value();
  if (v < 0.0 || (v == 0.0 && a.order() > 0)) throw DomainError("sqrt at a non-positive value");
  // generalized binomial: sqrt(v+h) = sqrt(v) * sum binom(1/2, n) (h/v)^n
  std::vector<double> s(a.order() + 1);
  double b = 1.0, p = 1.0;
  const double r = std::sqrt(v);
  for (int n = 0; n <= a.order(); ++n) {
    s[n] = r * b * p;
    b *= (0.5 - n) / (n + 1);
    if (v != 0.0) p /= v;
  }
  return a.compose(s);
}

inline Jet powi(const Jet& a, int k) {
  if (k == 0) return Jet::constant(a.space(), 1.0, a.order());
  if (k < 0) return recip(powi(a, -k));
  Jet r = a, base = a;
  bool first = true;
  for (int e = k; e > 0; e >>= 1) {
    if (e & 1) {
      r = first ? base : r * base;
      first = false;
    }
    if (e > 1) base = base * base;
  }
  return r;
}

}  // namespace bigtan
