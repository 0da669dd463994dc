#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bigtan/chart.hpp"

namespace bigtan {

enum class Slot { up, down };
enum class Frame { natural, adapted };

inline const char* frame_name(Frame f) { return f == Frame::natural ? "natural" : "adapted"; }

/// Dense tensor over an n-dimensional space; every slot has extent n.
/// T is double for point values and Jet for jet-valued fields at a point.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<Slot> sig, int n, const T& fill, Frame frame = Frame::natural)
      : sig_(std::move(sig)), n_(n), frame_(frame) {
    std::size_t sz = 1;
    for (std::size_t k = 0; k < sig_.size(); ++k) sz *= static_cast<std::size_t>(n_);
    c_.assign(sz, fill);
  }

  const std::vector<Slot>& signature() const { return sig_; }
  int rank() const { return static_cast<int>(sig_.size()); }
  int dim() const { return n_; }
  Frame frame() const { return frame_; }
  void set_frame(Frame f) { frame_ = f; }
  std::size_t size() const { return c_.size(); }

  T& flat(std::size_t i) { return c_[i]; }
  const T& flat(std::size_t i) const { return c_[i]; }

  template <class... I>
  T& operator()(I... idx) {
    return c_[offset({static_cast<int>(idx)...})];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    return c_[offset({static_cast<int>(idx)...})];
  }
  T& at(const std::vector<int>& idx) { return c_[offset(idx)]; }
  const T& at(const std::vector<int>& idx) const { return c_[offset(idx)]; }

  /// Multi-index of flat position i.
  std::vector<int> index(std::size_t i) const {
    std::vector<int> idx(sig_.size());
    for (int k = rank() - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(i % n_);
      i /= n_;
    }
    return idx;
  }

  std::size_t offset(const std::vector<int>& idx) const {
    std::size_t o = 0;
    for (int i : idx) o = o * n_ + static_cast<std::size_t>(i);
    return o;
  }

  template <class F>
  auto map(F&& f) const {
    using U = decltype(f(c_[0]));
    Tensor<U> r(sig_, n_, U{}, frame_);
    for (std::size_t i = 0; i < c_.size(); ++i) r.flat(i) = f(c_[i]);
    return r;
  }

 private:
  std::vector<Slot> sig_;
  int n_ = 0;
  Frame frame_ = Frame::natural;
  std::vector<T> c_;
};

using TensorValue = Tensor<double>;
using JetTensor = Tensor<Jet>;

inline std::vector<Slot> sig_vector() { return {Slot::up}; }
inline std::vector<Slot> sig_form(int k) { return std::vector<Slot>(k, Slot::down); }
inline std::vector<Slot> sig_multivector(int k) { return std::vector<Slot>(k, Slot::up); }
inline std::vector<Slot> sig_endo() { return {Slot::up, Slot::down}; }

inline TensorValue values(const JetTensor& t) {
  return t.map([](const Jet& j) { return j.value(); });
}

/// Lowest exact order among the components.
inline int min_order(const JetTensor& t) {
  int o = kMaxJetOrder;
  for (std::size_t i = 0; i < t.size(); ++i) o = std::min(o, t.flat(i).order());
  return o;
}

/// Largest absolute component difference of two point values.
inline double max_abs_diff(const TensorValue& a, const TensorValue& b) {
  if (a.size() != b.size()) throw Error("tensor shape mismatch");
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::fabs(a.flat(i) - b.flat(i)));
  return r;
}

inline double max_abs(const TensorValue& a) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::fabs(a.flat(i)));
  return r;
}

inline double max_abs(const JetTensor& a) { return max_abs(values(a)); }
inline double max_abs_diff(const JetTensor& a, const JetTensor& b) { return max_abs_diff(values(a), values(b)); }

inline JetTensor zero_tensor(const Context& ctx, std::vector<Slot> sig, Frame f = Frame::natural) {
  return JetTensor(std::move(sig), ctx.n(), ctx.zero(), f);
}

template <class T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw Error("tensor shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.flat(i) = a.flat(i) + b.flat(i);
  return a;
}
template <class T>
Tensor<T> operator-(Tensor<T> a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw Error("tensor shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.flat(i) = a.flat(i) - b.flat(i);
  return a;
}
template <class T>
Tensor<T> operator*(double s, Tensor<T> a) {
  for (std::size_t i = 0; i < a.size(); ++i) a.flat(i) = a.flat(i) * s;
  return a;
}

/// Symmetry declaration for a pair of slots.
struct SlotSymmetry {
  enum Kind { sym, antisym } kind;
  int i, j;
};

/// Largest violation of the declared symmetries.
inline double symmetry_violation(const TensorValue& t, const std::vector<SlotSymmetry>& decl) {
  double r = 0.0;
  for (std::size_t f = 0; f < t.size(); ++f) {
    const auto idx = t.index(f);
    for (const auto& s : decl) {
      auto sw = idx;
      std::swap(sw[s.i], sw[s.j]);
      const double other = t.at(sw);
      r = std::max(r, std::fabs(s.kind == SlotSymmetry::sym ? t.flat(f) - other : t.flat(f) + other));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Small dense matrices of jets: the linear algebra every construction needs.

class JetMatrix {
 public:
  JetMatrix() = default;
  JetMatrix(int rows, int cols, const Jet& fill) : r_(rows), c_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

  static JetMatrix identity(const Context& ctx, int n) {
    JetMatrix m(n, n, ctx.zero());
    for (int i = 0; i < n; ++i) m(i, i) = ctx.constant(1.0);
    return m;
  }

  int rows() const { return r_; }
  int cols() const { return c_; }
  Jet& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * c_ + j]; }
  const Jet& operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * c_ + j]; }

  JetMatrix transpose() const {
    JetMatrix t(c_, r_, a_.empty() ? Jet() : a_[0]);
    for (int i = 0; i < r_; ++i)
      for (int j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  JetMatrix block(int i0, int j0, int rows, int cols) const {
    JetMatrix b(rows, cols, (*this)(0, 0));
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) b(i, j) = (*this)(i0 + i, j0 + j);
    return b;
  }
  void set_block(int i0, int j0, const JetMatrix& b) {
    for (int i = 0; i < b.rows(); ++i)
      for (int j = 0; j < b.cols(); ++j) (*this)(i0 + i, j0 + j) = b(i, j);
  }

  friend JetMatrix operator*(const JetMatrix& a, const JetMatrix& b) {
    if (a.c_ != b.r_) throw Error("matrix shape mismatch");
    JetMatrix r(a.r_, b.c_, a(0, 0) * 0.0);
    for (int i = 0; i < a.r_; ++i)
      for (int j = 0; j < b.c_; ++j) {
        Jet s = a(i, 0) * b(0, j);
        for (int k = 1; k < a.c_; ++k) s += a(i, k) * b(k, j);
        r(i, j) = s;
      }
    return r;
  }
  friend JetMatrix operator+(JetMatrix a, const JetMatrix& b) {
    for (std::size_t i = 0; i < a.a_.size(); ++i) a.a_[i] += b.a_[i];
    return a;
  }
  friend JetMatrix operator-(JetMatrix a, const JetMatrix& b) {
    for (std::size_t i = 0; i < a.a_.size(); ++i) a.a_[i] -= b.a_[i];
    return a;
  }
  friend JetMatrix operator*(double s, JetMatrix a) {
    for (auto& x : a.a_) x *= s;
    return a;
  }

  std::vector<Jet> apply(const std::vector<Jet>& v) const {
    std::vector<Jet> r;
    r.reserve(r_);
    for (int i = 0; i < r_; ++i) {
      Jet s = (*this)(i, 0) * v[0];
      for (int k = 1; k < c_; ++k) s += (*this)(i, k) * v[k];
      r.push_back(std::move(s));
    }
    return r;
  }

  std::vector<std::vector<double>> values() const {
    std::vector<std::vector<double>> v(r_, std::vector<double>(c_));
    for (int i = 0; i < r_; ++i)
      for (int j = 0; j < c_; ++j) v[i][j] = (*this)(i, j).value();
    return v;
  }

 private:
  int r_ = 0, c_ = 0;
  std::vector<Jet> a_;
};

/// Gauss-Jordan inverse with partial pivoting on point values; throws if singular.
inline JetMatrix inverse(const JetMatrix& m, double tol = 1e-13) {
  const int n = m.rows();
  if (n != m.cols()) throw Error("inverse of a non-square matrix");
  JetMatrix a = m;
  JetMatrix inv(n, n, m(0, 0) * 0.0);
  for (int i = 0; i < n; ++i) inv(i, i) += 1.0;
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(m(i, j).value()));
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col).value()) > std::fabs(a(piv, col).value())) piv = r;
    if (std::fabs(a(piv, col).value()) <= tol * std::max(scale, 1e-300)) throw DomainError("singular matrix");
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    const Jet p = recip(a(col, col));
    for (int j = 0; j < n; ++j) {
      a(col, j) = a(col, j) * p;
      inv(col, j) = inv(col, j) * p;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const Jet f = a(r, col);
      for (int j = 0; j < n; ++j) {
        a(r, j) -= f * a(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

/// Determinant by elimination on jets.
inline Jet determinant(const JetMatrix& m) {
  const int n = m.rows();
  JetMatrix a = m;
  Jet det = a(0, 0) * 0.0 + 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col).value()) > std::fabs(a(piv, col).value())) piv = r;
    if (a(piv, col).value() == 0.0) return det * 0.0;
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
      det = -det;
    }
    det = det * a(col, col);
    const Jet p = recip(a(col, col));
    for (int r = col + 1; r < n; ++r) {
      const Jet f = a(r, col) * p;
      for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
    }
  }
  return det;
}

}  // namespace bigtan
