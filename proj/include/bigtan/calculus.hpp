#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bigtan/field.hpp"

namespace bigtan {

// ---------------------------------------------------------------------------
// Pointwise operators on jets (natural frame).

/// X(f) = X^s d_s f.
inline Jet directional(const std::vector<Jet>& X, const Jet& f) {
  Jet r = X[0] * f.diff(0);
  for (std::size_t s = 1; s < X.size(); ++s) r += X[s] * f.diff(static_cast<int>(s));
  return r;
}

inline std::vector<Jet> gradient(const Jet& f, int n) {
  std::vector<Jet> g;
  for (int s = 0; s < n; ++s) g.push_back(f.diff(s));
  return g;
}

/// [X,Y]^k = X^s d_s Y^k - Y^s d_s X^k.
inline std::vector<Jet> lie_bracket(const std::vector<Jet>& X, const std::vector<Jet>& Y) {
  std::vector<Jet> r;
  r.reserve(X.size());
  for (std::size_t k = 0; k < X.size(); ++k) r.push_back(directional(X, Y[k]) - directional(Y, X[k]));
  return r;
}

inline JetTensor lie_derivative(const std::vector<Jet>& X, const JetTensor& T) {
  const int n = T.dim();
  std::vector<std::vector<Jet>> dX(n);  // dX[a][s] = d_s X^a
  for (int a = 0; a < n; ++a) dX[a] = gradient(X[a], n);
  JetTensor r = T;
  for (std::size_t f = 0; f < T.size(); ++f) {
    const auto idx = T.index(f);
    Jet acc = directional(X, T.flat(f));
    for (int k = 0; k < T.rank(); ++k) {
      auto j = idx;
      for (int s = 0; s < n; ++s) {
        j[k] = s;
        if (T.signature()[k] == Slot::up)
          acc -= T.at(j) * dX[idx[k]][s];
        else
          acc += T.at(j) * dX[s][idx[k]];
      }
    }
    r.flat(f) = acc;
  }
  return r;
}

/// (d w)_{i0..ik} = sum_j (-1)^j d_{ij} w_{i0..^ij..ik}; the invariant formula with no 1/k! factor.
inline JetTensor exterior_derivative(const JetTensor& w) {
  const int k = w.rank();
  const int n = w.dim();
  JetTensor r(sig_form(k + 1), n, w.flat(0).diff(0) * 0.0);
  for (std::size_t f = 0; f < r.size(); ++f) {
    const auto idx = r.index(f);
    Jet acc = r.flat(f);
    for (int j = 0; j <= k; ++j) {
      std::vector<int> rest;
      for (int q = 0; q <= k; ++q)
        if (q != j) rest.push_back(idx[q]);
      const Jet t = w.at(rest).diff(idx[j]);
      if (j % 2 == 0)
        acc += t;
      else
        acc -= t;
    }
    r.flat(f) = acc;
  }
  return r;
}

/// [P1,P2]^{ijk} = sum over cyclic (ijk) of P1^{si} d_s P2^{jk} + P2^{si} d_s P1^{jk}.
inline JetTensor schouten_bracket(const JetTensor& P1, const JetTensor& P2) {
  const int n = P1.dim();
  JetTensor r(sig_multivector(3), n, P1.flat(0).diff(0) * 0.0);
  auto term = [&](int i, int j, int k) {
    Jet acc = r.flat(0);
    for (int s = 0; s < n; ++s) acc += P1(s, i) * P2(j, k).diff(s) + P2(s, i) * P1(j, k).diff(s);
    return acc;
  };
  for (std::size_t f = 0; f < r.size(); ++f) {
    const auto idx = r.index(f);
    const int i = idx[0], j = idx[1], k = idx[2];
    r.flat(f) = term(i, j, k) + term(j, k, i) + term(k, i, j);
  }
  return r;
}

/// Apply a (1,1) tensor A (A(k, a) = k-th component of A(d_a)) to a vector.
inline std::vector<Jet> apply_endo(const JetTensor& A, const std::vector<Jet>& X) {
  const int n = A.dim();
  std::vector<Jet> r;
  for (int k = 0; k < n; ++k) {
    Jet s = A(k, 0) * X[0];
    for (int a = 1; a < n; ++a) s += A(k, a) * X[a];
    r.push_back(std::move(s));
  }
  return r;
}

enum class NijenhuisVariant {
  classical,  // [AX,AY] - A[AX,Y] - A[X,AY] + A^2[X,Y]
  nilpotent   // the same without the A^2 term; agrees with the classical form when A^2 = 0
};

/// Nijenhuis torsion of A evaluated on vector fields X, Y given as jets.
inline std::vector<Jet> nijenhuis_on(const JetTensor& A, const std::vector<Jet>& X, const std::vector<Jet>& Y,
                                     NijenhuisVariant v = NijenhuisVariant::classical) {
  const auto AX = apply_endo(A, X), AY = apply_endo(A, Y);
  auto inner = lie_bracket(AX, Y);
  const auto b2 = lie_bracket(X, AY);
  for (std::size_t k = 0; k < inner.size(); ++k) inner[k] += b2[k];
  auto r = lie_bracket(AX, AY);
  const auto Ai = apply_endo(A, inner);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] -= Ai[k];
  if (v == NijenhuisVariant::classical) {
    const auto A2 = apply_endo(A, apply_endo(A, lie_bracket(X, Y)));
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += A2[k];
  }
  return r;
}

/// N(k, a, b): components of the Nijenhuis torsion on the coordinate basis.
inline JetTensor nijenhuis_tensor(const JetTensor& A) {
  const int n = A.dim();
  const Jet zero = A.flat(0).diff(0) * 0.0;
  JetTensor N({Slot::up, Slot::down, Slot::down}, n, zero);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int k = 0; k < n; ++k) {
        Jet acc = zero;
        for (int s = 0; s < n; ++s)
          acc += A(s, a) * A(k, b).diff(s) - A(s, b) * A(k, a).diff(s) - A(k, s) * (A(s, b).diff(a) - A(s, a).diff(b));
        N(k, a, b) = acc;
      }
  return N;
}

/// alpha(X).
inline Jet pairing(const std::vector<Jet>& alpha, const std::vector<Jet>& X) {
  Jet r = alpha[0] * X[0];
  for (std::size_t i = 1; i < X.size(); ++i) r += alpha[i] * X[i];
  return r;
}

/// Courant bracket [(X,a),(Y,mu)] = ([X,Y], L_X mu - L_Y a + 1/2 d(a(Y) - mu(X))).
inline std::pair<std::vector<Jet>, std::vector<Jet>> courant_bracket(const std::vector<Jet>& X,
                                                                     const std::vector<Jet>& a,
                                                                     const std::vector<Jet>& Y,
                                                                     const std::vector<Jet>& mu) {
  const int n = static_cast<int>(X.size());
  auto v = lie_bracket(X, Y);
  const auto LXmu = as_vector(lie_derivative(X, from_vector(mu, Slot::down)));
  const auto LYa = as_vector(lie_derivative(Y, from_vector(a, Slot::down)));
  const Jet f = pairing(a, Y) - pairing(mu, X);
  std::vector<Jet> w;
  for (int i = 0; i < n; ++i) w.push_back(LXmu[i] - LYa[i] + 0.5 * f.diff(i));
  return {v, w};
}

// ---------------------------------------------------------------------------
// Field-level wrappers.

namespace detail {
inline void require_natural(const TensorField& f) {
  if (f.frame() != Frame::natural) throw Error("differential operators need natural-frame fields");
}
inline void require_same(const TensorField& a, const TensorField& b) {
  if (a.m() != b.m()) throw Error("fields live on different charts");
  require_natural(a);
  require_natural(b);
}
inline void require_vector(const TensorField& f) {
  if (f.signature() != sig_vector()) throw Error("expected a vector field");
}
}  // namespace detail

inline TensorField lie_bracket(const TensorField& X, const TensorField& Y) {
  detail::require_same(X, Y);
  detail::require_vector(X);
  detail::require_vector(Y);
  return TensorField(
      sig_vector(), X.m(),
      [X, Y](const Context& c) { return from_vector(lie_bracket(as_vector(X.eval(c)), as_vector(Y.eval(c)))); },
      std::max(X.depth(), Y.depth()) + 1);
}

inline TensorField lie_derivative(const TensorField& X, const TensorField& T) {
  detail::require_same(X, T);
  detail::require_vector(X);
  return TensorField(
      T.signature(), X.m(), [X, T](const Context& c) { return lie_derivative(as_vector(X.eval(c)), T.eval(c)); },
      std::max(X.depth(), T.depth()) + 1, Frame::natural, T.symmetries());
}

/// Largest antisymmetry violation over all slot pairs.
inline double antisymmetry_violation(const TensorValue& t) {
  std::vector<SlotSymmetry> decl;
  for (int i = 0; i < t.rank(); ++i)
    for (int j = i + 1; j < t.rank(); ++j) decl.push_back({SlotSymmetry::antisym, i, j});
  return symmetry_violation(t, decl);
}

inline TensorField exterior_derivative(const TensorField& w) {
  detail::require_natural(w);
  for (Slot s : w.signature())
    if (s != Slot::down) throw Error("exterior derivative needs a covariant form");
  const int k = w.rank();
  std::vector<SlotSymmetry> sym;
  for (int i = 0; i <= k; ++i)
    for (int j = i + 1; j <= k; ++j) sym.push_back({SlotSymmetry::antisym, i, j});
  return TensorField(
      sig_form(k + 1), w.m(),
      [w](const Context& c) {
        JetTensor t = w.eval(c);
        if (antisymmetry_violation(values(t)) > 1e-12 * std::max(1.0, max_abs(t)))
          throw Error("exterior derivative of a non-antisymmetric tensor");
        return exterior_derivative(t);
      },
      w.depth() + 1, Frame::natural, sym);
}

inline TensorField schouten_bracket(const TensorField& P1, const TensorField& P2) {
  detail::require_same(P1, P2);
  if (P1.signature() != sig_multivector(2) || P2.signature() != sig_multivector(2))
    throw Error("Schouten bracket needs bivectors");
  return TensorField(
      sig_multivector(3), P1.m(),
      [P1, P2](const Context& c) {
        const JetTensor a = P1.eval(c), b = P2.eval(c);
        if (antisymmetry_violation(values(a)) > 1e-12 * std::max(1.0, max_abs(a)) ||
            antisymmetry_violation(values(b)) > 1e-12 * std::max(1.0, max_abs(b)))
          throw Error("Schouten bracket of a non-antisymmetric bivector");
        return schouten_bracket(a, b);
      },
      std::max(P1.depth(), P2.depth()) + 1);
}

inline TensorField nijenhuis_tensor(const TensorField& A) {
  detail::require_natural(A);
  if (A.signature() != sig_endo()) throw Error("Nijenhuis tensor needs a (1,1) tensor");
  return TensorField({Slot::up, Slot::down, Slot::down}, A.m(),
                     [A](const Context& c) { return nijenhuis_tensor(A.eval(c)); }, A.depth() + 1, Frame::natural,
                     {{SlotSymmetry::antisym, 1, 2}});
}

inline GeneralizedSection courant_bracket(const GeneralizedSection& A, const GeneralizedSection& B) {
  detail::require_same(A.vec, B.vec);
  detail::require_same(A.form, B.form);
  const int depth = std::max({A.vec.depth(), A.form.depth(), B.vec.depth(), B.form.depth()}) + 1;
  auto part = [A, B](const Context& c, bool vec) {
    auto r = courant_bracket(as_vector(A.vec.eval(c)), as_vector(A.form.eval(c)), as_vector(B.vec.eval(c)),
                             as_vector(B.form.eval(c)));
    return vec ? from_vector(r.first) : from_vector(r.second, Slot::down);
  };
  return {TensorField(sig_vector(), A.vec.m(), [part](const Context& c) { return part(c, true); }, depth),
          TensorField(sig_form(1), A.vec.m(), [part](const Context& c) { return part(c, false); }, depth)};
}

// ---------------------------------------------------------------------------
// Musical maps of 2-tensors at a point, with rank handling.

/// Linear map in -> out, out_j = in_i T_{ij} (contraction on the first slot); for a
/// contravariant T this is the sharp map, for a covariant T the flat map.
class MusicalMap {
 public:
  static constexpr double kRankTol = 1e-9;

  explicit MusicalMap(const TensorValue& T) : n_(T.dim()) {
    if (T.rank() != 2) throw Error("musical map needs a 2-tensor");
    M_.resize(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) M_(j, i) = T(i, j);
    svd_ = Eigen::JacobiSVD<Eigen::MatrixXd>(M_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd_.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    rank_ = 0;
    for (int i = 0; i < s.size(); ++i)
      if (s(i) > kRankTol * smax) ++rank_;
  }

  explicit MusicalMap(const Eigen::MatrixXd& M) : n_(static_cast<int>(M.rows())), M_(M) {
    svd_ = Eigen::JacobiSVD<Eigen::MatrixXd>(M_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd_.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    rank_ = 0;
    for (int i = 0; i < s.size(); ++i)
      if (s(i) > kRankTol * smax) ++rank_;
  }

  int rank() const { return rank_; }
  const Eigen::MatrixXd& matrix() const { return M_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return M_ * v; }

  /// Least-squares preimage orthogonal to the kernel; throws if out is not in the image.
  Eigen::VectorXd preimage(const Eigen::VectorXd& out) const {
    const auto& s = svd_.singularValues();
    Eigen::VectorXd c = svd_.matrixU().transpose() * out;
    for (int i = 0; i < n_; ++i) c(i) = i < rank_ ? c(i) / s(i) : 0.0;
    Eigen::VectorXd x = svd_.matrixV() * c;
    if ((M_ * x - out).norm() > 1e-8 * std::max(1.0, out.norm())) throw Error("value lies outside the image");
    return x;
  }

  /// Orthonormal kernel basis (columns).
  Eigen::MatrixXd kernel() const { return svd_.matrixV().rightCols(n_ - rank_); }
  /// Orthonormal image basis (columns).
  Eigen::MatrixXd image() const { return svd_.matrixU().leftCols(rank_); }
  /// Moore-Penrose pseudo-inverse with the rank tolerance.
  Eigen::MatrixXd pseudo_inverse() const {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_, n_);
    const auto& s = svd_.singularValues();
    for (int i = 0; i < rank_; ++i) P += svd_.matrixV().col(i) * svd_.matrixU().col(i).transpose() / s(i);
    return P;
  }

 private:
  int n_;
  Eigen::MatrixXd M_;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_;
  int rank_ = 0;
};

enum class MusicalMode { forward, inverse };

struct SharpFlatResult {
  Eigen::VectorXd value;
  Eigen::MatrixXd kernel, image;
  int rank;
};

/// forward: contraction on the first slot; inverse: preimage modulo the kernel.
inline SharpFlatResult sharp_flat(const TensorValue& T, const Eigen::VectorXd& v, MusicalMode mode) {
  MusicalMap map(T);
  SharpFlatResult r;
  r.value = mode == MusicalMode::forward ? map.apply(v) : map.preimage(v);
  r.kernel = map.kernel();
  r.image = map.image();
  r.rank = map.rank();
  return r;
}

/// Rank of a set of column vectors with the relative singular value tolerance.
inline int numeric_rank(const Eigen::MatrixXd& cols, double tol = MusicalMap::kRankTol) {
  if (cols.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cols);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol * std::max(s(0), 1e-300)) ++r;
  return r;
}

/// Distance between the column spans of A and B (sine of the largest principal angle).
inline double subspace_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  auto basis = [](const Eigen::MatrixXd& X) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeFullU);
    const int r = numeric_rank(X);
    return Eigen::MatrixXd(svd.matrixU().leftCols(r));
  };
  const Eigen::MatrixXd Qa = basis(A), Qb = basis(B);
  if (Qa.cols() != Qb.cols()) return 1.0;
  if (Qa.cols() == 0) return 0.0;
  const Eigen::MatrixXd r1 = Qa - Qb * (Qb.transpose() * Qa);
  const Eigen::MatrixXd r2 = Qb - Qa * (Qa.transpose() * Qb);
  return std::max(r1.norm(), r2.norm());
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
inline Eigen::VectorXd to_eigen(const TensorValue& v) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) e(static_cast<Eigen::Index>(i)) = v.flat(i);
  return e;
}
inline Eigen::VectorXd to_eigen(const std::vector<Jet>& v) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) e(static_cast<Eigen::Index>(i)) = v[i].value();
  return e;
}
/// Matrix of a (1,1) tensor value: column a is A(d_a).
inline Eigen::MatrixXd endo_matrix(const TensorValue& A) {
  Eigen::MatrixXd M(A.dim(), A.dim());
  for (int k = 0; k < A.dim(); ++k)
    for (int a = 0; a < A.dim(); ++a) M(k, a) = A(k, a);
  return M;
}

}  // namespace bigtan
