#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bigtan/bigcore.hpp"

namespace bigtan {

/// A triple (S, P, Q) on a 3m-dimensional chart.
struct TriplePack {
  int m = 1;
  TensorField S, P, Q;
};

inline TriplePack canonical_triple(int m) {
  const CanonicalPack k = canonical_pack(m);
  return {m, k.S, k.P, k.Q};
}

/// Frame (a_i, b_i, c^i) as the columns of a 3m x 3m matrix, in that order.
struct AdaptedFrame {
  ChartPoint point;
  Eigen::MatrixXd frame;
  Eigen::MatrixXd a() const { return frame.leftCols(frame.cols() / 3); }
  Eigen::MatrixXd b() const { return frame.middleCols(frame.cols() / 3, frame.cols() / 3); }
  Eigen::MatrixXd c() const { return frame.rightCols(frame.cols() / 3); }
};

/// Axioms of the triple at the given points.
inline Report triple_axiom_check(const TriplePack& T, const std::vector<ChartPoint>& points, double tol = 1e-9) {
  auto parts = parallel_map(points.size(), [&](std::size_t i) {
    Report r;
    const ChartPoint& p = points[i];
    detail::triple_algebra(r, endo_matrix(T.S.value(p)), T.P.value(p), T.Q.value(p), T.m, tol);
    return r;
  });
  Report r("triple axioms");
  for (const auto& part : parts) r.merge(part);
  return r;
}

inline Report triple_axiom_check(const TriplePack& T, std::uint64_t seed, int n_points, double tol = 1e-9) {
  PointSampler ps(seed);
  std::vector<ChartPoint> pts;
  for (int i = 0; i < n_points; ++i) pts.push_back(ps.point(T.m));
  return triple_axiom_check(T, pts, tol);
}

/// Frame residual: b_i = S a_i, S b_i = 0, S c^i = 0, P = b_i ^ c^i, Q = b_i (.) c^i.
inline double frame_residual(const TriplePack& T, const AdaptedFrame& F) {
  const int m = T.m, n = 3 * m;
  const Eigen::MatrixXd S = endo_matrix(T.S.value(F.point));
  const TensorValue P = T.P.value(F.point), Q = T.Q.value(F.point);
  const Eigen::MatrixXd a = F.a(), b = F.b(), c = F.c();
  double r = (S * a - b).cwiseAbs().maxCoeff();
  r = std::max(r, (S * b).cwiseAbs().maxCoeff());
  r = std::max(r, (S * c).cwiseAbs().maxCoeff());
  const Eigen::MatrixXd bc = b * c.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      r = std::max(r, std::fabs(P(i, j) - (bc(i, j) - bc(j, i))));
      r = std::max(r, std::fabs(Q(i, j) - (bc(i, j) + bc(j, i))));
    }
  return r;
}

/// Adapted frame built from the triple at p: a_i spans a complement of ker S (the Euclidean
/// orthogonal complement unless `a_choice` supplies m columns), b_i = S a_i, and c^i comes from
/// vectors dual to b_i for g = <flat_Q ., .> on im sharp_Q, projected onto the eigenbundle of
/// phi = sharp_Q o flat_P opposite to the one holding b_i.
inline AdaptedFrame adapted_frame(const TriplePack& T, const ChartPoint& p,
                                  const std::optional<Eigen::MatrixXd>& a_choice = std::nullopt) {
  const int m = T.m, n = 3 * m;
  const Report ax = triple_axiom_check(T, std::vector<ChartPoint>{p}, 1e-8);
  if (!ax.all_pass()) throw Error("adapted frame: the triple axioms fail at this point");
  const Eigen::MatrixXd S = endo_matrix(T.S.value(p));
  const MusicalMap mapP(T.P.value(p)), mapQ(T.Q.value(p));

  Eigen::MatrixXd a;
  if (a_choice) {
    a = *a_choice;
    if (a.rows() != n || a.cols() != m || numeric_rank(S * a) != m)
      throw Error("adapted frame: a_choice must be m vectors spanning a complement of ker S");
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeFullV);
    a = svd.matrixV().leftCols(m);
  }
  const Eigen::MatrixXd b = S * a;

  const Eigen::MatrixXd flatQ = mapQ.pseudo_inverse();
  auto g = [&](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
    return (flatQ * u).transpose() * v;
  };
  const Eigen::MatrixXd phi = mapQ.matrix() * mapP.pseudo_inverse();

  // w_j in V with g(b_i, w_j) = delta_ij (minimum-norm solution in a basis of V)
  const Eigen::MatrixXd V = mapQ.image();
  const Eigen::MatrixXd lhs = g(b, V);
  const Eigen::MatrixXd u = lhs.completeOrthogonalDecomposition().solve(Eigen::MatrixXd::Identity(m, m));
  const Eigen::MatrixXd w = V * u;
  const Eigen::MatrixXd gw = g(w, w);
  const Eigen::MatrixXd ct = w - 0.5 * b * gw;  // g(ct, ct) = 0, g(b, ct) = Id

  // eigenvalue of phi on b; the axioms force +-1
  const double eps = (b.transpose() * phi * b).trace() / (b.transpose() * b).trace();
  const Eigen::MatrixXd c = 0.5 * (ct - eps * phi * ct);

  AdaptedFrame F{p, Eigen::MatrixXd(n, n)};
  F.frame << a, b, c;
  return F;
}

// ---------------------------------------------------------------------------
// Block patterns of coordinate changes.

namespace detail {

/// Largest deviation of a 3m x 3m matrix D (blocks D_rc) from the displayed pattern:
/// D_21 = D_23 = D_31 = 0, D_22 = D_11, D_33 = D_11^{-T}, plus D_32 = 0 when `integrable`.
inline double block_pattern_residual(const Eigen::MatrixXd& D, int m, bool integrable) {
  auto B = [&](int r, int c) { return D.block(r * m, c * m, m, m); };
  double r = 0.0;
  r = std::max(r, B(1, 0).cwiseAbs().maxCoeff());
  r = std::max(r, B(1, 2).cwiseAbs().maxCoeff());
  r = std::max(r, B(2, 0).cwiseAbs().maxCoeff());
  if (integrable) r = std::max(r, B(2, 1).cwiseAbs().maxCoeff());
  r = std::max(r, (B(1, 1) - B(0, 0)).cwiseAbs().maxCoeff());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(B(0, 0));
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  r = std::max(r, (B(2, 2) - lu.inverse().transpose()).cwiseAbs().maxCoeff());
  return r;
}

}  // namespace detail

/// Jacobian J(k, l) = d new^k / d old^l of a change between canonical-atlas charts. The
/// displayed pattern is on the transpose (block (r, c) holds the derivatives of the c-th new
/// coordinate group along the r-th old group).
inline bool canonical_atlas_jacobian_check(const Eigen::MatrixXd& J, bool integrable = false, double tol = 1e-9) {
  if (J.rows() != J.cols() || J.rows() % 3 != 0 || J.rows() == 0) return false;
  return detail::block_pattern_residual(J.transpose(), static_cast<int>(J.rows() / 3), integrable) <= tol;
}

/// Residual of a frame change F_new = F_old M against the structure group: M^T must have the
/// pattern [[A, B, C], [0, A, 0], [0, 0, A^{-T}]].
inline double bt_orbit_residual(const AdaptedFrame& from, const AdaptedFrame& to) {
  const Eigen::MatrixXd M = from.frame.fullPivLu().solve(to.frame);
  return detail::block_pattern_residual(M.transpose(), static_cast<int>(M.rows() / 3), true);
}

// ---------------------------------------------------------------------------
// Integrability conditions.

/// Distribution spanned by m vector fields.
using Distribution = std::vector<TensorField>;

/// Hamiltonian field sharp_P df as jets: X^j = d_i f P^{ij}.
inline std::vector<Jet> hamiltonian_field(const JetTensor& P, const Jet& f) {
  const int n = P.dim();
  std::vector<Jet> X(n, f.diff(0) * 0.0);
  for (int i = 0; i < n; ++i) {
    const Jet fi = f.diff(i);
    for (int j = 0; j < n; ++j) X[j] += fi * P(i, j);
  }
  return X;
}

/// Default test functions: the 3m coordinates and five random quadratics of the form
/// a(x, z) + b_i(x) y^i. Hamiltonian fields of functions with d^2 f / dy dy or d^2 f / dy dz
/// nonzero do not preserve even the canonical S, so the quadratics stay in this class.
inline std::vector<Expr> default_test_functions(int m, std::uint64_t seed = 0) {
  std::vector<Expr> fs;
  for (int i = 0; i < 3 * m; ++i) fs.push_back(Expr::variable(static_cast<Coord>(i / m), i % m, m));
  PointSampler rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::string> xz;
  for (int i = 0; i < m; ++i) xz.push_back(detail::var(Coord::x, i));
  for (int i = 0; i < m; ++i) xz.push_back(detail::var(Coord::z, i));
  for (int q = 0; q < 5; ++q) {
    std::string s = detail::num(rng.uniform(-1, 1));
    for (std::size_t i = 0; i < xz.size(); ++i) {
      s += " + " + detail::num(rng.uniform(-1, 1)) + "*" + xz[i];
      for (std::size_t j = i; j < xz.size(); ++j)
        s += " + " + detail::num(rng.uniform(-1, 1)) + "*" + xz[i] + "*" + xz[j];
    }
    for (int i = 0; i < m; ++i) {
      std::string b = detail::num(rng.uniform(-1, 1));
      for (int j = 0; j < m; ++j) b += " + " + detail::num(rng.uniform(-1, 1)) + "*" + detail::var(Coord::x, j);
      s += " + (" + b + ")*" + detail::var(Coord::y, i);
    }
    fs.push_back(parse_expr(s, m));
  }
  return fs;
}

/// N_S = 0, [P,P] = 0 and L_{sharp_P df} S = 0 at sample points; with a distribution Delta also
/// P-Lagrangian, Q-isotropic, involutive and ker S = im S + Delta (direct).
inline Report integrability_check(const TriplePack& T, const std::vector<Expr>& test_functions,
                                  const std::optional<Distribution>& Delta, const std::vector<ChartPoint>& points,
                                  double tol = 1e-9) {
  if (test_functions.empty()) throw Error("integrability check needs test functions");
  if (Delta && static_cast<int>(Delta->size()) != T.m) throw Error("the distribution must have m spanning fields");
  const int m = T.m, n = 3 * m;
  auto parts = parallel_map(points.size(), [&](std::size_t idx) {
    Report r;
    const ChartPoint& p = points[idx];
    const Context c(p, 2);
    const JetTensor S = T.S.eval(c), P = T.P.eval(c);
    r.record("N_S = 0", max_abs(values(nijenhuis_tensor(S))), tol);
    r.record("[P,P] = 0", max_abs(values(schouten_bracket(P, P))), tol);
    double ls = 0.0;
    for (const auto& f : test_functions)
      ls = std::max(ls, max_abs(values(lie_derivative(hamiltonian_field(P, eval_jet(f, c)), S))));
    r.record("L_{sharp_P df} S = 0", ls, tol);
    if (!Delta) return r;

    std::vector<std::vector<Jet>> Z;
    Eigen::MatrixXd Zm(n, m);
    for (int k = 0; k < m; ++k) {
      Z.push_back(as_vector((*Delta)[k].eval(c)));
      Zm.col(k) = to_eigen(Z.back());
    }
    const MusicalMap mapP(values(P)), mapQ(T.Q.value(p));
    // flats are only defined on the images of the sharps
    const Eigen::MatrixXd inP = mapP.matrix() * mapP.pseudo_inverse() * Zm - Zm;
    const Eigen::MatrixXd inQ = mapQ.matrix() * mapQ.pseudo_inverse() * Zm - Zm;
    r.record("Delta in im sharp_P", inP.cwiseAbs().maxCoeff(), tol);
    r.record("Delta in im sharp_Q", inQ.cwiseAbs().maxCoeff(), tol);
    r.record("<flat_P Z1, Z2> = 0", ((mapP.pseudo_inverse() * Zm).transpose() * Zm).cwiseAbs().maxCoeff(), tol);
    r.record("<flat_Q Z1, Z2> = 0", ((mapQ.pseudo_inverse() * Zm).transpose() * Zm).cwiseAbs().maxCoeff(), tol);
    // involutivity: brackets stay in the span (no rank growth)
    const int rz = numeric_rank(Zm);
    r.expect("rank Delta = m", rz == m, std::abs(rz - m));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Zm, Eigen::ComputeFullU);
    const Eigen::MatrixXd U = svd.matrixU().leftCols(rz);
    double inv = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const Eigen::VectorXd br = to_eigen(lie_bracket(Z[i], Z[j]));
        inv = std::max(inv, (br - U * (U.transpose() * br)).cwiseAbs().maxCoeff());
      }
    r.record("Delta involutive", inv, 1e-8);
    const Eigen::MatrixXd Sm = endo_matrix(values(S));
    Eigen::JacobiSVD<Eigen::MatrixXd> svdS(Sm, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const int rS = numeric_rank(Sm);
    Eigen::MatrixXd sum(n, rS + m);
    sum << svdS.matrixU().leftCols(rS), Zm;
    r.expect("im S + Delta is direct", numeric_rank(sum) == rS + m);
    r.record("ker S = im S + Delta", subspace_distance(svdS.matrixV().rightCols(n - rS), sum), tol);
    return r;
  });
  Report r("integrability");
  for (const auto& part : parts) r.merge(part);
  return r;
}

inline Report integrability_check(const TriplePack& T, const std::vector<Expr>& test_functions,
                                  const std::optional<Distribution>& Delta, std::uint64_t seed, int n_points,
                                  double tol = 1e-9) {
  PointSampler ps(seed);
  std::vector<ChartPoint> pts;
  for (int i = 0; i < n_points; ++i) pts.push_back(ps.point(T.m));
  return integrability_check(T, test_functions, Delta, pts, tol);
}

/// span{d/dz_i}.
inline Distribution canonical_delta(int m) {
  Distribution d;
  for (int i = 0; i < m; ++i) {
    TensorValue v(sig_vector(), 3 * m, 0.0);
    v(2 * m + i) = 1.0;
    d.push_back(TensorField::constant(v, m));
  }
  return d;
}

}  // namespace bigtan
