#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bigtan/calculus.hpp"
#include "bigtan/parallel.hpp"
#include "bigtan/report.hpp"

namespace bigtan {

/// Canonical tensors of the big tangent manifold on a chart of base dimension m.
struct CanonicalPack {
  int m = 1;
  TensorField lambda;  // z_i dx^i
  TensorField varpi;   // d lambda = -dx^i ^ dz_i
  TensorField P;       // d/dy^i ^ d/dz_i
  TensorField Q;       // d/dy^i (.) d/dz_i
  TensorField S;       // dx^i (x) d/dy^i
  TensorField U;       // (Q + P) / 2
  TensorField ev;      // z_i y^i
  TensorField E1, E2, E;
  TensorField gV, omegaV;  // para-Hermitian pair on the vertical leaves
  TensorField FV;          // product structure: +1 on d/dy, -1 on d/dz
  TensorField g_pair;      // (xi^i zeta'_i + xi'^i zeta_i) / 2, the pairing that pairs lifts
};

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return v < 0 ? "(" + std::string(buf) + ")" : std::string(buf);
}

inline std::string var(Coord c, int i) { return std::string(1, "xyz"[static_cast<int>(c)]) + std::to_string(i + 1); }

inline TensorValue constant_tensor(std::vector<Slot> sig, int m) { return TensorValue(std::move(sig), 3 * m, 0.0); }

inline void require_base(const std::vector<Expr>& comps, int m, bool allow_y, bool allow_z, const char* what) {
  if (static_cast<int>(comps.size()) != m) throw Error(std::string(what) + ": expected m components");
  for (const auto& e : comps) {
    if (e.dim() != m) throw Error(std::string(what) + ": component dimension mismatch");
    if ((!allow_y && e.depends_on(Coord::y)) || (!allow_z && e.depends_on(Coord::z)))
      throw Error(std::string(what) + ": component '" + e.str() + "' has a forbidden dependency");
  }
}

inline std::vector<Jet> eval_all(const std::vector<Expr>& e, const Context& c) {
  std::vector<Jet> r;
  for (const auto& x : e) r.push_back(eval_jet(x, c));
  return r;
}

}  // namespace detail

inline CanonicalPack canonical_pack(int m) {
  if (m < 1 || m > 4) throw Error("canonical pack needs 1 <= m <= 4");
  using detail::var;
  const int n = 3 * m;
  auto X = [](int i) { return i; };
  auto Y = [m](int i) { return m + i; };
  auto Z = [m](int i) { return 2 * m + i; };
  CanonicalPack k;
  k.m = m;

  std::vector<std::string> lam(n, "0"), e1(n, "0"), e2(n, "0"), e(n, "0");
  std::string ev = "0";
  for (int i = 0; i < m; ++i) {
    lam[X(i)] = var(Coord::z, i);
    e1[Y(i)] = e[Y(i)] = var(Coord::y, i);
    e2[Z(i)] = e[Z(i)] = var(Coord::z, i);
    ev += " + " + var(Coord::z, i) + "*" + var(Coord::y, i);
  }
  k.lambda = one_form(m, lam);
  k.E1 = vector_field(m, e1);
  k.E2 = vector_field(m, e2);
  k.E = vector_field(m, e);
  k.ev = TensorField::scalar(parse_expr(ev, m));

  TensorValue w = detail::constant_tensor(sig_form(2), m), P = detail::constant_tensor(sig_multivector(2), m);
  TensorValue Q = P, S = detail::constant_tensor(sig_endo(), m), g = detail::constant_tensor(sig_form(2), m);
  TensorValue om = g, F = S, gp = g;
  for (int i = 0; i < m; ++i) {
    w(X(i), Z(i)) = -1.0;
    w(Z(i), X(i)) = 1.0;
    P(Y(i), Z(i)) = 1.0;
    P(Z(i), Y(i)) = -1.0;
    Q(Y(i), Z(i)) = Q(Z(i), Y(i)) = 1.0;
    S(Y(i), X(i)) = 1.0;
    g(Y(i), Z(i)) = g(Z(i), Y(i)) = 0.5;
    om(Z(i), Y(i)) = 0.5;
    om(Y(i), Z(i)) = -0.5;
    F(Y(i), Y(i)) = 1.0;
    F(Z(i), Z(i)) = -1.0;
    gp(X(i), Z(i)) = gp(Z(i), X(i)) = 0.5;
  }
  (void)n;
  const SlotSymmetry anti{SlotSymmetry::antisym, 0, 1}, sym{SlotSymmetry::sym, 0, 1};
  k.varpi = TensorField::constant(w, m, {anti});
  k.P = TensorField::constant(P, m, {anti});
  k.Q = TensorField::constant(Q, m, {sym});
  k.S = TensorField::constant(S, m);
  k.U = TensorField::constant(0.5 * (Q + P), m);
  k.gV = TensorField::constant(g, m, {sym});
  k.omegaV = TensorField::constant(om, m, {anti});
  k.FV = TensorField::constant(F, m);
  k.g_pair = TensorField::constant(gp, m, {sym});
  return k;
}

// ---------------------------------------------------------------------------
// Lifts from the base. Base fields are m component Exprs over the chart that may
// only depend on x.

/// Base field from component strings.
inline std::vector<Expr> base_field(int m, const std::vector<std::string>& comps) {
  std::vector<Expr> r;
  for (const auto& s : comps) r.push_back(parse_expr(s, m));
  detail::require_base(r, m, false, false, "base field");
  return r;
}

/// (X^v, alpha^v) = xi^i d/dy^i + alpha_i d/dz_i.
inline TensorField vertical_lift(const std::vector<Expr>& X, const std::vector<Expr>& alpha) {
  const int m = X.empty() ? (alpha.empty() ? 1 : alpha[0].dim()) : X[0].dim();
  detail::require_base(X, m, false, false, "vertical lift");
  detail::require_base(alpha, m, false, false, "vertical lift");
  std::vector<Expr> c(3 * m, Expr::constant(0.0, m));
  for (int i = 0; i < m; ++i) {
    c[m + i] = X[i];
    c[2 * m + i] = alpha[i];
  }
  return TensorField::from_exprs(sig_vector(), m, std::move(c));
}

/// Vertical lift of a base vector field given by its component jets.
inline JetTensor vertical_lift_jets(const std::vector<Jet>& xi, const Context& c) {
  std::vector<Jet> r(c.n(), c.zero());
  for (int i = 0; i < c.m(); ++i) r[c.m() + i] = xi[i];
  return from_vector(r);
}

/// Complete lift of a base field given by its component jets on the chart.
inline std::vector<Jet> complete_lift(const std::vector<Jet>& xi, const Context& c) {
  const int m = c.m();
  std::vector<Jet> r(3 * m, c.zero());
  for (int i = 0; i < m; ++i) {
    r[i] = xi[i];
    Jet yy = c.zero(), zz = c.zero();
    for (int j = 0; j < m; ++j) {
      yy += c.variable(m + j) * xi[i].diff(j);
      zz -= c.variable(2 * m + j) * xi[j].diff(i);
    }
    r[m + i] = yy;
    r[2 * m + i] = zz;
  }
  return r;
}

/// X^c = xi^i d/dx^i + y^j d_j xi^i d/dy^i - z_j d_i xi^j d/dz_i.
inline TensorField complete_lift(const std::vector<Expr>& X) {
  if (X.empty()) throw Error("complete lift: empty field");
  const int m = X[0].dim();
  detail::require_base(X, m, false, false, "complete lift");
  return TensorField(
      sig_vector(), m, [X](const Context& c) { return from_vector(complete_lift(detail::eval_all(X, c), c)); }, 1);
}

enum class LiftSource { tangent, cotangent };

/// Extended lift of a vertically projectable field on TM (xi^i d/dx^i + eta^i d/dy^i)
/// or on T*M (xi^i d/dx^i + zeta_i d/dz_i). `generalized` admits the pullback-section dependencies.
inline std::vector<Jet> extended_lift(LiftSource src, const std::vector<Jet>& xi, const std::vector<Jet>& w,
                                      const Context& c) {
  const int m = c.m();
  std::vector<Jet> r(3 * m, c.zero());
  for (int i = 0; i < m; ++i) {
    r[i] = xi[i];
    Jet acc = c.zero();
    if (src == LiftSource::tangent) {
      // -z_j d eta^j / d y^i on d/dz_i
      for (int j = 0; j < m; ++j) acc -= c.variable(2 * m + j) * w[j].diff(m + i);
      r[m + i] = w[i];
      r[2 * m + i] = acc;
    } else {
      // -y^j d zeta_j / d z_i on d/dy^i, dual to the tangent case
      for (int j = 0; j < m; ++j) acc -= c.variable(m + j) * w[j].diff(2 * m + i);
      r[m + i] = acc;
      r[2 * m + i] = w[i];
    }
  }
  return r;
}

inline TensorField extended_lift(LiftSource src, const std::vector<Expr>& xi, const std::vector<Expr>& w,
                                 bool generalized = false) {
  if (xi.empty()) throw Error("extended lift: empty field");
  const int m = xi[0].dim();
  const bool tm = src == LiftSource::tangent;
  // strict: TM xi(x), eta(x,y); T*M xi(x), zeta(x,z)
  // generalized: TM xi(x,z), eta(x,y,z); T*M xi(x,y), zeta(x,y,z)
  detail::require_base(xi, m, generalized && !tm, generalized && tm, "extended lift");
  detail::require_base(w, m, tm || generalized, !tm || generalized, "extended lift");
  return TensorField(
      sig_vector(), m,
      [src, xi, w](const Context& c) {
        return from_vector(extended_lift(src, detail::eval_all(xi, c), detail::eval_all(w, c), c));
      },
      1);
}

/// l_(X, alpha) = alpha_i y^i + z_i xi^i.
inline TensorField generalized_moment(const std::vector<Expr>& X, const std::vector<Expr>& alpha) {
  const int m = X.empty() ? (alpha.empty() ? 1 : alpha[0].dim()) : X[0].dim();
  detail::require_base(X, m, false, false, "generalized moment");
  detail::require_base(alpha, m, false, false, "generalized moment");
  std::string s = "0";
  for (int i = 0; i < m; ++i) {
    s += " + (" + alpha[i].str() + ")*" + detail::var(Coord::y, i);
    s += " + " + detail::var(Coord::z, i) + "*(" + X[i].str() + ")";
  }
  return TensorField::scalar(parse_expr(s, m));
}

// ---------------------------------------------------------------------------
// Generalized endomorphisms of T + T*: (X, a) -> (S X + sharp_B a, flat_C X - tS a).

struct GeneralizedEndo {
  TensorField S;
  std::optional<TensorField> B;  // bivector block
  std::optional<TensorField> C;  // 2-form block
};

inline GeneralizedEndo generalized_SP(const CanonicalPack& k) { return {k.S, k.P, std::nullopt}; }
inline GeneralizedEndo generalized_Svarpi(const CanonicalPack& k) { return {k.S, std::nullopt, k.varpi}; }

struct JetPair {
  std::vector<Jet> vec, form;
};

inline JetPair apply_generalized(const GeneralizedEndo& E, const JetPair& s, const Context& c) {
  const JetTensor S = E.S.eval(c);
  const int n = c.n();
  JetPair r{apply_endo(S, s.vec), std::vector<Jet>(n, c.zero())};
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k) r.form[a] -= s.form[k] * S(k, a);
  if (E.B) {
    const JetTensor B = E.B->eval(c);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) r.vec[j] += s.form[i] * B(i, j);
  }
  if (E.C) {
    const JetTensor C = E.C->eval(c);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) r.form[j] += s.vec[i] * C(i, j);
  }
  return r;
}

/// 2n x 2n matrix of a generalized endomorphism at a point (vector part first).
inline Eigen::MatrixXd generalized_matrix(const GeneralizedEndo& E, const ChartPoint& p) {
  const int n = p.dim();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  const TensorValue S = E.S.value(p);
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a) {
      M(k, a) = S(k, a);
      M(n + a, n + k) = -S(k, a);
    }
  if (E.B) {
    const TensorValue B = E.B->value(p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(j, n + i) = B(i, j);
  }
  if (E.C) {
    const TensorValue C = E.C->value(p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(n + j, i) = C(i, j);
  }
  return M;
}

/// Courant-Nijenhuis torsion [EA,EB] - E([EA,B] + [A,EB]) + E^2[A,B].
inline JetPair courant_nijenhuis(const GeneralizedEndo& E, const JetPair& A, const JetPair& B, const Context& c) {
  auto br = [](const JetPair& u, const JetPair& v) {
    auto r = courant_bracket(u.vec, u.form, v.vec, v.form);
    return JetPair{r.first, r.second};
  };
  auto add = [](JetPair a, const JetPair& b, double s) {
    for (std::size_t i = 0; i < a.vec.size(); ++i) {
      a.vec[i] += s * b.vec[i];
      a.form[i] += s * b.form[i];
    }
    return a;
  };
  const JetPair EA = apply_generalized(E, A, c), EB = apply_generalized(E, B, c);
  JetPair r = br(EA, EB);
  r = add(r, apply_generalized(E, add(br(EA, B), br(A, EB), 1.0), c), -1.0);
  r = add(r, apply_generalized(E, apply_generalized(E, br(A, B), c), c), 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Verification of the canonical structures and lifts.

namespace detail {

/// Random polynomial of degree <= 2 in the base coordinates.
inline Expr random_base_poly(int m, PointSampler& rng) {
  std::string s = num(rng.uniform(-1, 1));
  for (int i = 0; i < m; ++i) {
    s += " + " + num(rng.uniform(-1, 1)) + "*" + var(Coord::x, i);
    for (int j = i; j < m; ++j) s += " + " + num(rng.uniform(-1, 1)) + "*" + var(Coord::x, i) + "*" + var(Coord::x, j);
  }
  return parse_expr(s, m);
}

inline std::vector<Expr> random_base_field(int m, PointSampler& rng) {
  std::vector<Expr> r;
  for (int i = 0; i < m; ++i) r.push_back(random_base_poly(m, rng));
  return r;
}

inline double max_diff(const std::vector<Jet>& a, const std::vector<Jet>& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::fabs(a[i].value() - b[i].value()));
  return r;
}

inline Eigen::MatrixXd sharp_matrix(const TensorValue& T) { return MusicalMap(T).matrix(); }

/// Base vector field embedded in the chart: (xi, 0, 0).
inline std::vector<Jet> embed_base(const std::vector<Jet>& xi, const Context& c) {
  std::vector<Jet> r(c.n(), c.zero());
  for (int i = 0; i < c.m(); ++i) r[i] = xi[i];
  return r;
}

/// Chart point away from the zero section: |y|, |z| >= 0.1.
inline ChartPoint point_off_zero_section(int m, PointSampler& ps) {
  for (;;) {
    ChartPoint p = ps.point(m);
    double ny = 0, nz = 0;
    for (int i = 0; i < m; ++i) {
      ny += p.y[i] * p.y[i];
      nz += p.z[i] * p.z[i];
    }
    if (ny >= 0.01 && nz >= 0.01) return p;
  }
}

/// Pointwise algebraic axioms of a triple (S, P, Q): ranks, kernels and images, and the
/// composition rules of the flats (inverses of the sharps onto their images).
inline void triple_algebra(Report& r, const Eigen::MatrixXd& Sm, const TensorValue& P, const TensorValue& Q, int m,
                           double tol) {
  const int n = 3 * m;
  const MusicalMap mapP(P), mapQ(Q);
  const Eigen::MatrixXd& Pm = mapP.matrix();
  const Eigen::MatrixXd& Qm = mapQ.matrix();
  r.record("S^2 = 0", (Sm * Sm).cwiseAbs().maxCoeff(), tol);
  r.record("S o sharp_P = 0", (Sm * Pm).cwiseAbs().maxCoeff(), tol);
  const int rS = numeric_rank(Sm), rP = mapP.rank(), rQ = mapQ.rank();
  r.expect("rank S = m", rS == m, std::abs(rS - m));
  r.expect("rank P = 2m", rP == 2 * m, std::abs(rP - 2 * m));
  r.expect("rank Q = 2m", rQ == 2 * m, std::abs(rQ - 2 * m));
  Eigen::JacobiSVD<Eigen::MatrixXd> svdS(Sm, Eigen::ComputeFullV);
  const Eigen::MatrixXd kerS = svdS.matrixV().rightCols(n - rS);
  r.record("ker S = im sharp_P", subspace_distance(kerS, mapP.image()), tol);
  r.record("ker S = im sharp_Q", subspace_distance(kerS, mapQ.image()), tol);
  const Eigen::MatrixXd imtS = Sm.transpose();
  r.record("ker sharp_P = im tS", subspace_distance(mapP.kernel(), imtS), tol);
  r.record("ker sharp_Q = im tS", subspace_distance(mapQ.kernel(), imtS), tol);
  // compare on im sharp_Q, where both compositions are defined
  const Eigen::MatrixXd V = mapQ.image();
  const Eigen::MatrixXd PflatQ = Pm * mapQ.pseudo_inverse(), QflatP = Qm * mapP.pseudo_inverse();
  r.record("sharp_P flat_Q = sharp_Q flat_P", ((PflatQ - QflatP) * V).cwiseAbs().maxCoeff(), tol);
  r.record("sharp_Q flat_P S = -S", (QflatP * Sm + Sm).cwiseAbs().maxCoeff(), tol);
}

struct Section2Sample {
  ChartPoint p;
  std::vector<Expr> X, Y, alpha, beta;
  Expr f;
};

inline Report section2_point(const CanonicalPack& k, const Section2Sample& s) {
  constexpr double tol = 1e-9;
  const int m = k.m, n = 3 * m;
  const ChartPoint& p = s.p;
  Report r;
  const Context c(p, 2);

  const TensorValue S = k.S.value(p), P = k.P.value(p), Q = k.Q.value(p), w = k.varpi.value(p);
  const Eigen::MatrixXd Sm = endo_matrix(S), Qm = sharp_matrix(Q), Wm = sharp_matrix(w);
  const MusicalMap mapP(P), mapQ(Q), mapW(w);

  // algebraic relations of S, P, Q, varpi
  triple_algebra(r, Sm, P, Q, m, tol);
  r.record("flat_varpi o S = 0", (Wm * Sm).cwiseAbs().maxCoeff(), tol);
  r.expect("rank varpi = 2m", mapW.rank() == 2 * m, std::abs(mapW.rank() - 2 * m));

  // differential conditions
  r.record("N_S = 0", max_abs(values(nijenhuis_tensor(k.S.eval(c)))), tol);
  r.record("varpi = d lambda", max_abs_diff(values(exterior_derivative(k.lambda.eval(c))), w), tol);
  r.record("d varpi = 0", max_abs(values(exterior_derivative(k.varpi.eval(c)))), tol);
  r.record("[P,P] = 0", max_abs(values(schouten_bracket(k.P.eval(c), k.P.eval(c)))), tol);

  // Euler field relations
  const auto E = as_vector(k.E.eval(c));
  const TensorValue lam = k.lambda.value(p);
  r.record("E = E1 + E2", max_abs_diff(k.E.value(p), k.E1.value(p) + k.E2.value(p)), tol);
  r.record("L_E lambda = lambda", max_abs_diff(values(lie_derivative(E, k.lambda.eval(c))), lam), tol);
  r.record("L_E varpi = varpi", max_abs_diff(values(lie_derivative(E, k.varpi.eval(c))), w), tol);
  r.record("sharp_P lambda = 0", mapP.apply(to_eigen(lam)).cwiseAbs().maxCoeff(), tol);
  const auto dev = gradient(k.ev.eval(c).flat(0), n);
  r.record("sharp_Q d(ev) = E", (mapQ.apply(to_eigen(dev)) - to_eigen(E)).cwiseAbs().maxCoeff(), tol);
  r.record("L_E P = -2P", max_abs_diff(values(lie_derivative(E, k.P.eval(c))), -2.0 * P), tol);
  r.record("L_E Q = -2Q", max_abs_diff(values(lie_derivative(E, k.Q.eval(c))), -2.0 * Q), tol);
  r.record("U = (Q + P)/2", max_abs_diff(k.U.value(p), 0.5 * (Q + P)), tol);

  // para-Hermitian structure of the vertical leaves
  const Eigen::MatrixXd G = sharp_matrix(k.gV.value(p)).transpose(), Om = sharp_matrix(k.omegaV.value(p)).transpose();
  const Eigen::MatrixXd F = endo_matrix(k.FV.value(p));
  Eigen::MatrixXd Vert = Eigen::MatrixXd::Zero(n, 2 * m);
  for (int i = 0; i < 2 * m; ++i) Vert(m + i, i) = 1.0;
  r.record("F^2 = Id on V", ((F * F - Eigen::MatrixXd::Identity(n, n)) * Vert).cwiseAbs().maxCoeff(), tol);
  r.record("g(F., F.) = -g on V", (Vert.transpose() * (F.transpose() * G * F + G) * Vert).cwiseAbs().maxCoeff(), tol);
  r.record("omega = g(., F.) on V", (Vert.transpose() * (G * F - Om) * Vert).cwiseAbs().maxCoeff(), tol);

  // generalized 2-nilpotent structures
  const GeneralizedEndo SP = generalized_SP(k), SW = generalized_Svarpi(k);
  const Eigen::MatrixXd MP = generalized_matrix(SP, p), MW = generalized_matrix(SW, p);
  r.record("S_P^2 = 0", (MP * MP).cwiseAbs().maxCoeff(), tol);
  r.record("S_varpi^2 = 0", (MW * MW).cwiseAbs().maxCoeff(), tol);
  double nP = 0.0, nW = 0.0;
  const Context c1(p, 1);
  auto basis = [&](int a) {
    JetPair b{std::vector<Jet>(n, c1.zero()), std::vector<Jet>(n, c1.zero())};
    if (a < n)
      b.vec[a] = c1.constant(1.0);
    else
      b.form[a - n] = c1.constant(1.0);
    return b;
  };
  for (int a = 0; a < 2 * n; ++a)
    for (int b = a + 1; b < 2 * n; ++b) {
      const JetPair A = basis(a), B = basis(b);
      const JetPair tp = courant_nijenhuis(SP, A, B, c1), tw = courant_nijenhuis(SW, A, B, c1);
      for (int i = 0; i < n; ++i) {
        nP = std::max({nP, std::fabs(tp.vec[i].value()), std::fabs(tp.form[i].value())});
        nW = std::max({nW, std::fabs(tw.vec[i].value()), std::fabs(tw.form[i].value())});
      }
    }
  r.record("Courant-Nijenhuis of S_P = 0", nP, tol);
  r.record("Courant-Nijenhuis of S_varpi = 0", nW, tol);

  // vertical lift and push-forwards
  const auto Xj = eval_all(s.X, c), Yj = eval_all(s.Y, c), aj = eval_all(s.alpha, c), bj = eval_all(s.beta, c);
  const auto XaV = as_vector(vertical_lift(s.X, s.alpha).eval(c)), YbV = as_vector(vertical_lift(s.Y, s.beta).eval(c));
  r.record("[(X^v,a^v), (Y^v,b^v)] = 0", max_abs(values(from_vector(lie_bracket(XaV, YbV)))), tol);
  const Jet lYb = generalized_moment(s.Y, s.beta).eval(c).flat(0);
  r.record("(X^v,a^v)(l_(Y,b)) = a(Y) + b(X)",
           std::fabs(directional(XaV, lYb).value() - (pairing(aj, Yj) + pairing(bj, Xj)).value()), tol);
  // a generic tangent vector and covector built from the sample's fields
  Eigen::VectorXd vx(n), ax(n);
  for (int i = 0; i < m; ++i) {
    vx(i) = Xj[i].value();
    vx(m + i) = Yj[i].value();
    vx(2 * m + i) = aj[i].value();
    ax(i) = bj[i].value();
    ax(m + i) = aj[i].value();
    ax(2 * m + i) = Yj[i].value();
  }
  Eigen::VectorXd pushv = Eigen::VectorXd::Zero(n), qa = Eigen::VectorXd::Zero(n), qqa = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    pushv(m + i) = vx(i);          // (p_* X)^v
    qa(m + i) = ax(2 * m + i);     // (q' a)^v: gamma^i d/dy^i
    qqa(2 * m + i) = ax(m + i);    // (q'' a)^v: beta_i d/dz_i
  }
  r.record("S X = (p_* X)^v", (Sm * vx - pushv).cwiseAbs().maxCoeff(), tol);
  r.record("sharp_Q a = (q'a)^v + (q''a)^v", (Qm * ax - qa - qqa).cwiseAbs().maxCoeff(), tol);
  r.record("(q''a)^v = U(a)", (sharp_matrix(k.U.value(p)) * ax - qqa).cwiseAbs().maxCoeff(), tol);

  // complete lift
  const auto Xc = complete_lift(Xj, c), Yc = complete_lift(Yj, c);
  const auto XY = lie_bracket(embed_base(Xj, c), embed_base(Yj, c));
  const std::vector<Jet> XYb(XY.begin(), XY.begin() + m);
  const auto av = as_vector(vertical_lift(std::vector<Expr>(m, Expr::constant(0.0, m)), s.alpha).eval(c));
  const auto Yv = as_vector(vertical_lift(s.Y, std::vector<Expr>(m, Expr::constant(0.0, m))).eval(c));
  const TensorValue gp = k.g_pair.value(p);
  double gXa = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gXa += gp(i, j) * Xc[i].value() * av[j].value();
  r.record("g(X^c, a^v) = a(X)^v / 2", std::fabs(gXa - 0.5 * pairing(aj, Xj).value()), tol);
  r.record("[X^c, Y^v] = [X,Y]^v", max_diff(lie_bracket(Xc, Yv), as_vector(vertical_lift_jets(XYb, c))), tol);
  r.record("[X^c, Y^c] = [X,Y]^c", max_diff(lie_bracket(Xc, Yc), complete_lift(XYb, c)), tol);
  const Jet fj = eval_jet(s.f, c);
  std::vector<Jet> fX;
  for (const auto& x : Xj) fX.push_back(fj * x);
  const auto df = gradient(fj, n);
  Jet ldf = c.zero(), lX = c.zero();
  for (int i = 0; i < m; ++i) {
    ldf += df[i] * c.variable(m + i);
    lX += c.variable(2 * m + i) * Xj[i];
  }
  std::vector<Jet> rhs(n, c.zero());
  for (int i = 0; i < n; ++i) rhs[i] = fj * Xc[i];
  for (int i = 0; i < m; ++i) {
    rhs[m + i] += ldf * Xj[i];
    rhs[2 * m + i] -= lX * df[i];
  }
  r.record("(fX)^c = f^v X^c + l_df X^v - l_X (df)^v", max_diff(complete_lift(fX, c), rhs), tol);
  // defining directional derivatives of the complete lift
  const Jet Xf = directional(embed_base(Xj, c), fj);
  r.record("X^c(p*f) = p*(Xf)", std::fabs(directional(Xc, fj).value() - Xf.value()), tol);
  Jet ldXf = c.zero(), lXY = c.zero(), lY = c.zero();
  for (int i = 0; i < m; ++i) {
    ldXf += Xf.diff(i) * c.variable(m + i);
    lXY += c.variable(2 * m + i) * XYb[i];
    lY += c.variable(2 * m + i) * Yj[i];
  }
  r.record("X^c(l_df) = l_d(Xf)", std::fabs(directional(Xc, ldf).value() - ldXf.value()), tol);
  r.record("X^c(l_Y) = l_[X,Y]", std::fabs(directional(Xc, lY).value() - lXY.value()), tol);
  return r;
}

}  // namespace detail

/// All identities on the canonical structures and lifts at n_samples random points.
inline Report verify_section2(const CanonicalPack& k, std::uint64_t seed, int n_samples) {
  PointSampler ps(seed);
  std::vector<detail::Section2Sample> samples;
  for (int t = 0; t < n_samples; ++t) {
    detail::Section2Sample s;
    s.p = detail::point_off_zero_section(k.m, ps);
    s.X = detail::random_base_field(k.m, ps);
    s.Y = detail::random_base_field(k.m, ps);
    s.alpha = detail::random_base_field(k.m, ps);
    s.beta = detail::random_base_field(k.m, ps);
    s.f = detail::random_base_poly(k.m, ps);
    samples.push_back(std::move(s));
  }
  auto parts = parallel_map(samples.size(), [&](std::size_t i) { return detail::section2_point(k, samples[i]); });
  Report r("canonical structures and lifts");
  for (const auto& part : parts) r.merge(part);
  return r;
}

inline Report verify_section2(int m, std::uint64_t seed, int n_samples) {
  return verify_section2(canonical_pack(m), seed, n_samples);
}

}  // namespace bigtan
