#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bigtan/bigcore.hpp"

namespace bigtan {

/// Coefficients of a horizontal bundle at a point: t(i,j) = t_i^j and tau(i,j) = tau_ij, so that
/// X_i = d/dx^i - t_i^j d/dy^j - tau_ij d/dz_j.
struct HCoeffs {
  JetMatrix t, tau;
};

/// A complement H of the vertical bundle, given by its coefficients. Coefficients are produced
/// as jets at a context; `depth` counts the derivatives they consume, so at a context of order K
/// the coefficients are exact to order K - depth. Bundles built directly from expressions keep
/// them for serialization and display.
class HorizontalBundle {
 public:
  using Gen = std::function<HCoeffs(const Context&)>;

  HorizontalBundle() = default;
  HorizontalBundle(int m, Gen gen, int depth) : m_(m), gen_(std::move(gen)), depth_(depth) {}

  static HorizontalBundle from_exprs(int m, std::vector<Expr> t, std::vector<Expr> tau) {
    const std::size_t mm = static_cast<std::size_t>(m) * m;
    if (t.size() != mm || tau.size() != mm) throw Error("horizontal bundle: expected m*m coefficients each");
    for (const auto& e : t)
      if (e.dim() != m) throw Error("horizontal bundle: coefficient dimension mismatch");
    for (const auto& e : tau)
      if (e.dim() != m) throw Error("horizontal bundle: coefficient dimension mismatch");
    auto te = std::make_shared<const std::vector<Expr>>(std::move(t));
    auto ue = std::make_shared<const std::vector<Expr>>(std::move(tau));
    HorizontalBundle h(
        m,
        [m, te, ue](const Context& c) {
          HCoeffs k{JetMatrix(m, m, c.zero()), JetMatrix(m, m, c.zero())};
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
              const Expr& a = (*te)[i * m + j];
              const Expr& b = (*ue)[i * m + j];
              if (!a.is_zero_literal()) k.t(i, j) = eval_jet(a, c);
              if (!b.is_zero_literal()) k.tau(i, j) = eval_jet(b, c);
            }
          return k;
        },
        0);
    h.t_exprs_ = te;
    h.tau_exprs_ = ue;
    return h;
  }

  static HorizontalBundle from_strings(int m, const std::vector<std::string>& t, const std::vector<std::string>& tau) {
    std::vector<Expr> a, b;
    for (const auto& s : t) a.push_back(parse_expr(s, m));
    for (const auto& s : tau) b.push_back(parse_expr(s, m));
    return from_exprs(m, std::move(a), std::move(b));
  }

  /// t = tau = 0: X_i = d/dx^i.
  static HorizontalBundle flat(int m) {
    return from_exprs(m, std::vector<Expr>(m * m, Expr::constant(0.0, m)), std::vector<Expr>(m * m, Expr::constant(0.0, m)));
  }

  int m() const { return m_; }
  int n() const { return 3 * m_; }
  int depth() const { return depth_; }
  HCoeffs coeffs(const Context& c) const {
    if (c.m() != m_) throw Error("horizontal bundle dimension does not match chart point");
    return gen_(c);
  }
  /// Point values (t, tau).
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> values(const ChartPoint& p) const {
    const HCoeffs k = coeffs(Context(p, depth_));
    Eigen::MatrixXd t(m_, m_), u(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < m_; ++j) {
        t(i, j) = k.t(i, j).value();
        u(i, j) = k.tau(i, j).value();
      }
    return {t, u};
  }
  const std::vector<Expr>* t_exprs() const { return t_exprs_.get(); }
  const std::vector<Expr>* tau_exprs() const { return tau_exprs_.get(); }

 private:
  int m_ = 1;
  Gen gen_;
  int depth_ = 0;
  std::shared_ptr<const std::vector<Expr>> t_exprs_, tau_exprs_;
};

// ---------------------------------------------------------------------------
// Adapted frame (X_i, d/dy^i, d/dz_i) and coframe (dx^i, theta^i, kappa_i).

/// Columns are the frame vectors in natural components.
inline JetMatrix adapted_frame_jets(const HCoeffs& k, const Context& c) {
  const int m = c.m();
  JetMatrix E = JetMatrix::identity(c, 3 * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      E(m + j, i) = -k.t(i, j);
      E(2 * m + j, i) = -k.tau(i, j);
    }
  return E;
}

/// Rows are the coframe forms: theta^j = dy^j + t_i^j dx^i, kappa_j = dz_j + tau_ij dx^i.
inline JetMatrix adapted_coframe_jets(const HCoeffs& k, const Context& c) {
  const int m = c.m();
  JetMatrix C = JetMatrix::identity(c, 3 * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      C(m + j, i) = k.t(i, j);
      C(2 * m + j, i) = k.tau(i, j);
    }
  return C;
}

/// Horizontal part of a vector: its x-components times the lifts X_i.
inline std::vector<Jet> horizontal_part(const HCoeffs& k, const std::vector<Jet>& v) {
  const int m = k.t.rows();
  std::vector<Jet> r(v.size(), v[0] * 0.0);
  for (int i = 0; i < m; ++i) {
    r[i] = v[i];
    for (int j = 0; j < m; ++j) {
      r[m + j] -= v[i] * k.t(i, j);
      r[2 * m + j] -= v[i] * k.tau(i, j);
    }
  }
  return r;
}

inline std::vector<Jet> vertical_part(const HCoeffs& k, const std::vector<Jet>& v) {
  std::vector<Jet> h = horizontal_part(k, v);
  for (std::size_t s = 0; s < v.size(); ++s) h[s] = v[s] - h[s];
  return h;
}

/// Horizontal lift X_i of d/dx^i.
inline TensorField horizontal_lift(const HorizontalBundle& H, int i) {
  if (i < 0 || i >= H.m()) throw Error("horizontal lift index out of range");
  return TensorField(
      sig_vector(), H.m(),
      [H, i](const Context& c) {
        const JetMatrix E = adapted_frame_jets(H.coeffs(c), c);
        std::vector<Jet> v;
        for (int s = 0; s < E.rows(); ++s) v.push_back(E(s, i));
        return from_vector(v);
      },
      H.depth());
}

/// The 3m coframe 1-forms (dx^1..dx^m, theta^1..theta^m, kappa_1..kappa_m).
inline std::vector<TensorField> adapted_coframe(const HorizontalBundle& H) {
  std::vector<TensorField> out;
  for (int r = 0; r < H.n(); ++r)
    out.emplace_back(
        sig_form(1), H.m(),
        [H, r](const Context& c) {
          const JetMatrix C = adapted_coframe_jets(H.coeffs(c), c);
          std::vector<Jet> v;
          for (int s = 0; s < C.cols(); ++s) v.push_back(C(r, s));
          return from_vector(v, Slot::down);
        },
        H.depth());
  return out;
}

/// pr_H as a (1,1) tensor: A(k, a) = k-th component of pr_H(d_a).
inline TensorField horizontal_projector(const HorizontalBundle& H) {
  return TensorField(
      sig_endo(), H.m(),
      [H](const Context& c) {
        const int n = c.n();
        const HCoeffs k = H.coeffs(c);
        JetTensor A = zero_tensor(c, sig_endo());
        for (int a = 0; a < n; ++a) {
          std::vector<Jet> e(n, c.zero());
          e[a] = c.constant(1.0);
          const auto h = horizontal_part(k, e);
          for (int s = 0; s < n; ++s) A(s, a) = h[s];
        }
        return A;
      },
      H.depth());
}

inline TensorField vertical_projector(const HorizontalBundle& H) {
  const TensorField ph = horizontal_projector(H);
  return TensorField(
      sig_endo(), H.m(),
      [ph](const Context& c) {
        JetTensor A = ph.eval(c);
        for (int a = 0; a < c.n(); ++a)
          for (int s = 0; s < c.n(); ++s) A(s, a) = (s == a ? c.constant(1.0) : c.zero()) - A(s, a);
        return A;
      },
      H.depth());
}

/// Ehresmann curvature on the lifts: R[i][j] = pr_V [X_i, X_j] (natural components).
/// The torsion of a Vranceanu-Bott connection built from a torsionless connection is -R_H.
inline std::vector<std::vector<std::vector<Jet>>> ehresmann_jets(const HCoeffs& k, const Context& c) {
  const int m = c.m(), n = c.n();
  const JetMatrix E = adapted_frame_jets(k, c);
  std::vector<std::vector<Jet>> X(m);
  for (int i = 0; i < m; ++i)
    for (int s = 0; s < n; ++s) X[i].push_back(E(s, i));
  std::vector<std::vector<std::vector<Jet>>> R(m, std::vector<std::vector<Jet>>(m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) R[i][j] = vertical_part(k, lie_bracket(X[i], X[j]));
  return R;
}

/// R_H as a V-valued 2-form: R(k, a, b) = k-th component of R_H(d_a, d_b).
inline TensorField ehresmann_curvature(const HorizontalBundle& H) {
  const std::vector<Slot> sig{Slot::up, Slot::down, Slot::down};
  return TensorField(
      sig, H.m(),
      [H, sig](const Context& c) {
        const int m = c.m();
        const auto R = ehresmann_jets(H.coeffs(c), c);
        JetTensor T(sig, c.n(), c.zero());
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            for (int s = 0; s < c.n(); ++s) T(s, i, j) = R[i][j][s];
        return T;
      },
      H.depth() + 1);
}

// ---------------------------------------------------------------------------
// Constructions.

/// Connection coefficients of a linear connection on the base: gamma[(a*m+b)*m+c] = Gamma^a_bc.
inline HorizontalBundle from_linear_connection(int m, const std::vector<Expr>& gamma) {
  if (static_cast<int>(gamma.size()) != m * m * m) throw Error("linear connection: expected m^3 coefficients");
  for (const auto& g : gamma) {
    if (g.dim() != m) throw Error("linear connection: coefficient dimension mismatch");
    if (g.depends_on(Coord::y) || g.depends_on(Coord::z))
      throw Error("linear connection: coefficient '" + g.str() + "' must depend on x only");
  }
  auto G = [&](int a, int b, int c) -> const Expr& { return gamma[(a * m + b) * m + c]; };
  std::vector<Expr> t, tau;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      std::string ts = "0", us = "0";
      for (int k = 0; k < m; ++k) {
        if (!G(j, i, k).is_zero_literal()) ts += "+" + detail::var(Coord::y, k) + "*" + G(j, i, k).str();
        if (!G(k, i, j).is_zero_literal()) us += "-" + detail::var(Coord::z, k) + "*" + G(k, i, j).str();
      }
      t.push_back(parse_expr(ts, m));
      tau.push_back(parse_expr(us, m));
    }
  return HorizontalBundle::from_exprs(m, std::move(t), std::move(tau));
}

inline HorizontalBundle from_linear_connection(int m, const std::vector<std::string>& gamma) {
  std::vector<Expr> g;
  for (const auto& s : gamma) g.push_back(parse_expr(s, m));
  return from_linear_connection(m, g);
}

/// Same construction from jet-valued coefficients Gamma^a_bc (x only), e.g. Christoffel symbols.
inline HorizontalBundle from_linear_connection(int m, std::function<std::vector<Jet>(const Context&)> gamma, int depth) {
  return HorizontalBundle(
      m,
      [m, gamma](const Context& c) {
        const std::vector<Jet> G = gamma(c);
        HCoeffs k{JetMatrix(m, m, c.zero()), JetMatrix(m, m, c.zero())};
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            for (int q = 0; q < m; ++q) {
              k.t(i, j) += c.variable(var_index(Coord::y, q, m)) * G[(j * m + i) * m + q];
              k.tau(i, j) -= c.variable(var_index(Coord::z, q, m)) * G[(q * m + i) * m + j];
            }
        return k;
      },
      depth);
}

namespace detail {

/// tau_ij = -z_h d t_i^h / dy^j.
inline JetMatrix tau_from_t(const JetMatrix& t, const Context& c) {
  const int m = c.m();
  JetMatrix u(m, m, c.zero());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int h = 0; h < m; ++h) u(i, j) -= c.variable(var_index(Coord::z, h, m)) * t(i, h).diff(var_index(Coord::y, j, m));
  return u;
}

/// t_i^j = -y^h d tau_ih / dz_j (the y-weighted form; a z-weighted t would not transform as a
/// horizontal coefficient).
inline JetMatrix t_from_tau(const JetMatrix& tau, const Context& c) {
  const int m = c.m();
  JetMatrix t(m, m, c.zero());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int h = 0; h < m; ++h)
        t(i, j) -= c.variable(var_index(Coord::y, h, m)) * tau(i, h).diff(var_index(Coord::z, j, m));
  return t;
}

inline std::vector<Expr> parse_all(int m, const std::vector<std::string>& s) {
  std::vector<Expr> r;
  for (const auto& x : s) r.push_back(parse_expr(x, m));
  return r;
}

}  // namespace detail

/// Canonical lift of a horizontal bundle of TM with coefficients t_i^j(x, y).
inline HorizontalBundle lift_from_tm(int m, const std::vector<Expr>& t) {
  if (static_cast<int>(t.size()) != m * m) throw Error("lift from TM: expected m*m coefficients");
  for (const auto& e : t)
    if (e.dim() != m || e.depends_on(Coord::z)) throw Error("lift from TM: coefficient '" + e.str() + "' must not depend on z");
  return HorizontalBundle(
      m,
      [m, t](const Context& c) {
        JetMatrix tj(m, m, c.zero());
        for (int i = 0; i < m * m; ++i)
          if (!t[i].is_zero_literal()) tj(i / m, i % m) = eval_jet(t[i], c);
        return HCoeffs{tj, detail::tau_from_t(tj, c)};
      },
      1);
}

/// Canonical lift of a horizontal bundle of T*M with coefficients tau_ij(x, z).
inline HorizontalBundle lift_from_cotm(int m, const std::vector<Expr>& tau) {
  if (static_cast<int>(tau.size()) != m * m) throw Error("lift from T*M: expected m*m coefficients");
  for (const auto& e : tau)
    if (e.dim() != m || e.depends_on(Coord::y)) throw Error("lift from T*M: coefficient '" + e.str() + "' must not depend on y");
  return HorizontalBundle(
      m,
      [m, tau](const Context& c) {
        JetMatrix u(m, m, c.zero());
        for (int i = 0; i < m * m; ++i)
          if (!tau[i].is_zero_literal()) u(i / m, i % m) = eval_jet(tau[i], c);
        return HCoeffs{detail::t_from_tau(u, c), u};
      },
      1);
}

inline HorizontalBundle lift_from_tm(int m, const std::vector<std::string>& t) { return lift_from_tm(m, detail::parse_all(m, t)); }
inline HorizontalBundle lift_from_cotm(int m, const std::vector<std::string>& tau) {
  return lift_from_cotm(m, detail::parse_all(m, tau));
}

// ---------------------------------------------------------------------------
// Second order vector fields y^i d/dx^i + eta^i d/dy^i + zeta_i d/dz_i.

class SecondOrderField {
 public:
  /// Returns (eta, zeta) as 2m jets.
  using Gen = std::function<std::vector<Jet>(const Context&)>;

  SecondOrderField() = default;
  SecondOrderField(int m, Gen gen, int depth) : m_(m), gen_(std::move(gen)), depth_(depth) {}

  static SecondOrderField from_exprs(std::vector<Expr> eta, std::vector<Expr> zeta) {
    const int m = static_cast<int>(eta.size());
    if (m < 1 || static_cast<int>(zeta.size()) != m) throw Error("second order field: expected m components each");
    for (const auto& e : eta)
      if (e.dim() != m) throw Error("second order field: dimension mismatch");
    for (const auto& e : zeta)
      if (e.dim() != m) throw Error("second order field: dimension mismatch");
    return SecondOrderField(
        m,
        [eta, zeta](const Context& c) {
          std::vector<Jet> r = detail::eval_all(eta, c);
          for (const auto& e : zeta) r.push_back(eval_jet(e, c));
          return r;
        },
        0);
  }
  static SecondOrderField from_strings(int m, const std::vector<std::string>& eta, const std::vector<std::string>& zeta) {
    return from_exprs(detail::parse_all(m, eta), detail::parse_all(m, zeta));
  }

  /// Canonical extension of eta(x, y, z): zeta_i = -1/2 z_h d eta^h / dy^i.
  static SecondOrderField canonical_extension(std::vector<Expr> eta) {
    const int m = static_cast<int>(eta.size());
    if (m < 1) throw Error("second order field: empty eta");
    return SecondOrderField(
        m,
        [eta, m](const Context& c) {
          std::vector<Jet> r = detail::eval_all(eta, c);
          for (int i = 0; i < m; ++i) {
            Jet s = c.zero();
            for (int h = 0; h < m; ++h) s -= 0.5 * c.variable(var_index(Coord::z, h, m)) * r[h].diff(var_index(Coord::y, i, m));
            r.push_back(s);
          }
          return r;
        },
        1);
  }

  int m() const { return m_; }
  int depth() const { return depth_; }
  std::vector<Jet> coeffs(const Context& c) const { return gen_(c); }

  /// Natural components of the vector field.
  std::vector<Jet> vector(const Context& c) const {
    const auto ez = gen_(c);
    std::vector<Jet> v;
    for (int i = 0; i < m_; ++i) v.push_back(c.variable(var_index(Coord::y, i, m_)));
    for (const auto& j : ez) v.push_back(j);
    return v;
  }
  TensorField field() const {
    auto self = *this;
    return TensorField(sig_vector(), m_, [self](const Context& c) { return from_vector(self.vector(c)); }, depth_);
  }

 private:
  int m_ = 1;
  Gen gen_;
  int depth_ = 0;
};

// ---------------------------------------------------------------------------
// Sprays of regular Lagrangians.

struct Spray {
  int m = 1;
  Expr lagrangian;
  SecondOrderField field;  // on TM: zeta = 0 and the z coordinates are inert
  HorizontalBundle tm;     // the TM bundle (tau = 0) with t_i^j = -1/2 d eta^j / dy^i
  HorizontalBundle H;      // its canonical lift to the big tangent manifold
};

namespace detail {

inline JetMatrix lagrangian_hessian(const Jet& L, const Context& c) {
  const int m = c.m();
  JetMatrix g(m, m, c.zero());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) g(i, j) = L.diff(var_index(Coord::y, i, m)).diff(var_index(Coord::y, j, m));
  return g;
}

inline double condition_number(const JetMatrix& g) {
  Eigen::MatrixXd v(g.rows(), g.cols());
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) v(i, j) = g(i, j).value();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
  const auto s = svd.singularValues();
  return s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

/// eta solving g_jk eta^k = dL/dx^j - y^k d^2L / dx^k dy^j.
inline std::vector<Jet> spray_eta(const Expr& L, const Context& c) {
  const int m = c.m();
  const Jet l = eval_jet(L, c);
  const JetMatrix g = lagrangian_hessian(l, c);
  if (!(condition_number(g) < 1e8)) throw DomainError("spray: singular Lagrangian Hessian");
  std::vector<Jet> rhs;
  for (int j = 0; j < m; ++j) {
    const Jet ly = l.diff(var_index(Coord::y, j, m));
    Jet r = l.diff(var_index(Coord::x, j, m));
    for (int k = 0; k < m; ++k) r -= c.variable(var_index(Coord::y, k, m)) * ly.diff(var_index(Coord::x, k, m));
    rhs.push_back(r);
  }
  return inverse(g).apply(rhs);
}

/// t_i^j = -1/2 d eta^j / dy^i.
inline JetMatrix spray_t(const std::vector<Jet>& eta, const Context& c) {
  const int m = c.m();
  JetMatrix t(m, m, c.zero());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) t(i, j) = -0.5 * eta[j].diff(var_index(Coord::y, i, m));
  return t;
}

}  // namespace detail

/// Spray of a regular Lagrangian L(x, y) and its horizontal bundles.
inline Spray spray_from_lagrangian(const Expr& L) {
  const int m = L.dim();
  if (L.depends_on(Coord::z)) throw Error("spray: the Lagrangian must depend on (x, y) only");
  Spray s;
  s.m = m;
  s.lagrangian = L;
  s.field = SecondOrderField(
      m,
      [L, m](const Context& c) {
        std::vector<Jet> r = detail::spray_eta(L, c);
        for (int i = 0; i < m; ++i) r.push_back(c.zero());
        return r;
      },
      2);
  s.tm = HorizontalBundle(
      m, [L, m](const Context& c) { return HCoeffs{detail::spray_t(detail::spray_eta(L, c), c), JetMatrix(m, m, c.zero())}; }, 3);
  s.H = HorizontalBundle(
      m,
      [L](const Context& c) {
        const JetMatrix t = detail::spray_t(detail::spray_eta(L, c), c);
        return HCoeffs{t, detail::tau_from_t(t, c)};
      },
      4);
  return s;
}

inline Spray spray_from_lagrangian(int m, const std::string& L) { return spray_from_lagrangian(parse_expr(L, m)); }

/// Max component of i(Gamma_L) theta + dE at p, where theta = d(dL/dy^i dx^i) and
/// E = y^i dL/dy^i - L. Computed with the exterior derivative, independently of the solve.
inline double spray_residual(const Spray& s, const ChartPoint& p) {
  const int m = s.m, n = 3 * m;
  const Context c(p, 2);
  const Jet L = eval_jet(s.lagrangian, c);
  std::vector<Jet> vt(n, c.zero());
  Jet E = -L;
  for (int i = 0; i < m; ++i) {
    const Jet ly = L.diff(var_index(Coord::y, i, m));
    vt[i] = ly;
    E += c.variable(var_index(Coord::y, i, m)) * ly;
  }
  const JetTensor theta = exterior_derivative(from_vector(vt, Slot::down));
  const std::vector<Jet> G = s.field.vector(c);
  double r = 0.0;
  for (int b = 0; b < n; ++b) {
    Jet acc = E.diff(b);
    for (int a = 0; a < n; ++a) acc += G[a] * theta(a, b);
    r = std::max(r, std::fabs(acc.value()));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Q_X = L_X S for a second order field and its (-1)-eigenbundle.

/// L_X S for an arbitrary vector field X.
inline TensorField lie_of_S(const TensorField& X) {
  const int m = X.m();
  const TensorField S = canonical_pack(m).S;
  return TensorField(
      sig_endo(), m, [X, S](const Context& c) { return lie_derivative(as_vector(X.eval(c)), S.eval(c)); }, X.depth() + 1);
}

/// max |Q^3 - Q| at p.
inline double cubic_residual(const TensorField& Q, const ChartPoint& p) {
  const Eigen::MatrixXd A = endo_matrix(Q.value(p));
  return (A * A * A - A).cwiseAbs().maxCoeff();
}

struct SecondOrderProjection {
  TensorField Q;
  HorizontalBundle H;
};

/// Q_X and H_X: X_i = d/dx^i + 1/2 d eta^j/dy^i d/dy^j + d zeta_j/dy^i d/dz_j. Q^3 = Q is asserted at
/// the probe points (seeded when none are given).
inline SecondOrderProjection second_order_projector(const SecondOrderField& X, std::vector<ChartPoint> probes = {},
                                                    double tol = 1e-8) {
  const int m = X.m();
  SecondOrderProjection r;
  r.Q = lie_of_S(X.field());
  if (probes.empty()) {
    PointSampler ps(0x51ce);
    for (int i = 0; i < 3; ++i) probes.push_back(ps.point(m));
  }
  for (const auto& p : probes)
    if (!(cubic_residual(r.Q, p) <= tol)) throw Error("second order projector: Q^3 != Q at a probe point");
  r.H = HorizontalBundle(
      m,
      [X, m](const Context& c) {
        const auto ez = X.coeffs(c);
        HCoeffs k{JetMatrix(m, m, c.zero()), JetMatrix(m, m, c.zero())};
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) {
            k.t(i, j) = -0.5 * ez[j].diff(var_index(Coord::y, i, m));
            k.tau(i, j) = -ez[m + j].diff(var_index(Coord::y, i, m));
          }
        return k;
      },
      X.depth() + 1);
  return r;
}

// ---------------------------------------------------------------------------
// Bidegree decomposition of the exterior derivative.

namespace detail {

/// Contract every slot of a covariant tensor with the columns of M: out(A..) = T(a..) M(a,A)...
inline JetTensor contract_all_down(const JetTensor& T, const JetMatrix& M) {
  JetTensor cur = T;
  const int n = T.dim();
  for (int k = 0; k < T.rank(); ++k) {
    JetTensor next = cur;
    for (std::size_t f = 0; f < cur.size(); ++f) {
      auto idx = cur.index(f);
      const int A = idx[k];
      Jet s = cur.flat(f) * 0.0;
      for (int a = 0; a < n; ++a) {
        idx[k] = a;
        s += cur.at(idx) * M(a, A);
      }
      next.flat(f) = s;
    }
    cur = std::move(next);
  }
  return cur;
}

inline int horizontal_count(const std::vector<int>& idx, int m) {
  int h = 0;
  for (int a : idx) h += a < m ? 1 : 0;
  return h;
}

}  // namespace detail

/// H-degree of a form at p (its V-degree is rank - p); nullopt if inhomogeneous. Zero forms
/// report H-degree equal to the rank.
inline std::optional<int> horizontal_degree(const TensorField& w, const HorizontalBundle& H, const ChartPoint& p,
                                            double tol = 1e-12) {
  const Context c(p, std::max(w.depth(), H.depth()));
  const JetTensor fr = detail::contract_all_down(w.eval(c), adapted_frame_jets(H.coeffs(c), c));
  const double scale = std::max(1.0, max_abs(fr));
  std::optional<int> deg;
  for (std::size_t f = 0; f < fr.size(); ++f) {
    if (std::fabs(fr.flat(f).value()) <= tol * scale) continue;
    const int h = detail::horizontal_count(fr.index(f), H.m());
    if (deg && *deg != h) return std::nullopt;
    deg = h;
  }
  return deg ? deg : std::optional<int>(w.rank());
}

struct DDecomposition {
  int p = 0, q = 0;  // bidegree of the input
  TensorField d, d1, d2, d3;  // d, d'_(1,0), d''_(0,1), partial_(2,-1)
};

/// Splits dw into bidegrees (p+1,q), (p,q+1), (p+2,q-1). The bidegree of w is read off its frame
/// components at the probe points.
inline DDecomposition decompose_d(const TensorField& w, const HorizontalBundle& H, std::vector<ChartPoint> probes = {}) {
  for (auto s : w.signature())
    if (s != Slot::down) throw Error("decompose_d: expected a differential form");
  if (probes.empty()) {
    PointSampler ps(0xdec0);
    for (int i = 0; i < 4; ++i) probes.push_back(ps.point(w.m()));
  }
  std::optional<int> deg;
  for (const auto& pt : probes) {
    const auto d = horizontal_degree(w, H, pt);
    if (!d || (deg && *deg != *d)) throw Error("decompose_d: the form is not of homogeneous bidegree");
    deg = d;
  }
  DDecomposition r;
  r.p = *deg;
  r.q = w.rank() - r.p;
  r.d = exterior_derivative(w);
  auto part = [&](int hdeg) {
    const int m = w.m();
    const TensorField dw = r.d;
    return TensorField(
        sig_form(w.rank() + 1), m,
        [dw, H, hdeg, m](const Context& c) {
          const HCoeffs k = H.coeffs(c);
          JetTensor fr = detail::contract_all_down(dw.eval(c), adapted_frame_jets(k, c));
          for (std::size_t f = 0; f < fr.size(); ++f)
            if (detail::horizontal_count(fr.index(f), m) != hdeg) fr.flat(f) = fr.flat(f) * 0.0;
          return detail::contract_all_down(fr, adapted_coframe_jets(k, c));
        },
        std::max(dw.depth(), H.depth()));
  };
  r.d1 = part(r.p + 1);
  r.d2 = part(r.p);
  r.d3 = part(r.p + 2);
  return r;
}

// ---------------------------------------------------------------------------

/// Nonlinear covariant derivative of a section (nu^i(x), kappa_i(x)) along xi^j d/dx^j at p:
/// (xi^j (d nu^i/dx^j + t_j^i), xi^j (d kappa_i/dx^j - tau_ji)).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> nonlinear_covariant_derivative(const HorizontalBundle& H,
                                                                                  const std::vector<Expr>& nu,
                                                                                  const std::vector<Expr>& kappa,
                                                                                  const std::vector<Expr>& xi,
                                                                                  const ChartPoint& p) {
  const int m = H.m();
  detail::require_base(nu, m, false, false, "covariant derivative section");
  detail::require_base(kappa, m, false, false, "covariant derivative section");
  detail::require_base(xi, m, false, false, "covariant derivative direction");
  const Context c(p, std::max(1, H.depth()));
  const HCoeffs k = H.coeffs(c);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m), b = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) {
    const double x = eval_jet(xi[j], c).value();
    for (int i = 0; i < m; ++i) {
      a(i) += x * (eval_jet(nu[i], c).d1(var_index(Coord::x, j, m)) + k.t(j, i).value());
      b(i) += x * (eval_jet(kappa[i], c).d1(var_index(Coord::x, j, m)) - k.tau(j, i).value());
    }
  }
  return {a, b};
}

/// True iff a o S = lambda at every point, i.e. the dy^i coefficient of a is z_i.
inline bool is_liouville_related(const TensorField& a, const std::vector<ChartPoint>& points, double tol = 1e-10) {
  if (a.rank() != 1 || a.signature()[0] != Slot::down) throw Error("is_liouville_related: expected a 1-form");
  const int m = a.m();
  for (const auto& p : points) {
    const TensorValue v = a.value(p);
    for (int i = 0; i < m; ++i)
      if (std::fabs(v(m + i) - p.z[i]) > tol * std::max(1.0, std::fabs(p.z[i]))) return false;
  }
  return true;
}

}  // namespace bigtan
