#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "bigtan/metrics.hpp"
#include "bigtan/parallel.hpp"

namespace bigtan {

/// Vertical sections in the basis (d/dy^1..d/dy^m, d/dz_1..d/dz_m).
using VSection = std::vector<Jet>;

// ---------------------------------------------------------------------------
// Vertical metrics

/// A metric on V given as the 2m x 2m matrix of its values on (d/dy, d/dz). The blocks are
/// h = G(d/dy, d/dy), k = G(d/dz, d/dz) and lm = G(d/dy, d/dz); the endomorphism l of V1 is lm^T.
class VerticalMetric {
 public:
  using Gen = std::function<JetMatrix(const Context&)>;

  VerticalMetric(int m, Gen gen, int depth) : m_(m), gen_(std::move(gen)), depth_(depth) {}

  /// Blocks as row-major m x m expressions; lm(i, j) = G(d/dy^i, d/dz_j).
  static VerticalMetric from_blocks(int m, std::vector<Expr> h, std::vector<Expr> lm, std::vector<Expr> k) {
    const std::size_t mm = static_cast<std::size_t>(m) * m;
    if (h.size() != mm || lm.size() != mm || k.size() != mm) throw Error("vertical metric: expected m*m entries per block");
    return VerticalMetric(
        m,
        [m, h, lm, k](const Context& c) {
          JetMatrix G(2 * m, 2 * m, c.zero());
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
              G(i, j) = eval_jet(h[i * m + j], c);
              G(m + i, m + j) = eval_jet(k[i * m + j], c);
              G(i, m + j) = G(m + j, i) = eval_jet(lm[i * m + j], c);
            }
          return G;
        },
        0);
  }
  static VerticalMetric from_blocks(int m, const std::vector<std::string>& h, const std::vector<std::string>& lm,
                                    const std::vector<std::string>& k) {
    return from_blocks(m, detail::parse_all(m, h), detail::parse_all(m, lm), detail::parse_all(m, k));
  }

  int m() const { return m_; }
  int depth() const { return depth_; }
  JetMatrix matrix(const Context& c) const {
    if (c.m() != m_) throw Error("vertical metric dimension does not match chart point");
    return gen_(c);
  }
  Eigen::MatrixXd value(const ChartPoint& p) const {
    const JetMatrix G = matrix(Context(p, depth_));
    Eigen::MatrixXd v(2 * m_, 2 * m_);
    for (int i = 0; i < 2 * m_; ++i)
      for (int j = 0; j < 2 * m_; ++j) v(i, j) = G(i, j).value();
    return v;
  }

 private:
  int m_;
  Gen gen_;
  int depth_;
};

namespace detail {

inline Eigen::MatrixXd values_of(const JetMatrix& M) {
  Eigen::MatrixXd v(M.rows(), M.cols());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) v(i, j) = M(i, j).value();
  return v;
}

inline JetMatrix checked_inverse(const JetMatrix& M, const char* what) {
  if (!(condition_number(M) < 1e12)) throw DomainError(std::string(what) + ": singular matrix");
  return inverse(M);
}

/// k = sigma^-1, l = sigma^-1 psi, h = sigma - psi sigma^-1 psi.
inline JetMatrix vm_matrix(const JetMatrix& sigma, const JetMatrix& psi) {
  const int m = sigma.rows();
  const JetMatrix si = checked_inverse(sigma, "vm_from_sigma_psi");
  JetMatrix G(2 * m, 2 * m, sigma(0, 0) * 0.0);
  G.set_block(0, 0, sigma - psi * si * psi);
  const JetMatrix lm = -1.0 * (psi * si);
  G.set_block(0, m, lm);
  G.set_block(m, 0, lm.transpose());
  G.set_block(m, m, si);
  return G;
}

inline Eigen::MatrixXd swap_matrix(int m) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  J.topRightCorner(m, m).setIdentity();
  J.bottomLeftCorner(m, m).setIdentity();
  return J;
}

inline JetMatrix swap_jets(const Context& c) {
  const int m = c.m();
  JetMatrix J(2 * m, 2 * m, c.zero());
  for (int i = 0; i < m; ++i) J(i, m + i) = J(m + i, i) = c.constant(1.0);
  return J;
}

}  // namespace detail

/// The metric of a pair (sigma, psi), sigma symmetric invertible and psi skew.
inline VerticalMetric vm_from_sigma_psi(int m, std::function<std::pair<JetMatrix, JetMatrix>(const Context&)> sp, int depth) {
  return VerticalMetric(
      m,
      [sp](const Context& c) {
        const auto [s, p] = sp(c);
        return detail::vm_matrix(s, p);
      },
      depth);
}

inline VerticalMetric vm_from_sigma_psi(int m, const std::vector<Expr>& sigma, const std::vector<Expr>& psi) {
  const std::size_t mm = static_cast<std::size_t>(m) * m;
  if (sigma.size() != mm || psi.size() != mm) throw Error("vm_from_sigma_psi: expected m*m entries");
  return vm_from_sigma_psi(
      m,
      [m, sigma, psi](const Context& c) {
        JetMatrix s(m, m, c.zero()), p(m, m, c.zero());
        for (int i = 0; i < m * m; ++i) {
          s(i / m, i % m) = eval_jet(sigma[i], c);
          p(i / m, i % m) = eval_jet(psi[i], c);
        }
        return std::make_pair(s, p);
      },
      0);
}

/// Inverse correspondence at a point: sigma = k^-1, psi = -lm sigma.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> sigma_psi_from_vm(const Eigen::MatrixXd& G) {
  const int m = static_cast<int>(G.rows()) / 2;
  const Eigen::MatrixXd k = G.bottomRightCorner(m, m);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(k);
  const auto s = svd.singularValues();
  if (!(s(m - 1) > 1e-12 * s(0))) throw DomainError("sigma_psi_from_vm: the V2 block is singular");
  const Eigen::MatrixXd sigma = k.inverse();
  const Eigen::MatrixXd psi = -G.topRightCorner(m, m) * sigma;
  return {sigma, psi};
}

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> sigma_psi_from_vm(const VerticalMetric& g, const ChartPoint& p) {
  return sigma_psi_from_vm(g.value(p));
}

/// phi = J G in (d/dy, d/dz) components: blocks (l, #k; flat h, l^t).
inline Eigen::MatrixXd phi_matrix(const Eigen::MatrixXd& G) { return detail::swap_matrix(static_cast<int>(G.rows()) / 2) * G; }

/// The para-Hermitian metric of V: g(Y, a; Y', a') = (a(Y') + a'(Y)) / 2.
inline Eigen::MatrixXd para_hermitian_metric(int m) { return 0.5 * detail::swap_matrix(m); }

struct Compatibility {
  Eigen::MatrixXd phi;
  Report report;
};

/// phi of a vertical metric at a point and the identities a compatible metric satisfies.
inline Compatibility compatibility_check(const Eigen::MatrixXd& G, double tol = 1e-10) {
  const int m = static_cast<int>(G.rows()) / 2;
  const Eigen::MatrixXd g = para_hermitian_metric(m), phi = phi_matrix(G);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd h = G.topLeftCorner(m, m), k = G.bottomRightCorner(m, m), l = G.topRightCorner(m, m).transpose();
  auto r = [](const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); };
  Compatibility c{phi, Report("compatibility")};
  c.report.record("phi^2 = Id", r(phi * phi - Eigen::MatrixXd::Identity(2 * m, 2 * m)), tol);
  c.report.record("g(phi Z, Z') = g(Z, phi Z')", r(phi.transpose() * g - g * phi), tol);
  c.report.record("2 g(Z, Z') = G(phi Z, Z')", r(2.0 * g - phi.transpose() * G), tol);
  c.report.record("G(phi Z, Z') = G(Z, phi Z')", r(phi.transpose() * G - G * phi), tol);
  c.report.record("l^2 + #k flat h = Id", r(l * l + k * h - I), tol);
  c.report.record("l #k + #k l^t = 0", r(l * k + k * l.transpose()), tol);
  c.report.record("flat h l + l^t flat h = 0", r(h * l + l.transpose() * h), tol);
  return c;
}

inline Compatibility compatibility_check(const VerticalMetric& vm, const ChartPoint& p, double tol = 1e-10) {
  return compatibility_check(vm.value(p), tol);
}

struct Eigenbundles {
  Eigen::MatrixXd iota_plus, iota_minus;  // 2m x m: columns are iota(d/dy^i)
  Report report;
};

/// iota(Y) = (Y, (psi^t +- sigma) Y), i.e. the z-part is (flat psi +- flat sigma) Y with flat psi Y = psi(Y, .).
inline Eigenbundles eigenbundles(const Eigen::MatrixXd& G, double tol = 1e-9) {
  const int m = static_cast<int>(G.rows()) / 2;
  const Compatibility comp = compatibility_check(G, 1e-8);
  if (!comp.report.get("phi^2 = Id")->pass) throw Error("eigenbundles: the vertical metric is not compatible");
  const auto [sigma, psi] = sigma_psi_from_vm(G);
  Eigenbundles e;
  e.iota_plus.resize(2 * m, m);
  e.iota_minus.resize(2 * m, m);
  e.iota_plus << Eigen::MatrixXd::Identity(m, m), psi.transpose() + sigma;
  e.iota_minus << Eigen::MatrixXd::Identity(m, m), psi.transpose() - sigma;
  const Eigen::MatrixXd g = para_hermitian_metric(m);
  auto r = [](const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); };
  e.report = Report("eigenbundles");
  e.report.record("phi iota+ = iota+", r(comp.phi * e.iota_plus - e.iota_plus), tol);
  e.report.record("phi iota- = -iota-", r(comp.phi * e.iota_minus + e.iota_minus), tol);
  e.report.record("U+ orthogonal to U-", r(e.iota_plus.transpose() * G * e.iota_minus), tol);
  e.report.record("G on U+ and U- is twice sigma",
                  std::max(r(e.iota_plus.transpose() * G * e.iota_plus - 2.0 * sigma),
                           r(e.iota_minus.transpose() * G * e.iota_minus - 2.0 * sigma)),
                  tol);
  e.report.record("g on U+- is +-sigma",
                  std::max(r(e.iota_plus.transpose() * g * e.iota_plus - sigma), r(e.iota_minus.transpose() * g * e.iota_minus + sigma)),
                  tol);
  return e;
}

/// Hessian blocks of a function on the big tangent manifold in the vertical directions.
inline VerticalMetric hessian_vm(const Expr& K) {
  const int m = K.dim();
  return VerticalMetric(
      m,
      [K, m](const Context& c) {
        const Jet f = eval_jet(K, c);
        JetMatrix G(2 * m, 2 * m, c.zero());
        for (int a = 0; a < 2 * m; ++a) {
          const Jet fa = f.diff(m + a);
          for (int b = a; b < 2 * m; ++b) G(a, b) = G(b, a) = fa.diff(m + b);
        }
        return G;
      },
      2);
}
inline VerticalMetric hessian_vm(int m, const std::string& K) { return hessian_vm(parse_expr(K, m)); }

inline bool is_nondegenerate(const VerticalMetric& vm, const ChartPoint& p) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(vm.value(p));
  const auto s = svd.singularValues();
  return s(s.size() - 1) > 1e-12 * s(0);
}

/// Non degenerate with an invertible V2 block.
inline bool is_strongly_nondegenerate(const VerticalMetric& vm, const ChartPoint& p) {
  if (!is_nondegenerate(vm, p)) return false;
  const int m = vm.m();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(vm.value(p).bottomRightCorner(m, m));
  const auto s = svd.singularValues();
  return s(0) > 0 && s(m - 1) > 1e-12 * s(0);
}

/// (x, y, z) -> (x, #k z, flat k y) with k the V2 block at p.
inline ChartPoint legendre_involution(const VerticalMetric& vm, const ChartPoint& p) {
  const int m = vm.m();
  if (!is_strongly_nondegenerate(vm, p)) throw DomainError("legendre_involution: the V2 block is singular");
  const Eigen::MatrixXd k = vm.value(p).bottomRightCorner(m, m);
  Eigen::VectorXd y(m), z(m);
  for (int i = 0; i < m; ++i) {
    y(i) = p.coord(var_index(Coord::y, i, m));
    z(i) = p.coord(var_index(Coord::z, i, m));
  }
  const Eigen::VectorXd ny = k * z, nz = k.lu().solve(y);
  std::vector<double> x(m), a(m), b(m);
  for (int i = 0; i < m; ++i) {
    x[i] = p.coord(var_index(Coord::x, i, m));
    a[i] = ny(i);
    b[i] = nz(i);
  }
  return ChartPoint(std::move(x), std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// Double fields

/// A horizontal bundle with a compatible vertical metric given by (sigma, psi), and a density for the action.
class DoubleField {
 public:
  using Gen = std::function<std::pair<JetMatrix, JetMatrix>(const Context&)>;

  DoubleField(HorizontalBundle H, Gen sp, int sp_depth, Expr density)
      : H_(std::move(H)), sp_(std::move(sp)), sp_depth_(sp_depth), density_(std::move(density)) {
    if (density_.dim() != H_.m()) throw Error("double field: density dimension mismatch");
  }

  /// sigma and psi row-major m x m; psi must be skew (checked at sample points by the suite).
  static DoubleField from_exprs(HorizontalBundle H, std::vector<Expr> sigma, std::vector<Expr> psi, Expr density) {
    const int m = H.m();
    const std::size_t mm = static_cast<std::size_t>(m) * m;
    if (sigma.size() != mm || psi.size() != mm) throw Error("double field: expected m*m entries for sigma and psi");
    for (const auto& e : sigma)
      if (e.dim() != m) throw Error("double field: sigma dimension mismatch");
    for (const auto& e : psi)
      if (e.dim() != m) throw Error("double field: psi dimension mismatch");
    return DoubleField(
        std::move(H),
        [m, sigma, psi](const Context& c) {
          JetMatrix s(m, m, c.zero()), p(m, m, c.zero());
          for (int i = 0; i < m * m; ++i) {
            if (!sigma[i].is_zero_literal()) s(i / m, i % m) = eval_jet(sigma[i], c);
            if (!psi[i].is_zero_literal()) p(i / m, i % m) = eval_jet(psi[i], c);
          }
          return std::make_pair(s, p);
        },
        0, std::move(density));
  }
  static DoubleField from_strings(HorizontalBundle H, const std::vector<std::string>& sigma, const std::vector<std::string>& psi,
                                  const std::string& density = "0") {
    const int m = H.m();
    return from_exprs(std::move(H), detail::parse_all(m, sigma), detail::parse_all(m, psi), parse_expr(density, m));
  }

  int m() const { return H_.m(); }
  const HorizontalBundle& horizontal() const { return H_; }
  const Expr& density() const { return density_; }
  std::pair<JetMatrix, JetMatrix> sigma_psi(const Context& c) const { return sp_(c); }
  int sigma_psi_depth() const { return sp_depth_; }
  /// Derivatives consumed by the field-adapted connection coefficients.
  int depth() const { return std::max(H_.depth(), sp_depth_) + 1; }
  VerticalMetric vertical_metric() const { return vm_from_sigma_psi(m(), sp_, sp_depth_); }

 private:
  HorizontalBundle H_;
  Gen sp_;
  int sp_depth_;
  Expr density_;
};

/// Coefficients of a connection on V: gamma[A](c, b) is the c-component of nabla_{E_A} of the b-th basis
/// section, with E_A the adapted frame (X_i, d/dy^i, d/dz_i).
using VConnCoeffs = std::vector<JetMatrix>;

/// Everything the double-field constructions need at one context.
struct FieldGeometry {
  int m = 1;
  HCoeffs k;
  JetMatrix sigma, sigma_inv, psi;
  JetMatrix G, Ginv, g;  // vertical metric and para-Hermitian metric
  JetMatrix B, Binv;     // columns iota+(d/dy^i), iota-(d/dy^i)
  JetMatrix Pp, Pm;      // projectors onto U+ and U-
  VConnCoeffs d0p, d0, dp, dm, dtp, dtm;  // connections on V1 (m x m per direction)
  VConnCoeffs D0, Dt, Dbar;               // connections on V (2m x 2m per direction)
  std::vector<Jet> tau_t;                  // Gualtieri torsion of the tilde connection, (2m)^3
};

namespace detail {

inline bool is_zero(const Jet& j) {
  for (double c : j.coeffs())
    if (c != 0.0) return false;
  return true;
}

/// E_A(f) for the adapted frame vector E_A.
inline Jet frame_diff(const HCoeffs& k, const Jet& f, int A, int m) {
  if (A >= m) return f.diff(A);
  Jet r = f.diff(A);
  for (int c = 0; c < m; ++c) {
    r -= k.t(A, c) * f.diff(m + c);
    r -= k.tau(A, c) * f.diff(2 * m + c);
  }
  return r;
}

inline JetMatrix frame_diff(const HCoeffs& k, const JetMatrix& M, int A, int m) {
  JetMatrix r(M.rows(), M.cols(), M(0, 0).diff(0));
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) r(i, j) = frame_diff(k, M(i, j), A, m);
  return r;
}

/// sum over A of dir^A (E_A W + gamma_A W), with dir in adapted components.
inline VSection covariant(const FieldGeometry& f, const VConnCoeffs& gam, const std::vector<Jet>& dir, const VSection& W) {
  const int m = f.m, v = 2 * m;
  VSection r(v, W[0].diff(0) * 0.0);
  for (int A = 0; A < 3 * m; ++A) {
    if (is_zero(dir[A])) continue;
    for (int c = 0; c < v; ++c) {
      Jet s = frame_diff(f.k, W[c], A, m);
      for (int b = 0; b < v; ++b) s += gam[A](c, b) * W[b];
      r[c] += dir[A] * s;
    }
  }
  return r;
}

inline std::vector<Jet> vertical_direction(const VSection& Y, int m) {
  std::vector<Jet> d(3 * m, Y[0] * 0.0);
  for (int a = 0; a < 2 * m; ++a) d[m + a] = Y[a];
  return d;
}

inline VSection covariant_v(const FieldGeometry& f, const VConnCoeffs& gam, const VSection& Y, const VSection& W) {
  return covariant(f, gam, vertical_direction(Y, f.m), W);
}

inline Jet pair_metric(const JetMatrix& G, const VSection& a, const VSection& b) {
  Jet s = a[0] * 0.0;
  for (int i = 0; i < G.rows(); ++i)
    for (int j = 0; j < G.cols(); ++j) s += G(i, j) * a[i] * b[j];
  return s;
}

inline VSection basis_section(const Context& c, int m, int beta) {
  VSection e(2 * m, c.zero());
  e[beta] = c.constant(1.0);
  return e;
}

inline VSection column(const JetMatrix& M, int j) {
  VSection r;
  for (int i = 0; i < M.rows(); ++i) r.push_back(M(i, j));
  return r;
}

inline VSection lincomb(const VSection& a, const Jet& s, const VSection& b, const Jet& t) {
  VSection r;
  for (std::size_t i = 0; i < a.size(); ++i) r.push_back(s * a[i] + t * b[i]);
  return r;
}

inline VSection minus(const VSection& a, const VSection& b) {
  VSection r;
  for (std::size_t i = 0; i < a.size(); ++i) r.push_back(a[i] - b[i]);
  return r;
}

}  // namespace detail

/// Y' wedge Y'' for a connection: G(Z, Y' ^ Y'') = (G(Y', nabla_Z Y'') - G(Y'', nabla_Z Y')) / 2.
inline VSection wedge(const FieldGeometry& f, const VConnCoeffs& gam, const VSection& Y1, const VSection& Y2) {
  const int v = 2 * f.m;
  std::vector<Jet> cov;
  for (int beta = 0; beta < v; ++beta) {
    std::vector<Jet> dir(3 * f.m, Y1[0] * 0.0);
    dir[f.m + beta] = dir[f.m + beta] + 1.0;
    const VSection a = detail::covariant(f, gam, dir, Y2), b = detail::covariant(f, gam, dir, Y1);
    cov.push_back(0.5 * (detail::pair_metric(f.G, Y1, a) - detail::pair_metric(f.G, Y2, b)));
  }
  return f.Ginv.apply(cov);
}

/// [Y', Y'']_G = D0_{Y'} Y'' - D0_{Y''} Y' - Y' ^ Y'' with D0 the double connection of (D0, D0).
inline VSection metric_bracket(const FieldGeometry& f, const VSection& Y1, const VSection& Y2) {
  const VSection a = detail::covariant_v(f, f.D0, Y1, Y2), b = detail::covariant_v(f, f.D0, Y2, Y1);
  return detail::minus(detail::minus(a, b), wedge(f, f.D0, Y1, Y2));
}

/// Vertical gradient: G^-1 of the vertical differential.
inline VSection vertical_gradient(const FieldGeometry& f, const Jet& fn) {
  std::vector<Jet> d;
  for (int b = 0; b < 2 * f.m; ++b) d.push_back(fn.diff(f.m + b));
  return f.Ginv.apply(d);
}

namespace detail {

/// Connection on V of a pair of connections on V1 transported by iota+ and iota-.
inline VConnCoeffs pair_connection(const FieldGeometry& f, const VConnCoeffs& plus, const VConnCoeffs& minus_) {
  const int m = f.m;
  VConnCoeffs out;
  for (int A = 0; A < 3 * m; ++A) {
    JetMatrix w(2 * m, 2 * m, f.G(0, 0) * 0.0);
    w.set_block(0, 0, plus[A]);
    w.set_block(m, m, minus_[A]);
    out.push_back((f.B * w - frame_diff(f.k, f.B, A, m)) * f.Binv);
  }
  return out;
}

/// D'0: Bott along H, the V1 part of the Levi-Civita connection of G_sigma along V1, zero along V2.
inline VConnCoeffs d0_prime(const FieldGeometry& f, const Context& c) {
  const int m = f.m, n = 3 * m;
  const Jet z = c.zero();
  VConnCoeffs out(n, JetMatrix(m, m, z));
  for (int i = 0; i < m; ++i)
    for (int cc = 0; cc < m; ++cc)
      for (int b = 0; b < m; ++b) out[i](cc, b) = f.k.t(i, cc).diff(m + b);
  JetMatrix Bd(n, n, z);
  Bd.set_block(0, 0, f.sigma);
  Bd.set_block(m, m, f.sigma);
  Bd.set_block(2 * m, 2 * m, f.sigma_inv);
  const JetMatrix C = adapted_coframe_jets(f.k, c);
  const JetMatrix G3 = C.transpose() * Bd * C;
  const JetMatrix G3i = inverse(G3);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      std::vector<Jet> low;
      for (int r = 0; r < n; ++r)
        low.push_back(0.5 * (G3(r, m + b).diff(m + a) + G3(r, m + a).diff(m + b) - G3(m + a, m + b).diff(r)));
      const std::vector<Jet> up = G3i.apply(low);
      for (int cc = 0; cc < m; ++cc) {
        Jet s = up[m + cc];
        for (int i = 0; i < m; ++i) s += up[i] * f.k.t(i, cc);
        out[m + a](cc, b) = s;
      }
    }
  return out;
}

/// D = D' + sigma^-1 (D' sigma) / 2, which preserves sigma.
inline VConnCoeffs make_metric(const FieldGeometry& f, const VConnCoeffs& Dp) {
  const int m = f.m;
  VConnCoeffs out;
  for (int A = 0; A < 3 * m; ++A) {
    const JetMatrix& g = Dp[A];
    const JetMatrix Es = frame_diff(f.k, f.sigma, A, m);
    JetMatrix S = Es - g.transpose() * f.sigma - f.sigma * g;
    out.push_back(g + 0.5 * (f.sigma_inv * S));
  }
  return out;
}

/// D+- = D0 +- sigma^-1 (i(Y) i(pr_V1 Z) d_V1 psi) / 2, nonzero only along V1.
inline VConnCoeffs psi_shift(const FieldGeometry& f, const VConnCoeffs& D0, double sign) {
  const int m = f.m;
  VConnCoeffs out = D0;
  for (int a = 0; a < m; ++a) {
    JetMatrix K(m, m, f.sigma(0, 0) * 0.0);
    for (int b = 0; b < m; ++b)
      for (int d = 0; d < m; ++d) {
        // d_V1 psi(Y_a, Y_b, Y_d)
        const Jet dpsi = f.psi(b, d).diff(m + a) + f.psi(d, a).diff(m + b) + f.psi(a, b).diff(m + d);
        K(b, d) = dpsi;
      }
    // coefficient (c, b) = sum_d sigma^{cd} dpsi(a, b, d) / 2
    out[m + a] = out[m + a] + (0.5 * sign) * (f.sigma_inv * K.transpose());
  }
  return out;
}

/// Metric brackets [U_beta, W_j]_G of the columns of U1 (then U2) with the columns of W, built from
/// matrix products: entry [k * v + beta] holds the brackets of column beta of U_{k+1} as columns j.
inline std::vector<JetMatrix> bracket_columns(const FieldGeometry& f, const JetMatrix& U1, const JetMatrix& U2, const JetMatrix& W) {
  const int m = f.m, v = 2 * m;
  std::vector<JetMatrix> NW;
  for (int d = 0; d < v; ++d) NW.push_back(frame_diff(f.k, W, m + d, m) + f.D0[m + d] * W);
  const JetMatrix GW = f.G * W;
  std::vector<JetMatrix> out;
  for (const JetMatrix* U : {&U1, &U2}) {
    std::vector<JetMatrix> MU;
    for (int d = 0; d < v; ++d) MU.push_back(frame_diff(f.k, *U, m + d, m) + f.D0[m + d] * *U);
    const JetMatrix UtG = U->transpose() * f.G, WtG = W.transpose() * f.G;
    std::vector<JetMatrix> cU, cW;  // (U^t G N_d)(beta, j) and (W^t G M_d)(j, beta)
    for (int d = 0; d < v; ++d) {
      cU.push_back(UtG * NW[d]);
      cW.push_back(WtG * MU[d]);
    }
    for (int beta = 0; beta < v; ++beta) {
      JetMatrix r(v, W.cols(), NW[0](0, 0) * 0.0);
      for (int j = 0; j < W.cols(); ++j) {
        std::vector<Jet> c;
        for (int d = 0; d < v; ++d) c.push_back(0.5 * (cU[d](beta, j) - cW[d](j, beta)));
        const std::vector<Jet> w = f.Ginv.apply(c);
        for (int i = 0; i < v; ++i) {
          Jet x = -w[i];
          for (int d = 0; d < v; ++d) x += (*U)(d, beta) * NW[d](i, j) - W(d, j) * MU[d](i, beta);
          r(i, j) = x;
        }
      }
      out.push_back(r);
    }
  }
  return out;
}

inline int vidx(int a, int b, int c, int v) { return (a * v + b) * v + c; }

/// Cyclic sum of G(Theta(e_a, e_b), e_c) with Theta = gam - D0 on vertical directions.
inline std::vector<Jet> cyclic_torsion(const FieldGeometry& f, const VConnCoeffs& gam) {
  const int m = f.m, v = 2 * m;
  std::vector<Jet> xi(v * v * v, f.G(0, 0) * 0.0);
  for (int a = 0; a < v; ++a) {
    const JetMatrix Th = gam[m + a] - f.D0[m + a];
    const JetMatrix X = Th.transpose() * f.G;  // X(b, c) = sum_d Th(d, b) G(d, c)
    for (int b = 0; b < v; ++b)
      for (int c = 0; c < v; ++c) xi[vidx(a, b, c, v)] = X(b, c);
  }
  std::vector<Jet> tau(v * v * v, xi[0] * 0.0);
  for (int a = 0; a < v; ++a)
    for (int b = 0; b < v; ++b)
      for (int c = 0; c < v; ++c) tau[vidx(a, b, c, v)] = xi[vidx(a, b, c, v)] + xi[vidx(b, c, a, v)] + xi[vidx(c, a, b, v)];
  return tau;
}

}  // namespace detail

/// Build the whole chain D'0 -> D0 -> D+- -> tilde D+- -> tilde D -> field-adapted D at a context.
/// Coefficients are exact to order c.order() - F.depth().
inline FieldGeometry field_geometry(const DoubleField& F, const Context& c) {
  FieldGeometry f;
  const int m = F.m();
  f.m = m;
  f.k = F.horizontal().coeffs(c);
  std::tie(f.sigma, f.psi) = F.sigma_psi(c);
  f.sigma_inv = detail::checked_inverse(f.sigma, "double field: sigma");
  f.G = detail::vm_matrix(f.sigma, f.psi);
  f.Ginv = inverse(f.G);
  f.g = 0.5 * detail::swap_jets(c);
  f.B = JetMatrix(2 * m, 2 * m, c.zero());
  const JetMatrix pt = f.psi.transpose();
  f.B.set_block(0, 0, JetMatrix::identity(c, m));
  f.B.set_block(0, m, JetMatrix::identity(c, m));
  f.B.set_block(m, 0, pt + f.sigma);
  f.B.set_block(m, m, pt - f.sigma);
  f.Binv = inverse(f.B);
  JetMatrix Ip(2 * m, 2 * m, c.zero()), Im(2 * m, 2 * m, c.zero());
  for (int i = 0; i < m; ++i) {
    Ip(i, i) = c.constant(1.0);
    Im(m + i, m + i) = c.constant(1.0);
  }
  f.Pp = f.B * Ip * f.Binv;
  f.Pm = f.B * Im * f.Binv;

  f.d0p = detail::d0_prime(f, c);
  f.d0 = detail::make_metric(f, f.d0p);
  f.dp = detail::psi_shift(f, f.d0, 1.0);
  f.dm = detail::psi_shift(f, f.d0, -1.0);
  f.D0 = detail::pair_connection(f, f.d0, f.d0);

  // tilde D+- along d/d beta: D+-_{pr_U+- e_beta} + pr_V1 pr_U+- [pr_U-+ e_beta, iota+- d/dy^b]_G
  f.dtp = f.dp;
  f.dtm = f.dm;
  const std::vector<JetMatrix> brackets = detail::bracket_columns(f, f.Pm, f.Pp, f.B);
  for (int beta = 0; beta < 2 * m; ++beta) {
    for (int s = 0; s < 2; ++s) {
      const JetMatrix& Pown = s == 0 ? f.Pp : f.Pm;
      const VConnCoeffs& Dpm = s == 0 ? f.dp : f.dm;
      JetMatrix coef(m, m, c.zero());
      for (int a = 0; a < 2 * m; ++a)
        for (int cc = 0; cc < m; ++cc)
          for (int b = 0; b < m; ++b) coef(cc, b) += Pown(a, beta) * Dpm[m + a](cc, b);
      // brackets[beta] for s = 0 pairs Pm columns with B, for s = 1 Pp columns with B
      const JetMatrix pb = Pown * brackets[s * 2 * m + beta];
      for (int b = 0; b < m; ++b)
        for (int cc = 0; cc < m; ++cc) coef(cc, b) += pb(cc, s == 0 ? b : m + b);
      (s == 0 ? f.dtp : f.dtm)[m + beta] = coef;
    }
  }
  f.Dt = detail::pair_connection(f, f.dtp, f.dtm);
  f.tau_t = detail::cyclic_torsion(f, f.Dt);

  // field-adapted: add Phi with G(Phi(e_a, e_b), e_c) = -tau(a, b, c) / 3 on vertical directions
  f.Dbar = f.Dt;
  const int v = 2 * m;
  for (int a = 0; a < v; ++a) {
    JetMatrix T(v, v, c.zero());  // T(c, b) = tau(a, b, c)
    for (int b = 0; b < v; ++b)
      for (int cc = 0; cc < v; ++cc) T(cc, b) = f.tau_t[detail::vidx(a, b, cc, v)];
    f.Dbar[m + a] = f.Dbar[m + a] - (1.0 / 3.0) * (f.Ginv * T);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Torsion and curvature of connections on V

/// Gualtieri torsion by the cyclic formula: tau[(a v + b) v + c] on basis sections.
inline std::vector<Jet> gualtieri_torsion(const FieldGeometry& f, const VConnCoeffs& gam) {
  return detail::cyclic_torsion(f, gam);
}

/// Gualtieri torsion from its definition: G(nabla_Y Y' - nabla_Y' Y - [Y, Y']_G - Y ^_nabla Y', Y'').
inline Jet gualtieri_torsion_direct(const FieldGeometry& f, const VConnCoeffs& gam, const VSection& Y, const VSection& Y1,
                                    const VSection& Y2) {
  VSection T = detail::minus(detail::covariant_v(f, gam, Y, Y1), detail::covariant_v(f, gam, Y1, Y));
  T = detail::minus(detail::minus(T, metric_bracket(f, Y, Y1)), wedge(f, gam, Y, Y1));
  return detail::pair_metric(f.G, T, Y2);
}

/// Deformed bracket [Y, Y']_G + Y ^_nabla Y'.
inline VSection deformed_bracket(const FieldGeometry& f, const VConnCoeffs& gam, const VSection& Y, const VSection& Y1) {
  const VSection b = metric_bracket(f, Y, Y1), w = wedge(f, gam, Y, Y1);
  VSection r;
  for (std::size_t i = 0; i < b.size(); ++i) r.push_back(b[i] + w[i]);
  return r;
}

/// R(Y, Y')Y'' = nabla_Y nabla_Y' Y'' - nabla_Y' nabla_Y Y'' - nabla_{[Y, Y']^nabla} Y''.
inline VSection deformed_curvature(const FieldGeometry& f, const VConnCoeffs& gam, const VSection& Y, const VSection& Y1,
                                   const VSection& Y2) {
  const VSection a = detail::covariant_v(f, gam, Y, detail::covariant_v(f, gam, Y1, Y2));
  const VSection b = detail::covariant_v(f, gam, Y1, detail::covariant_v(f, gam, Y, Y2));
  const VSection c = detail::covariant_v(f, gam, deformed_bracket(f, gam, Y, Y1), Y2);
  return detail::minus(detail::minus(a, b), c);
}

/// Ricci matrix in a basis of V (columns of F): Ric(f_q, f_s) with the trace over the same basis.
inline JetMatrix deformed_ricci(const FieldGeometry& f, const VConnCoeffs& gam, const JetMatrix& Fb) {
  const int v = 2 * f.m;
  const JetMatrix Fi = inverse(Fb);
  std::vector<VSection> e;
  for (int q = 0; q < v; ++q) e.push_back(detail::column(Fb, q));
  // tr(q, s) = sum_beta <f^beta, R(f_beta, f_q) f_s>
  JetMatrix tr(v, v, f.G(0, 0) * 0.0);
  for (int q = 0; q < v; ++q)
    for (int s = 0; s < v; ++s) tr(q, s) = f.G(0, 0).diff(0).diff(0) * 0.0;
  for (int beta = 0; beta < v; ++beta)
    for (int q = 0; q < v; ++q)
      for (int s = 0; s < v; ++s) {
        const VSection R = deformed_curvature(f, gam, e[beta], e[q], e[s]);
        Jet comp = R[0] * 0.0;
        for (int a = 0; a < v; ++a) comp += Fi(beta, a) * R[a];
        tr(q, s) += comp;
      }
  JetMatrix ric(v, v, tr(0, 0) * 0.0);
  for (int q = 0; q < v; ++q)
    for (int s = 0; s < v; ++s) ric(q, s) = 0.5 * (tr(q, s) + tr(s, q));
  return ric;
}

/// Scalar curvature sum G^{qs} Ric_qs in the basis F.
inline double deformed_scalar(const FieldGeometry& f, const VConnCoeffs& gam, const JetMatrix& Fb) {
  const JetMatrix ric = deformed_ricci(f, gam, Fb);
  const Eigen::MatrixXd Gf = detail::values_of(Fb.transpose() * f.G * Fb);
  const Eigen::MatrixXd Gi = Gf.inverse();
  const Eigen::MatrixXd R = detail::values_of(ric);
  return (Gi.cwiseProduct(R)).sum();
}

/// Ricci matrix in the basis (d/dy, d/dz) from point values of the coefficients and their first
/// derivatives; agrees with deformed_ricci for the identity basis.
inline Eigen::MatrixXd deformed_ricci_values(const FieldGeometry& f, const VConnCoeffs& gam) {
  const int m = f.m, v = 2 * m;
  std::vector<Eigen::MatrixXd> Gm, G0;
  for (int a = 0; a < v; ++a) {
    Gm.push_back(detail::values_of(gam[m + a]));
    G0.push_back(detail::values_of(f.D0[m + a]));
  }
  const Eigen::MatrixXd G = detail::values_of(f.G), Gi = detail::values_of(f.Ginv);
  auto wedge_vals = [&](const std::vector<Eigen::MatrixXd>& c, int a, int b) {
    Eigen::VectorXd w(v);
    for (int d = 0; d < v; ++d) {
      const Eigen::MatrixXd GC = G * c[d];
      w(d) = 0.5 * (GC(a, b) - GC(b, a));
    }
    return Eigen::VectorXd(Gi * w);
  };
  // R(e_b, e_q) e_s components for all b, q
  std::vector<Eigen::MatrixXd> R(v * v, Eigen::MatrixXd::Zero(v, v));
  for (int b = 0; b < v; ++b)
    for (int q = b + 1; q < v; ++q) {
      Eigen::MatrixXd M = Gm[b] * Gm[q] - Gm[q] * Gm[b];
      for (int i = 0; i < v; ++i)
        for (int j = 0; j < v; ++j) M(i, j) += gam[m + q](i, j).d1(m + b) - gam[m + b](i, j).d1(m + q);
      const Eigen::VectorXd W = G0[b].col(q) - G0[q].col(b) - wedge_vals(G0, b, q) + wedge_vals(Gm, b, q);
      for (int d = 0; d < v; ++d) M -= W(d) * Gm[d];
      R[b * v + q] = M;
      R[q * v + b] = -M;
    }
  Eigen::MatrixXd tr = Eigen::MatrixXd::Zero(v, v);
  for (int b = 0; b < v; ++b)
    for (int q = 0; q < v; ++q) tr.row(q) += R[b * v + q].row(b);
  return 0.5 * (tr + tr.transpose());
}

/// Scalar curvature of the field-adapted connection at a point, in the basis (d/dy, d/dz).
inline double scalar_curvature(const DoubleField& F, const ChartPoint& p) {
  const Context c(p, F.depth() + 1);
  const FieldGeometry f = field_geometry(F, c);
  return detail::values_of(f.Ginv).cwiseProduct(deformed_ricci_values(f, f.Dbar)).sum();
}

// ---------------------------------------------------------------------------
// Verification suite

namespace detail {

/// Quadratic polynomial section with random coefficients.
inline VSection random_vsection(const Context& c, PointSampler& ps) {
  const int m = c.m(), n = 3 * m;
  VSection s;
  for (int a = 0; a < 2 * m; ++a) {
    Jet v = c.constant(ps.uniform());
    for (int k = 0; k < n; ++k) v += ps.uniform() * c.variable(k) + 0.3 * ps.uniform() * c.variable(k) * c.variable((k + a) % n);
    s.push_back(v);
  }
  return s;
}

inline double form_preservation(const FieldGeometry& f, const VConnCoeffs& gam, const JetMatrix& M) {
  double r = 0.0;
  for (int A = 0; A < 3 * f.m; ++A)
    r = std::max(r, values_of(frame_diff(f.k, M, A, f.m) - gam[A].transpose() * M - M * gam[A]).cwiseAbs().maxCoeff());
  return r;
}

inline double endo_preservation(const FieldGeometry& f, const VConnCoeffs& gam, const JetMatrix& M) {
  double r = 0.0;
  for (int A = 0; A < 3 * f.m; ++A)
    r = std::max(r, values_of(frame_diff(f.k, M, A, f.m) + gam[A] * M - M * gam[A]).cwiseAbs().maxCoeff());
  return r;
}

inline double max_abs_values(const std::vector<Jet>& v) {
  double r = 0.0;
  for (const Jet& x : v) r = std::max(r, std::fabs(x.value()));
  return r;
}

}  // namespace detail

/// Identities of the double-field constructions at n random points. `tol` gates the torsion of the
/// field-adapted connection; the algebraic identities use tighter fixed tolerances.
inline Report verify_double_field(const DoubleField& F, std::uint64_t seed, int n_points, double tol = 1e-8) {
  const int m = F.m(), v = 2 * m;
  PointSampler ps(seed);
  std::vector<ChartPoint> pts;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_points; ++i) {
    pts.push_back(ps.point(m));
    seeds.push_back(ps.engine()());
  }
  auto parts = parallel_map(pts.size(), [&](std::size_t idx) {
    Report r;
    PointSampler rs(seeds[idx]);
    const Context c(pts[idx], F.depth() + 2);
    const FieldGeometry f = field_geometry(F, c);
    const Eigen::MatrixXd sig = detail::values_of(f.sigma), psi = detail::values_of(f.psi), G = detail::values_of(f.G);
    r.record("sigma symmetric", (sig - sig.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    r.record("psi skew", (psi + psi.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const auto [s2, p2] = sigma_psi_from_vm(G);
    r.record("(sigma, psi) -> G_V -> (sigma, psi) round trip",
             std::max((s2 - sig).cwiseAbs().maxCoeff(), (p2 - psi).cwiseAbs().maxCoeff()), 1e-12);
    const Report comp = compatibility_check(G, 1e-10).report;
    r.merge(comp);
    if (comp.get("phi^2 = Id")->max_residual <= 1e-8)
      r.merge(eigenbundles(G, 1e-9).report);
    else
      r.expect("phi iota+ = iota+", false, 0.0, "not compatible; eigenbundles undefined");

    r.record("D0 preserves sigma", detail::form_preservation(f, f.d0, f.sigma), 1e-9);
    r.record("D+ preserves sigma", detail::form_preservation(f, f.dp, f.sigma), 1e-9);
    r.record("D- preserves sigma", detail::form_preservation(f, f.dm, f.sigma), 1e-9);
    r.record("tilde D+ and tilde D- preserve sigma",
             std::max(detail::form_preservation(f, f.dtp, f.sigma), detail::form_preservation(f, f.dtm, f.sigma)), 1e-9);

    // Leibniz rule of the metric bracket
    const VSection Y = detail::random_vsection(c, rs), Y1 = detail::random_vsection(c, rs), Y2 = detail::random_vsection(c, rs);
    const Jet fn = sin(rs.uniform() * c.variable(m) + rs.uniform() * c.variable(2 * m)) + rs.uniform() * c.variable(0) * c.variable(m);
    VSection fY1;
    for (const Jet& x : Y1) fY1.push_back(fn * x);
    const VSection lhs = metric_bracket(f, Y, fY1), br = metric_bracket(f, Y, Y1), rev = metric_bracket(f, Y1, Y);
    const VSection grad = vertical_gradient(f, fn);
    Jet Yf = c.zero();
    for (int b = 0; b < v; ++b) Yf += Y[b] * fn.diff(m + b);
    const Jet gyy = detail::pair_metric(f.G, Y, Y1);
    double leib = 0.0, anti = 0.0;
    for (int a = 0; a < v; ++a) {
      leib = std::max(leib, std::fabs((lhs[a] - fn * br[a] - Yf * Y1[a] + 0.5 * gyy * grad[a]).value()));
      anti = std::max(anti, std::fabs(br[a].value() + rev[a].value()));
    }
    r.record("metric bracket: [Y, fY'] = f[Y, Y'] + (Yf)Y' - G(Y, Y') grad f / 2", leib, 1e-9);
    r.record("metric bracket: antisymmetric", anti, 1e-12);

    // Gualtieri torsion
    const Eigen::MatrixXd B = detail::values_of(f.B);
    double mixed = 0.0;
    for (int i = 0; i < v; ++i)
      for (int j = 0; j < v; ++j)
        for (int k = 0; k < v; ++k) {
          const int plus = (i < m) + (j < m) + (k < m);
          if (plus == 0 || plus == 3) continue;
          double sum = 0.0;
          for (int a = 0; a < v; ++a)
            for (int b = 0; b < v; ++b)
              for (int cc = 0; cc < v; ++cc) sum += f.tau_t[detail::vidx(a, b, cc, v)].value() * B(a, i) * B(b, j) * B(cc, k);
          mixed = std::max(mixed, std::fabs(sum));
        }
    r.record("tilde connection: mixed-type Gualtieri torsion vanishes", mixed, 1e-9);
    const std::vector<Jet> tau_bar = gualtieri_torsion(f, f.Dbar);
    r.record("field-adapted connection: Gualtieri torsion = 0", detail::max_abs_values(tau_bar), tol);
    double routes = 0.0;
    for (const VConnCoeffs* gam : {&f.Dt, &f.Dbar}) {
      const std::vector<Jet> tau = gam == &f.Dbar ? tau_bar : f.tau_t;
      double cyc = 0.0;
      for (int a = 0; a < v; ++a)
        for (int b = 0; b < v; ++b)
          for (int cc = 0; cc < v; ++cc) cyc += tau[detail::vidx(a, b, cc, v)].value() * Y[a].value() * Y1[b].value() * Y2[cc].value();
      routes = std::max(routes, std::fabs(gualtieri_torsion_direct(f, *gam, Y, Y1, Y2).value() - cyc));
    }
    r.record("Gualtieri torsion: cyclic formula = definition", routes, 1e-9);
    r.record("field-adapted connection preserves G_V", detail::form_preservation(f, f.Dbar, f.G), 1e-9);
    r.record("field-adapted connection preserves g", detail::form_preservation(f, f.Dbar, f.g), 1e-9);
    r.record("field-adapted connection preserves phi", detail::endo_preservation(f, f.Dbar, detail::swap_jets(c) * f.G), 1e-9);

    // curvatures
    const Eigen::MatrixXd ric = deformed_ricci_values(f, f.Dbar);
    const double rho = detail::values_of(f.Ginv).cwiseProduct(ric).sum();
    r.record("Ric symmetric", (ric - ric.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const JetMatrix I = JetMatrix::identity(c, v);
    r.record("Ric: frame and coefficient routes agree", (detail::values_of(deformed_ricci(f, f.Dbar, I)) - ric).cwiseAbs().maxCoeff(), 1e-10);
    JetMatrix Fc(v, v, c.zero()), Fv(v, v, c.zero());
    for (int i = 0; i < v; ++i)
      for (int j = 0; j < v; ++j) {
        Fc(i, j) = c.constant((i == j ? 2.0 : 0.0) + rs.uniform());
        Fv(i, j) = Fc(i, j) + 0.3 * c.variable((i + j) % (3 * m)) * c.variable(m + (i + 1) % v);
      }
    r.record("rho invariant under a constant re-basis", deformed_scalar(f, f.Dbar, Fc) - rho, 1e-9);
    r.expect("rho under a point-dependent re-basis (diagnostic)", true, deformed_scalar(f, f.Dbar, Fv) - rho,
             "the deformed curvature is not tensorial in its arguments");
    return r;
  });
  Report rep("double-field");
  for (const auto& p : parts) rep.merge(p);
  return rep;
}

// ---------------------------------------------------------------------------
// Action functional

struct Box {
  std::vector<double> lo, hi;  // 3m entries each, chart variable order
  static Box cube(int m, double a = -1.0, double b = 1.0) { return Box{std::vector<double>(3 * m, a), std::vector<double>(3 * m, b)}; }
  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
  }
};

struct ActionEstimate {
  double value = 0.0;
  double error = 0.0;  // standard error (Monte Carlo) or |I_N - I_{N-1}| (Gauss)
  std::string method;
  std::size_t evaluations = 0;
};

namespace detail {

inline ChartPoint point_from(const std::vector<double>& u, int m) {
  return ChartPoint(std::vector<double>(u.begin(), u.begin() + m), std::vector<double>(u.begin() + m, u.begin() + 2 * m),
                    std::vector<double>(u.begin() + 2 * m, u.end()));
}

/// Sum with a fixed binary tree so the result does not depend on how samples were scheduled.
inline double pairwise_sum(const double* a, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(a, h) + pairwise_sum(a + h, n - h);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Gauss-Legendre nodes and weights on [-1, 1].
template <int N>
std::pair<std::vector<double>, std::vector<double>> gauss_rule_n() {
  using Q = boost::math::quadrature::gauss<double, N>;
  std::vector<double> x, w;
  const auto& a = Q::abscissa();
  const auto& b = Q::weights();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      x.push_back(0.0);
      w.push_back(b[i]);
    } else {
      x.push_back(a[i]);
      w.push_back(b[i]);
      x.push_back(-a[i]);
      w.push_back(b[i]);
    }
  }
  return {x, w};
}

inline std::pair<std::vector<double>, std::vector<double>> gauss_rule(int n) {
  switch (n) {
    case 1: return {{0.0}, {2.0}};
    case 2: return gauss_rule_n<2>();
    case 3: return gauss_rule_n<3>();
    case 4: return gauss_rule_n<4>();
    case 5: return gauss_rule_n<5>();
    case 6: return gauss_rule_n<6>();
    case 7: return gauss_rule_n<7>();
    case 8: return gauss_rule_n<8>();
    default: throw Error("gauss quadrature: node count must be in 1..8");
  }
}

}  // namespace detail

/// e^{-2 phi} rho |det sigma|^{1/2}; the adapted coframe has unit Jacobian against the chart coordinates.
inline double action_integrand(const DoubleField& F, const ChartPoint& p) {
  const Context c(p, F.depth() + 1);
  const FieldGeometry f = field_geometry(F, c);
  const double rho = detail::values_of(f.Ginv).cwiseProduct(deformed_ricci_values(f, f.Dbar)).sum();
  const double det = detail::values_of(f.sigma).determinant();
  const double val = std::exp(-2.0 * eval_value(F.density(), p)) * rho * std::sqrt(std::fabs(det));
  if (!std::isfinite(val)) throw DomainError("action: non-finite integrand");
  return val;
}

/// Monte Carlo over the box; sample i draws from a generator seeded by hash(seed, i).
inline ActionEstimate action_monte_carlo(const DoubleField& F, const Box& box, std::size_t samples, std::uint64_t seed) {
  const int m = F.m();
  if (samples < 2) throw Error("action: at least two samples are needed");
  const auto vals = parallel_map(samples, [&](std::size_t i) {
    std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(i)));
    std::vector<double> u(3 * m);
    for (int d = 0; d < 3 * m; ++d) {
      const double t = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      u[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * t;
    }
    return action_integrand(F, detail::point_from(u, m));
  });
  const double mean = detail::pairwise_sum(vals.data(), samples) / static_cast<double>(samples);
  std::vector<double> sq(samples);
  for (std::size_t i = 0; i < samples; ++i) sq[i] = (vals[i] - mean) * (vals[i] - mean);
  const double var = detail::pairwise_sum(sq.data(), samples) / static_cast<double>(samples - 1);
  const double vol = box.volume();
  return ActionEstimate{vol * mean, vol * std::sqrt(var / static_cast<double>(samples)), "monte-carlo", samples};
}

/// Tensor Gauss-Legendre with n nodes per axis; the error is the change from n - 1 nodes.
inline ActionEstimate action_gauss(const DoubleField& F, const Box& box, int nodes) {
  const int m = F.m(), d = 3 * m;
  auto rule = [&](int n) {
    const auto [x, w] = detail::gauss_rule(n);
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= x.size();
    const auto vals = parallel_map(total, [&](std::size_t idx) {
      std::vector<double> u(d);
      double wt = 1.0;
      std::size_t r = idx;
      for (int k = 0; k < d; ++k) {
        const std::size_t j = r % x.size();
        r /= x.size();
        const double half = 0.5 * (box.hi[k] - box.lo[k]);
        u[k] = box.lo[k] + half * (x[j] + 1.0);
        wt *= half * w[j];
      }
      return wt * action_integrand(F, detail::point_from(u, m));
    });
    return std::make_pair(detail::pairwise_sum(vals.data(), vals.size()), total);
  };
  const auto [hi, nh] = rule(nodes);
  const auto [lo, nl] = nodes > 1 ? rule(nodes - 1) : std::make_pair(hi, std::size_t{0});
  return ActionEstimate{hi, std::fabs(hi - lo), "gauss", nh + nl};
}

// ---------------------------------------------------------------------------
// Fields from classical data

/// H the Levi-Civita bundle of a base metric, sigma the base metric, psi = 0.
inline DoubleField field_from_riemannian(const std::vector<Expr>& gamma) {
  const BigMetric s = sasaki_metric(gamma);
  const int m = s.m();
  std::vector<Expr> zero(m * m, Expr::constant(0.0, m));
  return DoubleField::from_exprs(s.horizontal(), gamma, zero, Expr::constant(0.0, m));
}
inline DoubleField field_from_riemannian(int m, const std::vector<std::string>& gamma) {
  return field_from_riemannian(detail::parse_all(m, gamma));
}

/// H the spray bundle of L, sigma the fibre Hessian, psi(Y_i, Y_j) = d theta(X_i, X_j) for theta = dL/dy^i dx^i.
inline DoubleField field_from_lagrangian(const Expr& L) {
  const Spray s = spray_from_lagrangian(L);
  const int m = s.m;
  return DoubleField(
      s.H,
      [L, m](const Context& c) {
        const Jet f = eval_jet(L, c);
        const JetMatrix t = detail::spray_t(detail::spray_eta(L, c), c);
        std::vector<Jet> p;
        for (int j = 0; j < m; ++j) p.push_back(f.diff(m + j));
        JetMatrix sigma(m, m, c.zero()), psi(m, m, c.zero());
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) sigma(i, j) = p[i].diff(m + j);
        // X_i(p_j); the z-part of X_i does not see p
        JetMatrix X(m, m, c.zero());
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) {
            Jet r = p[j].diff(i);
            for (int k = 0; k < m; ++k) r -= t(i, k) * p[j].diff(m + k);
            X(i, j) = r;
          }
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) psi(i, j) = X(i, j) - X(j, i);
        return std::make_pair(sigma, psi);
      },
      3, Expr::constant(0.0, m));
}
inline DoubleField field_from_lagrangian(int m, const std::string& L) { return field_from_lagrangian(parse_expr(L, m)); }

}  // namespace bigtan
