#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bigtan/conns.hpp"

namespace bigtan {

/// A metric on the chart with non-degenerate vertical restriction, together with its horizontal
/// bundle H_g, the g-orthogonal complement of V.
class BigMetric {
 public:
  BigMetric() = default;

  /// H_g is derived from the metric: X_i = d/dx^i - G_VV^{-1} G_{V x_i}.
  explicit BigMetric(TensorField g) : g_(std::move(g)) {
    check_shape();
    const TensorField gf = g_;
    const int m = g_.m();
    H_ = HorizontalBundle(
        m,
        [gf, m](const Context& c) {
          const JetMatrix G = as_matrix(gf.eval(c));
          const JetMatrix GVV = G.block(m, m, 2 * m, 2 * m);
          const JetMatrix v = inverse(GVV, 1e-12) * G.block(m, 0, 2 * m, m);
          HCoeffs k{JetMatrix(m, m, c.zero()), JetMatrix(m, m, c.zero())};
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
              k.t(i, j) = v(j, i);
              k.tau(i, j) = v(m + j, i);
            }
          return k;
        },
        g_.depth());
  }

  /// Metric built with a known orthogonal horizontal bundle.
  BigMetric(TensorField g, HorizontalBundle H) : g_(std::move(g)), H_(std::move(H)) { check_shape(); }

  int m() const { return g_.m(); }
  const TensorField& field() const { return g_; }
  const HorizontalBundle& horizontal() const { return H_; }
  int depth() const { return std::max(g_.depth(), H_.depth()); }

  /// Frame components g(E_A, E_B) in the adapted frame of H_g.
  JetMatrix frame_matrix(const Context& c) const {
    const JetMatrix E = adapted_frame_jets(H_.coeffs(c), c);
    return E.transpose() * as_matrix(g_.eval(c)) * E;
  }

 private:
  void check_shape() const {
    if (g_.rank() != 2 || g_.signature()[0] != Slot::down || g_.signature()[1] != Slot::down)
      throw Error("metric: expected a (0,2) tensor field");
  }
  TensorField g_;
  HorizontalBundle H_;
};

/// g_ij dx dx + g_ij theta theta + g^ij kappa kappa in the coframe of H, for a base metric g given
/// as jets of an m x m matrix (the generator may read x only).
inline BigMetric sasaki_type_metric(int m, std::function<JetMatrix(const Context&)> base, int base_depth,
                                    const HorizontalBundle& H) {
  if (H.m() != m) throw Error("sasaki_type_metric: dimension mismatch");
  const std::vector<Slot> sig{Slot::down, Slot::down};
  TensorField g(
      sig, m,
      [m, base, H, sig](const Context& c) {
        const JetMatrix b = base(c);
        if (!(detail::condition_number(b) < 1e12)) throw DomainError("sasaki_type_metric: singular base metric");
        const JetMatrix bi = inverse(b);
        JetMatrix B(3 * m, 3 * m, c.zero());
        B.set_block(0, 0, b);
        B.set_block(m, m, b);
        B.set_block(2 * m, 2 * m, bi);
        const JetMatrix C = adapted_coframe_jets(H.coeffs(c), c);
        const JetMatrix G = C.transpose() * B * C;
        JetTensor t(sig, 3 * m, c.zero());
        for (int a = 0; a < 3 * m; ++a)
          for (int b2 = 0; b2 < 3 * m; ++b2) t(a, b2) = G(a, b2);
        return t;
      },
      std::max(base_depth, H.depth()), Frame::natural, {SlotSymmetry{SlotSymmetry::sym, 0, 1}});
  return BigMetric(std::move(g), H);
}

/// Sasaki-type metric of a base metric given by x-only expressions (row-major m x m).
inline BigMetric sasaki_type_metric(const std::vector<Expr>& base, const HorizontalBundle& H) {
  const int m = H.m();
  if (static_cast<int>(base.size()) != m * m) throw Error("sasaki_type_metric: expected m*m base components");
  for (const auto& e : base)
    if (e.depends_on(Coord::y) || e.depends_on(Coord::z)) throw Error("sasaki_type_metric: base metric must depend on x only");
  return sasaki_type_metric(
      m,
      [base, m](const Context& c) {
        JetMatrix b(m, m, c.zero());
        for (int i = 0; i < m * m; ++i) b(i / m, i % m) = eval_jet(base[i], c);
        return b;
      },
      0, H);
}

/// Christoffel symbols Gamma^a_bc (layout (a*m+b)*m+c) of an x-only base metric, as jets.
inline std::vector<Jet> base_christoffel(const std::vector<Expr>& base, const Context& c) {
  const int m = c.m();
  JetMatrix b(m, m, c.zero());
  for (int i = 0; i < m * m; ++i) b(i / m, i % m) = eval_jet(base[i], c);
  const JetMatrix bi = inverse(b, 1e-12);
  std::vector<Jet> G(static_cast<std::size_t>(m) * m * m, c.zero());
  for (int a = 0; a < m; ++a)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l)
          G[(a * m + i) * m + j] += 0.5 * bi(a, l) * (b(j, l).diff(i) + b(i, l).diff(j) - b(i, j).diff(l));
  return G;
}

/// Sasaki metric of a base metric: the Sasaki-type metric on the Gamma-bundle of its Levi-Civita connection.
inline BigMetric sasaki_metric(const std::vector<Expr>& base) {
  if (base.empty()) throw Error("sasaki_metric: empty base metric");
  const int m = base.front().dim();
  if (static_cast<int>(base.size()) != m * m) throw Error("sasaki_metric: expected m*m base components");
  for (const auto& e : base)
    if (e.depends_on(Coord::y) || e.depends_on(Coord::z)) throw Error("sasaki_metric: base metric must depend on x only");
  const HorizontalBundle H =
      from_linear_connection(m, [base](const Context& c) { return base_christoffel(base, c); }, 1);
  return sasaki_type_metric(base, H);
}

inline BigMetric sasaki_metric(int m, const std::vector<std::string>& base) {
  return sasaki_metric(detail::parse_all(m, base));
}

/// Sasaki-type metric of a regular Lagrangian: Hessian g on the spray bundle.
inline BigMetric lagrangian_metric(const Expr& L) {
  const Spray s = spray_from_lagrangian(L);
  const int m = s.m;
  return sasaki_type_metric(
      m,
      [L](const Context& c) {
        const JetMatrix g = detail::lagrangian_hessian(eval_jet(L, c), c);
        if (!(detail::condition_number(g) < 1e8)) throw DomainError("lagrangian_metric: singular Lagrangian Hessian");
        return g;
      },
      2, s.H);
}

inline BigMetric lagrangian_metric(int m, const std::string& L) { return lagrangian_metric(parse_expr(L, m)); }

/// Vranceanu-Bott connection of the Levi-Civita connection of g relative to H_g, with a report of
/// its characterizing properties at seeded points.
struct MetricConnection {
  Connection nabla;
  Report report;
};

inline MetricConnection canonical_metric_connection(const BigMetric& g, std::uint64_t seed = 1, int n_points = 5,
                                                    double tol = 1e-8) {
  const int m = g.m(), n = 3 * m;
  const Connection nabla = vranceanu_bott(levi_civita(g.field()), g.horizontal(), false);
  PointSampler ps(seed);
  std::vector<ChartPoint> pts;
  for (int i = 0; i < n_points; ++i) pts.push_back(ps.point(m));
  const int order = nabla.depth() + 1;
  auto parts = parallel_map(pts.size(), [&](std::size_t idx) {
    Report r;
    const Context c(pts[idx], order);
    const ConnectionJets cj = nabla.eval(c);
    const JetMatrix G = g.frame_matrix(c);
    const JetMatrix Gn = as_matrix(g.field().eval(c));
    // H_g is g-orthogonal to V
    double orth = 0.0;
    for (int i = 0; i < m; ++i)
      for (int B = m; B < n; ++B) orth = std::max(orth, std::fabs(G(i, B).value()));
    r.record("H_g orthogonal to V", orth, tol);
    r.record("i) preserves H and V", preservation_residual(cj, m, BlockFlags{true, true, false, false}), tol);
    // ii) (nabla_A g)(B, C) = 0 when A, B, C are all horizontal or all vertical
    std::vector<std::vector<Jet>> E;
    for (int A = 0; A < n; ++A) E.push_back(cj.frame_vector(A));
    double met = 0.0;
    for (int A = 0; A < n; ++A)
      for (int B = 0; B < n; ++B)
        for (int C = 0; C < n; ++C) {
          const bool hor = A < m && B < m && C < m, ver = A >= m && B >= m && C >= m;
          if (!hor && !ver) continue;
          double s = directional(E[A], G(B, C)).value();
          for (int q = 0; q < n; ++q)
            s -= cj.gamma(A, B, q).value() * G(q, C).value() + cj.gamma(A, C, q).value() * G(B, q).value();
          met = std::max(met, std::fabs(s));
        }
    r.record("ii) parallel along H and V preserves g|_H and g|_V", met, tol);
    const auto T = torsion_jets(cj);
    double th = 0.0, tv = 0.0;
    for (int A = 0; A < n; ++A)
      for (int B = 0; B < n; ++B)
        for (int F = 0; F < n; ++F) {
          const double v = std::fabs(T[(static_cast<std::size_t>(A) * n + B) * n + F].value());
          if (A < m && B < m && F < m) th = std::max(th, v);
          if (A >= m && B >= m && F >= m) tv = std::max(tv, v);
        }
    r.record("iii) T(H, H) is vertical", th, tol);
    r.record("iii) T(V, V) is horizontal", tv, tol);
    // along a V-leaf: Christoffel symbols of g|_V in (y, z) with x frozen
    const JetMatrix GVV = Gn.block(m, m, 2 * m, 2 * m);
    const JetMatrix Gi = inverse(GVV, 1e-12);
    double leaf = 0.0;
    for (int a = 0; a < 2 * m; ++a)
      for (int b = 0; b < 2 * m; ++b)
        for (int k = 0; k < 2 * m; ++k) {
          double s = 0.0;
          for (int l = 0; l < 2 * m; ++l)
            s += 0.5 * Gi(k, l).value() *
                 (GVV(b, l).d1(m + a) + GVV(a, l).d1(m + b) - GVV(a, b).d1(m + l));
          leaf = std::max(leaf, std::fabs(cj.gamma(m + a, m + b, m + k).value() - s));
        }
    r.record("restriction to V-leaves is their Levi-Civita connection", leaf, tol);
    return r;
  });
  Report rep("canonical metric connection");
  for (const auto& p : parts) rep.merge(p);
  return {nabla, std::move(rep)};
}

/// Cartan tensor C(X_i, X_j, X_k) = d g(X_j, X_k) / dy^i, a horizontal (0,3) field in the adapted frame
/// (components with a vertical index vanish).
inline TensorField cartan_tensor(const BigMetric& g) {
  const int m = g.m();
  const std::vector<Slot> sig{Slot::down, Slot::down, Slot::down};
  return TensorField(
      sig, m,
      [g, m, sig](const Context& c) {
        const JetMatrix G = g.frame_matrix(c);
        JetTensor C(sig, 3 * m, c.zero(), Frame::adapted);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) C(i, j, k) = G(j, k).diff(var_index(Coord::y, i, m));
        return C;
      },
      g.depth() + 1, Frame::adapted);
}

namespace detail {

/// Covariant curvature Rc(z1, z2, z3, z4) = g(R(z3, z4) z2, z1) in the adapted frame.
struct CovariantCurvature {
  int n = 0;
  std::vector<double> v;
  double operator()(int a, int b, int c, int d) const {
    return v[((static_cast<std::size_t>(a) * n + b) * n + c) * n + d];
  }
};

inline CovariantCurvature covariant_curvature(const ConnectionJets& cj, const JetMatrix& G) {
  const int n = cj.n;
  const auto R = curvature_jets(cj);
  CovariantCurvature out{n, std::vector<double>(static_cast<std::size_t>(n) * n * n * n, 0.0)};
  for (int z1 = 0; z1 < n; ++z1)
    for (int z2 = 0; z2 < n; ++z2)
      for (int z3 = 0; z3 < n; ++z3)
        for (int z4 = 0; z4 < n; ++z4) {
          double s = 0.0;
          for (int F = 0; F < n; ++F)
            s += R[((static_cast<std::size_t>(z3) * n + z4) * n + z2) * n + F].value() * G(F, z1).value();
          out.v[((static_cast<std::size_t>(z1) * n + z2) * n + z3) * n + z4] = s;
        }
  return out;
}

}  // namespace detail

/// Identities of the covariant curvature of the canonical metric connection, evaluated on the frame
/// fields (X_i projectable). When C = 0 or T|_{HxH} = 0 the Riemannian symmetries of the horizontal
/// curvature are asserted as well.
inline Report curvature_identity_suite(const BigMetric& g, std::uint64_t seed, int n_points, double tol = 1e-7) {
  const int m = g.m(), n = 3 * m;
  const Connection nabla = vranceanu_bott(levi_civita(g.field()), g.horizontal(), false);
  const TensorField Cf = cartan_tensor(g);
  PointSampler ps(seed);
  std::vector<ChartPoint> pts;
  for (int i = 0; i < n_points; ++i) pts.push_back(ps.point(m));
  const int order = nabla.depth() + 1;
  struct PointResult {
    Report r;
    double cmax = 0.0, tmax = 0.0;
    std::vector<double> riem;  // Riemannian-symmetry residuals, evaluated regardless of the branch
  };
  auto parts = parallel_map(pts.size(), [&](std::size_t idx) {
    PointResult out;
    Report& r = out.r;
    const Context c(pts[idx], order);
    const ConnectionJets cj = nabla.eval(c);
    const JetMatrix G = g.frame_matrix(c);
    const detail::CovariantCurvature Rc = detail::covariant_curvature(cj, G);
    const JetTensor C = Cf.eval(c);
    const auto T = torsion_jets(cj);
    auto Tv = [&](int a, int b, int f) { return T[(static_cast<std::size_t>(a) * n + b) * n + f].value(); };
    // C(S^{-1} T(X_a, X_b), X_c, X_d), S^{-1} taking the V1 part d/dy^j to X_j
    auto CST = [&](int a, int b, int c2, int d) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += Tv(a, b, m + j) * C(j, c2, d).value();
      return s;
    };
    double anti = 0.0, cyc = 0.0, id1 = 0.0, id2 = 0.0, r12 = 0.0, r34 = 0.0, bi = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c2 = 0; c2 < n; ++c2)
          for (int d = 0; d < n; ++d) anti = std::max(anti, std::fabs(Rc(a, b, c2, d) + Rc(a, b, d, c2)));
    for (int z = 0; z < n; ++z)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          for (int c2 = 0; c2 < m; ++c2)
            cyc = std::max(cyc, std::fabs(Rc(z, a, b, c2) + Rc(z, b, c2, a) + Rc(z, c2, a, b)));
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        for (int c2 = 0; c2 < m; ++c2)
          for (int d = 0; d < m; ++d) {
            id1 = std::max(id1, std::fabs(Rc(a, b, c2, d) + Rc(b, a, c2, d) + CST(c2, d, a, b)));
            id2 = std::max(id2, std::fabs(Rc(a, b, c2, d) - Rc(c2, d, a, b) -
                                          0.5 * (CST(a, b, c2, d) - CST(c2, d, a, b))));
            r12 = std::max(r12, std::fabs(Rc(a, b, c2, d) + Rc(b, a, c2, d)));
            r34 = std::max(r34, std::fabs(Rc(a, b, c2, d) - Rc(c2, d, a, b)));
            bi = std::max(bi, std::fabs(Rc(a, b, c2, d) + Rc(a, c2, d, b) + Rc(a, d, b, c2)));
            out.cmax = std::max(out.cmax, std::fabs(C(a, b, c2).value()));
          }
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        for (int f = 0; f < n; ++f) out.tmax = std::max(out.tmax, std::fabs(Tv(a, b, f)));
    r.record("R(z1, z2, z3, z4) = -R(z1, z2, z4, z3)", anti, tol);
    r.record("cyclic R(z, X1, X2, X3) = 0", cyc, tol);
    r.record("R(X1, X2, X3, X4) + R(X2, X1, X3, X4) = -C(S^-1 T(X3, X4), X1, X2)", id1, tol);
    r.record("R(X1, X2, X3, X4) - R(X3, X4, X1, X2) = C-correction", id2, tol);
    out.riem = {r12, r34, bi};
    return out;
  });
  Report rep("covariant curvature identities");
  double cmax = 0.0, tmax = 0.0;
  std::vector<double> riem(3, 0.0);
  for (const auto& p : parts) {
    rep.merge(p.r);
    cmax = std::max(cmax, p.cmax);
    tmax = std::max(tmax, p.tmax);
    for (int k = 0; k < 3; ++k) riem[k] = std::max(riem[k], p.riem[k]);
  }
  const bool c_zero = cmax <= 1e-12, t_zero = tmax <= 1e-12;
  if (c_zero || t_zero) {
    const std::string why = c_zero ? "C = 0" : "H integrable";
    rep.record("horizontal R(X1, X2, X3, X4) = -R(X2, X1, X3, X4) (" + why + ")", riem[0], tol);
    rep.record("horizontal R(X1, X2, X3, X4) = R(X3, X4, X1, X2) (" + why + ")", riem[1], tol);
    rep.record("horizontal first Bianchi identity (" + why + ")", riem[2], tol);
  }
  return rep;
}

}  // namespace bigtan
