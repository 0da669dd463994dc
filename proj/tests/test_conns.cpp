#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "bigtan/conns.hpp"
#include "oracles.hpp"

using namespace bigtan;

namespace {

// Christoffel symbols of diag(1, e^{2 x1}), worked out by hand.
std::vector<std::string> curved_gamma() {
  std::vector<std::string> g(8, "0");
  g[(0 * 2 + 1) * 2 + 1] = "-exp(2*x1)";
  g[(1 * 2 + 0) * 2 + 1] = "1";
  g[(1 * 2 + 1) * 2 + 0] = "1";
  return g;
}

TensorField diag_metric(int m, const std::vector<std::string>& d) {
  const int n = 3 * m;
  std::vector<std::string> c(n * n, "0");
  for (int i = 0; i < n; ++i) c[i * n + i] = d[i];
  return TensorField::from_strings({Slot::down, Slot::down}, m, c);
}

// A Riemannian metric on the m = 2 chart with fibre dependence, positive near the sample box.
TensorField bumpy_metric() {
  const int n = 6;
  std::vector<std::string> c(n * n, "0");
  for (int i = 0; i < n; ++i) c[i * n + i] = "2 + 0.1*x1*x1 + 0.05*y" + std::to_string(i % 2 + 1) + "^2";
  c[0 * n + 3] = c[3 * n + 0] = "0.2*sin(y1)";
  c[1 * n + 4] = c[4 * n + 1] = "0.1*x2*z1";
  c[2 * n + 5] = c[5 * n + 2] = "0.15*cos(x1 + z2)";
  return TensorField::from_strings({Slot::down, Slot::down}, 2, c);
}

// Christoffel symbols from finite differences of the metric values.
std::vector<double> fd_christoffel(const TensorField& g, const ChartPoint& p) {
  const int n = p.dim();
  std::vector<std::vector<double>> dg;
  for (int s = 0; s < n; ++s) dg.push_back(oracle::fd_field_partial(g, p, s));
  Eigen::MatrixXd G = endo_matrix(g.value(p));
  const Eigen::MatrixXd Gi = G.inverse();
  std::vector<double> r(n * n * n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          r[(a * n + b) * n + k] +=
              0.5 * Gi(k, l) * (dg[a][b * n + l] + dg[b][a * n + l] - dg[l][a * n + b]);
  return r;
}

}  // namespace

TEST(LeviCivita, EuclideanIsFlat) {
  const Connection D = levi_civita(diag_metric(1, {"1", "1", "1"}));
  for (double g : D.coefficients(ChartPoint({0.3}, {-0.2}, {0.5}))) EXPECT_EQ(g, 0.0);
}

TEST(LeviCivita, ExponentialLineElement) {
  // g = e^{2x1} dx1^2 + dy1^2 + dz1^2 is flat with Gamma^x_xx = 1
  const Connection D = levi_civita(diag_metric(1, {"exp(2*x1)", "1", "1"}));
  const ChartPoint p({0.4}, {0.1}, {-0.3});
  const auto G = D.coefficients(p);
  EXPECT_NEAR(G[0], 1.0, 1e-14);
  for (std::size_t i = 1; i < G.size(); ++i) EXPECT_NEAR(G[i], 0.0, 1e-14);
  EXPECT_LT(max_abs(curvature(D).value(p)), 1e-13);
  EXPECT_LT(max_abs(torsion(D).value(p)), 1e-14);
}

TEST(LeviCivita, HyperbolicPlaneCurvature) {
  // dx^2 + e^{2x} dy^2 has K = -1, so R(dx, dy)dy = -e^{2x} dx
  const Connection D = levi_civita(diag_metric(1, {"1", "exp(2*x1)", "1"}));
  const ChartPoint p({0.35}, {0.2}, {0.1});
  const TensorValue R = curvature(D).value(p);
  EXPECT_NEAR(R(0, 1, 0, 1), -std::exp(0.7), 1e-12);
  EXPECT_NEAR(R(1, 0, 0, 1), 1.0, 1e-12);
}

TEST(LeviCivita, MatchesFiniteDifferenceChristoffels) {
  const TensorField g = bumpy_metric();
  const Connection D = levi_civita(g);
  PointSampler ps(3);
  for (int t = 0; t < 4; ++t) {
    const ChartPoint p = ps.point(2);
    const auto G = D.coefficients(p), F = fd_christoffel(g, p);
    for (std::size_t i = 0; i < G.size(); ++i) EXPECT_NEAR(G[i], F[i], 1e-7);
  }
}

TEST(LeviCivita, TorsionFreeMetricAndBianchi) {
  const TensorField g = bumpy_metric();
  const Connection D = levi_civita(g);
  PointSampler ps(4);
  for (int t = 0; t < 4; ++t) {
    const Context c(ps.point(2), D.depth() + 1);
    const ConnectionJets cj = D.eval(c);
    const int n = cj.n;
    const JetTensor G = g.eval(c);
    for (const auto& x : torsion_jets(cj)) EXPECT_LT(std::fabs(x.value()), 1e-13);
    for (int A = 0; A < n; ++A)
      for (int B = 0; B < n; ++B)
        for (int C = 0; C < n; ++C) {
          double s = G(B, C).d1(A);
          for (int q = 0; q < n; ++q)
            s -= cj.gamma(A, B, q).value() * G(q, C).value() + cj.gamma(A, C, q).value() * G(B, q).value();
          EXPECT_LT(std::fabs(s), 1e-12);
        }
    const auto R = curvature_jets(cj);
    auto r = [&](int A, int B, int C, int F) { return R[((A * n + B) * n + C) * n + F].value(); };
    for (int A = 0; A < n; ++A)
      for (int B = 0; B < n; ++B)
        for (int C = 0; C < n; ++C)
          for (int F = 0; F < n; ++F) {
            EXPECT_LT(std::fabs(r(A, B, C, F) + r(B, C, A, F) + r(C, A, B, F)), 1e-11);
            EXPECT_LT(std::fabs(r(A, B, C, F) + r(B, A, C, F)), 1e-12);
          }
  }
}

TEST(LeviCivita, RejectsWrongRank) {
  const TensorField v = TensorField::from_strings({Slot::up}, 1, {"1", "0", "0"});
  EXPECT_THROW(levi_civita(v), Error);
}

TEST(Covariant, NaturalFrameFormula) {
  // nabla_v W = v^a (d_a W^k + Gamma^k_ab W^b) for the natural frame
  const TensorField g = bumpy_metric();
  const Connection D = levi_civita(g);
  const Context c(ChartPoint({0.2, -0.1}, {0.3, 0.4}, {-0.2, 0.1}), D.depth() + 1);
  const ConnectionJets cj = D.eval(c);
  std::vector<Jet> v, W;
  for (int s = 0; s < 6; ++s) {
    v.push_back(c.constant(0.1 * (s + 1)));
    W.push_back(c.variable(s) * c.variable((s + 1) % 6) + c.constant(1.0));
  }
  const auto out = covariant(cj, v, W);
  for (int k = 0; k < 6; ++k) {
    double e = 0.0;
    for (int a = 0; a < 6; ++a) {
      double s = W[k].d1(a);
      for (int b = 0; b < 6; ++b) s += cj.gamma(a, b, k).value() * W[b].value();
      e += v[a].value() * s;
    }
    EXPECT_NEAR(out[k].value(), e, 1e-13);
  }
}

TEST(Canonical, HorizontalCoefficientsAreTheBaseChristoffels) {
  const HorizontalBundle H = from_linear_connection(2, curved_gamma());
  const Connection N = canonical_bott(H);
  PointSampler ps(5);
  for (int t = 0; t < 5; ++t) {
    const ChartPoint p = ps.point(2);
    const Context c(p, N.depth() + 1);
    const ConnectionJets cj = N.eval(c);
    const double e2 = std::exp(2 * p.coord(0));
    const double base[8] = {0, 0, 0, -e2, 0, 1, 1, 0};  // Gamma^a_bc at (a*2+b)*2+c
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          EXPECT_NEAR(cj.gamma(i, j, k).value(), base[(k * 2 + i) * 2 + j], 1e-13);
          for (int s = 2; s < 6; ++s) EXPECT_LT(std::fabs(cj.gamma(i, j, k).d1(s)), 1e-13);
        }
  }
}

TEST(Canonical, RulesHoldOnRandomFields) {
  const HorizontalBundle H = from_linear_connection(2, curved_gamma());
  const Report r = canonical_rule_check(H, 11, 6);
  for (const auto& c : r.checks()) EXPECT_TRUE(c.pass) << c.name << " " << c.max_residual;
  // a bundle whose brackets mix V1 and V2
  const HorizontalBundle K = HorizontalBundle::from_strings(2, {"x1*z2", "y1*y2", "0", "z1"}, {"y2", "0", "x2*z1", "y1*z2"});
  const Report rk = canonical_rule_check(K, 12, 6);
  for (const auto& c : rk.checks()) EXPECT_TRUE(c.pass) << c.name << " " << c.max_residual;
}

TEST(Canonical, SplittingDefect) {
  PointSampler ps(6);
  std::vector<ChartPoint> pts{ps.point(2), ps.point(2)};
  EXPECT_LT(splitting_defect(from_linear_connection(2, curved_gamma()), pts), 1e-14);
  const HorizontalBundle K = HorizontalBundle::from_strings(2, {"x1*z2", "0", "0", "0"}, {"0", "0", "0", "0"});
  EXPECT_GT(splitting_defect(K, pts), 1e-3);
}

TEST(VranceanuBott, TorsionIsMinusEhresmannCurvature) {
  const HorizontalBundle H = from_linear_connection(2, curved_gamma());
  const Connection vb = vranceanu_bott(levi_civita(bumpy_metric()), H, false);
  const TensorField T = torsion(vb), RH = ehresmann_curvature(H);
  PointSampler ps(7);
  for (int t = 0; t < 3; ++t) {
    const ChartPoint p = ps.point(2);
    const Context c(p, vb.depth() + 1);
    const ConnectionJets cj = vb.eval(c);
    const TensorValue tv = T.value(p), rh = RH.value(p);
    // frame components of -R_H(X_i, X_j) against T(X_i, X_j)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        std::vector<Jet> r(6);
        for (int s = 0; s < 6; ++s) r[s] = c.constant(rh(s, i, j));
        const auto comp = cj.components(r);
        for (int F = 0; F < 6; ++F) EXPECT_NEAR(tv(F, i, j), -comp[F].value(), 1e-12);
      }
    EXPECT_GT(max_abs(tv), 1e-3);
  }
}

TEST(VerifySection4, CurvedGammaBundle) {
  const HorizontalBundle H = from_linear_connection(2, curved_gamma());
  const Report r = verify_section4(H, bumpy_metric(), 21, 4);
  for (const auto& c : r.checks()) EXPECT_TRUE(c.pass) << c.name << " " << c.max_residual;
  ASSERT_NE(r.get("canonical (projectable): R(Y, X)X' = 0"), nullptr);
  ASSERT_NE(r.get("VB-multi: R(Y_a, Y'_a)Y (diagnostic)"), nullptr);
  EXPECT_LT(r.get("canonical: projectability (y, z partials of horizontal coefficients)")->max_residual, 1e-10);
}

TEST(VerifySection4, NonSplitBundleGatesBlockChecks) {
  const HorizontalBundle K = HorizontalBundle::from_strings(2, {"x1*z2", "y1*y2", "0", "z1"}, {"y2", "0", "x2*z1", "y1*z2"});
  const Report r = verify_section4(K, diag_metric(2, {"1", "1", "1", "1", "1", "1"}), 22, 3);
  for (const auto& c : r.checks()) EXPECT_TRUE(c.pass) << c.name << " " << c.max_residual;
  EXPECT_EQ(r.get("canonical (projectable): R(Y, X)X' = 0"), nullptr);
  EXPECT_FALSE(r.checks().front().note.empty());
}

TEST(VerifySection4, BrokenConnectionIsCaught) {
  // a connection with a horizontal block that ignores the bundle fails the Bott rules
  const HorizontalBundle H = from_linear_connection(2, curved_gamma());
  const Connection D = levi_civita(bumpy_metric());
  const Context c(ChartPoint({0.2, 0.1}, {0.3, -0.4}, {0.2, 0.5}), D.depth() + 2);
  const HCoeffs k = H.coeffs(c);
  ConnectionJets dj = D.eval(c);
  Report r;
  detail::bott_identities(r, "D: ", dj, k, ehresmann_jets(k, c), 2, 1e-8);
  EXPECT_FALSE(r.all_pass());
}

TEST(VerifySection4, SameBlockVerticalCurvatureNeedsLeafwiseFlatD) {
  const HorizontalBundle H = from_linear_connection(2, curved_gamma());
  const Report flat = verify_section4(H, diag_metric(2, {"1", "1", "1", "1", "1", "1"}), 23, 2);
  EXPECT_LT(flat.get("VB-multi: R(Y_a, Y'_a)Y (diagnostic)")->max_residual, 1e-12);
  const Report bumpy = verify_section4(H, bumpy_metric(), 23, 2);
  EXPECT_GT(bumpy.get("VB-multi: R(Y_a, Y'_a)Y (diagnostic)")->max_residual, 1e-4);
}
