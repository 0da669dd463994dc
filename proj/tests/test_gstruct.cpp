#include <gtest/gtest.h>

#include "bigtan/gstruct.hpp"
#include "oracles.hpp"

using namespace bigtan;

namespace {

TensorField constant_from(const Eigen::MatrixXd& M, std::vector<Slot> sig, int m) {
  TensorValue v(std::move(sig), 3 * m, 0.0);
  for (int i = 0; i < 3 * m; ++i)
    for (int j = 0; j < 3 * m; ++j) v(i, j) = M(i, j);
  return TensorField::constant(v, m);
}

// Triple transported by a constant linear map L: S -> L S L^-1, P -> L P L^T, Q -> L Q L^T.
TriplePack transported(const TriplePack& T, const Eigen::MatrixXd& L) {
  const ChartPoint p0(std::vector<double>(T.m, 0.0), std::vector<double>(T.m, 0.0), std::vector<double>(T.m, 0.0));
  const Eigen::MatrixXd S = endo_matrix(T.S.value(p0));
  Eigen::MatrixXd P(3 * T.m, 3 * T.m), Q = P;
  const TensorValue Pv = T.P.value(p0), Qv = T.Q.value(p0);
  for (int i = 0; i < 3 * T.m; ++i)
    for (int j = 0; j < 3 * T.m; ++j) {
      P(i, j) = Pv(i, j);
      Q(i, j) = Qv(i, j);
    }
  return {T.m, constant_from(L * S * L.inverse(), sig_endo(), T.m),
          constant_from(L * P * L.transpose(), sig_multivector(2), T.m),
          constant_from(L * Q * L.transpose(), sig_multivector(2), T.m)};
}

Eigen::MatrixXd random_matrix(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1, 1);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = U(rng);
  return M + 2.0 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST(TripleAxioms, CanonicalPassesForAllSmallDimensions) {
  for (int m = 1; m <= 3; ++m) {
    const Report r = triple_axiom_check(canonical_triple(m), 1, 50);
    for (const auto& c : r.checks()) EXPECT_TRUE(c.pass) << m << " " << c.name;
  }
}

TEST(TripleAxioms, ZeroNilpotentStructureFailsRank) {
  TriplePack T = canonical_triple(2);
  T.S = TensorField::constant(TensorValue(sig_endo(), 6, 0.0), 2);
  const Report r = triple_axiom_check(T, 1, 5);
  EXPECT_FALSE(r.get("rank S = m")->pass);
  EXPECT_FALSE(r.all_pass());
}

TEST(TripleAxioms, DoubledPoissonBivectorFailsCompositionRule) {
  TriplePack T = canonical_triple(1);
  const ChartPoint p({0}, {0}, {0});
  T.P = TensorField::constant(2.0 * T.P.value(p), 1);
  const Report r = triple_axiom_check(T, 1, 5);
  // sharp_2P flat_Q = 2 phi while sharp_Q flat_2P = phi / 2
  EXPECT_FALSE(r.get("sharp_P flat_Q = sharp_Q flat_P")->pass);
  EXPECT_GT(r.get("sharp_P flat_Q = sharp_Q flat_P")->max_residual, 1.0);
  EXPECT_FALSE(r.get("sharp_Q flat_P S = -S")->pass);
  EXPECT_TRUE(r.get("ker S = im sharp_P")->pass);
}

TEST(AdaptedFrame, CanonicalTriple) {
  for (int m = 1; m <= 3; ++m) {
    const TriplePack T = canonical_triple(m);
    PointSampler ps(m);
    for (int t = 0; t < 20; ++t) {
      const AdaptedFrame F = adapted_frame(T, ps.point(m));
      EXPECT_LT(frame_residual(T, F), 1e-8);
      // the Euclidean complement of ker S is span{d/dx}
      EXPECT_LT((F.a().bottomRows(2 * m)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(AdaptedFrame, TransportedTriples) {
  std::mt19937_64 rng(3);
  for (int m = 1; m <= 3; ++m)
    for (int t = 0; t < 5; ++t) {
      const TriplePack T = transported(canonical_triple(m), random_matrix(3 * m, rng));
      ASSERT_TRUE(triple_axiom_check(T, 2, 3).all_pass());
      const AdaptedFrame F = adapted_frame(T, PointSampler(t).point(m));
      EXPECT_LT(frame_residual(T, F), 1e-8) << m;
    }
}

TEST(AdaptedFrame, PointDependentTriple) {
  // (S, f P, f Q) with f = 2 + sin(x1 y1) keeps the axioms pointwise
  const int m = 1;
  const std::string f = "(2 + sin(x1*y1))";
  TriplePack T = canonical_triple(m);
  T.P = TensorField::from_strings(sig_multivector(2), m, {"0", "0", "0", "0", "0", f, "0", "-" + f, "0"});
  T.Q = TensorField::from_strings(sig_multivector(2), m, {"0", "0", "0", "0", "0", f, "0", f, "0"});
  PointSampler ps(12);
  for (int t = 0; t < 20; ++t) EXPECT_LT(frame_residual(T, adapted_frame(T, ps.point(m))), 1e-8);
}

TEST(AdaptedFrame, RejectsBrokenTriple) {
  TriplePack T = canonical_triple(1);
  T.S = TensorField::constant(TensorValue(sig_endo(), 3, 0.0), 1);
  EXPECT_THROW(adapted_frame(T, ChartPoint({0}, {0}, {0})), Error);
}

TEST(AdaptedFrame, ComplementChangeStaysInStructureGroupOrbit) {
  std::mt19937_64 rng(8);
  for (int m = 1; m <= 3; ++m) {
    const TriplePack T = transported(canonical_triple(m), random_matrix(3 * m, rng));
    const ChartPoint p = PointSampler(m).point(m);
    const AdaptedFrame F0 = adapted_frame(T, p);
    // a' = a A + (vectors in ker S)
    const Eigen::MatrixXd A = random_matrix(m, rng);
    Eigen::MatrixXd kerpart = F0.b() * random_matrix(m, rng) + F0.c() * random_matrix(m, rng);
    const AdaptedFrame F1 = adapted_frame(T, p, Eigen::MatrixXd(F0.a() * A + kerpart));
    EXPECT_LT(frame_residual(T, F1), 1e-8);
    EXPECT_LT(bt_orbit_residual(F0, F1), 1e-8) << m;
  }
}

TEST(AtlasJacobian, Examples) {
  EXPECT_TRUE(canonical_atlas_jacobian_check(Eigen::MatrixXd::Identity(6, 6)));
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, 3);
  J.diagonal() << 2, 2, 0.5;  // x~ = 2x
  EXPECT_TRUE(canonical_atlas_jacobian_check(J));
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
  bad(0, 1) = 0.3;  // d x~ / d y != 0
  EXPECT_FALSE(canonical_atlas_jacobian_check(bad));
  EXPECT_FALSE(canonical_atlas_jacobian_check(Eigen::MatrixXd::Identity(4, 4)));
}

TEST(AtlasJacobian, NonlinearCanonicalChangeByFiniteDifferences) {
  // x~ = (x1 + x2^2, x2), y~ = A y, z~ = A^{-T} z with A = d x~ / d x.
  auto chart = [](const Eigen::VectorXd& v) {
    const double x1 = v(0), x2 = v(1);
    Eigen::Matrix2d A;
    A << 1, 2 * x2, 0, 1;
    Eigen::VectorXd w(6);
    w.head(2) << x1 + x2 * x2, x2;
    w.segment(2, 2) = A * v.segment(2, 2);
    w.tail(2) = A.inverse().transpose() * v.tail(2);
    return w;
  };
  Eigen::VectorXd p(6);
  p << 0.3, -0.5, 0.7, 0.2, -0.4, 1.1;
  Eigen::MatrixXd J(6, 6);
  const double h = 1e-5;
  for (int l = 0; l < 6; ++l) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(6);
    e(l) = h;
    J.col(l) = (chart(p + e) - chart(p - e)) / (2 * h);
  }
  EXPECT_TRUE(canonical_atlas_jacobian_check(J, false, 1e-8));
  EXPECT_TRUE(canonical_atlas_jacobian_check(J, true, 1e-8));
  // a z-dependent shift of y~ is quasi-integrable but not integrable
  Eigen::MatrixXd Jq = J;
  Jq(2, 4) = 0.25;
  EXPECT_TRUE(canonical_atlas_jacobian_check(Jq, false, 1e-8));
  EXPECT_FALSE(canonical_atlas_jacobian_check(Jq, true, 1e-8));
}

TEST(Integrability, CanonicalWithVerticalZDistribution) {
  for (int m = 1; m <= 3; ++m) {
    const Report r = integrability_check(canonical_triple(m), default_test_functions(m), canonical_delta(m), 4, 50);
    for (const auto& c : r.checks()) EXPECT_TRUE(c.pass) << m << " " << c.name << " " << c.max_residual;
  }
}

TEST(Integrability, HamiltonianInvarianceNeedsAffineDependenceOnY) {
  // for X = sharp_P d(y1 z1) = z1 d/dz1 - y1 d/dy1 one gets (L_X S)(d/dx1) = d/dy1
  const TriplePack T = canonical_triple(1);
  const Report r = integrability_check(T, {parse_expr("y1*z1", 1)}, std::nullopt, 3, 4);
  EXPECT_NEAR(r.get("L_{sharp_P df} S = 0")->max_residual, 1.0, 1e-12);
  EXPECT_TRUE(integrability_check(T, {parse_expr("sin(x1)*y1 + z1^2*x1", 1)}, std::nullopt, 3, 4).all_pass());
}

TEST(Integrability, DeformedNilpotentStructureIsFlagged) {
  const int m = 2;
  TriplePack T = canonical_triple(m);
  // S + y1 dx2 (x) d/dy1: N(d/dx1, d/dx2) = [d/dy1, d/dy2 + y1 d/dy1] = d/dy1
  std::vector<std::string> s(36, "0");
  s[2 * 6 + 0] = "1";
  s[3 * 6 + 1] = "1";
  s[2 * 6 + 1] = "y1";
  T.S = TensorField::from_strings(sig_endo(), m, s);
  const Report r = integrability_check(T, default_test_functions(m), std::nullopt, 1, 10);
  EXPECT_FALSE(r.get("N_S = 0")->pass);
  EXPECT_NEAR(r.get("N_S = 0")->max_residual, 1.0, 1e-12);
  EXPECT_TRUE(r.get("[P,P] = 0")->pass);
}

TEST(Integrability, XDependentShearKeepsNijenhuisZero) {
  // S + x1 dx2 (x) d/dy1 only adds brackets that S annihilates
  const int m = 2;
  TriplePack T = canonical_triple(m);
  std::vector<std::string> s(36, "0");
  s[2 * 6 + 0] = "1";
  s[3 * 6 + 1] = "1";
  s[2 * 6 + 1] = "x1";
  T.S = TensorField::from_strings(sig_endo(), m, s);
  EXPECT_TRUE(integrability_check(T, default_test_functions(m), std::nullopt, 1, 10).get("N_S = 0")->pass);
}

TEST(Integrability, DeformedPoissonBivectorBreaksHamiltonianInvariance) {
  const int m = 1;
  TriplePack T = canonical_triple(m);
  T.P = TensorField::from_strings(sig_multivector(2), m, {"0", "0", "0", "0", "0", "1 + y1", "0", "-(1 + y1)", "0"});
  const Report r = integrability_check(T, {parse_expr("x1*z1", m)}, std::nullopt, 2, 10);
  EXPECT_TRUE(r.get("[P,P] = 0")->pass);
  EXPECT_TRUE(r.get("N_S = 0")->pass);
  EXPECT_FALSE(r.get("L_{sharp_P df} S = 0")->pass);
  // (L_X S)(d/dx1) = x1 d/dy1 for X = sharp_P d(x1 z1)
  const ChartPoint p({0.6}, {0.1}, {-0.3});
  const Report one = integrability_check(T, {parse_expr("x1*z1", m)}, std::nullopt, std::vector<ChartPoint>{p});
  EXPECT_NEAR(one.get("L_{sharp_P df} S = 0")->max_residual, 0.6, 1e-12);
}

TEST(Integrability, DistributionNegativeControls) {
  const int m = 2;
  const TriplePack T = canonical_triple(m);
  Distribution inS;
  for (int i = 0; i < m; ++i) {
    TensorValue v(sig_vector(), 6, 0.0);
    v(m + i) = 1.0;
    inS.push_back(TensorField::constant(v, m));
  }
  const Report r1 = integrability_check(T, default_test_functions(m), inS, 1, 5);
  EXPECT_FALSE(r1.get("im S + Delta is direct")->pass);
  Distribution twisted{TensorField::from_strings(sig_vector(), m, {"0", "0", "0", "0", "1", "0"}),
                       TensorField::from_strings(sig_vector(), m, {"0", "0", "z1", "0", "0", "1"})};
  const Report r2 = integrability_check(T, default_test_functions(m), twisted, 1, 5);
  EXPECT_FALSE(r2.get("Delta involutive")->pass);
}
