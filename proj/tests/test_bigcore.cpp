#include <gtest/gtest.h>

#include "bigtan/bigcore.hpp"
#include "oracles.hpp"

using namespace bigtan;

namespace {

ChartPoint pt(int m, double s) {
  std::vector<double> x(m), y(m), z(m);
  for (int i = 0; i < m; ++i) {
    x[i] = 0.3 * s + 0.1 * i;
    y[i] = -0.7 * s + 0.2 * i;
    z[i] = 0.4 * s - 0.3 * i;
  }
  return ChartPoint(x, y, z);
}

std::vector<double> vec_values(const TensorField& f, const ChartPoint& p) {
  const TensorValue v = f.value(p);
  std::vector<double> r;
  for (std::size_t i = 0; i < v.size(); ++i) r.push_back(v.flat(i));
  return r;
}

std::vector<Expr> zeros(int m) { return std::vector<Expr>(m, Expr::constant(0.0, m)); }

// Directional derivative of an expression along a point vector, by central differences.
double fd_directional(const Expr& e, const ChartPoint& p, const std::vector<double>& v) {
  double r = 0.0;
  for (std::size_t s = 0; s < v.size(); ++s)
    if (v[s] != 0.0) r += v[s] * oracle::fd_richardson(e, p, {static_cast<int>(s)}, 1e-2);
  return r;
}

// [X,Y] on the base by central differences.
std::vector<double> fd_base_bracket(const std::vector<Expr>& X, const std::vector<Expr>& Y, const ChartPoint& p) {
  const int m = p.m;
  std::vector<double> r(m, 0.0);
  for (int k = 0; k < m; ++k)
    for (int s = 0; s < m; ++s)
      r[k] += eval_value(X[s], p) * oracle::fd_richardson(Y[k], p, {s}, 1e-2) -
              eval_value(Y[s], p) * oracle::fd_richardson(X[k], p, {s}, 1e-2);
  return r;
}

}  // namespace

TEST(CanonicalPack, PoissonBivectorComponentsForM1) {
  const CanonicalPack k = canonical_pack(1);
  const TensorValue P = k.P.value(pt(1, 0.5));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double expect = (i == 1 && j == 2) ? 1.0 : (i == 2 && j == 1) ? -1.0 : 0.0;
      EXPECT_EQ(P(i, j), expect);
    }
}

TEST(CanonicalPack, EvaluationFunction) {
  const CanonicalPack k = canonical_pack(2);
  EXPECT_DOUBLE_EQ(k.ev.value(ChartPoint({0.1, 0.2}, {1, 2}, {3, 4})).flat(0), 11.0);
}

TEST(CanonicalPack, NilpotentStructureOnBasis) {
  const CanonicalPack k = canonical_pack(1);
  const TensorValue S = k.S.value(pt(1, 1));
  // column a holds S(d_a)
  EXPECT_EQ(S(1, 0), 1.0);
  EXPECT_EQ(S(0, 0), 0.0);
  EXPECT_EQ(S(2, 0), 0.0);
  for (int k2 = 0; k2 < 3; ++k2) EXPECT_EQ(S(k2, 1), 0.0);
}

TEST(CanonicalPack, RejectsDimensionOutOfRange) {
  EXPECT_THROW(canonical_pack(0), Error);
  EXPECT_THROW(canonical_pack(5), Error);
}

TEST(CanonicalPack, UIsHalfSumOfQAndP) {
  const CanonicalPack k = canonical_pack(2);
  const TensorValue U = k.U.value(pt(2, 0.1));
  EXPECT_EQ(U(2, 4), 1.0);
  EXPECT_EQ(U(4, 2), 0.0);
}

TEST(VerticalLift, Examples) {
  const auto v = vec_values(vertical_lift(base_field(1, {"1"}), base_field(1, {"1"})), pt(1, 0.3));
  EXPECT_EQ(v, (std::vector<double>{0, 1, 1}));
  const auto z = vec_values(vertical_lift(zeros(2), zeros(2)), pt(2, 0.3));
  EXPECT_EQ(z, std::vector<double>(6, 0.0));
  EXPECT_THROW(vertical_lift(base_field(1, {"1"}), {parse_expr("y1", 1)}), Error);
}

TEST(VerticalLift, ActsOnGeneralizedMoments) {
  oracle::ExprGen gen(2, 3);
  PointSampler ps(17);
  for (int t = 0; t < 20; ++t) {
    const ChartPoint p = ps.point(2);
    auto base = [&] {
      std::string a = gen(2), b = gen(2);
      for (auto* s : {&a, &b})
        for (char& ch : *s)
          if (ch == 'y' || ch == 'z') ch = 'x';
      return base_field(2, {a, b});
    };
    const auto X = base(), al = base(), Y = base(), be = base();
    const auto v = vec_values(vertical_lift(X, al), p);
    const Expr l = generalized_moment(Y, be).exprs()->at(0);
    double expect = 0.0;
    for (int i = 0; i < 2; ++i) expect += eval_value(al[i], p) * eval_value(Y[i], p) + eval_value(be[i], p) * eval_value(X[i], p);
    EXPECT_NEAR(fd_directional(l, p, v), expect, 1e-7);
  }
}

TEST(GeneralizedMoment, Examples) {
  const ChartPoint p({0.2}, {-0.4}, {0.9});
  EXPECT_DOUBLE_EQ(generalized_moment(base_field(1, {"1"}), zeros(1)).value(p).flat(0), 0.9);
  EXPECT_DOUBLE_EQ(generalized_moment(zeros(1), base_field(1, {"1"})).value(p).flat(0), -0.4);
}

TEST(CompleteLift, LinearFieldExample) {
  const ChartPoint p({0.5}, {-1.5}, {2.5});
  EXPECT_EQ(vec_values(complete_lift(base_field(1, {"x1"})), p), (std::vector<double>{0.5, -1.5, -2.5}));
  EXPECT_EQ(vec_values(complete_lift(base_field(1, {"1"})), p), (std::vector<double>{1, 0, 0}));
}

TEST(CompleteLift, MatchesCoordinateFormulaByFiniteDifferences) {
  oracle::ExprGen gen(2, 5);
  PointSampler ps(9);
  for (int t = 0; t < 10; ++t) {
    std::string a = gen(2), b = gen(2);
    for (auto* s : {&a, &b})
      for (char& ch : *s)
        if (ch == 'y' || ch == 'z') ch = 'x';
    const auto X = base_field(2, {a, b});
    const ChartPoint p = ps.point(2);
    const auto v = vec_values(complete_lift(X), p);
    for (int i = 0; i < 2; ++i) {
      double yy = 0, zz = 0;
      for (int j = 0; j < 2; ++j) {
        yy += p.y[j] * oracle::fd_richardson(X[i], p, {j}, 1e-2);
        zz -= p.z[j] * oracle::fd_richardson(X[j], p, {i}, 1e-2);
      }
      EXPECT_NEAR(v[i], eval_value(X[i], p), 1e-14);
      EXPECT_NEAR(v[2 + i], yy, 1e-7);
      EXPECT_NEAR(v[4 + i], zz, 1e-7);
    }
  }
}

TEST(CompleteLift, DerivesMomentsOfBrackets) {
  // X^c(l_Y) = l_[X,Y], with the right side from finite differences on the base.
  PointSampler ps(23);
  for (int t = 0; t < 20; ++t) {
    const auto X = detail::random_base_field(2, ps), Y = detail::random_base_field(2, ps);
    const ChartPoint p = ps.point(2);
    const Expr lY = generalized_moment(Y, zeros(2)).exprs()->at(0);
    const auto XY = fd_base_bracket(X, Y, p);
    const double rhs = p.z[0] * XY[0] + p.z[1] * XY[1];
    EXPECT_NEAR(fd_directional(lY, p, vec_values(complete_lift(X), p)), rhs, 1e-7);
  }
}

TEST(ExtendedLift, TangentExample) {
  const ChartPoint p({0.5}, {-1.5}, {2.5});
  const auto v = vec_values(extended_lift(LiftSource::tangent, zeros(1), {parse_expr("y1", 1)}), p);
  EXPECT_EQ(v, (std::vector<double>{0, -1.5, -2.5}));
}

TEST(ExtendedLift, OfTangentCompleteLiftIsCompleteLift) {
  // X = x1^2 d/dx1 + x1*x2 d/dx2; its complete lift to TM has eta = (2 x1 y1, x2 y1 + x1 y2).
  const auto X = base_field(2, {"x1^2", "x1*x2"});
  const std::vector<Expr> eta{parse_expr("2*x1*y1", 2), parse_expr("x2*y1 + x1*y2", 2)};
  PointSampler ps(4);
  for (int t = 0; t < 10; ++t) {
    const ChartPoint p = ps.point(2);
    const auto a = vec_values(extended_lift(LiftSource::tangent, X, eta), p);
    const auto b = vec_values(complete_lift(X), p);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(a[i], b[i], 1e-13);
  }
}

TEST(ExtendedLift, CotangentExample) {
  // Derived from the defining derivatives: the d/dy coefficient is -y^j d zeta_j / d z_i.
  const ChartPoint p({0.5}, {-1.5}, {2.5});
  const auto v = vec_values(extended_lift(LiftSource::cotangent, zeros(1), {parse_expr("z1", 1)}), p);
  EXPECT_EQ(v, (std::vector<double>{0, 1.5, 2.5}));
}

TEST(ExtendedLift, SatisfiesDefiningDerivatives) {
  // U^e(l_Z) = l_[U,Z] for Z = theta_i(x,z) d/dz_i on T*M, and U^e(p2* phi) = p2*(U phi).
  const int m = 2;
  const auto xi = base_field(m, {"x1*x2", "1 + x1"});
  const std::vector<Expr> zeta{parse_expr("z1*z2 + x1", m), parse_expr("z2^2*x2", m)};
  const std::vector<Expr> theta{parse_expr("z1 + x2*z2", m), parse_expr("x1*z1^2", m)};
  const Expr phi = parse_expr("sin(x1*z2) + z1", m);
  PointSampler ps(8);
  for (int t = 0; t < 10; ++t) {
    const ChartPoint p = ps.point(m);
    const auto v = vec_values(extended_lift(LiftSource::cotangent, xi, zeta), p);
    // U and Z as fields on the (x, z) variables of the chart
    std::vector<double> U(3 * m, 0.0), Z(3 * m, 0.0);
    for (int i = 0; i < m; ++i) {
      U[i] = eval_value(xi[i], p);
      U[2 * m + i] = eval_value(zeta[i], p);
      Z[2 * m + i] = eval_value(theta[i], p);
    }
    double lhs_l = 0.0, rhs_l = 0.0;
    std::string lz = "0";
    for (int i = 0; i < m; ++i) lz += " + y" + std::to_string(i + 1) + "*(" + theta[i].str() + ")";
    lhs_l = fd_directional(parse_expr(lz, m), p, v);
    for (int k2 = 0; k2 < m; ++k2)
      rhs_l += p.y[k2] * (fd_directional(theta[k2], p, U) - fd_directional(zeta[k2], p, Z));
    EXPECT_NEAR(lhs_l, rhs_l, 1e-7);
    EXPECT_NEAR(fd_directional(phi, p, v), fd_directional(phi, p, U), 1e-7);
  }
}

TEST(ExtendedLift, DependencyRules) {
  const int m = 1;
  EXPECT_THROW(extended_lift(LiftSource::tangent, {parse_expr("z1", m)}, {parse_expr("y1", m)}), Error);
  EXPECT_NO_THROW(extended_lift(LiftSource::tangent, {parse_expr("z1", m)}, {parse_expr("y1", m)}, true));
  EXPECT_THROW(extended_lift(LiftSource::tangent, {parse_expr("x1", m)}, {parse_expr("z1", m)}), Error);
  EXPECT_THROW(extended_lift(LiftSource::cotangent, {parse_expr("y1", m)}, {parse_expr("z1", m)}), Error);
  EXPECT_NO_THROW(extended_lift(LiftSource::cotangent, {parse_expr("y1", m)}, {parse_expr("y1*z1", m)}, true));
  EXPECT_THROW(extended_lift(LiftSource::cotangent, {parse_expr("x1", m)}, {parse_expr("y1", m)}), Error);
}

TEST(GeneralizedStructures, CourantNijenhuisReducesToNijenhuisOnVectors) {
  const int m = 1;
  const TensorField S = TensorField::from_strings(sig_endo(), m, {"0", "0", "0", "1", "0", "0", "y1", "x1*z1", "0"});
  const GeneralizedEndo E{S, std::nullopt, std::nullopt};
  const ChartPoint p({0.3}, {-0.6}, {0.8});
  const Context c(p, 2);
  const JetTensor N = nijenhuis_tensor(S.eval(c));
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      JetPair A{std::vector<Jet>(3, c.zero()), std::vector<Jet>(3, c.zero())}, B = A;
      A.vec[a] = c.constant(1.0);
      B.vec[b] = c.constant(1.0);
      const JetPair r = courant_nijenhuis(E, A, B, c);
      for (int k2 = 0; k2 < 3; ++k2) {
        EXPECT_NEAR(r.vec[k2].value(), N(k2, a, b).value(), 1e-13);
        EXPECT_NEAR(r.form[k2].value(), 0.0, 1e-13);
      }
    }
}

TEST(CanonicalSuite, AllIdentitiesHold) {
  for (int m = 1; m <= 3; ++m) {
    const Report r = verify_section2(m, 0, 25);
    for (const auto& c : r.checks()) EXPECT_TRUE(c.pass) << "m=" << m << " " << c.name << " " << c.max_residual;
    EXPECT_GT(r.checks().size(), 40u);
  }
}

TEST(CanonicalSuite, PerturbedNilpotentStructureIsFlagged) {
  CanonicalPack k = canonical_pack(1);
  TensorValue S = k.S.value(pt(1, 0));
  S(2, 0) = 1e-3;  // S + eps dx1 (x) d/dz1
  k.S = TensorField::constant(S, 1);
  const Report r = verify_section2(k, 0, 5);
  ASSERT_NE(r.get("flat_varpi o S = 0"), nullptr);
  EXPECT_FALSE(r.get("flat_varpi o S = 0")->pass);
  EXPECT_NEAR(r.get("flat_varpi o S = 0")->max_residual, 1e-3, 1e-15);
  EXPECT_FALSE(r.all_pass());
}

TEST(CanonicalSuite, ReportIsDeterministic) {
  EXPECT_EQ(verify_section2(2, 7, 6).to_json().dump(), verify_section2(2, 7, 6).to_json().dump());
}
