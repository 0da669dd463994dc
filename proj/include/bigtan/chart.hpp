#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bigtan/expr.hpp"
#include "bigtan/jet.hpp"

namespace bigtan {

/// A point (x^i, y^i, z_i) of a chart of the big tangent manifold over an m-dimensional base.
struct ChartPoint {
  int m = 1;
  std::vector<double> x, y, z;

  ChartPoint() = default;
  ChartPoint(std::vector<double> x_, std::vector<double> y_, std::vector<double> z_)
      : m(static_cast<int>(x_.size())), x(std::move(x_)), y(std::move(y_)), z(std::move(z_)) {
    if (m < 1 || static_cast<int>(y.size()) != m || static_cast<int>(z.size()) != m)
      throw Error("chart point coordinates must all have length m >= 1");
    for (int i = 0; i < m; ++i)
      if (!std::isfinite(x[i]) || !std::isfinite(y[i]) || !std::isfinite(z[i]))
        throw Error("chart point coordinates must be finite");
  }

  int dim() const { return 3 * m; }
  /// Coordinate by flat index: x1..xm, y1..ym, z1..zm.
  double coord(int v) const { return v < m ? x[v] : (v < 2 * m ? y[v - m] : z[v - 2 * m]); }
  double& coord(int v) { return v < m ? x[v] : (v < 2 * m ? y[v - m] : z[v - 2 * m]); }
};

/// Flat variable index of a chart coordinate.
inline int var_index(Coord c, int i, int m) { return static_cast<int>(c) * m + i; }

/// Evaluation context: a chart point together with the jet space all jets at that point share.
class Context {
 public:
  Context(ChartPoint p, int order) : p_(std::move(p)), s_(jet_space(p_.dim(), order)) {}

  const ChartPoint& point() const { return p_; }
  int m() const { return p_.m; }
  int n() const { return p_.dim(); }
  int order() const { return s_->order(); }
  const JetSpace* space() const { return s_; }

  Jet constant(double v) const { return Jet::constant(s_, v); }
  Jet zero() const { return Jet::constant(s_, 0.0); }
  Jet variable(int v) const { return Jet::variable(s_, v, p_.coord(v)); }

 private:
  ChartPoint p_;
  const JetSpace* s_;
};

namespace detail {

inline Jet eval_node(const Node& n, const Context& ctx, int m) {
  auto guard = [&](auto&& f) -> Jet {
    try {
      return f();
    } catch (const DomainError& e) {
      if (std::string(e.what()).find(" in '") != std::string::npos) throw;
      throw DomainError(std::string(e.what()) + " in '" + Expr::print(n) + "'");
    }
  };
  switch (n.op) {
    case Op::num: return ctx.constant(n.value);
    case Op::var: return ctx.variable(var_index(n.coord, n.index, m));
    case Op::add: return eval_node(*n.a, ctx, m) + eval_node(*n.b, ctx, m);
    case Op::sub: return eval_node(*n.a, ctx, m) - eval_node(*n.b, ctx, m);
    case Op::mul: return eval_node(*n.a, ctx, m) * eval_node(*n.b, ctx, m);
    case Op::neg: return -eval_node(*n.a, ctx, m);
    case Op::pow: {
      Jet a = eval_node(*n.a, ctx, m);
      return powi(a, n.exponent);
    }
    default: break;
  }
  Jet a = eval_node(*n.a, ctx, m);
  switch (n.op) {
    case Op::div: {
      Jet b = eval_node(*n.b, ctx, m);
      return guard([&] { return a / b; });
    }
    case Op::sin: return sin(a);
    case Op::cos: return cos(a);
    case Op::exp: return exp(a);
    case Op::log: return guard([&] { return log(a); });
    case Op::sqrt: return guard([&] { return sqrt(a); });
    default: throw Error("bad expression node");
  }
}

inline double eval_value_node(const Node& n, const ChartPoint& p) {
  auto fail = [&](const char* what) -> double {
    throw DomainError(std::string(what) + " in '" + Expr::print(n) + "'");
  };
  switch (n.op) {
    case Op::num: return n.value;
    case Op::var: return p.coord(var_index(n.coord, n.index, p.m));
    case Op::add: return eval_value_node(*n.a, p) + eval_value_node(*n.b, p);
    case Op::sub: return eval_value_node(*n.a, p) - eval_value_node(*n.b, p);
    case Op::mul: return eval_value_node(*n.a, p) * eval_value_node(*n.b, p);
    case Op::div: {
      const double d = eval_value_node(*n.b, p);
      if (d == 0.0) return fail("division by zero");
      return eval_value_node(*n.a, p) / d;
    }
    case Op::pow: return std::pow(eval_value_node(*n.a, p), n.exponent);
    case Op::neg: return -eval_value_node(*n.a, p);
    case Op::sin: return std::sin(eval_value_node(*n.a, p));
    case Op::cos: return std::cos(eval_value_node(*n.a, p));
    case Op::exp: return std::exp(eval_value_node(*n.a, p));
    case Op::log: {
      const double a = eval_value_node(*n.a, p);
      if (!(a > 0.0)) return fail("log of non-positive value");
      return std::log(a);
    }
    case Op::sqrt: {
      const double a = eval_value_node(*n.a, p);
      if (a < 0.0) return fail("sqrt of negative value");
      return std::sqrt(a);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Jet of e at the context point, exact to the context order.
inline Jet eval_jet(const Expr& e, const Context& ctx) {
  if (e.dim() != ctx.m()) throw Error("expression dimension does not match chart point");
  return detail::eval_node(e.root(), ctx, ctx.m());
}

inline Jet eval_jet(const Expr& e, const ChartPoint& p, int order) {
  if (order > 4) throw Error("eval_jet order exceeds K_max = 4; use a Context for deeper pipelines");
  return eval_jet(e, Context(p, order));
}

/// Plain double evaluation, independent of the jet engine.
inline double eval_value(const Expr& e, const ChartPoint& p) {
  if (e.dim() != p.m) throw Error("expression dimension does not match chart point");
  return detail::eval_value_node(e.root(), p);
}

/// Central-difference estimate of a partial derivative (nested one-variable differences).
/// multi_index lists variable indices, repeated for higher powers, total degree <= 3.
inline double fd_oracle(const Expr& e, const ChartPoint& p, const std::vector<int>& multi_index, double h) {
  if (multi_index.size() > 3) throw Error("fd_oracle supports total degree <= 3");
  if (!(h > 0.0)) throw Error("fd_oracle step must be positive");
  const std::size_t d = multi_index.size();
  double acc = 0.0;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    ChartPoint q = p;
    double sign = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      const bool plus = (mask >> k) & 1u;
      q.coord(multi_index[k]) += plus ? h : -h;
      if (!plus) sign = -sign;
    }
    acc += sign * eval_value(e, q);
  }
  return acc / std::pow(2.0 * h, static_cast<double>(d));
}

/// Box sampler for chart points. Draws are reproducible from the seed on every platform.
class PointSampler {
 public:
  explicit PointSampler(std::uint64_t seed, double lo = -1.0, double hi = 1.0) : rng_(seed), lo_(lo), hi_(hi) {}

  double uniform(double a, double b) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return a + (b - a) * u;
  }
  double uniform() { return uniform(lo_, hi_); }

  /// Uniform point in the box; z shifted by z_offset (2 for ops needing invertible z-matrices).
  ChartPoint point(int m, double z_offset = 0.0) {
    std::vector<double> x(m), y(m), z(m);
    for (auto& v : x) v = uniform();
    for (auto& v : y) v = uniform();
    for (auto& v : z) v = uniform() + z_offset;
    return ChartPoint(std::move(x), std::move(y), std::move(z));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  double lo_, hi_;
};

}  // namespace bigtan
