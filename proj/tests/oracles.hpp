// Independent reference computations used only by the test suites.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bigtan/field.hpp"

namespace oracle {

using namespace bigtan;

/// Random well-defined expression text over the chart of base dimension m.
/// log and sqrt only see arguments bounded away from zero.
class ExprGen {
 public:
  ExprGen(int m, std::uint64_t seed) : m_(m), rng_(seed) {}

  std::string operator()(int depth = 3) { return gen(depth); }

  std::string var() {
    const char* c = "xyz";
    return std::string(1, c[pick(3)]) + std::to_string(1 + pick(m_));
  }

 private:
  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  std::string num() {
    const int a = 1 + pick(9);
    return pick(2) ? std::to_string(a) : "0." + std::to_string(a);
  }
  std::string gen(int depth) {
    if (depth == 0) return pick(3) ? var() : num();
    switch (pick(9)) {
      case 0: return "(" + gen(depth - 1) + " + " + gen(depth - 1) + ")";
      case 1: return "(" + gen(depth - 1) + " - " + gen(depth - 1) + ")";
      case 2: return gen(depth - 1) + " * " + gen(depth - 1);
      case 3: return "(" + gen(depth - 1) + ") / (2 + (" + gen(depth - 1) + ")^2)";
      case 4: return "sin(" + gen(depth - 1) + ")";
      case 5: return "cos(" + gen(depth - 1) + ")";
      case 6: return "exp(0.5*" + gen(depth - 1) + ")";
      case 7: return "log(1 + (" + gen(depth - 1) + ")^2)";
      default: return "sqrt(3 + sin(" + gen(depth - 1) + "))^" + std::to_string(1 + pick(3));
    }
  }

  int m_;
  std::mt19937_64 rng_;
};

/// All multisets of variable indices in [0, n) of size <= maxdeg, the empty one included.
inline std::vector<std::vector<int>> multi_indices(int n, int maxdeg) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::function<void(int, int)> rec = [&](int start, int left) {
    out.push_back(cur);
    if (left == 0) return;
    for (int v = start; v < n; ++v) {
      cur.push_back(v);
      rec(v, left - 1);
      cur.pop_back();
    }
  };
  rec(0, maxdeg);
  return out;
}

/// Richardson-extrapolated central difference: (4 D(h/2) - D(h)) / 3.
inline double fd_richardson(const Expr& e, const ChartPoint& p, const std::vector<int>& mi, double h) {
  return (4.0 * fd_oracle(e, p, mi, h / 2) - fd_oracle(e, p, mi, h)) / 3.0;
}

/// Ridders' extrapolation of central differences: a Neville table in h^2 over shrinking steps,
/// returning the entry with the smallest estimated error.
inline double fd_ridders(const Expr& e, const ChartPoint& p, const std::vector<int>& mi, double h0 = 0.02,
                         double* err_out = nullptr) {
  constexpr int ntab = 10;
  constexpr double con = 1.4, con2 = con * con, safe = 2.0;
  double a[ntab][ntab];
  double h = h0, err = 1e300, best = 0.0;
  a[0][0] = fd_oracle(e, p, mi, h);
  best = a[0][0];
  for (int i = 1; i < ntab; ++i) {
    h /= con;
    a[0][i] = fd_oracle(e, p, mi, h);
    double fac = con2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= con2;
      const double errt = std::max(std::fabs(a[j][i] - a[j - 1][i]), std::fabs(a[j][i] - a[j - 1][i - 1]));
      if (errt <= err) {
        err = errt;
        best = a[j][i];
      }
    }
    if (std::fabs(a[i][i] - a[i - 1][i - 1]) >= safe * err) break;
  }
  if (err_out) *err_out = err;
  return best;
}

/// Multi-index (exponent vector) of a list of variable indices.
inline std::vector<int> exponents(const std::vector<int>& vars, int n) {
  std::vector<int> e(n, 0);
  for (int v : vars) ++e[v];
  return e;
}

/// Partial derivative table product by the general Leibniz rule
/// d^g(ab) = sum_{a <= g} binom(g, a) d^a a d^(g-a) b.
inline double leibniz_partial(const Jet& a, const Jet& b, const std::vector<int>& g) {
  const int n = static_cast<int>(g.size());
  double total = 0.0;
  std::vector<int> al(n, 0);
  std::function<void(int, double)> rec = [&](int v, double coef) {
    if (v == n) {
      std::vector<int> rest(n);
      for (int i = 0; i < n; ++i) rest[i] = g[i] - al[i];
      total += coef * a.partial(al) * b.partial(rest);
      return;
    }
    for (int k = 0; k <= g[v]; ++k) {
      al[v] = k;
      double c = 1;
      for (int q = 0; q < k; ++q) c = c * (g[v] - q) / (q + 1);
      rec(v + 1, coef * c);
    }
    al[v] = 0;
  };
  rec(0, 1.0);
  return total;
}

/// d/dx_s of every component of a field's point value, by Richardson-extrapolated central differences.
inline std::vector<double> fd_field_partial(const TensorField& f, const ChartPoint& p, int s, double h = 1e-3) {
  auto central = [&](double hh) {
    ChartPoint a = p, b = p;
    a.coord(s) += hh;
    b.coord(s) -= hh;
    const TensorValue va = f.value(a), vb = f.value(b);
    std::vector<double> r(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) r[i] = (va.flat(i) - vb.flat(i)) / (2 * hh);
    return r;
  };
  const auto d1 = central(h), d2 = central(h / 2);
  std::vector<double> r(d1.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = (4 * d2[i] - d1[i]) / 3;
  return r;
}

/// Lie bracket of two vector fields at p from finite differences of their components.
inline std::vector<double> fd_bracket(const TensorField& X, const TensorField& Y, const ChartPoint& p, double h = 1e-3) {
  const int n = p.dim();
  const TensorValue x = X.value(p), y = Y.value(p);
  std::vector<double> r(n, 0.0);
  for (int s = 0; s < n; ++s) {
    const auto dY = fd_field_partial(Y, p, s, h), dX = fd_field_partial(X, p, s, h);
    for (int k = 0; k < n; ++k) r[k] += x(s) * dY[k] - y(s) * dX[k];
  }
  return r;
}

inline bool close(double a, double b, double rel, double abs) {
  return std::fabs(a - b) <= abs + rel * std::max(std::fabs(a), std::fabs(b));
}

}  // namespace oracle
