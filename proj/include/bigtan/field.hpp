#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bigtan/tensor.hpp"

namespace bigtan {

/// A tensor field on a chart of the big tangent manifold over an m-dimensional base.
/// Either backed by component expressions or derived from other fields; in both cases it
/// evaluates to jets at a point. `depth` counts the derivatives consumed on the way, so a
/// value at a point needs a context of at least that order.
class TensorField {
 public:
  using Gen = std::function<JetTensor(const Context&)>;

  TensorField() = default;
  TensorField(std::vector<Slot> sig, int m, Gen gen, int depth, Frame frame = Frame::natural,
              std::vector<SlotSymmetry> sym = {})
      : sig_(std::move(sig)), m_(m), gen_(std::move(gen)), depth_(depth), frame_(frame), sym_(std::move(sym)) {}

  /// Field with the given flat (row-major over slots) component expressions.
  static TensorField from_exprs(std::vector<Slot> sig, int m, std::vector<Expr> comps,
                                Frame frame = Frame::natural, std::vector<SlotSymmetry> sym = {}) {
    std::size_t sz = 1;
    for (std::size_t k = 0; k < sig.size(); ++k) sz *= static_cast<std::size_t>(3 * m);
    if (comps.size() != sz) throw Error("wrong number of component expressions");
    for (const auto& e : comps)
      if (e.dim() != m) throw Error("component expression dimension mismatch");
    auto shared = std::make_shared<const std::vector<Expr>>(std::move(comps));
    auto sig_copy = sig;
    TensorField f(
        std::move(sig), m,
        [shared, sig_copy, frame](const Context& ctx) {
          JetTensor t(sig_copy, ctx.n(), ctx.zero(), frame);
          for (std::size_t i = 0; i < shared->size(); ++i)
            if (!(*shared)[i].is_zero_literal()) t.flat(i) = eval_jet((*shared)[i], ctx);
          return t;
        },
        0, frame, std::move(sym));
    f.exprs_ = shared;
    return f;
  }

  static TensorField from_strings(std::vector<Slot> sig, int m, const std::vector<std::string>& comps,
                                  Frame frame = Frame::natural, std::vector<SlotSymmetry> sym = {}) {
    std::vector<Expr> e;
    e.reserve(comps.size());
    for (const auto& s : comps) e.push_back(parse_expr(s, m));
    return from_exprs(std::move(sig), m, std::move(e), frame, std::move(sym));
  }

  /// Constant-coefficient field.
  static TensorField constant(const TensorValue& v, int m, std::vector<SlotSymmetry> sym = {}) {
    std::vector<Expr> e;
    for (std::size_t i = 0; i < v.size(); ++i) e.push_back(Expr::constant(v.flat(i), m));
    return from_exprs(v.signature(), m, std::move(e), v.frame(), std::move(sym));
  }

  static TensorField scalar(const Expr& e) { return from_exprs({}, e.dim(), {e}); }

  const std::vector<Slot>& signature() const { return sig_; }
  int rank() const { return static_cast<int>(sig_.size()); }
  int m() const { return m_; }
  int n() const { return 3 * m_; }
  int depth() const { return depth_; }
  Frame frame() const { return frame_; }
  const std::vector<SlotSymmetry>& symmetries() const { return sym_; }
  const std::vector<Expr>* exprs() const { return exprs_.get(); }

  JetTensor eval(const Context& ctx) const {
    if (ctx.m() != m_) throw Error("field dimension does not match chart point");
    return gen_(ctx);
  }

  /// Point value; also checks the declared symmetries to 1e-12.
  TensorValue value(const ChartPoint& p) const {
    TensorValue v = values(eval(Context(p, depth_)));
    if (!sym_.empty() && symmetry_violation(v, sym_) > 1e-12 * std::max(1.0, max_abs(v)))
      throw Error("declared symmetry violated");
    return v;
  }

  TensorField with_symmetries(std::vector<SlotSymmetry> sym) const {
    TensorField f = *this;
    f.sym_ = std::move(sym);
    return f;
  }

 private:
  std::vector<Slot> sig_;
  int m_ = 1;
  Gen gen_;
  int depth_ = 0;
  Frame frame_ = Frame::natural;
  std::vector<SlotSymmetry> sym_;
  std::shared_ptr<const std::vector<Expr>> exprs_;
};

/// A pair (vector field, 1-form) on the chart.
struct GeneralizedSection {
  TensorField vec;
  TensorField form;
};

inline std::vector<Jet> as_vector(const JetTensor& t) {
  if (t.rank() != 1) throw Error("expected a rank-1 tensor");
  std::vector<Jet> v;
  for (std::size_t i = 0; i < t.size(); ++i) v.push_back(t.flat(i));
  return v;
}

inline JetTensor from_vector(const std::vector<Jet>& v, Slot s = Slot::up, Frame f = Frame::natural) {
  JetTensor t({s}, static_cast<int>(v.size()), v[0], f);
  for (std::size_t i = 0; i < v.size(); ++i) t.flat(i) = v[i];
  return t;
}

inline JetMatrix as_matrix(const JetTensor& t) {
  if (t.rank() != 2) throw Error("expected a rank-2 tensor");
  JetMatrix m(t.dim(), t.dim(), t.flat(0));
  for (int i = 0; i < t.dim(); ++i)
    for (int j = 0; j < t.dim(); ++j) m(i, j) = t(i, j);
  return m;
}

inline JetTensor from_matrix(const JetMatrix& m, std::vector<Slot> sig, Frame f = Frame::natural) {
  JetTensor t(std::move(sig), m.rows(), m(0, 0), f);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t(i, j) = m(i, j);
  return t;
}

/// Vector field from component strings (natural frame).
inline TensorField vector_field(int m, const std::vector<std::string>& comps) {
  return TensorField::from_strings(sig_vector(), m, comps);
}
inline TensorField one_form(int m, const std::vector<std::string>& comps) {
  return TensorField::from_strings(sig_form(1), m, comps);
}

}  // namespace bigtan
