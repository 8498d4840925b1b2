#ifndef VOLTERRA_OPERATORS_HPP
#define VOLTERRA_OPERATORS_HPP

#include "fields.hpp"
#include "kernels.hpp"
#include "timebase.hpp"

#include <memory>
#include <optional>

namespace volterra {

/// Assembled inclusion x(t) in h(t) + int_0^t k(t,s) F(s, x(s)) ds.
///
/// Discretisation: a selection value w_j acts on [t_j, t_{j+1}) and is tested
/// for membership at the subinterval midpoint, w_j in F(m_j, (x(t_j) + x(t_{j+1}))/2).
/// The Volterra operator samples k(t_i, m_j), so V(w)(t_i) = sum_{j<i} h k(t_i, m_j) w_j.
template <typename Scalar>
class ProblemInstance {
 public:
  ProblemInstance(KernelOperator<Scalar> kernel, SetField<Scalar> field, FieldData<Scalar> data,
                  Trajectory<Scalar> h, Scalar p)
      : kernel_(std::move(kernel)), field_(std::move(field)), data_(std::move(data)), h_(std::move(h)), p_(p) {
    const auto& g = h_.grid();
    detail::require_same_grid(g, field_.grid());
    detail::require_same_grid(g, data_.alpha.grid());
    data_.validate();
    if (!(p_ >= Scalar(1)) || !std::isfinite(double(p_))) throw std::invalid_argument("exponent must satisfy 1 <= p < inf");
    const Index d = h_.dimension();
    if (kernel_.dimension() != d || field_.dimension() != d) throw std::invalid_argument("dimension mismatch");
    q_ = conjugate_exponent(p_);
    volterra_ = std::make_shared<const RowMatrix<Scalar>>(assemble(kernel_, g));
    big_m_ = big_M(kernel_, p_, g);
    weights_ = bielecki_weights(data_.alpha, big_m_, p_);
  }

  const Grid<Scalar>& grid() const { return h_.grid(); }
  Index dimension() const { return h_.dimension(); }
  Scalar exponent() const { return p_; }
  Scalar conjugate() const { return q_; }
  const KernelOperator<Scalar>& kernel() const { return kernel_; }
  const SetField<Scalar>& field() const { return field_; }
  const FieldData<Scalar>& data() const { return data_; }
  const Trajectory<Scalar>& inhomogeneity() const { return h_; }
  Scalar big_m() const { return big_m_; }
  /// Bielecki weights per subinterval.
  const Vector<Scalar>& weights() const { return weights_; }
  /// Row block i, column block j holds h k(t_i, m_j) for j < i.
  const RowMatrix<Scalar>& volterra_matrix() const { return *volterra_; }

  const std::optional<KernelLintReport<Scalar>>& kernel_lint() const { return kernel_lint_; }
  const std::optional<FieldLintReport<Scalar>>& field_lint() const { return field_lint_; }

  ProblemInstance with_inhomogeneity(Trajectory<Scalar> h) const {
    detail::require_same_grid(h.grid(), grid());
    if (h.dimension() != dimension()) throw std::invalid_argument("dimension mismatch");
    ProblemInstance out(*this);
    out.h_ = std::move(h);
    return out;
  }
  ProblemInstance with_field(SetField<Scalar> field, FieldData<Scalar> data) const {
    detail::require_same_grid(field.grid(), grid());
    if (field.dimension() != dimension()) throw std::invalid_argument("dimension mismatch");
    ProblemInstance out(*this);
    out.field_ = std::move(field);
    out.data_ = std::move(data);
    out.data_.validate();
    out.weights_ = bielecki_weights(out.data_.alpha, big_m_, p_);
    out.field_lint_.reset();
    return out;
  }
  /// Runs both lints and keeps the reports with the instance.
  ProblemInstance with_lint(const ScalarTable<Scalar>& mu, const Sampler& sampler) const {
    ProblemInstance out(*this);
    out.kernel_lint_ = lint_kernel(kernel_, grid(), mu, p_);
    out.field_lint_ = lint_field(field_, data_, sampler);
    return out;
  }

 private:
  static RowMatrix<Scalar> assemble(const KernelOperator<Scalar>& k, const Grid<Scalar>& g) {
    const Index n = g.intervals(), d = k.dimension();
    const Scalar h = g.step();
    RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero((n + 1) * d, n * d);
    if (k.is_semigroup()) {
      // t_i - m_j = (i - j - 1/2) h depends on the lag only.
      std::vector<Matrix<Scalar>> by_lag;
      by_lag.reserve(std::size_t(n));
      for (Index l = 0; l < n; ++l) by_lag.push_back(h * eval(k, (Scalar(l) + Scalar(0.5)) * h, Scalar(0)));
      for (Index i = 1; i <= n; ++i)
        for (Index j = 0; j < i; ++j) out.block(i * d, j * d, d, d) = by_lag[std::size_t(i - j - 1)];
      return out;
    }
    for (Index i = 1; i <= n; ++i)
      for (Index j = 0; j < i; ++j) out.block(i * d, j * d, d, d) = h * eval(k, g.node(i), g.midpoint(j));
    return out;
  }

  KernelOperator<Scalar> kernel_;
  SetField<Scalar> field_;
  FieldData<Scalar> data_;
  Trajectory<Scalar> h_;
  Scalar p_;
  Scalar q_ = Scalar(0);
  Scalar big_m_ = Scalar(1);
  Vector<Scalar> weights_;
  std::shared_ptr<const RowMatrix<Scalar>> volterra_;
  std::optional<KernelLintReport<Scalar>> kernel_lint_;
  std::optional<FieldLintReport<Scalar>> field_lint_;
};

namespace detail {

template <typename Scalar>
void require_on(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& w) {
  require_same_grid(inst.grid(), w.grid());
  if (w.dimension() != inst.dimension()) throw std::invalid_argument("dimension mismatch");
}
template <typename Scalar>
void require_on(const ProblemInstance<Scalar>& inst, const Trajectory<Scalar>& x) {
  require_same_grid(inst.grid(), x.grid());
  if (x.dimension() != inst.dimension()) throw std::invalid_argument("dimension mismatch");
}

}  // namespace detail

/// V(w)(t_i) = int_0^{t_i} k(t_i, s) w(s) ds with k sampled at subinterval midpoints.
template <typename Scalar>
Trajectory<Scalar> volterra_apply(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& w) {
  detail::require_on(inst, w);
  const Index n = inst.grid().intervals(), d = inst.dimension();
  Eigen::Map<const Vector<Scalar>> flat(w.values().data(), n * d);
  Vector<Scalar> out = inst.volterra_matrix() * flat;
  RowMatrix<Scalar> rows = Eigen::Map<RowMatrix<Scalar>>(out.data(), n + 1, d);
  return Trajectory<Scalar>(inst.grid(), std::move(rows));
}

/// h + V(w).
template <typename Scalar>
Trajectory<Scalar> state_of(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& w) {
  return inst.inhomogeneity() + volterra_apply(inst, w);
}

template <typename Scalar>
struct Residual {
  Vector<Scalar> pointwise;  ///< d(w_j, F(m_j, x(m_j))) per subinterval
  Scalar aggregate;          ///< L^p norm of the pointwise table
};

/// Distance of w from N_F^p(x), subinterval by subinterval.
template <typename Scalar>
Residual<Scalar> nemytskii_residual(const ProblemInstance<Scalar>& inst, const Trajectory<Scalar>& x,
                                    const Selection<Scalar>& w) {
  detail::require_on(inst, x);
  detail::require_on(inst, w);
  const Index n = inst.grid().intervals();
  Vector<Scalar> r(n);
  for (Index j = 0; j < n; ++j) {
    const Vector<Scalar> wj = w.row(j).transpose();
    r(j) = distance(wj, field_eval(inst.field(), Instant::at_midpoint(j), x.midpoint(j)));
  }
  const Scalar agg = lp_norm_pointwise(r, inst.grid().step(), inst.exponent());
  return {std::move(r), agg};
}

/// One step of a selection rule: w'_j = rule(j, F(m_j, (h + V u)(m_j)), u_j).
template <typename Scalar, typename Rule>
Selection<Scalar> selection_step(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& u, Rule&& rule) {
  detail::require_on(inst, u);
  const Index n = inst.grid().intervals();
  const auto x = state_of(inst, u);
  RowMatrix<Scalar> out(n, inst.dimension());
  for (Index j = 0; j < n; ++j) {
    const auto region = field_eval(inst.field(), Instant::at_midpoint(j), x.midpoint(j));
    const Vector<Scalar> uj = u.row(j).transpose();
    out.row(j) = rule(j, region, uj).transpose();
  }
  return Selection<Scalar>(inst.grid(), std::move(out));
}

/// Nearest element of G_p(h, u) = N_F^p(h + V u) to u: u'_j = project(u_j, F(m_j, (h + V u)(m_j))).
template <typename Scalar>
Selection<Scalar> gp_project_step(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& u) {
  return selection_step(inst, u, [](Index, const ConvexRegion<Scalar>& region, const Vector<Scalar>& uj) {
    return project(uj, region);
  });
}

template <typename Scalar>
Scalar bielecki_norm(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& w) {
  detail::require_on(inst, w);
  const Vector<Scalar> norms = w.values().rowwise().norm();
  return weighted_lp(norms, inst.weights(), inst.grid().step(), inst.exponent());
}

template <typename Scalar>
struct SelectionSetDistance {
  Scalar forward;   ///< sup_{w in G(h1,u1)} d(w, G(h2,u2)) in the Bielecki norm
  Scalar backward;  ///< the reverse excess
  Scalar value;     ///< Hausdorff distance, max of the two
  bool exact;       ///< false when some pointwise excess came from a direction net
};

/// Hausdorff distance between the decomposable sets G_p(h1, u1) and G_p(h2, u2).
///
/// For decomposable sets of selections, sup_{w1} inf_{w2} |||w1 - w2||| is
/// attained by patching pointwise nearest points, so the one-sided excess is the
/// weighted L^p norm of t -> e(A1(t), A2(t)) with A_i(t) = F(t, h_i + V u_i).
template <typename Scalar>
SelectionSetDistance<Scalar> selection_excess(const ProblemInstance<Scalar>& inst, const Trajectory<Scalar>& h1,
                                              const Selection<Scalar>& u1, const Trajectory<Scalar>& h2,
                                              const Selection<Scalar>& u2) {
  detail::require_on(inst, h1);
  detail::require_on(inst, h2);
  const Index n = inst.grid().intervals();
  const auto x1 = h1 + volterra_apply(inst, u1);
  const auto x2 = h2 + volterra_apply(inst, u2);
  Vector<Scalar> fwd(n), bwd(n);
  bool exact = true;
  for (Index j = 0; j < n; ++j) {
    const auto at = Instant::at_midpoint(j);
    const auto a1 = field_eval(inst.field(), at, x1.midpoint(j));
    const auto a2 = field_eval(inst.field(), at, x2.midpoint(j));
    const auto e12 = excess(a1, a2), e21 = excess(a2, a1);
    fwd(j) = e12.value;
    bwd(j) = e21.value;
    exact = exact && e12.exact && e21.exact;
  }
  const Scalar h = inst.grid().step(), p = inst.exponent();
  const Scalar f = weighted_lp(fwd, inst.weights(), h, p), b = weighted_lp(bwd, inst.weights(), h, p);
  return {f, b, std::max(f, b), exact};
}

/// d_H(G_p(h, u1), G_p(h, u2)) / |||u1 - u2|||_p for the instance inhomogeneity h.
template <typename Scalar>
Scalar contraction_ratio_probe(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& u1,
                               const Selection<Scalar>& u2) {
  const Scalar den = bielecki_norm(inst, u1 - u2);
  if (!(den > Scalar(0))) throw std::invalid_argument("contraction probe needs distinct selections");
  const auto& h = inst.inhomogeneity();
  return selection_excess(inst, h, u1, h, u2).value / den;
}

/// (1/2 (||h1 - h2||^p + |||u1 - u2|||_p^p))^{1/p}, the two-variable bound on
/// d_H(G_p(h1, u1), G_p(h2, u2)).
template <typename Scalar>
Scalar two_variable_bound(const ProblemInstance<Scalar>& inst, const Trajectory<Scalar>& h1,
                          const Selection<Scalar>& u1, const Trajectory<Scalar>& h2, const Selection<Scalar>& u2) {
  const Scalar p = inst.exponent();
  const Scalar dh = sup_norm(h1 - h2), du = bielecki_norm(inst, u1 - u2);
  return std::pow((std::pow(dh, p) + std::pow(du, p)) / Scalar(2), Scalar(1) / p);
}

}  // namespace volterra

#endif  // VOLTERRA_OPERATORS_HPP
