#ifndef VOLTERRA_KERNELS_HPP
#define VOLTERRA_KERNELS_HPP

#include "timebase.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace volterra {

/// exp(A) by scaling and squaring with the diagonal [13/13] Pade approximant.
///
/// The order is fixed at 13 and the scaling exponent is the smallest s >= 0 with
/// ||A / 2^s||_1 <= 5.371920351148152, so the sequence of floating-point
/// operations depends only on A.
template <typename Scalar>
Matrix<Scalar> matrix_exponential(const Matrix<Scalar>& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("matrix_exponential needs a square matrix");
  const Index n = a.rows();
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const Scalar norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 == Scalar(0)) return Matrix<Scalar>::Identity(n, n);
  int s = 0;
  if (norm1 > Scalar(theta13)) s = std::max(0, int(std::ceil(std::log2(double(norm1) / theta13))));
  const Matrix<Scalar> as = std::ldexp(Scalar(1), -s) * a;
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> a2 = as * as;
  const Matrix<Scalar> a4 = a2 * a2;
  const Matrix<Scalar> a6 = a4 * a2;

  auto c = [](int k) { return Scalar(b[k]); };
  const Matrix<Scalar> u_inner = a6 * (c(13) * a6 + c(11) * a4 + c(9) * a2) + c(7) * a6 + c(5) * a4 + c(3) * a2 + c(1) * id;
  const Matrix<Scalar> u = as * u_inner;
  const Matrix<Scalar> v = a6 * (c(12) * a6 + c(10) * a4 + c(8) * a2) + c(6) * a6 + c(4) * a4 + c(2) * a2 + c(0) * id;

  Matrix<Scalar> r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = (r * r).eval();
  return r;
}

/// Spectral norm (largest singular value).
template <typename Scalar>
Scalar operator_norm(const Matrix<Scalar>& m) {
  if (m.size() == 0) return Scalar(0);
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m);
  return svd.singularValues()(0);
}

/// g(x) = (c0 + c1 x) exp(rate x).
template <typename Scalar>
struct AffineExpFactor {
  Scalar c0 = Scalar(1);
  Scalar c1 = Scalar(0);
  Scalar rate = Scalar(0);
  Scalar operator()(Scalar x) const { return (c0 + c1 * x) * std::exp(rate * x); }
};

/// One term K g(t) g'(s) of a separable kernel.
template <typename Scalar>
struct SeparableTerm {
  Matrix<Scalar> coefficient;
  AffineExpFactor<Scalar> t_factor;
  AffineExpFactor<Scalar> s_factor;
};

template <typename Scalar>
struct ConstantKernel {
  Matrix<Scalar> matrix;
};
/// k(t, s) = sum_l K_l g_l(t) g'_l(s).
template <typename Scalar>
struct SeparableKernel {
  std::vector<SeparableTerm<Scalar>> terms;
};
/// k(t, s) = exp(-A (t - s)).
template <typename Scalar>
struct SemigroupKernel {
  Matrix<Scalar> generator;
};

/// Kernel k(t, s) in L(R^d), defined on 0 <= s <= t.
template <typename Scalar>
class KernelOperator {
 public:
  using Variant = std::variant<ConstantKernel<Scalar>, SeparableKernel<Scalar>, SemigroupKernel<Scalar>>;

  static KernelOperator constant(Matrix<Scalar> m) { return KernelOperator(ConstantKernel<Scalar>{std::move(m)}); }
  static KernelOperator separable(std::vector<SeparableTerm<Scalar>> terms) {
    if (terms.empty()) throw std::invalid_argument("separable kernel needs at least one term");
    return KernelOperator(SeparableKernel<Scalar>{std::move(terms)});
  }
  static KernelOperator semigroup(Matrix<Scalar> generator) {
    return KernelOperator(SemigroupKernel<Scalar>{std::move(generator)});
  }

  const Variant& variant() const { return v_; }
  Index dimension() const { return dim_; }
  bool is_semigroup() const { return std::holds_alternative<SemigroupKernel<Scalar>>(v_); }
  const Matrix<Scalar>* generator() const {
    auto s = std::get_if<SemigroupKernel<Scalar>>(&v_);
    return s ? &s->generator : nullptr;
  }

 private:
  explicit KernelOperator(Variant v) : v_(std::move(v)) {
    dim_ = std::visit([](const auto& k) -> Index {
      using K = std::decay_t<decltype(k)>;
      const Matrix<Scalar>* m = nullptr;
      if constexpr (std::is_same_v<K, ConstantKernel<Scalar>>) m = &k.matrix;
      else if constexpr (std::is_same_v<K, SemigroupKernel<Scalar>>) m = &k.generator;
      else {
        const Index d = k.terms.front().coefficient.rows();
        for (const auto& t : k.terms) {
          if (t.coefficient.rows() != d || t.coefficient.cols() != d)
            throw std::invalid_argument("separable kernel terms must share a square shape");
          detail::require_finite(t.coefficient, "kernel coefficient");
        }
        return d;
      }
      if (m->rows() != m->cols() || m->rows() < 1) throw std::invalid_argument("kernel matrix must be square");
      detail::require_finite(*m, "kernel matrix");
      return m->rows();
    }, v_);
  }

  Variant v_;
  Index dim_ = 0;
};

/// k(t, s) for 0 <= s <= t.
template <typename Scalar>
Matrix<Scalar> eval(const KernelOperator<Scalar>& k, Scalar t, Scalar s) {
  const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), std::abs(t));
  if (!(s >= -slack) || !(s <= t + slack)) throw std::domain_error("kernel evaluated outside 0 <= s <= t");
  return std::visit([&](const auto& v) -> Matrix<Scalar> {
    using K = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<K, ConstantKernel<Scalar>>) return v.matrix;
    else if constexpr (std::is_same_v<K, SemigroupKernel<Scalar>>)
      return matrix_exponential<Scalar>(-(t - s) * v.generator);
    else {
      Matrix<Scalar> out = Matrix<Scalar>::Zero(k.dimension(), k.dimension());
      for (const auto& term : v.terms) out += term.coefficient * (term.t_factor(t) * term.s_factor(s));
      return out;
    }
  }, k.variant());
}

/// Operator norms ||k(t_i, s_j)|| for j <= i (row i, columns 0..i).
template <typename Scalar>
Matrix<Scalar> kernel_norm_table(const KernelOperator<Scalar>& k, const Grid<Scalar>& grid) {
  const Index n = grid.nodes();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(n, n);
  if (k.is_semigroup()) {
    // k depends on the lag i - j only.
    std::vector<Scalar> by_lag(static_cast<std::size_t>(n));
    for (Index l = 0; l < n; ++l) by_lag[std::size_t(l)] = operator_norm<Scalar>(eval(k, grid.node(l), Scalar(0)));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j <= i; ++j) out(i, j) = by_lag[std::size_t(i - j)];
    return out;
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) out(i, j) = operator_norm<Scalar>(eval(k, grid.node(i), grid.node(j)));
  return out;
}

namespace detail {

template <typename Scalar>
Scalar slice_qnorm(const Matrix<Scalar>& norms, const Grid<Scalar>& grid, Index i, Scalar q) {
  if (i < 0 || i > grid.intervals()) throw std::out_of_range("kernel_qnorm: t must be a grid node");
  if (std::isinf(double(q))) return norms.row(i).head(i + 1).maxCoeff();
  if (i == 0) return Scalar(0);
  const auto v = norms.row(i).head(i + 1).array().pow(q);
  const Scalar integral = grid.step() * (v.segment(1, i - 1).sum() + (v(0) + v(i)) / Scalar(2));
  return std::pow(integral, Scalar(1) / q);
}

}  // namespace detail

/// ||k(t_i, .)||_{L^q(0, t_i)} by the trapezoid rule (q = inf: max over nodes).
template <typename Scalar>
Scalar kernel_qnorm(const KernelOperator<Scalar>& k, Index node, Scalar q, const Grid<Scalar>& grid) {
  if (!(q > Scalar(1))) throw std::invalid_argument("kernel_qnorm needs q > 1");
  if (node < 0 || node > grid.intervals()) throw std::out_of_range("kernel_qnorm: t must be a grid node");
  Vector<Scalar> row(node + 1);
  for (Index j = 0; j <= node; ++j) row(j) = operator_norm<Scalar>(eval(k, grid.node(node), grid.node(j)));
  Matrix<Scalar> norms = Matrix<Scalar>::Zero(node + 1, node + 1);
  norms.row(node) = row.transpose();
  return detail::slice_qnorm<Scalar>(norms, grid, node, q);
}

/// sup_i ||k(t_i, .)||_q over the grid nodes.
template <typename Scalar>
Scalar kernel_slice_sup(const KernelOperator<Scalar>& k, Scalar q, const Grid<Scalar>& grid) {
  const auto norms = kernel_norm_table(k, grid);
  Scalar best(0);
  for (Index i = 0; i <= grid.intervals(); ++i) best = std::max(best, detail::slice_qnorm<Scalar>(norms, grid, i, q));
  return best;
}

/// M = max{1, sup_t ||k(t, .)||_q^p}, q the conjugate of p.
template <typename Scalar>
Scalar big_M(const KernelOperator<Scalar>& k, Scalar p, const Grid<Scalar>& grid) {
  const Scalar q = conjugate_exponent(p);
  return std::max(Scalar(1), std::pow(kernel_slice_sup(k, q, grid), p));
}

enum class LintStatus { pass, sample_consistent, fail };

inline const char* to_string(LintStatus s) {
  switch (s) {
    case LintStatus::pass: return "pass";
    case LintStatus::sample_consistent: return "sample-consistent";
    case LintStatus::fail: return "fail";
  }
  return "?";
}

template <typename Scalar>
struct KernelVerdict {
  std::string hypothesis;
  LintStatus status = LintStatus::pass;
  Scalar worst_margin = Scalar(0);  ///< most negative (or smallest) bound slack seen
  Scalar t = Scalar(0);             ///< witness coordinates
  Scalar s = Scalar(0);
  std::string note;
};

template <typename Scalar>
struct KernelLintReport {
  std::vector<KernelVerdict<Scalar>> verdicts;  // K2, K3, K4, K6 in that order
  Scalar sup_qnorm = Scalar(0);
  Scalar q = Scalar(0);
  bool passed() const {
    for (const auto& v : verdicts)
      if (v.status == LintStatus::fail) return false;
    return true;
  }
  const KernelVerdict<Scalar>& verdict(const std::string& h) const {
    for (const auto& v : verdicts)
      if (v.hypothesis == h) return v;
    throw std::out_of_range("no verdict for " + h);
  }
};

namespace detail {

/// Largest jump of s -> k(t_i, s) between adjacent nodes, over all i.
template <typename Scalar>
std::pair<Scalar, std::pair<Scalar, Scalar>> s_modulus(const KernelOperator<Scalar>& k, const Grid<Scalar>& g) {
  Scalar worst(0);
  std::pair<Scalar, Scalar> at{0, 0};
  for (Index i = 1; i <= g.intervals(); ++i) {
    Matrix<Scalar> prev = eval(k, g.node(i), g.node(0));
    for (Index j = 1; j <= i; ++j) {
      Matrix<Scalar> cur = eval(k, g.node(i), g.node(j));
      const Scalar jump = operator_norm<Scalar>(cur - prev);
      if (jump > worst) {
        worst = jump;
        at = {g.node(i), g.node(j)};
      }
      prev = std::move(cur);
    }
  }
  return {worst, at};
}

/// Largest L^q distance between k(t_{i+1}, .) and k(t_i, .) on [0, t_i], plus
/// (finite q only) the L^q mass of k(t_{i+1}, .) on [t_i, t_{i+1}].
template <typename Scalar>
std::pair<Scalar, Scalar> t_modulus(const KernelOperator<Scalar>& k, const Grid<Scalar>& g, Scalar q) {
  Scalar worst(0), at(0);
  const Scalar h = g.step();
  for (Index i = 0; i < g.intervals(); ++i) {
    const Scalar t0 = g.node(i), t1 = g.node(i + 1);
    Vector<Scalar> diff(i + 1);
    for (Index j = 0; j <= i; ++j) diff(j) = operator_norm<Scalar>(eval(k, t1, g.node(j)) - eval(k, t0, g.node(j)));
    Scalar value;
    if (std::isinf(double(q))) {
      value = diff.maxCoeff();
    } else {
      const auto v = diff.array().pow(q);
      Scalar integral = i == 0 ? Scalar(0) : h * (v.sum() - (v(0) + v(i)) / Scalar(2));
      const Scalar a = operator_norm<Scalar>(eval(k, t1, t0)), b = operator_norm<Scalar>(eval(k, t1, t1));
      integral += h * (std::pow(a, q) + std::pow(b, q)) / Scalar(2);
      value = std::pow(integral, Scalar(1) / q);
    }
    if (value > worst) {
      worst = value;
      at = t1;
    }
  }
  return {worst, at};
}

}  // namespace detail

/// Certified mu(s) >= sup_{s <= t <= T} ||dk/dt(t, s)|| at every node, from
/// closed forms: 0 for constant kernels, ||A|| e^{||A||(T - s)} for semigroups,
/// and term-wise bounds on |g'(t)| for separable kernels.
template <typename Scalar>
ScalarTable<Scalar> derivative_bound(const KernelOperator<Scalar>& k, const Grid<Scalar>& grid) {
  const Scalar T = grid.horizon();
  return ScalarTable<Scalar>::sample(grid, [&](Scalar s) -> Scalar {
    return std::visit([&](const auto& v) -> Scalar {
      using K = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<K, ConstantKernel<Scalar>>) return Scalar(0);
      else if constexpr (std::is_same_v<K, SemigroupKernel<Scalar>>) {
        const Scalar a = operator_norm<Scalar>(v.generator);
        return a * std::exp(a * (T - s));
      } else {
        Scalar sum(0);
        for (const auto& term : v.terms) {
          const auto& f = term.t_factor;
          // g'(t) = (c1 + rate (c0 + c1 t)) e^{rate t}
          const Scalar lin = std::abs(f.c1 + f.rate * f.c0) + std::abs(f.rate * f.c1) * std::max(std::abs(s), std::abs(T));
          const Scalar ex = std::max(std::exp(f.rate * s), std::exp(f.rate * T));
          sum += operator_norm<Scalar>(term.coefficient) * lin * ex * std::abs(term.s_factor(s));
        }
        return sum;
      }
    }, k.variant());
  });
}

/// Numeric probes of the kernel hypotheses on a grid.
///
/// K4 compares central differences of k in t (one-sided at the edges of the
/// triangle, step = grid spacing) against mu(s). K3 requires k(t, t) to be
/// numerically invertible. K2 and K6 report discrete moduli of continuity on the
/// grid and its refinement; they can only be sample-consistent, never verified.
template <typename Scalar>
KernelLintReport<Scalar> lint_kernel(const KernelOperator<Scalar>& k, const Grid<Scalar>& grid,
                                     const ScalarTable<Scalar>& mu, Scalar p = Scalar(1)) {
  detail::require_same_grid(grid, mu.grid());
  KernelLintReport<Scalar> rep;
  rep.q = conjugate_exponent(p);
  rep.sup_qnorm = kernel_slice_sup(k, rep.q, grid);
  const Scalar h = grid.step();
  const Index n = grid.intervals();

  {  // K2
    const auto coarse = detail::s_modulus(k, grid);
    const auto fine = detail::s_modulus(k, grid.refined());
    KernelVerdict<Scalar> v{"K2", LintStatus::sample_consistent, coarse.first - fine.first,
                            coarse.second.first, coarse.second.second, ""};
    const Scalar floor = Scalar(1e-12) * std::max(Scalar(1), rep.sup_qnorm);
    if (coarse.first > floor && !(fine.first < coarse.first)) {
      v.status = LintStatus::fail;
      v.t = fine.second.first;
      v.s = fine.second.second;
      v.note = "modulus of s -> k(t,s) does not shrink under refinement";
    } else {
      v.note = "modulus " + std::to_string(double(coarse.first)) + " -> " + std::to_string(double(fine.first));
    }
    rep.verdicts.push_back(v);
  }
  {  // K3
    KernelVerdict<Scalar> v{"K3", LintStatus::pass, infinity<Scalar>(), 0, 0, ""};
    for (Index i = 0; i <= n; ++i) {
      const Scalar t = grid.node(i);
      const Matrix<Scalar> diag = eval(k, t, t);
      Eigen::JacobiSVD<Matrix<Scalar>> svd(diag);
      const auto& sv = svd.singularValues();
      const Scalar smax = sv(0), smin = sv(sv.size() - 1);
      const Scalar margin = smin - Scalar(1e-12) * std::max(Scalar(1), smax);
      if (margin < v.worst_margin) {
        v.worst_margin = margin;
        v.t = t;
        v.s = t;
      }
    }
    if (v.worst_margin <= Scalar(0)) {
      v.status = LintStatus::fail;
      v.note = "k(t,t) is singular";
    }
    rep.verdicts.push_back(v);
  }
  {  // K4
    KernelVerdict<Scalar> v{"K4", LintStatus::pass, infinity<Scalar>(), 0, 0, ""};
    for (Index i = 0; i <= n; ++i) {
      for (Index j = 0; j <= i; ++j) {
        if (i == n && j == n) continue;  // no t-neighbour inside the triangle
        const Scalar t = grid.node(i), s = grid.node(j);
        Matrix<Scalar> d;
        if (i > j && i < n) d = (eval(k, grid.node(i + 1), s) - eval(k, grid.node(i - 1), s)) / (Scalar(2) * h);
        else if (i < n) d = (eval(k, grid.node(i + 1), s) - eval(k, t, s)) / h;
        else d = (eval(k, t, s) - eval(k, grid.node(i - 1), s)) / h;
        const Scalar bound = mu[j] * (Scalar(1) + Scalar(1e-6)) + Scalar(1e-12);
        const Scalar margin = bound - operator_norm<Scalar>(d);
        if (margin < v.worst_margin) {
          v.worst_margin = margin;
          v.t = t;
          v.s = s;
        }
      }
    }
    if (v.worst_margin < Scalar(0)) {
      v.status = LintStatus::fail;
      v.note = "finite-difference dk/dt exceeds mu(s)";
    }
    rep.verdicts.push_back(v);
  }
  {  // K6
    const auto coarse = detail::t_modulus(k, grid, rep.q);
    const auto fine = detail::t_modulus(k, grid.refined(), rep.q);
    KernelVerdict<Scalar> v{"K6", LintStatus::sample_consistent, coarse.first - fine.first, coarse.second, 0, ""};
    if (coarse.first > Scalar(1e-12) && !(fine.first < coarse.first)) {
      v.status = LintStatus::fail;
      v.t = fine.second;
      v.note = "L^q modulus of t -> k(t,.) does not shrink under refinement";
    } else {
      v.note = "modulus " + std::to_string(double(coarse.first)) + " -> " + std::to_string(double(fine.first));
    }
    rep.verdicts.push_back(v);
  }
  return rep;
}

}  // namespace volterra

#endif  // VOLTERRA_KERNELS_HPP
