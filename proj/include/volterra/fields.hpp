#ifndef VOLTERRA_FIELDS_HPP
#define VOLTERRA_FIELDS_HPP

#include "convexsets.hpp"
#include "kernels.hpp"

#include <memory>
#include <optional>
#include <random>

namespace volterra {

/// A time argument of F: either grid node t_i or the midpoint of subinterval j.
/// Time-dependent coefficients are linearly interpolated to midpoints.
struct Instant {
  enum class Kind { node, midpoint };
  Kind kind;
  Index index;
  static Instant at_node(Index i) { return {Kind::node, i}; }
  static Instant at_midpoint(Index j) { return {Kind::midpoint, j}; }
};

template <typename Scalar>
class SetField;

/// f(t, x) = L x + b.
template <typename Scalar>
struct LinearFamily {
  Matrix<Scalar> L;
  Vector<Scalar> b;
};
/// f(t, x) = a sin(x) + b, sine taken componentwise.
template <typename Scalar>
struct SineFamily {
  Scalar amplitude;
  Vector<Scalar> b;
};
/// f(t, x) = support_point(G(t, x), e(t)): the extremal selection of another
/// field along a direction held per subinterval (one row per subinterval, or a
/// single row used throughout).
template <typename Scalar>
struct ExtremalFamily {
  std::shared_ptr<const SetField<Scalar>> base;
  RowMatrix<Scalar> directions;
};

template <typename Scalar>
struct SingletonField {
  std::variant<LinearFamily<Scalar>, SineFamily<Scalar>, ExtremalFamily<Scalar>> family;
};

/// F(t, x) = C(t) x + d(t) + Box(0, r(t)), coefficients tabulated on grid nodes.
template <typename Scalar>
struct AffineBoxField {
  std::vector<Matrix<Scalar>> C;
  RowMatrix<Scalar> d;
  RowMatrix<Scalar> r;
};
/// F(t, x) = C(t) x + d(t) + Ball(0, rho(t)).
template <typename Scalar>
struct AffineBallField {
  std::vector<Matrix<Scalar>> C;
  RowMatrix<Scalar> d;
  Vector<Scalar> rho;
};

/// Set-valued right-hand side F : [0, T] x R^d -> compact convex subsets of R^d.
///
/// Measurability in t and upper hemicontinuity in x hold by construction for
/// every family here (continuous closed forms and piecewise-linear tables), so
/// they are family contracts rather than runtime checks.
template <typename Scalar>
class SetField {
 public:
  using Variant = std::variant<SingletonField<Scalar>, AffineBoxField<Scalar>, AffineBallField<Scalar>>;

  static SetField linear(const Grid<Scalar>& g, Matrix<Scalar> L, Vector<Scalar> b) {
    if (L.rows() != L.cols() || L.rows() != b.size()) throw std::invalid_argument("linear field shape mismatch");
    detail::require_finite(L, "field");
    detail::require_finite(b, "field");
    return SetField(g, SingletonField<Scalar>{LinearFamily<Scalar>{std::move(L), std::move(b)}});
  }
  static SetField sine(const Grid<Scalar>& g, Scalar amplitude, Vector<Scalar> b) {
    detail::require_finite(b, "field");
    if (!std::isfinite(double(amplitude))) throw std::invalid_argument("field contains non-finite entries");
    return SetField(g, SingletonField<Scalar>{SineFamily<Scalar>{amplitude, std::move(b)}});
  }
  static SetField affine_box(const Grid<Scalar>& g, std::vector<Matrix<Scalar>> C, RowMatrix<Scalar> d,
                             RowMatrix<Scalar> r) {
    check_tables(g, C, d);
    if (r.rows() != g.nodes() || r.cols() != d.cols()) throw std::invalid_argument("half-width table shape mismatch");
    detail::require_finite(r, "field");
    if (!(r.array() >= Scalar(0)).all()) throw std::invalid_argument("half-widths must be nonnegative");
    return SetField(g, AffineBoxField<Scalar>{std::move(C), std::move(d), std::move(r)});
  }
  static SetField affine_ball(const Grid<Scalar>& g, std::vector<Matrix<Scalar>> C, RowMatrix<Scalar> d,
                              Vector<Scalar> rho) {
    check_tables(g, C, d);
    if (rho.size() != g.nodes()) throw std::invalid_argument("radius table shape mismatch");
    detail::require_finite(rho, "field");
    if (!(rho.array() >= Scalar(0)).all()) throw std::invalid_argument("radii must be nonnegative");
    return SetField(g, AffineBallField<Scalar>{std::move(C), std::move(d), std::move(rho)});
  }
  /// Time-independent conveniences.
  static SetField affine_box(const Grid<Scalar>& g, const Matrix<Scalar>& C, const Vector<Scalar>& d,
                             const Vector<Scalar>& r) {
    return affine_box(g, std::vector<Matrix<Scalar>>(std::size_t(g.nodes()), C), d.transpose().replicate(g.nodes(), 1),
                      r.transpose().replicate(g.nodes(), 1));
  }
  static SetField affine_ball(const Grid<Scalar>& g, const Matrix<Scalar>& C, const Vector<Scalar>& d, Scalar rho) {
    return affine_ball(g, std::vector<Matrix<Scalar>>(std::size_t(g.nodes()), C), d.transpose().replicate(g.nodes(), 1),
                       Vector<Scalar>::Constant(g.nodes(), rho));
  }
  /// Extremal single-valued field of `base` along the given directions.
  static SetField extremal(const SetField& base, RowMatrix<Scalar> directions) {
    if (directions.cols() != base.dimension()) throw std::invalid_argument("direction dimension mismatch");
    if (directions.rows() != 1 && directions.rows() != base.grid().intervals())
      throw std::invalid_argument("extremal field needs one direction or one per subinterval");
    detail::require_finite(directions, "directions");
    return SetField(base.grid(), SingletonField<Scalar>{
                                     ExtremalFamily<Scalar>{std::make_shared<const SetField>(base), std::move(directions)}});
  }

  const Grid<Scalar>& grid() const { return grid_; }
  Index dimension() const { return dim_; }
  const Variant& variant() const { return v_; }
  bool is_singleton() const { return std::holds_alternative<SingletonField<Scalar>>(v_); }

 private:
  static void check_tables(const Grid<Scalar>& g, const std::vector<Matrix<Scalar>>& C, const RowMatrix<Scalar>& d) {
    if (Index(C.size()) != g.nodes() || d.rows() != g.nodes())
      throw std::invalid_argument("coefficient tables need one entry per node");
    for (const auto& c : C) {
      if (c.rows() != d.cols() || c.cols() != d.cols()) throw std::invalid_argument("C(t) must be d x d");
      detail::require_finite(c, "field");
    }
    detail::require_finite(d, "field");
  }

  SetField(const Grid<Scalar>& g, Variant v) : grid_(g), v_(std::move(v)) {
    dim_ = std::visit([](const auto& f) -> Index {
      using F = std::decay_t<decltype(f)>;
      if constexpr (std::is_same_v<F, SingletonField<Scalar>>) {
        return std::visit([](const auto& fam) -> Index {
          using G = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<G, ExtremalFamily<Scalar>>) return fam.base->dimension();
          else return fam.b.size();
        }, f.family);
      } else {
        return f.d.cols();
      }
    }, v_);
  }

  Grid<Scalar> grid_;
  Variant v_;
  Index dim_ = 0;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> coefficient_at(const std::vector<Matrix<Scalar>>& C, Instant at) {
  const auto j = std::size_t(at.index);
  if (at.kind == Instant::Kind::node) return C[j];
  return (C[j] + C[j + 1]) / Scalar(2);
}

template <typename Scalar>
Vector<Scalar> row_at(const RowMatrix<Scalar>& m, Instant at) {
  if (at.kind == Instant::Kind::node) return m.row(at.index).transpose();
  return ((m.row(at.index) + m.row(at.index + 1)) / Scalar(2)).transpose();
}

template <typename Scalar>
Scalar entry_at(const Vector<Scalar>& v, Instant at) {
  if (at.kind == Instant::Kind::node) return v(at.index);
  return (v(at.index) + v(at.index + 1)) / Scalar(2);
}

template <typename Scalar>
void check_instant(const Grid<Scalar>& g, Instant at) {
  const Index hi = at.kind == Instant::Kind::node ? g.intervals() : g.intervals() - 1;
  if (at.index < 0 || at.index > hi) throw std::out_of_range("field evaluated outside the grid");
}

}  // namespace detail

/// The convex value F(t, x).
template <typename Scalar>
ConvexRegion<Scalar> field_eval(const SetField<Scalar>& F, Instant at, const Vector<Scalar>& x) {
  if (x.size() != F.dimension()) throw std::invalid_argument("field_eval: dimension mismatch");
  detail::require_finite(x, "state");
  detail::check_instant(F.grid(), at);
  return std::visit([&](const auto& f) -> ConvexRegion<Scalar> {
    using V = std::decay_t<decltype(f)>;
    if constexpr (std::is_same_v<V, SingletonField<Scalar>>) {
      return std::visit([&](const auto& fam) -> ConvexRegion<Scalar> {
        using G = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<G, LinearFamily<Scalar>>)
          return ConvexRegion<Scalar>::point(fam.L * x + fam.b);
        else if constexpr (std::is_same_v<G, SineFamily<Scalar>>)
          return ConvexRegion<Scalar>::point((fam.amplitude * x.array().sin()).matrix() + fam.b);
        else {
          const Index row = fam.directions.rows() == 1
                                ? 0
                                : std::min(at.index, F.grid().intervals() - 1);
          const Vector<Scalar> e = fam.directions.row(row).transpose();
          return ConvexRegion<Scalar>::point(support_point(field_eval(*fam.base, at, x), e));
        }
      }, f.family);
    } else if constexpr (std::is_same_v<V, AffineBoxField<Scalar>>) {
      return ConvexRegion<Scalar>::box(detail::coefficient_at(f.C, at) * x + detail::row_at(f.d, at),
                                       detail::row_at(f.r, at));
    } else {
      return ConvexRegion<Scalar>::ball(detail::coefficient_at(f.C, at) * x + detail::row_at(f.d, at),
                                        detail::entry_at(f.rho, at));
    }
  }, F.variant());
}

/// Data functions of the field hypotheses: Lipschitz modulus alpha (d_H(F(t,x),
/// F(t,y)) <= alpha(t)|x - y|), beta (d(0, F(t,0)) <= beta(t)) and growth c
/// (||F(t,x)||^+ <= c(t)(1 + |x|)). `bound`, when present, is an integrable
/// bound ||F(t,x)||^+ <= bound(t) uniform in x.
template <typename Scalar>
struct FieldData {
  ScalarTable<Scalar> alpha;
  ScalarTable<Scalar> beta;
  ScalarTable<Scalar> c;
  std::optional<ScalarTable<Scalar>> bound;

  void validate() const {
    if (!(alpha.grid() == beta.grid()) || !(alpha.grid() == c.grid())) throw std::invalid_argument("field data grid mismatch");
    if (bound && !(bound->grid() == alpha.grid())) throw std::invalid_argument("field data grid mismatch");
    if (!alpha.nonnegative() || !beta.nonnegative() || !c.nonnegative() || (bound && !bound->nonnegative()))
      throw std::invalid_argument("field data must be nonnegative");
  }
};

/// Certified alpha, beta, c (and the uniform bound when F is independent of x).
template <typename Scalar>
FieldData<Scalar> derive_field_data(const SetField<Scalar>& F) {
  const auto& g = F.grid();
  const Index n = g.nodes();
  Vector<Scalar> alpha(n), beta(n), bound(n);
  bool bounded = true;

  std::visit([&](const auto& f) {
    using V = std::decay_t<decltype(f)>;
    if constexpr (std::is_same_v<V, SingletonField<Scalar>>) {
      std::visit([&](const auto& fam) {
        using G = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<G, LinearFamily<Scalar>>) {
          alpha.setConstant(operator_norm<Scalar>(fam.L));
          beta.setConstant(fam.b.norm());
          bounded = fam.L.isZero(0);
          bound.setConstant(fam.b.norm());
        } else if constexpr (std::is_same_v<G, SineFamily<Scalar>>) {
          alpha.setConstant(std::abs(fam.amplitude));
          beta.setConstant(fam.b.norm());
          bound.setConstant(std::abs(fam.amplitude) * std::sqrt(Scalar(fam.b.size())) + fam.b.norm());
        } else {
          // |support point of G(t,0)| <= ||G(t,0)||^+ <= c_G(t); Lipschitz constant carries over.
          const auto base = derive_field_data(*fam.base);
          alpha = base.alpha.values();
          beta = base.c.values();
          bounded = base.bound.has_value();
          if (bounded) bound = base.bound->values();
        }
      }, f.family);
    } else {
      for (Index i = 0; i < n; ++i) {
        const auto& C = f.C[std::size_t(i)];
        alpha(i) = operator_norm<Scalar>(C);
        Scalar size;
        if constexpr (std::is_same_v<V, AffineBoxField<Scalar>>) size = f.r.row(i).norm();
        else size = f.rho(i);
        beta(i) = f.d.row(i).norm() + size;
        bound(i) = beta(i);
        if (!C.isZero(0)) bounded = false;
      }
    }
  }, F.variant());

  FieldData<Scalar> data{ScalarTable<Scalar>(g, alpha), ScalarTable<Scalar>(g, beta),
                         ScalarTable<Scalar>(g, alpha.cwiseMax(beta)), std::nullopt};
  if (bounded) data.bound = ScalarTable<Scalar>(g, bound);
  return data;
}

struct Sampler {
  std::uint64_t seed = 0;
  int samples = 256;
  double radius = 10.0;
};

template <typename Scalar>
struct FieldVerdict {
  std::string hypothesis;
  bool passed = true;
  Scalar worst_margin = infinity<Scalar>();
  Index node = 0;  ///< witness time index
  Vector<Scalar> x;
  Vector<Scalar> y;
};

template <typename Scalar>
struct FieldLintReport {
  std::vector<FieldVerdict<Scalar>> verdicts;  // H3, H4, F4
  bool passed() const {
    for (const auto& v : verdicts)
      if (!v.passed) return false;
    return true;
  }
  const FieldVerdict<Scalar>& verdict(const std::string& h) const {
    for (const auto& v : verdicts)
      if (v.hypothesis == h) return v;
    throw std::out_of_range("no verdict for " + h);
  }
};

/// Checks the claimed data against sampled (t, x, y) with t on grid nodes and
/// x, y uniform in the cube [-radius, radius]^d.
template <typename Scalar>
FieldLintReport<Scalar> lint_field(const SetField<Scalar>& F, const FieldData<Scalar>& data, const Sampler& sampler) {
  data.validate();
  detail::require_same_grid(F.grid(), data.alpha.grid());
  const auto& g = F.grid();
  const Index d = F.dimension();
  std::mt19937_64 rng(sampler.seed);
  std::uniform_int_distribution<Index> pick_node(0, g.intervals());
  std::uniform_real_distribution<double> coord(-sampler.radius, sampler.radius);
  auto draw = [&] {
    Vector<Scalar> v(d);
    for (Index i = 0; i < d; ++i) v(i) = Scalar(coord(rng));
    return v;
  };

  FieldVerdict<Scalar> h3, h4, f4;
  h3.hypothesis = "H3";
  h4.hypothesis = "H4";
  f4.hypothesis = "F4";
  auto record = [](FieldVerdict<Scalar>& v, Scalar margin, Index node, const Vector<Scalar>& x, const Vector<Scalar>& y) {
    if (margin < v.worst_margin) {
      v.worst_margin = margin;
      v.node = node;
      v.x = x;
      v.y = y;
    }
  };
  const Vector<Scalar> origin = Vector<Scalar>::Zero(d);

  for (Index i = 0; i <= g.intervals(); ++i) {
    const auto at = Instant::at_node(i);
    const Scalar dist0 = distance(origin, field_eval(F, at, origin));
    record(h4, data.beta[i] * (Scalar(1) + Scalar(1e-9)) + Scalar(1e-12) - dist0, i, origin, origin);
  }
  for (int k = 0; k < sampler.samples; ++k) {
    const Index i = pick_node(rng);
    const Vector<Scalar> x = draw(), y = (k % 4 == 0) ? Vector<Scalar>(x + Scalar(1e-3) * draw()) : draw();
    const auto at = Instant::at_node(i);
    const auto fx = field_eval(F, at, x), fy = field_eval(F, at, y);
    const Scalar dh = hausdorff(fx, fy).value;
    const Scalar lip = data.alpha[i] * (x - y).norm();
    record(h3, lip * (Scalar(1) + Scalar(1e-9)) + Scalar(1e-12) - dh, i, x, y);
    const Scalar growth = data.c[i] * (Scalar(1) + x.norm());
    record(f4, growth * (Scalar(1) + Scalar(1e-9)) + Scalar(1e-12) - norm_plus(fx), i, x, x);
  }
  FieldLintReport<Scalar> rep;
  for (auto* v : {&h3, &h4, &f4}) {
    v->passed = v->worst_margin >= Scalar(0);
    rep.verdicts.push_back(*v);
  }
  return rep;
}

}  // namespace volterra

#endif  // VOLTERRA_FIELDS_HPP
