#ifndef VOLTERRA_TIMEBASE_HPP
#define VOLTERRA_TIMEBASE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace volterra {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
/// Row-major storage: one state vector per row, rows contiguous.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
constexpr Scalar infinity() {
  return std::numeric_limits<Scalar>::infinity();
}

/// Hoelder conjugate of p; returns +inf for p = 1.
template <typename Scalar>
Scalar conjugate_exponent(Scalar p) {
  if (!(p >= Scalar(1))) throw std::invalid_argument("exponent must satisfy p >= 1");
  if (p == Scalar(1)) return infinity<Scalar>();
  return p / (p - Scalar(1));
}

/// Uniform partition of [0, T] into N subintervals, t_i = i T / N.
template <typename Scalar>
class Grid {
 public:
  Grid(Scalar horizon, Index intervals) : horizon_(horizon), intervals_(intervals) {
    if (!(horizon > Scalar(0)) || !std::isfinite(double(horizon)))
      throw std::invalid_argument("grid horizon must be positive and finite");
    if (intervals < 2) throw std::invalid_argument("grid needs at least 2 subintervals");
  }

  Scalar horizon() const { return horizon_; }
  Index intervals() const { return intervals_; }
  Index nodes() const { return intervals_ + 1; }
  Scalar step() const { return horizon_ / Scalar(intervals_); }

  Scalar node(Index i) const {
    if (i < 0 || i > intervals_) throw std::out_of_range("node index out of range");
    if (i == intervals_) return horizon_;
    return Scalar(i) * horizon_ / Scalar(intervals_);
  }
  Scalar midpoint(Index j) const {
    if (j < 0 || j >= intervals_) throw std::out_of_range("subinterval index out of range");
    return (node(j) + node(j + 1)) / Scalar(2);
  }

  Vector<Scalar> node_values() const {
    Vector<Scalar> t(nodes());
    for (Index i = 0; i < nodes(); ++i) t(i) = node(i);
    return t;
  }

  Grid refined() const { return Grid(horizon_, 2 * intervals_); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.horizon_ == b.horizon_ && a.intervals_ == b.intervals_;
  }

 private:
  Scalar horizon_;
  Index intervals_;
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite entries");
}

template <typename Scalar>
void require_same_grid(const Grid<Scalar>& a, const Grid<Scalar>& b) {
  if (!(a == b)) throw std::invalid_argument("grid mismatch");
}

}  // namespace detail

/// Grid-sampled integrable function, constant on each [t_j, t_{j+1}).
template <typename Scalar>
class Selection {
 public:
  Selection(Grid<Scalar> grid, RowMatrix<Scalar> values) : grid_(grid), values_(std::move(values)) {
    if (values_.rows() != grid_.intervals())
      throw std::invalid_argument("selection needs one row per subinterval");
    if (values_.cols() < 1) throw std::invalid_argument("selection dimension must be positive");
    detail::require_finite(values_, "selection");
  }

  static Selection constant(const Grid<Scalar>& grid, const Vector<Scalar>& value) {
    RowMatrix<Scalar> v = value.transpose().replicate(grid.intervals(), 1);
    return Selection(grid, std::move(v));
  }
  static Selection zero(const Grid<Scalar>& grid, Index dim) {
    return Selection(grid, RowMatrix<Scalar>::Zero(grid.intervals(), dim));
  }

  const Grid<Scalar>& grid() const { return grid_; }
  Index dimension() const { return values_.cols(); }
  const RowMatrix<Scalar>& values() const { return values_; }
  auto row(Index j) const { return values_.row(j); }

  Selection operator-(const Selection& o) const {
    check(o);
    return Selection(grid_, values_ - o.values_);
  }
  Selection operator+(const Selection& o) const {
    check(o);
    return Selection(grid_, values_ + o.values_);
  }
  friend Selection operator*(Scalar a, const Selection& w) { return Selection(w.grid_, a * w.values_); }

 private:
  void check(const Selection& o) const {
    detail::require_same_grid(grid_, o.grid_);
    if (o.dimension() != dimension()) throw std::invalid_argument("dimension mismatch");
  }

  Grid<Scalar> grid_;
  RowMatrix<Scalar> values_;
};

/// Grid-sampled continuous function, linear between nodes.
template <typename Scalar>
class Trajectory {
 public:
  Trajectory(Grid<Scalar> grid, RowMatrix<Scalar> values) : grid_(grid), values_(std::move(values)) {
    if (values_.rows() != grid_.nodes()) throw std::invalid_argument("trajectory needs one row per node");
    if (values_.cols() < 1) throw std::invalid_argument("trajectory dimension must be positive");
    detail::require_finite(values_, "trajectory");
  }

  static Trajectory constant(const Grid<Scalar>& grid, const Vector<Scalar>& value) {
    RowMatrix<Scalar> v = value.transpose().replicate(grid.nodes(), 1);
    return Trajectory(grid, std::move(v));
  }
  static Trajectory zero(const Grid<Scalar>& grid, Index dim) {
    return Trajectory(grid, RowMatrix<Scalar>::Zero(grid.nodes(), dim));
  }
  template <typename Fn>
  static Trajectory sample(const Grid<Scalar>& grid, Index dim, Fn&& fn) {
    RowMatrix<Scalar> v(grid.nodes(), dim);
    for (Index i = 0; i < grid.nodes(); ++i) v.row(i) = Vector<Scalar>(fn(grid.node(i))).transpose();
    return Trajectory(grid, std::move(v));
  }

  const Grid<Scalar>& grid() const { return grid_; }
  Index dimension() const { return values_.cols(); }
  const RowMatrix<Scalar>& values() const { return values_; }
  auto row(Index i) const { return values_.row(i); }

  /// Value at the midpoint of subinterval j under linear interpolation.
  Vector<Scalar> midpoint(Index j) const {
    return ((values_.row(j) + values_.row(j + 1)) / Scalar(2)).transpose();
  }

  Trajectory operator-(const Trajectory& o) const {
    check(o);
    return Trajectory(grid_, values_ - o.values_);
  }
  Trajectory operator+(const Trajectory& o) const {
    check(o);
    return Trajectory(grid_, values_ + o.values_);
  }
  friend Trajectory operator*(Scalar a, const Trajectory& x) { return Trajectory(x.grid_, a * x.values_); }

 private:
  void check(const Trajectory& o) const {
    detail::require_same_grid(grid_, o.grid_);
    if (o.dimension() != dimension()) throw std::invalid_argument("dimension mismatch");
  }

  Grid<Scalar> grid_;
  RowMatrix<Scalar> values_;
};

/// One real per node (moduli, bounds, weights).
template <typename Scalar>
class ScalarTable {
 public:
  ScalarTable(Grid<Scalar> grid, Vector<Scalar> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.nodes()) throw std::invalid_argument("scalar table needs one entry per node");
    detail::require_finite(values_, "scalar table");
  }

  static ScalarTable constant(const Grid<Scalar>& grid, Scalar c) {
    return ScalarTable(grid, Vector<Scalar>::Constant(grid.nodes(), c));
  }
  template <typename Fn>
  static ScalarTable sample(const Grid<Scalar>& grid, Fn&& fn) {
    Vector<Scalar> v(grid.nodes());
    for (Index i = 0; i < grid.nodes(); ++i) v(i) = fn(grid.node(i));
    return ScalarTable(grid, std::move(v));
  }

  const Grid<Scalar>& grid() const { return grid_; }
  const Vector<Scalar>& values() const { return values_; }
  Scalar operator[](Index i) const { return values_(i); }
  Scalar midpoint(Index j) const { return (values_(j) + values_(j + 1)) / Scalar(2); }
  bool nonnegative() const { return (values_.array() >= Scalar(0)).all(); }

 private:
  Grid<Scalar> grid_;
  Vector<Scalar> values_;
};

/// Composite trapezoid value of f over [0, t_{up_to}].
template <typename Scalar>
Scalar trapezoid_integrate(const ScalarTable<Scalar>& f, Index up_to) {
  const auto& g = f.grid();
  if (up_to < 0 || up_to > g.intervals()) throw std::out_of_range("trapezoid_integrate: index out of range");
  if (up_to == 0) return Scalar(0);
  const auto& v = f.values();
  Scalar inner = v.segment(1, up_to - 1).sum();
  return g.step() * (inner + (v(0) + v(up_to)) / Scalar(2));
}

/// Running trapezoid integral r(t_i) = int_0^{t_i} f, as a node table.
template <typename Scalar>
ScalarTable<Scalar> cumulative_trapezoid(const ScalarTable<Scalar>& f) {
  const auto& g = f.grid();
  Vector<Scalar> r(g.nodes());
  r(0) = Scalar(0);
  for (Index i = 1; i < g.nodes(); ++i) r(i) = r(i - 1) + g.step() * (f[i - 1] + f[i]) / Scalar(2);
  return ScalarTable<Scalar>(g, std::move(r));
}

template <typename Scalar>
Scalar lp_norm(const Selection<Scalar>& w, Scalar p) {
  if (!(p >= Scalar(1)) || !std::isfinite(double(p))) throw std::invalid_argument("lp_norm: need 1 <= p < inf");
  const Scalar h = w.grid().step();
  const auto norms = w.values().rowwise().norm();
  if (p == Scalar(1)) return h * norms.sum();
  return std::pow(h * norms.array().pow(p).sum(), Scalar(1) / p);
}

/// L^p norm of a table given per subinterval (left-rectangle rule).
template <typename Scalar>
Scalar lp_norm_pointwise(const Vector<Scalar>& per_subinterval, Scalar step, Scalar p) {
  if (p == Scalar(1)) return step * per_subinterval.array().abs().sum();
  return std::pow(step * per_subinterval.array().abs().pow(p).sum(), Scalar(1) / p);
}

/// Exponent 2^{2p-1} M of the Bielecki weight.
template <typename Scalar>
Scalar bielecki_rate(Scalar big_m, Scalar p) {
  return std::pow(Scalar(2), Scalar(2) * p - Scalar(1)) * big_m;
}

/// Subinterval weights of the Bielecki norm: node weights exp(-2^{2p-1} M r(t_i)),
/// r = int alpha^p, averaged onto each subinterval.
template <typename Scalar>
Vector<Scalar> bielecki_weights(const ScalarTable<Scalar>& alpha, Scalar big_m, Scalar p) {
  if (!(big_m >= Scalar(1))) throw std::invalid_argument("bielecki weight needs M >= 1");
  if (!(p >= Scalar(1))) throw std::invalid_argument("bielecki weight needs p >= 1");
  const auto& g = alpha.grid();
  ScalarTable<Scalar> alpha_p(g, alpha.values().array().abs().pow(p).matrix());
  const auto r = cumulative_trapezoid(alpha_p);
  const Scalar rate = bielecki_rate(big_m, p);
  Vector<Scalar> node_w = (-rate * r.values().array()).exp().matrix();
  return ((node_w.head(g.intervals()) + node_w.tail(g.intervals())) / Scalar(2)).eval();
}

/// Weighted p-norm (sum_j h w_j |v_j|^p)^{1/p} of a per-subinterval table.
template <typename Scalar>
Scalar weighted_lp(const Vector<Scalar>& per_subinterval, const Vector<Scalar>& weights, Scalar step, Scalar p) {
  const auto a = per_subinterval.array().abs();
  if (p == Scalar(1)) return step * (weights.array() * a).sum();
  return std::pow(step * (weights.array() * a.pow(p)).sum(), Scalar(1) / p);
}

template <typename Scalar>
Scalar bielecki_norm(const Selection<Scalar>& w, const ScalarTable<Scalar>& alpha, Scalar big_m, Scalar p) {
  detail::require_same_grid(w.grid(), alpha.grid());
  const Vector<Scalar> wt = bielecki_weights(alpha, big_m, p);
  const Vector<Scalar> norms = w.values().rowwise().norm();
  return weighted_lp(norms, wt, w.grid().step(), p);
}

template <typename Scalar>
Scalar sup_norm(const Trajectory<Scalar>& x) {
  return x.values().rowwise().norm().maxCoeff();
}

}  // namespace volterra

#endif  // VOLTERRA_TIMEBASE_HPP
