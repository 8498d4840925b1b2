#ifndef VOLTERRA_FUNNEL_HPP
#define VOLTERRA_FUNNEL_HPP

#include "solvers.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace volterra {

/// Tube X(t): one region per node. Between nodes the slice interpolates
/// centers and sizes (same-variant neighbours only).
template <typename Scalar>
class Tube {
 public:
  Tube(Grid<Scalar> grid, std::vector<ConvexRegion<Scalar>> slices) : grid_(std::move(grid)), slices_(std::move(slices)) {
    if (Index(slices_.size()) != grid_.nodes()) throw std::invalid_argument("tube needs one slice per node");
    for (const auto& s : slices_) s.check_dim(slices_.front().dimension());
  }
  template <typename Fn>
  static Tube sample(const Grid<Scalar>& grid, Fn&& fn) {
    std::vector<ConvexRegion<Scalar>> s;
    for (Index i = 0; i < grid.nodes(); ++i) s.push_back(fn(grid.node(i)));
    return Tube(grid, std::move(s));
  }

  const Grid<Scalar>& grid() const { return grid_; }
  Index dimension() const { return slices_.front().dimension(); }
  const ConvexRegion<Scalar>& at_node(Index i) const { return slices_.at(std::size_t(i)); }

  ConvexRegion<Scalar> slice(Scalar t) const {
    if (t < Scalar(0) || t > grid_.horizon()) throw std::out_of_range("tube slice outside [0, T]");
    const Index i = std::min(Index(t / grid_.step()), grid_.intervals() - 1);
    const Scalar w = (t - grid_.node(i)) / grid_.step();
    const auto& a = slices_[std::size_t(i)];
    const auto& b = slices_[std::size_t(i + 1)];
    if (w <= Scalar(0)) return a;
    if (w >= Scalar(1)) return b;
    return std::visit([&](const auto& sa) -> ConvexRegion<Scalar> {
      using S = std::decay_t<decltype(sa)>;
      const auto* sb = std::get_if<S>(&b.shape());
      if (!sb) throw std::domain_error("tube slices change variant between nodes");
      auto mix = [&](const auto& u, const auto& v) { return ((Scalar(1) - w) * u + w * v).eval(); };
      if constexpr (std::is_same_v<S, PointShape<Scalar>>) return ConvexRegion<Scalar>::point(mix(sa.center, sb->center));
      else if constexpr (std::is_same_v<S, BallShape<Scalar>>)
        return ConvexRegion<Scalar>::ball(mix(sa.center, sb->center), (Scalar(1) - w) * sa.radius + w * sb->radius);
      else if constexpr (std::is_same_v<S, BoxShape<Scalar>>)
        return ConvexRegion<Scalar>::box(mix(sa.center, sb->center), mix(sa.half_widths, sb->half_widths));
      else return ConvexRegion<Scalar>::segment(mix(sa.a, sb->a), mix(sa.b, sb->b));
    }, a.shape());
  }

 private:
  Grid<Scalar> grid_;
  std::vector<ConvexRegion<Scalar>> slices_;
};

/// Pr(t, y): nearest point of X(t).
template <typename Scalar>
Vector<Scalar> tube_project(const Vector<Scalar>& y, const Tube<Scalar>& tube, Scalar t) {
  return project(y, tube.slice(t));
}

/// Pr_n on the dyadic windows [iT/2^n, (i+1)T/2^n]: at each node, the box hull
/// of the projections of x onto the slices at the nodes of its window. Node k
/// belongs to the window with left end <= t_k < right end (the last node to the
/// last window). Needs 2^n | N.
template <typename Scalar>
std::vector<ConvexRegion<Scalar>> step_multifunction(const Tube<Scalar>& tube, const Vector<Scalar>& x, int n) {
  const auto& g = tube.grid();
  if (n < 0 || n > 30) throw std::invalid_argument("step_multifunction: bad refinement level");
  const Index windows = Index(1) << n;
  if (g.intervals() % windows != 0) throw std::invalid_argument("step_multifunction: 2^n must divide N");
  const Index per = g.intervals() / windows;
  std::vector<ConvexRegion<Scalar>> hulls;
  hulls.reserve(std::size_t(windows));
  for (Index w = 0; w < windows; ++w) {
    std::vector<Vector<Scalar>> pts;
    for (Index k = w * per; k <= (w + 1) * per; ++k) pts.push_back(project(x, tube.at_node(k)));
    hulls.push_back(bounding_box(pts));
  }
  std::vector<ConvexRegion<Scalar>> out;
  out.reserve(std::size_t(g.nodes()));
  for (Index k = 0; k < g.nodes(); ++k) out.push_back(hulls[std::size_t(std::min(k / per, windows - 1))]);
  return out;
}

template <typename Scalar>
struct FunnelMember {
  std::uint64_t seed_id = 0;
  Selection<Scalar> u;
  Trajectory<Scalar> x;
  SolveReport<Scalar> report;
  Scalar residual = Scalar(0);  ///< membership against the original field
};

template <typename Scalar>
struct FunnelSample {
  std::vector<FunnelMember<Scalar>> members;  ///< converged solves, ordered by seed id
  std::vector<std::uint64_t> failed;          ///< seed ids that did not converge
  RowMatrix<Scalar> min, max, centroid;       ///< (N+1) x d cross-section summaries
};

/// Block length used for seed k when none is given: seeds 0 and 1 use one
/// block, later seeds cycle through N, N/2, ..., 1.
inline Index default_block_length(Index intervals, std::uint64_t k) {
  if (k < 2) return intervals;
  std::vector<Index> lengths;
  for (Index b = intervals; b >= 1; b /= 2) lengths.push_back(b);
  return lengths[std::size_t((k - 2) % lengths.size())];
}

/// Per-subinterval unit directions for seed k. Seeds 0 and 1 are +-(1,..,1)/sqrt(d);
/// the rest draw one Gaussian direction per block. Deterministic in (rng_seed, k).
template <typename Scalar>
RowMatrix<Scalar> bang_bang_directions(const Grid<Scalar>& g, Index d, std::uint64_t rng_seed, std::uint64_t k,
                                       Index block = 0) {
  const Index n = g.intervals();
  RowMatrix<Scalar> dirs(n, d);
  if (k < 2) {
    dirs.setConstant((k == 0 ? Scalar(1) : Scalar(-1)) / std::sqrt(Scalar(d)));
    return dirs;
  }
  if (block <= 0) block = default_block_length(n, k);
  std::seed_seq seq{std::uint32_t(rng_seed), std::uint32_t(rng_seed >> 32), std::uint32_t(k), std::uint32_t(k >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  Vector<Scalar> e(d);
  for (Index j = 0; j < n; ++j) {
    if (j % block == 0) {
      do {
        for (Index c = 0; c < d; ++c) e(c) = Scalar(normal(rng));
      } while (e.norm() == Scalar(0));
      e.normalize();
    }
    dirs.row(j) = e.transpose();
  }
  return dirs;
}

/// K selections taking extreme points of F(t, h(t)) along the seed directions.
template <typename Scalar>
std::vector<Selection<Scalar>> bang_bang_seeds(const ProblemInstance<Scalar>& inst, std::size_t K, std::uint64_t rng_seed,
                                               Index block = 0) {
  if (K < 1) throw std::invalid_argument("bang_bang_seeds needs K >= 1");
  const auto& g = inst.grid();
  const auto& h = inst.inhomogeneity();
  std::vector<Selection<Scalar>> out;
  for (std::size_t k = 0; k < K; ++k) {
    const auto dirs = bang_bang_directions(g, inst.dimension(), rng_seed, k, block);
    RowMatrix<Scalar> v(g.intervals(), inst.dimension());
    for (Index j = 0; j < g.intervals(); ++j)
      v.row(j) = support_point(field_eval(inst.field(), Instant::at_midpoint(j), h.midpoint(j)),
                               Vector<Scalar>(dirs.row(j).transpose()))
                     .transpose();
    out.emplace_back(g, std::move(v));
  }
  return out;
}

/// Samples the solution set: for each seed, the solution whose selection is the
/// support point of F(t, x(t)) along the seed directions (a Picard solve of the
/// extremal singleton field, started from the bang-bang seed). Every member is
/// checked for membership against the original field. Seeds may run on `jobs`
/// threads; the result is ordered by seed id regardless.
template <typename Scalar>
FunnelSample<Scalar> sample_funnel(const ProblemInstance<Scalar>& inst, std::size_t K, std::uint64_t rng_seed, Scalar tol,
                                   unsigned jobs = 1, Index block = 0) {
  const auto seeds = bang_bang_seeds(inst, K, rng_seed, block);
  const auto& g = inst.grid();
  const Index d = inst.dimension();
  PicardOptions<Scalar> opt;
  opt.tol = tol;
  opt.max_iter = 500;

  std::vector<std::optional<FunnelMember<Scalar>>> slots(K);
  auto run = [&](std::size_t k) {
    const auto dirs = bang_bang_directions(g, d, rng_seed, k, block);
    const auto ext = SetField<Scalar>::extremal(inst.field(), dirs);
    const auto sub = inst.with_field(ext, derive_field_data(ext));
    auto sol = picard_solve(sub, seeds[k], opt);
    const Scalar res = nemytskii_residual(inst, sol.x, sol.u).aggregate;
    FunnelMember<Scalar> m{std::uint64_t(k), std::move(sol.u), std::move(sol.x), std::move(sol.report), res};
    slots[k] = std::move(m);
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, unsigned(K)));
  if (jobs == 1) {
    for (std::size_t k = 0; k < K; ++k) run(k);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < K; k += jobs) run(k);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  FunnelSample<Scalar> out;
  for (std::size_t k = 0; k < K; ++k) {
    if (slots[k]->report.converged) out.members.push_back(std::move(*slots[k]));
    else out.failed.push_back(std::uint64_t(k));
  }
  if (out.members.empty()) throw std::runtime_error("no funnel seed converged");
  out.min = out.members.front().x.values();
  out.max = out.min;
  out.centroid = RowMatrix<Scalar>::Zero(g.nodes(), d);
  for (const auto& m : out.members) {
    out.min = out.min.cwiseMin(m.x.values());
    out.max = out.max.cwiseMax(m.x.values());
    out.centroid += m.x.values();
  }
  out.centroid /= Scalar(out.members.size());
  return out;
}

template <typename Scalar>
struct Envelope {
  Trajectory<Scalar> x_min, x_max;
  Scalar uniqueness_gap;  ///< larger of the two single-valued seed gaps
};

/// Checks the envelope preconditions; returns an empty string when they hold.
/// Scalar state, k(t, s) >= 0 on the grid, and both endpoints of F(t, x)
/// nondecreasing in x (sampled on [-radius, radius] at every node).
template <typename Scalar>
std::string envelope_precondition(const ProblemInstance<Scalar>& inst, Scalar radius = Scalar(10), int samples = 64) {
  if (inst.dimension() != 1) return "envelope oracle needs a scalar state";
  if ((inst.volterra_matrix().array() < Scalar(0)).any()) return "kernel takes negative values";
  const auto& g = inst.grid();
  const Vector<Scalar> up = Vector<Scalar>::Constant(1, Scalar(1)), down = -up;
  for (Index i = 0; i < g.nodes(); ++i) {
    Scalar prev_lo = -infinity<Scalar>(), prev_hi = -infinity<Scalar>();
    for (int s = 0; s <= samples; ++s) {
      const Vector<Scalar> x = Vector<Scalar>::Constant(1, -radius + Scalar(2) * radius * Scalar(s) / Scalar(samples));
      const auto v = field_eval(inst.field(), Instant::at_node(i), x);
      const Scalar hi = support(v, up), lo = -support(v, down);
      const Scalar slack = Scalar(1e-12) * (Scalar(1) + std::abs(hi) + std::abs(lo));
      if (hi < prev_hi - slack || lo < prev_lo - slack) return "field endpoints are not nondecreasing in x";
      prev_lo = lo;
      prev_hi = hi;
    }
  }
  return {};
}

/// x_max and x_min: solutions with f = max F and f = min F. For scalar problems
/// with k >= 0 and monotone endpoints every solution lies between them.
/// Throws std::domain_error when a precondition fails.
template <typename Scalar>
Envelope<Scalar> scalar_envelope_oracle(const ProblemInstance<Scalar>& inst, Scalar tol = Scalar(1e-10)) {
  if (const auto why = envelope_precondition(inst); !why.empty()) throw std::domain_error(why);
  auto solve = [&](Scalar sign) {
    RowMatrix<Scalar> dir = RowMatrix<Scalar>::Constant(1, 1, sign);
    const auto ext = SetField<Scalar>::extremal(inst.field(), dir);
    return single_valued_solve(inst.with_field(ext, derive_field_data(ext)), tol);
  };
  auto hi = solve(Scalar(1));
  auto lo = solve(Scalar(-1));
  return {std::move(lo.x), std::move(hi.x), std::max(lo.uniqueness_gap, hi.uniqueness_gap)};
}

/// Reachable interval at every node over all 2^N per-subinterval extreme-point
/// selections of a scalar field, by a forward sweep. Each step's implicit
/// equation is solved by scalar fixed-point iteration. N <= 16.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> enumerate_reachable(const ProblemInstance<Scalar>& inst) {
  if (inst.dimension() != 1) throw std::invalid_argument("enumeration needs a scalar state");
  const auto& g = inst.grid();
  const Index n = g.intervals();
  if (n > 16) throw std::invalid_argument("enumeration is limited to N <= 16");
  const auto& V = inst.volterra_matrix();
  const auto& h = inst.inhomogeneity().values();
  Vector<Scalar> lo = Vector<Scalar>::Constant(g.nodes(), infinity<Scalar>());
  Vector<Scalar> hi = -lo;
  Vector<Scalar> x(g.nodes()), f(n);
  const Vector<Scalar> up = Vector<Scalar>::Constant(1, Scalar(1));
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t(1) << n); ++pattern) {
    x(0) = h(0, 0);
    for (Index j = 0; j < n; ++j) {
      const Scalar sign = (pattern >> j) & 1 ? Scalar(-1) : Scalar(1);
      Scalar known = h(j + 1, 0);
      for (Index l = 0; l < j; ++l) known += V(j + 1, l) * f(l);
      Scalar next = x(j), fj = Scalar(0);
      for (int it = 0; it < 500; ++it) {
        const Vector<Scalar> mid = Vector<Scalar>::Constant(1, (x(j) + next) / Scalar(2));
        fj = support_point(field_eval(inst.field(), Instant::at_midpoint(j), mid), Vector<Scalar>(sign * up))(0);
        const Scalar updated = known + V(j + 1, j) * fj;
        const bool done = std::abs(updated - next) <= Scalar(4) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + std::abs(updated));
        next = updated;
        if (done) break;
      }
      f(j) = fj;
      x(j + 1) = next;
    }
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return {lo, hi};
}

/// One-sided sup-norm excess of the sampled funnel at h1 over the one at h2,
/// both sampled with the same seeds.
template <typename Scalar>
Scalar usc_probe(const ProblemInstance<Scalar>& inst, const Trajectory<Scalar>& h1, const Trajectory<Scalar>& h2,
                 std::size_t K, std::uint64_t rng_seed, Scalar tol = Scalar(1e-10), unsigned jobs = 1) {
  const auto a = sample_funnel(inst.with_inhomogeneity(h1), K, rng_seed, tol, jobs);
  const auto b = sample_funnel(inst.with_inhomogeneity(h2), K, rng_seed, tol, jobs);
  Scalar worst(0);
  for (const auto& ma : a.members) {
    Scalar best = infinity<Scalar>();
    for (const auto& mb : b.members) best = std::min(best, sup_norm(ma.x - mb.x));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace volterra

#endif  // VOLTERRA_FUNNEL_HPP
