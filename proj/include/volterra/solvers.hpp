#ifndef VOLTERRA_SOLVERS_HPP
#define VOLTERRA_SOLVERS_HPP

#include "operators.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

namespace volterra {

template <typename Scalar>
struct PicardOptions {
  Scalar tol = Scalar(1e-8);  ///< Bielecki increment threshold
  int max_iter = 200;
  /// Keep iterating past `tol` until increments reach rounding level, so the
  /// returned pair satisfies membership to machine precision.
  bool polish = true;
  int max_polish = 64;
};

template <typename Scalar>
struct SolveReport {
  int iterations = 0;
  std::vector<Scalar> increments;  ///< increments[k-1] = |||u_k - u_{k-1}|||_p
  /// (k, increments[k-1] / increments[k-2]) for k >= 2, skipped when the
  /// previous increment is already at rounding level.
  std::vector<std::pair<int, Scalar>> ratios;
  bool converged = false;
  int converged_at = -1;                ///< first k with increment <= tol
  Scalar fixed_point_defect = Scalar(0);  ///< |||u* - step(u*)|||_p
  Scalar residual = Scalar(0);            ///< nemytskii aggregate of (x*, u*)
  double wall_seconds = 0.0;
};

template <typename Scalar>
struct PicardResult {
  Selection<Scalar> u;
  Trajectory<Scalar> x;
  SolveReport<Scalar> report;
};

namespace detail {

template <typename Scalar>
Scalar rounding_floor(Scalar scale) {
  return Scalar(64) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), scale);
}

template <typename Scalar, typename Step>
PicardResult<Scalar> iterate_fixed_point(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& u0,
                                         const PicardOptions<Scalar>& opt, Step&& step) {
  if (!(opt.tol > Scalar(0))) throw std::invalid_argument("picard tolerance must be positive");
  const auto start = std::chrono::steady_clock::now();
  SolveReport<Scalar> rep;
  Selection<Scalar> u = u0;
  const int cap = opt.max_iter + (opt.polish ? opt.max_polish : 0);
  for (int k = 1; k <= cap; ++k) {
    Selection<Scalar> next = step(u);
    const Scalar inc = bielecki_norm(inst, next - u);
    if (!std::isfinite(double(inc))) throw std::runtime_error("picard iterate is not finite");
    const Scalar scale = bielecki_norm(inst, next);
    if (!rep.increments.empty()) {
      const Scalar prev = rep.increments.back();
      if (prev > Scalar(1e-11) * std::max(Scalar(1), scale)) rep.ratios.emplace_back(k, inc / prev);
    }
    rep.increments.push_back(inc);
    rep.iterations = k;
    u = std::move(next);
    if (rep.converged_at < 0) {
      if (inc <= opt.tol) {
        rep.converged_at = k;
        if (!opt.polish) break;
      } else if (k >= opt.max_iter) {
        break;
      }
    }
    if (rep.converged_at >= 0 && (inc <= rounding_floor(scale) || k - rep.converged_at >= opt.max_polish)) break;
  }
  rep.converged = rep.converged_at >= 0;
  auto x = state_of(inst, u);
  rep.fixed_point_defect = bielecki_norm(inst, u - step(u));
  rep.residual = nemytskii_residual(inst, x, u).aggregate;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(u), std::move(x), std::move(rep)};
}

}  // namespace detail

/// Fixed point of u -> nearest element of N_F^p(h + V u), iterated from u0.
///
/// Each step is a contraction in the Bielecki norm with ratio at most 2^{-1/p},
/// so increments decay geometrically. Non-convergence within max_iter is
/// reported through `report.converged`, not thrown.
template <typename Scalar>
PicardResult<Scalar> picard_solve(const ProblemInstance<Scalar>& inst, const Selection<Scalar>& u0,
                                  const PicardOptions<Scalar>& opt = {}) {
  return detail::iterate_fixed_point(inst, u0, opt, [&](const Selection<Scalar>& u) { return gp_project_step(inst, u); });
}

template <typename Scalar>
struct SingleValuedResult {
  Trajectory<Scalar> x;
  Selection<Scalar> u;
  SolveReport<Scalar> report;
  Scalar uniqueness_gap;  ///< sup-norm distance between the solutions from two seeds
  bool unique;            ///< uniqueness_gap <= 10 tol
};

/// Solves x = h + V f(., x) for a singleton field. Runs twice (u0 = 0 and
/// u0 = 10) and compares: by Gronwall the two must coincide.
template <typename Scalar>
SingleValuedResult<Scalar> single_valued_solve(const ProblemInstance<Scalar>& inst, Scalar tol,
                                               int max_iter = 500) {
  if (!inst.field().is_singleton()) throw std::invalid_argument("single_valued_solve needs a singleton field");
  PicardOptions<Scalar> opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  const auto& g = inst.grid();
  const Index d = inst.dimension();
  auto a = picard_solve(inst, Selection<Scalar>::zero(g, d), opt);
  auto b = picard_solve(inst, Selection<Scalar>::constant(g, Vector<Scalar>::Constant(d, Scalar(10))), opt);
  const Scalar gap = sup_norm(a.x - b.x);
  return {std::move(a.x), std::move(a.u), std::move(a.report), gap, gap <= Scalar(10) * tol};
}

/// Raised when a ledger inequality fails beyond its tolerance.
class LedgerViolation : public std::runtime_error {
 public:
  LedgerViolation(std::string what, std::string check, long n, long where, double lhs, double rhs)
      : std::runtime_error(std::move(what)), check(std::move(check)), n(n), where(where), lhs(lhs), rhs(rhs) {}
  std::string check;  ///< "recursion" or "property_iii"
  long n;
  long where;  ///< node (recursion) or subinterval (property_iii) index
  double lhs, rhs;
};

template <typename Scalar>
struct LedgerCheck {
  Index n = 0;
  Scalar worst_margin = infinity<Scalar>();  ///< rhs - lhs at the tightest point
  Index where = 0;
  bool passed = true;
};

/// Tables and checks of the successive-approximation construction.
///
///   eps_n     = (n + 1)/(n + 2) eps
///   m(t)      = int_0^t alpha^p
///   gamma(t)  = 2^p max{beta(t)^p, alpha(t)^p |h(t)|}
///   beta_n(t) = M^{np} ( int_0^t gamma(s) (m(t) - m(s))^{n-1}/(n-1)! ds
///                        + T eps_n m(t)^{n-1}/(n-1)! )
///
/// with M = sup_t ||k(t, .)||_q. alpha^p and gamma are interpolated linearly
/// between nodes and the integrals evaluated exactly for those interpolants.
template <typename Scalar>
struct SelectionLedger {
  explicit SelectionLedger(const Grid<Scalar>& g)
      : m(ScalarTable<Scalar>::constant(g, Scalar(0))), gamma(ScalarTable<Scalar>::constant(g, Scalar(0))) {}

  Scalar epsilon = Scalar(0);
  Scalar p = Scalar(1);
  Scalar M = Scalar(0);
  Index nmax = 0;
  std::vector<Scalar> eps_n;  ///< n = 0 .. nmax + 1
  ScalarTable<Scalar> m;
  ScalarTable<Scalar> gamma;
  std::vector<ScalarTable<Scalar>> beta;  ///< beta[n - 1] = beta_n, n = 1 .. nmax + 1
  Scalar alpha_p_norm = Scalar(0);        ///< ||alpha||_p
  Scalar gamma_l1 = Scalar(0);            ///< ||gamma(h)||_1

  std::vector<LedgerCheck<Scalar>> recursion;  ///< M^p int alpha^p beta_n <= beta_{n+1}, n = 1 .. nmax
  std::vector<LedgerCheck<Scalar>> property_iii;
  std::vector<Vector<Scalar>> property_iii_margin;  ///< per subinterval, n = 1 ..
  std::vector<Scalar> increment;                    ///< sup_t |x_{n+1} - x_n|, n = 0 ..
  std::vector<Scalar> increment_bound;
  std::vector<LedgerCheck<Scalar>> increment_checks;
  std::vector<std::string> warnings;

  const ScalarTable<Scalar>& beta_n(Index n) const {
    if (n < 1 || n > Index(beta.size())) throw std::out_of_range("beta_n index out of range");
    return beta[std::size_t(n - 1)];
  }
  /// M^{n+1} ||alpha||_p^n / (n!)^{1/p} (||gamma||_1 + T eps)^{1/p}.
  Scalar increment_series_term(Index n, Scalar horizon) const {
    return std::pow(M, Scalar(n + 1)) * std::pow(alpha_p_norm, Scalar(n)) /
           std::pow(std::tgamma(Scalar(n + 1)), Scalar(1) / p) * std::pow(gamma_l1 + horizon * epsilon, Scalar(1) / p);
  }
  bool passed() const {
    for (const auto* list : {&recursion, &property_iii, &increment_checks})
      for (const auto& c : *list)
        if (!c.passed) return false;
    return true;
  }
};

/// Relative tolerance on the beta_n recursion.
inline constexpr double kLedgerRecursionTol = 1e-6;

namespace detail {

/// Gauss-Legendre nodes and weights on [0, 1].
template <typename Scalar>
std::pair<std::vector<Scalar>, std::vector<Scalar>> gauss_legendre(int count) {
  std::vector<Scalar> x(static_cast<std::size_t>(count)), w(static_cast<std::size_t>(count));
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < count; ++i) {
    double z = std::cos(pi * (i + 0.75) / (count + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= count; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = count * (z * p0 - p1) / (z * z - 1);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[std::size_t(i)] = Scalar((1 - z) / 2);
    w[std::size_t(i)] = Scalar(1 / ((1 - z * z) * dp * dp));
  }
  return {x, w};
}

template <typename Scalar>
Scalar ipow(Scalar b, Index e) {
  Scalar r(1);
  for (Index k = 0; k < e; ++k) r *= b;
  return r;
}

/// beta_n evaluated from its closed form for the piecewise-linear interpolants
/// of alpha^p and gamma. m is then piecewise quadratic and every integrand a
/// polynomial on each subinterval, which Gauss-Legendre integrates exactly.
template <typename Scalar>
class LedgerQuadrature {
 public:
  LedgerQuadrature(const Grid<Scalar>& g, Vector<Scalar> a, Vector<Scalar> gam, Index max_n)
      : h_(g.step()), a_(std::move(a)), gam_(std::move(gam)), m_(g.nodes()) {
    m_(0) = Scalar(0);
    for (Index j = 0; j + 1 < g.nodes(); ++j) m_(j + 1) = m_(j) + h_ * (a_(j) + a_(j + 1)) / Scalar(2);
    std::tie(x_, w_) = gauss_legendre<Scalar>(int(max_n) + 3);
  }
  const Vector<Scalar>& m_nodes() const { return m_; }
  Scalar a(Index j, Scalar th) const { return a_(j) + (a_(j + 1) - a_(j)) * th; }
  Scalar gam(Index j, Scalar th) const { return gam_(j) + (gam_(j + 1) - gam_(j)) * th; }
  Scalar m(Index j, Scalar th) const { return m_(j) + h_ * th * (a_(j) + (a_(j + 1) - a_(j)) * th / Scalar(2)); }

  /// int_0^t gamma(s) (m(t) - m(s))^{n-1} ds at t = t_j + th h.
  Scalar kernel_integral(Index n, Index j, Scalar th) const {
    const Scalar mt = m(j, th);
    Scalar sum(0);
    for (Index l = 0; l <= j; ++l) {
      const Scalar span = l < j ? Scalar(1) : th;
      if (span <= Scalar(0)) continue;
      for (std::size_t q = 0; q < x_.size(); ++q) {
        const Scalar s = span * x_[q];
        sum += h_ * span * w_[q] * gam(l, s) * ipow(mt - m(l, s), n - 1);
      }
    }
    return sum;
  }
  /// Integral of alpha^p(s) f(s) over subinterval l, f taking theta.
  template <typename Fn>
  Scalar weighted_integral(Index l, Fn&& f) const {
    Scalar sum(0);
    for (std::size_t q = 0; q < x_.size(); ++q) sum += h_ * w_[q] * a(l, x_[q]) * f(x_[q]);
    return sum;
  }

 private:
  Scalar h_;
  Vector<Scalar> a_, gam_, m_;
  std::vector<Scalar> x_, w_;
};

}  // namespace detail

template <typename Scalar>
SelectionLedger<Scalar> build_ledger(const ProblemInstance<Scalar>& inst, Scalar epsilon, Index nmax) {
  if (!(epsilon > Scalar(0))) throw std::invalid_argument("ledger needs eps > 0");
  if (nmax < 1) throw std::invalid_argument("ledger needs nmax >= 1");
  const auto& g = inst.grid();
  const auto& data = inst.data();
  const Index nodes = g.nodes();
  const Scalar p = inst.exponent(), T = g.horizon();

  SelectionLedger<Scalar> L(g);
  L.epsilon = epsilon;
  L.p = p;
  L.nmax = nmax;
  L.M = kernel_slice_sup(inst.kernel(), inst.conjugate(), g);
  for (Index n = 0; n <= nmax + 1; ++n) L.eps_n.push_back(Scalar(n + 1) / Scalar(n + 2) * epsilon);

  const Vector<Scalar> alpha_p = data.alpha.values().array().pow(p).matrix();
  Vector<Scalar> gam(nodes);
  const Scalar two_p = std::pow(Scalar(2), p);
  for (Index i = 0; i < nodes; ++i)
    gam(i) = two_p * std::max(std::pow(data.beta[i], p), alpha_p(i) * inst.inhomogeneity().row(i).norm());
  L.gamma = ScalarTable<Scalar>(g, gam);
  L.gamma_l1 = trapezoid_integrate(L.gamma, g.intervals());
  L.alpha_p_norm = std::pow(trapezoid_integrate(ScalarTable<Scalar>(g, alpha_p), g.intervals()), Scalar(1) / p);

  const detail::LedgerQuadrature<Scalar> quad(g, alpha_p, gam, nmax + 1);
  L.m = ScalarTable<Scalar>(g, quad.m_nodes());

  // beta_n at (subinterval j, theta); nodes use (j, 0) and the last node (N-1, 1).
  auto beta_at = [&](Index n, Index j, Scalar th) {
    const Scalar fact = std::tgamma(Scalar(n));  // (n-1)!
    return std::pow(L.M, Scalar(n) * p) *
           (quad.kernel_integral(n, j, th) / fact +
            T * L.eps_n[std::size_t(n)] * detail::ipow(quad.m(j, th), n - 1) / fact);
  };
  auto at_node = [&](Index i) { return i < g.intervals() ? std::pair{i, Scalar(0)} : std::pair{i - 1, Scalar(1)}; };

  for (Index n = 1; n <= nmax + 1; ++n) {
    Vector<Scalar> b(nodes);
    for (Index i = 0; i < nodes; ++i) {
      const auto [j, th] = at_node(i);
      b(i) = beta_at(n, j, th);
    }
    L.beta.emplace_back(g, b);
  }

  const Scalar mp = std::pow(L.M, p);
  for (Index n = 1; n <= nmax; ++n) {
    const auto& bn1 = L.beta_n(n + 1);
    LedgerCheck<Scalar> c;
    c.n = n;
    Scalar lhs_at_worst(0);
    Scalar running(0);
    for (Index i = 0; i < nodes; ++i) {
      if (i > 0) running += quad.weighted_integral(i - 1, [&](Scalar th) { return beta_at(n, i - 1, th); });
      const Scalar lhs = mp * running;
      const Scalar margin = bn1[i] * (Scalar(1) + Scalar(kLedgerRecursionTol)) - lhs;
      if (margin < c.worst_margin) {
        c.worst_margin = margin;
        c.where = i;
        lhs_at_worst = lhs;
      }
    }
    c.passed = c.worst_margin >= Scalar(0);
    L.recursion.push_back(c);
    if (!c.passed)
      throw LedgerViolation("beta_n recursion violated beyond quadrature tolerance", "recursion", long(n), long(c.where),
                            double(lhs_at_worst), double(bn1[c.where]));
  }
  return L;
}

template <typename Scalar>
struct SchemeOptions {
  Scalar sup_tol = Scalar(1e-6);  ///< sup-norm trajectory increment threshold
  int max_iter = 500;             ///< total iterations including those past nmax
};

template <typename Scalar>
struct SchemeResult {
  Trajectory<Scalar> x;
  Selection<Scalar> f;
  SelectionLedger<Scalar> ledger;
  SolveReport<Scalar> report;  ///< increments here are sup-norm trajectory increments
};

/// Successive approximations f_0, x_1, f_1, x_2, ... of a continuous selection
/// h -> x(., h) of the solution set map.
///
///   f_0       = project(0, F(t, h(t)))           (min-norm selection)
///   x_{n+1}   = h + V f_n
///   f_{n+1}   = project(f_n, F(t, x_{n+1}(t)))
///
/// Along the way the ledger records, for n <= nmax, property (iii)
/// |f_n - f_{n-1}| <= alpha beta_n^{1/p} on every subinterval and the increment
/// bound ||x_{n+1} - x_n|| <= M^{n+1}||alpha||_p^n/(n!)^{1/p}(||gamma||_1 + T eps)^{1/p}.
/// Iteration continues past nmax (unledgered) until the pair is a fixed point to
/// rounding. Throws LedgerViolation when (iii) fails beyond tolerance.
template <typename Scalar>
SchemeResult<Scalar> selection_scheme_solve(const ProblemInstance<Scalar>& inst, Scalar epsilon, Index nmax,
                                            const SchemeOptions<Scalar>& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  const auto& g = inst.grid();
  const Index n_sub = g.intervals(), d = inst.dimension();
  const Scalar p = inst.exponent();
  const auto& h = inst.inhomogeneity();
  const auto& data = inst.data();

  RowMatrix<Scalar> f0(n_sub, d);
  for (Index j = 0; j < n_sub; ++j)
    f0.row(j) = project(Vector<Scalar>(Vector<Scalar>::Zero(d)), field_eval(inst.field(), Instant::at_midpoint(j), h.midpoint(j)))
                    .transpose();
  Selection<Scalar> f(g, f0);

  // Strict bound |f_0|^p < gamma + eps_0 on the min-norm selection.
  std::vector<std::string> warnings;
  {
    const Scalar two_p = std::pow(Scalar(2), p);
    Scalar needed(0);
    for (Index j = 0; j < n_sub; ++j) {
      const Scalar a = data.alpha.midpoint(j), b = data.beta.midpoint(j);
      const Scalar gam = two_p * std::max(std::pow(b, p), std::pow(a, p) * h.midpoint(j).norm());
      needed = std::max(needed, std::pow(f.row(j).norm(), p) - gam);
    }
    const Scalar eps0 = epsilon / Scalar(2);
    if (!(needed < eps0)) {
      const Scalar enlarged = Scalar(2) * needed * Scalar(1.01) + Scalar(1e-12);
      warnings.push_back("min-norm selection misses |f0|^p < gamma + eps0; eps enlarged from " +
                         std::to_string(double(epsilon)) + " to " + std::to_string(double(enlarged)));
      epsilon = enlarged;
    }
  }

  SelectionLedger<Scalar> L = build_ledger(inst, epsilon, nmax);
  L.warnings.insert(L.warnings.end(), warnings.begin(), warnings.end());
  const Scalar T = g.horizon();

  SolveReport<Scalar> rep;
  auto x_prev = h;
  auto x = state_of(inst, f);
  auto record_increment = [&](Index n, const Trajectory<Scalar>& a, const Trajectory<Scalar>& b) {
    const Scalar inc = sup_norm(a - b);
    const Scalar bound = L.increment_series_term(n, T);
    L.increment.push_back(inc);
    L.increment_bound.push_back(bound);
    LedgerCheck<Scalar> c;
    c.n = n;
    c.worst_margin = bound * (Scalar(1) + Scalar(1e-9)) - inc;
    c.passed = c.worst_margin >= Scalar(0);
    L.increment_checks.push_back(c);
    return inc;
  };
  auto push_increment = [&](Scalar inc) {
    if (!rep.increments.empty() && rep.increments.back() > Scalar(1e-11))
      rep.ratios.emplace_back(int(rep.increments.size()) + 1, inc / rep.increments.back());
    rep.increments.push_back(inc);
    if (rep.converged_at < 0 && inc < opt.sup_tol) rep.converged_at = int(rep.increments.size()) - 1;
  };
  push_increment(record_increment(0, x, x_prev));

  int iter = 0;
  for (Index n = 1;; ++n) {
    const Selection<Scalar> f_next = gp_project_step(inst, f);
    ++iter;
    if (n <= nmax) {
      const Scalar one_over_p = Scalar(1) / p;
      Vector<Scalar> margin(n_sub);
      LedgerCheck<Scalar> c;
      c.n = n;
      // f_n on [t_j, t_{j+1}) is fixed by x_n on the closed subinterval (through
      // its average), so the nondecreasing beta_n is taken at t_{j+1}.
      const auto& bn = L.beta_n(n);
      auto bound_at = [&](Index j) { return data.alpha.midpoint(j) * std::pow(bn[j + 1], one_over_p); };
      for (Index j = 0; j < n_sub; ++j) {
        const Scalar bound = bound_at(j);
        margin(j) = bound * (Scalar(1) + Scalar(1e-9)) + Scalar(1e-14) - (f_next.row(j) - f.row(j)).norm();
        if (margin(j) < c.worst_margin) {
          c.worst_margin = margin(j);
          c.where = j;
        }
      }
      c.passed = c.worst_margin >= Scalar(0);
      L.property_iii.push_back(c);
      L.property_iii_margin.push_back(margin);
      if (!c.passed) {
        const Index j = c.where;
        throw LedgerViolation("property (iii) violated", "property_iii", long(n), long(j),
                              double((f_next.row(j) - f.row(j)).norm()),
                              double(bound_at(j)));
      }
    }
    f = f_next;
    x_prev = std::move(x);
    x = state_of(inst, f);
    const Scalar inc = n <= nmax ? record_increment(n, x, x_prev) : sup_norm(x - x_prev);
    push_increment(inc);
    const bool ledger_done = n >= nmax;
    const bool settled = rep.converged_at >= 0 && inc <= detail::rounding_floor(sup_norm(x));
    if ((ledger_done && settled) || iter >= opt.max_iter) break;
  }
  rep.iterations = iter;
  rep.converged = rep.converged_at >= 0;
  rep.fixed_point_defect = bielecki_norm(inst, f - gp_project_step(inst, f));
  rep.residual = nemytskii_residual(inst, x, f).aggregate;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(x), std::move(f), std::move(L), std::move(rep)};
}

template <typename Scalar>
struct PeriodicOptions {
  Scalar tol = Scalar(1e-8);  ///< outer increment threshold |x_{k+1} - x_k|
  int max_outer = 100;
  PicardOptions<Scalar> inner{};
};

template <typename Scalar>
struct PeriodicResult {
  Vector<Scalar> x0;
  Trajectory<Scalar> x;
  Selection<Scalar> u;
  Scalar smallness = Scalar(0);  ///< ||exp(-A T)||
  Scalar R = Scalar(0);          ///< ||k(T, .)||_q ||mu||_p
  std::vector<Scalar> outer_increments;
  std::vector<Scalar> phi_norms;
  bool phi_bound_held = true;
  bool converged = false;
  Scalar periodicity_defect = Scalar(0);  ///< |x(T) - x(0)|
  bool periodic = false;                  ///< defect <= 10 tol
};

/// T-periodic solution through the Poincare-like map P(x) = U(T) x + phi(x),
/// U(t) = exp(-A t), phi(x) = V(u_x)(T) where u_x solves the selection fixed
/// point with h = U(.) x. Inner solves are warm-started from the previous one so
/// the set-valued phi is followed along one continuous branch.
///
/// Requires a semigroup kernel with ||U(T)|| <= 1/2 and an integrable bound
/// ||F(t, x)||^+ <= mu(t) (`data().bound`); both violations throw
/// std::domain_error. A non-contracting outer loop is reported, not thrown.
template <typename Scalar>
PeriodicResult<Scalar> periodic_solve(const ProblemInstance<Scalar>& inst, const PeriodicOptions<Scalar>& opt = {},
                                      Vector<Scalar> x_start = {}) {
  const auto* A = inst.kernel().generator();
  if (!A) throw std::domain_error("periodic solve needs a semigroup kernel");
  if (!inst.data().bound) throw std::domain_error("periodic solve needs an integrable bound on F");
  const auto& g = inst.grid();
  const Index d = inst.dimension();
  const Scalar p = inst.exponent();

  std::vector<Matrix<Scalar>> U;
  U.reserve(std::size_t(g.nodes()));
  for (Index i = 0; i < g.nodes(); ++i) U.push_back(eval(inst.kernel(), g.node(i), Scalar(0)));
  PeriodicResult<Scalar> res{Vector<Scalar>::Zero(d), Trajectory<Scalar>::zero(g, d), Selection<Scalar>::zero(g, d), Scalar(0), Scalar(0), {}, {}, true, false, Scalar(0), false};
  res.smallness = operator_norm<Scalar>(U.back());
  if (res.smallness > Scalar(0.5)) throw std::domain_error("||exp(-A T)|| exceeds 1/2");

  const auto& mu = *inst.data().bound;
  const Scalar mu_p = std::pow(trapezoid_integrate(ScalarTable<Scalar>(g, mu.values().array().pow(p).matrix()), g.intervals()),
                               Scalar(1) / p);
  res.R = kernel_qnorm(inst.kernel(), g.intervals(), inst.conjugate(), g) * mu_p;

  auto inhomogeneity = [&](const Vector<Scalar>& x0) {
    RowMatrix<Scalar> v(g.nodes(), d);
    for (Index i = 0; i < g.nodes(); ++i) v.row(i) = (U[std::size_t(i)] * x0).transpose();
    return Trajectory<Scalar>(g, std::move(v));
  };

  Vector<Scalar> x = x_start.size() == d ? x_start : Vector<Scalar>::Zero(d);
  Selection<Scalar> warm = Selection<Scalar>::zero(g, d);
  const Scalar bound_tol = res.R * Scalar(1e-9) + Scalar(1e-12);
  for (int k = 0; k < opt.max_outer; ++k) {
    const auto inner = picard_solve(inst.with_inhomogeneity(inhomogeneity(x)), warm, opt.inner);
    const Vector<Scalar> phi = volterra_apply(inst, inner.u).row(g.intervals()).transpose();
    res.phi_norms.push_back(phi.norm());
    if (phi.norm() > res.R + bound_tol) res.phi_bound_held = false;
    const Vector<Scalar> next = U.back() * x + phi;
    const Scalar inc = (next - x).norm();
    res.outer_increments.push_back(inc);
    x = next;
    warm = inner.u;
    if (inc <= opt.tol) {
      res.converged = true;
      break;
    }
  }

  const auto final_inst = inst.with_inhomogeneity(inhomogeneity(x));
  const auto sol = picard_solve(final_inst, warm, opt.inner);
  res.x0 = x;
  res.x = sol.x;
  res.u = sol.u;
  res.periodicity_defect = (sol.x.row(g.intervals()) - sol.x.row(0)).norm();
  res.periodic = res.periodicity_defect <= Scalar(10) * opt.tol;
  return res;
}

}  // namespace volterra

#endif  // VOLTERRA_SOLVERS_HPP
