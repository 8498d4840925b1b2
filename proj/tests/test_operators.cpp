#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <volterra/catalog.hpp>
#include <volterra/operators.hpp>

#include <random>

using namespace volterra;
using S = double;
using M = Matrix<S>;
using V = Vector<S>;

namespace {

ProblemInstance<S> scalar_instance(const Grid<S>& g, KernelOperator<S> k, SetField<S> F, S p = 1.0) {
  auto data = derive_field_data(F);
  return ProblemInstance<S>(std::move(k), std::move(F), std::move(data), Trajectory<S>::zero(g, 1), p);
}

Selection<S> random_selection(const Grid<S>& g, Index d, std::mt19937_64& rng, S scale = 1.0) {
  std::normal_distribution<S> nd;
  RowMatrix<S> r(g.intervals(), d);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = scale * nd(rng);
  return Selection<S>(g, r);
}

const M one = M::Identity(1, 1);

}  // namespace

TEST_CASE("volterra_apply") {
  const Grid<S> g(1.0, 256);
  const auto inst = reference_interval<S>(256);
  CHECK(volterra_apply(inst, Selection<S>::zero(g, 1)).values().isZero(0));
  const auto t = volterra_apply(inst, Selection<S>::constant(g, V::Ones(1)));
  for (Index i = 0; i <= 256; ++i) CHECK(t.row(i)(0) == doctest::Approx(g.node(i)).epsilon(1e-14));

  const auto damped = scalar_instance(g, KernelOperator<S>::semigroup(one), SetField<S>::linear(g, M::Zero(1, 1), V::Zero(1)));
  const auto e = volterra_apply(damped, Selection<S>::constant(g, V::Ones(1)));
  S worst = 0;
  for (Index i = 0; i <= 256; ++i) worst = std::max(worst, std::abs(e.row(i)(0) - (1 - std::exp(-g.node(i)))));
  CHECK(worst <= 5e-5);

  CHECK_THROWS(volterra_apply(inst, Selection<S>::zero(Grid<S>(1.0, 128), 1)));
}

TEST_CASE("volterra_apply is linear") {
  std::mt19937_64 rng(12);
  for (const auto& entry : builtin_catalog<S>()) {
    const auto inst = entry.build(64);
    const auto& g = inst.grid();
    const auto w1 = random_selection(g, inst.dimension(), rng), w2 = random_selection(g, inst.dimension(), rng);
    const auto lhs = volterra_apply(inst, 2.5 * w1 + -0.75 * w2);
    const auto rhs = 2.5 * volterra_apply(inst, w1) + -0.75 * volterra_apply(inst, w2);
    CHECK((lhs - rhs).values().norm() <= 1e-13 * std::max(1.0, lhs.values().norm()));
  }
}

TEST_CASE("semigroup assembly matches direct evaluation") {
  const Grid<S> g(1.0, 32);
  M a(2, 2);
  a << 1, 0.3, -0.3, 1;
  const auto k = KernelOperator<S>::semigroup(a);
  const auto inst = semigroup_ball<S>(32);
  for (Index i = 1; i <= 32; i += 5)
    for (Index j = 0; j < i; ++j)
      CHECK((inst.volterra_matrix().block(2 * i, 2 * j, 2, 2) - g.step() * eval(k, g.node(i), g.midpoint(j))).norm() <= 1e-14);
}

TEST_CASE("nemytskii_residual") {
  const Grid<S> g(1.0, 64);
  SUBCASE("unit ball contains 0") {
    const auto inst = scalar_instance(g, KernelOperator<S>::constant(one), SetField<S>::affine_ball(g, M::Zero(1, 1), V::Zero(1), 1.0));
    CHECK(nemytskii_residual(inst, Trajectory<S>::zero(g, 1), Selection<S>::zero(g, 1)).aggregate == 0.0);
  }
  SUBCASE("point field, w = 1") {
    const auto inst = scalar_instance(g, KernelOperator<S>::constant(one), SetField<S>::linear(g, M::Zero(1, 1), V::Zero(1)));
    const auto r = nemytskii_residual(inst, Trajectory<S>::zero(g, 1), Selection<S>::constant(g, V::Ones(1)));
    CHECK(r.aggregate == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((r.pointwise.array() == 1.0).all());
  }
  SUBCASE("box violated by a margin on half the subintervals") {
    const auto F = SetField<S>::affine_box(g, one, V::Zero(1), V::Constant(1, 0.25));
    const auto inst = scalar_instance(g, KernelOperator<S>::constant(one), F);
    const auto x = Trajectory<S>::sample(g, 1, [](S t) { return V::Constant(1, std::sin(3 * t)); });
    const S m = 0.3;
    RowMatrix<S> w(64, 1);
    for (Index j = 0; j < 64; ++j) w(j, 0) = x.midpoint(j)(0) + (j % 2 ? 0.25 + m : 0.1);
    const auto r = nemytskii_residual(inst, x, Selection<S>(g, w));
    // direct sum: 32 subintervals of width 1/64 at distance m
    CHECK(r.aggregate == doctest::Approx(m * 1.0 / 2).epsilon(1e-12));
  }
}

TEST_CASE("gp_project_step") {
  const Grid<S> g(1.0, 64);
  const auto inst = reference_interval<S>(64);
  SUBCASE("clamp example: u = 5") {
    const auto u = Selection<S>::constant(g, V::Constant(1, 5.0));
    const auto up = gp_project_step(inst, u);
    for (Index j = 0; j < 64; ++j) {
      const S c = 5 * g.midpoint(j);  // (V u)(m_j) = 5 m_j exactly
      CHECK(up.row(j)(0) == doctest::Approx(std::clamp(5.0, c - 1, c + 1)).epsilon(1e-14));
    }
  }
  SUBCASE("feasible input is a fixed point") {
    const auto u = Selection<S>::zero(g, 1);
    CHECK(nemytskii_residual(inst, state_of(inst, u), u).aggregate == 0.0);
    CHECK((gp_project_step(inst, u) - u).values().isZero(0));
  }
  SUBCASE("point field collapses everything") {
    const auto pt = scalar_instance(g, KernelOperator<S>::constant(one), SetField<S>::linear(g, M::Zero(1, 1), V::Zero(1)));
    std::mt19937_64 rng(1);
    CHECK(gp_project_step(pt, random_selection(g, 1, rng)).values().isZero(0));
  }
  SUBCASE("projection step output is always feasible") {
    std::mt19937_64 rng(6);
    for (const auto& entry : builtin_catalog<S>()) {
      const auto ci = entry.build(64);
      for (int rep = 0; rep < 5; ++rep) {
        const auto u = random_selection(ci.grid(), ci.dimension(), rng, 3.0);
        const auto up = gp_project_step(ci, u);
        CHECK(nemytskii_residual(ci, state_of(ci, u), up).aggregate <= 1e-12);
      }
    }
  }
}

TEST_CASE("contraction_ratio_probe") {
  const Grid<S> g(1.0, 256);
  const auto inst = reference_interval<S>(256);
  CHECK_THROWS_AS(contraction_ratio_probe(inst, Selection<S>::zero(g, 1), Selection<S>::zero(g, 1)), std::invalid_argument);

  const auto pt = scalar_instance(g, KernelOperator<S>::constant(one), SetField<S>::linear(g, M::Zero(1, 1), V::Zero(1)));
  CHECK(contraction_ratio_probe(pt, Selection<S>::constant(g, V::Ones(1)), Selection<S>::zero(g, 1)) == 0.0);

  const S ratio = contraction_ratio_probe(inst, Selection<S>::constant(g, V::Ones(1)), Selection<S>::zero(g, 1));
  CHECK(ratio <= 0.5 + 0.05);
  CHECK(ratio > 0.0);
  // independent quadrature: pointwise d_H = t, weights e^{-2 t} (alpha = 1, M = 1, p = 1)
  S num = 0, den = 0;
  for (Index j = 0; j < 256; ++j) {
    const S m = g.midpoint(j);
    num += g.step() * m * std::exp(-2 * m);
    den += g.step() * std::exp(-2 * m);
  }
  CHECK(ratio == doctest::Approx(num / den).epsilon(1e-4));
}

TEST_CASE("selection_excess and the two-variable bound") {
  const auto inst = shear_box<S>(128);
  const auto& g = inst.grid();
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const auto u1 = random_selection(g, 2, rng), u2 = random_selection(g, 2, rng);
    const auto h1 = inst.inhomogeneity();
    const auto h2 = h1 + Trajectory<S>::constant(g, V::Constant(2, 0.1 * rep));
    const auto d = selection_excess(inst, h1, u1, h2, u2);
    CHECK(d.exact);
    CHECK(d.value == std::max(d.forward, d.backward));
    const auto swapped = selection_excess(inst, h2, u2, h1, u1);
    CHECK(swapped.forward == d.backward);
    const S scale = std::max(sup_norm(h1 - h2), bielecki_norm(inst, u1 - u2));
    CHECK(d.value <= two_variable_bound(inst, h1, u1, h2, u2) + 0.05 * scale);
  }
}
