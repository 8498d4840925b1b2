#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <volterra/kernels.hpp>

#include <unsupported/Eigen/MatrixFunctions>

#include <random>

using namespace volterra;
using S = double;
using M = Matrix<S>;

namespace {

M mat2(S a, S b, S c, S d) {
  M m(2, 2);
  m << a, b, c, d;
  return m;
}

// k(t, s) = (t - s) I as a two-term separable kernel.
KernelOperator<S> lag_kernel(Index d) {
  const M I = M::Identity(d, d);
  return KernelOperator<S>::separable({{I, {0, 1, 0}, {1, 0, 0}}, {-I, {1, 0, 0}, {0, 1, 0}}});
}

}  // namespace

TEST_CASE("eval") {
  const auto zero = KernelOperator<S>::semigroup(M::Zero(3, 3));
  CHECK(eval(zero, 0.7, 0.2) == M::Identity(3, 3));
  const auto unit = KernelOperator<S>::semigroup(M::Identity(2, 2));
  CHECK((eval(unit, 1.5, 0.5) - std::exp(-1.0) * M::Identity(2, 2)).norm() < 1e-15);
  const auto rot = KernelOperator<S>::semigroup(mat2(0, -1, 1, 0));
  const S th = M_PI / 2;
  // exp(-A th) with A = [[0,-1],[1,0]] is rotation by -th
  const M expect = mat2(std::cos(th), std::sin(th), -std::sin(th), std::cos(th));
  CHECK((eval(rot, th, 0.0) - expect).norm() < 1e-14);
  CHECK_THROWS_AS(eval(unit, 0.5, 0.6), std::domain_error);
  CHECK_THROWS_AS(eval(unit, 0.5, -0.1), std::domain_error);
}

TEST_CASE("matrix exponential agrees with an independent implementation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<S> nd;
  for (int rep = 0; rep < 50; ++rep) {
    const Index d = 1 + Index(rng() % 4);
    M a(d, d);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = 2 * nd(rng);
    const M ref = a.exp();
    CHECK((matrix_exponential<S>(a) - ref).norm() <= 1e-11 * std::max(1.0, ref.norm()));
  }
}

TEST_CASE("semigroup law on the grid") {
  std::mt19937_64 rng(8);
  std::normal_distribution<S> nd;
  const Grid<S> g(1.0, 16);
  for (int rep = 0; rep < 20; ++rep) {
    M a(2, 2);
    for (Index i = 0; i < 4; ++i) a.data()[i] = nd(rng);
    a *= 10.0 / std::max(1.0, operator_norm<S>(a)) * 0.9;  // ||A|| T <= 10
    const auto k = KernelOperator<S>::semigroup(a);
    for (Index i = 0; i <= 16; i += 3)
      for (Index r = 0; r <= i; r += 2)
        for (Index j = 0; j <= r; ++j) {
          const M lhs = eval(k, g.node(i), g.node(j));
          const M rhs = eval(k, g.node(i), g.node(r)) * eval(k, g.node(r), g.node(j));
          CHECK((lhs - rhs).norm() <= 1e-9 * std::max(1.0, lhs.norm()));
        }
  }
}

TEST_CASE("kernel_qnorm") {
  const Grid<S> g(1.0, 64);
  const auto id = KernelOperator<S>::constant(M::Identity(2, 2));
  CHECK(kernel_qnorm(id, 64, infinity<S>(), g) == 1.0);
  CHECK(kernel_qnorm(id, 64, 2.0, g) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(kernel_qnorm(id, 16, 2.0, g) == doctest::Approx(std::sqrt(0.25)).epsilon(1e-14));
  for (S a : {0.5, 3.0}) {
    const auto k = KernelOperator<S>::semigroup(a * M::Identity(2, 2));
    for (Index i : {0, 7, 64}) CHECK(kernel_qnorm(k, i, infinity<S>(), g) == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(kernel_qnorm(id, 65, 2.0, g), std::out_of_range);
  CHECK_THROWS_AS(kernel_qnorm(id, 3, 1.0, g), std::invalid_argument);

  SUBCASE("monotone in t for a normal generator with nonnegative spectrum") {
    const auto k = KernelOperator<S>::semigroup(mat2(1, 0.3, -0.3, 1));
    S prev = 0;
    for (Index i = 0; i <= 64; ++i) {
      const S v = kernel_qnorm(k, i, 2.0, g);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
    // closed form int_0^1 e^{-2 s} ds for the slice at t = 1
    CHECK(prev == doctest::Approx(std::sqrt((1 - std::exp(-2.0)) / 2)).epsilon(1e-4));
  }
}

TEST_CASE("big_M") {
  const Grid<S> g(1.0, 64);
  CHECK(big_M(KernelOperator<S>::constant(M::Zero(1, 1)), 1.0, g) == 1.0);
  CHECK(big_M(KernelOperator<S>::constant(M::Identity(1, 1)), 1.0, g) == 1.0);
  CHECK(big_M(KernelOperator<S>::constant(2 * M::Identity(2, 2)), 2.0, g) == doctest::Approx(4.0).epsilon(1e-13));
  std::mt19937_64 rng(1);
  std::normal_distribution<S> nd;
  for (int rep = 0; rep < 20; ++rep) {
    M a(2, 2);
    for (Index i = 0; i < 4; ++i) a.data()[i] = nd(rng);
    CHECK(big_M(KernelOperator<S>::semigroup(a), 1.0 + (rep % 3), g) >= 1.0);
  }
}

TEST_CASE("lint_kernel") {
  const Grid<S> g(1.0, 32);
  SUBCASE("identity with mu = 0 passes everything") {
    const auto rep = lint_kernel(KernelOperator<S>::constant(M::Identity(2, 2)), g, ScalarTable<S>::constant(g, 0.0));
    CHECK(rep.passed());
    CHECK(rep.verdicts.size() == 4);
    CHECK(rep.verdict("K4").status == LintStatus::pass);
    CHECK(rep.verdict("K3").status == LintStatus::pass);
  }
  SUBCASE("(t - s) I: derivative bounded, diagonal singular") {
    const auto rep = lint_kernel(lag_kernel(2), g, ScalarTable<S>::constant(g, 1.0));
    CHECK(rep.verdict("K4").status == LintStatus::pass);
    CHECK(rep.verdict("K3").status == LintStatus::fail);
    CHECK_FALSE(rep.passed());
  }
  SUBCASE("semigroup with the exponential bound") {
    const M a = mat2(0.5, -1, 2, 0.1);
    const S na = operator_norm<S>(a);
    const auto rep = lint_kernel(KernelOperator<S>::semigroup(a), g, ScalarTable<S>::constant(g, na * std::exp(na * 1.0)));
    CHECK(rep.verdict("K4").status == LintStatus::pass);
    // brute check of the bound with the closed-form derivative -A exp(-A(t-s))
    for (Index i = 0; i <= 32; ++i)
      for (Index j = 0; j <= i; ++j)
        CHECK(operator_norm<S>(M(-a * (-(g.node(i) - g.node(j)) * a).exp())) <= na * std::exp(na));
  }
  SUBCASE("a too-small mu fails with a witness inside the triangle") {
    const auto rep = lint_kernel(lag_kernel(1), g, ScalarTable<S>::constant(g, 0.5));
    const auto& v = rep.verdict("K4");
    CHECK(v.status == LintStatus::fail);
    CHECK(v.s <= v.t);
    CHECK(v.worst_margin == doctest::Approx(-0.5).epsilon(1e-6));
  }
  SUBCASE("continuity probes are only sample-consistent") {
    const auto rep = lint_kernel(KernelOperator<S>::semigroup(M::Identity(1, 1)), g, ScalarTable<S>::constant(g, std::exp(1.0)));
    CHECK(rep.verdict("K2").status == LintStatus::sample_consistent);
    CHECK(rep.verdict("K6").status == LintStatus::sample_consistent);
  }
}

TEST_CASE("derivative_bound dominates the finite differences") {
  const Grid<S> g(1.0, 32);
  for (const auto& k : {KernelOperator<S>::constant(M::Identity(2, 2)), KernelOperator<S>::semigroup(mat2(1, 0.3, -0.3, 1)),
                        KernelOperator<S>::separable({{M::Identity(2, 2), {1, 0.5, -1}, {1, 0, 1}}})}) {
    const auto mu = derivative_bound(k, g);
    CHECK(lint_kernel(k, g, mu).verdict("K4").status == LintStatus::pass);
  }
}
