#ifndef VOLTERRA_CATALOG_HPP
#define VOLTERRA_CATALOG_HPP

#include "operators.hpp"

#include <functional>
#include <string>
#include <vector>

namespace volterra {

/// Reference problem: F(t, x) = [x - 1, x + 1], k = 1, h = 0 on [0, T].
template <typename Scalar>
ProblemInstance<Scalar> reference_interval(Index N, Scalar p = Scalar(1), Scalar T = Scalar(1)) {
  const Grid<Scalar> g(T, N);
  const Matrix<Scalar> one = Matrix<Scalar>::Identity(1, 1);
  auto F = SetField<Scalar>::affine_box(g, one, Vector<Scalar>::Zero(1), Vector<Scalar>::Ones(1));
  auto data = derive_field_data(F);
  return ProblemInstance<Scalar>(KernelOperator<Scalar>::constant(one), std::move(F), std::move(data),
                                 Trajectory<Scalar>::zero(g, 1), p);
}

/// x = h + lambda int x: F = {lambda x}, k = 1, h = x0. Solution x0 e^{lambda t}.
template <typename Scalar>
ProblemInstance<Scalar> exponential_growth(Index N, Scalar lambda = Scalar(1), Scalar x0 = Scalar(1), Scalar T = Scalar(1)) {
  const Grid<Scalar> g(T, N);
  const Matrix<Scalar> one = Matrix<Scalar>::Identity(1, 1);
  auto F = SetField<Scalar>::linear(g, lambda * one, Vector<Scalar>::Zero(1));
  auto data = derive_field_data(F);
  return ProblemInstance<Scalar>(KernelOperator<Scalar>::constant(one), std::move(F), std::move(data),
                                 Trajectory<Scalar>::constant(g, Vector<Scalar>::Constant(1, x0)), Scalar(1));
}

/// Planar box field with a shear: F(t, x) = C x + (2, 0) + [-r, r], C = [[0, 1/2], [-1/2, 0]].
template <typename Scalar>
ProblemInstance<Scalar> shear_box(Index N, Scalar p = Scalar(1)) {
  const Grid<Scalar> g(Scalar(1), N);
  Matrix<Scalar> C(2, 2);
  C << Scalar(0), Scalar(0.5), Scalar(-0.5), Scalar(0);
  Vector<Scalar> r(2);
  r << Scalar(1), Scalar(0.5);
  Vector<Scalar> offset(2);
  offset << Scalar(2), Scalar(0);
  auto F = SetField<Scalar>::affine_box(g, C, offset, r);
  auto data = derive_field_data(F);
  auto h = Trajectory<Scalar>::sample(g, 2, [](Scalar t) {
    Vector<Scalar> v(2);
    v << std::cos(t), std::sin(t);
    return v;
  });
  return ProblemInstance<Scalar>(KernelOperator<Scalar>::constant(Matrix<Scalar>::Identity(2, 2)), std::move(F),
                                 std::move(data), std::move(h), p);
}

/// Damped ball field: k(t, s) = exp(-A(t - s)), F(t, x) = B(x/4 + (1, 0), 1/2).
template <typename Scalar>
ProblemInstance<Scalar> semigroup_ball(Index N, Scalar p = Scalar(1)) {
  const Grid<Scalar> g(Scalar(1), N);
  Matrix<Scalar> A(2, 2);
  A << Scalar(1), Scalar(0.3), Scalar(-0.3), Scalar(1);
  auto F = SetField<Scalar>::affine_ball(g, Scalar(0.25) * Matrix<Scalar>::Identity(2, 2), Vector<Scalar>::Unit(2, 0), Scalar(0.5));
  auto data = derive_field_data(F);
  return ProblemInstance<Scalar>(KernelOperator<Scalar>::semigroup(A), std::move(F), std::move(data),
                                 Trajectory<Scalar>::constant(g, Vector<Scalar>::Ones(2)), p);
}

/// Singleton f(t, x) = sin(x)/2 + 1/4 with k = 1, h(t) = t.
template <typename Scalar>
ProblemInstance<Scalar> sine_field(Index N) {
  const Grid<Scalar> g(Scalar(1), N);
  auto F = SetField<Scalar>::sine(g, Scalar(0.5), Vector<Scalar>::Constant(1, Scalar(0.25)));
  auto data = derive_field_data(F);
  return ProblemInstance<Scalar>(KernelOperator<Scalar>::constant(Matrix<Scalar>::Identity(1, 1)), std::move(F),
                                 std::move(data), Trajectory<Scalar>::sample(g, 1, [](Scalar t) { return Vector<Scalar>::Constant(1, t); }),
                                 Scalar(1));
}

/// Separable k(t, s) = e^{-(t - s)} = e^{-t} e^{s} with F(t, x) = [x/2 + 1, x/2 + 2].
template <typename Scalar>
ProblemInstance<Scalar> separable_box(Index N, Scalar p = Scalar(1)) {
  const Grid<Scalar> g(Scalar(1), N);
  const Matrix<Scalar> one = Matrix<Scalar>::Identity(1, 1);
  SeparableTerm<Scalar> term{one, {Scalar(1), Scalar(0), Scalar(-1)}, {Scalar(1), Scalar(0), Scalar(1)}};
  auto F = SetField<Scalar>::affine_box(g, Scalar(0.5) * one, Vector<Scalar>::Constant(1, Scalar(1.5)), Vector<Scalar>::Constant(1, Scalar(0.5)));
  auto data = derive_field_data(F);
  return ProblemInstance<Scalar>(KernelOperator<Scalar>::separable({term}), std::move(F), std::move(data),
                                 Trajectory<Scalar>::zero(g, 1), p);
}

template <typename Scalar>
struct CatalogEntry {
  std::string name;
  std::function<ProblemInstance<Scalar>(Index)> build;
};

/// Built-in instances with certified field data.
template <typename Scalar>
std::vector<CatalogEntry<Scalar>> builtin_catalog() {
  return {
      {"reference-p1", [](Index n) { return reference_interval<Scalar>(n, Scalar(1)); }},
      {"reference-p2", [](Index n) { return reference_interval<Scalar>(n, Scalar(2)); }},
      {"exponential", [](Index n) { return exponential_growth<Scalar>(n); }},
      {"shear-box", [](Index n) { return shear_box<Scalar>(n); }},
      {"semigroup-ball", [](Index n) { return semigroup_ball<Scalar>(n); }},
      {"sine", [](Index n) { return sine_field<Scalar>(n); }},
      {"separable-box", [](Index n) { return separable_box<Scalar>(n); }},
  };
}

}  // namespace volterra

#endif  // VOLTERRA_CATALOG_HPP
