#ifndef VOLTERRA_CONVEXSETS_HPP
#define VOLTERRA_CONVEXSETS_HPP

#include "timebase.hpp"

#include <cstdint>
#include <numbers>
#include <random>
#include <variant>
#include <vector>

namespace volterra {

/// Unit vector in R^d. Support functions are evaluated along these.
template <typename Scalar>
class Direction {
 public:
  explicit Direction(const Vector<Scalar>& v) {
    const Scalar n = v.norm();
    if (!(n > Scalar(0)) || !std::isfinite(double(n))) throw std::invalid_argument("direction must be nonzero");
    e_ = v / n;
  }
  const Vector<Scalar>& vector() const { return e_; }
  Index dimension() const { return e_.size(); }

 private:
  Vector<Scalar> e_;
};

template <typename Scalar>
struct PointShape {
  Vector<Scalar> center;
};
template <typename Scalar>
struct BallShape {
  Vector<Scalar> center;
  Scalar radius;
};
template <typename Scalar>
struct BoxShape {
  Vector<Scalar> center;
  Vector<Scalar> half_widths;
};
template <typename Scalar>
struct SegmentShape {
  Vector<Scalar> a;
  Vector<Scalar> b;
};

/// Compact convex subset of R^d: a point, Euclidean ball, axis-aligned box or segment.
template <typename Scalar>
class ConvexRegion {
 public:
  using Shape = std::variant<PointShape<Scalar>, BallShape<Scalar>, BoxShape<Scalar>, SegmentShape<Scalar>>;

  static ConvexRegion point(Vector<Scalar> c) { return ConvexRegion(PointShape<Scalar>{std::move(c)}); }
  static ConvexRegion ball(Vector<Scalar> c, Scalar radius) {
    if (!(radius >= Scalar(0))) throw std::invalid_argument("ball radius must be nonnegative");
    return ConvexRegion(BallShape<Scalar>{std::move(c), radius});
  }
  static ConvexRegion box(Vector<Scalar> c, Vector<Scalar> half_widths) {
    if (c.size() != half_widths.size()) throw std::invalid_argument("box center/half-width dimension mismatch");
    if (!(half_widths.array() >= Scalar(0)).all()) throw std::invalid_argument("box half-widths must be nonnegative");
    return ConvexRegion(BoxShape<Scalar>{std::move(c), std::move(half_widths)});
  }
  static ConvexRegion segment(Vector<Scalar> a, Vector<Scalar> b) {
    if (a.size() != b.size()) throw std::invalid_argument("segment endpoint dimension mismatch");
    return ConvexRegion(SegmentShape<Scalar>{std::move(a), std::move(b)});
  }
  /// Scalar interval [lo, hi] as a one-dimensional box.
  static ConvexRegion interval(Scalar lo, Scalar hi) {
    if (!(lo <= hi)) throw std::invalid_argument("interval needs lo <= hi");
    return box(Vector<Scalar>::Constant(1, (lo + hi) / Scalar(2)), Vector<Scalar>::Constant(1, (hi - lo) / Scalar(2)));
  }

  const Shape& shape() const { return shape_; }

  Index dimension() const {
    return std::visit([](const auto& s) -> Index {
      using S = std::decay_t<decltype(s)>;
      if constexpr (std::is_same_v<S, SegmentShape<Scalar>>) return s.a.size();
      else return s.center.size();
    }, shape_);
  }

  /// Chebyshev-style center: the center for point/ball/box, the midpoint of a segment.
  Vector<Scalar> center() const {
    return std::visit([](const auto& s) -> Vector<Scalar> {
      using S = std::decay_t<decltype(s)>;
      if constexpr (std::is_same_v<S, SegmentShape<Scalar>>) return (s.a + s.b) / Scalar(2);
      else return s.center;
    }, shape_);
  }

  /// Largest distance from center() to a member.
  Scalar size() const {
    return std::visit([](const auto& s) -> Scalar {
      using S = std::decay_t<decltype(s)>;
      if constexpr (std::is_same_v<S, PointShape<Scalar>>) return Scalar(0);
      else if constexpr (std::is_same_v<S, BallShape<Scalar>>) return s.radius;
      else if constexpr (std::is_same_v<S, BoxShape<Scalar>>) return s.half_widths.norm();
      else return (s.b - s.a).norm() / Scalar(2);
    }, shape_);
  }

  ConvexRegion translated(const Vector<Scalar>& v) const {
    check_dim(v.size());
    return std::visit([&](const auto& s) -> ConvexRegion {
      using S = std::decay_t<decltype(s)>;
      S out = s;
      if constexpr (std::is_same_v<S, SegmentShape<Scalar>>) {
        out.a += v;
        out.b += v;
      } else {
        out.center += v;
      }
      return ConvexRegion(std::move(out));
    }, shape_);
  }

  /// Image under y -> a y.
  ConvexRegion scaled(Scalar a) const {
    return std::visit([&](const auto& s) -> ConvexRegion {
      using S = std::decay_t<decltype(s)>;
      S out = s;
      if constexpr (std::is_same_v<S, PointShape<Scalar>>) out.center *= a;
      else if constexpr (std::is_same_v<S, BallShape<Scalar>>) {
        out.center *= a;
        out.radius *= std::abs(a);
      } else if constexpr (std::is_same_v<S, BoxShape<Scalar>>) {
        out.center *= a;
        out.half_widths *= std::abs(a);
      } else {
        out.a *= a;
        out.b *= a;
      }
      return ConvexRegion(std::move(out));
    }, shape_);
  }

  /// Minkowski sum with a closed ball of the given radius. Only point and ball
  /// values stay inside the variant family.
  ConvexRegion inflated(Scalar radius) const {
    if (!(radius >= Scalar(0))) throw std::invalid_argument("inflation radius must be nonnegative");
    if (auto p = std::get_if<PointShape<Scalar>>(&shape_)) return ball(p->center, radius);
    if (auto b = std::get_if<BallShape<Scalar>>(&shape_)) return ball(b->center, b->radius + radius);
    throw std::domain_error("inflating a box or segment leaves the region family");
  }

  void check_dim(Index d) const {
    if (d != dimension()) throw std::invalid_argument("dimension mismatch");
  }

 private:
  explicit ConvexRegion(Shape s) : shape_(std::move(s)) {
    detail::require_finite(center(), "region");
  }
  Shape shape_;
};

/// sigma(e, S) = sup_{y in S} <e, y>, for any vector e (positively homogeneous).
template <typename Scalar>
Scalar support(const ConvexRegion<Scalar>& s, const Vector<Scalar>& e) {
  s.check_dim(e.size());
  return std::visit([&](const auto& v) -> Scalar {
    using S = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<S, PointShape<Scalar>>) return e.dot(v.center);
    else if constexpr (std::is_same_v<S, BallShape<Scalar>>) return e.dot(v.center) + v.radius * e.norm();
    else if constexpr (std::is_same_v<S, BoxShape<Scalar>>)
      return e.dot(v.center) + (v.half_widths.array() * e.array().abs()).sum();
    else return std::max(e.dot(v.a), e.dot(v.b));
  }, s.shape());
}

template <typename Scalar>
Scalar support(const ConvexRegion<Scalar>& s, const Direction<Scalar>& e) {
  return support(s, e.vector());
}

/// A maximiser of <e, .> over S. Ties resolve to the center coordinate (box)
/// or to the first endpoint (segment).
template <typename Scalar>
Vector<Scalar> support_point(const ConvexRegion<Scalar>& s, const Vector<Scalar>& e) {
  s.check_dim(e.size());
  return std::visit([&](const auto& v) -> Vector<Scalar> {
    using S = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<S, PointShape<Scalar>>) return v.center;
    else if constexpr (std::is_same_v<S, BallShape<Scalar>>) {
      const Scalar n = e.norm();
      if (n == Scalar(0)) return v.center;
      return v.center + (v.radius / n) * e;
    } else if constexpr (std::is_same_v<S, BoxShape<Scalar>>) {
      Vector<Scalar> y = v.center;
      for (Index i = 0; i < y.size(); ++i) {
        if (e(i) > Scalar(0)) y(i) += v.half_widths(i);
        else if (e(i) < Scalar(0)) y(i) -= v.half_widths(i);
      }
      return y;
    } else {
      return e.dot(v.b) > e.dot(v.a) ? v.b : v.a;
    }
  }, s.shape());
}

/// Euclidean metric projection onto S.
template <typename Scalar>
Vector<Scalar> project(const Vector<Scalar>& y, const ConvexRegion<Scalar>& s) {
  s.check_dim(y.size());
  return std::visit([&](const auto& v) -> Vector<Scalar> {
    using S = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<S, PointShape<Scalar>>) return v.center;
    else if constexpr (std::is_same_v<S, BallShape<Scalar>>) {
      const Vector<Scalar> off = y - v.center;
      const Scalar n = off.norm();
      if (n <= v.radius) return y;
      return v.center + (v.radius / n) * off;
    } else if constexpr (std::is_same_v<S, BoxShape<Scalar>>) {
      return y.cwiseMax(v.center - v.half_widths).cwiseMin(v.center + v.half_widths);
    } else {
      const Vector<Scalar> ab = v.b - v.a;
      const Scalar len2 = ab.squaredNorm();
      if (len2 == Scalar(0)) return v.a;
      const Scalar lambda = std::clamp((y - v.a).dot(ab) / len2, Scalar(0), Scalar(1));
      return v.a + lambda * ab;
    }
  }, s.shape());
}

template <typename Scalar>
Scalar distance(const Vector<Scalar>& y, const ConvexRegion<Scalar>& s) {
  return (y - project(y, s)).norm();
}

template <typename Scalar>
bool contains(const ConvexRegion<Scalar>& s, const Vector<Scalar>& y, Scalar tol = Scalar(0)) {
  return distance(y, s) <= tol;
}

/// ||S||^+ = sup_{y in S} |y|.
template <typename Scalar>
Scalar norm_plus(const ConvexRegion<Scalar>& s) {
  return std::visit([](const auto& v) -> Scalar {
    using S = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<S, PointShape<Scalar>>) return v.center.norm();
    else if constexpr (std::is_same_v<S, BallShape<Scalar>>) return v.center.norm() + v.radius;
    else if constexpr (std::is_same_v<S, BoxShape<Scalar>>)
      return (v.center.array().abs() + v.half_widths.array()).matrix().norm();
    else return std::max(v.a.norm(), v.b.norm());
  }, s.shape());
}

/// Extreme points for the polytope variants; empty for a nondegenerate ball.
/// Boxes above 20 dimensions are not enumerated.
template <typename Scalar>
std::vector<Vector<Scalar>> extreme_points(const ConvexRegion<Scalar>& s) {
  return std::visit([](const auto& v) -> std::vector<Vector<Scalar>> {
    using S = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<S, PointShape<Scalar>>) return {v.center};
    else if constexpr (std::is_same_v<S, BallShape<Scalar>>) {
      if (v.radius == Scalar(0)) return {v.center};
      return {};
    } else if constexpr (std::is_same_v<S, BoxShape<Scalar>>) {
      const Index d = v.center.size();
      if (d > 20) return {};
      std::vector<Vector<Scalar>> out;
      out.reserve(std::size_t(1) << d);
      for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << d); ++mask) {
        Vector<Scalar> p = v.center;
        for (Index i = 0; i < d; ++i) p(i) += ((mask >> i) & 1u) ? v.half_widths(i) : -v.half_widths(i);
        out.push_back(std::move(p));
      }
      return out;
    } else {
      return {v.a, v.b};
    }
  }, s.shape());
}

/// Fixed set of unit directions used for support-function sampling:
/// {+1, -1} in one dimension, 64 equally spaced angles in two, and in higher
/// dimensions the +-axes, the +-diagonals and a fixed-seed Gaussian cloud, 32 d in all.
template <typename Scalar>
std::vector<Vector<Scalar>> direction_net(Index d) {
  if (d < 1) throw std::invalid_argument("direction net dimension must be positive");
  std::vector<Vector<Scalar>> net;
  if (d == 1) {
    net.push_back(Vector<Scalar>::Constant(1, Scalar(1)));
    net.push_back(Vector<Scalar>::Constant(1, Scalar(-1)));
    return net;
  }
  if (d == 2) {
    for (int k = 0; k < 64; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 64.0;
      Vector<Scalar> e(2);
      e << Scalar(std::cos(a)), Scalar(std::sin(a));
      net.push_back(e);
    }
    return net;
  }
  for (Index i = 0; i < d; ++i) {
    net.push_back(Vector<Scalar>::Unit(d, i));
    net.push_back(-Vector<Scalar>::Unit(d, i));
  }
  net.push_back(Vector<Scalar>::Ones(d).normalized());
  net.push_back(-Vector<Scalar>::Ones(d).normalized());
  std::mt19937_64 rng(0x5eed0f5e7ULL);
  std::normal_distribution<double> gauss;
  const std::size_t target = std::size_t(32 * d);
  while (net.size() < target) {
    Vector<Scalar> e(d);
    for (Index i = 0; i < d; ++i) e(i) = Scalar(gauss(rng));
    if (e.norm() > Scalar(1e-3)) net.push_back(e.normalized());
  }
  return net;
}

template <typename Scalar>
struct ExcessValue {
  Scalar value;
  bool exact;            ///< false when sampled on a direction net
  std::size_t net_size;  ///< number of net directions used (0 when exact)
};

/// e(S1, S2) = sup_{x in S1} d(x, S2).
///
/// Exact when S1 has finitely many extreme points (the distance to a convex set
/// is convex, so its maximum over S1 sits at an extreme point), for box/box and
/// ball/ball via center offsets and size terms, and for ball/point. A ball
/// against a box or segment falls back to sup_e (sigma_S1(e) - sigma_S2(e))^+
/// over direction_net(d), which bounds the excess from below.
template <typename Scalar>
ExcessValue<Scalar> excess(const ConvexRegion<Scalar>& s1, const ConvexRegion<Scalar>& s2) {
  s1.check_dim(s2.dimension());
  const auto& a = s1.shape();
  const auto& b = s2.shape();
  if (auto x = std::get_if<BoxShape<Scalar>>(&a)) {
    if (auto y = std::get_if<BoxShape<Scalar>>(&b)) {
      const auto per_axis =
          ((x->center - y->center).array().abs() + x->half_widths.array() - y->half_widths.array()).max(Scalar(0));
      return {per_axis.matrix().norm(), true, 0};
    }
  }
  if (auto x = std::get_if<BallShape<Scalar>>(&a)) {
    if (auto y = std::get_if<BallShape<Scalar>>(&b))
      return {std::max(Scalar(0), (x->center - y->center).norm() + x->radius - y->radius), true, 0};
    if (auto y = std::get_if<PointShape<Scalar>>(&b)) return {(x->center - y->center).norm() + x->radius, true, 0};
  }
  const auto ext = extreme_points(s1);
  if (!ext.empty()) {
    Scalar worst(0);
    for (const auto& p : ext) worst = std::max(worst, distance(p, s2));
    return {worst, true, 0};
  }
  const auto net = direction_net<Scalar>(s1.dimension());
  Scalar worst(0);
  for (const auto& e : net) worst = std::max(worst, support(s1, e) - support(s2, e));
  return {worst, false, net.size()};
}

template <typename Scalar>
ExcessValue<Scalar> hausdorff(const ConvexRegion<Scalar>& s1, const ConvexRegion<Scalar>& s2) {
  const auto f = excess(s1, s2);
  const auto b = excess(s2, s1);
  return {std::max(f.value, b.value), f.exact && b.exact, std::max(f.net_size, b.net_size)};
}

/// Smallest axis-aligned box containing the given points.
template <typename Scalar>
ConvexRegion<Scalar> bounding_box(const std::vector<Vector<Scalar>>& pts) {
  if (pts.empty()) throw std::invalid_argument("bounding box of an empty set");
  Vector<Scalar> lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return ConvexRegion<Scalar>::box((lo + hi) / Scalar(2), (hi - lo) / Scalar(2));
}

}  // namespace volterra

#endif  // VOLTERRA_CONVEXSETS_HPP
