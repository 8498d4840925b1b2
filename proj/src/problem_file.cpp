#include "app.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace volterra::app {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ParseError(where + ": " + what); }

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
}

const json& need(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where, std::string("missing '") + key + "'");
  return obj.at(key);
}

Real number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const Real x = v.get<Real>();
  if (!std::isfinite(x)) fail(where, "number is not finite");
  return x;
}

Vector<Real> vec(const json& v, Index d, const std::string& where) {
  if (v.is_number() && d == 1) return Vector<Real>::Constant(1, number(v, where));
  if (!v.is_array() || Index(v.size()) != d) fail(where, "expected " + std::to_string(d) + " numbers");
  Vector<Real> out(d);
  for (Index i = 0; i < d; ++i) out(i) = number(v[std::size_t(i)], where);
  return out;
}

Matrix<Real> mat(const json& v, Index d, const std::string& where) {
  if (v.is_number() && d == 1) return Matrix<Real>::Constant(1, 1, number(v, where));
  if (!v.is_array() || Index(v.size()) != d) fail(where, "expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
  Matrix<Real> out(d, d);
  for (Index i = 0; i < d; ++i) out.row(i) = vec(v[std::size_t(i)], d, where).transpose();
  return out;
}

bool is_table(const json& v) { return v.is_object() && v.contains("table"); }

const json& table_rows(const json& v, const Grid<Real>& g, const std::string& where) {
  only_keys(v, where, {"table"});
  const auto& rows = v.at("table");
  if (!rows.is_array() || Index(rows.size()) != g.nodes())
    fail(where, "table needs " + std::to_string(g.nodes()) + " node rows");
  return rows;
}

/// Node table of vectors: a constant vector or {"table": [...]}.
RowMatrix<Real> vec_table(const json& v, const Grid<Real>& g, Index d, const std::string& where) {
  RowMatrix<Real> out(g.nodes(), d);
  if (is_table(v)) {
    const auto& rows = table_rows(v, g, where);
    for (Index i = 0; i < g.nodes(); ++i) out.row(i) = vec(rows[std::size_t(i)], d, where).transpose();
  } else {
    out = vec(v, d, where).transpose().replicate(g.nodes(), 1);
  }
  return out;
}

std::vector<Matrix<Real>> mat_table(const json& v, const Grid<Real>& g, Index d, const std::string& where) {
  if (!is_table(v)) return std::vector<Matrix<Real>>(std::size_t(g.nodes()), mat(v, d, where));
  const auto& rows = table_rows(v, g, where);
  std::vector<Matrix<Real>> out;
  for (const auto& r : rows) out.push_back(mat(r, d, where));
  return out;
}

ScalarTable<Real> scalar_table(const json& v, const Grid<Real>& g, const std::string& where) {
  if (!is_table(v)) return ScalarTable<Real>::constant(g, number(v, where));
  const auto& rows = table_rows(v, g, where);
  Vector<Real> out(g.nodes());
  for (Index i = 0; i < g.nodes(); ++i) out(i) = number(rows[std::size_t(i)], where);
  return ScalarTable<Real>(g, out);
}

AffineExpFactor<Real> factor(const json& v, const std::string& where) {
  only_keys(v, where, {"c0", "c1", "rate"});
  AffineExpFactor<Real> f;
  if (v.contains("c0")) f.c0 = number(v.at("c0"), where + ".c0");
  if (v.contains("c1")) f.c1 = number(v.at("c1"), where + ".c1");
  if (v.contains("rate")) f.rate = number(v.at("rate"), where + ".rate");
  return f;
}

KernelOperator<Real> parse_kernel(const json& k, Index d) {
  const std::string type = need(k, "type", "kernel").get<std::string>();
  if (type == "constant") {
    only_keys(k, "kernel", {"type", "matrix", "mu"});
    return KernelOperator<Real>::constant(mat(need(k, "matrix", "kernel"), d, "kernel.matrix"));
  }
  if (type == "semigroup") {
    only_keys(k, "kernel", {"type", "generator", "mu"});
    return KernelOperator<Real>::semigroup(mat(need(k, "generator", "kernel"), d, "kernel.generator"));
  }
  if (type == "separable") {
    only_keys(k, "kernel", {"type", "terms", "mu"});
    const auto& terms = need(k, "terms", "kernel");
    if (!terms.is_array() || terms.empty()) fail("kernel.terms", "expected a nonempty list");
    std::vector<SeparableTerm<Real>> out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const std::string w = "kernel.terms[" + std::to_string(i) + "]";
      only_keys(terms[i], w, {"coefficient", "t_factor", "s_factor"});
      out.push_back({mat(need(terms[i], "coefficient", w), d, w + ".coefficient"),
                     factor(need(terms[i], "t_factor", w), w + ".t_factor"),
                     factor(need(terms[i], "s_factor", w), w + ".s_factor")});
    }
    return KernelOperator<Real>::separable(std::move(out));
  }
  fail("kernel.type", "unknown kernel type '" + type + "'");
}

SetField<Real> parse_field(const json& f, const Grid<Real>& g, Index d) {
  const std::string type = need(f, "type", "field").get<std::string>();
  if (type == "box") {
    only_keys(f, "field", {"type", "C", "d", "r"});
    const auto C = f.contains("C") ? mat_table(f.at("C"), g, d, "field.C")
                                   : std::vector<Matrix<Real>>(std::size_t(g.nodes()), Matrix<Real>::Zero(d, d));
    const auto off = f.contains("d") ? vec_table(f.at("d"), g, d, "field.d") : RowMatrix<Real>(RowMatrix<Real>::Zero(g.nodes(), d));
    return SetField<Real>::affine_box(g, C, off, vec_table(need(f, "r", "field"), g, d, "field.r"));
  }
  if (type == "ball") {
    only_keys(f, "field", {"type", "C", "d", "rho"});
    const auto C = f.contains("C") ? mat_table(f.at("C"), g, d, "field.C")
                                   : std::vector<Matrix<Real>>(std::size_t(g.nodes()), Matrix<Real>::Zero(d, d));
    const auto off = f.contains("d") ? vec_table(f.at("d"), g, d, "field.d") : RowMatrix<Real>(RowMatrix<Real>::Zero(g.nodes(), d));
    return SetField<Real>::affine_ball(g, C, off, scalar_table(need(f, "rho", "field"), g, "field.rho").values());
  }
  if (type == "point") {
    only_keys(f, "field", {"type", "C", "d"});
    const auto C = f.contains("C") ? mat_table(f.at("C"), g, d, "field.C")
                                   : std::vector<Matrix<Real>>(std::size_t(g.nodes()), Matrix<Real>::Zero(d, d));
    const auto off = f.contains("d") ? vec_table(f.at("d"), g, d, "field.d") : RowMatrix<Real>(RowMatrix<Real>::Zero(g.nodes(), d));
    return SetField<Real>::affine_box(g, C, off, RowMatrix<Real>::Zero(g.nodes(), d));
  }
  if (type == "linear") {
    only_keys(f, "field", {"type", "L", "b"});
    return SetField<Real>::linear(g, mat(need(f, "L", "field"), d, "field.L"),
                                  f.contains("b") ? vec(f.at("b"), d, "field.b") : Vector<Real>(Vector<Real>::Zero(d)));
  }
  if (type == "sine") {
    only_keys(f, "field", {"type", "amplitude", "b"});
    return SetField<Real>::sine(g, number(need(f, "amplitude", "field"), "field.amplitude"),
                                f.contains("b") ? vec(f.at("b"), d, "field.b") : Vector<Real>(Vector<Real>::Zero(d)));
  }
  fail("field.type", "unknown field type '" + type + "'");
}

Trajectory<Real> parse_h(const json& h, const Grid<Real>& g, Index d) {
  const std::string type = need(h, "type", "h").get<std::string>();
  if (type == "constant") {
    only_keys(h, "h", {"type", "value"});
    return Trajectory<Real>::constant(g, vec(need(h, "value", "h"), d, "h.value"));
  }
  if (type == "affine") {
    only_keys(h, "h", {"type", "offset", "slope"});
    const auto a = vec(need(h, "offset", "h"), d, "h.offset"), b = vec(need(h, "slope", "h"), d, "h.slope");
    return Trajectory<Real>::sample(g, d, [&](Real t) { return Vector<Real>(a + t * b); });
  }
  if (type == "harmonic") {
    only_keys(h, "h", {"type", "cos", "sin", "omega"});
    const auto a = vec(need(h, "cos", "h"), d, "h.cos"), b = vec(need(h, "sin", "h"), d, "h.sin");
    const Real w = number(need(h, "omega", "h"), "h.omega");
    return Trajectory<Real>::sample(g, d, [&](Real t) { return Vector<Real>(std::cos(w * t) * a + std::sin(w * t) * b); });
  }
  if (type == "table") {
    only_keys(h, "h", {"type", "values"});
    return Trajectory<Real>(g, vec_table(json{{"table", need(h, "values", "h")}}, g, d, "h.values"));
  }
  fail("h.type", "unknown h family '" + type + "'");
}

}  // namespace

Problem parse_problem(const json& doc, const std::string& name) {
  only_keys(doc, "problem", {"schema", "dimension", "horizon", "intervals", "exponent", "kernel", "field", "h", "data",
                             "rng_seed", "tolerances", "lint", "description"});
  if (need(doc, "schema", "problem") != kProblemSchema) fail("schema", std::string("expected '") + kProblemSchema + "'");
  const auto& dim = need(doc, "dimension", "problem");
  const auto& n = need(doc, "intervals", "problem");
  if (!dim.is_number_integer() || dim.get<long>() < 1) fail("dimension", "expected a positive integer");
  if (!n.is_number_integer() || n.get<long>() < 2) fail("intervals", "expected an integer >= 2");
  const Index d = dim.get<Index>();
  const Real T = number(need(doc, "horizon", "problem"), "horizon");
  if (!(T > 0)) fail("horizon", "must be positive");
  const Grid<Real> g(T, n.get<Index>());
  const Real p = doc.contains("exponent") ? number(doc.at("exponent"), "exponent") : 1.0;
  if (!(p >= 1)) fail("exponent", "must satisfy p >= 1");

  try {
    auto kernel = parse_kernel(need(doc, "kernel", "problem"), d);
    auto field = parse_field(need(doc, "field", "problem"), g, d);
    auto h = doc.contains("h") ? parse_h(doc.at("h"), g, d) : Trajectory<Real>::zero(g, d);

    auto data = derive_field_data(field);
    if (doc.contains("data")) {
      const auto& blk = doc.at("data");
      only_keys(blk, "data", {"alpha", "beta", "c", "bound"});
      if (blk.contains("alpha")) data.alpha = scalar_table(blk.at("alpha"), g, "data.alpha");
      if (blk.contains("beta")) data.beta = scalar_table(blk.at("beta"), g, "data.beta");
      if (blk.contains("c")) data.c = scalar_table(blk.at("c"), g, "data.c");
      if (blk.contains("bound")) data.bound = scalar_table(blk.at("bound"), g, "data.bound");
    }

    const auto& kblk = doc.at("kernel");
    auto mu = kblk.contains("mu") ? scalar_table(kblk.at("mu"), g, "kernel.mu") : derivative_bound(kernel, g);

    Sampler sampler;
    if (doc.contains("lint")) {
      const auto& l = doc.at("lint");
      only_keys(l, "lint", {"samples", "radius"});
      if (l.contains("samples")) sampler.samples = int(number(l.at("samples"), "lint.samples"));
      if (l.contains("radius")) sampler.radius = number(l.at("radius"), "lint.radius");
      if (sampler.samples < 1 || !(sampler.radius > 0)) fail("lint", "samples and radius must be positive");
    }
    std::uint64_t seed = 0;
    if (doc.contains("rng_seed")) {
      if (!doc.at("rng_seed").is_number_unsigned()) fail("rng_seed", "expected a nonnegative integer");
      seed = doc.at("rng_seed").get<std::uint64_t>();
    }
    sampler.seed = seed;

    Real picard_tol = 1e-8, sup_tol = 1e-6;
    if (doc.contains("tolerances")) {
      const auto& t = doc.at("tolerances");
      only_keys(t, "tolerances", {"picard", "sup"});
      if (t.contains("picard")) picard_tol = number(t.at("picard"), "tolerances.picard");
      if (t.contains("sup")) sup_tol = number(t.at("sup"), "tolerances.sup");
      if (!(picard_tol > 0) || !(sup_tol > 0)) fail("tolerances", "must be positive");
    }

    ProblemInstance<Real> inst(std::move(kernel), std::move(field), std::move(data), std::move(h), p);
    return Problem{name, std::move(inst), std::move(mu), sampler, seed, picard_tol, sup_tol};
  } catch (const ParseError&) {
    throw;
  } catch (const json::exception& e) {
    throw ParseError(std::string("problem: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("problem: ") + e.what());
  }
}

Problem load_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return parse_problem(doc, std::filesystem::path(path).stem().string());
}

}  // namespace volterra::app
