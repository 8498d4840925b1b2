#include "app.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>

namespace volterra::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json to_json(const Vector<Real>& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <typename T>
json to_json(const std::vector<T>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(x);
  return a;
}

/// CSV with a versioned comment line ahead of the header. LF endings.
class Csv {
 public:
  Csv(const fs::path& path, const std::string& kind, const std::string& sampling, std::vector<std::string> header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# " << kCsvSchema << ' ' << kind << " sampling=" << sampling << '\n';
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::vector<std::string> indexed(const std::string& stem, Index d) {
  std::vector<std::string> out;
  for (Index i = 1; i <= d; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

/// t, x_1..x_d at nodes; u_1..u_d and residual on [t_i, t_{i+1}), blank on the last row.
void write_solution(const fs::path& path, const ProblemInstance<Real>& inst, const Trajectory<Real>& x,
                    const Selection<Real>& u) {
  const auto& g = inst.grid();
  const Index d = inst.dimension();
  std::vector<std::string> header{"t"};
  append(header, indexed("x", d));
  append(header, indexed("u", d));
  header.push_back("residual");
  Csv csv(path, "solution", "node rows=N+1; u,residual on [t_i,t_{i+1}), empty on last row", header);
  const auto res = nemytskii_residual(inst, x, u);
  for (Index i = 0; i < g.nodes(); ++i) {
    std::vector<std::string> cells{num(g.node(i))};
    for (Index c = 0; c < d; ++c) cells.push_back(num(x.row(i)(c)));
    for (Index c = 0; c < d; ++c) cells.push_back(i < g.intervals() ? num(u.row(i)(c)) : "");
    cells.push_back(i < g.intervals() ? num(res.pointwise(i)) : "");
    csv.row(cells);
  }
}

void write_report(const fs::path& path, const json& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << report.dump(2) << '\n';
}

json grid_json(const ProblemInstance<Real>& inst) {
  return {{"horizon", inst.grid().horizon()},
          {"intervals", inst.grid().intervals()},
          {"dimension", inst.dimension()},
          {"exponent", inst.exponent()},
          {"bielecki_M", inst.big_m()}};
}

json solve_json(const SolveReport<Real>& r, Real tol, const char* norm) {
  json ratios = json::array();
  for (const auto& [k, q] : r.ratios) ratios.push_back({k, q});
  return {{"iterations", r.iterations},
          {"converged", r.converged},
          {"converged_at", r.converged_at},
          {"increment_norm", norm},
          {"increments", to_json(r.increments)},
          {"ratios", ratios},
          {"tolerance", tol},
          {"fixed_point_defect", r.fixed_point_defect},
          {"residual", r.residual},
          {"residual_tolerance", 1e-12}};
}

struct Context {
  const Problem& problem;
  fs::path dir;
  std::ostream& out;
  bool quiet;

  fs::path file(const std::string& command, const std::string& suffix) const {
    return dir / (problem.name + "." + command + suffix);
  }
  json report(const std::string& command) const {
    return {{"schema", kReportSchema}, {"command", command}, {"problem", problem.name}, {"grid", grid_json(problem.instance)}};
  }
  int finish(json& rep, const std::string& command, int code, const std::string& summary) const {
    rep["status"] = code == kOk ? "ok" : "failure";
    rep["exit_code"] = code;
    write_report(file(command, ".report.json"), rep);
    if (!quiet) out << command << ": " << summary << '\n';
    return code;
  }
};

int cmd_check(const Context& cx) {
  const auto& p = cx.problem;
  const auto inst = p.instance.with_lint(p.kernel_mu, p.sampler);
  const auto& kl = *inst.kernel_lint();
  const auto& fl = *inst.field_lint();
  json kv = json::array(), fv = json::array();
  for (const auto& v : kl.verdicts)
    kv.push_back({{"hypothesis", v.hypothesis},
                  {"status", to_string(v.status)},
                  {"worst_margin", v.worst_margin},
                  {"witness", {{"t", v.t}, {"s", v.s}}},
                  {"note", v.note}});
  for (const auto& v : fl.verdicts)
    fv.push_back({{"hypothesis", v.hypothesis},
                  {"status", v.passed ? "pass" : "fail"},
                  {"worst_margin", v.worst_margin},
                  {"witness", {{"t", inst.grid().node(v.node)}, {"x", to_json(v.x)}, {"y", to_json(v.y)}}}});
  auto rep = cx.report("check");
  rep["kernel"] = {{"verdicts", kv}, {"q", std::isinf(kl.q) ? json("inf") : json(kl.q)}, {"sup_qnorm", kl.sup_qnorm}};
  rep["field"] = {{"verdicts", fv}};
  rep["tolerances"] = {{"kernel_derivative_rel", 1e-6}, {"kernel_derivative_abs", 1e-12}, {"field_rel", 1e-9},
                       {"field_abs", 1e-12}, {"samples", p.sampler.samples}, {"radius", p.sampler.radius},
                       {"rng_seed", p.sampler.seed}};
  const bool ok = kl.passed() && fl.passed();
  return cx.finish(rep, "check", ok ? kOk : kDomainFailure, ok ? "all hypotheses pass" : "hypothesis violated");
}

Selection<Real> seed_selection(const ProblemInstance<Real>& inst, const std::string& kind, std::uint64_t seed) {
  const auto& g = inst.grid();
  const Index d = inst.dimension();
  if (kind == "zero") return Selection<Real>::zero(g, d);
  if (kind == "bang-bang") return bang_bang_seeds(inst, 1, seed).front();
  if (kind == "min-norm") {
    RowMatrix<Real> v(g.intervals(), d);
    const auto& h = inst.inhomogeneity();
    for (Index j = 0; j < g.intervals(); ++j)
      v.row(j) = project(Vector<Real>(Vector<Real>::Zero(d)), field_eval(inst.field(), Instant::at_midpoint(j), h.midpoint(j)))
                     .transpose();
    return Selection<Real>(g, v);
  }
  if (kind == "random") {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    RowMatrix<Real> v(g.intervals(), d);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = normal(rng);
    return Selection<Real>(g, v);
  }
  throw CLI::ValidationError("--seed-selection", "expected zero, min-norm, bang-bang or random");
}

struct SolveFlags {
  std::string seed = "zero";
  double tol = 0;
  int max_iter = 200;
};

int cmd_solve(const Context& cx, const SolveFlags& f) {
  const auto& inst = cx.problem.instance;
  PicardOptions<Real> opt;
  opt.tol = f.tol > 0 ? f.tol : cx.problem.picard_tol;
  opt.max_iter = f.max_iter;
  const auto sol = picard_solve(inst, seed_selection(inst, f.seed, cx.problem.rng_seed), opt);
  const auto csv = cx.file("solve", ".csv");
  write_solution(csv, inst, sol.x, sol.u);
  auto rep = cx.report("solve");
  rep["seed_selection"] = f.seed;
  rep["solve"] = solve_json(sol.report, opt.tol, "bielecki");
  rep["contraction_bound"] = std::pow(2.0, -1.0 / inst.exponent());
  rep["outputs"] = {{"trajectory", csv.filename().string()}};
  const bool ok = sol.report.converged;
  return cx.finish(rep, "solve", ok ? kOk : kDomainFailure,
                   ok ? "converged at iteration " + std::to_string(sol.report.converged_at)
                      : "no convergence in " + std::to_string(opt.max_iter) + " iterations");
}

json checks_json(const std::vector<LedgerCheck<Real>>& cs) {
  json a = json::array();
  for (const auto& c : cs) a.push_back({{"n", c.n}, {"worst_margin", c.worst_margin}, {"where", c.where}, {"passed", c.passed}});
  return a;
}

struct SelectFlags {
  double epsilon = 0.1;
  int nmax = 8;
  double sup_tol = 0;
  int max_iter = 500;
};

int cmd_select(const Context& cx, const SelectFlags& f) {
  const auto& inst = cx.problem.instance;
  const auto& g = inst.grid();
  SchemeOptions<Real> opt;
  opt.sup_tol = f.sup_tol > 0 ? f.sup_tol : cx.problem.sup_tol;
  opt.max_iter = f.max_iter;
  auto rep = cx.report("select");
  rep["tolerances"] = {{"sup", opt.sup_tol}, {"recursion_rel", kLedgerRecursionTol}, {"property_iii_rel", 1e-9},
                       {"property_iii_abs", 1e-14}, {"increment_rel", 1e-9}};
  try {
    const auto res = selection_scheme_solve(inst, Real(f.epsilon), Index(f.nmax), opt);
    const auto& L = res.ledger;
    const auto sol_csv = cx.file("select", ".csv");
    const auto led_csv = cx.file("select", ".ledger.csv");
    write_solution(sol_csv, inst, res.x, res.f);
    {
      Csv csv(led_csv, "ledger", "node rows=nmax*(N+1); margin_iii on [t_i,t_{i+1}), empty on last row",
              {"n", "t", "beta_n", "margin_iii", "increment", "increment_bound"});
      for (Index n = 1; n <= L.nmax; ++n)
        for (Index i = 0; i < g.nodes(); ++i) {
          const auto& margin = L.property_iii_margin[std::size_t(n - 1)];
          csv.row({std::to_string(n), num(g.node(i)), num(L.beta_n(n)[i]), i < g.intervals() ? num(margin(i)) : "",
                   num(L.increment[std::size_t(n)]), num(L.increment_bound[std::size_t(n)])});
        }
    }
    json incs = json::array();
    for (std::size_t n = 0; n < L.increment.size(); ++n)
      incs.push_back({{"n", n}, {"value", L.increment[n]}, {"bound", L.increment_bound[n]}, {"passed", L.increment_checks[n].passed}});
    rep["ledger"] = {{"epsilon", L.epsilon},          {"epsilon_requested", f.epsilon}, {"nmax", L.nmax},
                     {"M", L.M},                      {"alpha_p_norm", L.alpha_p_norm}, {"gamma_l1", L.gamma_l1},
                     {"eps_n", to_json(L.eps_n)},     {"recursion", checks_json(L.recursion)},
                     {"property_iii", checks_json(L.property_iii)}, {"increments", incs},
                     {"warnings", to_json(L.warnings)}, {"passed", L.passed()}};
    rep["solve"] = solve_json(res.report, opt.sup_tol, "sup");
    rep["outputs"] = {{"trajectory", sol_csv.filename().string()}, {"ledger", led_csv.filename().string()}};
    const bool ok = L.passed() && res.report.converged;
    return cx.finish(rep, "select", ok ? kOk : kDomainFailure,
                     ok ? "ledger holds, converged at n = " + std::to_string(res.report.converged_at)
                        : (L.passed() ? "no convergence" : "ledger bound violated"));
  } catch (const LedgerViolation& e) {
    const bool at_node = e.check == "recursion";
    rep["witness"] = {{"check", e.check}, {"n", e.n}, {"index", e.where},
                      {"t", at_node ? g.node(e.where) : g.midpoint(e.where)}, {"lhs", e.lhs}, {"rhs", e.rhs}};
    return cx.finish(rep, "select", kDomainFailure, std::string(e.what()) + " at n = " + std::to_string(e.n));
  }
}

struct FunnelFlags {
  std::size_t K = 32;
  std::int64_t rng_seed = -1;
  double tol = 1e-10;
  unsigned jobs = 1;
  long block = 0;
};

int cmd_funnel(const Context& cx, const FunnelFlags& f) {
  const auto& inst = cx.problem.instance;
  const auto& g = inst.grid();
  const Index d = inst.dimension(), N = g.intervals();
  const std::uint64_t seed = f.rng_seed >= 0 ? std::uint64_t(f.rng_seed) : cx.problem.rng_seed;
  auto rep = cx.report("funnel");
  rep["sampling"] = {{"K", f.K}, {"rng_seed", seed}, {"tolerance", f.tol}, {"block", f.block}};
  FunnelSample<Real> fs;
  try {
    fs = sample_funnel(inst, f.K, seed, Real(f.tol), f.jobs, Index(f.block));
  } catch (const std::runtime_error& e) {
    return cx.finish(rep, "funnel", kDomainFailure, e.what());
  }
  Real worst_residual = 0;
  for (const auto& m : fs.members) worst_residual = std::max(worst_residual, m.residual);
  rep["members"] = fs.members.size();
  rep["failed_seeds"] = to_json(fs.failed);
  rep["max_residual"] = worst_residual;
  rep["residual_tolerance"] = 1e-12;
  rep["cross_section_T"] = {{"min", to_json(Vector<Real>(fs.min.row(N).transpose()))},
                            {"max", to_json(Vector<Real>(fs.max.row(N).transpose()))},
                            {"centroid", to_json(Vector<Real>(fs.centroid.row(N).transpose()))}};

  std::optional<Envelope<Real>> env;
  const std::string why = envelope_precondition(inst);
  bool contained = true;
  if (why.empty()) {
    env = scalar_envelope_oracle(inst);
    const Real tol_env = 1e-6;
    Real violation = 0;
    for (const auto& m : fs.members) {
      violation = std::max(violation, (env->x_min.values() - m.x.values()).maxCoeff());
      violation = std::max(violation, (m.x.values() - env->x_max.values()).maxCoeff());
    }
    contained = violation <= tol_env;
    const Real lo = env->x_min.row(N)(0), hi = env->x_max.row(N)(0);
    const Real width = hi - lo;
    json oracle = {{"applies", true},
                   {"envelope_T", {lo, hi}},
                   {"containment_violation", violation},
                   {"containment_tolerance", tol_env},
                   {"contained", contained},
                   {"upper_shortfall", width > 0 ? (hi - fs.max(N, 0)) / width : 0.0},
                   {"lower_shortfall", width > 0 ? (fs.min(N, 0) - lo) / width : 0.0},
                   {"attainment", width > 0 ? (fs.max(N, 0) - fs.min(N, 0)) / width : 1.0},
                   {"uniqueness_gap", env->uniqueness_gap}};
    if (N <= 12) {
      const auto [elo, ehi] = enumerate_reachable(inst);
      oracle["enumeration"] = {{"cases", std::uint64_t(1) << N},
                               {"max_deviation",
                                std::max((elo - env->x_min.values().col(0)).cwiseAbs().maxCoeff(),
                                         (ehi - env->x_max.values().col(0)).cwiseAbs().maxCoeff())}};
    }
    rep["oracle"] = oracle;
  } else {
    rep["oracle"] = {{"applies", false}, {"reason", why}};
  }

  std::vector<std::string> header{"t"};
  append(header, indexed("min", d));
  append(header, indexed("max", d));
  append(header, indexed("centroid", d));
  if (env) append(header, {"envelope_min", "envelope_max"});
  const auto path = cx.file("funnel", ".csv");
  {
    Csv csv(path, "funnel", "node rows=N+1", header);
    for (Index i = 0; i < g.nodes(); ++i) {
      std::vector<std::string> cells{num(g.node(i))};
      for (const auto* m : {&fs.min, &fs.max, &fs.centroid})
        for (Index c = 0; c < d; ++c) cells.push_back(num((*m)(i, c)));
      if (env) append(cells, {num(env->x_min.row(i)(0)), num(env->x_max.row(i)(0))});
      csv.row(cells);
    }
  }
  rep["outputs"] = {{"cross_sections", path.filename().string()}};
  const bool ok = contained && worst_residual <= 1e-12;
  return cx.finish(rep, "funnel", ok ? kOk : kDomainFailure,
                   std::to_string(fs.members.size()) + " of " + std::to_string(f.K) + " seeds converged" +
                       (ok ? "" : "; containment or membership failed"));
}

struct PeriodicFlags {
  double tol = 1e-8;
  int max_outer = 100;
};

int cmd_periodic(const Context& cx, const PeriodicFlags& f) {
  const auto& inst = cx.problem.instance;
  PeriodicOptions<Real> opt;
  opt.tol = f.tol;
  opt.max_outer = f.max_outer;
  opt.inner.tol = cx.problem.picard_tol;
  auto rep = cx.report("periodic");
  rep["tolerances"] = {{"outer", opt.tol}, {"inner", opt.inner.tol}, {"periodicity", 10 * opt.tol}};
  std::optional<PeriodicResult<Real>> solved;
  try {
    solved = periodic_solve(inst, opt);
  } catch (const std::domain_error& e) {
    return cx.finish(rep, "periodic", kDomainFailure, e.what());
  }
  const auto& res = *solved;
  const auto path = cx.file("periodic", ".csv");
  write_solution(path, inst, res.x, res.u);
  rep["periodic"] = {{"x0", to_json(res.x0)},
                     {"smallness", res.smallness},
                     {"R", res.R},
                     {"outer_increments", to_json(res.outer_increments)},
                     {"phi_norms", to_json(res.phi_norms)},
                     {"phi_bound_held", res.phi_bound_held},
                     {"converged", res.converged},
                     {"periodicity_defect", res.periodicity_defect},
                     {"periodic", res.periodic}};
  rep["outputs"] = {{"trajectory", path.filename().string()}};
  const bool ok = res.converged && res.periodic && res.phi_bound_held;
  return cx.finish(rep, "periodic", ok ? kOk : kDomainFailure,
                   ok ? "periodic solution, defect " + num(res.periodicity_defect) : "no periodic solution certified");
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "volterra_out";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multivalued Volterra integral inclusions: lint, solve, select, sample, periodic."};
  app.require_subcommand(1);
  std::string file, out_flag;
  bool quiet = false;
  app.add_option("--out", out_flag, std::string("output directory (default $") + kOutDirEnv + " or ./volterra_out)");
  app.add_flag("-q,--quiet", quiet, "no progress line");

  auto* check = app.add_subcommand("check", "lint kernel and field hypotheses");
  auto* solve = app.add_subcommand("solve", "Picard iteration on selections");
  auto* select = app.add_subcommand("select", "successive approximations with the error ledger");
  auto* funnel = app.add_subcommand("funnel", "sample the solution set");
  auto* periodic = app.add_subcommand("periodic", "T-periodic solution for a semigroup kernel");
  for (auto* sub : {check, solve, select, funnel, periodic}) sub->add_option("problem", file, "problem file")->required();

  SolveFlags sf;
  solve->add_option("--seed-selection", sf.seed, "zero | min-norm | bang-bang | random")
      ->check(CLI::IsMember({"zero", "min-norm", "bang-bang", "random"}));
  solve->add_option("--tol", sf.tol, "Bielecki increment tolerance (default from problem file)");
  solve->add_option("--max-iter", sf.max_iter)->check(CLI::PositiveNumber);

  SelectFlags lf;
  select->add_option("--epsilon", lf.epsilon)->check(CLI::PositiveNumber);
  select->add_option("--nmax", lf.nmax)->check(CLI::PositiveNumber);
  select->add_option("--sup-tol", lf.sup_tol, "sup-norm increment tolerance (default from problem file)");
  select->add_option("--max-iter", lf.max_iter)->check(CLI::PositiveNumber);

  FunnelFlags ff;
  funnel->add_option("--K", ff.K, "number of seeds")->check(CLI::PositiveNumber);
  funnel->add_option("--rng-seed", ff.rng_seed, "default from problem file")->check(CLI::NonNegativeNumber);
  funnel->add_option("--tol", ff.tol)->check(CLI::PositiveNumber);
  funnel->add_option("--jobs", ff.jobs, "seed-parallel workers")->check(CLI::PositiveNumber);
  funnel->add_option("--block", ff.block, "subintervals per random direction (0: cycle)")->check(CLI::NonNegativeNumber);

  PeriodicFlags pf;
  periodic->add_option("--tol", pf.tol)->check(CLI::PositiveNumber);
  periodic->add_option("--max-outer", pf.max_outer)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    const Problem problem = load_problem(file);
    const fs::path dir = output_dir(out_flag);
    fs::create_directories(dir);
    const Context cx{problem, dir, out, quiet};
    if (check->parsed()) return cmd_check(cx);
    if (solve->parsed()) return cmd_solve(cx, sf);
    if (select->parsed()) return cmd_select(cx, lf);
    if (funnel->parsed()) return cmd_funnel(cx, ff);
    return cmd_periodic(cx, pf);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDomainFailure;
  }
}

}  // namespace volterra::app
