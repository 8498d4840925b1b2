// Front end shared by the volterra executable and its tests.
#ifndef VOLTERRA_APP_HPP
#define VOLTERRA_APP_HPP

#include <volterra/volterra.hpp>

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace volterra::app {

using Real = double;

inline constexpr const char* kProblemSchema = "volterra-problem/1";
inline constexpr const char* kReportSchema = "volterra-report/1";
inline constexpr const char* kCsvSchema = "volterra-csv/1";
inline constexpr const char* kOutDirEnv = "VOLTERRA_OUT_DIR";

/// Malformed or inconsistent problem file. Maps to exit status 2.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Problem {
  std::string name;  ///< file stem, used to name outputs
  ProblemInstance<Real> instance;
  ScalarTable<Real> kernel_mu;  ///< bound on ||dk/dt(t, s)||, claimed or derived
  Sampler sampler;
  std::uint64_t rng_seed = 0;
  Real picard_tol = 1e-8;
  Real sup_tol = 1e-6;
};

Problem parse_problem(const nlohmann::json& doc, const std::string& name);
Problem load_problem(const std::string& path);

enum ExitCode : int { kOk = 0, kDomainFailure = 1, kUsage = 2 };

/// Runs the command line. Human-readable progress goes to `out`, diagnostics
/// to `err`. Returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace volterra::app

#endif  // VOLTERRA_APP_HPP
