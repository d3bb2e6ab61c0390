#pragma once

#include "mrac/diagnostics.hpp"
#include "mrac/gradient_direct.hpp"
#include "mrac/gradient_indirect.hpp"
#include "mrac/lyapunov_ct.hpp"
#include "mrac/random_system.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace mrac {

using Json = nlohmann::json;

/// Parsed scenario document. Fields that the document leaves out stay empty
/// and take defaults when the scenario is resolved. The schema is described
/// in the README.
struct ScenarioConfig {
  std::string name = "scenario";
  Scheme scheme = Scheme::direct_gradient;
  TimeDomain domain = TimeDomain::discrete;

  std::optional<RandomFamily> random;  // replaces plant/reference when set
  std::uint64_t seed = 0;
  PlantModel plant;
  ReferenceModel ref;
  ReferenceSignal signal;

  struct Gains {
    std::vector<Matrix> Gamma;
    Vector gamma, signs, k2_lower;
    std::optional<bool> enforce_diagonal, xi_in_m;
    Matrix Gamma1, Gamma2;
    Vector sp_gammas;
    bool alternate_theta1_law = false;
    Matrix Q;
  } gains;

  struct Projection {
    bool present = false;
    bool enabled = true;
    Vector theta2_lower, k2_upper, signs;
  } projection;

  struct Init {
    Vector x0, xm0, x_hat0;
    Matrix theta0;
    Vector rho0;
    std::optional<double> theta_scale, rho_scale;
  } init;

  long horizon = 1000;
  double ct_step = 0.01;
  Integrator integrator = Integrator::rk4;

  struct Output {
    bool trace = true;
    bool summary = true;
    bool plot = false;
    bool params = false;
  } output;

  bool operator==(const ScenarioConfig& other) const;
};

/// Parse error with the offending line, or a field that has the wrong shape.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Structural parse of a JSON document; every field problem is collected
/// before throwing ConfigError. Does not check dynamics or gain bounds.
ScenarioConfig parse_config(const Json& doc);
/// Text entry point: JSON syntax errors carry the line number.
ScenarioConfig parse_config_text(const std::string& text);

/// Parse and fully validate; throws ValidationError listing every issue.
ScenarioConfig load_config_text(const std::string& text);
ScenarioConfig load_config(const std::string& path);
ScenarioConfig load_config_json(const Json& doc);

Json to_json(const ScenarioConfig& cfg);
std::string serialize(const ScenarioConfig& cfg);

/// Ready-to-run scenario for one of the scheme families, with truth
/// attached whenever the plant is matchable.
struct ResolvedScenario {
  Scheme scheme = Scheme::direct_gradient;
  std::variant<DirectScenario, IndirectScenario, LyapunovScenario> body;
  std::optional<MatchingSolution> matching;
  std::vector<std::string> notes;  // non-fatal diagnostics, e.g. not matchable
};

ResolvedScenario resolve(const ScenarioConfig& cfg);
/// Every semantic problem (stability, gain bounds, projection, dimensions).
std::vector<std::string> config_issues(const ScenarioConfig& cfg);

struct InvariantReport {
  bool evaluated = false;  // needs the truth
  bool delta_v = true;
  bool projection = true;
  bool diagonal = true;
  std::vector<std::string> violations;

  bool pass() const { return delta_v && projection && diagonal; }
};

/// Tolerances used by the invariant suite.
inline constexpr double kDiscreteDeltaVTolerance = 1e-10;
inline constexpr double kContinuousDeltaVTolerance = 1e-6;
inline constexpr double kProjectionTolerance = 1e-12;

InvariantReport check_invariants(const SimulationTrace& trace, const ResolvedScenario& sc);

struct RunOutcome {
  SimulationTrace trace;
  InvariantReport invariants;
  std::vector<std::string> notes;
};

RunOutcome run(const ScenarioConfig& cfg);
RunOutcome run(const ResolvedScenario& sc);

/// Bundled discrete single-input direct example.
Json paper_example_config();

}  // namespace mrac
