#pragma once

#include "mrac/diagnostics.hpp"
#include "mrac/filter_bank.hpp"
#include "mrac/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace mrac {

/// Gains of the indirect gradient law. Column j of Theta = [Theta1; Theta2]
/// gets Gamma_j, which must be block diagonal diag{Gamma_j1, Gamma_j2} with
/// Gamma_j2 diagonal. Discrete time additionally needs Gamma_j < 2I.
struct IndirectGainConfig {
  std::vector<Matrix> Gamma;
  bool enforce_diagonal = true;  // keep Theta2 diagonal
  std::optional<bool> xi_in_m;   // unset: off for one input, on for several
  TimeDomain domain = TimeDomain::discrete;

  Index inputs() const { return static_cast<Index>(Gamma.size()); }
  bool normalize_with_xi() const { return xi_in_m.value_or(inputs() > 1); }

  static IndirectGainConfig single_input(const Matrix& Gamma1, double gamma2,
                                         TimeDomain domain = TimeDomain::discrete);
};

std::vector<std::string> gain_issues(const IndirectGainConfig& g, Index states);
void validate(const IndirectGainConfig& g, Index states);

/// Keeps sign(theta2_jj) = signs_j and |theta2_jj| >= theta2_lower_j.
struct ProjectionConfig {
  bool enabled = true;
  Vector theta2_lower;  // theta2j^a = 1 / k2j^b
  Vector signs;         // sign of k2j*

  static ProjectionConfig from_upper_bound(const Vector& k2_upper, const Vector& signs);
};

/// Checks the config and, when given, whether the initial estimate starts
/// inside the admissible set.
std::vector<std::string> projection_issues(const ProjectionConfig& p, Index states, Index inputs,
                                           const Matrix* theta0 = nullptr);

/// Theta* = [Theta1*; Theta2*] with Theta1* = K1* K2*^{-T}, Theta2* = K2*^{-T}.
struct IndirectTruth {
  Matrix theta;
};

IndirectTruth indirect_truth(const MatchingSolution& match);

struct IndirectControllerState {
  Matrix theta;  // (n+M) x M
  Vector x_hat;
  ChannelFilterBank bank;  // over omega = [-x; u]
};

IndirectControllerState make_indirect_state(const ReferenceModel& ref, const Matrix& theta0,
                                            const Vector& x_hat0);

/// x_hat+ = A_m x_hat + B_m (Theta2^T u - Theta1^T x).
Vector step_estimator(const ReferenceModel& ref, const Matrix& theta, const Vector& x_hat,
                      const Vector& x, const Vector& u);

/// eps_i = e_xi + sum_j xi_ij.
Vector epsilon_indirect(const Vector& e_x, const Matrix& xi);

/// u = Theta2^{-T} (Theta1^T x + r). Throws SingularityError when Theta2 is
/// not safely invertible; with projection disabled an entry below its
/// configured lower bound also counts as singular.
Vector control_indirect(const Matrix& theta, const ProjectionConfig& proj, const Vector& x,
                        const Vector& r);

/// What the projection did to the Theta2 diagonal during one update.
struct ProjectionStep {
  std::uint32_t fired = 0;
  Vector theta2;  // before the update
  Vector g2;      // raw gradient step
  Vector f2;      // correction
};

/// Raw field -Gamma_j Z_j^T eps / m^2, column by column.
Matrix indirect_gradient(const IndirectGainConfig& g, const Vector& eps,
                         const RegressorFrame& frame);

/// theta <- theta + g + f with the discrete landing projection on the
/// Theta2 diagonal, then diagonal enforcement. Filters untouched.
ProjectionStep update_indirect_discrete(IndirectControllerState& s, const IndirectGainConfig& g,
                                        const ProjectionConfig& proj, const Vector& eps,
                                        const RegressorFrame& frame);

/// Continuous-time projection of a derivative field: on the boundary with an
/// outward component the Theta2 diagonal derivative is nulled. Returns the
/// fired mask.
std::uint32_t project_ct_field(const Matrix& theta, Matrix& dtheta, const ProjectionConfig& proj,
                               Index states);
/// Pull Theta2 diagonal entries that crossed the bound back onto it.
std::uint32_t clamp_to_bounds(Matrix& theta, const ProjectionConfig& proj, Index states);

using IndirectSignals =
    std::function<void(const Matrix& theta, Vector& eps, RegressorFrame& frame)>;

std::uint32_t update_indirect_ct(Matrix& theta, const IndirectGainConfig& g,
                                 const ProjectionConfig& proj, const IndirectSignals& signals,
                                 double h, Integrator method = Integrator::rk4);

struct IndirectScenario {
  PlantModel plant;
  ReferenceModel ref;
  ReferenceSignal signal;
  IndirectGainConfig gains;
  ProjectionConfig projection;
  Vector x0, xm0;
  Vector x_hat0;  // empty: start at x0
  Matrix theta0;
  long horizon = 1000;
  double h = 0.01;
  Integrator integrator = Integrator::rk4;
  std::optional<IndirectTruth> truth;
};

std::vector<std::string> scenario_issues(const IndirectScenario& sc);

class IndirectLoop {
 public:
  explicit IndirectLoop(const IndirectScenario& sc);

  StepRecord step();
  long time() const { return t_; }
  const IndirectControllerState& controller() const { return ctl_; }
  const RegressorFrame& last_frame() const { return frame_; }

 private:
  const IndirectScenario& sc_;
  IndirectControllerState ctl_;
  RegressorFrame frame_;
  Vector x_, xm_;
  long t_ = 0;
};

SimulationTrace run_indirect_scenario(const IndirectScenario& sc);

}  // namespace mrac
