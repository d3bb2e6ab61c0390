#pragma once

#include "mrac/diagnostics.hpp"
#include "mrac/filter_bank.hpp"
#include "mrac/model.hpp"

#include <functional>
#include <optional>

namespace mrac {

/// Gains of the direct gradient laws, one block per input channel j.
///
/// theta_j = [K1 column j; K2 row j] lives in R^{n+M}. Discrete-time bounds:
/// single input 0 < Gamma < 2 k2^a I, several inputs 0 < Gamma_j < k2j^a I,
/// and 0 < gamma_j < 2. Continuous time only needs positivity.
struct DirectGainConfig {
  std::vector<Matrix> Gamma;
  Vector gamma;
  Vector signs;     // sign of k2j* (equivalently of rho_j*)
  Vector k2_lower;  // k2j^a; unused in continuous time
  bool enforce_diagonal = true;  // zero off-diagonal K2 entries after every update
  TimeDomain domain = TimeDomain::discrete;

  Index inputs() const { return gamma.size(); }

  static DirectGainConfig single_input(const Matrix& Gamma, double gamma, double sign,
                                       double k2_lower,
                                       TimeDomain domain = TimeDomain::discrete);
};

std::vector<std::string> gain_issues(const DirectGainConfig& g, Index states);
void validate(const DirectGainConfig& g, Index states);

/// True parameters implied by the matching gains: theta* = [K1*; K2*^T],
/// rho_j* = 1 / k2jj*.
struct DirectTruth {
  Matrix theta;
  Vector rho;
};

DirectTruth direct_truth(const MatchingSolution& match);

struct DirectControllerState {
  Matrix theta;  // (n+M) x M
  Vector rho;    // M
  ChannelFilterBank bank;
};

/// Fresh state with zeroed filters over omega = [x; r].
DirectControllerState make_direct_state(const ReferenceModel& ref, const Matrix& theta0,
                                        const Vector& rho0);

/// u = K1^T x + K2 r = Theta^T [x; r].
Vector control_direct(const Matrix& theta, const Vector& x, const Vector& r);

/// eps_i = e_i + sum_j rho_j xi_ij.
Vector epsilon_direct(const Vector& e, const Vector& rho, const Matrix& xi);

struct DirectField {
  Matrix dtheta;
  Vector drho;
};

/// Raw gradient field: -sign_j Gamma_j Z_j^T eps / m^2 and -gamma_j xi_j^T eps / m^2.
DirectField direct_gradient(const DirectGainConfig& g, const Vector& eps,
                            const RegressorFrame& frame);

/// Zero the off-diagonal entries of the K2 block (rows n..n+M-1 of theta).
void zero_offdiagonal_block(Matrix& theta, Index states);

/// One discrete update of theta and rho. The filter bank is not touched.
void update_direct_discrete(DirectControllerState& s, const DirectGainConfig& g,
                            const Vector& eps, const RegressorFrame& frame);

/// Signals at an intermediate (theta, rho); used by the continuous update.
using DirectSignals =
    std::function<void(const Matrix& theta, const Vector& rho, Vector& eps, RegressorFrame& frame)>;

/// One integration step of the continuous-time law with the signals
/// re-evaluated at every stage.
void update_direct_ct(Matrix& theta, Vector& rho, const DirectGainConfig& g,
                      const DirectSignals& signals, double h,
                      Integrator method = Integrator::rk4);

struct DirectScenario {
  PlantModel plant;
  ReferenceModel ref;
  ReferenceSignal signal;
  DirectGainConfig gains;
  Vector x0, xm0;
  Matrix theta0;
  Vector rho0;
  long horizon = 1000;
  double h = 0.01;  // continuous time only
  Integrator integrator = Integrator::rk4;
  std::optional<DirectTruth> truth;  // enables V
};

/// Every problem with the scenario; empty when it can run.
std::vector<std::string> scenario_issues(const DirectScenario& sc);

/// Stepping interface over the discrete closed loop. Each step reads x, x_m,
/// forms e, emits zeta and xi, forms eps, records, applies u, updates the
/// parameters and advances plant, reference and filters.
class DirectLoop {
 public:
  explicit DirectLoop(const DirectScenario& sc);

  StepRecord step();
  long time() const { return t_; }
  const DirectControllerState& controller() const { return ctl_; }
  const RegressorFrame& last_frame() const { return frame_; }
  const Vector& x() const { return x_; }
  const Vector& xm() const { return xm_; }

 private:
  const DirectScenario& sc_;
  DirectControllerState ctl_;
  RegressorFrame frame_;
  Vector x_, xm_;
  long t_ = 0;
};

/// Closed-loop run in the reference model's time domain; records steps
/// 0..horizon. Divergence truncates the trace and sets the flag.
SimulationTrace run_direct_scenario(const DirectScenario& sc);

}  // namespace mrac
