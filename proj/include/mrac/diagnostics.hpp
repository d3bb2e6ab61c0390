#pragma once

#include "mrac/types.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace mrac {

enum class Scheme { direct_gradient, indirect_gradient, lyapunov_direct, lyapunov_indirect };

const char* to_string(Scheme s);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Everything observed at one step t. Increments (dV, dtheta_sq, drho_sq)
/// describe the update from t to t+1 made during this step.
struct StepRecord {
  long step = 0;
  double time = 0.0;
  Vector x, xm, e, u;
  Vector x_hat;  // indirect schemes only
  Matrix theta;  // estimate in force at t
  Vector rho;    // direct gradient only
  Vector eps;    // estimation error (Lyapunov schemes: the state error itself)
  double m = 1.0;
  double eps_sq_over_m_sq = 0.0;
  double V = kNaN;
  double dV = kNaN;
  double dtheta_sq = 0.0;
  double drho_sq = 0.0;
  std::uint32_t proj_fired = 0;  // bit j set when channel j's projection acted
  double proj_product = kNaN;    // max_j (theta2 - theta2* + g2 + f2) f2, when truth is known
};

struct TraceSummary {
  long records = 0;
  bool diverged = false;
  double sup_e = 0.0;
  double sup_theta = 0.0;
  double last_window_max_e = 0.0;
  double sum_eps_sq_over_m_sq = 0.0;
  double sum_dtheta_sq = 0.0;
  double sum_drho_sq = 0.0;
  double tail_fraction_eps = 0.0;
  double tail_fraction_dtheta = 0.0;
  double tail_fraction_drho = 0.0;
  long projection_events = 0;

  bool operator==(const TraceSummary&) const = default;
};

struct SimulationTrace {
  Scheme scheme = Scheme::direct_gradient;
  TimeDomain domain = TimeDomain::discrete;
  Index states = 0;
  Index inputs = 0;
  double step_size = 1.0;
  long horizon = 0;
  std::vector<StepRecord> records;
  bool diverged = false;
  std::string failure;
  bool has_V = false;
  /// Contraction margin used in the discrete bound dV <= -(2 - gamma0) sum eps^2/m^2.
  double gamma0 = kNaN;
  TraceSummary summary;
};

// ---------------------------------------------------------------------------
// Lyapunov functions of the gradient laws

/// |rho*| theta~^T Gamma^{-1} theta~ + gamma^{-1} rho~^2, summed over input
/// channels (columns of theta).
double compute_V_direct(const Matrix& theta, const Vector& rho, const Matrix& theta_star,
                        const Vector& rho_star, const std::vector<Matrix>& Gamma,
                        const Vector& gamma);
double compute_V_direct(const Vector& theta, double rho, const Vector& theta_star,
                        double rho_star, const Matrix& Gamma, double gamma);

/// sum_j theta~_j^T Gamma_j^{-1} theta~_j.
double compute_V_indirect(const Matrix& theta, const Matrix& theta_star,
                          const std::vector<Matrix>& Gamma);

/// max over channels of lambda_max(|rho_j*| Gamma_j) and gamma_j.
double direct_gamma0(const std::vector<Matrix>& Gamma, const Vector& gamma, const Vector& rho_star);
/// max over channels of lambda_max(Gamma_j).
double indirect_gamma1(const std::vector<Matrix>& Gamma);

struct LyapunovSeries {
  std::vector<double> V;
  std::vector<double> dV;
  std::vector<double> eps_sq_over_m_sq;
};

LyapunovSeries lyapunov_series(const SimulationTrace& trace);

struct DeltaVCheck {
  bool pass = true;
  long first_violation = -1;
  double worst_excess = -std::numeric_limits<double>::infinity();  // max of dV - bound
};

/// Checks dV(t) <= -(2 - gamma0) eps_sq_over_m_sq(t) + tolerance at every step.
/// gamma0 = 2 reduces the bound to plain monotonicity.
DeltaVCheck check_delta_V(const LyapunovSeries& series, double gamma0, double tolerance);

struct L2Summary {
  double sum_eps_sq_over_m_sq = 0.0;
  double sum_dtheta_sq = 0.0;
  double sum_drho_sq = 0.0;
  double tail_fraction_eps = 0.0;
  double tail_fraction_dtheta = 0.0;
  double tail_fraction_drho = 0.0;
};

/// Sums over the trace; tail fraction = (sum over the last `tail` share of
/// steps) / total, 0 when the total is 0.
L2Summary l2_accumulators(const SimulationTrace& trace, double tail = 0.1);

struct TrackingMetrics {
  double sup_e = 0.0;
  double last_window_max = 0.0;
  long settling_index = -1;  // first step after which |e|_inf stays <= threshold
  bool diverged = false;
};

/// Infinity-norm tracking metrics; window = trailing share of the records.
TrackingMetrics tracking_metrics(const SimulationTrace& trace, double window = 0.1,
                                 double threshold = 1e-3);

/// Recompute the summary block from the records.
TraceSummary summarize(const SimulationTrace& trace);

}  // namespace mrac
