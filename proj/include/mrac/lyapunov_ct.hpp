#pragma once

#include "mrac/diagnostics.hpp"
#include "mrac/gradient_direct.hpp"
#include "mrac/gradient_indirect.hpp"
#include "mrac/model.hpp"

#include <cstdint>
#include <optional>

namespace mrac {

struct LyapunovCertificate {
  Matrix P;
  Matrix Q;
  double residual = 0.0;  // ||P A_m + A_m^T P + Q||_F
  double min_eigenvalue = 0.0;
};

/// Solves P A_m + A_m^T P = -Q through the Kronecker form. Throws
/// ValidationError for a non-Hurwitz A_m or a Q that is not symmetric
/// positive definite.
LyapunovCertificate solve_lyapunov_ct(const Matrix& Am, const Matrix& Q);

/// S_p = diag{sign_i gamma_i}.
Matrix make_sp(const Vector& signs, const Vector& gammas);
/// Checks that M_s = K2* S_p is symmetric positive definite.
std::vector<std::string> sp_issues(const Matrix& Sp, const Matrix& K2_star);

/// K1dot = -Gamma1 x (e^T P B_m) S_p,  K2dot = -S_p^T B_m^T P e r^T Gamma2.
/// One input: Gamma1 = Gamma, Gamma2 = [gamma], S_p = [sign k2*].
/// Several inputs: Gamma1 = I, Gamma2 = I, S_p = diag{sign_i gamma_i}.
struct LyapunovDirectGains {
  Matrix Gamma1;  // n x n
  Matrix Gamma2;  // M x M
  Matrix Sp;      // M x M

  static LyapunovDirectGains single_input(const Matrix& Gamma, double gamma, double sign);
  static LyapunovDirectGains multi_input(Index states, const Vector& signs, const Vector& gammas);
};

std::vector<std::string> gain_issues(const LyapunovDirectGains& g, Index states, Index inputs);

struct LyapunovDirectField {
  Matrix dK1;  // n x M
  Matrix dK2;  // M x M
};

LyapunovDirectField lyapunov_direct_derivative(const Vector& e, const Vector& x, const Vector& r,
                                               const Matrix& P, const Matrix& Bm,
                                               const LyapunovDirectGains& g);

/// One step of size h with e, x, r held over the step.
void update_lyapunov_direct_ct(Matrix& K1, Matrix& K2, const Vector& e, const Vector& x,
                               const Vector& r, const Matrix& P, const Matrix& Bm,
                               const LyapunovDirectGains& g, double h);

/// e^T P e + tr[K1~^T Gamma1^{-1} K1~ M_s^{-1}] + tr[K2~^T M_s^{-1} K2~ Gamma2^{-1}],
/// M_s = K2* S_p.
double V_lyapunov_direct(const Vector& e, const Matrix& P, const Matrix& K1, const Matrix& K2,
                         const Matrix& K1_star, const Matrix& K2_star,
                         const LyapunovDirectGains& g);

/// Theta1dot = Gamma1 x e_x^T P B_m (or x e_x^T P B_m Gamma1 with the
/// alternate law), Theta2dot = -Gamma2 u e_x^T P B_m + F2.
struct LyapunovIndirectGains {
  Matrix Gamma1;  // n x n, or M x M with the alternate law
  Matrix Gamma2;  // M x M diagonal
  bool alternate_theta1_law = false;
  bool enforce_diagonal = true;

  static LyapunovIndirectGains single_input(const Matrix& Gamma1, double gamma2);
};

std::vector<std::string> gain_issues(const LyapunovIndirectGains& g, Index states, Index inputs);

struct LyapunovIndirectField {
  Matrix dTheta1;
  Matrix dTheta2;
  std::uint32_t fired = 0;
};

/// Derivative fields including the projection on the Theta2 diagonal.
LyapunovIndirectField lyapunov_indirect_derivative(const Vector& e_x, const Vector& x,
                                                   const Vector& u, const Matrix& P,
                                                   const Matrix& Bm, const Matrix& Theta2,
                                                   const LyapunovIndirectGains& g,
                                                   const ProjectionConfig& proj);

/// One step with signals held; clamps Theta2 back inside the bounds.
std::uint32_t update_lyapunov_indirect_ct(Matrix& Theta1, Matrix& Theta2, const Vector& e_x,
                                          const Vector& x, const Vector& u, const Matrix& P,
                                          const Matrix& Bm, const LyapunovIndirectGains& g,
                                          const ProjectionConfig& proj, double h);

double V_lyapunov_indirect(const Vector& e_x, const Matrix& P, const Matrix& Theta1,
                           const Matrix& Theta2, const Matrix& Theta1_star,
                           const Matrix& Theta2_star, const LyapunovIndirectGains& g);

enum class LyapunovVariant { direct, indirect };

struct LyapunovScenario {
  PlantModel plant;
  ReferenceModel ref;
  ReferenceSignal signal;
  Matrix Q;  // empty: identity
  LyapunovVariant variant = LyapunovVariant::direct;
  LyapunovDirectGains direct;
  LyapunovIndirectGains indirect;
  ProjectionConfig projection;
  Vector x0, xm0;
  Vector x_hat0;  // empty: x0
  Matrix theta0;  // direct [K1; K2^T], indirect [Theta1; Theta2]
  long horizon = 1000;
  double h = 0.01;
  Integrator integrator = Integrator::rk4;
  std::optional<MatchingSolution> truth;
};

std::vector<std::string> scenario_issues(const LyapunovScenario& sc);

/// Joint continuous-time closed loop. The flat state holds x, x_m, x_hat
/// (indirect only) and the stacked parameters.
class LyapunovLoop {
 public:
  explicit LyapunovLoop(const LyapunovScenario& sc);

  const LyapunovCertificate& certificate() const { return cert_; }
  const Vector& state() const { return y_; }
  double time() const { return t_; }

  /// Advance by the scenario step.
  void advance();
  /// One step of size h from an arbitrary state, without touching the loop.
  Vector step_from(const Vector& y, double t, double h) const;

  Vector x(const Vector& y) const { return y.segment(ix_, n_); }
  Vector xm(const Vector& y) const { return y.segment(ixm_, n_); }
  Vector x_hat(const Vector& y) const;
  Matrix theta(const Vector& y) const;
  /// e = x - x_m (direct) or e_x = x_hat - x (indirect).
  Vector error(const Vector& y) const;
  Vector control(const Vector& y, double t) const;
  /// V needs the truth; NaN otherwise.
  double V(const Vector& y) const;
  /// e^T Q e with the error above.
  double error_energy(const Vector& y) const;

 private:
  Vector derivative(double t, const Vector& y, std::uint32_t* fired) const;
  void post_step(Vector& y, std::uint32_t* fired) const;

  const LyapunovScenario& sc_;
  LyapunovCertificate cert_;
  Index n_, M_;
  Index ix_ = 0, ixm_ = 0, ixh_ = 0, ith_ = 0;
  Matrix theta_star_;
  Vector y_;
  double t_ = 0.0;
  mutable std::uint32_t last_fired_ = 0;

  friend SimulationTrace run_lyapunov_scenario(const LyapunovScenario&);
};

SimulationTrace run_lyapunov_scenario(const LyapunovScenario& sc);

}  // namespace mrac
