#pragma once

#include "mrac/types.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace mrac {

/// Truth system x+ = A x + B u (or xdot = A x + B u). Only the simulator
/// reads it; controllers never do.
struct PlantModel {
  Matrix A;
  Matrix B;
  TimeDomain domain = TimeDomain::discrete;

  Index states() const { return A.rows(); }
  Index inputs() const { return B.cols(); }
};

/// Stable reference model (A_m, B_m). Also the prototype of every regressor
/// filter W_m = (zI - A_m)^{-1} B_m.
struct ReferenceModel {
  Matrix A;
  Matrix B;
  TimeDomain domain = TimeDomain::discrete;

  Index states() const { return A.rows(); }
  Index inputs() const { return B.cols(); }
};

/// Problems with a plant (dimensions, rank of B). Empty when valid.
std::vector<std::string> plant_issues(const PlantModel& plant);
/// Problems with a reference model, including the stability gate.
std::vector<std::string> reference_issues(const ReferenceModel& ref);
/// Throws ValidationError when either list above is non-empty.
void validate(const PlantModel& plant);
void validate(const ReferenceModel& ref);

inline constexpr double kMatchingTolerance = 1e-9;

struct MatchingSolution {
  Matrix K1;  // n x M
  Matrix K2;  // M x M
  double residual = 0.0;
  bool matchable = true;  // residual <= kMatchingTolerance
};

/// Least-squares solution of A + B K1^T = A_m, B K2 = B_m.
///
/// Rank-deficient B, dimension mismatch and singular K2 throw. A residual
/// above the tolerance is not an error; the solution comes back flagged
/// with matchable = false.
MatchingSolution solve_matching(const PlantModel& plant, const ReferenceModel& ref);

/// Build a plant that matches ref exactly with the given gains:
/// B = B_m K2^{-1}, A = A_m - B K1^T.
PlantModel plant_from_matching(const ReferenceModel& ref, const Matrix& K1, const Matrix& K2);

/// Largest eigenvalue magnitude.
double spectral_radius(const Matrix& M);
/// Largest real part over the spectrum.
double spectral_abscissa(const Matrix& M);

bool is_schur_stable(const Matrix& M);
bool is_hurwitz(const Matrix& M);

Vector step_plant_discrete(const PlantModel& plant, const Vector& x, const Vector& u);
Vector step_reference_discrete(const ReferenceModel& ref, const Vector& xm, const Vector& r);

// ---------------------------------------------------------------------------
// Reference signals

struct Sinusoid {
  double amplitude = 1.0;
  double frequency = 1.0;  // rad per unit time
  double phase = 0.0;
};

struct ChannelSignal {
  enum class Kind { sinusoids, constant, samples };
  Kind kind = Kind::constant;
  double level = 0.0;             // constant
  std::vector<Sinusoid> terms;    // sinusoids
  std::vector<double> samples;    // held by step index; last value repeats

  double at(long step, double time) const;
};

/// Bounded reference input r(t), one channel per plant input.
struct ReferenceSignal {
  std::vector<ChannelSignal> channels;

  Index dimension() const { return static_cast<Index>(channels.size()); }
  /// Discrete schemes pass time == step; continuous ones time == step * h.
  Vector at(long step, double time) const;

  static ReferenceSignal sum_of_sines(std::vector<std::vector<Sinusoid>> per_channel);
  static ReferenceSignal constant(const Vector& level);
};

// ---------------------------------------------------------------------------
// Fixed-step integration

using RightHandSide = std::function<Vector(double t, const Vector& y)>;

Vector rk4_step(const RightHandSide& f, double t, const Vector& y, double h);
Vector euler_step(const RightHandSide& f, double t, const Vector& y, double h);

/// One step of the selected method. Throws DivergenceError on a non-finite
/// state or derivative, std::invalid_argument on h <= 0.
Vector integrate_ct(const RightHandSide& f, double t, const Vector& y, double h,
                    Integrator method = Integrator::rk4);

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace mrac
