#include "mrac/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <sstream>

namespace mrac {

const char* to_string(TimeDomain d) {
  return d == TimeDomain::discrete ? "discrete" : "continuous";
}

const char* to_string(Integrator i) { return i == Integrator::rk4 ? "rk4" : "euler"; }

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::ostringstream os;
  os << "validation failed";
  for (const auto& s : issues) os << "\n  - " << s;
  return os.str();
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

DivergenceError::DivergenceError(long step, const std::string& what)
    : Error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError("dimension mismatch: " + what);
}

std::vector<std::string> plant_issues(const PlantModel& plant) {
  std::vector<std::string> issues;
  if (plant.A.rows() < 1 || plant.A.rows() != plant.A.cols())
    issues.push_back("plant A must be square and non-empty, got " + shape(plant.A));
  if (plant.B.cols() < 1 || plant.B.rows() != plant.A.rows())
    issues.push_back("plant B must have " + std::to_string(plant.A.rows()) +
                     " rows and at least one column, got " + shape(plant.B));
  if (!plant.A.allFinite() || !plant.B.allFinite()) issues.push_back("plant has non-finite entries");
  if (issues.empty()) {
    Eigen::ColPivHouseholderQR<Matrix> qr(plant.B);
    if (qr.rank() < plant.B.cols()) issues.push_back("plant B is rank deficient");
  }
  return issues;
}

std::vector<std::string> reference_issues(const ReferenceModel& ref) {
  std::vector<std::string> issues;
  if (ref.A.rows() < 1 || ref.A.rows() != ref.A.cols())
    issues.push_back("reference A_m must be square and non-empty, got " + shape(ref.A));
  if (ref.B.cols() < 1 || ref.B.rows() != ref.A.rows())
    issues.push_back("reference B_m must have " + std::to_string(ref.A.rows()) +
                     " rows and at least one column, got " + shape(ref.B));
  if (!ref.A.allFinite() || !ref.B.allFinite())
    issues.push_back("reference model has non-finite entries");
  if (!issues.empty()) return issues;
  if (ref.domain == TimeDomain::discrete) {
    const double rho = spectral_radius(ref.A);
    if (!(rho < 1.0))
      issues.push_back("reference A_m is not Schur stable (spectral radius " +
                       std::to_string(rho) + ")");
  } else {
    const double alpha = spectral_abscissa(ref.A);
    if (!(alpha < 0.0))
      issues.push_back("reference A_m is not Hurwitz (max real part " + std::to_string(alpha) +
                       ")");
  }
  return issues;
}

void validate(const PlantModel& plant) {
  auto issues = plant_issues(plant);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

void validate(const ReferenceModel& ref) {
  auto issues = reference_issues(ref);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

MatchingSolution solve_matching(const PlantModel& plant, const ReferenceModel& ref) {
  const Index n = plant.states();
  const Index M = plant.inputs();
  require_dims(plant.A.rows() == plant.A.cols() && plant.B.rows() == n, "plant (A, B)");
  require_dims(ref.A.rows() == n && ref.A.cols() == n, "A_m must be " + std::to_string(n) + "x" +
                                                           std::to_string(n));
  require_dims(ref.B.rows() == n && ref.B.cols() == M, "B_m must match the shape of B");

  Eigen::ColPivHouseholderQR<Matrix> qr(plant.B);
  if (qr.rank() < M) throw ValidationError({"plant B is rank deficient; matching is not unique"});

  MatchingSolution sol;
  sol.K1 = qr.solve(Matrix(ref.A - plant.A)).transpose();
  sol.K2 = qr.solve(ref.B);

  const Matrix defect_a = plant.A + plant.B * sol.K1.transpose() - ref.A;
  const Matrix defect_b = plant.B * sol.K2 - ref.B;
  sol.residual = std::sqrt(defect_a.squaredNorm() + defect_b.squaredNorm());
  sol.matchable = sol.residual <= kMatchingTolerance;

  Eigen::JacobiSVD<Matrix> svd(sol.K2);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= 1e-12 * std::max(1.0, sv(0)))
    throw SingularityError("matching gain K2 is singular");
  return sol;
}

PlantModel plant_from_matching(const ReferenceModel& ref, const Matrix& K1, const Matrix& K2) {
  const Index n = ref.states();
  const Index M = ref.inputs();
  require_dims(K1.rows() == n && K1.cols() == M, "K1 must be n x M");
  require_dims(K2.rows() == M && K2.cols() == M, "K2 must be M x M");
  PlantModel plant;
  plant.domain = ref.domain;
  // B K2 = B_m  =>  B = B_m K2^{-1}
  plant.B = K2.transpose().partialPivLu().solve(ref.B.transpose()).transpose();
  plant.A = ref.A - plant.B * K1.transpose();
  return plant;
}

double spectral_radius(const Matrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("spectral_radius needs a square matrix");
  if (M.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(M, false);
  if (es.info() != Eigen::Success) throw Error("eigenvalue iteration did not converge");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_abscissa(const Matrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("spectral_abscissa needs a square matrix");
  if (M.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(M, false);
  if (es.info() != Eigen::Success) throw Error("eigenvalue iteration did not converge");
  return es.eigenvalues().real().maxCoeff();
}

bool is_schur_stable(const Matrix& M) { return spectral_radius(M) < 1.0; }
bool is_hurwitz(const Matrix& M) { return spectral_abscissa(M) < 0.0; }

Vector step_plant_discrete(const PlantModel& plant, const Vector& x, const Vector& u) {
  require_dims(x.size() == plant.states(), "state vector length");
  require_dims(u.size() == plant.inputs(), "input vector length");
  return plant.A * x + plant.B * u;
}

Vector step_reference_discrete(const ReferenceModel& ref, const Vector& xm, const Vector& r) {
  require_dims(xm.size() == ref.states(), "reference state length");
  require_dims(r.size() == ref.inputs(), "reference input length");
  return ref.A * xm + ref.B * r;
}

double ChannelSignal::at(long step, double time) const {
  switch (kind) {
    case Kind::constant:
      return level;
    case Kind::sinusoids: {
      double v = 0.0;
      for (const auto& s : terms) v += s.amplitude * std::sin(s.frequency * time + s.phase);
      return v;
    }
    case Kind::samples:
      if (samples.empty()) return 0.0;
      return samples[static_cast<std::size_t>(
          std::clamp<long>(step, 0, static_cast<long>(samples.size()) - 1))];
  }
  return 0.0;
}

Vector ReferenceSignal::at(long step, double time) const {
  Vector r(dimension());
  for (Index j = 0; j < r.size(); ++j) r(j) = channels[static_cast<std::size_t>(j)].at(step, time);
  return r;
}

ReferenceSignal ReferenceSignal::sum_of_sines(std::vector<std::vector<Sinusoid>> per_channel) {
  ReferenceSignal s;
  for (auto& terms : per_channel) {
    ChannelSignal c;
    c.kind = ChannelSignal::Kind::sinusoids;
    c.terms = std::move(terms);
    s.channels.push_back(std::move(c));
  }
  return s;
}

ReferenceSignal ReferenceSignal::constant(const Vector& level) {
  ReferenceSignal s;
  for (Index j = 0; j < level.size(); ++j) {
    ChannelSignal c;
    c.kind = ChannelSignal::Kind::constant;
    c.level = level(j);
    s.channels.push_back(c);
  }
  return s;
}

Vector rk4_step(const RightHandSide& f, double t, const Vector& y, double h) {
  const Vector k1 = f(t, y);
  const Vector k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
  const Vector k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
  const Vector k4 = f(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector euler_step(const RightHandSide& f, double t, const Vector& y, double h) {
  return y + h * f(t, y);
}

Vector integrate_ct(const RightHandSide& f, double t, const Vector& y, double h,
                    Integrator method) {
  if (!(h > 0.0)) throw std::invalid_argument("integration step must be positive");
  if (!y.allFinite()) throw DivergenceError(-1, "non-finite state before integration");
  const RightHandSide checked = [&f](double tt, const Vector& yy) {
    Vector d = f(tt, yy);
    if (!d.allFinite()) throw DivergenceError(-1, "non-finite derivative at t=" + std::to_string(tt));
    return d;
  };
  Vector next = method == Integrator::rk4 ? rk4_step(checked, t, y, h) : euler_step(checked, t, y, h);
  if (!next.allFinite()) throw DivergenceError(-1, "non-finite state after integration");
  return next;
}

}  // namespace mrac
