#include "mrac/diagnostics.hpp"

#include "detail.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace mrac {

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::direct_gradient: return "direct_gradient";
    case Scheme::indirect_gradient: return "indirect_gradient";
    case Scheme::lyapunov_direct: return "lyapunov_direct";
    case Scheme::lyapunov_indirect: return "lyapunov_indirect";
  }
  return "unknown";
}

namespace {

double quad_inverse(const Matrix& G, const Vector& v) {
  return v.dot(G.llt().solve(v));
}

double lambda_max(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

double compute_V_direct(const Matrix& theta, const Vector& rho, const Matrix& theta_star,
                        const Vector& rho_star, const std::vector<Matrix>& Gamma,
                        const Vector& gamma) {
  require_dims(theta.rows() == theta_star.rows() && theta.cols() == theta_star.cols(),
               "theta vs theta*");
  require_dims(rho.size() == theta.cols() && rho_star.size() == theta.cols() &&
                   gamma.size() == theta.cols() &&
                   static_cast<Index>(Gamma.size()) == theta.cols(),
               "per-channel gains");
  double v = 0.0;
  for (Index j = 0; j < theta.cols(); ++j) {
    const Vector d = theta.col(j) - theta_star.col(j);
    const double dr = rho(j) - rho_star(j);
    v += std::abs(rho_star(j)) * quad_inverse(Gamma[static_cast<std::size_t>(j)], d) +
         dr * dr / gamma(j);
  }
  return v;
}

double compute_V_direct(const Vector& theta, double rho, const Vector& theta_star,
                        double rho_star, const Matrix& Gamma, double gamma) {
  return compute_V_direct(Matrix(theta), Vector::Constant(1, rho), Matrix(theta_star),
                          Vector::Constant(1, rho_star), {Gamma}, Vector::Constant(1, gamma));
}

double compute_V_indirect(const Matrix& theta, const Matrix& theta_star,
                          const std::vector<Matrix>& Gamma) {
  require_dims(theta.rows() == theta_star.rows() && theta.cols() == theta_star.cols(),
               "theta vs theta*");
  require_dims(static_cast<Index>(Gamma.size()) == theta.cols(), "per-channel gains");
  double v = 0.0;
  for (Index j = 0; j < theta.cols(); ++j)
    v += quad_inverse(Gamma[static_cast<std::size_t>(j)], theta.col(j) - theta_star.col(j));
  return v;
}

double direct_gamma0(const std::vector<Matrix>& Gamma, const Vector& gamma,
                     const Vector& rho_star) {
  double g0 = 0.0;
  for (std::size_t j = 0; j < Gamma.size(); ++j) {
    const auto jj = static_cast<Index>(j);
    g0 = std::max({g0, std::abs(rho_star(jj)) * lambda_max(Gamma[j]), gamma(jj)});
  }
  return g0;
}

double indirect_gamma1(const std::vector<Matrix>& Gamma) {
  double g1 = 0.0;
  for (const auto& G : Gamma) g1 = std::max(g1, lambda_max(G));
  return g1;
}

LyapunovSeries lyapunov_series(const SimulationTrace& trace) {
  LyapunovSeries s;
  s.V.reserve(trace.records.size());
  s.dV.reserve(trace.records.size());
  s.eps_sq_over_m_sq.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    s.V.push_back(r.V);
    s.dV.push_back(r.dV);
    s.eps_sq_over_m_sq.push_back(r.eps_sq_over_m_sq);
  }
  return s;
}

DeltaVCheck check_delta_V(const LyapunovSeries& series, double gamma0, double tolerance) {
  DeltaVCheck out;
  const std::size_t len = std::min(series.dV.size(), series.eps_sq_over_m_sq.size());
  for (std::size_t t = 0; t < len; ++t) {
    const double bound = -(2.0 - gamma0) * series.eps_sq_over_m_sq[t];
    const double excess = series.dV[t] - bound;
    // NaN counts as a violation
    if (!(excess <= tolerance)) {
      if (out.pass) out.first_violation = static_cast<long>(t);
      out.pass = false;
    }
    if (std::isnan(excess) || excess > out.worst_excess) out.worst_excess = excess;
  }
  return out;
}

namespace {

struct TailSplit {
  std::size_t start;
};

TailSplit tail_start(std::size_t count, double tail) {
  const auto len = static_cast<std::size_t>(std::ceil(tail * static_cast<double>(count)));
  return {count - std::min(count, len)};
}

double fraction(double part, double total) { return total > 0.0 ? part / total : 0.0; }

}  // namespace

L2Summary l2_accumulators(const SimulationTrace& trace, double tail) {
  L2Summary s;
  const auto split = tail_start(trace.records.size(), tail);
  double te = 0.0, tt = 0.0, tr = 0.0;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& r = trace.records[k];
    s.sum_eps_sq_over_m_sq += r.eps_sq_over_m_sq;
    s.sum_dtheta_sq += r.dtheta_sq;
    s.sum_drho_sq += r.drho_sq;
    if (k >= split.start) {
      te += r.eps_sq_over_m_sq;
      tt += r.dtheta_sq;
      tr += r.drho_sq;
    }
  }
  s.tail_fraction_eps = fraction(te, s.sum_eps_sq_over_m_sq);
  s.tail_fraction_dtheta = fraction(tt, s.sum_dtheta_sq);
  s.tail_fraction_drho = fraction(tr, s.sum_drho_sq);
  return s;
}

TrackingMetrics tracking_metrics(const SimulationTrace& trace, double window, double threshold) {
  TrackingMetrics out;
  out.diverged = trace.diverged;
  const auto split = tail_start(trace.records.size(), window);
  long last_above = -1;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const Vector& e = trace.records[k].e;
    const double v = e.size() ? e.cwiseAbs().maxCoeff() : 0.0;
    const double mag = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    out.sup_e = std::max(out.sup_e, mag);
    if (k >= split.start) out.last_window_max = std::max(out.last_window_max, mag);
    if (!(mag <= threshold)) last_above = static_cast<long>(k);
  }
  if (trace.diverged) {
    out.sup_e = std::numeric_limits<double>::infinity();
    out.last_window_max = std::numeric_limits<double>::infinity();
    out.settling_index = -1;
  } else if (!trace.records.empty() && last_above + 1 < static_cast<long>(trace.records.size())) {
    out.settling_index = last_above + 1;
  }
  return out;
}

TraceSummary summarize(const SimulationTrace& trace) {
  TraceSummary s;
  s.records = static_cast<long>(trace.records.size());
  s.diverged = trace.diverged;
  const auto l2 = l2_accumulators(trace);
  const auto tm = tracking_metrics(trace);
  s.sup_e = tm.sup_e;
  s.last_window_max_e = tm.last_window_max;
  s.sum_eps_sq_over_m_sq = l2.sum_eps_sq_over_m_sq;
  s.sum_dtheta_sq = l2.sum_dtheta_sq;
  s.sum_drho_sq = l2.sum_drho_sq;
  s.tail_fraction_eps = l2.tail_fraction_eps;
  s.tail_fraction_dtheta = l2.tail_fraction_dtheta;
  s.tail_fraction_drho = l2.tail_fraction_drho;
  for (const auto& r : trace.records) {
    if (r.theta.size()) s.sup_theta = std::max(s.sup_theta, r.theta.cwiseAbs().maxCoeff());
    if (r.proj_fired) ++s.projection_events;
  }
  return s;
}

}  // namespace mrac

namespace mrac::detail {

std::pair<double, double> eig_range(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

void finish(SimulationTrace& trace, const std::string& failure) {
  if (!failure.empty()) {
    trace.diverged = true;
    trace.failure = failure;
  }
  trace.summary = summarize(trace);
}

}  // namespace mrac::detail
