#include "mrac/gradient_indirect.hpp"

#include "detail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrac {

IndirectGainConfig IndirectGainConfig::single_input(const Matrix& Gamma1, double gamma2,
                                                    TimeDomain domain) {
  const Index n = Gamma1.rows();
  Matrix G = Matrix::Zero(n + 1, n + 1);
  G.topLeftCorner(n, n) = Gamma1;
  G(n, n) = gamma2;
  IndirectGainConfig g;
  g.Gamma = {G};
  g.domain = domain;
  return g;
}

std::vector<std::string> gain_issues(const IndirectGainConfig& g, Index n) {
  std::vector<std::string> issues;
  const Index M = g.inputs();
  const Index p = n + M;
  if (M < 1) return {"gains: need one Gamma block per input"};
  for (Index j = 0; j < M; ++j) {
    const std::string tag = "gains[" + std::to_string(j) + "]: ";
    const Matrix& G = g.Gamma[static_cast<std::size_t>(j)];
    if (G.rows() != p || G.cols() != p) {
      issues.push_back(tag + "Gamma must be " + std::to_string(p) + "x" + std::to_string(p));
      continue;
    }
    if (!G.allFinite() || !detail::symmetric(G)) {
      issues.push_back(tag + "Gamma must be symmetric");
      continue;
    }
    const auto [lo, hi] = detail::eig_range(G);
    if (!(lo > 0.0)) issues.push_back(tag + "Gamma must be positive definite");
    if (g.domain == TimeDomain::discrete && !(hi < 2.0))
      issues.push_back(tag + "Gamma must satisfy Gamma < 2I (largest eigenvalue " +
                       std::to_string(hi) + ")");
    const bool split = G.topRightCorner(n, M).isZero(0.0);
    Matrix lower = G.bottomRightCorner(M, M);
    lower.diagonal().setZero();
    if (!split || !lower.isZero(0.0))
      issues.push_back(tag + "Gamma must be diag{Gamma1, Gamma2} with Gamma2 diagonal");
  }
  return issues;
}

void validate(const IndirectGainConfig& g, Index states) {
  auto issues = gain_issues(g, states);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

ProjectionConfig ProjectionConfig::from_upper_bound(const Vector& k2_upper, const Vector& signs) {
  ProjectionConfig p;
  p.theta2_lower = k2_upper.cwiseInverse();
  p.signs = signs;
  return p;
}

std::vector<std::string> projection_issues(const ProjectionConfig& p, Index n, Index M,
                                           const Matrix* theta0) {
  std::vector<std::string> issues;
  if (!p.enabled) return issues;
  if (p.theta2_lower.size() != M || p.signs.size() != M)
    return {"projection: theta2_lower and signs need one entry per input"};
  for (Index j = 0; j < M; ++j) {
    const std::string tag = "projection[" + std::to_string(j) + "]: ";
    if (!(p.theta2_lower(j) > 0.0) || !std::isfinite(p.theta2_lower(j)))
      issues.push_back(tag + "theta2_lower must be positive");
    if (p.signs(j) != 1.0 && p.signs(j) != -1.0) issues.push_back(tag + "sign must be +1 or -1");
    if (theta0 && theta0->rows() == n + M && theta0->cols() == M &&
        !(p.signs(j) * (*theta0)(n + j, j) >= p.theta2_lower(j)))
      issues.push_back(tag + "initial theta2 must have the prior sign and magnitude >= " +
                       std::to_string(p.theta2_lower(j)));
  }
  return issues;
}

IndirectTruth indirect_truth(const MatchingSolution& match) {
  const Index n = match.K1.rows();
  const Index M = match.K2.rows();
  const Matrix K2inv_T = match.K2.transpose().partialPivLu().inverse();
  IndirectTruth t;
  t.theta.resize(n + M, M);
  t.theta.topRows(n) = match.K1 * K2inv_T;
  t.theta.bottomRows(M) = K2inv_T;
  return t;
}

IndirectControllerState make_indirect_state(const ReferenceModel& ref, const Matrix& theta0,
                                            const Vector& x_hat0) {
  const Index n = ref.states();
  const Index M = ref.inputs();
  IndirectControllerState s;
  if (theta0.size()) {
    s.theta = theta0;
  } else {
    s.theta = Matrix::Zero(n + M, M);
    s.theta.bottomRows(M).setIdentity();
  }
  require_dims(s.theta.rows() == n + M && s.theta.cols() == M, "theta0 must be (n+M) x M");
  s.x_hat = detail::zeros_if_empty(x_hat0, n);
  require_dims(s.x_hat.size() == n, "x_hat0 length");
  s.bank = ChannelFilterBank(ref, n + M);
  return s;
}

Vector step_estimator(const ReferenceModel& ref, const Matrix& theta, const Vector& x_hat,
                      const Vector& x, const Vector& u) {
  const Index n = ref.states();
  const Index M = ref.inputs();
  require_dims(theta.rows() == n + M && theta.cols() == M, "theta must be (n+M) x M");
  require_dims(x_hat.size() == n && x.size() == n && u.size() == M, "estimator signal lengths");
  return ref.A * x_hat + ref.B * (theta.bottomRows(M).transpose() * u -
                                  theta.topRows(n).transpose() * x);
}

Vector epsilon_indirect(const Vector& e_x, const Matrix& xi) {
  require_dims(xi.rows() == e_x.size(), "xi must have n rows");
  return e_x + xi.rowwise().sum();
}

Vector control_indirect(const Matrix& theta, const ProjectionConfig& proj, const Vector& x,
                        const Vector& r) {
  const Index n = x.size();
  const Index M = r.size();
  require_dims(theta.rows() == n + M && theta.cols() == M, "theta must be (n+M) x M");
  const Matrix T2 = theta.bottomRows(M);
  const Vector rhs = theta.topRows(n).transpose() * x + r;

  Matrix offdiag = T2;
  offdiag.diagonal().setZero();
  if (offdiag.isZero(0.0)) {
    Vector u(M);
    for (Index j = 0; j < M; ++j) {
      const double d = T2(j, j);
      double floor = 0.0;
      if (!proj.enabled && proj.theta2_lower.size() == M) floor = proj.theta2_lower(j);
      if (!std::isfinite(d) || std::abs(d) <= 1e-12 || std::abs(d) < floor)
        throw SingularityError("theta2[" + std::to_string(j) + "] = " + std::to_string(d) +
                               " is too small to invert");
      u(j) = rhs(j) / d;
    }
    return u;
  }
  Eigen::FullPivLU<Matrix> lu(T2.transpose());
  if (!lu.isInvertible() || lu.rcond() < 1e-12)
    throw SingularityError("Theta2 estimate is singular");
  return lu.solve(rhs);
}

Matrix indirect_gradient(const IndirectGainConfig& g, const Vector& eps,
                         const RegressorFrame& frame) {
  const Index M = g.inputs();
  require_dims(static_cast<Index>(frame.zeta.size()) == M, "frame channel count");
  require_dims(eps.size() == frame.zeta[0].rows(), "eps length");
  const double m2 = frame.m * frame.m;
  Matrix d(frame.zeta[0].cols(), M);
  for (Index j = 0; j < M; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    d.col(j) = -(g.Gamma[jj] * (frame.zeta[jj].transpose() * eps)) / m2;
  }
  return d;
}

namespace {

void zero_offdiag_theta2(Matrix& theta, Index n) {
  const Index M = theta.cols();
  for (Index j = 0; j < M; ++j)
    for (Index k = 0; k < M; ++k)
      if (k != j) theta(n + k, j) = 0.0;
}

}  // namespace

ProjectionStep update_indirect_discrete(IndirectControllerState& s, const IndirectGainConfig& g,
                                        const ProjectionConfig& proj, const Vector& eps,
                                        const RegressorFrame& frame) {
  const Index M = g.inputs();
  const Index n = s.theta.rows() - M;
  const Matrix step = indirect_gradient(g, eps, frame);
  ProjectionStep out;
  out.theta2.resize(M);
  out.g2.resize(M);
  out.f2 = Vector::Zero(M);
  for (Index j = 0; j < M; ++j) {
    out.theta2(j) = s.theta(n + j, j);
    out.g2(j) = step(n + j, j);
  }
  s.theta += step;
  if (proj.enabled) {
    for (Index j = 0; j < M; ++j) {
      const double sg = proj.signs(j);
      const double a = proj.theta2_lower(j);
      const double raw = out.theta2(j) + out.g2(j);
      if (!(sg * raw >= a)) {
        out.f2(j) = sg * a - out.theta2(j) - out.g2(j);
        s.theta(n + j, j) = sg * a;  // exactly on the bound
        out.fired |= 1u << j;
      }
    }
  }
  if (g.enforce_diagonal && M > 1) zero_offdiag_theta2(s.theta, n);
  if (!s.theta.allFinite()) throw DivergenceError(-1, "non-finite parameter update");
  return out;
}

std::uint32_t project_ct_field(const Matrix& theta, Matrix& dtheta, const ProjectionConfig& proj,
                               Index n) {
  std::uint32_t fired = 0;
  if (!proj.enabled) return fired;
  for (Index j = 0; j < theta.cols(); ++j) {
    const double sg = proj.signs(j);
    if (sg * theta(n + j, j) <= proj.theta2_lower(j) && sg * dtheta(n + j, j) < 0.0) {
      dtheta(n + j, j) = 0.0;
      fired |= 1u << j;
    }
  }
  return fired;
}

std::uint32_t clamp_to_bounds(Matrix& theta, const ProjectionConfig& proj, Index n) {
  std::uint32_t fired = 0;
  if (!proj.enabled) return fired;
  for (Index j = 0; j < theta.cols(); ++j) {
    const double sg = proj.signs(j);
    if (!(sg * theta(n + j, j) >= proj.theta2_lower(j))) {
      theta(n + j, j) = sg * proj.theta2_lower(j);
      fired |= 1u << j;
    }
  }
  return fired;
}

std::uint32_t update_indirect_ct(Matrix& theta, const IndirectGainConfig& g,
                                 const ProjectionConfig& proj, const IndirectSignals& signals,
                                 double h, Integrator method) {
  const Index p = theta.rows();
  const Index M = theta.cols();
  const Index n = p - M;
  const bool diag = g.enforce_diagonal && M > 1;
  std::uint32_t fired = 0;
  const RightHandSide rhs = [&](double, const Vector& yy) {
    const Matrix th = detail::view(yy, 0, p, M);
    Vector eps;
    RegressorFrame frame;
    signals(th, eps, frame);
    Matrix d = indirect_gradient(g, eps, frame);
    fired |= project_ct_field(th, d, proj, n);
    if (diag) zero_offdiag_theta2(d, n);
    return Vector(Eigen::Map<const Vector>(d.data(), p * M));
  };
  Vector y = Eigen::Map<const Vector>(theta.data(), p * M);
  y = integrate_ct(rhs, 0.0, y, h, method);
  theta = detail::view(y, 0, p, M);
  fired |= clamp_to_bounds(theta, proj, n);
  if (diag) zero_offdiag_theta2(theta, n);
  return fired;
}

// ---------------------------------------------------------------------------

std::vector<std::string> scenario_issues(const IndirectScenario& sc) {
  std::vector<std::string> issues = plant_issues(sc.plant);
  for (auto& s : reference_issues(sc.ref)) issues.push_back(std::move(s));
  if (issues.empty()) {
    const Index n = sc.ref.states();
    const Index M = sc.ref.inputs();
    if (sc.plant.states() != n || sc.plant.inputs() != M)
      issues.push_back("plant and reference model dimensions differ");
    if (sc.signal.dimension() != M)
      issues.push_back("reference signal needs one channel per input");
    if (sc.gains.domain != sc.ref.domain)
      issues.push_back("gain time domain differs from the reference model's");
    if (sc.gains.inputs() != M) issues.push_back("gains: need one Gamma block per input");
    for (auto& s : gain_issues(sc.gains, n)) issues.push_back(std::move(s));
    if (sc.theta0.size() && (sc.theta0.rows() != n + M || sc.theta0.cols() != M))
      issues.push_back("init: theta0 must be (n+M) x M");
    detail::length_issue(sc.x0, n, "x0", issues);
    detail::length_issue(sc.xm0, n, "xm0", issues);
    detail::length_issue(sc.x_hat0, n, "x_hat0", issues);
    Matrix theta0 = sc.theta0;
    if (!theta0.size()) {
      theta0 = Matrix::Zero(n + M, M);
      theta0.bottomRows(M).setIdentity();
    }
    for (auto& s : projection_issues(sc.projection, n, M, &theta0)) issues.push_back(std::move(s));
  }
  if (sc.horizon < 0) issues.push_back("horizon must be nonnegative");
  if (sc.ref.domain == TimeDomain::continuous && !(sc.h > 0.0))
    issues.push_back("integration step must be positive");
  return issues;
}

namespace {

void check_scenario(const IndirectScenario& sc) {
  auto issues = scenario_issues(sc);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

void init_trace(SimulationTrace& tr, const IndirectScenario& sc) {
  tr.scheme = Scheme::indirect_gradient;
  tr.domain = sc.ref.domain;
  tr.states = sc.ref.states();
  tr.inputs = sc.ref.inputs();
  tr.step_size = sc.ref.domain == TimeDomain::discrete ? 1.0 : sc.h;
  tr.horizon = sc.horizon;
  tr.has_V = sc.truth.has_value();
  if (sc.truth)
    tr.gamma0 = sc.ref.domain == TimeDomain::discrete ? indirect_gamma1(sc.gains.Gamma) : 2.0;
  tr.records.reserve(static_cast<std::size_t>(sc.horizon) + 1);
}

double V_of(const IndirectScenario& sc, const Matrix& theta) {
  if (!sc.truth) return kNaN;
  return compute_V_indirect(theta, sc.truth->theta, sc.gains.Gamma);
}

Matrix initial_theta(const IndirectScenario& sc) {
  Matrix th = make_indirect_state(sc.ref, sc.theta0, Vector()).theta;
  if (sc.gains.enforce_diagonal && sc.ref.inputs() > 1) zero_offdiag_theta2(th, sc.ref.states());
  return th;
}

SimulationTrace run_ct(const IndirectScenario& sc) {
  SimulationTrace tr;
  init_trace(tr, sc);
  const Index n = sc.ref.states();
  const Index M = sc.ref.inputs();
  const Index p = n + M;
  const bool diag = sc.gains.enforce_diagonal && M > 1;
  const bool with_xi = sc.gains.normalize_with_xi();
  IndirectControllerState ctl = make_indirect_state(sc.ref, initial_theta(sc), Vector());
  const Index nb = ctl.bank.state_size();

  detail::Layout lay;
  const Index ix = lay.add(n), ixm = lay.add(n), ixh = lay.add(n), ibank = lay.add(nb),
              ith = lay.add(p * M);
  Vector y(lay.size);
  y.segment(ix, n) = detail::zeros_if_empty(sc.x0, n);
  y.segment(ixm, n) = detail::zeros_if_empty(sc.xm0, n);
  y.segment(ixh, n) = sc.x_hat0.size() ? sc.x_hat0 : Vector(y.segment(ix, n));
  y.segment(ibank, nb).setZero();
  detail::view(y, ith, p, M) = ctl.theta;

  struct Eval {
    Vector e, u, eps;
    RegressorFrame frame;
    std::uint32_t fired = 0;
  };
  const auto evaluate = [&](double t, const Vector& yy, Eval& ev) {
    const Vector x = yy.segment(ix, n);
    const Vector xm = yy.segment(ixm, n);
    const Vector xh = yy.segment(ixh, n);
    const Matrix theta = detail::view(yy, ith, p, M);
    const Vector r = sc.signal.at(detail::sample_index(t, sc.h), t);
    ev.u = control_indirect(theta, sc.projection, x, r);
    Vector omega(p);
    omega << -x, ev.u;
    ev.e = x - xm;
    ev.frame = ctl.bank.frame_at(yy.segment(ibank, nb), theta, omega, with_xi);
    ev.eps = epsilon_indirect(xh - x, ev.frame.xi);
    Matrix dtheta = indirect_gradient(sc.gains, ev.eps, ev.frame);
    ev.fired = project_ct_field(theta, dtheta, sc.projection, n);
    if (diag) zero_offdiag_theta2(dtheta, n);
    Vector d(yy.size());
    d.segment(ix, n) = sc.plant.A * x + sc.plant.B * ev.u;
    d.segment(ixm, n) = sc.ref.A * xm + sc.ref.B * r;
    d.segment(ixh, n) = sc.ref.A * xh + sc.ref.B * (theta.transpose() * omega);
    ctl.bank.derivative(yy.segment(ibank, nb), omega, theta, d.segment(ibank, nb));
    detail::view(d, ith, p, M) = dtheta;
    return d;
  };
  std::uint32_t stage_fired = 0;
  const RightHandSide rhs = [&](double t, const Vector& yy) {
    Eval ev;
    Vector d = evaluate(t, yy, ev);
    stage_fired |= ev.fired;
    return d;
  };

  std::string failure;
  try {
    for (long k = 0; k <= sc.horizon; ++k) {
      const double t = static_cast<double>(k) * sc.h;
      Eval ev;
      try {
        evaluate(t, y, ev);
      } catch (const SingularityError& err) {
        throw DivergenceError(k, err.what());
      }
      StepRecord rec;
      rec.step = k;
      rec.time = t;
      rec.x = y.segment(ix, n);
      rec.xm = y.segment(ixm, n);
      rec.x_hat = y.segment(ixh, n);
      rec.e = ev.e;
      rec.u = ev.u;
      rec.theta = detail::view(y, ith, p, M);
      rec.eps = ev.eps;
      rec.m = ev.frame.m;
      rec.eps_sq_over_m_sq = ev.eps.squaredNorm() / (ev.frame.m * ev.frame.m);
      rec.V = V_of(sc, rec.theta);
      detail::guard(k, y, "closed-loop state");

      stage_fired = 0;
      Vector next;
      try {
        next = integrate_ct(rhs, t, y, sc.h, sc.integrator);
      } catch (const Error& err) {
        throw DivergenceError(k, err.what());
      }
      Matrix th_next = detail::view(next, ith, p, M);
      stage_fired |= clamp_to_bounds(th_next, sc.projection, n);
      if (diag) zero_offdiag_theta2(th_next, n);
      detail::view(next, ith, p, M) = th_next;
      rec.proj_fired = stage_fired;
      rec.dtheta_sq = (th_next - rec.theta).squaredNorm();
      if (sc.truth) rec.dV = V_of(sc, th_next) - rec.V;
      tr.records.push_back(std::move(rec));
      y = std::move(next);
    }
  } catch (const DivergenceError& err) {
    failure = err.what();
  }
  detail::finish(tr, failure);
  return tr;
}

}  // namespace

IndirectLoop::IndirectLoop(const IndirectScenario& sc) : sc_(sc) {
  check_scenario(sc);
  require_dims(sc.ref.domain == TimeDomain::discrete, "IndirectLoop steps the discrete loop");
  const Index n = sc.ref.states();
  x_ = detail::zeros_if_empty(sc.x0, n);
  xm_ = detail::zeros_if_empty(sc.xm0, n);
  require_dims(x_.size() == n && xm_.size() == n, "initial state length");
  ctl_ = make_indirect_state(sc.ref, initial_theta(sc), sc.x_hat0.size() ? sc.x_hat0 : x_);
}

StepRecord IndirectLoop::step() {
  const Index n = sc_.ref.states();
  const Index M = sc_.ref.inputs();
  const auto td = static_cast<double>(t_);
  const Vector r = sc_.signal.at(t_, td);

  StepRecord rec;
  rec.step = t_;
  rec.time = td;
  rec.x = x_;
  rec.xm = xm_;
  rec.x_hat = ctl_.x_hat;
  rec.e = x_ - xm_;
  try {
    rec.u = control_indirect(ctl_.theta, sc_.projection, x_, r);
  } catch (const SingularityError& err) {
    throw DivergenceError(t_, err.what());
  }
  Vector omega(n + M);
  omega << -x_, rec.u;
  frame_ = ctl_.bank.step(ctl_.theta, omega, sc_.gains.normalize_with_xi());
  rec.eps = epsilon_indirect(ctl_.x_hat - x_, frame_.xi);
  rec.m = frame_.m;
  rec.eps_sq_over_m_sq = rec.eps.squaredNorm() / (frame_.m * frame_.m);
  rec.theta = ctl_.theta;
  rec.V = V_of(sc_, ctl_.theta);

  ProjectionStep ps;
  try {
    ps = update_indirect_discrete(ctl_, sc_.gains, sc_.projection, rec.eps, frame_);
  } catch (const DivergenceError&) {
    throw DivergenceError(t_, "non-finite parameter update");
  }
  rec.proj_fired = ps.fired;
  if (sc_.truth) {
    double worst = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < M; ++j)
      worst = std::max(worst, (ps.theta2(j) - sc_.truth->theta(n + j, j) + ps.g2(j) + ps.f2(j)) *
                                  ps.f2(j));
    rec.proj_product = worst;
  }
  rec.dtheta_sq = (ctl_.theta - rec.theta).squaredNorm();
  if (sc_.truth) rec.dV = V_of(sc_, ctl_.theta) - rec.V;

  ctl_.x_hat = step_estimator(sc_.ref, rec.theta, ctl_.x_hat, x_, rec.u);
  x_ = step_plant_discrete(sc_.plant, x_, rec.u);
  xm_ = step_reference_discrete(sc_.ref, xm_, r);
  detail::guard(t_, x_, "plant state");
  detail::guard(t_, ctl_.x_hat, "estimator state");
  ++t_;
  return rec;
}

SimulationTrace run_indirect_scenario(const IndirectScenario& sc) {
  check_scenario(sc);
  if (sc.ref.domain == TimeDomain::continuous) return run_ct(sc);

  SimulationTrace tr;
  init_trace(tr, sc);
  IndirectLoop loop(sc);
  std::string failure;
  try {
    for (long k = 0; k <= sc.horizon; ++k) tr.records.push_back(loop.step());
  } catch (const DivergenceError& err) {
    failure = err.what();
  }
  detail::finish(tr, failure);
  return tr;
}

}  // namespace mrac
