#include "mrac/gradient_direct.hpp"

#include "detail.hpp"

#include <cmath>

namespace mrac {

DirectGainConfig DirectGainConfig::single_input(const Matrix& Gamma, double gamma, double sign,
                                                double k2_lower, TimeDomain domain) {
  DirectGainConfig g;
  g.Gamma = {Gamma};
  g.gamma = Vector::Constant(1, gamma);
  g.signs = Vector::Constant(1, sign);
  g.k2_lower = Vector::Constant(1, k2_lower);
  g.domain = domain;
  return g;
}

std::vector<std::string> gain_issues(const DirectGainConfig& g, Index n) {
  std::vector<std::string> issues;
  const Index M = g.inputs();
  const Index p = n + M;
  if (M < 1) {
    issues.push_back("gains: gamma must have one entry per input");
    return issues;
  }
  if (static_cast<Index>(g.Gamma.size()) != M)
    issues.push_back("gains: expected " + std::to_string(M) + " Gamma blocks, got " +
                     std::to_string(g.Gamma.size()));
  if (g.signs.size() != M) issues.push_back("gains: signs must have one entry per input");
  const bool discrete = g.domain == TimeDomain::discrete;
  if (discrete && g.k2_lower.size() != M)
    issues.push_back("gains: k2_lower must have one entry per input");
  if (!issues.empty()) return issues;

  for (Index j = 0; j < M; ++j) {
    const std::string tag = "gains[" + std::to_string(j) + "]: ";
    if (g.signs(j) != 1.0 && g.signs(j) != -1.0) issues.push_back(tag + "sign must be +1 or -1");
    if (!(g.gamma(j) > 0.0)) issues.push_back(tag + "gamma must be positive");
    if (discrete && !(g.gamma(j) < 2.0)) issues.push_back(tag + "gamma must be below 2");
    if (discrete && !(g.k2_lower(j) > 0.0)) issues.push_back(tag + "k2_lower must be positive");

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
    if (discrete && std::isfinite(g.k2_lower(j)) && g.k2_lower(j) > 0.0) {
      // a single input admits 2 k2^a; with several inputs only k2j^a is safe
      const double cap = (M == 1 ? 2.0 : 1.0) * g.k2_lower(j);
      if (!(hi < cap))
        issues.push_back(tag + "Gamma exceeds the bound " + std::string(M == 1 ? "2*" : "") +
                         "k2_lower*I (largest eigenvalue " + std::to_string(hi) + ")");
    }
    if (g.enforce_diagonal && M > 1) {
      for (Index k = 0; k < M; ++k) {
        if (k == j) continue;
        const Index c = n + k;
        for (Index i = 0; i < p; ++i)
          if (i != c && G(c, i) != 0.0) {
            issues.push_back(tag + "Gamma must not couple the off-diagonal K2 entries to others");
            i = p;
            k = M;
          }
      }
    }
  }
  return issues;
}

void validate(const DirectGainConfig& g, Index states) {
  auto issues = gain_issues(g, states);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

DirectTruth direct_truth(const MatchingSolution& match) {
  const Index n = match.K1.rows();
  const Index M = match.K2.rows();
  DirectTruth t;
  t.theta.resize(n + M, M);
  t.theta.topRows(n) = match.K1;
  t.theta.bottomRows(M) = match.K2.transpose();
  t.rho = match.K2.diagonal().cwiseInverse();
  return t;
}

DirectControllerState make_direct_state(const ReferenceModel& ref, const Matrix& theta0,
                                        const Vector& rho0) {
  const Index n = ref.states();
  const Index M = ref.inputs();
  DirectControllerState s;
  s.theta = detail::zeros_if_empty(theta0, n + M, M);
  s.rho = detail::zeros_if_empty(rho0, M);
  require_dims(s.theta.rows() == n + M && s.theta.cols() == M, "theta0 must be (n+M) x M");
  require_dims(s.rho.size() == M, "rho0 must have M entries");
  s.bank = ChannelFilterBank(ref, n + M);
  return s;
}

Vector control_direct(const Matrix& theta, const Vector& x, const Vector& r) {
  require_dims(theta.rows() == x.size() + r.size() && theta.cols() == r.size(),
               "theta must be (n+M) x M for control");
  Vector omega(x.size() + r.size());
  omega << x, r;
  return theta.transpose() * omega;
}

Vector epsilon_direct(const Vector& e, const Vector& rho, const Matrix& xi) {
  require_dims(xi.rows() == e.size() && xi.cols() == rho.size(), "xi must be n x M");
  return e + xi * rho;
}

DirectField direct_gradient(const DirectGainConfig& g, const Vector& eps,
                            const RegressorFrame& frame) {
  const Index M = g.inputs();
  require_dims(static_cast<Index>(frame.zeta.size()) == M && frame.xi.cols() == M,
               "frame channel count");
  require_dims(eps.size() == frame.xi.rows(), "eps length");
  const double m2 = frame.m * frame.m;
  DirectField f;
  f.dtheta.resize(frame.zeta[0].cols(), M);
  f.drho.resize(M);
  for (Index j = 0; j < M; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    f.dtheta.col(j) = -g.signs(j) * (g.Gamma[jj] * (frame.zeta[jj].transpose() * eps)) / m2;
    f.drho(j) = -g.gamma(j) * frame.xi.col(j).dot(eps) / m2;
  }
  return f;
}

void zero_offdiagonal_block(Matrix& theta, Index states) {
  const Index M = theta.cols();
  for (Index j = 0; j < M; ++j)
    for (Index k = 0; k < M; ++k)
      if (k != j) theta(states + k, j) = 0.0;
}

void update_direct_discrete(DirectControllerState& s, const DirectGainConfig& g,
                            const Vector& eps, const RegressorFrame& frame) {
  const DirectField f = direct_gradient(g, eps, frame);
  s.theta += f.dtheta;
  s.rho += f.drho;
  if (g.enforce_diagonal && g.inputs() > 1)
    zero_offdiagonal_block(s.theta, s.theta.rows() - g.inputs());
  if (!s.theta.allFinite() || !s.rho.allFinite())
    throw DivergenceError(-1, "non-finite parameter update");
}

void update_direct_ct(Matrix& theta, Vector& rho, const DirectGainConfig& g,
                      const DirectSignals& signals, double h, Integrator method) {
  const Index p = theta.rows();
  const Index M = theta.cols();
  Vector y(p * M + M);
  y << Eigen::Map<const Vector>(theta.data(), p * M), rho;
  const bool diag = g.enforce_diagonal && M > 1;
  const RightHandSide rhs = [&](double, const Vector& yy) {
    const Matrix th = detail::view(yy, 0, p, M);
    const Vector rh = yy.tail(M);
    Vector eps;
    RegressorFrame frame;
    signals(th, rh, eps, frame);
    DirectField f = direct_gradient(g, eps, frame);
    if (diag) zero_offdiagonal_block(f.dtheta, p - M);
    Vector d(yy.size());
    d << Eigen::Map<const Vector>(f.dtheta.data(), p * M), f.drho;
    return d;
  };
  y = integrate_ct(rhs, 0.0, y, h, method);
  theta = detail::view(y, 0, p, M);
  rho = y.tail(M);
  if (diag) zero_offdiagonal_block(theta, p - M);
}

// ---------------------------------------------------------------------------

std::vector<std::string> scenario_issues(const DirectScenario& sc) {
  std::vector<std::string> issues = plant_issues(sc.plant);
  for (auto& s : reference_issues(sc.ref)) issues.push_back(std::move(s));
  if (issues.empty()) {
    if (sc.plant.states() != sc.ref.states() || sc.plant.inputs() != sc.ref.inputs())
      issues.push_back("plant and reference model dimensions differ");
    if (sc.signal.dimension() != sc.ref.inputs())
      issues.push_back("reference signal needs one channel per input");
    if (sc.gains.domain != sc.ref.domain)
      issues.push_back("gain time domain differs from the reference model's");
    const Index n = sc.ref.states(), M = sc.ref.inputs();
    if (sc.theta0.size() && (sc.theta0.rows() != n + M || sc.theta0.cols() != M))
      issues.push_back("init: theta0 must be (n+M) x M");
    detail::length_issue(sc.rho0, M, "rho0", issues);
    detail::length_issue(sc.x0, n, "x0", issues);
    detail::length_issue(sc.xm0, n, "xm0", issues);
  }
  if (sc.ref.states() > 0)
    for (auto& s : gain_issues(sc.gains, sc.ref.states())) issues.push_back(std::move(s));
  if (sc.horizon < 0) issues.push_back("horizon must be nonnegative");
  if (sc.ref.domain == TimeDomain::continuous && !(sc.h > 0.0))
    issues.push_back("integration step must be positive");
  return issues;
}

namespace {

void check_scenario(const DirectScenario& sc) {
  auto issues = scenario_issues(sc);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

void init_trace(SimulationTrace& tr, const DirectScenario& sc) {
  tr.scheme = Scheme::direct_gradient;
  tr.domain = sc.ref.domain;
  tr.states = sc.ref.states();
  tr.inputs = sc.ref.inputs();
  tr.step_size = sc.ref.domain == TimeDomain::discrete ? 1.0 : sc.h;
  tr.horizon = sc.horizon;
  tr.has_V = sc.truth.has_value();
  if (sc.truth) {
    tr.gamma0 = sc.ref.domain == TimeDomain::discrete
                    ? direct_gamma0(sc.gains.Gamma, sc.gains.gamma, sc.truth->rho)
                    : 2.0;
  }
  tr.records.reserve(static_cast<std::size_t>(sc.horizon) + 1);
}

double V_of(const DirectScenario& sc, const Matrix& theta, const Vector& rho) {
  if (!sc.truth) return kNaN;
  return compute_V_direct(theta, rho, sc.truth->theta, sc.truth->rho, sc.gains.Gamma,
                          sc.gains.gamma);
}

SimulationTrace run_ct(const DirectScenario& sc) {
  SimulationTrace tr;
  init_trace(tr, sc);
  const Index n = sc.ref.states();
  const Index M = sc.ref.inputs();
  const Index p = n + M;
  DirectControllerState ctl = make_direct_state(sc.ref, sc.theta0, sc.rho0);
  const bool diag = sc.gains.enforce_diagonal && M > 1;
  if (diag) zero_offdiagonal_block(ctl.theta, n);

  detail::Layout lay;
  const Index ix = lay.add(n), ixm = lay.add(n), ibank = lay.add(ctl.bank.state_size()),
              ith = lay.add(p * M), irho = lay.add(M);
  Vector y(lay.size);
  y.segment(ix, n) = detail::zeros_if_empty(sc.x0, n);
  y.segment(ixm, n) = detail::zeros_if_empty(sc.xm0, n);
  y.segment(ibank, ctl.bank.state_size()).setZero();
  detail::view(y, ith, p, M) = ctl.theta;
  y.segment(irho, M) = ctl.rho;

  struct Eval {
    Vector e, u, eps;
    RegressorFrame frame;
    DirectField field;
  };
  const auto evaluate = [&](double t, const Vector& yy, Eval& ev) {
    const Vector x = yy.segment(ix, n);
    const Vector xm = yy.segment(ixm, n);
    const Matrix theta = detail::view(yy, ith, p, M);
    const Vector rho = yy.segment(irho, M);
    const Vector r = sc.signal.at(detail::sample_index(t, sc.h), t);
    Vector omega(p);
    omega << x, r;
    ev.e = x - xm;
    ev.frame = ctl.bank.frame_at(yy.segment(ibank, ctl.bank.state_size()), theta, omega);
    ev.eps = epsilon_direct(ev.e, rho, ev.frame.xi);
    ev.u = theta.transpose() * omega;
    ev.field = direct_gradient(sc.gains, ev.eps, ev.frame);
    if (diag) zero_offdiagonal_block(ev.field.dtheta, n);
    Vector d(yy.size());
    d.segment(ix, n) = sc.plant.A * x + sc.plant.B * ev.u;
    d.segment(ixm, n) = sc.ref.A * xm + sc.ref.B * r;
    ctl.bank.derivative(yy.segment(ibank, ctl.bank.state_size()), omega, theta,
                        d.segment(ibank, ctl.bank.state_size()));
    detail::view(d, ith, p, M) = ev.field.dtheta;
    d.segment(irho, M) = ev.field.drho;
    return d;
  };
  const RightHandSide rhs = [&](double t, const Vector& yy) {
    Eval ev;
    return evaluate(t, yy, ev);
  };

  std::string failure;
  try {
    for (long k = 0; k <= sc.horizon; ++k) {
      const double t = static_cast<double>(k) * sc.h;
      Eval ev;
      evaluate(t, y, ev);
      StepRecord rec;
      rec.step = k;
      rec.time = t;
      rec.x = y.segment(ix, n);
      rec.xm = y.segment(ixm, n);
      rec.e = ev.e;
      rec.u = ev.u;
      rec.theta = detail::view(y, ith, p, M);
      rec.rho = y.segment(irho, M);
      rec.eps = ev.eps;
      rec.m = ev.frame.m;
      rec.eps_sq_over_m_sq = ev.eps.squaredNorm() / (ev.frame.m * ev.frame.m);
      rec.V = V_of(sc, rec.theta, rec.rho);
      detail::guard(k, y, "closed-loop state");

      Vector next;
      try {
        next = integrate_ct(rhs, t, y, sc.h, sc.integrator);
      } catch (const DivergenceError& err) {
        throw DivergenceError(k, err.what());
      }
      Matrix th_next = detail::view(next, ith, p, M);
      if (diag) {
        zero_offdiagonal_block(th_next, n);
        detail::view(next, ith, p, M) = th_next;
      }
      const Vector rho_next = next.segment(irho, M);
      rec.dtheta_sq = (th_next - rec.theta).squaredNorm();
      rec.drho_sq = (rho_next - rec.rho).squaredNorm();
      if (sc.truth) rec.dV = V_of(sc, th_next, rho_next) - rec.V;
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

DirectLoop::DirectLoop(const DirectScenario& sc) : sc_(sc) {
  check_scenario(sc);
  require_dims(sc.ref.domain == TimeDomain::discrete, "DirectLoop steps the discrete loop");
  ctl_ = make_direct_state(sc.ref, sc.theta0, sc.rho0);
  if (sc.gains.enforce_diagonal && sc.ref.inputs() > 1)
    zero_offdiagonal_block(ctl_.theta, sc.ref.states());
  x_ = detail::zeros_if_empty(sc.x0, sc.ref.states());
  xm_ = detail::zeros_if_empty(sc.xm0, sc.ref.states());
  require_dims(x_.size() == sc.ref.states() && xm_.size() == sc.ref.states(),
               "initial state length");
}

StepRecord DirectLoop::step() {
  const auto td = static_cast<double>(t_);
  const Vector r = sc_.signal.at(t_, td);
  Vector omega(x_.size() + r.size());
  omega << x_, r;

  StepRecord rec;
  rec.step = t_;
  rec.time = td;
  rec.x = x_;
  rec.xm = xm_;
  rec.e = x_ - xm_;
  frame_ = ctl_.bank.step(ctl_.theta, omega);
  rec.eps = epsilon_direct(rec.e, ctl_.rho, frame_.xi);
  rec.m = frame_.m;
  rec.eps_sq_over_m_sq = rec.eps.squaredNorm() / (frame_.m * frame_.m);
  rec.theta = ctl_.theta;
  rec.rho = ctl_.rho;
  rec.V = V_of(sc_, ctl_.theta, ctl_.rho);
  rec.u = control_direct(ctl_.theta, x_, r);

  try {
    update_direct_discrete(ctl_, sc_.gains, rec.eps, frame_);
  } catch (const DivergenceError&) {
    throw DivergenceError(t_, "non-finite parameter update");
  }
  rec.dtheta_sq = (ctl_.theta - rec.theta).squaredNorm();
  rec.drho_sq = (ctl_.rho - rec.rho).squaredNorm();
  if (sc_.truth) rec.dV = V_of(sc_, ctl_.theta, ctl_.rho) - rec.V;

  x_ = step_plant_discrete(sc_.plant, x_, rec.u);
  xm_ = step_reference_discrete(sc_.ref, xm_, r);
  detail::guard(t_, x_, "plant state");
  detail::guard(t_, rec.eps, "estimation error");
  ++t_;
  return rec;
}

SimulationTrace run_direct_scenario(const DirectScenario& sc) {
  check_scenario(sc);
  if (sc.ref.domain == TimeDomain::continuous) return run_ct(sc);

  SimulationTrace tr;
  init_trace(tr, sc);
  DirectLoop loop(sc);
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
