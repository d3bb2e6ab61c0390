#include "mrac/lyapunov_ct.hpp"

#include "detail.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace mrac {

LyapunovCertificate solve_lyapunov_ct(const Matrix& Am, const Matrix& Q) {
  const Index n = Am.rows();
  require_dims(Am.cols() == n && Q.rows() == n && Q.cols() == n, "A_m and Q must be n x n");
  std::vector<std::string> issues;
  if (!(spectral_abscissa(Am) < 0.0)) issues.push_back("A_m is not Hurwitz");
  if (!detail::symmetric(Q) || !(detail::eig_range(Q).first > 0.0))
    issues.push_back("Q must be symmetric positive definite");
  if (!issues.empty()) throw ValidationError(std::move(issues));

  // vec(A^T P + P A) = (I kron A^T + A^T kron I) vec(P)
  const Matrix I = Matrix::Identity(n, n);
  Matrix K = Matrix::Zero(n * n, n * n);
  const Matrix At = Am.transpose();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += I(i, j) * At;
      K.block(i * n, j * n, n, n) += At(i, j) * I;
    }
  const Vector q = -Eigen::Map<const Vector>(Q.data(), n * n);
  const Vector p = K.partialPivLu().solve(q);

  LyapunovCertificate c;
  c.Q = Q;
  c.P = Eigen::Map<const Matrix>(p.data(), n, n);
  c.P = 0.5 * (c.P + c.P.transpose()).eval();
  c.residual = (c.P * Am + At * c.P + Q).norm();
  c.min_eigenvalue = detail::eig_range(c.P).first;
  if (c.P.llt().info() != Eigen::Success || !(c.min_eigenvalue > 0.0))
    throw Error("Lyapunov solution is not positive definite");
  return c;
}

Matrix make_sp(const Vector& signs, const Vector& gammas) {
  require_dims(signs.size() == gammas.size(), "signs and gammas");
  return signs.cwiseProduct(gammas).asDiagonal();
}

std::vector<std::string> sp_issues(const Matrix& Sp, const Matrix& K2_star) {
  if (Sp.rows() != K2_star.rows() || Sp.cols() != K2_star.cols())
    return {"S_p must have the shape of K2*"};
  const Matrix Ms = K2_star * Sp;
  if (!detail::symmetric(Ms)) return {"K2* S_p is not symmetric"};
  if (!(detail::eig_range(Ms).first > 0.0)) return {"K2* S_p is not positive definite"};
  return {};
}

LyapunovDirectGains LyapunovDirectGains::single_input(const Matrix& Gamma, double gamma,
                                                      double sign) {
  return {Gamma, Matrix::Constant(1, 1, gamma), Matrix::Constant(1, 1, sign)};
}

LyapunovDirectGains LyapunovDirectGains::multi_input(Index states, const Vector& signs,
                                                     const Vector& gammas) {
  return {Matrix::Identity(states, states), Matrix::Identity(signs.size(), signs.size()),
          make_sp(signs, gammas)};
}

namespace {

std::vector<std::string> spd_issue(const Matrix& G, Index size, const std::string& name) {
  if (G.rows() != size || G.cols() != size)
    return {"gains: " + name + " must be " + std::to_string(size) + "x" + std::to_string(size)};
  if (!G.allFinite() || !detail::symmetric(G) || !(detail::eig_range(G).first > 0.0))
    return {"gains: " + name + " must be symmetric positive definite"};
  return {};
}

void append(std::vector<std::string>& to, std::vector<std::string> from) {
  for (auto& s : from) to.push_back(std::move(s));
}

}  // namespace

std::vector<std::string> gain_issues(const LyapunovDirectGains& g, Index n, Index M) {
  std::vector<std::string> issues;
  append(issues, spd_issue(g.Gamma1, n, "Gamma1"));
  append(issues, spd_issue(g.Gamma2, M, "Gamma2"));
  if (g.Sp.rows() != M || g.Sp.cols() != M) issues.push_back("gains: S_p must be M x M");
  else if (!g.Sp.allFinite() || g.Sp.fullPivLu().rank() < M)
    issues.push_back("gains: S_p must be nonsingular");
  return issues;
}

LyapunovDirectField lyapunov_direct_derivative(const Vector& e, const Vector& x, const Vector& r,
                                               const Matrix& P, const Matrix& Bm,
                                               const LyapunovDirectGains& g) {
  require_dims(e.size() == P.rows() && x.size() == P.rows() && Bm.rows() == P.rows() &&
                   r.size() == Bm.cols(),
               "Lyapunov direct signal lengths");
  const Vector s = g.Sp.transpose() * (Bm.transpose() * (P * e));  // S_p^T B_m^T P e
  LyapunovDirectField f;
  f.dK1 = -g.Gamma1 * x * s.transpose();
  f.dK2 = -s * r.transpose() * g.Gamma2;
  return f;
}

void update_lyapunov_direct_ct(Matrix& K1, Matrix& K2, const Vector& e, const Vector& x,
                               const Vector& r, const Matrix& P, const Matrix& Bm,
                               const LyapunovDirectGains& g, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("integration step must be positive");
  // the field does not depend on K when the signals are held, so every
  // RK4 stage sees the same slope
  const LyapunovDirectField f = lyapunov_direct_derivative(e, x, r, P, Bm, g);
  K1 += h * f.dK1;
  K2 += h * f.dK2;
}

double V_lyapunov_direct(const Vector& e, const Matrix& P, const Matrix& K1, const Matrix& K2,
                         const Matrix& K1_star, const Matrix& K2_star,
                         const LyapunovDirectGains& g) {
  const Matrix Ms = K2_star * g.Sp;
  const auto Ms_lu = Ms.partialPivLu();
  const Matrix dK1 = K1 - K1_star;
  const Matrix dK2 = K2 - K2_star;
  const Matrix Ms_inv = Ms_lu.inverse();
  const double t1 = (dK1.transpose() * g.Gamma1.llt().solve(dK1) * Ms_inv).trace();
  const double t2 = (dK2.transpose() * Ms_inv * dK2 * g.Gamma2.inverse()).trace();
  return e.dot(P * e) + t1 + t2;
}

LyapunovIndirectGains LyapunovIndirectGains::single_input(const Matrix& Gamma1, double gamma2) {
  LyapunovIndirectGains g;
  g.Gamma1 = Gamma1;
  g.Gamma2 = Matrix::Constant(1, 1, gamma2);
  return g;
}

std::vector<std::string> gain_issues(const LyapunovIndirectGains& g, Index n, Index M) {
  std::vector<std::string> issues;
  append(issues, spd_issue(g.Gamma1, g.alternate_theta1_law ? M : n, "Gamma1"));
  append(issues, spd_issue(g.Gamma2, M, "Gamma2"));
  if (issues.empty()) {
    Matrix off = g.Gamma2;
    off.diagonal().setZero();
    if (!off.isZero(0.0)) issues.push_back("gains: Gamma2 must be diagonal");
  }
  return issues;
}

LyapunovIndirectField lyapunov_indirect_derivative(const Vector& e_x, const Vector& x,
                                                   const Vector& u, const Matrix& P,
                                                   const Matrix& Bm, const Matrix& Theta2,
                                                   const LyapunovIndirectGains& g,
                                                   const ProjectionConfig& proj) {
  const Index n = P.rows();
  const Index M = Bm.cols();
  require_dims(e_x.size() == n && x.size() == n && u.size() == M && Theta2.rows() == M &&
                   Theta2.cols() == M,
               "Lyapunov indirect signal lengths");
  const Vector s = Bm.transpose() * (P * e_x);  // B_m^T P e_x
  LyapunovIndirectField f;
  f.dTheta1 = g.alternate_theta1_law ? Matrix(x * s.transpose() * g.Gamma1)
                                     : Matrix(g.Gamma1 * x * s.transpose());
  f.dTheta2 = -g.Gamma2 * u * s.transpose();
  if (g.enforce_diagonal && M > 1) {
    const Vector d = f.dTheta2.diagonal();
    f.dTheta2 = d.asDiagonal();
  }
  if (proj.enabled) {
    for (Index j = 0; j < M; ++j) {
      const double sg = proj.signs(j);
      if (sg * Theta2(j, j) <= proj.theta2_lower(j) && sg * f.dTheta2(j, j) < 0.0) {
        f.dTheta2(j, j) = 0.0;
        f.fired |= 1u << j;
      }
    }
  }
  return f;
}

std::uint32_t update_lyapunov_indirect_ct(Matrix& Theta1, Matrix& Theta2, const Vector& e_x,
                                          const Vector& x, const Vector& u, const Matrix& P,
                                          const Matrix& Bm, const LyapunovIndirectGains& g,
                                          const ProjectionConfig& proj, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("integration step must be positive");
  const LyapunovIndirectField f =
      lyapunov_indirect_derivative(e_x, x, u, P, Bm, Theta2, g, proj);
  Theta1 += h * f.dTheta1;
  Theta2 += h * f.dTheta2;
  std::uint32_t fired = f.fired;
  if (proj.enabled) {
    for (Index j = 0; j < Theta2.rows(); ++j) {
      const double sg = proj.signs(j);
      if (!(sg * Theta2(j, j) >= proj.theta2_lower(j))) {
        Theta2(j, j) = sg * proj.theta2_lower(j);
        fired |= 1u << j;
      }
    }
  }
  return fired;
}

double V_lyapunov_indirect(const Vector& e_x, const Matrix& P, const Matrix& Theta1,
                           const Matrix& Theta2, const Matrix& Theta1_star,
                           const Matrix& Theta2_star, const LyapunovIndirectGains& g) {
  const Matrix d1 = Theta1 - Theta1_star;
  const Matrix d2 = Theta2 - Theta2_star;
  const double t1 = g.alternate_theta1_law ? (d1 * g.Gamma1.llt().solve(Matrix(d1.transpose()))).trace()
                                           : (d1.transpose() * g.Gamma1.llt().solve(d1)).trace();
  const double t2 = (d2.transpose() * g.Gamma2.llt().solve(d2)).trace();
  return e_x.dot(P * e_x) + t1 + t2;
}

// ---------------------------------------------------------------------------

std::vector<std::string> scenario_issues(const LyapunovScenario& sc) {
  std::vector<std::string> issues = plant_issues(sc.plant);
  append(issues, reference_issues(sc.ref));
  if (!issues.empty()) return issues;
  const Index n = sc.ref.states();
  const Index M = sc.ref.inputs();
  if (sc.ref.domain != TimeDomain::continuous)
    issues.push_back("Lyapunov schemes need a continuous-time reference model");
  if (sc.plant.states() != n || sc.plant.inputs() != M)
    issues.push_back("plant and reference model dimensions differ");
  if (sc.signal.dimension() != M) issues.push_back("reference signal needs one channel per input");
  if (sc.Q.size() && (sc.Q.rows() != n || sc.Q.cols() != n)) issues.push_back("Q must be n x n");
  if (sc.theta0.size() && (sc.theta0.rows() != n + M || sc.theta0.cols() != M))
    issues.push_back("init: theta0 must be (n+M) x M");
  detail::length_issue(sc.x0, n, "x0", issues);
  detail::length_issue(sc.xm0, n, "xm0", issues);
  detail::length_issue(sc.x_hat0, n, "x_hat0", issues);
  if (!(sc.h > 0.0)) issues.push_back("integration step must be positive");
  if (sc.horizon < 0) issues.push_back("horizon must be nonnegative");
  if (sc.variant == LyapunovVariant::direct) {
    append(issues, gain_issues(sc.direct, n, M));
    if (sc.truth && issues.empty()) append(issues, sp_issues(sc.direct.Sp, sc.truth->K2));
  } else {
    append(issues, gain_issues(sc.indirect, n, M));
    Matrix theta0 = sc.theta0;
    if (!theta0.size()) {
      theta0 = Matrix::Zero(n + M, M);
      theta0.bottomRows(M).setIdentity();
    }
    append(issues, projection_issues(sc.projection, n, M, &theta0));
  }
  if (issues.empty()) {
    try {
      solve_lyapunov_ct(sc.ref.A, sc.Q.size() ? sc.Q : Matrix(Matrix::Identity(n, n)));
    } catch (const ValidationError& err) {
      append(issues, err.issues());
    }
  }
  return issues;
}

LyapunovLoop::LyapunovLoop(const LyapunovScenario& sc) : sc_(sc) {
  auto issues = scenario_issues(sc);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  n_ = sc.ref.states();
  M_ = sc.ref.inputs();
  cert_ = solve_lyapunov_ct(sc.ref.A, sc.Q.size() ? sc.Q : Matrix(Matrix::Identity(n_, n_)));

  const bool indirect = sc.variant == LyapunovVariant::indirect;
  detail::Layout lay;
  ix_ = lay.add(n_);
  ixm_ = lay.add(n_);
  if (indirect) ixh_ = lay.add(n_);
  ith_ = lay.add((n_ + M_) * M_);
  y_ = Vector::Zero(lay.size);
  y_.segment(ix_, n_) = detail::zeros_if_empty(sc.x0, n_);
  y_.segment(ixm_, n_) = detail::zeros_if_empty(sc.xm0, n_);
  require_dims(y_.segment(ix_, n_).size() == n_, "x0 length");

  Matrix th = sc.theta0;
  if (!th.size()) {
    th = Matrix::Zero(n_ + M_, M_);
    if (indirect) th.bottomRows(M_).setIdentity();
  }
  if (indirect) {
    y_.segment(ixh_, n_) = sc.x_hat0.size() ? sc.x_hat0 : Vector(y_.segment(ix_, n_));
    if (sc.indirect.enforce_diagonal && M_ > 1) {
      const Vector d = th.bottomRows(M_).diagonal();
      th.bottomRows(M_) = d.asDiagonal();
    }
  }
  detail::view(y_, ith_, n_ + M_, M_) = th;

  if (sc.truth) {
    theta_star_.resize(n_ + M_, M_);
    if (indirect) {
      theta_star_ = indirect_truth(*sc.truth).theta;
    } else {
      theta_star_.topRows(n_) = sc.truth->K1;
      theta_star_.bottomRows(M_) = sc.truth->K2.transpose();
    }
  }
}

Vector LyapunovLoop::x_hat(const Vector& y) const {
  return sc_.variant == LyapunovVariant::indirect ? Vector(y.segment(ixh_, n_)) : Vector();
}

Matrix LyapunovLoop::theta(const Vector& y) const {
  return detail::view(y, ith_, n_ + M_, M_);
}

Vector LyapunovLoop::error(const Vector& y) const {
  if (sc_.variant == LyapunovVariant::indirect) return y.segment(ixh_, n_) - y.segment(ix_, n_);
  return y.segment(ix_, n_) - y.segment(ixm_, n_);
}

Vector LyapunovLoop::control(const Vector& y, double t) const {
  const Vector r = sc_.signal.at(detail::sample_index(t, sc_.h), t);
  const Matrix th = theta(y);
  if (sc_.variant == LyapunovVariant::direct)
    return control_direct(th, y.segment(ix_, n_), r);
  return control_indirect(th, sc_.projection, y.segment(ix_, n_), r);
}

double LyapunovLoop::V(const Vector& y) const {
  if (!sc_.truth) return kNaN;
  const Matrix th = theta(y);
  const Vector e = error(y);
  if (sc_.variant == LyapunovVariant::direct)
    return V_lyapunov_direct(e, cert_.P, th.topRows(n_), th.bottomRows(M_).transpose(),
                             sc_.truth->K1, sc_.truth->K2, sc_.direct);
  return V_lyapunov_indirect(e, cert_.P, th.topRows(n_), th.bottomRows(M_),
                             theta_star_.topRows(n_), theta_star_.bottomRows(M_), sc_.indirect);
}

double LyapunovLoop::error_energy(const Vector& y) const {
  const Vector e = error(y);
  return e.dot(cert_.Q * e);
}

Vector LyapunovLoop::derivative(double t, const Vector& y, std::uint32_t* fired) const {
  const Vector x = y.segment(ix_, n_);
  const Vector xm = y.segment(ixm_, n_);
  const Vector r = sc_.signal.at(detail::sample_index(t, sc_.h), t);
  const Matrix th = theta(y);
  const Vector u = control(y, t);
  Vector d(y.size());
  d.segment(ix_, n_) = sc_.plant.A * x + sc_.plant.B * u;
  d.segment(ixm_, n_) = sc_.ref.A * xm + sc_.ref.B * r;
  if (sc_.variant == LyapunovVariant::direct) {
    const auto f = lyapunov_direct_derivative(x - xm, x, r, cert_.P, sc_.ref.B, sc_.direct);
    Matrix dth(n_ + M_, M_);
    dth.topRows(n_) = f.dK1;
    dth.bottomRows(M_) = f.dK2.transpose();
    detail::view(d, ith_, n_ + M_, M_) = dth;
  } else {
    const Vector xh = y.segment(ixh_, n_);
    const Matrix T1 = th.topRows(n_);
    const Matrix T2 = th.bottomRows(M_);
    const auto f = lyapunov_indirect_derivative(xh - x, x, u, cert_.P, sc_.ref.B, T2,
                                                sc_.indirect, sc_.projection);
    if (fired) *fired |= f.fired;
    d.segment(ixh_, n_) = sc_.ref.A * xh + sc_.ref.B * (T2.transpose() * u - T1.transpose() * x);
    Matrix dth(n_ + M_, M_);
    dth.topRows(n_) = f.dTheta1;
    dth.bottomRows(M_) = f.dTheta2;
    detail::view(d, ith_, n_ + M_, M_) = dth;
  }
  return d;
}

void LyapunovLoop::post_step(Vector& y, std::uint32_t* fired) const {
  if (sc_.variant != LyapunovVariant::indirect || !sc_.projection.enabled) return;
  for (Index j = 0; j < M_; ++j) {
    double& v = y(ith_ + j * (n_ + M_) + n_ + j);
    const double sg = sc_.projection.signs(j);
    if (!(sg * v >= sc_.projection.theta2_lower(j))) {
      v = sg * sc_.projection.theta2_lower(j);
      if (fired) *fired |= 1u << j;
    }
  }
}

Vector LyapunovLoop::step_from(const Vector& y, double t, double h) const {
  std::uint32_t fired = 0;
  const RightHandSide rhs = [&](double tt, const Vector& yy) { return derivative(tt, yy, &fired); };
  Vector next = integrate_ct(rhs, t, y, h, sc_.integrator);
  post_step(next, &fired);
  last_fired_ = fired;
  return next;
}

void LyapunovLoop::advance() {
  y_ = step_from(y_, t_, sc_.h);
  t_ += sc_.h;
}

SimulationTrace run_lyapunov_scenario(const LyapunovScenario& sc) {
  LyapunovLoop loop(sc);
  const bool indirect = sc.variant == LyapunovVariant::indirect;
  SimulationTrace tr;
  tr.scheme = indirect ? Scheme::lyapunov_indirect : Scheme::lyapunov_direct;
  tr.domain = TimeDomain::continuous;
  tr.states = loop.n_;
  tr.inputs = loop.M_;
  tr.step_size = sc.h;
  tr.horizon = sc.horizon;
  tr.has_V = sc.truth.has_value();
  if (sc.truth) tr.gamma0 = 2.0;
  tr.records.reserve(static_cast<std::size_t>(sc.horizon) + 1);

  std::string failure;
  try {
    for (long k = 0; k <= sc.horizon; ++k) {
      const double t = static_cast<double>(k) * sc.h;
      const Vector& y = loop.y_;
      StepRecord rec;
      rec.step = k;
      rec.time = t;
      rec.x = loop.x(y);
      rec.xm = loop.xm(y);
      rec.e = rec.x - rec.xm;
      rec.x_hat = loop.x_hat(y);
      rec.theta = loop.theta(y);
      try {
        rec.u = loop.control(y, t);
      } catch (const SingularityError& err) {
        throw DivergenceError(k, err.what());
      }
      rec.eps = loop.error(y);
      rec.m = 1.0;
      rec.eps_sq_over_m_sq = rec.eps.squaredNorm();
      rec.V = loop.V(y);
      detail::guard(k, y, "closed-loop state");
      Vector next;
      try {
        next = loop.step_from(y, t, sc.h);
      } catch (const Error& err) {
        throw DivergenceError(k, err.what());
      }
      rec.proj_fired = loop.last_fired_;
      rec.dtheta_sq = (loop.theta(next) - rec.theta).squaredNorm();
      if (sc.truth) rec.dV = loop.V(next) - rec.V;
      tr.records.push_back(std::move(rec));
      loop.y_ = std::move(next);
      loop.t_ = t + sc.h;
    }
  } catch (const DivergenceError& err) {
    failure = err.what();
  }
  detail::finish(tr, failure);
  return tr;
}

}  // namespace mrac
