#include "mrac/gradient_direct.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace mrac;

namespace {

DirectScenario paper_scenario(double scale, bool two_tones, long horizon = 5000) {
  DirectScenario sc;
  sc.plant = oracle::paper_plant();
  sc.ref = oracle::paper_ref();
  std::vector<Sinusoid> terms{{1.0, 0.13, 0.0}};
  if (two_tones) terms.push_back({1.0, 1.3, 0.0});
  sc.signal = ReferenceSignal::sum_of_sines({terms});
  sc.gains = DirectGainConfig::single_input(0.5 * Matrix::Identity(3, 3), 1.5, 1.0, 0.5);
  sc.truth = direct_truth(solve_matching(sc.plant, sc.ref));
  sc.theta0 = scale * sc.truth->theta;
  sc.rho0 = scale * sc.truth->rho;
  sc.x0 = Vector::Zero(2);
  sc.xm0 = Vector::Zero(2);
  sc.horizon = horizon;
  return sc;
}

RegressorFrame toy_frame() {
  RegressorFrame f;
  f.zeta = {Matrix(1, 2)};
  f.zeta[0] << 1, 0;
  f.xi = Matrix::Constant(1, 1, 1.0);
  f.m = std::sqrt(3.0);
  return f;
}

}  // namespace

TEST_CASE("direct control law") {
  Matrix th(3, 1);
  th << -0.475, -1.1, 0.5;
  Vector x(2), r(1);
  x << 1, 1;
  r << 2;
  CHECK(std::abs(control_direct(th, x, r)(0) + 0.575) <= 1e-15);
  CHECK(control_direct(Matrix::Zero(3, 1), x, r).isZero(0.0));
  Matrix mimo = Matrix::Zero(5, 2);
  mimo.bottomRows(2) = Matrix::Identity(2, 2);
  Vector r2(2);
  r2 << 1, 2;
  CHECK(control_direct(mimo, Vector::Ones(3), r2) == r2);
}

TEST_CASE("direct estimation error") {
  Vector e(2), xi(2);
  e << 1, -1;
  xi << 0.5, 0.25;
  CHECK(epsilon_direct(e, Vector::Zero(1), xi) == e);
  CHECK(epsilon_direct(Vector::Zero(2), Vector::Constant(1, 2.0), Matrix::Zero(2, 1)).isZero(0.0));
  const Vector eps = epsilon_direct(e, Vector::Constant(1, 2.0), xi);
  CHECK(eps(0) == 2.0);
  CHECK(eps(1) == -0.5);
}

TEST_CASE("direct discrete update arithmetic") {
  ReferenceModel r;
  r.A = Matrix::Constant(1, 1, 0.5);
  r.B = Matrix::Ones(1, 1);
  auto g = DirectGainConfig::single_input(0.3 * Matrix::Identity(2, 2), 0.3, 1.0, 1.0);
  auto s = make_direct_state(r, Matrix::Zero(2, 1), Vector::Zero(1));
  update_direct_discrete(s, g, Vector::Constant(1, 0.5), toy_frame());
  CHECK(std::abs(s.theta(0, 0) + 0.05) <= 1e-15);
  CHECK(s.theta(1, 0) == 0.0);
  CHECK(std::abs(s.rho(0) + 0.05) <= 1e-15);

  auto s2 = make_direct_state(r, Matrix::Ones(2, 1), Vector::Ones(1));
  update_direct_discrete(s2, g, Vector::Zero(1), toy_frame());
  CHECK(s2.theta == Matrix::Ones(2, 1));
  CHECK(s2.rho == Vector::Ones(1));
}

TEST_CASE("direct continuous update") {
  auto g = DirectGainConfig::single_input(Matrix::Identity(2, 2), 1.0, 1.0, 1.0,
                                          TimeDomain::continuous);
  Matrix th = Matrix::Ones(2, 1);
  th(1, 0) = 0.0;
  Vector rho = Vector::Zero(1);
  // eps * zeta = theta_0 so theta_0 decays like exp(-t)
  const DirectSignals toy = [](const Matrix& t, const Vector&, Vector& eps, RegressorFrame& f) {
    f.zeta = {Matrix(1, 2)};
    f.zeta[0] << 1, 0;
    f.xi = Matrix::Zero(1, 1);
    f.m = 1.0;
    eps = Vector::Constant(1, t(0, 0));
  };
  update_direct_ct(th, rho, g, toy, 0.1);
  CHECK(std::abs(th(0, 0) - 0.9048375) <= 1e-7);
  CHECK(std::abs(th(0, 0) - std::exp(-0.1)) <= 1e-7);
  CHECK(rho(0) == 0.0);

  Matrix still = Matrix::Ones(2, 1);
  const DirectSignals zero = [](const Matrix&, const Vector&, Vector& eps, RegressorFrame& f) {
    f.zeta = {Matrix::Ones(1, 2)};
    f.xi = Matrix::Ones(1, 1);
    f.m = 2.0;
    eps = Vector::Zero(1);
  };
  update_direct_ct(still, rho, g, zero, 0.1);
  CHECK(still == Matrix::Ones(2, 1));
}

TEST_CASE("sign flip negates the theta step") {
  auto g = DirectGainConfig::single_input(0.3 * Matrix::Identity(2, 2), 0.3, 1.0, 1.0);
  const auto a = direct_gradient(g, Vector::Constant(1, 0.5), toy_frame());
  g.signs(0) = -1.0;
  const auto b = direct_gradient(g, Vector::Constant(1, 0.5), toy_frame());
  CHECK(a.dtheta == -b.dtheta);
  CHECK(a.drho == b.drho);
}

TEST_CASE("gain bounds") {
  const Index n = 2;
  auto ok = DirectGainConfig::single_input(0.5 * Matrix::Identity(3, 3), 1.5, 1.0, 0.5);
  CHECK(gain_issues(ok, n).empty());
  auto big = DirectGainConfig::single_input(3 * 0.5 * Matrix::Identity(3, 3), 1.5, 1.0, 0.5);
  const auto issues = gain_issues(big, n);
  REQUIRE_FALSE(issues.empty());
  CHECK(issues[0].find("2*") != std::string::npos);
  auto gam = DirectGainConfig::single_input(0.5 * Matrix::Identity(3, 3), 2.0, 1.0, 0.5);
  CHECK_FALSE(gain_issues(gam, n).empty());
  auto neg = DirectGainConfig::single_input(-0.5 * Matrix::Identity(3, 3), 1.0, 1.0, 0.5);
  CHECK_FALSE(gain_issues(neg, n).empty());
  Matrix asym = 0.5 * Matrix::Identity(3, 3);
  asym(0, 1) = 0.1;
  CHECK_FALSE(gain_issues(DirectGainConfig::single_input(asym, 1.0, 1.0, 0.5), n).empty());
  // continuous time has no upper bound
  auto ct = DirectGainConfig::single_input(50 * Matrix::Identity(3, 3), 10.0, 1.0, 0.5,
                                           TimeDomain::continuous);
  CHECK(gain_issues(ct, n).empty());
  CHECK_THROWS_AS(validate(big, n), ValidationError);
}

TEST_CASE("diagonal enforcement zeroes the coupling entries") {
  Matrix th = Matrix::Ones(5, 2);
  zero_offdiagonal_block(th, 3);
  CHECK(th(3, 1) == 0.0);
  CHECK(th(4, 0) == 0.0);
  CHECK(th(3, 0) == 1.0);
  CHECK(th(4, 1) == 1.0);
  CHECK(th.topRows(3) == Matrix::Ones(3, 2));
}

TEST_CASE("nominal parameters keep the loop on the reference") {
  auto sc = paper_scenario(1.0, true, 1000);
  Vector x0(2);
  x0 << 0.3, -0.2;
  sc.x0 = sc.xm0 = x0;
  const auto tr = run_direct_scenario(sc);
  REQUIRE(tr.records.size() == 1001);
  for (const auto& r : tr.records) {
    CHECK(r.e.cwiseAbs().maxCoeff() <= 1e-10);
    // frozen up to rounding in A + B K1' vs A_m
    CHECK((r.theta - sc.theta0).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((r.rho - sc.rho0).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("library loop agrees with a scalar re-implementation") {
  const auto sc = paper_scenario(1.25, true, 400);
  const auto tr = run_direct_scenario(sc);
  const double A[2][2] = {{1, -1}, {2, 1}}, b[2] = {0, 2};
  const double Am[2][2] = {{1, -1}, {1.05, -1.2}}, bm[2] = {0, 1};
  const double th0[3] = {1.25 * -0.475, 1.25 * -1.1, 1.25 * 0.5};
  const auto ref = oracle::naive_direct_simo(
      A, b, Am, bm, 0.5, 1.5, 1.0, th0, 2.5,
      [](long t) { return std::sin(0.13 * t) + std::sin(1.3 * t); }, 400);
  REQUIRE(tr.records.size() == ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const auto& r = tr.records[k];
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(r.e(i) - ref[k].e[i]) <= 1e-11);
      CHECK(std::abs(r.eps(i) - ref[k].eps[i]) <= 1e-11);
    }
    CHECK(std::abs(r.u(0) - ref[k].u) <= 1e-11);
    CHECK(std::abs(r.m * r.m - ref[k].m2) <= 1e-10 * ref[k].m2);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(r.theta(c, 0) - ref[k].theta[c]) <= 1e-11);
    CHECK(std::abs(r.rho(0) - ref[k].rho) <= 1e-11);
  }
}

TEST_CASE("second-order example converges with a monotone Lyapunov function") {
  for (bool two : {false, true}) {
    const auto tr = run_direct_scenario(paper_scenario(1.25, two));
    REQUIRE_FALSE(tr.diverged);
    CHECK(tr.records.size() == 5001);
    CHECK(tr.gamma0 == doctest::Approx(1.5));
    const auto chk = check_delta_V(lyapunov_series(tr), tr.gamma0, 1e-10);
    CHECK(chk.pass);
    CHECK(tr.summary.last_window_max_e <= 1e-2);
  }
}

TEST_CASE("scenario validation lists every problem") {
  auto sc = paper_scenario(1.25, false);
  sc.ref.A = Matrix::Identity(2, 2) * 1.1;
  sc.gains.gamma(0) = 3.0;
  sc.horizon = -1;
  const auto issues = scenario_issues(sc);
  CHECK(issues.size() >= 3);
  CHECK_THROWS_AS(run_direct_scenario(sc), ValidationError);
}

TEST_CASE("divergence truncates the trace") {
  auto sc = paper_scenario(1.25, false, 2000);
  sc.ref.A << 0.999, 0, 0, 0.999;  // stable but the plant runs open loop on zero gains
  sc.theta0 = Matrix::Zero(3, 1);
  sc.gains = DirectGainConfig::single_input(1e-12 * Matrix::Identity(3, 3), 1e-12, 1.0, 0.5);
  sc.truth.reset();
  const auto tr = run_direct_scenario(sc);
  CHECK(tr.diverged);
  CHECK(tr.records.size() < 2001);
  CHECK_FALSE(tr.failure.empty());
}

TEST_CASE("continuous direct gradient keeps V nonincreasing") {
  DirectScenario sc;
  sc.plant = oracle::ct_plant();
  sc.ref = oracle::ct_ref();
  sc.signal = ReferenceSignal::sum_of_sines({{{1.0, 0.5, 0.0}, {0.5, 1.7, 0.0}}});
  sc.gains = DirectGainConfig::single_input(2.0 * Matrix::Identity(3, 3), 2.0, 1.0, 0.5,
                                            TimeDomain::continuous);
  sc.truth = direct_truth(solve_matching(sc.plant, sc.ref));
  CHECK(std::abs(sc.truth->theta(0, 0) - 1.5) <= 1e-12);
  CHECK(std::abs(sc.truth->theta(1, 0) + 2.0) <= 1e-12);
  sc.theta0 = 1.25 * sc.truth->theta;
  sc.rho0 = 1.25 * sc.truth->rho;
  sc.x0 = sc.xm0 = Vector::Zero(2);
  sc.horizon = 3000;
  sc.h = 0.01;
  const auto tr = run_direct_scenario(sc);
  REQUIRE_FALSE(tr.diverged);
  CHECK(tr.records.size() == 3001);
  for (const auto& r : tr.records) CHECK(r.dV <= 1e-6);
}
