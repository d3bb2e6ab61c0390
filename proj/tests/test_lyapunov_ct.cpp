#include "mrac/lyapunov_ct.hpp"
#include "mrac/random_system.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace mrac;

namespace {

LyapunovScenario ct_scenario(LyapunovVariant v, double scale) {
  LyapunovScenario sc;
  sc.plant = oracle::ct_plant();
  sc.ref = oracle::ct_ref();
  sc.signal = ReferenceSignal::sum_of_sines({{{1.0, 0.5, 0.0}, {0.5, 1.7, 0.0}}});
  sc.Q = Matrix::Identity(2, 2);
  sc.variant = v;
  sc.truth = solve_matching(sc.plant, sc.ref);
  const auto& m = *sc.truth;
  if (v == LyapunovVariant::direct) {
    sc.direct = LyapunovDirectGains::single_input(2.0 * Matrix::Identity(2, 2), 2.0, 1.0);
    sc.theta0.resize(3, 1);
    sc.theta0 << m.K1, m.K2.transpose();
  } else {
    sc.indirect = LyapunovIndirectGains::single_input(2.0 * Matrix::Identity(2, 2), 2.0);
    sc.projection = ProjectionConfig::from_upper_bound(Vector::Ones(1), Vector::Ones(1));
    sc.theta0 = indirect_truth(m).theta;
  }
  sc.theta0 *= scale;
  sc.x0 = sc.xm0 = Vector::Zero(2);
  sc.horizon = 2000;
  sc.h = 0.01;
  return sc;
}

}  // namespace

TEST_CASE("Lyapunov solver") {
  const auto c = solve_lyapunov_ct(-Matrix::Identity(2, 2), 2 * Matrix::Identity(2, 2));
  CHECK((c.P - Matrix::Identity(2, 2)).norm() <= 1e-14);

  Matrix A(2, 2);
  A << 0, 1, -2, -3;
  const auto d = solve_lyapunov_ct(A, Matrix::Identity(2, 2));
  const auto want = oracle::lyap2(A, Matrix::Identity(2, 2));
  CHECK(std::abs(d.P(0, 0) - want[0]) <= 1e-12);
  CHECK(std::abs(d.P(0, 1) - want[1]) <= 1e-12);
  CHECK(std::abs(d.P(1, 0) - want[1]) <= 1e-12);
  CHECK(std::abs(d.P(1, 1) - want[2]) <= 1e-12);
  CHECK(d.residual <= 1e-12);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix H = random_hurwitz(seed, 4);
    const auto e = solve_lyapunov_ct(H, Matrix::Identity(4, 4));
    CHECK(e.residual <= 1e-9);
    CHECK(e.min_eigenvalue > 0.0);
    CHECK((e.P * H + H.transpose() * e.P + Matrix::Identity(4, 4)).norm() <= 1e-9);
  }

  CHECK_THROWS_AS(solve_lyapunov_ct(Matrix::Identity(2, 2), Matrix::Identity(2, 2)), ValidationError);
  CHECK_THROWS_AS(solve_lyapunov_ct(A, -Matrix::Identity(2, 2)), ValidationError);
}

TEST_CASE("desk example certificate") {
  const auto c = solve_lyapunov_ct(oracle::ct_ref().A, Matrix::Identity(2, 2));
  const auto want = oracle::lyap2(oracle::ct_ref().A, Matrix::Identity(2, 2));
  CHECK(c.residual <= 1e-9);
  CHECK(std::abs(c.P(0, 0) - want[0]) <= 1e-12);
  CHECK(std::abs(c.P(1, 1) - want[2]) <= 1e-12);
}

TEST_CASE("direct Lyapunov law derivatives") {
  const Matrix P = Matrix::Ones(1, 1), Bm = Matrix::Ones(1, 1);
  const auto g = LyapunovDirectGains::single_input(Matrix::Ones(1, 1), 1.0, 1.0);
  const auto f = lyapunov_direct_derivative(Vector::Ones(1), Vector::Constant(1, 2.0),
                                            Vector::Constant(1, 3.0), P, Bm, g);
  CHECK(f.dK1(0, 0) == -2.0);
  CHECK(f.dK2(0, 0) == -3.0);
  const auto neg = LyapunovDirectGains::single_input(Matrix::Ones(1, 1), 1.0, -1.0);
  const auto fn = lyapunov_direct_derivative(Vector::Ones(1), Vector::Constant(1, 2.0),
                                             Vector::Constant(1, 3.0), P, Bm, neg);
  CHECK(fn.dK1 == -f.dK1);
  CHECK(fn.dK2 == -f.dK2);

  Matrix K1 = Matrix::Ones(1, 1), K2 = Matrix::Ones(1, 1);
  update_lyapunov_direct_ct(K1, K2, Vector::Zero(1), Vector::Constant(1, 2.0),
                            Vector::Constant(1, 3.0), P, Bm, g, 0.1);
  CHECK(K1(0, 0) == 1.0);
  CHECK(K2(0, 0) == 1.0);
}

TEST_CASE("indirect Lyapunov law derivatives") {
  const Matrix P = Matrix::Ones(1, 1), Bm = Matrix::Ones(1, 1);
  const auto g = LyapunovIndirectGains::single_input(Matrix::Ones(1, 1), 1.0);
  ProjectionConfig proj;
  proj.theta2_lower = Vector::Constant(1, 0.1);
  proj.signs = Vector::Ones(1);
  const auto f = lyapunov_indirect_derivative(Vector::Constant(1, 0.5), Vector::Ones(1),
                                              Vector::Constant(1, 2.0), P, Bm,
                                              Matrix::Constant(1, 1, 2.0), g, proj);
  CHECK(f.dTheta1(0, 0) == 0.5);
  CHECK(f.dTheta2(0, 0) == -1.0);
  CHECK(f.fired == 0u);

  // on the boundary the outward derivative is cancelled
  const auto b = lyapunov_indirect_derivative(Vector::Constant(1, 0.5), Vector::Ones(1),
                                              Vector::Constant(1, 2.0), P, Bm,
                                              Matrix::Constant(1, 1, 0.1), g, proj);
  CHECK(b.dTheta2(0, 0) == 0.0);
  CHECK(b.fired == 1u);
  Matrix T1 = Matrix::Ones(1, 1), T2 = Matrix::Constant(1, 1, 0.1);
  update_lyapunov_indirect_ct(T1, T2, Vector::Constant(1, 0.5), Vector::Ones(1),
                              Vector::Constant(1, 2.0), P, Bm, g, proj, 0.1);
  CHECK(T2(0, 0) == 0.1);

  Matrix S1 = Matrix::Ones(1, 1), S2 = Matrix::Constant(1, 1, 2.0);
  update_lyapunov_indirect_ct(S1, S2, Vector::Zero(1), Vector::Ones(1), Vector::Constant(1, 2.0),
                              P, Bm, g, proj, 0.1);
  CHECK(S1(0, 0) == 1.0);
  CHECK(S2(0, 0) == 2.0);
}

TEST_CASE("Lyapunov functions vanish at the truth") {
  const auto m = solve_matching(oracle::ct_plant(), oracle::ct_ref());
  const auto P = solve_lyapunov_ct(oracle::ct_ref().A, Matrix::Identity(2, 2)).P;
  const auto g = LyapunovDirectGains::single_input(Matrix::Identity(2, 2), 1.0, 1.0);
  CHECK(V_lyapunov_direct(Vector::Zero(2), P, m.K1, m.K2, m.K1, m.K2, g) == 0.0);
  Vector e(2);
  e << 1, 0;
  CHECK(std::abs(V_lyapunov_direct(e, P, m.K1, m.K2, m.K1, m.K2, g) - P(0, 0)) <= 1e-15);
}

TEST_CASE("exact parameters keep the error at zero") {
  for (auto v : {LyapunovVariant::direct, LyapunovVariant::indirect}) {
    auto sc = ct_scenario(v, 1.0);
    sc.horizon = 500;
    const auto tr = run_lyapunov_scenario(sc);
    REQUIRE_FALSE(tr.diverged);
    for (const auto& r : tr.records) CHECK(r.e.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("V nonincreasing along the sampled trajectory") {
  for (auto v : {LyapunovVariant::direct, LyapunovVariant::indirect}) {
    const auto tr = run_lyapunov_scenario(ct_scenario(v, 1.25));
    REQUIRE_FALSE(tr.diverged);
    CHECK(tr.records.size() == 2001);
    CHECK(tr.has_V);
    CHECK(check_delta_V(lyapunov_series(tr), 2.0, 1e-6).pass);
  }
}

TEST_CASE("estimator converges to the reference") {
  auto sc = ct_scenario(LyapunovVariant::indirect, 1.25);
  Vector xh(2);
  xh << 1.0, -1.0;
  sc.x_hat0 = xh;
  const auto tr = run_lyapunov_scenario(sc);
  const double first = (tr.records.front().x_hat - tr.records.front().xm).norm();
  const double last = (tr.records.back().x_hat - tr.records.back().xm).norm();
  CHECK(first > 1.0);
  CHECK(last <= 1e-6);
}

TEST_CASE("step increment of V matches the derivative to first order") {
  for (auto v : {LyapunovVariant::direct, LyapunovVariant::indirect}) {
    auto sc = ct_scenario(v, 1.25);
    Vector x0(2);
    x0 << 0.5, -0.3;
    sc.x0 = x0;
    sc.x_hat0 = Vector::Zero(2);
    LyapunovLoop loop(sc);
    const Vector y0 = loop.state();
    const double V0 = loop.V(y0);
    const double rate = -loop.error_energy(y0);
    auto corr = [&](double h) { return loop.V(loop.step_from(y0, 0.0, h)) - V0 - h * rate; };
    const double ratio = corr(0.01) / corr(0.005);
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_CASE("S_p must make K2* S_p positive definite") {
  Matrix K2 = Matrix::Constant(1, 1, 0.5);
  CHECK(sp_issues(make_sp(Vector::Ones(1), Vector::Ones(1)), K2).empty());
  CHECK_FALSE(sp_issues(make_sp(-Vector::Ones(1), Vector::Ones(1)), K2).empty());
}

TEST_CASE("Lyapunov scenarios need continuous time") {
  auto sc = ct_scenario(LyapunovVariant::direct, 1.25);
  sc.ref.domain = TimeDomain::discrete;
  CHECK_FALSE(scenario_issues(sc).empty());
}
