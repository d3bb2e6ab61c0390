#include "mrac/random_system.hpp"

#include <Eigen/SVD>

#include <numbers>
#include <random>

namespace mrac {

namespace {

Matrix uniform(std::mt19937_64& rng, Index rows, Index cols, double range) {
  std::uniform_real_distribution<double> d(-range, range);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

}  // namespace

RandomSystem random_matchable_system(std::uint64_t seed, const RandomFamily& f) {
  std::mt19937_64 rng(seed);
  RandomSystem s;
  s.ref.domain = TimeDomain::discrete;
  do {
    s.ref.A = uniform(rng, f.states, f.states, f.am_range);
  } while (!(spectral_radius(s.ref.A) < f.am_radius_max));
  do {
    s.ref.B = uniform(rng, f.states, f.inputs, f.bm_range);
  } while (Eigen::JacobiSVD<Matrix>(s.ref.B).singularValues().minCoeff() < f.bm_min_singular);

  s.K1 = uniform(rng, f.states, f.inputs, f.k1_range);
  std::uniform_real_distribution<double> mag(f.k2_min, f.k2_max);
  std::bernoulli_distribution flip(0.5);
  s.K2 = f.diagonal_k2 ? Matrix::Zero(f.inputs, f.inputs)
                       : uniform(rng, f.inputs, f.inputs, 0.1 * f.k2_min);
  for (Index j = 0; j < f.inputs; ++j) {
    const double v = mag(rng);
    s.K2(j, j) = flip(rng) ? -v : v;
  }
  s.plant = plant_from_matching(s.ref, s.K1, s.K2);
  return s;
}

Matrix random_hurwitz(std::uint64_t seed, Index n) {
  std::mt19937_64 rng(seed);
  Matrix A = uniform(rng, n, n, 1.0);
  const double shift = spectral_abscissa(A);
  A -= (shift + 0.5) * Matrix::Identity(n, n);
  return A;
}

ReferenceSignal mimo_reference(Index inputs) {
  const double half_pi = std::numbers::pi / 2.0;
  std::vector<std::vector<Sinusoid>> ch;
  for (Index j = 0; j < inputs; ++j) {
    if (j % 2 == 0)
      ch.push_back({{1.0, 0.13 + 0.05 * static_cast<double>(j), 0.0},
                    {1.0, 0.7 + 0.1 * static_cast<double>(j), 0.0}});
    else
      ch.push_back({{1.0, 0.29 + 0.05 * static_cast<double>(j - 1), half_pi},
                    {1.0, 1.1 + 0.1 * static_cast<double>(j - 1), 0.0}});
  }
  return ReferenceSignal::sum_of_sines(std::move(ch));
}

DirectScenario random_direct_scenario(const RandomSystem& sys, long horizon) {
  const Index n = sys.ref.states();
  const Index M = sys.ref.inputs();
  DirectScenario sc;
  sc.plant = sys.plant;
  sc.ref = sys.ref;
  sc.signal = mimo_reference(M);
  sc.gains.gamma = Vector::Constant(M, 1.5);
  sc.gains.signs.resize(M);
  sc.gains.k2_lower.resize(M);
  for (Index j = 0; j < M; ++j) {
    const double k2 = sys.K2(j, j);
    sc.gains.signs(j) = k2 > 0 ? 1.0 : -1.0;
    sc.gains.k2_lower(j) = std::abs(k2);
    sc.gains.Gamma.push_back(0.9 * std::abs(k2) * Matrix::Identity(n + M, n + M));
  }
  const MatchingSolution match{sys.K1, sys.K2, 0.0, true};
  const DirectTruth truth = direct_truth(match);
  sc.theta0 = 1.25 * truth.theta;
  sc.rho0 = 1.25 * truth.rho;
  sc.truth = truth;
  sc.horizon = horizon;
  return sc;
}

IndirectScenario random_indirect_scenario(const RandomSystem& sys, long horizon) {
  const Index n = sys.ref.states();
  const Index M = sys.ref.inputs();
  IndirectScenario sc;
  sc.plant = sys.plant;
  sc.ref = sys.ref;
  sc.signal = mimo_reference(M);
  for (Index j = 0; j < M; ++j) sc.gains.Gamma.push_back(Matrix::Identity(n + M, n + M));
  const MatchingSolution match{sys.K1, sys.K2, 0.0, true};
  const IndirectTruth truth = indirect_truth(match);
  sc.projection.theta2_lower.resize(M);
  sc.projection.signs.resize(M);
  for (Index j = 0; j < M; ++j) {
    const double t2 = truth.theta(n + j, j);
    sc.projection.signs(j) = t2 > 0 ? 1.0 : -1.0;
    sc.projection.theta2_lower(j) = 0.5 * std::abs(t2);
  }
  sc.theta0 = 1.25 * truth.theta;
  sc.truth = truth;
  sc.horizon = horizon;
  return sc;
}

}  // namespace mrac
