#pragma once

#include "mrac/gradient_direct.hpp"
#include "mrac/gradient_indirect.hpp"
#include "mrac/model.hpp"

#include <cstdint>

namespace mrac {

/// Distribution of the random matchable test family: a Schur-stable A_m,
/// full-rank B_m, and a plant built from drawn K1*, diagonal K2*.
struct RandomFamily {
  Index states = 3;
  Index inputs = 2;
  double am_range = 0.6;        // A_m entries uniform in [-am_range, am_range]
  double am_radius_max = 0.8;   // rejection threshold on the spectral radius
  double bm_range = 1.0;
  double bm_min_singular = 0.2; // rejection threshold for B_m conditioning
  double k1_range = 0.5;
  double k2_min = 0.5;          // |k2jj*| uniform in [k2_min, k2_max], random sign
  double k2_max = 2.0;
  bool diagonal_k2 = true;
};

struct RandomSystem {
  PlantModel plant;
  ReferenceModel ref;
  Matrix K1;
  Matrix K2;
};

/// Deterministic for a given seed on a given platform.
RandomSystem random_matchable_system(std::uint64_t seed, const RandomFamily& family = {});

/// Random stable matrix for solver property tests.
Matrix random_hurwitz(std::uint64_t seed, Index n);

/// Two-tone-per-channel reference used by the multi-input suites.
ReferenceSignal mimo_reference(Index inputs);

/// Discrete direct scenario on a random system: Gamma_j = 0.9 |k2j*| I,
/// gamma_j = 1.5, estimates started at 1.25 times the truth.
DirectScenario random_direct_scenario(const RandomSystem& sys, long horizon);
/// Discrete indirect scenario: Gamma_j = I, theta2j^a = 0.5 |theta2jj*|,
/// estimates started at 1.25 times the truth.
IndirectScenario random_indirect_scenario(const RandomSystem& sys, long horizon);

}  // namespace mrac
