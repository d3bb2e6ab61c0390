#pragma once

#include "mrac/model.hpp"

#include <vector>

namespace mrac {

/// Signals produced by the filter bank for one step.
///
/// zeta[j] is n x p with row i equal to zeta_ij^T = (w_ij[omega])^T, where
/// w_ij is entry (i, j) of W_m = (zI - A_m)^{-1} B_m and p = dim(omega).
/// For a single input the only block is zeta[0] and row i is zeta_i^T.
struct RegressorFrame {
  std::vector<Matrix> zeta;
  Matrix xi;  // n x M, xi(i, j) = theta_j^T zeta_ij - w_ij[theta_j^T omega]
  Vector omega;
  double m = 1.0;
};

/// m = sqrt(1 + sum zeta^T zeta + sum xi^2); include_xi = false drops the
/// xi terms (single-input indirect normalization).
double compute_m(const RegressorFrame& frame, bool include_xi = true);

/// State-space realization of W_m applied to every scalar regressor channel,
/// plus one auxiliary filter per input column carrying w_m[theta_j^T omega].
///
/// One copy of (A_m, B_m) per scalar channel: channel c's state through
/// input column j is column c of Z_j, and all n transfer outputs w_ij are
/// read off that one state. All states start at zero.
///
/// The flat state layout is shared by the discrete recursion and the
/// continuous-time derivative so closed loops can integrate it directly:
/// [vec(Z_0), ..., vec(Z_{M-1}), vec(Y)] with column-major blocks.
class ChannelFilterBank {
 public:
  ChannelFilterBank() = default;
  ChannelFilterBank(ReferenceModel prototype, Index channels);

  Index outputs() const { return proto_.states(); }
  Index inputs() const { return proto_.inputs(); }
  Index channels() const { return channels_; }
  const ReferenceModel& prototype() const { return proto_; }

  /// Current outputs. Discrete: depend on inputs strictly before t.
  std::vector<Matrix> zeta() const;
  /// Current auxiliary filter outputs Y (n x M), Y(i, j) = w_ij[theta_j^T omega].
  Matrix swap_filter() const;

  /// Emit zeta(t) then advance the regressor filters on omega(t).
  std::vector<Matrix> advance_zeta(const Vector& omega);
  /// Emit xi(t) from the already-emitted zeta(t) and theta(t), then advance
  /// the auxiliary filters on theta(t)^T omega(t).
  Matrix advance_xi(const std::vector<Matrix>& zeta, const Matrix& theta, const Vector& omega);
  /// Both of the above, packaged as a frame with m filled in.
  RegressorFrame step(const Matrix& theta, const Vector& omega, bool xi_in_m = true);

  // Continuous-time support -------------------------------------------------

  Index state_size() const { return state_.size(); }
  const Vector& state() const { return state_; }
  void set_state(const Vector& s);

  /// Frame built from an arbitrary flat state (used inside integrator stages).
  RegressorFrame frame_at(const Eigen::Ref<const Vector>& state, const Matrix& theta,
                          const Vector& omega, bool xi_in_m = true) const;
  /// d/dt of the flat state: Zdot_j = A_m Z_j + b_j omega^T, Ydot = A_m Y + B_m diag(Theta^T omega).
  void derivative(const Eigen::Ref<const Vector>& state, const Vector& omega, const Matrix& theta,
                  Eigen::Ref<Vector> out) const;

 private:
  Index block() const { return outputs() * channels_; }
  void check(const Vector& omega, const Matrix* theta) const;

  ReferenceModel proto_;
  Index channels_ = 0;
  Vector state_;
};

}  // namespace mrac
