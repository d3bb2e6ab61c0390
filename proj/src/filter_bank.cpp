#include "mrac/filter_bank.hpp"

#include <cmath>

namespace mrac {

double compute_m(const RegressorFrame& frame, bool include_xi) {
  double sum = 1.0;
  for (const auto& z : frame.zeta) sum += z.squaredNorm();
  if (include_xi) sum += frame.xi.squaredNorm();
  if (!std::isfinite(sum)) throw DivergenceError(-1, "non-finite normalization signal");
  return std::sqrt(sum);
}

ChannelFilterBank::ChannelFilterBank(ReferenceModel prototype, Index channels)
    : proto_(std::move(prototype)), channels_(channels) {
  require_dims(proto_.A.rows() == proto_.A.cols() && proto_.B.rows() == proto_.A.rows(),
               "filter prototype (A_m, B_m)");
  require_dims(channels_ >= 1, "filter bank needs at least one channel");
  state_ = Vector::Zero(inputs() * block() + outputs() * inputs());
}

void ChannelFilterBank::check(const Vector& omega, const Matrix* theta) const {
  require_dims(omega.size() == channels_, "regressor length " + std::to_string(omega.size()) +
                                              " != bank channels " + std::to_string(channels_));
  if (theta)
    require_dims(theta->rows() == channels_ && theta->cols() == inputs(),
                 "parameter matrix must be channels x inputs");
}

void ChannelFilterBank::set_state(const Vector& s) {
  require_dims(s.size() == state_.size(), "filter bank state size");
  state_ = s;
}

std::vector<Matrix> ChannelFilterBank::zeta() const {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(inputs()));
  for (Index j = 0; j < inputs(); ++j)
    out.emplace_back(Eigen::Map<const Matrix>(state_.data() + j * block(), outputs(), channels_));
  return out;
}

Matrix ChannelFilterBank::swap_filter() const {
  return Eigen::Map<const Matrix>(state_.data() + inputs() * block(), outputs(), inputs());
}

std::vector<Matrix> ChannelFilterBank::advance_zeta(const Vector& omega) {
  check(omega, nullptr);
  std::vector<Matrix> emitted = zeta();
  const Matrix& A = proto_.A;
  for (Index j = 0; j < inputs(); ++j) {
    Eigen::Map<Matrix> Z(state_.data() + j * block(), outputs(), channels_);
    Z = A * emitted[static_cast<std::size_t>(j)] + proto_.B.col(j) * omega.transpose();
  }
  return emitted;
}

Matrix ChannelFilterBank::advance_xi(const std::vector<Matrix>& zeta, const Matrix& theta,
                                     const Vector& omega) {
  check(omega, &theta);
  require_dims(static_cast<Index>(zeta.size()) == inputs(), "zeta block count");
  Eigen::Map<Matrix> Y(state_.data() + inputs() * block(), outputs(), inputs());
  Matrix xi(outputs(), inputs());
  for (Index j = 0; j < inputs(); ++j)
    xi.col(j) = zeta[static_cast<std::size_t>(j)] * theta.col(j) - Y.col(j);
  const Vector v = theta.transpose() * omega;
  Y = proto_.A * Y + proto_.B * v.asDiagonal();
  return xi;
}

RegressorFrame ChannelFilterBank::step(const Matrix& theta, const Vector& omega, bool xi_in_m) {
  RegressorFrame f;
  f.omega = omega;
  f.zeta = advance_zeta(omega);
  f.xi = advance_xi(f.zeta, theta, omega);
  f.m = compute_m(f, xi_in_m);
  return f;
}

RegressorFrame ChannelFilterBank::frame_at(const Eigen::Ref<const Vector>& state,
                                           const Matrix& theta, const Vector& omega,
                                           bool xi_in_m) const {
  check(omega, &theta);
  require_dims(state.size() == state_.size(), "filter bank state size");
  RegressorFrame f;
  f.omega = omega;
  f.xi.resize(outputs(), inputs());
  Eigen::Map<const Matrix> Y(state.data() + inputs() * block(), outputs(), inputs());
  for (Index j = 0; j < inputs(); ++j) {
    f.zeta.emplace_back(Eigen::Map<const Matrix>(state.data() + j * block(), outputs(), channels_));
    f.xi.col(j) = f.zeta.back() * theta.col(j) - Y.col(j);
  }
  f.m = compute_m(f, xi_in_m);
  return f;
}

void ChannelFilterBank::derivative(const Eigen::Ref<const Vector>& state, const Vector& omega,
                                   const Matrix& theta, Eigen::Ref<Vector> out) const {
  check(omega, &theta);
  require_dims(state.size() == state_.size() && out.size() == state_.size(),
               "filter bank state size");
  const Matrix& A = proto_.A;
  for (Index j = 0; j < inputs(); ++j) {
    Eigen::Map<const Matrix> Z(state.data() + j * block(), outputs(), channels_);
    Eigen::Map<Matrix> dZ(out.data() + j * block(), outputs(), channels_);
    dZ.noalias() = A * Z;
    dZ += proto_.B.col(j) * omega.transpose();
  }
  Eigen::Map<const Matrix> Y(state.data() + inputs() * block(), outputs(), inputs());
  Eigen::Map<Matrix> dY(out.data() + inputs() * block(), outputs(), inputs());
  const Vector v = theta.transpose() * omega;
  dY.noalias() = A * Y;
  dY += proto_.B * v.asDiagonal();
}

}  // namespace mrac
