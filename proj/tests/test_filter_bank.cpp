#include "mrac/filter_bank.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace mrac;

namespace {
Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}
}  // namespace

TEST_CASE("outputs start at zero") {
  ChannelFilterBank bank(oracle::paper_ref(), 3);
  const auto z = bank.zeta();
  REQUIRE(z.size() == 1);
  CHECK(z[0].rows() == 2);
  CHECK(z[0].cols() == 3);
  CHECK(z[0].isZero(0.0));
  const auto f = bank.step(Matrix::Ones(3, 1), vec({5, 6, 7}));
  CHECK(f.zeta[0].isZero(0.0));
  CHECK(f.xi.isZero(0.0));
  CHECK(f.m == 1.0);
}

TEST_CASE("impulse through the first channel") {
  ChannelFilterBank bank(oracle::paper_ref(), 3);
  bank.advance_zeta(vec({1, 0, 0}));
  const auto z1 = bank.advance_zeta(vec({0, 0, 0}));
  CHECK(z1[0](0, 0) == 0.0);
  CHECK(z1[0](1, 0) == 1.0);
  CHECK(z1[0].col(1).isZero(0.0));
  CHECK(z1[0].col(2).isZero(0.0));
  const auto z2 = bank.advance_zeta(vec({0, 0, 0}));
  CHECK(std::abs(z2[0](0, 0) + 1.0) <= 1e-15);
  CHECK(std::abs(z2[0](1, 0) + 1.2) <= 1e-15);
}

TEST_CASE("realized transfer functions match long division") {
  const auto h1 = oracle::series({-1.0}, {1.0, 0.2, -0.15}, 20);
  const auto h2 = oracle::series({1.0, -1.0}, {1.0, 0.2, -0.15}, 20);
  ChannelFilterBank bank(oracle::paper_ref(), 1);
  bank.advance_zeta(vec({1}));
  for (int k = 0; k < 20; ++k) {
    const auto z = bank.advance_zeta(vec({0}));
    CHECK(std::abs(z[0](0, 0) - h1[static_cast<std::size_t>(k)]) <= 1e-10);
    CHECK(std::abs(z[0](1, 0) - h2[static_cast<std::size_t>(k)]) <= 1e-10);
  }
}

TEST_CASE("two-step swapping signal hand trace") {
  ChannelFilterBank bank(oracle::paper_ref(), 3);
  Matrix th0(3, 1), th1 = Matrix::Zero(3, 1);
  th0 << 1, 0, 0;
  const Vector w = vec({1, 1, 1});
  const auto f0 = bank.step(th0, w);
  CHECK(f0.xi.isZero(0.0));
  const auto f1 = bank.step(th1, w);
  CHECK(f1.xi(0, 0) == 0.0);
  CHECK(f1.xi(1, 0) == -1.0);
}

TEST_CASE("zero regressor gives zero xi") {
  ChannelFilterBank bank(oracle::paper_ref(), 3);
  Matrix th = Matrix::Ones(3, 1);
  for (int t = 0; t < 30; ++t) {
    th(0, 0) = std::sin(t);
    const auto f = bank.step(th, Vector::Zero(3));
    CHECK(f.xi.isZero(0.0));
  }
}

TEST_CASE("frozen parameters give vanishing xi") {
  ChannelFilterBank bank(oracle::paper_ref(), 3);
  Matrix th(3, 1);
  th << 0.3, -1.2, 2.0;
  for (int t = 0; t < 100; ++t) {
    const auto f = bank.step(th, vec({std::sin(0.3 * t), std::cos(t), 1.0}));
    CHECK(f.xi.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("normalizing signal") {
  RegressorFrame f;
  f.zeta = {Matrix::Zero(2, 3)};
  f.xi = Matrix::Zero(2, 1);
  CHECK(compute_m(f) == 1.0);
  RegressorFrame g;
  g.zeta = {Matrix(1, 2)};
  g.zeta[0] << 3, 4;
  g.xi = Matrix::Zero(1, 1);
  CHECK(std::abs(compute_m(g) - std::sqrt(26.0)) <= 1e-15);
  g.xi(0, 0) = 2;
  CHECK(compute_m(g, false) <= compute_m(g, true));
  CHECK(std::abs(compute_m(g, true) - std::sqrt(30.0)) <= 1e-15);
  CHECK(compute_m(g, false) == std::sqrt(26.0));
}

TEST_CASE("multi-input bank layout") {
  ReferenceModel r;
  r.A = Matrix::Identity(3, 3) * 0.5;
  r.B.resize(3, 2);
  r.B << 1, 0, 0, 1, 1, 1;
  ChannelFilterBank bank(r, 5);
  Vector w = Vector::Zero(5);
  w(2) = 1.0;
  bank.advance_zeta(w);
  const auto z = bank.zeta();
  REQUIRE(z.size() == 2);
  // channel 2 through input column j equals column j of B_m
  CHECK(z[0].col(2) == r.B.col(0));
  CHECK(z[1].col(2) == r.B.col(1));
  CHECK(z[0].col(0).isZero(0.0));
}

TEST_CASE("continuous derivative matches the filter equations") {
  ReferenceModel r = oracle::ct_ref();
  ChannelFilterBank bank(r, 3);
  Vector s = Vector::LinSpaced(bank.state_size(), 0.1, 1.0);
  Matrix th(3, 1);
  th << 0.5, -1, 2;
  const Vector w = vec({1, -2, 0.5});
  Vector d(bank.state_size());
  bank.derivative(s, w, th, d);
  // Z is 2x3 column-major then Y 2x1
  const Matrix Z = Eigen::Map<const Matrix>(s.data(), 2, 3);
  const Matrix Y = Eigen::Map<const Matrix>(s.data() + 6, 2, 1);
  const Matrix Zd = r.A * Z + r.B * w.transpose();
  const Matrix Yd = r.A * Y + r.B * (th.transpose() * w);
  CHECK((Eigen::Map<const Matrix>(d.data(), 2, 3) - Zd).norm() <= 1e-14);
  CHECK((Eigen::Map<const Matrix>(d.data() + 6, 2, 1) - Yd).norm() <= 1e-14);
}

TEST_CASE("bad omega length throws") {
  ChannelFilterBank bank(oracle::paper_ref(), 3);
  CHECK_THROWS_AS(bank.advance_zeta(Vector::Zero(2)), DimensionError);
}
