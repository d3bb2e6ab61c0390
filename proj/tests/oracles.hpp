#pragma once

// Independent reference computations used to check the library. Nothing in
// here calls into mrac numerics.

#include "mrac/model.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

inline mrac::PlantModel paper_plant() {
  mrac::PlantModel p;
  p.A.resize(2, 2);
  p.A << 1, -1, 2, 1;
  p.B.resize(2, 1);
  p.B << 0, 2;
  return p;
}

inline mrac::ReferenceModel paper_ref() {
  mrac::ReferenceModel r;
  r.A.resize(2, 2);
  r.A << 1, -1, 1.05, -1.2;
  r.B.resize(2, 1);
  r.B << 0, 1;
  return r;
}

// desk-scale continuous example: k1* = [1.5, -2], k2* = 0.5
inline mrac::PlantModel ct_plant() {
  mrac::PlantModel p = paper_plant();
  p.domain = mrac::TimeDomain::continuous;
  return p;
}

inline mrac::ReferenceModel ct_ref() {
  mrac::ReferenceModel r;
  r.A.resize(2, 2);
  r.A << 1, -1, 5, -3;
  r.B.resize(2, 1);
  r.B << 0, 1;
  r.domain = mrac::TimeDomain::continuous;
  return r;
}

// Coefficients h_1..h_count of num(z)/den(z) expanded in z^-1 by long
// division. Polynomials in descending powers, deg num < deg den, den monic.
inline std::vector<double> series(std::vector<double> num, const std::vector<double>& den,
                                  int count) {
  const std::size_t d = den.size() - 1;
  std::vector<double> rem(d, 0.0);  // remainder, descending, degree < d
  for (std::size_t i = 0; i < num.size(); ++i) rem[d - num.size() + i] = num[i];
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    // multiply remainder by z, take leading coefficient as the next term
    std::vector<double> shifted(rem);
    shifted.push_back(0.0);
    const double q = shifted[0];
    out.push_back(q);
    for (std::size_t i = 0; i <= d; ++i) shifted[i] -= q * den[i];
    rem.assign(shifted.begin() + 1, shifted.end());
  }
  return out;
}

inline double quadratic_radius(double a, double b, double c) {
  const std::complex<double> disc = std::sqrt(std::complex<double>(b * b - 4 * a * c));
  const auto r1 = (-b + disc) / (2 * a), r2 = (-b - disc) / (2 * a);
  return std::max(std::abs(r1), std::abs(r2));
}

// 2x2 P A + A^T P = -Q for symmetric P = [[p, q], [q, s]] by Cramer's rule.
inline std::array<double, 3> lyap2(const mrac::Matrix& A, const mrac::Matrix& Q) {
  const double a = A(0, 0), b = A(0, 1), c = A(1, 0), d = A(1, 1);
  // rows: (0,0), (0,1), (1,1) entries of P A + A^T P
  const double M[3][3] = {{2 * a, 2 * c, 0}, {b, a + d, c}, {0, 2 * b, 2 * d}};
  const double r[3] = {-Q(0, 0), -Q(0, 1), -Q(1, 1)};
  auto det3 = [](const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const double D = det3(M);
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    double T[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) T[i][j] = (j == k) ? r[i] : M[i][j];
    out[k] = det3(T) / D;
  }
  return out;
}

// Scalar re-implementation of the discrete single-input direct loop for n = 2,
// written straight from the update equations with plain arrays.
struct NaiveStep {
  double e[2], u, eps[2], m2, theta[3], rho;
};

template <class Signal>
std::vector<NaiveStep> naive_direct_simo(const double A[2][2], const double b[2],
                                         const double Am[2][2], const double bm[2],
                                         double Gamma, double gamma, double sign,
                                         const double theta0[3], double rho0, Signal r_of,
                                         long horizon) {
  double x[2] = {0, 0}, xm[2] = {0, 0};
  double s[3][2] = {};  // one filter per regressor channel
  double y[2] = {};     // filter on theta^T omega
  double th[3] = {theta0[0], theta0[1], theta0[2]};
  double rho = rho0;
  std::vector<NaiveStep> out;
  for (long t = 0; t <= horizon; ++t) {
    const double r = r_of(t);
    const double omega[3] = {x[0], x[1], r};
    NaiveStep st{};
    double xi[2], zeta[2][3];
    for (int i = 0; i < 2; ++i) {
      for (int c = 0; c < 3; ++c) zeta[i][c] = s[c][i];
      xi[i] = th[0] * zeta[i][0] + th[1] * zeta[i][1] + th[2] * zeta[i][2] - y[i];
      st.e[i] = x[i] - xm[i];
      st.eps[i] = st.e[i] + rho * xi[i];
    }
    double m2 = 1.0;
    for (int i = 0; i < 2; ++i) {
      m2 += xi[i] * xi[i];
      for (int c = 0; c < 3; ++c) m2 += zeta[i][c] * zeta[i][c];
    }
    st.m2 = m2;
    const double u = th[0] * x[0] + th[1] * x[1] + th[2] * r;
    const double v = u;  // theta(t)^T omega(t)
    st.u = u;
    for (int c = 0; c < 3; ++c) st.theta[c] = th[c];
    st.rho = rho;
    out.push_back(st);
    for (int c = 0; c < 3; ++c)
      th[c] -= sign * Gamma * (st.eps[0] * zeta[0][c] + st.eps[1] * zeta[1][c]) / m2;
    rho -= gamma * (st.eps[0] * xi[0] + st.eps[1] * xi[1]) / m2;
    for (int c = 0; c < 3; ++c) {
      const double s0 = s[c][0], s1 = s[c][1];
      s[c][0] = Am[0][0] * s0 + Am[0][1] * s1 + bm[0] * omega[c];
      s[c][1] = Am[1][0] * s0 + Am[1][1] * s1 + bm[1] * omega[c];
    }
    const double y0 = y[0], y1 = y[1];
    y[0] = Am[0][0] * y0 + Am[0][1] * y1 + bm[0] * v;
    y[1] = Am[1][0] * y0 + Am[1][1] * y1 + bm[1] * v;
    const double x0 = x[0], x1 = x[1], m0 = xm[0], m1 = xm[1];
    x[0] = A[0][0] * x0 + A[0][1] * x1 + b[0] * u;
    x[1] = A[1][0] * x0 + A[1][1] * x1 + b[1] * u;
    xm[0] = Am[0][0] * m0 + Am[0][1] * m1 + bm[0] * r;
    xm[1] = Am[1][0] * m0 + Am[1][1] * m1 + bm[1] * r;
  }
  return out;
}

}  // namespace oracle
