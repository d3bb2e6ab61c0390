#pragma once

#include "mrac/diagnostics.hpp"
#include "mrac/types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <string>

namespace mrac::detail {

// Consecutive slices of a flat state vector.
struct Layout {
  Index size = 0;
  Index add(Index len) {
    const Index at = size;
    size += len;
    return at;
  }
};

inline Eigen::Map<const Matrix> view(const Vector& y, Index at, Index rows, Index cols) {
  return Eigen::Map<const Matrix>(y.data() + at, rows, cols);
}

inline Eigen::Map<Matrix> view(Vector& y, Index at, Index rows, Index cols) {
  return Eigen::Map<Matrix>(y.data() + at, rows, cols);
}

inline constexpr double kBlowUp = 1e100;

inline void guard(long step, const Eigen::Ref<const Matrix>& v, const char* what) {
  if (!v.allFinite() || (v.size() && v.cwiseAbs().maxCoeff() > kBlowUp))
    throw DivergenceError(step, std::string("non-finite or exploding ") + what);
}

// empty means "use the default", anything else must have length n
inline void length_issue(const Vector& v, Index n, const char* name,
                         std::vector<std::string>& issues) {
  if (v.size() && v.size() != n)
    issues.push_back(std::string("init: ") + name + " must have " + std::to_string(n) + " entries");
}

inline Vector zeros_if_empty(const Vector& v, Index n) {
  return v.size() ? v : Vector::Zero(n);
}

inline Matrix zeros_if_empty(const Matrix& m, Index rows, Index cols) {
  return m.size() ? m : Matrix::Zero(rows, cols);
}

inline bool symmetric(const Matrix& m) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <=
                                     1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

// Step index of a continuous time, for sample-held references.
inline long sample_index(double t, double h) {
  return static_cast<long>(std::floor(t / h + 1e-9));
}

// Smallest and largest eigenvalue of a symmetric matrix.
std::pair<double, double> eig_range(const Matrix& s);

// Close out a trace: fill the summary, mark divergence.
void finish(SimulationTrace& trace, const std::string& failure = {});

}  // namespace mrac::detail
