#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace mrac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class TimeDomain { discrete, continuous };

enum class Integrator { rk4, euler };

const char* to_string(TimeDomain d);
const char* to_string(Integrator i);

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when a configuration or model fails validation; carries every
/// issue found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value or state blow-up during a simulation.
class DivergenceError : public Error {
 public:
  DivergenceError(long step, const std::string& what);
  long step() const { return step_; }

 private:
  long step_;
};

void require_dims(bool ok, const std::string& what);

}  // namespace mrac
