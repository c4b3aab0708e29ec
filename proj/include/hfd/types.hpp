#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace hfd {

/// Points and directions. 2D problems leave the z component at zero.
using Vec = Eigen::Vector3d;
using Index = std::int32_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Invalid or inconsistent case setup (bad geometry, bad spacing, bad keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A local weight system that could not be solved.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double kappa)
      : std::runtime_error(what), kappa_(kappa) {}
  double kappa() const { return kappa_; }

 private:
  double kappa_;
};

/// Iterative linear solve that did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Non-finite values appeared during time stepping.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step, Index node)
      : std::runtime_error(what), step_(step), node_(node) {}
  long step() const { return step_; }
  Index node() const { return node_; }

 private:
  long step_;
  Index node_;
};

}  // namespace hfd
