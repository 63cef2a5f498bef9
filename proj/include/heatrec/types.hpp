#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace heatrec {

// Dense row-major field on the node grid, indexed (row, col) = (v, u).
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Grid64 = Grid<double>;
using Grid32 = Grid<float>;

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error taxonomy: each maps to a distinct failure class at the CLI boundary.
// ConfigError  -> rejected before any work starts (exit 2)
// everything else -> runtime failure (exit 1)
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainerError : std::runtime_error {
  explicit TrainerError(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename Scalar>
bool all_finite(const Grid<Scalar>& g) {
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(static_cast<double>(g.data()[i]))) return false;
  }
  return true;
}

}  // namespace heatrec
