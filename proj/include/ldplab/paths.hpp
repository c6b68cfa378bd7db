#ifndef LDPLAB_PATHS_HPP
#define LDPLAB_PATHS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

#include "ldplab/rng.hpp"
#include "ldplab/spectral.hpp"

namespace ldplab {

/// Grid-sampled H-valued path; column j holds the state at t_j.
struct Trajectory {
  TimeGrid grid;
  Eigen::MatrixXd values;  // d x (N+1)

  Trajectory(TimeGrid g, std::size_t dim_h)
      : grid(g), values(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_h), static_cast<Eigen::Index>(g.steps() + 1))) {}

  std::size_t dim() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t steps() const { return grid.steps(); }
  auto at(std::size_t j) { return values.col(static_cast<Eigen::Index>(j)); }
  auto at(std::size_t j) const { return values.col(static_cast<Eigen::Index>(j)); }

  /// max_j |value(t_j)|.
  double sup_norm() const { return values.colwise().norm().maxCoeff(); }
};

/// max_j |a(t_j) - b(t_j)| for paths on the same grid.
inline double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid == b.grid) || a.dim() != b.dim()) throw std::invalid_argument("sup_distance: incompatible trajectories");
  return (a.values - b.values).colwise().norm().maxCoeff();
}

/// Piecewise-constant U-valued control; column j is the value on [t_j, t_{j+1}).
struct ControlPath {
  TimeGrid grid;
  Eigen::MatrixXd values;  // m x N

  ControlPath(TimeGrid g, std::size_t dim_u)
      : grid(g), values(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_u), static_cast<Eigen::Index>(g.steps()))) {}

  static ControlPath constant(TimeGrid g, const UVec& value) {
    ControlPath c(g, static_cast<std::size_t>(value.size()));
    c.values.colwise() = value;
    return c;
  }

  std::size_t dim() const { return static_cast<std::size_t>(values.rows()); }
  auto at(std::size_t j) { return values.col(static_cast<Eigen::Index>(j)); }
  auto at(std::size_t j) const { return values.col(static_cast<Eigen::Index>(j)); }

  /// int_0^1 |psi|^2 ds.
  double squared_l2() const { return values.squaredNorm() * grid.dt(); }
  /// (int_0^1 |psi|^2 ds)^{1/2}.
  double l2_norm() const { return std::sqrt(squared_l2()); }
  /// 1/2 int_0^1 |psi|^2 ds.
  double energy() const { return 0.5 * squared_l2(); }
};

/**
 * Brownian increments of the m noise modes on a grid.
 *
 * Entry (j, k) is beta_k(t_{j+1}) - beta_k(t_j); stored column-major as
 * an m x N matrix so each step's increment vector is contiguous.
 */
struct WienerPath {
  TimeGrid grid;
  Eigen::MatrixXd increments;  // m x N
  std::uint64_t seed = 0;

  WienerPath(TimeGrid g, std::size_t dim_u, std::uint64_t s = 0)
      : grid(g), increments(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_u), static_cast<Eigen::Index>(g.steps()))), seed(s) {}

  std::size_t dim() const { return static_cast<std::size_t>(increments.rows()); }
  std::size_t steps() const { return grid.steps(); }
  double operator()(std::size_t j, std::size_t k) const {
    return increments(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
  }
  auto step(std::size_t j) const { return increments.col(static_cast<Eigen::Index>(j)); }

  /// W(t_j) for j = 0..N as an m x (N+1) matrix of running sums.
  Eigen::MatrixXd cumulative() const {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(increments.rows(), increments.cols() + 1);
    for (Eigen::Index j = 0; j < increments.cols(); ++j) w.col(j + 1) = w.col(j) + increments.col(j);
    return w;
  }

  /// Increments scaled by `factor`, e.g. eps^{-1/2} for V^eps(t) = eps^{-1/2} W(eps t).
  WienerPath scaled(double factor) const {
    WienerPath out = *this;
    out.increments *= factor;
    return out;
  }
};

/// N(0, dt) increments for each of `dim_u` modes and each step,
/// reproducible from the seed.
inline WienerPath sample_wiener(const TimeGrid& grid, std::size_t dim_u, std::uint64_t seed) {
  WienerPath w(grid, dim_u, seed);
  Rng rng(seed);
  const double sd = std::sqrt(grid.dt());
  for (Eigen::Index j = 0; j < w.increments.cols(); ++j) {
    for (Eigen::Index k = 0; k < w.increments.rows(); ++k) w.increments(k, j) = sd * rng.gaussian();
  }
  return w;
}

inline WienerPath sample_wiener(const TimeGrid& grid, const NoiseSpace& noise, std::uint64_t seed) {
  return sample_wiener(grid, noise.dim(), seed);
}

/**
 * Halves the grid of a Wiener path. Each parent increment D over a cell of
 * length h is split as D/2 + sqrt(h)/2 Z and D/2 - sqrt(h)/2 Z, the exact
 * conditional law of the midpoint given the endpoints; children sum to the
 * parent.
 */
inline WienerPath refine_wiener(const WienerPath& parent, std::uint64_t seed) {
  const TimeGrid fine(parent.steps() * 2);
  WienerPath child(fine, parent.dim(), seed);
  Rng rng(seed);
  const double half_sd = 0.5 * std::sqrt(parent.grid.dt());
  for (Eigen::Index j = 0; j < parent.increments.cols(); ++j) {
    for (Eigen::Index k = 0; k < parent.increments.rows(); ++k) {
      const double d = parent.increments(k, j);
      const double bridge = half_sd * rng.gaussian();
      child.increments(k, 2 * j) = 0.5 * d + bridge;
      child.increments(k, 2 * j + 1) = d - child.increments(k, 2 * j);
    }
  }
  return child;
}

}  // namespace ldplab

#endif  // LDPLAB_PATHS_HPP
