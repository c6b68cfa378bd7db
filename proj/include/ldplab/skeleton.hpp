#ifndef LDPLAB_SKELETON_HPP
#define LDPLAB_SKELETON_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "ldplab/model.hpp"
#include "ldplab/paths.hpp"
#include "ldplab/spectral.hpp"

namespace ldplab {

/// Controlled skeleton dz = G(z) phi dt by explicit Euler on the control's
/// grid. Neither A nor F enters.
template <CoefficientModel M>
Trajectory solve_skeleton(const HVec& x, const ControlPath& phi, const M& model) {
  if (static_cast<std::size_t>(x.size()) != model.dim_h()) throw std::invalid_argument("solve_skeleton: state dimension mismatch");
  if (phi.dim() != model.dim_u()) throw std::invalid_argument("solve_skeleton: control dimension mismatch");
  const double dt = phi.grid.dt();
  Trajectory z(phi.grid, model.dim_h());
  z.at(0) = x;
  HVec state = x;
  Operator g;
  for (std::size_t j = 0; j < phi.grid.steps(); ++j) {
    model.diffusion_into(state, g);
    state.noalias() += dt * (g * phi.at(j));
    z.at(j + 1) = state;
  }
  return z;
}

/**
 * Fixed-point (Picard) iteration z <- x + sum_{i<j} G(z_i) phi_i dt on the
 * grid. Its fixed point is the Euler skeleton; it is an independent route
 * to the same values, used for cross-validation on small grids.
 */
template <CoefficientModel M>
Trajectory solve_skeleton_picard(const HVec& x, const ControlPath& phi, const M& model, double tol = 1e-14,
                                 std::size_t max_iterations = 10000) {
  const std::size_t n = phi.grid.steps();
  if (n > 256) throw std::invalid_argument("solve_skeleton_picard: intended for N <= 256");
  const double dt = phi.grid.dt();
  Trajectory z(phi.grid, model.dim_h());
  z.values.colwise() = x;
  Trajectory next = z;
  Operator g;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    HVec acc = x;
    next.at(0) = x;
    for (std::size_t j = 0; j < n; ++j) {
      model.diffusion_into(HVec(z.at(j)), g);
      acc.noalias() += dt * (g * phi.at(j));
      next.at(j + 1) = acc;
    }
    const double change = sup_distance(next, z);
    std::swap(z, next);
    if (change <= tol) return z;
  }
  throw std::runtime_error("solve_skeleton_picard: no convergence");
}

/**
 * Gronwall continuity estimate for two skeletons. Returns (lhs, rhs) with
 *   lhs = max_j |z1(t_j) - z2(t_j)|,
 *   rhs = (|x1 - x2| + max_r |sum_{j<r} G(z1_j)(phi1_j - phi2_j) dt|) exp(Lambda q),
 * q the larger L^2 norm of the two controls.
 */
template <CoefficientModel M>
std::pair<double, double> skeleton_continuity_bound(const HVec& x1, const HVec& x2, const ControlPath& phi1,
                                                    const ControlPath& phi2, const M& model) {
  if (!(phi1.grid == phi2.grid)) throw std::invalid_argument("skeleton_continuity_bound: control grids differ");
  const Trajectory z1 = solve_skeleton(x1, phi1, model);
  const Trajectory z2 = solve_skeleton(x2, phi2, model);
  const double lhs = sup_distance(z1, z2);
  const double dt = phi1.grid.dt();
  HVec running = HVec::Zero(x1.size());
  double forcing = 0.0;
  Operator g;
  for (std::size_t j = 0; j < phi1.grid.steps(); ++j) {
    model.diffusion_into(HVec(z1.at(j)), g);
    running.noalias() += dt * (g * (phi1.at(j) - phi2.at(j)));
    forcing = std::max(forcing, running.norm());
  }
  const double q = std::max(phi1.l2_norm(), phi2.l2_norm());
  const double rhs = ((x1 - x2).norm() + forcing) * std::exp(model.lambda_lip() * q);
  return {lhs, rhs};
}

/// (max_j |z(t_j)|, (|x| + Lambda sqrt(2r)) exp(Lambda sqrt(2r))) with r = energy(phi).
template <CoefficientModel M>
std::pair<double, double> skeleton_apriori_bound(const HVec& x, const ControlPath& phi, const M& model) {
  const Trajectory z = solve_skeleton(x, phi, model);
  const double reach = model.lambda_lip() * std::sqrt(2.0 * phi.energy());
  return {z.sup_norm(), (x.norm() + reach) * std::exp(reach)};
}

/// U_1-valued path sampled on a grid, in coordinates of the orthonormal
/// basis (J g_k / lambda_k) of U_1. Column j is f(t_j).
struct U1Path {
  TimeGrid grid;
  Eigen::MatrixXd values;  // m x (N+1)
};

/// f(t) = J int_0^t psi ds for a piecewise-constant psi.
inline U1Path wiener_path_of_control(const ControlPath& psi, const NoiseSpace& noise) {
  if (psi.dim() != noise.dim()) throw std::invalid_argument("wiener_path_of_control: dimension mismatch");
  U1Path f{psi.grid, Eigen::MatrixXd::Zero(psi.values.rows(), psi.values.cols() + 1)};
  const double dt = psi.grid.dt();
  for (Eigen::Index j = 0; j < psi.values.cols(); ++j) {
    for (Eigen::Index k = 0; k < psi.values.rows(); ++k) {
      f.values(k, j + 1) = f.values(k, j) + noise.weight(static_cast<std::size_t>(k)) * psi.values(k, j) * dt;
    }
  }
  return f;
}

/**
 * Rate of the Wiener process LDP, (1/2) ||f||^2_{H_W}, for a piecewise
 * linear f. The control is recovered cell by cell as
 * psi_{j,k} = (f_{j+1,k} - f_{j,k}) / (lambda_k dt). Paths not starting at
 * 0 are outside H_W and have rate +infinity.
 */
inline double wiener_rate(const U1Path& f, const NoiseSpace& noise) {
  if (static_cast<std::size_t>(f.values.rows()) != noise.dim()) throw std::invalid_argument("wiener_rate: dimension mismatch");
  if (f.values.col(0).cwiseAbs().maxCoeff() > 0.0) return std::numeric_limits<double>::infinity();
  const double dt = f.grid.dt();
  ControlPath psi(f.grid, noise.dim());
  for (Eigen::Index j = 0; j + 1 < f.values.cols(); ++j) {
    for (Eigen::Index k = 0; k < f.values.rows(); ++k) {
      psi.values(k, j) = (f.values(k, j + 1) - f.values(k, j)) / (noise.weight(static_cast<std::size_t>(k)) * dt);
    }
  }
  return psi.energy();
}

}  // namespace ldplab

#endif  // LDPLAB_SKELETON_HPP
