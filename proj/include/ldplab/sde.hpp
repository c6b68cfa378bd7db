#ifndef LDPLAB_SDE_HPP
#define LDPLAB_SDE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ldplab/model.hpp"
#include "ldplab/paths.hpp"
#include "ldplab/spectral.hpp"

namespace ldplab {

struct SolverConfig {
  double epsilon = 1.0;
  std::size_t steps = 256;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::domain_error("SolverConfig: epsilon must lie in (0,1]");
    if (steps == 0) throw std::domain_error("SolverConfig: steps must be positive");
  }
};

namespace detail {

template <CoefficientModel M>
void check_dims(const SpectralBasis& basis, const M& model, std::size_t noise_dim) {
  if (basis.dim() != model.dim_h()) throw std::invalid_argument("solver: model dim_h does not match basis");
  if (noise_dim != model.dim_u()) throw std::invalid_argument("solver: noise dimension does not match model dim_u");
}

/**
 * Exponential Euler for dX = (eps A X + eps F(eps t, X) + tilt) dt
 * + sqrt(eps) G(X) dW on the unit grid of `w`:
 *
 *   X_{j+1} = S(eps dt) [X_j + eps dt F + dt G(X_j) phi_j + sqrt(eps) G(X_j) dW_j].
 *
 * Coefficients are evaluated at the left node; the drift weight nu at the
 * midpoint of the original-time cell [eps t_j, eps t_{j+1}].
 */
template <CoefficientModel M>
Trajectory exponential_euler(const HVec& x, const SpectralBasis& basis, const M& model, double eps,
                             const WienerPath& w, const ControlPath* tilt) {
  check_dims(basis, model, w.dim());
  if (static_cast<std::size_t>(x.size()) != basis.dim()) throw std::invalid_argument("solver: initial state dimension mismatch");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::domain_error("solver: epsilon must lie in (0,1]");
  if (tilt && (!(tilt->grid == w.grid) || tilt->dim() != w.dim())) throw std::invalid_argument("solve_tilted: control grid mismatch");

  const TimeGrid& grid = w.grid;
  const double dt = grid.dt();
  const double root_eps = std::sqrt(eps);
  const Eigen::VectorXd decay = basis.semigroup_diagonal(eps * dt);

  Trajectory out(grid, basis.dim());
  out.at(0) = x;
  HVec state = x;
  HVec drift(x.size());
  HVec y(x.size());
  Operator g;
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    model.drift_on_cell(eps * grid.node(j), eps * grid.node(j + 1), state, drift);
    model.diffusion_into(state, g);
    y = state + (eps * dt) * drift;
    if (tilt) y.noalias() += dt * (g * tilt->at(j));
    y.noalias() += root_eps * (g * w.step(j));
    state = decay.cwiseProduct(y);
    out.at(j + 1) = state;
  }
  return out;
}

}  // namespace detail

/// Rescaled mild solution X^eps on [0,1] driven by the increments of `w`.
template <CoefficientModel M>
Trajectory solve_rescaled(const HVec& x, const SpectralBasis& basis, const M& model, const SolverConfig& cfg,
                          const WienerPath& w) {
  cfg.validate();
  if (w.steps() != cfg.steps) throw std::invalid_argument("solve_rescaled: Wiener grid does not match cfg.steps");
  return detail::exponential_euler(x, basis, model, cfg.epsilon, w, nullptr);
}

/// Tilted process Z^eps: the drift eps F(eps t, .) becomes eps F(eps t, .) + G(.) phi(t).
template <CoefficientModel M>
Trajectory solve_tilted(const HVec& x, const SpectralBasis& basis, const M& model, const ControlPath& phi,
                        const SolverConfig& cfg, const WienerPath& w) {
  cfg.validate();
  if (w.steps() != cfg.steps) throw std::invalid_argument("solve_tilted: Wiener grid does not match cfg.steps");
  return detail::exponential_euler(x, basis, model, cfg.epsilon, w, &phi);
}

/**
 * Unrescaled mild solution on [0, horizon] with N uniform steps. The
 * increments in `w` are used as given and must already have variance
 * horizon / N. Node j is the state at time horizon * j / N.
 */
template <CoefficientModel M>
Trajectory solve_original(const HVec& x, const SpectralBasis& basis, const M& model, double horizon,
                          const WienerPath& w) {
  detail::check_dims(basis, model, w.dim());
  if (!(horizon > 0.0 && horizon <= 1.0)) throw std::domain_error("solve_original: horizon must lie in (0,1]");
  const std::size_t n = w.steps();
  const double h = horizon / static_cast<double>(n);
  const Eigen::VectorXd decay = basis.semigroup_diagonal(h);

  Trajectory out(w.grid, basis.dim());
  out.at(0) = x;
  HVec state = x;
  HVec drift(x.size());
  HVec y(x.size());
  Operator g;
  for (std::size_t j = 0; j < n; ++j) {
    const double s0 = horizon * static_cast<double>(j) / static_cast<double>(n);
    const double s1 = horizon * static_cast<double>(j + 1) / static_cast<double>(n);
    model.drift_on_cell(s0, s1, state, drift);
    model.diffusion_into(state, g);
    y = state + h * drift;
    y.noalias() += g * w.step(j);
    state = decay.cwiseProduct(y);
    out.at(j + 1) = state;
  }
  return out;
}

struct RescalingCoupling {
  Trajectory original;  // X_x(eps t_j)
  Trajectory rescaled;  // X^eps_x(t_j)
  double sup_distance = 0.0;
};

/**
 * Solves the original equation on [0, eps] with increments dW ~ N(0, eps/N)
 * and the rescaled equation on [0, 1] with dV = eps^{-1/2} dW, then
 * compares them node by node.
 */
template <CoefficientModel M>
RescalingCoupling solve_original_rescaled_coupling(const HVec& x, const SpectralBasis& basis, const M& model,
                                                   double eps, std::size_t steps, std::uint64_t seed) {
  const TimeGrid grid(steps);
  const WienerPath unit = sample_wiener(grid, model.dim_u(), seed);
  const WienerPath original_noise = unit.scaled(std::sqrt(eps));
  const WienerPath rescaled_noise = original_noise.scaled(1.0 / std::sqrt(eps));
  RescalingCoupling out{solve_original(x, basis, model, eps, original_noise),
                        solve_rescaled(x, basis, model, SolverConfig{eps, steps, seed}, rescaled_noise), 0.0};
  out.sup_distance = sup_distance(out.original, out.rescaled);
  return out;
}

/**
 * sup over nodes t of |Z(t) - S(eps (t - pi_n(t))) Z(pi_n(t))|, where
 * pi_n(t) is the left endpoint of the level-n dyadic cell containing t.
 */
inline double dyadic_freeze_error(const Trajectory& traj, const SpectralBasis& basis, double eps, unsigned n) {
  const std::size_t steps = traj.steps();
  const std::size_t cells = std::size_t{1} << n;
  if (steps % cells != 0) throw std::invalid_argument("dyadic_freeze_error: 2^n must divide the grid steps");
  if (traj.dim() != basis.dim()) throw std::invalid_argument("dyadic_freeze_error: dimension mismatch");
  const std::size_t block = steps / cells;
  double worst = 0.0;
  for (std::size_t j = 0; j <= steps; ++j) {
    const std::size_t anchor = (j / block) * block;
    const double lag = traj.grid.node(j) - traj.grid.node(anchor);
    const HVec frozen = semigroup_apply(basis, eps * lag, HVec(traj.at(anchor)));
    worst = std::max(worst, (traj.at(j) - frozen).norm());
  }
  return worst;
}

/**
 * Discrete form of the Ito shift identity. With dW^eps_j = dW_j -
 * eps^{-1/2} phi_j dt, compares the running sums of Phi_j dW^eps_j with
 * sum Phi_j dW_j - eps^{-1/2} sum Phi_j phi_j dt and returns the largest
 * difference over the grid.
 */
inline double ito_shift_identity_check(std::span<const Operator> integrand, const ControlPath& phi, double eps,
                                       const WienerPath& w) {
  if (integrand.size() != w.steps() || !(phi.grid == w.grid) || phi.dim() != w.dim()) {
    throw std::invalid_argument("ito_shift_identity_check: grid mismatch");
  }
  const double dt = w.grid.dt();
  const double inv_root_eps = 1.0 / std::sqrt(eps);
  const auto d = integrand.empty() ? Eigen::Index{0} : integrand.front().rows();
  HVec shifted = HVec::Zero(d);
  HVec plain = HVec::Zero(d);
  HVec drift = HVec::Zero(d);
  double worst = 0.0;
  for (std::size_t j = 0; j < w.steps(); ++j) {
    const UVec dw_eps = w.step(j) - inv_root_eps * dt * phi.at(j);
    shifted.noalias() += integrand[j] * dw_eps;
    plain.noalias() += integrand[j] * w.step(j);
    drift.noalias() += integrand[j] * phi.at(j) * dt;
    worst = std::max(worst, (shifted - (plain - inv_root_eps * drift)).norm());
  }
  return worst;
}

/// |sum_{c <= j < d} Phi dW_j - Phi (W(t_d) - W(t_c))| for a constant integrand.
inline double constant_integrand_identity(const Operator& integrand, const WienerPath& w, std::size_t c, std::size_t d) {
  if (c > d || d > w.steps()) throw std::out_of_range("constant_integrand_identity: need c <= d <= N");
  HVec sum = HVec::Zero(integrand.rows());
  for (std::size_t j = c; j < d; ++j) sum.noalias() += integrand * w.step(j);
  const Eigen::MatrixXd cum = w.cumulative();
  const HVec telescoped = integrand * (cum.col(static_cast<Eigen::Index>(d)) - cum.col(static_cast<Eigen::Index>(c)));
  return (sum - telescoped).norm();
}

}  // namespace ldplab

#endif  // LDPLAB_SDE_HPP
