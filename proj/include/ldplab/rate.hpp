#ifndef LDPLAB_RATE_HPP
#define LDPLAB_RATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ldplab/lbfgs.hpp"
#include "ldplab/model.hpp"
#include "ldplab/paths.hpp"
#include "ldplab/skeleton.hpp"

namespace ldplab {

/// Certified upper bound on a rate (or +infinity) with its witness control.
struct RateResult {
  double value = std::numeric_limits<double>::infinity();
  std::optional<ControlPath> control;
  double residual = std::numeric_limits<double>::infinity();
  bool from_penalty = false;
  /// Energy of the penalized minimizer after each kappa stage.
  std::vector<double> penalty_energies;

  bool finite() const { return std::isfinite(value); }
};

struct RateOptions {
  double tol = 1e-6;
  double kappa_start = 1.0;
  double kappa_end = 1e6;
  double kappa_factor = 10.0;
  LbfgsOptions lbfgs{};
  /// Run the penalty stage even when direct recovery succeeds.
  bool force_penalty = false;
};

namespace detail {

/**
 * Penalized skeleton problem over piecewise-constant controls, in scaled
 * variables v_j = sqrt(dt) psi_j so the energy is |v|^2 / 2. Two penalty
 * shapes: reproduction (kappa sum_j |z_j - u_j|^2) and tube
 * (kappa sum_j max(0, |z_j - u_j| - radius)^2). Gradients by the discrete
 * adjoint of the Euler recursion.
 */
template <CoefficientModel M>
class SkeletonPenaltyProblem {
public:
  enum class Shape { reproduce, tube };

  SkeletonPenaltyProblem(const M& model, const HVec& x, const Trajectory& target, Shape shape, double radius = 0.0)
      : model_(model), x_(x), target_(target), shape_(shape), radius_(radius),
        d_(static_cast<Eigen::Index>(model.dim_h())), m_(static_cast<Eigen::Index>(model.dim_u())),
        n_(target.steps()), root_dt_(std::sqrt(target.grid.dt())),
        z_(d_, static_cast<Eigen::Index>(n_ + 1)), g_(n_), p_(d_, static_cast<Eigen::Index>(n_ + 1)) {}

  void set_kappa(double kappa) { kappa_ = kappa; }
  Eigen::Index size() const { return m_ * static_cast<Eigen::Index>(n_); }

  double operator()(const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    forward(v);
    const double energy = 0.5 * v.squaredNorm();
    double penalty = 0.0;
    p_.setZero();
    for (std::size_t j = 1; j <= n_; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const HVec e = z_.col(jj) - target_.values.col(jj);
      if (shape_ == Shape::reproduce) {
        penalty += kappa_ * e.squaredNorm();
        p_.col(jj) = 2.0 * kappa_ * e;
      } else {
        const double dist = e.norm();
        if (dist > radius_) {
          const double excess = dist - radius_;
          penalty += kappa_ * excess * excess;
          p_.col(jj) = (2.0 * kappa_ * excess / dist) * e;
        }
      }
    }
    grad.resize(size());
    HVec adj = p_.col(static_cast<Eigen::Index>(n_));
    HVec next(d_);
    for (std::size_t j = n_; j-- > 0;) {
      const auto jj = static_cast<Eigen::Index>(j);
      auto vj = v.segment(jj * m_, m_);
      grad.segment(jj * m_, m_) = vj + root_dt_ * (g_[j].transpose() * adj);
      if (j == 0) break;
      model_.diffusion_jacobian(HVec(z_.col(jj)), UVec(vj), jac_);
      next = p_.col(jj) + adj;
      next.noalias() += root_dt_ * (jac_.transpose() * adj);
      adj.swap(next);
    }
    return energy + penalty;
  }

  /// Skeleton path for scaled control v.
  const Eigen::MatrixXd& forward(const Eigen::VectorXd& v) {
    z_.col(0) = x_;
    for (std::size_t j = 0; j < n_; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      model_.diffusion_into(HVec(z_.col(jj)), g_[j]);
      z_.col(jj + 1) = z_.col(jj);
      z_.col(jj + 1).noalias() += root_dt_ * (g_[j] * v.segment(jj * m_, m_));
    }
    return z_;
  }

  /// max_j |z_j - u_j| for the last forward pass.
  double deviation() const { return (z_ - target_.values).colwise().norm().maxCoeff(); }

  ControlPath control(const Eigen::VectorXd& v) const {
    ControlPath c(target_.grid, static_cast<std::size_t>(m_));
    for (std::size_t j = 0; j < n_; ++j) {
      c.at(j) = v.segment(static_cast<Eigen::Index>(j) * m_, m_) / root_dt_;
    }
    return c;
  }

  Eigen::VectorXd scaled(const ControlPath& c) const {
    Eigen::VectorXd v(size());
    for (std::size_t j = 0; j < n_; ++j) v.segment(static_cast<Eigen::Index>(j) * m_, m_) = root_dt_ * c.at(j);
    return v;
  }

private:
  const M& model_;
  HVec x_;
  const Trajectory& target_;
  Shape shape_;
  double radius_;
  double kappa_ = 1.0;
  Eigen::Index d_;
  Eigen::Index m_;
  std::size_t n_;
  double root_dt_;
  Eigen::MatrixXd z_;
  std::vector<Operator> g_;
  Eigen::MatrixXd p_;
  Eigen::MatrixXd jac_;
};

inline std::vector<double> kappa_schedule(const RateOptions& opt) {
  std::vector<double> ks;
  for (double k = opt.kappa_start; k <= opt.kappa_end * (1.0 + 1e-12); k *= opt.kappa_factor) ks.push_back(k);
  return ks;
}

}  // namespace detail

/**
 * Upper bound on I_x(u) = (1/2) inf { int |psi|^2 : u = z^psi_x }.
 *
 * Stage one recovers the minimum-norm control per cell from
 * G(u_j) psi_j = (u_{j+1} - u_j) / dt by a pseudo-inverse. If the
 * reproduced skeleton stays within tol of u, its energy is the answer.
 * Otherwise a penalty stage minimizes |psi|^2/2 + kappa sum_j |z_j - u_j|^2
 * for escalating kappa; if the result still misses u by more than tol, the
 * rate is reported as +infinity together with the residual.
 */
template <CoefficientModel M>
RateResult rate_of_target(const HVec& x, const Trajectory& u, const M& model, const RateOptions& opt = {}) {
  if (u.dim() != model.dim_h() || static_cast<std::size_t>(x.size()) != model.dim_h()) {
    throw std::invalid_argument("rate_of_target: dimension mismatch");
  }
  RateResult out;
  const double start_gap = (u.at(0) - x).norm();
  if (start_gap > opt.tol) {
    out.residual = start_gap;
    return out;
  }
  const double dt = u.grid.dt();
  ControlPath psi(u.grid, model.dim_u());
  Operator g;
  double cell_residual = 0.0;
  for (std::size_t j = 0; j < u.steps(); ++j) {
    const HVec uj = u.at(j);
    model.diffusion_into(uj, g);
    const HVec slope = (u.at(j + 1) - u.at(j)) / dt;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(g);
    psi.at(j) = cod.solve(slope);
    cell_residual = std::max(cell_residual, ((g * psi.at(j)) * dt - (u.at(j + 1) - u.at(j))).norm());
  }
  const Trajectory reproduced = solve_skeleton(x, psi, model);
  const double direct_residual = std::max(cell_residual, sup_distance(reproduced, u));
  if (direct_residual <= opt.tol) {
    out.value = psi.energy();
    out.residual = direct_residual;
    out.control = psi;
    if (!opt.force_penalty) return out;
  }

  using Problem = detail::SkeletonPenaltyProblem<M>;
  Problem problem(model, x, u, Problem::Shape::reproduce);
  Eigen::VectorXd v = problem.scaled(psi);
  Eigen::VectorXd grad;
  for (double kappa : detail::kappa_schedule(opt)) {
    problem.set_kappa(kappa);
    minimize_lbfgs(problem, v, opt.lbfgs);
    problem.forward(v);
    out.penalty_energies.push_back(0.5 * v.squaredNorm());
  }
  problem.forward(v);
  const double penalty_residual = problem.deviation();
  const double penalty_value = 0.5 * v.squaredNorm();
  if (penalty_residual <= opt.tol && (!out.finite() || penalty_value < out.value)) {
    out.value = penalty_value;
    out.residual = penalty_residual;
    out.control = problem.control(v);
    out.from_penalty = true;
  } else if (!out.finite()) {
    out.residual = std::min(direct_residual, penalty_residual);
  }
  return out;
}

struct TubeRateOptions {
  /// The optimizer targets the tube of radius delta (1 - shrink) so that the
  /// small residual violation of the penalty method stays inside delta.
  double shrink = 1e-4;
  RateOptions rate{};
};

/**
 * Lower bound on the tube rate from the growth of feasible skeletons:
 * |z(t) - z(s)| <= Gamma sqrt(t - s) (int_s^t |psi|^2)^{1/2}, applied on
 * every dyadic partition of the grid. Requires a bounded diffusion.
 */
template <CoefficientModel M>
double tube_rate_lower_bound(const HVec& x, const Trajectory& u, double delta, const M& model) {
  const auto gamma = model.gamma_bound();
  if (!gamma || *gamma <= 0.0) return 0.0;
  const std::size_t n = u.steps();
  double best = 0.0;
  for (std::size_t block = 1; block <= n; block *= 2) {
    if (n % block != 0) break;
    const double h = static_cast<double>(block) * u.grid.dt();
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += block) {
      const double jump = start == 0 ? (HVec(u.at(block)) - x).norm() - delta
                                     : (u.at(start + block) - u.at(start)).norm() - 2.0 * delta;
      if (jump > 0.0) total += jump * jump / (2.0 * (*gamma) * (*gamma) * h);
    }
    best = std::max(best, total);
  }
  return best;
}

/**
 * Minimum control energy over skeletons from x that stay strictly inside
 * the delta-tube around u at every node: the membership test for the
 * delta-enlargement of a rate level set. Computed by the tube penalty with
 * escalating kappa; +infinity when no feasible control is found.
 */
template <CoefficientModel M>
RateResult tube_rate(const HVec& x, const Trajectory& u, double delta, const M& model, const TubeRateOptions& opt = {}) {
  if (!(delta > 0.0)) throw std::domain_error("tube_rate: delta must be positive");
  RateResult out;
  const Eigen::VectorXd offsets = (u.values.colwise() - x).colwise().norm();
  if (offsets[0] >= delta) {
    out.residual = offsets[0];
    return out;
  }
  if (offsets.maxCoeff() < delta) {
    out.value = 0.0;
    out.residual = offsets.maxCoeff();
    out.control = ControlPath(u.grid, model.dim_u());
    return out;
  }
  using Problem = detail::SkeletonPenaltyProblem<M>;
  Problem problem(model, x, u, Problem::Shape::tube, delta * (1.0 - opt.shrink));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(problem.size());
  for (double kappa : detail::kappa_schedule(opt.rate)) {
    problem.set_kappa(kappa);
    minimize_lbfgs(problem, v, opt.rate.lbfgs);
    problem.forward(v);
    out.penalty_energies.push_back(0.5 * v.squaredNorm());
  }
  problem.forward(v);
  out.residual = problem.deviation();
  if (out.residual < delta) {
    out.value = 0.5 * v.squaredNorm();
    out.control = problem.control(v);
    out.from_penalty = true;
  }
  return out;
}

/// Outcome of deciding tube_rate(x, u, delta) > r.
struct TubeDecision {
  bool exceeds = false;
  double lower = 0.0;  // certified lower bound when bounded diffusion
  double upper = std::numeric_limits<double>::infinity();  // energy of best feasible control found
  enum class Route { at_rest, lower_bound, feasible_witness, optimized } route = Route::optimized;
};

/**
 * Decides whether the tube rate exceeds r, stopping as soon as either a
 * certificate (growth lower bound above r) or a feasible control with
 * energy at most r is available. Otherwise follows tube_rate.
 */
template <CoefficientModel M>
TubeDecision tube_rate_exceeds(const HVec& x, const Trajectory& u, double delta, double r, const M& model,
                               const TubeRateOptions& opt = {}) {
  TubeDecision dec;
  const Eigen::VectorXd offsets = (u.values.colwise() - x).colwise().norm();
  if (offsets[0] >= delta) {
    dec.exceeds = true;
    dec.lower = std::numeric_limits<double>::infinity();
    dec.route = TubeDecision::Route::lower_bound;
    return dec;
  }
  if (offsets.maxCoeff() < delta) {
    dec.upper = 0.0;
    dec.route = TubeDecision::Route::at_rest;
    return dec;
  }
  dec.lower = tube_rate_lower_bound(x, u, delta, model);
  if (dec.lower > r) {
    dec.exceeds = true;
    dec.route = TubeDecision::Route::lower_bound;
    return dec;
  }
  using Problem = detail::SkeletonPenaltyProblem<M>;
  Eigen::VectorXd v;
  // A narrower tube at moderate kappa gives a feasible witness cheaply.
  {
    Problem witness(model, x, u, Problem::Shape::tube, 0.8 * delta);
    v = Eigen::VectorXd::Zero(witness.size());
    for (double kappa : {1.0, 10.0, 100.0}) {
      witness.set_kappa(kappa);
      minimize_lbfgs(witness, v, opt.rate.lbfgs);
    }
    witness.forward(v);
    const double energy = 0.5 * v.squaredNorm();
    if (witness.deviation() < delta && energy <= r) {
      dec.upper = energy;
      dec.route = TubeDecision::Route::feasible_witness;
      return dec;
    }
  }
  Problem problem(model, x, u, Problem::Shape::tube, delta * (1.0 - opt.shrink));
  for (double kappa : detail::kappa_schedule(opt.rate)) {
    problem.set_kappa(kappa);
    minimize_lbfgs(problem, v, opt.rate.lbfgs);
    problem.forward(v);
    const double energy = 0.5 * v.squaredNorm();
    if (problem.deviation() < delta) {
      dec.upper = std::min(dec.upper, energy);
      if (energy <= r) {
        dec.route = TubeDecision::Route::optimized;
        return dec;
      }
    }
  }
  dec.exceeds = true;
  dec.route = TubeDecision::Route::optimized;
  return dec;
}

}  // namespace ldplab

#endif  // LDPLAB_RATE_HPP
