#ifndef LDPLAB_LBFGS_HPP
#define LDPLAB_LBFGS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

#include <Eigen/Dense>

namespace ldplab {

struct LbfgsOptions {
  std::size_t memory = 8;
  std::size_t max_iterations = 300;
  double gradient_tol = 1e-10;  // on ||g||_inf / max(1, |f|)
  double value_tol = 1e-14;     // relative decrease per iteration
  std::size_t max_backtracks = 40;
};

struct LbfgsResult {
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/**
 * Limited-memory BFGS with Armijo backtracking.
 *
 * `objective(x, grad)` returns f(x) and writes the gradient into grad.
 * Curvature pairs with s.y <= 0 are skipped. `x` holds the final iterate.
 */
template <typename Objective>
LbfgsResult minimize_lbfgs(Objective&& objective, Eigen::VectorXd& x, const LbfgsOptions& opt = {}) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n), g_new(n), x_new(n), dir(n);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha(opt.memory);

  LbfgsResult res;
  double f = objective(x, g);
  res.evaluations = 1;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() <= opt.gradient_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    dir = -g;
    const std::size_t k = s_hist.size();
    for (std::size_t i = k; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (k > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < k; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    double step = (k == 0) ? std::min(1.0, 1.0 / std::max(g.norm(), 1e-300)) : 1.0;
    double f_new = f;
    bool accepted = false;
    for (std::size_t bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = x + step * dir;
      f_new = objective(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (s_hist.size() == opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    const double decrease = f - f_new;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    if (decrease <= opt.value_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      res.iterations = it + 1;
      break;
    }
    res.iterations = it + 1;
  }
  res.value = f;
  return res;
}

}  // namespace ldplab

#endif  // LDPLAB_LBFGS_HPP
