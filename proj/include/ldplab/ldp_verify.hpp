#ifndef LDPLAB_LDP_VERIFY_HPP
#define LDPLAB_LDP_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Dense>

#include "ldplab/model.hpp"
#include "ldplab/montecarlo.hpp"
#include "ldplab/paths.hpp"
#include "ldplab/rate.hpp"
#include "ldplab/rng.hpp"
#include "ldplab/sde.hpp"
#include "ldplab/skeleton.hpp"
#include "ldplab/spectral.hpp"

namespace ldplab {

/**
 * Log of dP/dP^eps along a simulated path: with dW the increments that
 * drive the tilted equation (a Brownian motion under P^eps),
 *   -eps^{-1/2} sum_j <phi_j, dW_j> - (1/(2 eps)) sum_j |phi_j|^2 dt.
 */
inline double girsanov_log_weight(const ControlPath& phi, double eps, const WienerPath& w) {
  if (!(phi.grid == w.grid) || phi.dim() != w.dim()) throw std::invalid_argument("girsanov_log_weight: grid mismatch");
  if (!(eps > 0.0)) throw std::domain_error("girsanov_log_weight: eps must be positive");
  const double cross = (phi.values.cwiseProduct(w.increments)).sum();
  return -cross / std::sqrt(eps) - phi.squared_l2() / (2.0 * eps);
}

enum class TubeMethod { direct, importance };

struct RunOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
};

/**
 * Estimates P{ max_j |X^eps(t_j) - z^phi_x(t_j)| < delta } on the grid of phi.
 *
 * direct: fraction of X^eps paths inside the tube.
 * importance: averages 1{Z^eps in tube} exp(girsanov_log_weight) over
 * tilted paths Z^eps, an unbiased estimator of the same probability.
 */
template <CoefficientModel M>
MCEstimate estimate_tube_probability(const HVec& x, const SpectralBasis& basis, const ControlPath& phi, double delta,
                                     double eps, const M& model, const RunOptions& run, TubeMethod method) {
  if (run.samples == 0) throw std::invalid_argument("estimate_tube_probability: n must be positive");
  if (!(delta > 0.0)) throw std::invalid_argument("estimate_tube_probability: delta must be positive");
  const Trajectory skeleton = solve_skeleton(x, phi, model);
  const SolverConfig cfg{eps, phi.grid.steps(), run.seed};
  std::vector<double> values(run.samples);
  parallel_for(run.samples, run.workers, [&](std::size_t i) {
    const WienerPath w = sample_wiener(phi.grid, model.dim_u(), stream_seed(run.seed, i));
    if (method == TubeMethod::direct) {
      const Trajectory path = solve_rescaled(x, basis, model, cfg, w);
      values[i] = sup_distance(path, skeleton) < delta ? 1.0 : 0.0;
    } else {
      const Trajectory path = solve_tilted(x, basis, model, phi, cfg, w);
      values[i] = sup_distance(path, skeleton) < delta ? std::exp(girsanov_log_weight(phi, eps, w)) : 0.0;
    }
  });
  return summarize(values, run.seed);
}

struct LDPRow {
  double epsilon = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double eps_log_estimate = 0.0;  // -inf when estimate == 0
  double threshold = 0.0;
  bool pass = false;
  bool zero_hit = false;
  double upper_confidence = 0.0;  // 1 - 0.05^{1/n} for zero-hit rows
  std::uint64_t seed = 0;
  std::size_t samples = 0;
};

struct LDPReport {
  std::string kind;
  std::vector<LDPRow> rows;  // decreasing epsilon
  /// Largest epsilon from which every smaller tested epsilon passes.
  std::optional<double> epsilon0;
  /// True when the passing rows form a tail of the epsilon list.
  bool persistent = false;

  std::size_t pass_count() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const LDPRow& r) { return r.pass; }));
  }
  bool all_pass() const { return pass_count() == rows.size(); }
};

namespace detail {

inline void check_eps_list(std::span<const double> eps_list) {
  if (eps_list.empty()) throw std::invalid_argument("eps_list must be nonempty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0 && eps_list[i] <= 1.0)) throw std::domain_error("eps_list: values must lie in (0,1]");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw std::invalid_argument("eps_list must be strictly decreasing");
  }
}

inline void finish_report(LDPReport& report) {
  std::optional<double> eps0;
  bool tail = true;
  for (std::size_t i = report.rows.size(); i-- > 0;) {
    if (report.rows[i].pass && tail) {
      eps0 = report.rows[i].epsilon;
    } else {
      tail = false;
    }
  }
  report.epsilon0 = eps0;
  const std::size_t passing = report.pass_count();
  std::size_t tail_len = 0;
  for (std::size_t i = report.rows.size(); i-- > 0 && report.rows[i].pass;) ++tail_len;
  report.persistent = passing > 0 && tail_len == passing;
}

inline double eps_log(double eps, double p) {
  return p > 0.0 ? eps * std::log(p) : -std::numeric_limits<double>::infinity();
}

/// Seed of the row for eps_list[index].
inline std::uint64_t row_seed(std::uint64_t master, std::size_t index) { return stream_seed(master, 0x10000 + index); }

template <CoefficientModel M>
LDPReport verify_lower_impl(const HVec& x, const SpectralBasis& basis, const ControlPath& phi, double delta, double gamma,
                            std::span<const double> eps_list, const M& model, const RunOptions& run, TubeMethod method) {
  LDPReport report{"lower", {}, std::nullopt, false};
  const double threshold = -phi.energy() - gamma;
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    RunOptions row_run = run;
    row_run.seed = row_seed(run.seed, i);
    const MCEstimate est = estimate_tube_probability(x, basis, phi, delta, eps_list[i], model, row_run, method);
    LDPRow row;
    row.epsilon = eps_list[i];
    row.estimate = est.mean;
    row.std_error = est.std_error;
    row.eps_log_estimate = eps_log(eps_list[i], est.mean);
    row.threshold = threshold;
    row.pass = row.eps_log_estimate >= threshold;
    row.zero_hit = est.mean == 0.0;
    row.upper_confidence = row.zero_hit ? zero_hit_upper_bound(run.samples) : est.mean;
    row.seed = row_run.seed;
    row.samples = run.samples;
    report.rows.push_back(row);
  }
  finish_report(report);
  return report;
}

template <CoefficientModel M>
LDPReport verify_upper_impl(const HVec& x, const SpectralBasis& basis, double r, double delta, double gamma,
                            std::span<const double> eps_list, const M& model, const RunOptions& run,
                            std::size_t steps, const TubeRateOptions& tube) {
  LDPReport report{"upper", {}, std::nullopt, false};
  const TimeGrid grid(steps);
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const std::uint64_t seed = row_seed(run.seed, i);
    const SolverConfig cfg{eps_list[i], steps, seed};
    std::vector<double> outside(run.samples);
    parallel_for(run.samples, run.workers, [&](std::size_t s) {
      const WienerPath w = sample_wiener(grid, model.dim_u(), stream_seed(seed, s));
      const Trajectory path = solve_rescaled(x, basis, model, cfg, w);
      outside[s] = tube_rate_exceeds(x, path, delta, r, model, tube).exceeds ? 1.0 : 0.0;
    });
    const MCEstimate est = summarize(outside, seed);
    LDPRow row;
    row.epsilon = eps_list[i];
    row.estimate = est.mean;
    row.std_error = est.std_error;
    row.eps_log_estimate = eps_log(eps_list[i], est.mean);
    row.threshold = -r + gamma;
    row.pass = row.eps_log_estimate <= row.threshold;
    row.zero_hit = est.mean == 0.0;
    row.upper_confidence = row.zero_hit ? zero_hit_upper_bound(run.samples) : est.mean;
    row.seed = seed;
    row.samples = run.samples;
    report.rows.push_back(row);
  }
  finish_report(report);
  return report;
}

}  // namespace detail

/**
 * Lower-bound rows: for each eps, p(eps) = P{X^eps in the delta-tube of
 * z^phi_x} is estimated and passes when eps ln p >= -energy(phi) - gamma.
 * An unbounded diffusion is replaced by its truncation at the radius that
 * contains the tube, which leaves the tube probability unchanged.
 */
template <CoefficientModel M>
LDPReport verify_lower_bound(const HVec& x, const SpectralBasis& basis, const ControlPath& phi, double delta,
                             double gamma, std::span<const double> eps_list, const M& model, const RunOptions& run,
                             TubeMethod method = TubeMethod::importance) {
  detail::check_eps_list(eps_list);
  if (!(delta > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("verify_lower_bound: delta and gamma must be positive");
  if (!model.gamma_bound()) {
    const double radius = truncation_radius(x.norm() + delta, std::max(phi.energy(), 1e-12), delta, model.lambda_lip());
    return detail::verify_lower_impl(x, basis, phi, delta, gamma, eps_list, truncate_diffusion(model, radius), run, method);
  }
  return detail::verify_lower_impl(x, basis, phi, delta, gamma, eps_list, model, run, method);
}

/**
 * Upper-bound rows: q(eps) = P{tube_rate(x, X^eps, delta) > r}, i.e. the
 * probability that X^eps leaves the delta-enlargement of {I_x <= r}; a row
 * passes when eps ln q <= -r + gamma (ln 0 = -inf passes). Unbounded
 * diffusions are truncated first.
 */
template <CoefficientModel M>
LDPReport verify_upper_bound(const HVec& x, const SpectralBasis& basis, double r, double delta, double gamma,
                             std::span<const double> eps_list, const M& model, const RunOptions& run,
                             std::size_t steps = 256, const TubeRateOptions& tube = {}) {
  detail::check_eps_list(eps_list);
  if (!(r > 0.0) || !(delta > 0.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("verify_upper_bound: r, delta and gamma must be positive");
  }
  if (!model.gamma_bound()) {
    const double radius = truncation_radius(x.norm() + delta, r, delta, model.lambda_lip());
    return detail::verify_upper_impl(x, basis, r, delta, gamma, eps_list, truncate_diffusion(model, radius), run, steps, tube);
  }
  return detail::verify_upper_impl(x, basis, r, delta, gamma, eps_list, model, run, steps, tube);
}

/// One row of a tail-bound report.
struct TailRow {
  std::string test;
  double epsilon = 1.0;
  double delta = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool pass = false;
};

/**
 * Empirical P{max_j |sum_{i<j} xi_i dW_i| >= delta} against
 * 3 exp(-delta^2 / (4 eta1)). The integrand is deterministic per step and
 * must satisfy sum_j ||xi_j||_HS^2 dt <= eta1.
 */
inline std::vector<TailRow> chow_menaldi_check(std::span<const Operator> xi, const TimeGrid& grid, double eta1,
                                               std::span<const double> delta_grid, const RunOptions& run) {
  if (xi.size() != grid.steps()) throw std::invalid_argument("chow_menaldi_check: one integrand per step required");
  if (!(eta1 > 0.0)) throw std::invalid_argument("chow_menaldi_check: eta1 must be positive");
  double integrated = 0.0;
  for (const auto& op : xi) integrated += op.squaredNorm() * grid.dt();
  if (integrated > eta1 * (1.0 + 1e-12)) throw std::invalid_argument("chow_menaldi_check: integrated HS norm exceeds eta1");
  const auto m = static_cast<std::size_t>(xi.front().cols());
  std::vector<double> sups(run.samples);
  parallel_for(run.samples, run.workers, [&](std::size_t s) {
    const WienerPath w = sample_wiener(grid, m, stream_seed(run.seed, s));
    HVec acc = HVec::Zero(xi.front().rows());
    double best = 0.0;
    for (std::size_t j = 0; j < grid.steps(); ++j) {
      acc.noalias() += xi[j] * w.step(j);
      best = std::max(best, acc.norm());
    }
    sups[s] = best;
  });
  std::vector<TailRow> rows;
  std::vector<double> hits(run.samples);
  for (double delta : delta_grid) {
    for (std::size_t s = 0; s < run.samples; ++s) hits[s] = sups[s] >= delta ? 1.0 : 0.0;
    const MCEstimate est = summarize(hits, run.seed);
    TailRow row{"chow-menaldi", 1.0, delta, est.mean, est.std_error, 3.0 * std::exp(-delta * delta / (4.0 * eta1)), false};
    row.pass = row.estimate <= row.bound + 4.0 * row.std_error;
    rows.push_back(row);
  }
  return rows;
}

/// Constants of the stochastic-convolution tail bound C exp(-delta^2 / (kappa^2 eta2)).
struct TailBoundParams {
  double alpha0 = 0.0;
  double p0 = 0.0;
  double kappa = 0.0;
  double eta = 0.0;
  double n0 = 0.0;
  double c_const = 0.0;
};

namespace detail {

/// int_0^1 t^beta f(t) dt for beta > -1, after t = s^{1/(beta+1)} removes
/// the endpoint singularity.
template <typename F>
double weighted_singular_integral(double beta, F&& f) {
  const double q = beta + 1.0;
  auto smooth = [&](double s) { return f(std::pow(s, 1.0 / q)); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(smooth, 0.0, 1.0, 15, 1e-13) / q;
}

}  // namespace detail

/// n0 = p0 / (2 p0 - 2) + 1.
inline double tail_bound_n0(double p0) {
  if (!(p0 > 1.0)) throw std::domain_error("tail bound: p0 must exceed 1");
  return p0 / (2.0 * p0 - 2.0) + 1.0;
}

/// C = 4 + exp(4 n0!)^{1/n0}, with n0! = Gamma(n0 + 1).
inline double tail_bound_constant(double p0) {
  const double n0 = tail_bound_n0(p0);
  return 4.0 + std::exp(4.0 * std::tgamma(n0 + 1.0) / n0);
}

inline TailBoundParams make_tail_bound_params(const SpectralBasis& basis, double alpha0, double p0, double eta) {
  if (!(alpha0 > 0.0 && alpha0 < 0.5)) throw std::domain_error("tail bound: alpha0 must lie in (0, 1/2)");
  if (!(p0 > 1.0)) throw std::domain_error("tail bound: p0 must exceed 1");
  const double exponent = (alpha0 - 1.0) * p0;
  if (!(exponent > -1.0)) {
    throw std::domain_error("tail bound: kappa integral diverges, (alpha0 - 1) p0 = " + std::to_string(exponent) + " <= -1");
  }
  TailBoundParams params;
  params.alpha0 = alpha0;
  params.p0 = p0;
  params.eta = eta;
  const double integral =
      detail::weighted_singular_integral(exponent, [&](double t) { return std::pow(basis.semigroup_norm(t), p0); });
  params.kappa = std::pow(integral, 1.0 / p0);
  params.n0 = tail_bound_n0(p0);
  params.c_const = tail_bound_constant(p0);
  return params;
}

inline double peszat_bound_eval(const TailBoundParams& params, double delta) {
  return params.c_const * std::exp(-delta * delta / (params.kappa * params.kappa * params.eta));
}

/// sup_t int_0^t (t-s)^{-2 alpha0} ||S(t-s) xi||_HS^2 ds for a constant
/// integrand; the integrand is nonnegative so the sup is attained at t = 1.
inline double convolution_eta(const SpectralBasis& basis, const Operator& xi, double alpha0) {
  if (static_cast<std::size_t>(xi.rows()) != basis.dim()) throw std::invalid_argument("convolution_eta: dimension mismatch");
  const Eigen::VectorXd row_norms = xi.rowwise().squaredNorm();
  return detail::weighted_singular_integral(-2.0 * alpha0, [&](double u) {
    double s = 0.0;
    for (std::size_t k = 0; k < basis.dim(); ++k) s += std::exp(2.0 * basis.eigenvalue(k) * u) * row_norms[static_cast<Eigen::Index>(k)];
    return s;
  });
}

/**
 * Empirical tail of max_j |Y_j| for the stochastic convolution
 * Y(t) = int_0^t S(t-s) xi dW(s), simulated by Y_{j+1} = S(dt)(Y_j + xi dW_j),
 * against C exp(-delta^2 / (kappa^2 eta2)).
 */
inline std::vector<TailRow> peszat_convolution_check(const SpectralBasis& basis, const Operator& xi, const TailBoundParams& params,
                                                     const TimeGrid& grid, std::span<const double> delta_grid,
                                                     const RunOptions& run) {
  const Eigen::VectorXd decay = basis.semigroup_diagonal(grid.dt());
  const auto m = static_cast<std::size_t>(xi.cols());
  std::vector<double> sups(run.samples);
  parallel_for(run.samples, run.workers, [&](std::size_t s) {
    const WienerPath w = sample_wiener(grid, m, stream_seed(run.seed, s));
    HVec y = HVec::Zero(xi.rows());
    double best = 0.0;
    for (std::size_t j = 0; j < grid.steps(); ++j) {
      y.noalias() += xi * w.step(j);
      y = decay.cwiseProduct(y);
      best = std::max(best, y.norm());
    }
    sups[s] = best;
  });
  std::vector<TailRow> rows;
  std::vector<double> hits(run.samples);
  for (double delta : delta_grid) {
    for (std::size_t s = 0; s < run.samples; ++s) hits[s] = sups[s] >= delta ? 1.0 : 0.0;
    const MCEstimate est = summarize(hits, run.seed);
    TailRow row{"peszat", 1.0, delta, est.mean, est.std_error, peszat_bound_eval(params, delta), false};
    row.pass = row.estimate <= row.bound + 4.0 * row.std_error;
    rows.push_back(row);
  }
  return rows;
}

/**
 * Small-ball rows for sqrt(eps) W in C([0,1]; U_1): estimate = P{max_j
 * sqrt(eps) |W(t_j)|_{U_1} <= b}; bound = exp(-rate / eps) where rate is
 * wiener_rate of the cheapest exit path f(t) = b t along the mode with the
 * largest weight, the LDP prediction for the complementary event. A row
 * passes when eps ln p is no larger than at the next larger radius, up to
 * 4 combined standard errors (delta method).
 */
inline std::vector<TailRow> wiener_ldp_check(const NoiseSpace& noise, std::span<const double> eps_list,
                                             std::span<const double> radius_grid, const TimeGrid& grid,
                                             const RunOptions& run) {
  std::vector<TailRow> rows;
  std::vector<double> radii(radius_grid.begin(), radius_grid.end());
  std::sort(radii.begin(), radii.end());
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    const double eps = eps_list[e];
    const std::uint64_t seed = stream_seed(run.seed, 0x20000 + e);
    std::vector<double> sups(run.samples);
    parallel_for(run.samples, run.workers, [&](std::size_t s) {
      const WienerPath w = sample_wiener(grid, noise.dim(), stream_seed(seed, s));
      UVec acc = UVec::Zero(static_cast<Eigen::Index>(noise.dim()));
      double best = 0.0;
      for (std::size_t j = 0; j < grid.steps(); ++j) {
        acc += w.step(j);
        best = std::max(best, noise.u1_norm(acc));
      }
      sups[s] = std::sqrt(eps) * best;
    });
    std::vector<double> hits(run.samples);
    std::vector<TailRow> block;
    for (double b : radii) {
      for (std::size_t s = 0; s < run.samples; ++s) hits[s] = sups[s] <= b ? 1.0 : 0.0;
      const MCEstimate est = summarize(hits, seed);
      ControlPath c(grid, noise.dim());
      c.values.row(0).setConstant(b / noise.weight(0));
      const double rate = wiener_rate(wiener_path_of_control(c, noise), noise);
      block.push_back(TailRow{"wiener-ball", eps, b, est.mean, est.std_error, std::exp(-rate / eps), true});
    }
    for (std::size_t i = 0; i + 1 < block.size(); ++i) {
      const auto& lo = block[i];
      const auto& hi = block[i + 1];
      if (lo.estimate == 0.0) continue;
      if (hi.estimate == 0.0) {
        block[i].pass = false;
        continue;
      }
      const double spread = eps * std::hypot(lo.std_error / lo.estimate, hi.std_error / hi.estimate);
      block[i].pass = eps * std::log(lo.estimate) <= eps * std::log(hi.estimate) + 4.0 * spread;
    }
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

}  // namespace ldplab

#endif  // LDPLAB_LDP_VERIFY_HPP
