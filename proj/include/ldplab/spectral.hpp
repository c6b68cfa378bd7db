#ifndef LDPLAB_SPECTRAL_HPP
#define LDPLAB_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ldplab {

/// State vector in the truncated spectral basis of H.
using HVec = Eigen::VectorXd;
/// Noise-space vector in the truncated basis (g_k) of U.
using UVec = Eigen::VectorXd;
/// Dense d x m operator from U into H.
using Operator = Eigen::MatrixXd;

/**
 * Diagonal generator A = diag(a_1, ..., a_d) on the truncated H.
 *
 * The semigroup is S(t) = diag(exp(a_k t)) and its bound over t in [0,1]
 * is computed exactly at construction.
 */
class SpectralBasis {
public:
  explicit SpectralBasis(std::vector<double> eigenvalues)
      : eigenvalues_(std::move(eigenvalues)) {
    if (eigenvalues_.empty()) {
      throw std::invalid_argument("SpectralBasis: at least one eigenvalue required");
    }
    semigroup_bound_ = 1.0;
    for (double a : eigenvalues_) {
      semigroup_bound_ = std::max(semigroup_bound_, std::exp(a));
    }
  }

  std::size_t dim() const { return eigenvalues_.size(); }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  double eigenvalue(std::size_t k) const { return eigenvalues_[k]; }

  /// M = sup_{t in [0,1]} ||S(t)||.
  double semigroup_bound() const { return semigroup_bound_; }

  /// Operator norm of S(t) for diagonal A.
  double semigroup_norm(double t) const {
    double best = 0.0;
    for (double a : eigenvalues_) best = std::max(best, std::exp(a * t));
    return best;
  }

  /// Diagonal of S(t).
  Eigen::VectorXd semigroup_diagonal(double t) const {
    if (t < 0.0) throw std::domain_error("semigroup: negative time");
    Eigen::VectorXd diag(dim());
    for (std::size_t k = 0; k < dim(); ++k) diag[k] = std::exp(eigenvalues_[k] * t);
    return diag;
  }

  bool is_contraction() const {
    return std::all_of(eigenvalues_.begin(), eigenvalues_.end(), [](double a) { return a <= 0.0; });
  }

private:
  std::vector<double> eigenvalues_;
  double semigroup_bound_ = 1.0;
};

/**
 * Truncated noise space U with m modes and the weights lambda_k defining
 * the larger space U_1 in which the cylindrical Wiener process lives.
 */
class NoiseSpace {
public:
  explicit NoiseSpace(std::vector<double> u1_weights) : weights_(std::move(u1_weights)) {
    if (weights_.empty()) throw std::invalid_argument("NoiseSpace: at least one mode required");
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      if (!(weights_[k] > 0.0)) throw std::invalid_argument("NoiseSpace: weights must be positive");
      if (k > 0 && !(weights_[k] < weights_[k - 1])) {
        throw std::invalid_argument("NoiseSpace: weights must be strictly decreasing");
      }
    }
  }

  /// lambda_k = 1/k, admissible for every m.
  static NoiseSpace harmonic(std::size_t m) {
    std::vector<double> w(m);
    for (std::size_t k = 0; k < m; ++k) w[k] = 1.0 / static_cast<double>(k + 1);
    return NoiseSpace(std::move(w));
  }

  std::size_t dim() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t k) const { return weights_[k]; }

  /// J: U -> U_1 expressed in the coordinates of the basis (J g_k) of U_1,
  /// which is orthogonal with |J g_k|_{U_1} = lambda_k. Since the U_1
  /// coordinates coincide with the U coordinates, J acts as the identity
  /// on coordinates; the weights enter only through the norm.
  UVec embed(const UVec& u) const { return u; }

  /// |u|_{U_1} = sqrt(sum lambda_k^2 u_k^2).
  double u1_norm(const UVec& u) const {
    check(u);
    double s = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) s += weights_[k] * weights_[k] * u[k] * u[k];
    return std::sqrt(s);
  }

  /// <u, v>_{U_1}.
  double u1_inner(const UVec& u, const UVec& v) const {
    check(u);
    check(v);
    double s = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) s += weights_[k] * weights_[k] * u[k] * v[k];
    return s;
  }

  /// Pi_n^1 u = sum_{k<=n} lambda_k^{-2} <u, J g_k>_{U_1} g_k.
  UVec project_u1(std::size_t n, const UVec& u) const {
    check(u);
    if (n > dim()) throw std::out_of_range("project_u1: n exceeds dim_u");
    UVec out = UVec::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t k = 0; k < n; ++k) {
      UVec g = UVec::Zero(static_cast<Eigen::Index>(dim()));
      g[static_cast<Eigen::Index>(k)] = 1.0;
      out[static_cast<Eigen::Index>(k)] = u1_inner(u, embed(g)) / (weights_[k] * weights_[k]);
    }
    return out;
  }

private:
  void check(const UVec& u) const {
    if (static_cast<std::size_t>(u.size()) != dim()) {
      throw std::invalid_argument("NoiseSpace: vector dimension mismatch");
    }
  }

  std::vector<double> weights_;
};

/// Uniform grid 0 = t_0 < ... < t_N = 1.
class TimeGrid {
public:
  explicit TimeGrid(std::size_t steps) : steps_(steps) {
    if (steps == 0) throw std::invalid_argument("TimeGrid: steps must be positive");
  }

  std::size_t steps() const { return steps_; }
  double dt() const { return 1.0 / static_cast<double>(steps_); }
  double node(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(steps_); }
  std::vector<double> nodes() const {
    std::vector<double> t(steps_ + 1);
    for (std::size_t j = 0; j <= steps_; ++j) t[j] = node(j);
    return t;
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
  std::size_t steps_;
};

/// S(t) v for diagonal A.
inline HVec semigroup_apply(const SpectralBasis& basis, double t, const HVec& v) {
  if (t < 0.0) throw std::domain_error("semigroup_apply: t must be nonnegative");
  if (static_cast<std::size_t>(v.size()) != basis.dim()) {
    throw std::invalid_argument("semigroup_apply: dimension mismatch");
  }
  return basis.semigroup_diagonal(t).cwiseProduct(v);
}

/// Pi_n: keeps the first n coordinates.
inline UVec project_u(std::size_t n, const UVec& u) {
  if (n > static_cast<std::size_t>(u.size())) throw std::out_of_range("project_u: n exceeds dim_u");
  UVec out = UVec::Zero(u.size());
  out.head(static_cast<Eigen::Index>(n)) = u.head(static_cast<Eigen::Index>(n));
  return out;
}

/// Hilbert-Schmidt norm of a d x m operator (Frobenius norm in orthonormal bases).
inline double hs_norm(const Eigen::Ref<const Operator>& op) { return op.norm(); }

/**
 * Empirical modulus of continuity behind (A2).
 *
 * Returns the sup over eps in {2^-k : k = 0..eps_levels-1} and t, r in
 * [a, 1] with |t - r| <= mesh of ||S(eps t) - S(eps r)||. Every
 * t -> exp(a_k eps t) is monotone, so for fixed t the worst partner is
 * r = min(t + mesh, 1).
 */
inline double check_a2_modulus(const SpectralBasis& basis, double a, double mesh,
                               std::size_t t_points = 2001, std::size_t eps_levels = 40) {
  if (!(a > 0.0 && a <= 1.0)) throw std::domain_error("check_a2_modulus: a must lie in (0,1]");
  if (mesh < 0.0) throw std::domain_error("check_a2_modulus: mesh must be nonnegative");
  if (mesh == 0.0 || a == 1.0) return 0.0;
  double worst = 0.0;
  for (std::size_t level = 0; level < eps_levels; ++level) {
    const double eps = std::ldexp(1.0, -static_cast<int>(level));
    for (std::size_t i = 0; i < t_points; ++i) {
      const double t = a + (1.0 - a) * static_cast<double>(i) / static_cast<double>(t_points - 1);
      const double r = std::min(t + mesh, 1.0);
      for (double ak : basis.eigenvalues()) {
        worst = std::max(worst, std::abs(std::exp(ak * eps * t) - std::exp(ak * eps * r)));
      }
    }
  }
  return worst;
}

/// Constant c in ||S(t) - S(r)|| <= c ln(t/r) for a diagonal nonpositive
/// spectrum: ||A S(s)|| <= sup_{l >= 0} l e^{-l s} = 1/(e s).
inline constexpr double analytic_log_constant() { return 0.36787944117144233; }

/// c ln((a + mesh) / a), the largest value of c ln(t/r) over the pairs
/// examined by check_a2_modulus.
inline double a2_log_bound(double a, double mesh) {
  return analytic_log_constant() * std::log(std::min(a + mesh, 1.0) / a);
}

}  // namespace ldplab

#endif  // LDPLAB_SPECTRAL_HPP
