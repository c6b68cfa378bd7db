#ifndef LDPLAB_MODEL_HPP
#define LDPLAB_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ldplab/rng.hpp"
#include "ldplab/spectral.hpp"

namespace ldplab {

/**
 * Time weight nu in L^2([0,1]) bounding the drift.
 *
 * Solvers never evaluate nu at a grid node; they use the value at the
 * midpoint of the current cell, so a profile such as t^{-1/4} is usable
 * even though it is unbounded at 0.
 */
class NuProfile {
public:
  enum class Kind { constant, power, table };

  static NuProfile constant(double value) {
    if (value < 0.0) throw std::invalid_argument("nu: value must be nonnegative");
    return NuProfile(Kind::constant, value, 0.0, {});
  }

  /// nu(t) = scale * t^exponent, square-integrable iff exponent > -1/2.
  static NuProfile power(double scale, double exponent) {
    if (scale < 0.0) throw std::invalid_argument("nu: scale must be nonnegative");
    if (!(exponent > -0.5)) throw std::invalid_argument("nu: exponent must exceed -1/2 for square integrability");
    return NuProfile(Kind::power, scale, exponent, {});
  }

  /// Piecewise constant on a uniform partition of [0,1] into values.size() cells.
  static NuProfile table(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("nu: table must be nonempty");
    for (double v : values) {
      if (v < 0.0) throw std::invalid_argument("nu: table values must be nonnegative");
    }
    return NuProfile(Kind::table, 0.0, 0.0, std::move(values));
  }

  Kind kind() const { return kind_; }

  double operator()(double t) const {
    if (t < 0.0 || t > 1.0) throw std::domain_error("nu: t outside [0,1]");
    switch (kind_) {
      case Kind::constant:
        return scale_;
      case Kind::power:
        if (t == 0.0 && exponent_ < 0.0) throw std::domain_error("nu: singular at t = 0");
        return scale_ * std::pow(t, exponent_);
      case Kind::table: {
        const auto cells = table_.size();
        auto idx = static_cast<std::size_t>(t * static_cast<double>(cells));
        return table_[std::min(idx, cells - 1)];
      }
    }
    return 0.0;
  }

  /// Value used on the cell [t0, t1]: nu at the midpoint.
  double on_cell(double t0, double t1) const { return (*this)(0.5 * (t0 + t1)); }

  const std::vector<double>& table_values() const { return table_; }
  double scale() const { return scale_; }
  double exponent() const { return exponent_; }

private:
  NuProfile(Kind kind, double scale, double exponent, std::vector<double> table)
      : kind_(kind), scale_(scale), exponent_(exponent), table_(std::move(table)) {}

  Kind kind_;
  double scale_;
  double exponent_;
  std::vector<double> table_;
};

struct ZeroDrift {};

/// F(t,x) = nu(t) (b + B x) with |b| <= 1 and ||B|| <= 1.
struct AffineDrift {
  HVec offset;
  Eigen::MatrixXd slope;
};

/// F(t,x) = nu(t) c(t) with c piecewise constant on a uniform partition
/// (rows of `values`) and |c| <= 1.
struct TableDrift {
  Eigen::MatrixXd values;  // cells x d
};

using DriftForm = std::variant<ZeroDrift, AffineDrift, TableDrift>;

struct ConstantDiffusion {
  Operator matrix;
};

/// Column k of G(x) is sigma_k clamp(x_k, -clip, clip) e_k (requires m <= d).
struct DiagonalLipschitzDiffusion {
  std::vector<double> sigma;
  double clip = 1.0;
};

/// Column k of G(x) is offsets.col(k) + slopes[k] x.
struct AffineDiffusion {
  Operator offsets;
  std::vector<Eigen::MatrixXd> slopes;
};

using DiffusionForm = std::variant<ConstantDiffusion, DiagonalLipschitzDiffusion, AffineDiffusion>;

/**
 * Interface the solvers need from a drift/diffusion pair.
 *
 * `diffusion_jacobian` writes the d x d Jacobian of z -> G(z) psi, used by
 * the adjoint gradient in the rate optimizer.
 */
template <typename M>
concept CoefficientModel = requires(const M& m, const HVec& x, const UVec& u, HVec& hout,
                                    Operator& gout, Eigen::MatrixXd& jout, double t) {
  { m.dim_h() } -> std::convertible_to<std::size_t>;
  { m.dim_u() } -> std::convertible_to<std::size_t>;
  { m.lambda_lip() } -> std::convertible_to<double>;
  { m.gamma_bound() } -> std::convertible_to<std::optional<double>>;
  m.drift_on_cell(t, t, x, hout);
  m.diffusion_into(x, gout);
  m.diffusion_jacobian(x, u, jout);
};

/// A drift/diffusion pair from the closed set of coefficient forms, with
/// its Lipschitz data computed from the form parameters.
class ModelSpec {
public:
  ModelSpec(std::size_t dim_h, std::size_t dim_u, DriftForm drift, DiffusionForm diffusion,
            NuProfile nu = NuProfile::constant(0.0), std::optional<double> declared_lambda = std::nullopt)
      : dim_h_(dim_h), dim_u_(dim_u), drift_(std::move(drift)), diffusion_(std::move(diffusion)), nu_(std::move(nu)) {
    validate();
    const double computed = computed_lambda();
    if (declared_lambda) {
      if (*declared_lambda < computed - 1e-12) {
        throw std::invalid_argument("model.lambda: declared value " + std::to_string(*declared_lambda) +
                                    " is below the form's constant " + std::to_string(computed));
      }
      lambda_ = *declared_lambda;
    } else {
      lambda_ = computed;
    }
    gamma_ = computed_gamma();
  }

  std::size_t dim_h() const { return dim_h_; }
  std::size_t dim_u() const { return dim_u_; }
  double lambda_lip() const { return lambda_; }
  std::optional<double> gamma_bound() const { return gamma_; }
  const NuProfile& nu() const { return nu_; }
  const DriftForm& drift_form() const { return drift_; }
  const DiffusionForm& diffusion_form() const { return diffusion_; }

  bool drift_is_zero() const { return std::holds_alternative<ZeroDrift>(drift_); }

  /// F(t,x) at a point in time.
  HVec drift(double t, const HVec& x) const {
    if (t < 0.0 || t > 1.0) throw std::domain_error("eval_drift: t outside [0,1]");
    check_h(x);
    HVec out(static_cast<Eigen::Index>(dim_h_));
    if (drift_is_zero()) {
      out.setZero();
      return out;
    }
    drift_with_weight(nu_(t), t, x, out);
    return out;
  }

  /// F on the original-time cell [t0, t1], with nu taken at the midpoint.
  void drift_on_cell(double t0, double t1, const HVec& x, HVec& out) const {
    out.resize(static_cast<Eigen::Index>(dim_h_));
    if (drift_is_zero()) {
      out.setZero();
      return;
    }
    drift_with_weight(nu_.on_cell(t0, t1), 0.5 * (t0 + t1), x, out);
  }

  Operator diffusion(const HVec& x) const {
    check_h(x);
    Operator g;
    diffusion_into(x, g);
    return g;
  }

  void diffusion_into(const HVec& x, Operator& out) const {
    out.resize(static_cast<Eigen::Index>(dim_h_), static_cast<Eigen::Index>(dim_u_));
    std::visit([&](const auto& form) { eval_diffusion_form(form, x, out); }, diffusion_);
  }

  void diffusion_jacobian(const HVec& x, const UVec& psi, Eigen::MatrixXd& out) const {
    const auto d = static_cast<Eigen::Index>(dim_h_);
    out.setZero(d, d);
    if (const auto* diag = std::get_if<DiagonalLipschitzDiffusion>(&diffusion_)) {
      for (std::size_t k = 0; k < dim_u_; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        if (std::abs(x[i]) < diag->clip) out(i, i) = diag->sigma[k] * psi[i];
      }
    } else if (const auto* aff = std::get_if<AffineDiffusion>(&diffusion_)) {
      for (std::size_t k = 0; k < dim_u_; ++k) out.noalias() += psi[static_cast<Eigen::Index>(k)] * aff->slopes[k];
    }
  }

private:
  void check_h(const HVec& x) const {
    if (static_cast<std::size_t>(x.size()) != dim_h_) throw std::invalid_argument("model: state dimension mismatch");
  }

  void drift_with_weight(double weight, double t, const HVec& x, HVec& out) const {
    if (const auto* aff = std::get_if<AffineDrift>(&drift_)) {
      out.noalias() = aff->slope * x;
      out += aff->offset;
      out *= weight;
    } else if (const auto* tab = std::get_if<TableDrift>(&drift_)) {
      const auto cells = static_cast<std::size_t>(tab->values.rows());
      auto idx = std::min(static_cast<std::size_t>(t * static_cast<double>(cells)), cells - 1);
      out = weight * tab->values.row(static_cast<Eigen::Index>(idx)).transpose();
    } else {
      out.setZero();
    }
  }

  static void eval_diffusion_form(const ConstantDiffusion& f, const HVec&, Operator& out) { out = f.matrix; }

  static void eval_diffusion_form(const DiagonalLipschitzDiffusion& f, const HVec& x, Operator& out) {
    out.setZero();
    for (std::size_t k = 0; k < f.sigma.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      out(i, i) = f.sigma[k] * std::clamp(x[i], -f.clip, f.clip);
    }
  }

  static void eval_diffusion_form(const AffineDiffusion& f, const HVec& x, Operator& out) {
    out = f.offsets;
    for (std::size_t k = 0; k < f.slopes.size(); ++k) out.col(static_cast<Eigen::Index>(k)).noalias() += f.slopes[k] * x;
  }

  void validate() const {
    const auto d = static_cast<Eigen::Index>(dim_h_);
    const auto m = static_cast<Eigen::Index>(dim_u_);
    if (d == 0 || m == 0) throw std::invalid_argument("model: dimensions must be positive");
    if (const auto* aff = std::get_if<AffineDrift>(&drift_)) {
      if (aff->offset.size() != d || aff->slope.rows() != d || aff->slope.cols() != d) {
        throw std::invalid_argument("model.drift: affine dimensions do not match dim_h");
      }
      if (aff->offset.norm() > 1.0 + 1e-12) throw std::invalid_argument("model.drift.b: norm must be <= 1");
      if (operator_norm(aff->slope) > 1.0 + 1e-12) throw std::invalid_argument("model.drift.B: operator norm must be <= 1");
    } else if (const auto* tab = std::get_if<TableDrift>(&drift_)) {
      if (tab->values.cols() != d || tab->values.rows() == 0) {
        throw std::invalid_argument("model.drift: table must have dim_h columns");
      }
      for (Eigen::Index i = 0; i < tab->values.rows(); ++i) {
        if (tab->values.row(i).norm() > 1.0 + 1e-12) throw std::invalid_argument("model.drift.table: rows must have norm <= 1");
      }
    }
    if (const auto* c = std::get_if<ConstantDiffusion>(&diffusion_)) {
      if (c->matrix.rows() != d || c->matrix.cols() != m) throw std::invalid_argument("model.diffusion: matrix must be dim_h x dim_u");
    } else if (const auto* diag = std::get_if<DiagonalLipschitzDiffusion>(&diffusion_)) {
      if (diag->sigma.size() != dim_u_) throw std::invalid_argument("model.diffusion.sigma: need dim_u entries");
      if (dim_u_ > dim_h_) throw std::invalid_argument("model.diffusion: diagonal-lipschitz needs dim_u <= dim_h");
      if (!(diag->clip > 0.0)) throw std::invalid_argument("model.diffusion.clip: must be positive");
    } else if (const auto* aff = std::get_if<AffineDiffusion>(&diffusion_)) {
      if (aff->offsets.rows() != d || aff->offsets.cols() != m || aff->slopes.size() != dim_u_) {
        throw std::invalid_argument("model.diffusion: affine dimensions do not match");
      }
      for (const auto& s : aff->slopes) {
        if (s.rows() != d || s.cols() != d) throw std::invalid_argument("model.diffusion: slopes must be dim_h x dim_h");
      }
    }
  }

  double computed_lambda() const {
    if (const auto* c = std::get_if<ConstantDiffusion>(&diffusion_)) return hs_norm(c->matrix);
    if (const auto* diag = std::get_if<DiagonalLipschitzDiffusion>(&diffusion_)) {
      double s = 0.0;
      for (double v : diag->sigma) s = std::max(s, std::abs(v));
      return s;
    }
    const auto& aff = std::get<AffineDiffusion>(diffusion_);
    double lip2 = 0.0;
    for (const auto& s : aff.slopes) lip2 += std::pow(operator_norm(s), 2);
    return std::max(std::sqrt(lip2), hs_norm(aff.offsets));
  }

  std::optional<double> computed_gamma() const {
    if (const auto* c = std::get_if<ConstantDiffusion>(&diffusion_)) return hs_norm(c->matrix);
    if (const auto* diag = std::get_if<DiagonalLipschitzDiffusion>(&diffusion_)) {
      double s = 0.0;
      for (double v : diag->sigma) s += v * v;
      return diag->clip * std::sqrt(s);
    }
    const auto& aff = std::get<AffineDiffusion>(diffusion_);
    for (const auto& s : aff.slopes) {
      if (s.norm() != 0.0) return std::nullopt;
    }
    return hs_norm(aff.offsets);
  }

public:
  static double operator_norm(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues()(0);
  }

private:
  std::size_t dim_h_;
  std::size_t dim_u_;
  DriftForm drift_;
  DiffusionForm diffusion_;
  NuProfile nu_;
  double lambda_ = 0.0;
  std::optional<double> gamma_;
};

static_assert(CoefficientModel<ModelSpec>);

/**
 * G_R: the diffusion frozen radially outside the closed ball of radius R.
 * Drift is passed through unchanged.
 */
template <CoefficientModel Base>
class TruncatedDiffusion {
public:
  TruncatedDiffusion(Base base, double radius) : base_(std::move(base)), radius_(radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("truncate_diffusion: R must be positive");
  }

  const Base& base() const { return base_; }
  double radius() const { return radius_; }
  std::size_t dim_h() const { return base_.dim_h(); }
  std::size_t dim_u() const { return base_.dim_u(); }
  double lambda_lip() const { return base_.lambda_lip(); }

  /// sup ||G_R|| <= Lambda (1 + R).
  std::optional<double> gamma_bound() const {
    const double frozen = base_.lambda_lip() * (1.0 + radius_);
    if (auto g = base_.gamma_bound()) return std::min(*g, frozen);
    return frozen;
  }

  void drift_on_cell(double t0, double t1, const HVec& x, HVec& out) const { base_.drift_on_cell(t0, t1, x, out); }

  void diffusion_into(const HVec& x, Operator& out) const {
    const double n = x.norm();
    if (n <= radius_) {
      base_.diffusion_into(x, out);
    } else {
      base_.diffusion_into(HVec((radius_ / n) * x), out);
    }
  }

  Operator diffusion(const HVec& x) const {
    Operator g;
    diffusion_into(x, g);
    return g;
  }

  void diffusion_jacobian(const HVec& x, const UVec& psi, Eigen::MatrixXd& out) const {
    const double n = x.norm();
    if (n <= radius_) {
      base_.diffusion_jacobian(x, psi, out);
      return;
    }
    const HVec frozen = (radius_ / n) * x;
    Eigen::MatrixXd inner;
    base_.diffusion_jacobian(frozen, psi, inner);
    const HVec unit = x / n;
    const Eigen::MatrixXd radial = (radius_ / n) *
        (Eigen::MatrixXd::Identity(x.size(), x.size()) - unit * unit.transpose());
    out.noalias() = inner * radial;
  }

private:
  Base base_;
  double radius_;
};

template <CoefficientModel Base>
TruncatedDiffusion<Base> truncate_diffusion(Base base, double radius) {
  return TruncatedDiffusion<Base>(std::move(base), radius);
}

/// Radius R = (rho + Lambda sqrt(2r)) exp(Lambda sqrt(2r)) + delta that
/// keeps every skeleton of energy <= r started in B(0, rho), together with
/// its delta-neighbourhood, inside B(0, R).
inline double truncation_radius(double rho, double r, double delta, double lambda_lip) {
  if (!(rho > 0.0) || !(r > 0.0) || !(delta > 0.0)) {
    throw std::invalid_argument("truncation_radius: rho, r and delta must be positive");
  }
  if (lambda_lip < 0.0) throw std::invalid_argument("truncation_radius: Lambda must be nonnegative");
  const double reach = lambda_lip * std::sqrt(2.0 * r);
  return (rho + reach) * std::exp(reach) + delta;
}

/// Point evaluations, matching the solvers' interface.
template <CoefficientModel M>
Operator eval_diffusion(const M& model, const HVec& x) {
  Operator g;
  model.diffusion_into(x, g);
  return g;
}

inline HVec eval_drift(const ModelSpec& model, double t, const HVec& x) { return model.drift(t, x); }

/// Largest observed ratios over random pairs in B(0, radius):
/// ||G(x)-G(y)||_HS / |x-y| and, at time t, |F(t,x)-F(t,y)| / |x-y|
/// (the latter is to be compared with nu(t)).
struct LipschitzCertificate {
  double diffusion_ratio = 0.0;
  double drift_ratio = 0.0;
  double diffusion_growth_ratio = 0.0;  // ||G(x)|| / (1 + |x|)
};

template <CoefficientModel M>
LipschitzCertificate certify_lipschitz(const M& model, std::size_t pairs, double radius, std::uint64_t seed,
                                       double t = 0.5) {
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(model.dim_h());
  auto sample_ball = [&]() {
    HVec v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.gaussian();
    const double scale = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / v.norm();
    return HVec(scale * v);
  };
  LipschitzCertificate cert;
  Operator gx, gy;
  HVec fx, fy;
  const double half_cell = 1e-9;
  for (std::size_t i = 0; i < pairs; ++i) {
    const HVec x = sample_ball();
    const HVec y = sample_ball();
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    model.diffusion_into(x, gx);
    model.diffusion_into(y, gy);
    cert.diffusion_ratio = std::max(cert.diffusion_ratio, (gx - gy).norm() / dist);
    cert.diffusion_growth_ratio = std::max(cert.diffusion_growth_ratio, gx.norm() / (1.0 + x.norm()));
    model.drift_on_cell(t - half_cell, t + half_cell, x, fx);
    model.drift_on_cell(t - half_cell, t + half_cell, y, fy);
    cert.drift_ratio = std::max(cert.drift_ratio, (fx - fy).norm() / dist);
  }
  return cert;
}

}  // namespace ldplab

#endif  // LDPLAB_MODEL_HPP
