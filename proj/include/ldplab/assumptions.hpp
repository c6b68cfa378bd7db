#ifndef LDPLAB_ASSUMPTIONS_HPP
#define LDPLAB_ASSUMPTIONS_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "ldplab/model.hpp"
#include "ldplab/rng.hpp"
#include "ldplab/spectral.hpp"

namespace ldplab {

/**
 * Empirical sup over h in B_H(0, r) of ||G(h)(I - Pi_n)||_HS.
 *
 * The sample set is deterministic given the seed: the 2d points +-r e_i,
 * `sphere_points` random points on the sphere of radius r and
 * `interior_points` random points in the open ball. The same seed gives the
 * same sample set for every n, so the result is nonincreasing in n.
 */
template <CoefficientModel M>
double check_a1_tail(const M& model, double r, std::size_t n, std::uint64_t seed = 7,
                     std::size_t sphere_points = 512, std::size_t interior_points = 512) {
  if (!(r > 0.0)) throw std::domain_error("check_a1_tail: r must be positive");
  if (n > model.dim_u()) throw std::out_of_range("check_a1_tail: n exceeds dim_u");
  const auto d = static_cast<Eigen::Index>(model.dim_h());
  const auto m = static_cast<Eigen::Index>(model.dim_u());
  const auto tail_cols = m - static_cast<Eigen::Index>(n);
  if (tail_cols == 0) return 0.0;

  Operator g;
  double worst = 0.0;
  auto visit = [&](const HVec& h) {
    model.diffusion_into(h, g);
    worst = std::max(worst, hs_norm(g.rightCols(tail_cols)));
  };

  for (Eigen::Index i = 0; i < d; ++i) {
    for (double sign : {1.0, -1.0}) {
      HVec h = HVec::Zero(d);
      h[i] = sign * r;
      visit(h);
    }
  }
  Rng rng(seed);
  auto direction = [&]() {
    HVec v(d);
    do {
      for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.gaussian();
    } while (v.norm() == 0.0);
    return HVec(v / v.norm());
  };
  for (std::size_t i = 0; i < sphere_points; ++i) visit(r * direction());
  for (std::size_t i = 0; i < interior_points; ++i) {
    const double radius = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    visit(radius * direction());
  }
  return worst;
}

}  // namespace ldplab

#endif  // LDPLAB_ASSUMPTIONS_HPP
