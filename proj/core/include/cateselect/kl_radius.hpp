#pragma once

#include "cateselect/dataset.hpp"
#include "cateselect/types.hpp"

namespace cateselect::kl {

// Zero neighbor distances are replaced by this before taking logs.
inline constexpr double kDistanceJitter = 1e-12;

struct RadiusPolicy {
  int k = 5;
  double offset = 5.2;
  bool clamp_nonnegative = true;
  bool standardize = true;

  void validate() const;
};

// k-nearest-neighbor estimate of D_KL(P || Q) from samples p (n x d) and
// q (m x d):
//
//   D = (d / n) sum_i log(nu_k(i) / rho_k(i)) + log(m / (n - 1)),
//
// rho_k(i): distance from p_i to its k-th neighbor among the other p rows;
// nu_k(i): distance from p_i to its k-th neighbor among the q rows.
// Brute-force search; the result does not depend on row order.
double knn_kl_divergence(const Matrix& p, const Matrix& q, int k);

struct Radii {
  double eps0 = 0.0;  // radius of the ball around the control distribution
  double eps1 = 0.0;  // radius of the ball around the treated distribution
  double kl_treated_control = 0.0;  // raw D(P_X^T || P_X^C), before clamping
  double kl_control_treated = 0.0;  // raw D(P_X^C || P_X^T)
};

// eps1 = D(controls || treated) + offset, eps0 = D(treated || controls) +
// offset, with covariates standardized on the pooled input when the policy
// says so and raw estimates clamped at zero when clamping is on.
Radii compute_radii(const ObservationalDataset& data, const RadiusPolicy& policy = {});

}  // namespace cateselect::kl
