#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cateselect/types.hpp"

namespace cateselect::dro {

// Worst-case expectation of s over a KL ball of radius epsilon around the
// empirical distribution of s:
//
//   V = inf_{lambda > 0} F(lambda),
//   F(lambda) = lambda * epsilon + lambda * log( (1/n) sum_i exp(s_i / lambda) ).
//
// For the control arm s = +tau_hat(X) * Y; for the treated arm
// s = -tau_hat(X) * Y.
enum class Group { control, treat };

struct DualObjective {
  Group group = Group::control;
  Vector s;              // signed scores, already negated for the treated arm
  double epsilon = 0.0;  // ambiguity radius

  // Builds the objective from z = tau_hat(X) * Y over one arm.
  static DualObjective from_products(Group group, const Vector& z, double epsilon);
  void validate() const;
};

// Evaluates F(lambda) in max-shifted form, accurate for small and large lambda.
double eval_dual(const DualObjective& obj, double lambda);
// dF/dlambda = epsilon + log mean exp(s/lambda) - sum s e^{s/lambda} / (lambda sum e^{s/lambda}).
double eval_dual_derivative(const DualObjective& obj, double lambda);

enum class SolverMode {
  algorithm1,   // lambda <- max(lambda - F / F', lambda_min), minimum over iterates
  safeguarded,  // log grid bracket, then golden-section refinement
  constant,     // reported when s is constant and the value is known in closed form
};
std::string to_string(SolverMode m);
SolverMode solver_mode_from_string(const std::string& s);

struct SolverConfig {
  int iterations = 50;  // K for algorithm1
  double lambda_init = 1.0;
  double lambda_min = 1e-6;
  double lambda_max = 1e6;
  SolverMode mode = SolverMode::safeguarded;
  double tol = 1e-9;
  int grid_points = 64;

  void validate() const;
};

struct RobustValue {
  double value = 0.0;
  double lambda_star = 0.0;
  int iterations_used = 0;
  std::vector<std::pair<double, double>> trace;  // (lambda, F(lambda)) evaluations
  SolverMode mode_used = SolverMode::safeguarded;
};

// Minimizes F over [lambda_min, lambda_max]. Constant s short-circuits to the
// exact infimum (the constant itself) with an empty trace.
RobustValue solve_robust_value(const DualObjective& obj, const SolverConfig& cfg = {});

// Constant of the finite-sample gap bound for Z in [z_lo, z_hi] and lambda in
// [lambda_lo, lambda_hi]; the branch is chosen by the sign pattern of Z.
double exp_constant(double z_lo, double z_hi, double lambda_lo, double lambda_hi);

// Sum of the two n^{-1/2} terms of the finite-sample gap bound between the
// empirical and population robust values (constants as stated, O(.)
// dropped). Requires n >= 2 / u^2 * log(2 / delta).
double finite_sample_bound(double n, double u, double delta, double lambda_lo, double lambda_hi,
                           double z_lo, double z_hi);

}  // namespace cateselect::dro
