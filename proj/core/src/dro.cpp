#include "cateselect/dro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cateselect::dro {

namespace {

struct Shifted {
  double max = 0.0;
  double log_mean = 0.0;     // log mean exp((s - max) / lambda)
  double tilted_shift = 0.0; // sum a e^a / sum e^a with a = (s - max) / lambda
};

Shifted shifted_moments(const Vector& s, double lambda) {
  Shifted out;
  out.max = s.maxCoeff();
  double sum_expm1 = 0.0, sum_exp = 0.0, sum_aexp = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double a = (s[i] - out.max) / lambda;
    const double em1 = std::expm1(a);
    sum_expm1 += em1;
    sum_exp += em1 + 1.0;
    sum_aexp += a * (em1 + 1.0);
  }
  const double n = static_cast<double>(s.size());
  out.log_mean = std::log1p(sum_expm1 / n);
  out.tilted_shift = sum_aexp / sum_exp;
  return out;
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive and finite");
}

}  // namespace

DualObjective DualObjective::from_products(Group group, const Vector& z, double epsilon) {
  DualObjective obj;
  obj.group = group;
  obj.s = group == Group::control ? z : Vector(-z);
  obj.epsilon = epsilon;
  return obj;
}

void DualObjective::validate() const {
  if (s.size() == 0) throw ValidationError("no units in arm");
  if (!s.allFinite()) throw ValidationError("dual objective has non-finite scores");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("radius must be >= 0");
}

double eval_dual(const DualObjective& obj, double lambda) {
  check_lambda(lambda);
  obj.validate();
  const auto m = shifted_moments(obj.s, lambda);
  const double f = lambda * obj.epsilon + m.max + lambda * m.log_mean;
  if (!std::isfinite(f)) throw RuntimeError("non-finite dual value");
  return f;
}

double eval_dual_derivative(const DualObjective& obj, double lambda) {
  check_lambda(lambda);
  obj.validate();
  // log mean exp(s/l) - (weighted mean of s)/l = log_mean - tilted_shift, after
  // the max/l terms cancel.
  const auto m = shifted_moments(obj.s, lambda);
  const double g = obj.epsilon + m.log_mean - m.tilted_shift;
  if (!std::isfinite(g)) throw RuntimeError("non-finite dual derivative");
  return g;
}

std::string to_string(SolverMode m) {
  switch (m) {
    case SolverMode::algorithm1: return "algorithm1";
    case SolverMode::safeguarded: return "safeguarded";
    case SolverMode::constant: return "constant";
  }
  return "?";
}

SolverMode solver_mode_from_string(const std::string& s) {
  if (s == "algorithm1") return SolverMode::algorithm1;
  if (s == "safeguarded") return SolverMode::safeguarded;
  throw ValidationError("unknown solver mode '" + s + "'");
}

void SolverConfig::validate() const {
  if (!(lambda_min > 0.0 && lambda_min < lambda_max) || !std::isfinite(lambda_max))
    throw ValidationError("solver needs 0 < lambda_min < lambda_max");
  if (iterations < 1) throw ValidationError("solver iterations K must be >= 1");
  if (!(lambda_init > 0.0)) throw ValidationError("lambda_init must be > 0");
  if (!(tol > 0.0)) throw ValidationError("solver tol must be > 0");
  if (grid_points < 3) throw ValidationError("solver grid needs at least 3 points");
  if (mode == SolverMode::constant) throw ValidationError("'constant' is not a selectable solver mode");
}

namespace {

RobustValue solve_algorithm1(const DualObjective& obj, const SolverConfig& cfg) {
  RobustValue rv;
  rv.mode_used = SolverMode::algorithm1;
  double lambda = std::clamp(cfg.lambda_init, cfg.lambda_min, cfg.lambda_max);
  for (int k = 0; k < cfg.iterations; ++k) {
    const double f = eval_dual(obj, lambda);
    const double g = eval_dual_derivative(obj, lambda);
    if (g == 0.0 || !std::isfinite(f / g)) break;
    const double next = std::clamp(lambda - f / g, cfg.lambda_min, cfg.lambda_max);
    rv.trace.emplace_back(next, eval_dual(obj, next));
    ++rv.iterations_used;
    if (next == lambda) break;
    lambda = next;
  }
  if (rv.trace.empty()) rv.trace.emplace_back(lambda, eval_dual(obj, lambda));
  auto best = std::min_element(rv.trace.begin(), rv.trace.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
  rv.value = best->second;
  rv.lambda_star = best->first;
  return rv;
}

RobustValue solve_safeguarded(const DualObjective& obj, const SolverConfig& cfg) {
  RobustValue rv;
  rv.mode_used = SolverMode::safeguarded;
  auto eval = [&](double u) {
    const double lambda = std::exp(u);
    const double f = eval_dual(obj, lambda);
    rv.trace.emplace_back(lambda, f);
    return f;
  };

  // F is convex in lambda, hence unimodal in log(lambda).
  const double lo = std::log(cfg.lambda_min), hi = std::log(cfg.lambda_max);
  const int m = cfg.grid_points;
  std::vector<double> grid(static_cast<std::size_t>(m)), values(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    grid[static_cast<std::size_t>(i)] = i == m - 1 ? hi : lo + (hi - lo) * i / (m - 1);
    values[static_cast<std::size_t>(i)] = eval(grid[static_cast<std::size_t>(i)]);
  }
  const auto best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  double a = grid[static_cast<std::size_t>(std::max(best - 1, 0))];
  double b = grid[static_cast<std::size_t>(std::min(best + 1, m - 1))];

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > cfg.tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
    ++rv.iterations_used;
  }

  auto it = std::min_element(rv.trace.begin(), rv.trace.end(),
                             [](const auto& x, const auto& y) { return x.second < y.second; });
  rv.value = it->second;
  rv.lambda_star = it->first;
  return rv;
}

}  // namespace

RobustValue solve_robust_value(const DualObjective& obj, const SolverConfig& cfg) {
  cfg.validate();
  obj.validate();
  if (obj.s.maxCoeff() == obj.s.minCoeff()) {
    // Every distribution in the ball puts its mass on the same value.
    RobustValue rv;
    rv.value = obj.s[0];
    rv.lambda_star = cfg.lambda_min;
    rv.mode_used = SolverMode::constant;
    return rv;
  }
  return cfg.mode == SolverMode::algorithm1 ? solve_algorithm1(obj, cfg) : solve_safeguarded(obj, cfg);
}

double exp_constant(double z_lo, double z_hi, double lambda_lo, double lambda_hi) {
  if (z_lo > z_hi) throw ValidationError("z bounds must satisfy lower <= upper");
  if (z_hi <= 0.0) return std::exp(z_hi / lambda_hi - z_lo / lambda_lo);
  if (z_lo <= 0.0) return std::exp(z_hi / lambda_lo - z_lo / lambda_lo);
  return std::exp(z_hi / lambda_lo - z_lo / lambda_hi);
}

double finite_sample_bound(double n, double u, double delta, double lambda_lo, double lambda_hi,
                           double z_lo, double z_hi) {
  if (!(u > 0.0 && u < 1.0)) throw ValidationError("arm probability u must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (!(lambda_lo > 0.0 && lambda_lo <= lambda_hi)) throw ValidationError("need 0 < lambda_lo <= lambda_hi");
  const double log_term = std::log(2.0 / delta);
  const double n_min = 2.0 / (u * u) * log_term;
  if (n < n_min)
    throw ValidationError("finite-sample bound needs n >= 2/u^2 log(2/delta) = " + std::to_string(n_min));
  const double c = exp_constant(z_lo, z_hi, lambda_lo, lambda_hi);
  const double base = lambda_hi * lambda_hi * log_term / (n * u * u);
  return std::sqrt(8.0 * base * c * c) + std::sqrt(2.0 * base);
}

}  // namespace cateselect::dro
