#include "grid_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

std::vector<double> dual_grid_min(const std::vector<double>& s, const std::vector<double>& eps, long points,
                                  double lo, double hi) {
  const double m = *std::max_element(s.begin(), s.end());
  std::vector<double> shifted(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) shifted[i] = s[i] - m;
  const double n = static_cast<double>(s.size());
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  std::vector<double> best(eps.size(), std::numeric_limits<double>::infinity());
  for (long i = 0; i < points; ++i) {
    const double lambda =
        std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    const double inv = 1.0 / lambda;
    double sum = 0.0;
    for (std::size_t j = 0; j < shifted.size(); ++j) sum += std::exp(shifted[j] * inv);
    const double lme = m + lambda * std::log(sum / n);
    for (std::size_t e = 0; e < eps.size(); ++e) best[e] = std::min(best[e], lambda * eps[e] + lme);
  }
  return best;
}

}  // namespace oracle
