#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cateselect/dataset.hpp"
#include "cateselect/rng.hpp"
#include "cateselect/types.hpp"

namespace cateselect::dgp {

// Semi-synthetic benchmark generator: logistic treatment assignment with
// selection bias xi, outcomes from a sparse polynomial with up to third-order
// interactions, CATE linear in covariates with density rho, and optional
// removal of a fraction m of covariates after generation (hidden confounding).
struct DgpConfig {
  double rho = 0.1;           // P(gamma_j = 1)
  double xi = 1.0;            // selection-bias strength
  double missing_ratio = 0.0; // m: fraction of covariates hidden after generation
  double coeff_p = 0.2;       // activation probability of beta terms
  double noise_sd = 0.1;
  double treat_offset = 3.0;
  int interaction_order = 3;  // highest active tier: 1 linear, 2 pairs, 3 triples
  std::size_t n = 2000;
  std::size_t d = 20;
  std::uint64_t seed = 0;
  // Covariates come from this CSV (all columns used) when set; otherwise
  // synth_covariates(n, d, seed).
  std::optional<std::filesystem::path> covariate_csv;

  void validate() const;
};

// Above this many active triples the tier is subsampled down to the cap.
inline constexpr std::size_t kMaxActiveTriples = 20000;

struct DgpCoefficients {
  std::vector<int> beta_t;                             // length d, binary
  std::vector<std::size_t> active_linear;              // j
  std::vector<std::array<std::size_t, 2>> active_pair; // (j, k), j <= k
  std::vector<std::array<std::size_t, 3>> active_triple;
  std::vector<int> gamma;                              // length d, binary
  bool triples_subsampled = false;
};

DgpCoefficients draw_coefficients(const DgpConfig& cfg, Rng& rng);

// sigmoid(xi * (beta_t'x + offset)) per row.
Vector treatment_probabilities(const Matrix& x, const std::vector<int>& beta_t, double xi,
                               double offset = 3.0);
std::vector<int> generate_treatment(const Matrix& x, const std::vector<int>& beta_t, double xi,
                                    double offset, Rng& rng);

// Sparse polynomial baseline, without noise.
Vector baseline_outcome(const Matrix& x, const DgpCoefficients& coeffs);
Vector true_cate(const Matrix& x, const std::vector<int>& gamma);

struct Outcomes {
  Vector y0, y1, y, tau;
};

// A single noise draw per unit is shared by both potential outcomes, so
// tau == y1 - y0 exactly.
Outcomes generate_outcomes(const Matrix& x, const DgpCoefficients& coeffs,
                           const std::vector<int>& treatment, double noise_sd, Rng& rng);

// Drops floor(m * d) uniformly chosen covariate columns; treatment, outcomes
// and oracle fields are untouched. Returns the kept column indices via `kept`.
ObservationalDataset apply_hidden_confounding(const ObservationalDataset& ds, double m,
                                              std::uint64_t seed,
                                              std::vector<std::size_t>* kept = nullptr);

// 70% of columns (rounded up) i.i.d. N(0,1), the rest Bernoulli(0.5).
Matrix synth_covariates(std::size_t n, std::size_t d, std::uint64_t seed);
std::size_t continuous_columns(std::size_t d);

struct Generated {
  ObservationalDataset dataset;
  DgpCoefficients coefficients;
  std::vector<std::size_t> kept_columns;
  Matrix full_covariates;  // before hidden-confounding removal
};

// End-to-end draw for one replication; stream seeds are derived from cfg.seed.
Generated generate(const DgpConfig& cfg);

}  // namespace cateselect::dgp
