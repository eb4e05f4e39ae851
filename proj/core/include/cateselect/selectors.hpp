#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cateselect/base_models.hpp"
#include "cateselect/dataset.hpp"
#include "cateselect/dro.hpp"
#include "cateselect/kl_radius.hpp"
#include "cateselect/meta_learners.hpp"

namespace cateselect::select {

enum class SelectorFamily { drm, plug_in, pseudo_dr, pseudo_r, pseudo_if, matching, factual, random };

struct SelectorKind {
  SelectorFamily family = SelectorFamily::drm;
  LearnerKind plug_learner = LearnerKind::T;  // plug_in only

  // "drm", "plug-T", "pseudo-DR", "pseudo-R", "pseudo-IF", "matching",
  // "factual", "random".
  std::string name() const;
  static SelectorKind parse(const std::string& name);
  // DRM, the nine plug-in selectors, three pseudo-outcome selectors,
  // matching, factual and random.
  static std::vector<SelectorKind> all();
  friend bool operator==(const SelectorKind&, const SelectorKind&) = default;
};

// One candidate's validation-split predictions.
struct CandidatePredictions {
  CandidateId id;
  Vector cate;                    // tau_hat(X_i), aligned with validation rows
  std::optional<Vector> factual;  // outcome head under observed treatment
};

struct SelectorScore {
  SelectorKind kind;
  std::vector<double> scores;  // pool order; lower is better
  std::size_t chosen = 0;      // first index attaining the minimum
  std::vector<std::string> flags;
};

// Index of the smallest score; ties go to the earliest candidate.
std::size_t argmin_first(const std::vector<double>& scores);

double rmse(const Vector& a, const Vector& b);

// ---------------------------------------------------------------------------
// Distributionally robust metric

struct DrmDetail {
  dro::RobustValue v0;  // control arm, s = +tau_hat * Y, radius eps0
  dro::RobustValue v1;  // treated arm, s = -tau_hat * Y, radius eps1
};

//   R = (1/n) sum tau_hat^2
//     + (2/n) [ sum_control tau_hat Y - sum_treated tau_hat Y + n_c V1 + n_t V0 ].
double score_drm(const Vector& cate, const ObservationalDataset& valid, double eps0, double eps1,
                 const dro::SolverConfig& solver = {}, DrmDetail* detail = nullptr);

// ---------------------------------------------------------------------------
// Nuisance-based baselines

// Validation-fitted nuisance predictions at the validation rows.
struct ValidationNuisances {
  Vector mu0, mu1, mu, pi;
};

double score_plug_in(const Vector& cate, const Vector& plug_cate);
double score_pseudo_dr(const Vector& cate, const ObservationalDataset& valid, const ValidationNuisances& nu);
double score_pseudo_r(const Vector& cate, const ObservationalDataset& valid, const ValidationNuisances& nu);

struct PseudoIfScore {
  double score = 0.0;       // sign(S) * sqrt(|S|) of the mean summand S
  bool negative_radicand = false;
};
// Per-unit summands (1 - B) tt^2 + B Y (tt - th) - A (tt - th)^2 + th^2 with
// A = T - pi, B = 2T(T - pi) / (pi(1 - pi)), tt = mu1 - mu0, th = tau_hat.
Vector pseudo_if_terms(const Vector& cate, const ObservationalDataset& valid, const ValidationNuisances& nu);
PseudoIfScore score_pseudo_if(const Vector& cate, const ObservationalDataset& valid,
                              const ValidationNuisances& nu);

// Effects imputed by 1-NN matching (standardized Euclidean) in the opposite
// arm: (2T - 1)(Y - Y_match).
Vector matched_effects(const ObservationalDataset& valid);
double score_matching(const Vector& cate, const ObservationalDataset& valid);

// Factual MSE of the outcome head; +inf for candidates without one.
double score_factual(const std::optional<Vector>& factual, const Vector& outcome);

SelectorScore score_random(std::size_t pool_size, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct SelectorConfig {
  kl::RadiusPolicy radius;
  dro::SolverConfig solver;
  BaseModelSpec nuisance = BaseModelSpec::of(BaseKind::boosted_trees);
  std::uint64_t seed = 0;
  std::optional<kl::Radii> radii_override;
  std::size_t jobs = 1;  // DRM candidates scored in parallel
};

struct SelectionRun {
  std::vector<SelectorScore> scores;  // one per requested kind, same order
  std::optional<kl::Radii> radii;     // when DRM ran
  std::vector<DrmDetail> drm;         // per candidate, when DRM ran
};

// Scores the pool with every requested selector on the validation split.
// Nuisances (and plug-in learners) are fitted once on the validation data
// with the nuisance base model and shared across selectors.
SelectionRun run_selectors(const std::vector<CandidatePredictions>& pool, const ObservationalDataset& valid,
                           const std::vector<SelectorKind>& kinds, const SelectorConfig& cfg);

}  // namespace cateselect::select
