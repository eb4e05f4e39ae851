#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cateselect/base_models.hpp"
#include "cateselect/dataset.hpp"

namespace cateselect {

enum class LearnerKind { S, T, PS, IPW, X, U, DR, R, RA };

std::string to_string(LearnerKind k);
LearnerKind learner_kind_from_string(const std::string& s);
const std::vector<LearnerKind>& all_learner_kinds();

// Floor on |T - pi_hat| when U- and R-learner targets divide by it.
inline constexpr double kResidualFloor = 0.01;

struct CandidateId {
  LearnerKind learner = LearnerKind::S;
  BaseKind base = BaseKind::ridge;

  // "DR-ridge"; also used as the prediction file stem.
  std::string str() const;
  static CandidateId parse(const std::string& s);
  friend bool operator==(const CandidateId&, const CandidateId&) = default;
};

// ---------------------------------------------------------------------------
// Pseudo-outcome constructions, shared by learners and pseudo-outcome
// selectors. `t` is the 0/1 treatment vector.

Vector ipw_pseudo_outcome(const Vector& t, const Vector& y, const Vector& pi);
Vector dr_pseudo_outcome(const Vector& t, const Vector& y, const Vector& mu0, const Vector& mu1,
                         const Vector& pi);
Vector ra_pseudo_outcome(const Vector& t, const Vector& y, const Vector& mu0, const Vector& mu1);

// sign(v) * max(|v|, floor), with sign(0) taken as +.
Vector floor_magnitude(const Vector& v, double floor = kResidualFloor);

struct WeightedTargets {
  Vector target;  // xi / nu_floored
  Vector weight;  // nu_floored^2
};
// Residual-on-residual construction: xi = y - mu, nu = t - pi.
WeightedTargets residual_targets(const Vector& y, const Vector& mu, const Vector& t, const Vector& pi);

// ---------------------------------------------------------------------------

// First-stage models fitted on one dataset with one base model, created on
// first use. Not thread safe; give each concurrent fit its own set.
class NuisanceSet {
 public:
  NuisanceSet(BaseModelSpec base, const ObservationalDataset& data, std::uint64_t seed);

  const BaseModelSpec& base() const noexcept { return base_; }
  const ObservationalDataset& data() const noexcept { return *data_; }
  std::uint64_t seed() const noexcept { return seed_; }

  RegressorPtr mu0();  // E[Y | X, T = 0], fitted on controls
  RegressorPtr mu1();  // E[Y | X, T = 1], fitted on treated
  RegressorPtr mu();   // E[Y | X], fitted on all units
  ClassifierPtr pi();  // P(T = 1 | X)
  RegressorPtr s_model();  // single outcome model on (X, T)

 private:
  BaseModelSpec base_;
  const ObservationalDataset* data_;
  std::uint64_t seed_;
  RegressorPtr mu0_, mu1_, mu_, s_;
  ClassifierPtr pi_;
};

// Design matrix for the single-model S-learner: [X, T], plus T * X columns
// for the ridge base so a linear model can express effect heterogeneity.
Matrix s_learner_design(const Matrix& x, const Vector& t, BaseKind base);

// A fitted CATE predictor. Copies share the immutable fitted models.
class CandidateEstimator {
 public:
  using CateFn = std::function<Vector(const Matrix&)>;
  using FactualFn = std::function<Vector(const Matrix&, const Vector&)>;

  CandidateEstimator(CandidateId id, CateFn cate, FactualFn factual = {})
      : id_(id), cate_(std::move(cate)), factual_(std::move(factual)) {}

  const CandidateId& id() const noexcept { return id_; }
  Vector predict(const Matrix& x) const;
  // Learners with outcome models (S, T, X, DR, RA) can predict the outcome
  // under the observed treatment.
  bool has_outcome_head() const noexcept { return static_cast<bool>(factual_); }
  Vector predict_factual(const Matrix& x, const Vector& t) const;

 private:
  CandidateId id_;
  CateFn cate_;
  FactualFn factual_;
};

// One fit per learner. Each uses `nuisances` (created from base/train/seed
// when null) so plug-in selectors can share first-stage models across
// learners fitted on the same data.
CandidateEstimator fit_s(NuisanceSet& nuisances);
CandidateEstimator fit_t(NuisanceSet& nuisances);
CandidateEstimator fit_ps(NuisanceSet& nuisances);
CandidateEstimator fit_ipw(NuisanceSet& nuisances);
CandidateEstimator fit_x(NuisanceSet& nuisances);
CandidateEstimator fit_u(NuisanceSet& nuisances);
CandidateEstimator fit_dr(NuisanceSet& nuisances);
CandidateEstimator fit_r(NuisanceSet& nuisances);
CandidateEstimator fit_ra(NuisanceSet& nuisances);

CandidateEstimator fit_learner(LearnerKind kind, NuisanceSet& nuisances);
CandidateEstimator fit_learner(LearnerKind kind, const BaseModelSpec& base,
                               const ObservationalDataset& train, std::uint64_t seed);

// Per-candidate seed, independent of which other candidates are in the pool.
std::uint64_t candidate_seed(std::uint64_t pool_seed, const CandidateId& id);

// Cross product in learner-major order. Each candidate gets fresh nuisances.
// Duplicate learner or base entries are rejected.
std::vector<CandidateEstimator> build_pool(const std::vector<LearnerKind>& learners,
                                           const std::vector<BaseModelSpec>& bases,
                                           const ObservationalDataset& train, std::uint64_t pool_seed,
                                           std::size_t jobs = 1);

}  // namespace cateselect
