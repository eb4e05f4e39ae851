#include "cateselect/meta_learners.hpp"

#include <algorithm>
#include <cmath>

#include "cateselect/parallel.hpp"
#include "cateselect/rng.hpp"

namespace cateselect {

namespace {

// Stream tags for model seeds inside one candidate.
enum SeedTag : std::uint64_t { kMu0 = 1, kMu1, kMu, kPi, kS, kStage2, kStage2Treated, kStage2Control };

RegressorPtr fit_stage2(const NuisanceSet& ns, const Matrix& x, const Vector& target,
                        const std::optional<Vector>& weights = std::nullopt,
                        std::uint64_t tag = kStage2) {
  return fit_regressor(ns.base(), x, target, weights, derive_seed(ns.seed(), {tag}));
}

CandidateId id_of(LearnerKind k, const NuisanceSet& ns) { return {k, ns.base().kind}; }

CandidateEstimator::FactualFn arm_factual(RegressorPtr mu0, RegressorPtr mu1) {
  return [mu0, mu1](const Matrix& x, const Vector& t) {
    const Vector p0 = mu0->predict(x);
    const Vector p1 = mu1->predict(x);
    return Vector((t.array() > 0.5).select(p1, p0));
  };
}

}  // namespace

std::string to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::S: return "S";
    case LearnerKind::T: return "T";
    case LearnerKind::PS: return "PS";
    case LearnerKind::IPW: return "IPW";
    case LearnerKind::X: return "X";
    case LearnerKind::U: return "U";
    case LearnerKind::DR: return "DR";
    case LearnerKind::R: return "R";
    case LearnerKind::RA: return "RA";
  }
  return "?";
}

LearnerKind learner_kind_from_string(const std::string& s) {
  for (auto k : all_learner_kinds())
    if (to_string(k) == s) return k;
  throw ValidationError("unknown learner '" + s + "'");
}

const std::vector<LearnerKind>& all_learner_kinds() {
  static const std::vector<LearnerKind> kinds{LearnerKind::S,  LearnerKind::T, LearnerKind::PS,
                                              LearnerKind::IPW, LearnerKind::X, LearnerKind::U,
                                              LearnerKind::DR, LearnerKind::R, LearnerKind::RA};
  return kinds;
}

std::string CandidateId::str() const { return to_string(learner) + "-" + to_string(base); }

CandidateId CandidateId::parse(const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) throw ValidationError("malformed candidate id '" + s + "'");
  return {learner_kind_from_string(s.substr(0, dash)), base_kind_from_string(s.substr(dash + 1))};
}

// ---------------------------------------------------------------------------

Vector ipw_pseudo_outcome(const Vector& t, const Vector& y, const Vector& pi) {
  return (t.array() * y.array() / pi.array() - (1.0 - t.array()) * y.array() / (1.0 - pi.array()))
      .matrix();
}

Vector dr_pseudo_outcome(const Vector& t, const Vector& y, const Vector& mu0, const Vector& mu1,
                         const Vector& pi) {
  const auto y1 = mu1.array() + t.array() / pi.array() * (y - mu1).array();
  const auto y0 = mu0.array() + (1.0 - t.array()) / (1.0 - pi.array()) * (y - mu0).array();
  return (y1 - y0).matrix();
}

Vector ra_pseudo_outcome(const Vector& t, const Vector& y, const Vector& mu0, const Vector& mu1) {
  return (t.array() * (y - mu0).array() + (1.0 - t.array()) * (mu1 - y).array()).matrix();
}

Vector floor_magnitude(const Vector& v, double floor) {
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::max(std::abs(v[i]), floor);
    out[i] = v[i] < 0 ? -mag : mag;
  }
  return out;
}

WeightedTargets residual_targets(const Vector& y, const Vector& mu, const Vector& t, const Vector& pi) {
  const Vector xi = y - mu;
  const Vector nu = floor_magnitude(t - pi);
  return {(xi.array() / nu.array()).matrix(), nu.array().square().matrix()};
}

// ---------------------------------------------------------------------------

NuisanceSet::NuisanceSet(BaseModelSpec base, const ObservationalDataset& data, std::uint64_t seed)
    : base_(std::move(base)), data_(&data), seed_(seed) {}

RegressorPtr NuisanceSet::mu0() {
  if (!mu0_) {
    const auto idx = data_->control_indices();
    if (idx.size() < 2) throw ValidationError("control arm needs at least 2 units");
    mu0_ = fit_regressor(base_, select_rows(data_->covariates(), idx), select_rows(data_->outcome(), idx),
                         std::nullopt, derive_seed(seed_, {kMu0}));
  }
  return mu0_;
}

RegressorPtr NuisanceSet::mu1() {
  if (!mu1_) {
    const auto idx = data_->treated_indices();
    if (idx.size() < 2) throw ValidationError("treated arm needs at least 2 units");
    mu1_ = fit_regressor(base_, select_rows(data_->covariates(), idx), select_rows(data_->outcome(), idx),
                         std::nullopt, derive_seed(seed_, {kMu1}));
  }
  return mu1_;
}

RegressorPtr NuisanceSet::mu() {
  if (!mu_)
    mu_ = fit_regressor(base_, data_->covariates(), data_->outcome(), std::nullopt, derive_seed(seed_, {kMu}));
  return mu_;
}

ClassifierPtr NuisanceSet::pi() {
  if (!pi_) pi_ = fit_classifier(base_, data_->covariates(), data_->treatment(), derive_seed(seed_, {kPi}));
  return pi_;
}

RegressorPtr NuisanceSet::s_model() {
  if (!s_) {
    const Matrix design = s_learner_design(data_->covariates(), data_->treatment_vector(), base_.kind);
    s_ = fit_regressor(base_, design, data_->outcome(), std::nullopt, derive_seed(seed_, {kS}));
  }
  return s_;
}

Matrix s_learner_design(const Matrix& x, const Vector& t, BaseKind base) {
  const bool interact = base == BaseKind::ridge;
  const Eigen::Index d = x.cols();
  Matrix design(x.rows(), d + 1 + (interact ? d : 0));
  design.leftCols(d) = x;
  design.col(d) = t;
  if (interact) design.rightCols(d) = t.asDiagonal() * x;
  return design;
}

// ---------------------------------------------------------------------------

Vector CandidateEstimator::predict(const Matrix& x) const {
  Vector out = cate_(x);
  if (!out.allFinite()) throw RuntimeError("candidate " + id_.str() + " produced non-finite predictions");
  return out;
}

Vector CandidateEstimator::predict_factual(const Matrix& x, const Vector& t) const {
  if (!factual_) throw ValidationError("candidate " + id_.str() + " has no outcome model");
  return factual_(x, t);
}

CandidateEstimator fit_s(NuisanceSet& ns) {
  auto model = ns.s_model();
  const BaseKind kind = ns.base().kind;
  auto cate = [model, kind](const Matrix& x) {
    const Vector ones = Vector::Ones(x.rows());
    const Vector zeros = Vector::Zero(x.rows());
    return Vector(model->predict(s_learner_design(x, ones, kind)) -
                  model->predict(s_learner_design(x, zeros, kind)));
  };
  auto factual = [model, kind](const Matrix& x, const Vector& t) {
    return model->predict(s_learner_design(x, t, kind));
  };
  return {id_of(LearnerKind::S, ns), cate, factual};
}

CandidateEstimator fit_t(NuisanceSet& ns) {
  auto mu0 = ns.mu0();
  auto mu1 = ns.mu1();
  auto cate = [mu0, mu1](const Matrix& x) { return Vector(mu1->predict(x) - mu0->predict(x)); };
  return {id_of(LearnerKind::T, ns), cate, arm_factual(mu0, mu1)};
}

CandidateEstimator fit_ps(NuisanceSet& ns) {
  const auto s_est = fit_s(ns);
  const Matrix& x = ns.data().covariates();
  auto stage2 = fit_stage2(ns, x, s_est.predict(x));
  return {id_of(LearnerKind::PS, ns), [stage2](const Matrix& q) { return stage2->predict(q); }};
}

CandidateEstimator fit_ipw(NuisanceSet& ns) {
  const auto& data = ns.data();
  const Vector pi = ns.pi()->predict_proba(data.covariates());
  const Vector target = ipw_pseudo_outcome(data.treatment_vector(), data.outcome(), pi);
  auto stage2 = fit_stage2(ns, data.covariates(), target);
  return {id_of(LearnerKind::IPW, ns), [stage2](const Matrix& q) { return stage2->predict(q); }};
}

CandidateEstimator fit_x(NuisanceSet& ns) {
  const auto& data = ns.data();
  auto mu0 = ns.mu0();
  auto mu1 = ns.mu1();
  auto pi = ns.pi();
  const auto treated = data.treated_indices();
  const auto control = data.control_indices();
  const Matrix xt = select_rows(data.covariates(), treated);
  const Matrix xc = select_rows(data.covariates(), control);
  const Vector dt = select_rows(data.outcome(), treated) - mu0->predict(xt);
  const Vector dc = mu1->predict(xc) - select_rows(data.outcome(), control);
  auto tau1 = fit_stage2(ns, xt, dt, std::nullopt, kStage2Treated);
  auto tau0 = fit_stage2(ns, xc, dc, std::nullopt, kStage2Control);
  auto cate = [tau0, tau1, pi](const Matrix& q) {
    const Vector p = pi->predict_proba(q);
    return Vector((1.0 - p.array()) * tau1->predict(q).array() + p.array() * tau0->predict(q).array());
  };
  return {id_of(LearnerKind::X, ns), cate, arm_factual(mu0, mu1)};
}

CandidateEstimator fit_u(NuisanceSet& ns) {
  const auto& data = ns.data();
  const Matrix& x = data.covariates();
  const auto r = residual_targets(data.outcome(), ns.mu()->predict(x), data.treatment_vector(),
                                  ns.pi()->predict_proba(x));
  auto stage2 = fit_stage2(ns, x, r.target);
  return {id_of(LearnerKind::U, ns), [stage2](const Matrix& q) { return stage2->predict(q); }};
}

CandidateEstimator fit_dr(NuisanceSet& ns) {
  const auto& data = ns.data();
  const Matrix& x = data.covariates();
  auto mu0 = ns.mu0();
  auto mu1 = ns.mu1();
  const Vector target = dr_pseudo_outcome(data.treatment_vector(), data.outcome(), mu0->predict(x),
                                          mu1->predict(x), ns.pi()->predict_proba(x));
  auto stage2 = fit_stage2(ns, x, target);
  return {id_of(LearnerKind::DR, ns), [stage2](const Matrix& q) { return stage2->predict(q); },
          arm_factual(mu0, mu1)};
}

CandidateEstimator fit_r(NuisanceSet& ns) {
  const auto& data = ns.data();
  const Matrix& x = data.covariates();
  const auto r = residual_targets(data.outcome(), ns.mu()->predict(x), data.treatment_vector(),
                                  ns.pi()->predict_proba(x));
  auto stage2 = fit_stage2(ns, x, r.target, r.weight);
  return {id_of(LearnerKind::R, ns), [stage2](const Matrix& q) { return stage2->predict(q); }};
}

CandidateEstimator fit_ra(NuisanceSet& ns) {
  const auto& data = ns.data();
  const Matrix& x = data.covariates();
  auto mu0 = ns.mu0();
  auto mu1 = ns.mu1();
  const Vector target =
      ra_pseudo_outcome(data.treatment_vector(), data.outcome(), mu0->predict(x), mu1->predict(x));
  auto stage2 = fit_stage2(ns, x, target);
  return {id_of(LearnerKind::RA, ns), [stage2](const Matrix& q) { return stage2->predict(q); },
          arm_factual(mu0, mu1)};
}

CandidateEstimator fit_learner(LearnerKind kind, NuisanceSet& ns) {
  switch (kind) {
    case LearnerKind::S: return fit_s(ns);
    case LearnerKind::T: return fit_t(ns);
    case LearnerKind::PS: return fit_ps(ns);
    case LearnerKind::IPW: return fit_ipw(ns);
    case LearnerKind::X: return fit_x(ns);
    case LearnerKind::U: return fit_u(ns);
    case LearnerKind::DR: return fit_dr(ns);
    case LearnerKind::R: return fit_r(ns);
    case LearnerKind::RA: return fit_ra(ns);
  }
  throw ValidationError("unsupported learner");
}

CandidateEstimator fit_learner(LearnerKind kind, const BaseModelSpec& base,
                               const ObservationalDataset& train, std::uint64_t seed) {
  NuisanceSet ns(base, train, seed);
  return fit_learner(kind, ns);
}

std::uint64_t candidate_seed(std::uint64_t pool_seed, const CandidateId& id) {
  return derive_seed(pool_seed, {static_cast<std::uint64_t>(id.learner) + 1,
                                 static_cast<std::uint64_t>(id.base) + 101});
}

std::vector<CandidateEstimator> build_pool(const std::vector<LearnerKind>& learners,
                                           const std::vector<BaseModelSpec>& bases,
                                           const ObservationalDataset& train, std::uint64_t pool_seed,
                                           std::size_t jobs) {
  for (std::size_t a = 0; a < learners.size(); ++a)
    for (std::size_t b = a + 1; b < learners.size(); ++b)
      if (learners[a] == learners[b])
        throw ValidationError("duplicate learner '" + to_string(learners[a]) + "' in pool");
  for (std::size_t a = 0; a < bases.size(); ++a)
    for (std::size_t b = a + 1; b < bases.size(); ++b)
      if (bases[a].kind == bases[b].kind)
        throw ValidationError("duplicate base model '" + bases[a].name() + "' in pool");
  for (const auto& b : bases)
    if (b.kind == BaseKind::logistic) throw ValidationError("logistic cannot serve as a regression base");

  const std::size_t count = learners.size() * bases.size();
  std::vector<std::optional<CandidateEstimator>> slots(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    const auto learner = learners[i / bases.size()];
    const auto& base = bases[i % bases.size()];
    slots[i] = fit_learner(learner, base, train, candidate_seed(pool_seed, {learner, base.kind}));
  });
  std::vector<CandidateEstimator> pool;
  pool.reserve(count);
  for (auto& s : slots) pool.push_back(std::move(*s));
  return pool;
}

}  // namespace cateselect
