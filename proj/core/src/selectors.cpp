#include "cateselect/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cateselect/parallel.hpp"
#include "cateselect/rng.hpp"

namespace cateselect::select {

std::string SelectorKind::name() const {
  switch (family) {
    case SelectorFamily::drm: return "drm";
    case SelectorFamily::plug_in: return "plug-" + to_string(plug_learner);
    case SelectorFamily::pseudo_dr: return "pseudo-DR";
    case SelectorFamily::pseudo_r: return "pseudo-R";
    case SelectorFamily::pseudo_if: return "pseudo-IF";
    case SelectorFamily::matching: return "matching";
    case SelectorFamily::factual: return "factual";
    case SelectorFamily::random: return "random";
  }
  return "?";
}

SelectorKind SelectorKind::parse(const std::string& name) {
  if (name.rfind("plug-", 0) == 0) return {SelectorFamily::plug_in, learner_kind_from_string(name.substr(5))};
  for (const auto& k : all())
    if (k.name() == name) return k;
  throw ValidationError("unknown selector '" + name + "'");
}

std::vector<SelectorKind> SelectorKind::all() {
  std::vector<SelectorKind> out{{SelectorFamily::drm}};
  for (auto l : all_learner_kinds()) out.push_back({SelectorFamily::plug_in, l});
  for (auto f : {SelectorFamily::pseudo_dr, SelectorFamily::pseudo_r, SelectorFamily::pseudo_if,
                 SelectorFamily::matching, SelectorFamily::factual, SelectorFamily::random})
    out.push_back({f});
  return out;
}

std::size_t argmin_first(const std::vector<double>& scores) {
  if (scores.empty()) throw ValidationError("cannot select from an empty pool");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] < scores[best]) best = i;
  return best;
}

double rmse(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ValidationError("rmse inputs differ in length");
  if (a.size() == 0) throw ValidationError("rmse of empty vectors");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

namespace {

void check_aligned(const Vector& cate, const ObservationalDataset& valid) {
  if (static_cast<std::size_t>(cate.size()) != valid.n())
    throw ValidationError("predictions are not aligned with the validation rows");
  if (!cate.allFinite()) throw ValidationError("non-finite candidate predictions");
}

}  // namespace

double score_drm(const Vector& cate, const ObservationalDataset& valid, double eps0, double eps1,
                 const dro::SolverConfig& solver, DrmDetail* detail) {
  check_aligned(cate, valid);
  if (!(eps0 >= 0.0) || !(eps1 >= 0.0)) throw ValidationError("radii must be >= 0");
  const auto control = valid.control_indices();
  const auto treated = valid.treated_indices();
  if (control.empty() || treated.empty()) throw ValidationError("no units in arm");

  const Vector z = cate.cwiseProduct(valid.outcome());
  const Vector zc = select_rows(z, control);
  const Vector zt = select_rows(z, treated);
  const auto v0 = dro::solve_robust_value(dro::DualObjective::from_products(dro::Group::control, zc, eps0), solver);
  const auto v1 = dro::solve_robust_value(dro::DualObjective::from_products(dro::Group::treat, zt, eps1), solver);

  const double n = static_cast<double>(valid.n());
  const double n_c = static_cast<double>(control.size());
  const double n_t = static_cast<double>(treated.size());
  const double r = cate.squaredNorm() / n + 2.0 / n * (zc.sum() - zt.sum() + n_c * v1.value + n_t * v0.value);
  if (detail) *detail = {v0, v1};
  return r;
}

double score_plug_in(const Vector& cate, const Vector& plug_cate) { return rmse(cate, plug_cate); }

double score_pseudo_dr(const Vector& cate, const ObservationalDataset& valid, const ValidationNuisances& nu) {
  check_aligned(cate, valid);
  return rmse(cate, dr_pseudo_outcome(valid.treatment_vector(), valid.outcome(), nu.mu0, nu.mu1, nu.pi));
}

double score_pseudo_r(const Vector& cate, const ObservationalDataset& valid, const ValidationNuisances& nu) {
  check_aligned(cate, valid);
  const Vector resid =
      (valid.outcome() - nu.mu) - cate.cwiseProduct(valid.treatment_vector() - nu.pi);
  return std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
}

Vector pseudo_if_terms(const Vector& cate, const ObservationalDataset& valid, const ValidationNuisances& nu) {
  check_aligned(cate, valid);
  const Vector t = valid.treatment_vector();
  const auto a = t.array() - nu.pi.array();
  const auto c = nu.pi.array() * (1.0 - nu.pi.array());
  const auto b = 2.0 * t.array() * a / c;
  const auto plug = (nu.mu1 - nu.mu0).array();
  const auto diff = plug - cate.array();
  return ((1.0 - b) * plug.square() + b * valid.outcome().array() * diff - a * diff.square() +
          cate.array().square())
      .matrix();
}

PseudoIfScore score_pseudo_if(const Vector& cate, const ObservationalDataset& valid,
                              const ValidationNuisances& nu) {
  const double s = pseudo_if_terms(cate, valid, nu).mean();
  PseudoIfScore out;
  out.negative_radicand = s < 0.0;
  out.score = s < 0.0 ? -std::sqrt(-s) : std::sqrt(s);
  return out;
}

Vector matched_effects(const ObservationalDataset& valid) {
  const Matrix x = standardize_columns(valid.covariates()).values;
  const auto& t = valid.treatment();
  const Vector& y = valid.outcome();
  Vector effect(static_cast<Eigen::Index>(valid.n()));
  for (std::size_t i = 0; i < valid.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double best = std::numeric_limits<double>::infinity();
    std::size_t match = i;
    for (std::size_t j = 0; j < valid.n(); ++j) {
      if (t[j] == t[i]) continue;
      const double dist = (x.row(static_cast<Eigen::Index>(j)) - x.row(ii)).squaredNorm();
      if (dist < best) {
        best = dist;
        match = j;
      }
    }
    effect[ii] = (2.0 * t[i] - 1.0) * (y[ii] - y[static_cast<Eigen::Index>(match)]);
  }
  return effect;
}

double score_matching(const Vector& cate, const ObservationalDataset& valid) {
  check_aligned(cate, valid);
  return rmse(cate, matched_effects(valid));
}

double score_factual(const std::optional<Vector>& factual, const Vector& outcome) {
  if (!factual) return std::numeric_limits<double>::infinity();
  if (factual->size() != outcome.size()) throw ValidationError("factual predictions misaligned");
  return (*factual - outcome).squaredNorm() / static_cast<double>(outcome.size());
}

SelectorScore score_random(std::size_t pool_size, std::uint64_t seed) {
  if (pool_size == 0) throw ValidationError("cannot select from an empty pool");
  SelectorScore out;
  out.kind = {SelectorFamily::random};
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out.scores.resize(pool_size);
  for (auto& s : out.scores) s = u(rng);
  out.chosen = argmin_first(out.scores);
  return out;
}

// ---------------------------------------------------------------------------

SelectionRun run_selectors(const std::vector<CandidatePredictions>& pool, const ObservationalDataset& valid,
                           const std::vector<SelectorKind>& kinds, const SelectorConfig& cfg) {
  SelectionRun run;
  if (kinds.empty()) return run;
  if (pool.empty()) throw ValidationError("cannot select from an empty pool");
  for (const auto& c : pool) check_aligned(c.cate, valid);

  auto uses = [&](auto pred) { return std::any_of(kinds.begin(), kinds.end(), pred); };
  const bool need_nuisances = uses([](const SelectorKind& k) {
    return k.family == SelectorFamily::plug_in || k.family == SelectorFamily::pseudo_dr ||
           k.family == SelectorFamily::pseudo_r || k.family == SelectorFamily::pseudo_if;
  });

  std::optional<NuisanceSet> nuisance_models;
  ValidationNuisances nu;
  if (need_nuisances) {
    nuisance_models.emplace(cfg.nuisance, valid, derive_seed(cfg.seed, {11}));
    const Matrix& x = valid.covariates();
    nu.mu0 = nuisance_models->mu0()->predict(x);
    nu.mu1 = nuisance_models->mu1()->predict(x);
    nu.mu = nuisance_models->mu()->predict(x);
    nu.pi = nuisance_models->pi()->predict_proba(x);
  }

  std::optional<Vector> matched;
  const std::size_t J = pool.size();
  for (const auto& kind : kinds) {
    SelectorScore score;
    score.kind = kind;
    score.scores.resize(J);
    switch (kind.family) {
      case SelectorFamily::drm: {
        if (!run.radii) run.radii = cfg.radii_override ? *cfg.radii_override : kl::compute_radii(valid, cfg.radius);
        run.drm.resize(J);
        parallel_for(J, cfg.jobs, [&](std::size_t j) {
          score.scores[j] = score_drm(pool[j].cate, valid, run.radii->eps0, run.radii->eps1, cfg.solver, &run.drm[j]);
        });
        break;
      }
      case SelectorFamily::plug_in: {
        const Vector plug = fit_learner(kind.plug_learner, *nuisance_models).predict(valid.covariates());
        for (std::size_t j = 0; j < J; ++j) score.scores[j] = score_plug_in(pool[j].cate, plug);
        break;
      }
      case SelectorFamily::pseudo_dr:
        for (std::size_t j = 0; j < J; ++j) score.scores[j] = score_pseudo_dr(pool[j].cate, valid, nu);
        break;
      case SelectorFamily::pseudo_r:
        for (std::size_t j = 0; j < J; ++j) score.scores[j] = score_pseudo_r(pool[j].cate, valid, nu);
        break;
      case SelectorFamily::pseudo_if: {
        bool negative = false;
        for (std::size_t j = 0; j < J; ++j) {
          const auto s = score_pseudo_if(pool[j].cate, valid, nu);
          score.scores[j] = s.score;
          negative = negative || s.negative_radicand;
        }
        if (negative) score.flags.emplace_back("negative_radicand");
        break;
      }
      case SelectorFamily::matching:
        if (!matched) matched = matched_effects(valid);
        for (std::size_t j = 0; j < J; ++j) score.scores[j] = rmse(pool[j].cate, *matched);
        break;
      case SelectorFamily::factual: {
        bool any = false;
        for (std::size_t j = 0; j < J; ++j) {
          score.scores[j] = score_factual(pool[j].factual, valid.outcome());
          any = any || pool[j].factual.has_value();
        }
        if (!any) score.flags.emplace_back("no_outcome_heads");
        break;
      }
      case SelectorFamily::random:
        score.scores = score_random(J, derive_seed(cfg.seed, {13})).scores;
        break;
    }
    for (double s : score.scores)
      if (std::isnan(s)) throw RuntimeError("selector " + kind.name() + " produced NaN");
    score.chosen = argmin_first(score.scores);
    run.scores.push_back(std::move(score));
  }
  return run;
}

}  // namespace cateselect::select
