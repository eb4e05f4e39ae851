#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cateselect/base_models.hpp"
#include "cateselect/dataset.hpp"
#include "cateselect/dgp.hpp"
#include "cateselect/dro.hpp"
#include "cateselect/kl_radius.hpp"
#include "cateselect/meta_learners.hpp"
#include "cateselect/selectors.hpp"

namespace cateselect {

// Everything a run depends on. The JSON form mirrors these fields:
//
//   { "seed", "jobs",
//     "dgp":        { rho, xi, missing_ratio, coeff_p, noise_sd, treat_offset,
//                     interaction_order, n, d, covariate_csv },
//     "split":      { train, valid, test },
//     "pool":       { learners: [...], bases: [...] },
//     "base_params":{ ridge, logistic, knn, boosted_trees, mlp },
//     "selectors":  { kinds: [...], nuisance_base, radius: {...}, solver: {...} },
//     "eval":       { replications, out } }
//
// Every key has a default, unknown keys and mistyped values are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  dgp::DgpConfig dgp;
  SplitRatios split;

  std::vector<LearnerKind> learners = all_learner_kinds();
  std::vector<BaseKind> bases{BaseKind::ridge, BaseKind::boosted_trees};
  BaseModelSpec base_params;  // hyperparameters shared by every base kind

  std::vector<select::SelectorKind> selectors = select::SelectorKind::all();
  BaseKind nuisance_base = BaseKind::boosted_trees;
  kl::RadiusPolicy radius;
  dro::SolverConfig solver;

  std::size_t replications = 20;
  std::filesystem::path out = "runs";

  BaseModelSpec base_spec(BaseKind kind) const;
  std::vector<BaseModelSpec> base_specs() const;
  std::vector<CandidateId> candidate_ids() const;  // learner-major pool order

  void validate() const;
};

// Parses a JSON document (empty text means all defaults) and applies
// "a.b.c=value" overrides in order. Values are read as JSON, falling back
// to a bare string. Throws ValidationError on any schema violation.
RunConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides = {});

// Canonical JSON with every field spelled out.
std::string config_to_json(const RunConfig& cfg);

// 64-bit FNV-1a of the canonical JSON, ignoring "jobs" and "eval.out"
// which do not change results.
std::uint64_t config_hash(const RunConfig& cfg);

// Benchmark settings: A varies rho, B varies xi, C varies m. Each setting
// fixes the other knobs (rho 0.1, xi 1, m 0, or m 0.5 for C) and the given
// shortcut values are applied on top.
void apply_setting(RunConfig& cfg, char setting, std::optional<double> rho = std::nullopt,
                   std::optional<double> xi = std::nullopt, std::optional<double> m = std::nullopt);

}  // namespace cateselect
