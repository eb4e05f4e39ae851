#include "cateselect/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cateselect/dgp.hpp"
#include "cateselect/io.hpp"
#include "cateselect/meta_learners.hpp"
#include "cateselect/parallel.hpp"
#include "cateselect/rng.hpp"
#include "cateselect/selectors.hpp"

namespace cateselect::pipeline {

using nlohmann::json;

namespace {

constexpr int kMaxSplitAttempts = 16;

fs::path data_csv(const fs::path& rep) { return rep / "data.csv"; }
fs::path data_json(const fs::path& rep) { return rep / "data.json"; }
fs::path prediction_file(const fs::path& rep, const CandidateId& id) { return rep / "predictions" / (id.str() + ".csv"); }
fs::path scores_csv(const fs::path& rep) { return rep / "scores" / "scores.csv"; }
fs::path run_log(const fs::path& rep) { return rep / "scores" / "run_log.json"; }
fs::path oracle_csv(const fs::path& rep) { return rep / "eval" / "oracle.csv"; }
fs::path eval_long(const fs::path& rep) { return rep / "eval" / "long.csv"; }

bool all_exist(std::initializer_list<fs::path> paths) {
  return std::all_of(paths.begin(), paths.end(), [](const fs::path& p) { return fs::exists(p); });
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ObservationalDataset split_part(const Replication& rep, Split s) { return rep.data.subset(rep.split.indices(s)); }

struct LoadedPredictions {
  PredictionTable valid, test;
};

LoadedPredictions load_predictions(const fs::path& rep_dir, const CandidateId& id, const SplitAssignment& split) {
  const auto path = prediction_file(rep_dir, id);
  if (!fs::exists(path)) throw ValidationError("missing predictions for candidate " + id.str() + " (" + path.string() + ")");
  LoadedPredictions out;
  bool have_valid = false, have_test = false;
  for (auto& t : read_predictions(path)) {
    if (t.candidate_id != id.str()) throw ValidationError("prediction file " + path.string() + " holds another candidate");
    if (t.row_index != split.indices(t.split))
      throw ValidationError("predictions for " + id.str() + " do not match the " + to_string(t.split) + " split");
    if (t.split == Split::valid) {
      out.valid = std::move(t);
      have_valid = true;
    } else if (t.split == Split::test) {
      out.test = std::move(t);
      have_test = true;
    }
  }
  if (!have_valid || !have_test) throw ValidationError("predictions for " + id.str() + " lack the valid or test split");
  return out;
}

}  // namespace

fs::path run_directory(const RunConfig& cfg) { return cfg.out / ("run-" + hex64(config_hash(cfg))); }

fs::path replication_directory(const fs::path& run_dir, std::size_t replication) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep-%04zu", replication);
  return run_dir / buf;
}

std::uint64_t replication_seed(const RunConfig& cfg, std::size_t replication) {
  return derive_seed(cfg.seed, {replication});
}

void write_run_config(const RunConfig& cfg, const fs::path& run_dir) {
  io::write_text_atomic(run_dir / "config.json", config_to_json(cfg));
}

Replication load_replication(const fs::path& rep_dir) {
  if (!fs::exists(data_csv(rep_dir)) || !fs::exists(data_json(rep_dir)))
    throw ValidationError("no dataset in " + rep_dir.string() + " (run gen first)");
  Replication rep;
  rep.data = load_dataset(data_csv(rep_dir));
  json meta;
  try {
    meta = json::parse(io::read_text(data_json(rep_dir)));
    rep.index = meta.at("replication").get<std::size_t>();
    const auto& s = meta.at("split");
    rep.split.train_idx = s.at("train").get<IndexList>();
    rep.split.valid_idx = s.at("valid").get<IndexList>();
    rep.split.test_idx = s.at("test").get<IndexList>();
  } catch (const json::exception& e) {
    throw ValidationError("malformed " + data_json(rep_dir).string() + ": " + e.what());
  }
  std::vector<int> seen(rep.data.n(), 0);
  for (auto s : {Split::train, Split::valid, Split::test})
    for (auto i : rep.split.indices(s)) {
      if (i >= rep.data.n() || seen[i]++) throw ValidationError("split in " + rep_dir.string() + " is not a partition");
    }
  if (std::count(seen.begin(), seen.end(), 1) != static_cast<long>(rep.data.n()))
    throw ValidationError("split in " + rep_dir.string() + " does not cover every row");
  return rep;
}

bool gen_replication(const RunConfig& cfg, const fs::path& rep_dir, std::size_t replication, const StageOptions& opts) {
  if (opts.resume && all_exist({data_csv(rep_dir), data_json(rep_dir)})) return false;
  const std::uint64_t seed = replication_seed(cfg, replication);
  auto dcfg = cfg.dgp;
  dcfg.seed = derive_seed(seed, {1});
  const auto gen = dgp::generate(dcfg);

  SplitAssignment split;
  int attempt = 0;
  std::uint64_t split_seed = 0;
  for (;; ++attempt) {
    split_seed = derive_seed(seed, {2, static_cast<std::uint64_t>(attempt)});
    try {
      split = split_dataset(gen.dataset, cfg.split, split_seed);
      break;
    } catch (const ValidationError&) {
      if (attempt + 1 >= kMaxSplitAttempts) throw;
    }
  }

  json meta;
  meta["replication"] = replication;
  meta["seed"] = seed;
  meta["dgp_seed"] = dcfg.seed;
  meta["split_seed"] = split_seed;
  meta["split_attempts"] = attempt + 1;
  meta["n"] = gen.dataset.n();
  meta["d"] = gen.dataset.d();
  meta["kept_columns"] = gen.kept_columns;
  meta["beta_t"] = gen.coefficients.beta_t;
  meta["gamma"] = gen.coefficients.gamma;
  meta["active_linear"] = gen.coefficients.active_linear.size();
  meta["active_pair"] = gen.coefficients.active_pair.size();
  meta["active_triple"] = gen.coefficients.active_triple.size();
  meta["triples_subsampled"] = gen.coefficients.triples_subsampled;
  meta["split"] = {{"train", split.train_idx}, {"valid", split.valid_idx}, {"test", split.test_idx}};

  write_dataset(gen.dataset, data_csv(rep_dir));
  io::write_text_atomic(data_json(rep_dir), meta.dump(1) + "\n");
  return true;
}

bool fit_replication(const RunConfig& cfg, const fs::path& rep_dir, const StageOptions& opts) {
  const auto ids = cfg.candidate_ids();
  if (opts.resume && std::all_of(ids.begin(), ids.end(), [&](const CandidateId& id) {
        return fs::exists(prediction_file(rep_dir, id));
      }))
    return false;
  const auto rep = load_replication(rep_dir);
  const auto train = split_part(rep, Split::train);
  const auto pool_seed = derive_seed(replication_seed(cfg, rep.index), {3});
  const auto pool = build_pool(cfg.learners, cfg.base_specs(), train, pool_seed, opts.jobs);

  parallel_for(pool.size(), opts.jobs, [&](std::size_t j) {
    const auto& cand = pool[j];
    std::vector<PredictionTable> tables;
    for (auto s : {Split::valid, Split::test}) {
      const auto part = split_part(rep, s);
      PredictionTable t;
      t.candidate_id = cand.id().str();
      t.split = s;
      t.row_index = rep.split.indices(s);
      t.cate_hat = cand.predict(part.covariates());
      if (cand.has_outcome_head()) t.factual_hat = cand.predict_factual(part.covariates(), part.treatment_vector());
      tables.push_back(std::move(t));
    }
    write_predictions(tables, prediction_file(rep_dir, cand.id()));
  });
  return true;
}

bool select_replication(const RunConfig& cfg, const fs::path& rep_dir, const StageOptions& opts) {
  if (opts.resume && all_exist({scores_csv(rep_dir), run_log(rep_dir)})) return false;
  const auto rep = load_replication(rep_dir);
  const auto valid = split_part(rep, Split::valid);
  const auto ids = cfg.candidate_ids();

  std::vector<select::CandidatePredictions> pool;
  for (const auto& id : ids) {
    auto p = load_predictions(rep_dir, id, rep.split);
    pool.push_back({id, std::move(p.valid.cate_hat), std::move(p.valid.factual_hat)});
  }

  select::SelectorConfig scfg;
  scfg.radius = cfg.radius;
  scfg.solver = cfg.solver;
  scfg.nuisance = cfg.base_spec(cfg.nuisance_base);
  scfg.seed = derive_seed(replication_seed(cfg, rep.index), {4});
  scfg.jobs = opts.jobs;
  const auto run = select::run_selectors(pool, valid, cfg.selectors, scfg);

  std::ostringstream csv;
  csv << "selector,candidate_id,score,chosen\n";
  json log;
  log["replication"] = rep.index;
  log["selector_seed"] = scfg.seed;
  log["flags"] = json::object();
  for (const auto& s : run.scores) {
    for (std::size_t j = 0; j < ids.size(); ++j)
      csv << s.kind.name() << ',' << ids[j].str() << ',' << format_double(s.scores[j]) << ','
          << (j == s.chosen ? 1 : 0) << '\n';
    log["chosen"][s.kind.name()] = ids[s.chosen].str();
    if (!s.flags.empty()) log["flags"][s.kind.name()] = s.flags;
  }
  if (run.radii) {
    log["radii"] = {{"eps0", run.radii->eps0},
                    {"eps1", run.radii->eps1},
                    {"kl_treated_control", run.radii->kl_treated_control},
                    {"kl_control_treated", run.radii->kl_control_treated}};
    json drm = json::array();
    for (std::size_t j = 0; j < run.drm.size(); ++j) {
      const auto& d = run.drm[j];
      drm.push_back({{"candidate", ids[j].str()},
                     {"v0", d.v0.value},
                     {"lambda0", d.v0.lambda_star},
                     {"mode0", dro::to_string(d.v0.mode_used)},
                     {"v1", d.v1.value},
                     {"lambda1", d.v1.lambda_star},
                     {"mode1", dro::to_string(d.v1.mode_used)}});
    }
    log["drm"] = drm;
  }
  io::write_text_atomic(scores_csv(rep_dir), csv.str());
  io::write_text_atomic(run_log(rep_dir), log.dump(1) + "\n");
  return true;
}

bool eval_replication(const RunConfig& cfg, const fs::path& rep_dir, const StageOptions& opts) {
  if (opts.resume && all_exist({oracle_csv(rep_dir), eval_long(rep_dir)})) return false;
  const auto rep = load_replication(rep_dir);
  const auto test = split_part(rep, Split::test);
  if (!test.has_oracle()) throw ValidationError("evaluation needs the tau_true oracle column");
  const auto ids = cfg.candidate_ids();

  std::vector<std::string> names;
  std::vector<double> oracle;
  std::ostringstream ocsv;
  ocsv << "candidate_id,pehe\n";
  for (const auto& id : ids) {
    const auto p = load_predictions(rep_dir, id, rep.split);
    names.push_back(id.str());
    oracle.push_back(eval::oracle_pehe(p.test.cate_hat, *test.true_cate_oracle()));
    ocsv << id.str() << ',' << format_double(oracle.back()) << '\n';
  }

  if (!fs::exists(scores_csv(rep_dir))) throw ValidationError("no scores in " + rep_dir.string() + " (run select first)");
  const auto table = io::read_csv(scores_csv(rep_dir));
  const auto c_sel = table.column("selector"), c_id = table.column("candidate_id");
  const auto c_score = table.column("score"), c_chosen = table.column("chosen");
  std::vector<select::SelectorScore> scores;
  for (const auto& row : table.rows) {
    if (scores.empty() || scores.back().kind.name() != row[c_sel]) {
      scores.emplace_back();
      scores.back().kind = select::SelectorKind::parse(row[c_sel]);
    }
    auto& s = scores.back();
    const std::size_t j = s.scores.size();
    if (j >= ids.size() || row[c_id] != names[j])
      throw ValidationError("scores for " + row[c_sel] + " do not follow the configured pool");
    s.scores.push_back(parse_double(row[c_score]));
    if (row[c_chosen] == "1") s.chosen = j;
  }
  for (const auto& s : scores)
    if (s.scores.size() != ids.size()) throw ValidationError("scores for " + s.kind.name() + " are incomplete");

  const auto outcomes = eval::evaluate_replication(rep.index, scores, names, oracle);
  io::write_text_atomic(oracle_csv(rep_dir), ocsv.str());
  io::write_text_atomic(eval_long(rep_dir), eval::format_long_csv(outcomes));
  return true;
}

std::vector<eval::SummaryRow> report(const RunConfig& cfg, const fs::path& run_dir) {
  const std::size_t J = cfg.candidate_ids().size();
  std::vector<std::string> order;
  for (const auto& k : cfg.selectors) order.push_back(k.name());

  std::vector<eval::SelectorOutcome> all;
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    const auto path = eval_long(replication_directory(run_dir, r));
    if (!fs::exists(path)) throw ValidationError("replication " + std::to_string(r) + " has no evaluation (" + path.string() + ")");
    auto part = eval::parse_long_csv(io::read_text(path), J);
    all.insert(all.end(), part.begin(), part.end());
  }
  auto rank = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), name) - order.begin());
  };
  std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    return std::make_pair(a.replication, rank(a.selector)) < std::make_pair(b.replication, rank(b.selector));
  });
  const auto rows = eval::aggregate(all, order);
  io::write_text_atomic(run_dir / "summary.csv", eval::format_summary_csv(rows));
  io::write_text_atomic(run_dir / "rank_bins.csv", eval::format_rank_bins_csv(rows, J));
  io::write_text_atomic(run_dir / "long.csv", eval::format_long_csv(all));
  return rows;
}

fs::path bench(const RunConfig& cfg, const StageOptions& opts) {
  cfg.validate();
  const auto run_dir = run_directory(cfg);
  write_run_config(cfg, run_dir);
  const std::size_t outer = std::min(opts.jobs, cfg.replications);
  StageOptions inner = opts;
  inner.jobs = std::max<std::size_t>(1, opts.jobs / std::max<std::size_t>(outer, 1));
  parallel_for(cfg.replications, outer, [&](std::size_t r) {
    const auto rep_dir = replication_directory(run_dir, r);
    gen_replication(cfg, rep_dir, r, inner);
    fit_replication(cfg, rep_dir, inner);
    select_replication(cfg, rep_dir, inner);
    eval_replication(cfg, rep_dir, inner);
  });
  report(cfg, run_dir);
  return run_dir;
}

}  // namespace cateselect::pipeline
