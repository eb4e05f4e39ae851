#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cateselect/config.hpp"
#include "cateselect/parallel.hpp"
#include "cateselect/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cateselect;

namespace {

struct Options {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<fs::path> out;
  bool resume = false;
  std::optional<char> setting;
  std::optional<double> rho, xi, m;
  std::vector<std::string> overrides;
  std::optional<std::size_t> rep;
  std::optional<fs::path> rep_dir;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON run config");
  cmd->add_option("--seed", o.seed, "global seed");
  cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output root directory");
  cmd->add_flag("--resume", o.resume, "skip stages whose outputs exist");
  cmd->add_option("--setting", o.setting, "benchmark setting A, B or C");
  cmd->add_option("--rho", o.rho, "CATE complexity");
  cmd->add_option("--xi", o.xi, "selection bias");
  cmd->add_option("--m", o.m, "hidden-confounder ratio");
  cmd->add_option("--set", o.overrides, "config override key=value (repeatable)");
  cmd->add_option("--rep", o.rep, "only this replication");
  cmd->add_option("--rep-dir", o.rep_dir, "work on this replication directory only");
}

RunConfig resolve(const Options& o) {
  auto cfg = load_config(o.config, o.overrides);
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.out) cfg.out = *o.out;
  if (o.setting) {
    apply_setting(cfg, *o.setting, o.rho, o.xi, o.m);
  } else {
    if (o.rho) cfg.dgp.rho = *o.rho;
    if (o.xi) cfg.dgp.xi = *o.xi;
    if (o.m) cfg.dgp.missing_ratio = *o.m;
  }
  cfg.validate();
  return cfg;
}

struct Target {
  std::size_t replication;
  fs::path dir;
};

std::vector<Target> targets(const RunConfig& cfg, const Options& o) {
  if (o.rep_dir) return {{o.rep.value_or(0), *o.rep_dir}};
  const auto run = pipeline::run_directory(cfg);
  if (o.rep) {
    if (*o.rep >= cfg.replications) throw ValidationError("--rep is outside [0, replications)");
    return {{*o.rep, pipeline::replication_directory(run, *o.rep)}};
  }
  std::vector<Target> out;
  for (std::size_t r = 0; r < cfg.replications; ++r) out.push_back({r, pipeline::replication_directory(run, r)});
  return out;
}

template <typename Stage>
int run_stage(const char* name, const RunConfig& cfg, const Options& o, Stage&& stage) {
  const auto list = targets(cfg, o);
  if (!o.rep_dir) pipeline::write_run_config(cfg, pipeline::run_directory(cfg));
  pipeline::StageOptions opts{o.resume, cfg.jobs};
  std::size_t done = 0;
  for (const auto& t : list) done += stage(t, opts) ? 1 : 0;
  std::cout << name << ": " << done << " of " << list.size() << " replication(s) processed";
  if (done < list.size()) std::cout << " (others skipped, outputs present)";
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CATE estimator selection with a distributionally robust metric"};
  app.require_subcommand(1);
  Options o;
  auto* gen = app.add_subcommand("gen", "generate replication datasets");
  auto* fit = app.add_subcommand("fit", "fit the candidate pool and cache predictions");
  auto* sel = app.add_subcommand("select", "score candidates with every selector");
  auto* ev = app.add_subcommand("eval", "oracle evaluation of each selector's choice");
  auto* rep = app.add_subcommand("report", "aggregate evaluations across replications");
  auto* bench = app.add_subcommand("bench", "run the whole pipeline for all replications");
  auto* show = app.add_subcommand("config", "print the resolved config");
  for (auto* c : {gen, fit, sel, ev, rep, bench, show}) add_common(c, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(o);
    if (*show) {
      std::cout << config_to_json(cfg);
      return 0;
    }
    if (*gen)
      return run_stage("gen", cfg, o, [&](const Target& t, const pipeline::StageOptions& s) {
        return pipeline::gen_replication(cfg, t.dir, t.replication, s);
      });
    if (*fit)
      return run_stage("fit", cfg, o, [&](const Target& t, const pipeline::StageOptions& s) {
        return pipeline::fit_replication(cfg, t.dir, s);
      });
    if (*sel)
      return run_stage("select", cfg, o, [&](const Target& t, const pipeline::StageOptions& s) {
        return pipeline::select_replication(cfg, t.dir, s);
      });
    if (*ev)
      return run_stage("eval", cfg, o, [&](const Target& t, const pipeline::StageOptions& s) {
        return pipeline::eval_replication(cfg, t.dir, s);
      });
    if (*rep) {
      const auto run = pipeline::run_directory(cfg);
      pipeline::report(cfg, run);
      std::cout << "report: " << (run / "summary.csv").string() << '\n';
      return 0;
    }
    if (*bench) {
      const auto run = pipeline::bench(cfg, {o.resume, cfg.jobs});
      std::cout << "bench: " << (run / "summary.csv").string() << '\n';
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
