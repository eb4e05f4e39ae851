#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cateselect/config.hpp"
#include "cateselect/dataset.hpp"
#include "cateselect/evaluation.hpp"

namespace cateselect::pipeline {

namespace fs = std::filesystem;

// Layout under <out>/run-<config hash>/:
//   config.json
//   rep-0000/data.csv            dataset with oracle columns
//   rep-0000/data.json           seeds, split indices, DGP coefficients
//   rep-0000/predictions/<id>.csv
//   rep-0000/scores/scores.csv   selector,candidate_id,score,chosen
//   rep-0000/scores/run_log.json radii, lambda*, solver modes, flags
//   rep-0000/eval/oracle.csv     candidate_id,pehe
//   rep-0000/eval/long.csv
//   summary.csv, rank_bins.csv, long.csv

fs::path run_directory(const RunConfig& cfg);
fs::path replication_directory(const fs::path& run_dir, std::size_t replication);
std::uint64_t replication_seed(const RunConfig& cfg, std::size_t replication);

struct StageOptions {
  bool resume = false;  // skip a stage whose outputs already exist
  std::size_t jobs = 1;
};

struct Replication {
  std::size_t index = 0;
  ObservationalDataset data;
  SplitAssignment split;
};
Replication load_replication(const fs::path& rep_dir);

// Each stage returns false when skipped under resume.
bool gen_replication(const RunConfig& cfg, const fs::path& rep_dir, std::size_t replication,
                     const StageOptions& opts = {});
bool fit_replication(const RunConfig& cfg, const fs::path& rep_dir, const StageOptions& opts = {});
bool select_replication(const RunConfig& cfg, const fs::path& rep_dir, const StageOptions& opts = {});
bool eval_replication(const RunConfig& cfg, const fs::path& rep_dir, const StageOptions& opts = {});

// Aggregates eval/long.csv of every replication into the run-level files.
std::vector<eval::SummaryRow> report(const RunConfig& cfg, const fs::path& run_dir);

// gen -> fit -> select -> eval for every replication (in parallel across
// replications), then report. Returns the run directory.
fs::path bench(const RunConfig& cfg, const StageOptions& opts = {});

// Writes config.json into the run directory (creating it).
void write_run_config(const RunConfig& cfg, const fs::path& run_dir);

}  // namespace cateselect::pipeline
