#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cateselect/types.hpp"

namespace cateselect {

// Covariates, binary treatment and factual outcome for n units, plus the
// oracle fields a simulator knows (potential outcomes, true CATE). Oracle
// fields are only ever read by evaluation code.
class ObservationalDataset {
 public:
  ObservationalDataset() = default;

  // Validates every invariant and throws ValidationError on violation:
  // equal lengths, n >= 2, binary treatment with both arms present, finite
  // values, and y == (t ? y1 : y0) whenever potential outcomes are given.
  static ObservationalDataset create(Matrix covariates, std::vector<int> treatment,
                                     Vector outcome, std::optional<Vector> y0 = std::nullopt,
                                     std::optional<Vector> y1 = std::nullopt,
                                     std::optional<Vector> true_cate = std::nullopt);

  const Matrix& covariates() const noexcept { return covariates_; }
  const std::vector<int>& treatment() const noexcept { return treatment_; }
  const Vector& outcome() const noexcept { return outcome_; }
  const std::optional<Vector>& y0_oracle() const noexcept { return y0_; }
  const std::optional<Vector>& y1_oracle() const noexcept { return y1_; }
  const std::optional<Vector>& true_cate_oracle() const noexcept { return true_cate_; }

  std::size_t n() const noexcept { return treatment_.size(); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(covariates_.cols()); }
  std::size_t n_treated() const noexcept { return n_treated_; }
  std::size_t n_control() const noexcept { return n() - n_treated_; }
  // Empirical P(T = 1).
  double treated_fraction() const noexcept {
    return static_cast<double>(n_treated_) / static_cast<double>(n());
  }
  bool has_oracle() const noexcept { return true_cate_.has_value(); }

  // Treatment as a 0/1 real vector, convenient for arithmetic.
  Vector treatment_vector() const;
  IndexList treated_indices() const;
  IndexList control_indices() const;

  // Rows in the given order; oracle fields follow along.
  ObservationalDataset subset(std::span<const std::size_t> rows) const;
  // Same units with a different covariate matrix (rows must match).
  ObservationalDataset with_covariates(Matrix covariates) const;

 private:
  Matrix covariates_;
  std::vector<int> treatment_;
  Vector outcome_;
  std::optional<Vector> y0_;
  std::optional<Vector> y1_;
  std::optional<Vector> true_cate_;
  std::size_t n_treated_ = 0;
};

// Rows of a matrix selected by index.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
Vector select_rows(const Vector& v, std::span<const std::size_t> rows);

// ---------------------------------------------------------------------------
// CSV ingestion

// Maps CSV header names onto dataset fields. An empty covariate list means
// "every column not mapped to another field".
struct CsvSchema {
  std::vector<std::string> covariates;
  std::string treatment = "t";
  std::string outcome = "y";
  std::optional<std::string> y0;
  std::optional<std::string> y1;
  std::optional<std::string> true_cate;

  // Schema matching write_dataset's output: x1..xd,t,y[,y0,y1,tau_true].
  static CsvSchema standard();
};

// Errors name the offending (1-based data) row and column.
ObservationalDataset load_dataset(const std::filesystem::path& path,
                                  const CsvSchema& schema = CsvSchema::standard());
ObservationalDataset parse_dataset(const std::string& csv_text,
                                   const CsvSchema& schema = CsvSchema::standard());

// Writes x1..xd,t,y and, when present, y0,y1,tau_true. Doubles are printed
// in shortest round-trip form so load_dataset reproduces them bit-exactly.
void write_dataset(const ObservationalDataset& ds, const std::filesystem::path& path);
std::string format_dataset(const ObservationalDataset& ds);

// ---------------------------------------------------------------------------
// Splitting

enum class Split { train, valid, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SplitRatios {
  double train = 0.49;
  double valid = 0.21;
  double test = 0.30;
};

struct SplitAssignment {
  IndexList train_idx;
  IndexList valid_idx;
  IndexList test_idx;

  const IndexList& indices(Split s) const;
};

// Seeded random permutation followed by a contiguous cut. Train and valid
// sizes are round(n * ratio); test takes the remainder. A split lacking
// either arm is an error ("degenerate split"); callers may reseed.
SplitAssignment split_dataset(const ObservationalDataset& ds, const SplitRatios& ratios,
                              std::uint64_t seed);

// row_index,split lines; used to cache the split next to predictions.
void write_split(const SplitAssignment& split, const std::filesystem::path& path);
SplitAssignment read_split(const std::filesystem::path& path, std::size_t n);

// ---------------------------------------------------------------------------
// Standardization

struct StandardizationStats {
  Vector mean;
  Vector sd;  // population sd; zero for constant columns
};

struct Standardized {
  Matrix values;
  StandardizationStats stats;
};

// Centers and scales each column with population sd. Columns with sd == 0 map
// to 0. Passing stats applies them instead of fitting.
Standardized standardize_columns(const Matrix& x,
                                 const std::optional<StandardizationStats>& stats = std::nullopt);
Matrix destandardize_columns(const Matrix& z, const StandardizationStats& stats);

// ---------------------------------------------------------------------------
// Cached predictions

struct PredictionTable {
  std::string candidate_id;
  Split split = Split::valid;
  IndexList row_index;  // dataset rows, aligned with cate_hat
  Vector cate_hat;
  // Predicted outcome under the observed treatment, for candidates that
  // carry outcome models. Empty otherwise.
  std::optional<Vector> factual_hat;
};

// candidate_id,split,row_index,cate_hat,factual_hat (factual_hat blank when
// absent). Several tables (e.g. valid and test) may share one file.
void write_predictions(std::span<const PredictionTable> tables, const std::filesystem::path& path);
std::vector<PredictionTable> read_predictions(const std::filesystem::path& path);

// Shortest round-trip decimal form ("inf"/"-inf"/"nan" for non-finite).
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace cateselect
