#include "cateselect/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cateselect/io.hpp"
#include "cateselect/rng.hpp"

namespace cateselect {

namespace {

void check_finite(const Vector& v, const char* name) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw ValidationError(std::string("non-finite value in ") + name + " at row " +
                            std::to_string(i + 1));
}

void check_length(const std::optional<Vector>& v, std::size_t n, const char* name) {
  if (v && static_cast<std::size_t>(v->size()) != n)
    throw ValidationError(std::string(name) + " length " + std::to_string(v->size()) +
                          " does not match n = " + std::to_string(n));
}

}  // namespace

ObservationalDataset ObservationalDataset::create(Matrix covariates, std::vector<int> treatment,
                                                  Vector outcome, std::optional<Vector> y0,
                                                  std::optional<Vector> y1,
                                                  std::optional<Vector> true_cate) {
  const std::size_t n = treatment.size();
  if (n < 2) throw ValidationError("dataset needs n >= 2 units");
  if (static_cast<std::size_t>(covariates.rows()) != n)
    throw ValidationError("covariate rows " + std::to_string(covariates.rows()) +
                          " do not match n = " + std::to_string(n));
  if (covariates.cols() < 1) throw ValidationError("dataset needs at least one covariate");
  if (static_cast<std::size_t>(outcome.size()) != n)
    throw ValidationError("outcome length does not match n = " + std::to_string(n));
  check_length(y0, n, "y0");
  check_length(y1, n, "y1");
  check_length(true_cate, n, "true_cate");
  if (y0.has_value() != y1.has_value())
    throw ValidationError("potential outcomes must be given together");

  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (treatment[i] != 0 && treatment[i] != 1)
      throw ValidationError("non-binary treatment at row " + std::to_string(i + 1));
    treated += static_cast<std::size_t>(treatment[i]);
  }
  if (treated == 0 || treated == n)
    throw ValidationError("dataset needs at least one treated and one control unit");

  for (Eigen::Index j = 0; j < covariates.cols(); ++j)
    for (Eigen::Index i = 0; i < covariates.rows(); ++i)
      if (!std::isfinite(covariates(i, j)))
        throw ValidationError("non-finite covariate at row " + std::to_string(i + 1) +
                              ", column " + std::to_string(j + 1));
  check_finite(outcome, "outcome");
  if (y0) check_finite(*y0, "y0");
  if (y1) check_finite(*y1, "y1");
  if (true_cate) check_finite(*true_cate, "true_cate");

  if (y0) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double expected = treatment[i] == 1 ? (*y1)[k] : (*y0)[k];
      if (outcome[k] != expected)
        throw ValidationError("outcome inconsistent with potential outcomes at row " +
                              std::to_string(i + 1));
    }
  }

  ObservationalDataset ds;
  ds.covariates_ = std::move(covariates);
  ds.treatment_ = std::move(treatment);
  ds.outcome_ = std::move(outcome);
  ds.y0_ = std::move(y0);
  ds.y1_ = std::move(y1);
  ds.true_cate_ = std::move(true_cate);
  ds.n_treated_ = treated;
  return ds;
}

Vector ObservationalDataset::treatment_vector() const {
  Vector t(static_cast<Eigen::Index>(n()));
  for (std::size_t i = 0; i < n(); ++i) t[static_cast<Eigen::Index>(i)] = treatment_[i];
  return t;
}

IndexList ObservationalDataset::treated_indices() const {
  IndexList out;
  for (std::size_t i = 0; i < n(); ++i)
    if (treatment_[i] == 1) out.push_back(i);
  return out;
}

IndexList ObservationalDataset::control_indices() const {
  IndexList out;
  for (std::size_t i = 0; i < n(); ++i)
    if (treatment_[i] == 0) out.push_back(i);
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

Vector select_rows(const Vector& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    out[static_cast<Eigen::Index>(r)] = v[static_cast<Eigen::Index>(rows[r])];
  return out;
}

ObservationalDataset ObservationalDataset::subset(std::span<const std::size_t> rows) const {
  std::vector<int> t(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) t[r] = treatment_.at(rows[r]);
  auto opt = [&](const std::optional<Vector>& v) -> std::optional<Vector> {
    if (!v) return std::nullopt;
    return select_rows(*v, rows);
  };
  return create(select_rows(covariates_, rows), std::move(t), select_rows(outcome_, rows), opt(y0_),
                opt(y1_), opt(true_cate_));
}

ObservationalDataset ObservationalDataset::with_covariates(Matrix covariates) const {
  return create(std::move(covariates), treatment_, outcome_, y0_, y1_, true_cate_);
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ValidationError("not a number: '" + s + "'");
  return v;
}

CsvSchema CsvSchema::standard() {
  CsvSchema s;
  s.y0 = "y0";
  s.y1 = "y1";
  s.true_cate = "tau_true";
  return s;
}

ObservationalDataset parse_dataset(const std::string& csv_text, const CsvSchema& schema) {
  const auto table = io::parse_csv(csv_text);
  const std::size_t t_col = table.column(schema.treatment);
  const std::size_t y_col = table.column(schema.outcome);

  // Optional oracle columns from the standard schema are simply skipped when
  // the file lacks them; explicitly requested ones must exist.
  const bool standard_optional = schema.y0 == std::optional<std::string>("y0");
  auto optional_col = [&](const std::optional<std::string>& name) -> std::optional<std::size_t> {
    if (!name) return std::nullopt;
    if (standard_optional && !table.has_column(*name)) return std::nullopt;
    return table.column(*name);
  };
  auto y0_col = optional_col(schema.y0);
  auto y1_col = optional_col(schema.y1);
  auto tau_col = optional_col(schema.true_cate);

  std::vector<std::size_t> x_cols;
  if (schema.covariates.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == t_col || c == y_col || c == y0_col || c == y1_col || c == tau_col) continue;
      // Unmapped oracle-looking columns never leak into covariates.
      const auto& h = table.header[c];
      if (h == "y0" || h == "y1" || h == "tau_true") continue;
      x_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.covariates) x_cols.push_back(table.column(name));
  }
  if (x_cols.empty()) throw ValidationError("no covariate columns");

  const std::size_t n = table.rows.size();
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(x_cols.size()));
  std::vector<int> t(n);
  Vector y(static_cast<Eigen::Index>(n));
  std::optional<Vector> y0, y1, tau;
  if (y0_col) y0 = Vector(static_cast<Eigen::Index>(n));
  if (y1_col) y1 = Vector(static_cast<Eigen::Index>(n));
  if (tau_col) tau = Vector(static_cast<Eigen::Index>(n));

  auto cell = [&](std::size_t r, std::size_t c) {
    const auto& s = table.rows[r][c];
    double v = 0.0;
    try {
      v = parse_double(s);
    } catch (const ValidationError&) {
      throw ValidationError("invalid number '" + s + "' at row " + std::to_string(r + 1) +
                            ", column '" + table.header[c] + "'");
    }
    if (!std::isfinite(v))
      throw ValidationError("non-finite value at row " + std::to_string(r + 1) + ", column '" +
                            table.header[c] + "'");
    return v;
  };

  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < x_cols.size(); ++j) x(i, static_cast<Eigen::Index>(j)) = cell(r, x_cols[j]);
    const double tv = cell(r, t_col);
    if (tv != 0.0 && tv != 1.0)
      throw ValidationError("non-binary treatment at row " + std::to_string(r + 1));
    t[r] = static_cast<int>(tv);
    y[i] = cell(r, y_col);
    if (y0_col) (*y0)[i] = cell(r, *y0_col);
    if (y1_col) (*y1)[i] = cell(r, *y1_col);
    if (tau_col) (*tau)[i] = cell(r, *tau_col);
  }
  return ObservationalDataset::create(std::move(x), std::move(t), std::move(y), std::move(y0),
                                      std::move(y1), std::move(tau));
}

ObservationalDataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  if (!std::filesystem::exists(path))
    throw ValidationError("dataset file not found: '" + path.string() + "'");
  return parse_dataset(io::read_text(path), schema);
}

std::string format_dataset(const ObservationalDataset& ds) {
  std::ostringstream out;
  for (std::size_t j = 0; j < ds.d(); ++j) out << 'x' << (j + 1) << ',';
  out << "t,y";
  const bool po = ds.y0_oracle().has_value();
  const bool tau = ds.true_cate_oracle().has_value();
  if (po) out << ",y0,y1";
  if (tau) out << ",tau_true";
  out << '\n';
  for (std::size_t r = 0; r < ds.n(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < ds.d(); ++j)
      out << format_double(ds.covariates()(i, static_cast<Eigen::Index>(j))) << ',';
    out << ds.treatment()[r] << ',' << format_double(ds.outcome()[i]);
    if (po) out << ',' << format_double((*ds.y0_oracle())[i]) << ',' << format_double((*ds.y1_oracle())[i]);
    if (tau) out << ',' << format_double((*ds.true_cate_oracle())[i]);
    out << '\n';
  }
  return out.str();
}

void write_dataset(const ObservationalDataset& ds, const std::filesystem::path& path) {
  io::write_text_atomic(path, format_dataset(ds));
}

// ---------------------------------------------------------------------------

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + s + "'");
}

const IndexList& SplitAssignment::indices(Split s) const {
  switch (s) {
    case Split::train: return train_idx;
    case Split::valid: return valid_idx;
    case Split::test: return test_idx;
  }
  return test_idx;
}

SplitAssignment split_dataset(const ObservationalDataset& ds, const SplitRatios& ratios,
                              std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.valid <= 0 || ratios.test <= 0)
    throw ValidationError("split ratios must be positive");
  if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
    throw ValidationError("split ratios must sum to 1");
  const std::size_t n = ds.n();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train));
  const auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.valid));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n)
    throw ValidationError("degenerate split: n = " + std::to_string(n) + " too small for ratios");

  IndexList perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  SplitAssignment out;
  out.train_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.valid_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                       perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), perm.end());

  for (Split s : {Split::train, Split::valid, Split::test}) {
    bool treated = false, control = false;
    for (auto i : out.indices(s)) (ds.treatment()[i] == 1 ? treated : control) = true;
    if (!treated || !control)
      throw ValidationError("degenerate split: " + to_string(s) + " split lacks a treatment arm");
  }
  return out;
}

void write_split(const SplitAssignment& split, const std::filesystem::path& path) {
  std::size_t n = split.train_idx.size() + split.valid_idx.size() + split.test_idx.size();
  std::vector<Split> label(n, Split::train);
  for (Split s : {Split::train, Split::valid, Split::test})
    for (auto i : split.indices(s)) label.at(i) = s;
  std::ostringstream out;
  out << "row_index,split\n";
  for (std::size_t i = 0; i < n; ++i) out << i << ',' << to_string(label[i]) << '\n';
  io::write_text_atomic(path, out.str());
}

SplitAssignment read_split(const std::filesystem::path& path, std::size_t n) {
  const auto table = io::read_csv(path);
  const auto rc = table.column("row_index");
  const auto sc = table.column("split");
  if (table.rows.size() != n)
    throw ValidationError("split file covers " + std::to_string(table.rows.size()) +
                          " rows, dataset has " + std::to_string(n));
  SplitAssignment out;
  std::vector<bool> seen(n, false);
  for (const auto& row : table.rows) {
    const auto idx = static_cast<std::size_t>(parse_double(row[rc]));
    if (idx >= n || seen[idx]) throw ValidationError("invalid row_index in split file");
    seen[idx] = true;
    switch (split_from_string(row[sc])) {
      case Split::train: out.train_idx.push_back(idx); break;
      case Split::valid: out.valid_idx.push_back(idx); break;
      case Split::test: out.test_idx.push_back(idx); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Standardized standardize_columns(const Matrix& x, const std::optional<StandardizationStats>& stats) {
  Standardized out;
  if (stats) {
    if (stats->mean.size() != x.cols() || stats->sd.size() != x.cols())
      throw ValidationError("standardization stats do not match column count");
    out.stats = *stats;
  } else {
    const double n = static_cast<double>(x.rows());
    out.stats.mean = x.colwise().mean().transpose();
    out.stats.sd.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double ss = (x.col(j).array() - out.stats.mean[j]).square().sum();
      out.stats.sd[j] = n > 0 ? std::sqrt(ss / n) : 0.0;
    }
  }
  out.values.resize(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double sd = out.stats.sd[j];
    if (sd > 0)
      out.values.col(j) = (x.col(j).array() - out.stats.mean[j]) / sd;
    else
      out.values.col(j).setZero();
  }
  return out;
}

Matrix destandardize_columns(const Matrix& z, const StandardizationStats& stats) {
  Matrix x(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    x.col(j) = z.col(j).array() * stats.sd[j] + stats.mean[j];
  return x;
}

// ---------------------------------------------------------------------------

void write_predictions(std::span<const PredictionTable> tables, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "candidate_id,split,row_index,cate_hat,factual_hat\n";
  for (const auto& t : tables) {
    if (static_cast<std::size_t>(t.cate_hat.size()) != t.row_index.size())
      throw ValidationError("prediction table length mismatch for " + t.candidate_id);
    for (std::size_t r = 0; r < t.row_index.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      out << t.candidate_id << ',' << to_string(t.split) << ',' << t.row_index[r] << ','
          << format_double(t.cate_hat[i]) << ',';
      if (t.factual_hat) out << format_double((*t.factual_hat)[i]);
      out << '\n';
    }
  }
  io::write_text_atomic(path, out.str());
}

std::vector<PredictionTable> read_predictions(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  const auto cc = table.column("candidate_id");
  const auto sc = table.column("split");
  const auto rc = table.column("row_index");
  const auto vc = table.column("cate_hat");
  const bool has_factual = table.has_column("factual_hat");
  const auto fc = has_factual ? table.column("factual_hat") : 0;

  std::vector<PredictionTable> out;
  std::vector<std::vector<double>> cate, factual;
  for (const auto& row : table.rows) {
    const Split s = split_from_string(row[sc]);
    std::size_t k = 0;
    while (k < out.size() && !(out[k].candidate_id == row[cc] && out[k].split == s)) ++k;
    if (k == out.size()) {
      out.push_back(PredictionTable{row[cc], s, {}, {}, std::nullopt});
      cate.emplace_back();
      factual.emplace_back();
    }
    out[k].row_index.push_back(static_cast<std::size_t>(parse_double(row[rc])));
    const double v = parse_double(row[vc]);
    if (!std::isfinite(v)) throw ValidationError("non-finite cate_hat for " + row[cc]);
    cate[k].push_back(v);
    if (has_factual && !row[fc].empty()) factual[k].push_back(parse_double(row[fc]));
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].cate_hat = Eigen::Map<const Vector>(cate[k].data(), static_cast<Eigen::Index>(cate[k].size()));
    if (!factual[k].empty()) {
      if (factual[k].size() != cate[k].size())
        throw ValidationError("partial factual_hat column for " + out[k].candidate_id);
      out[k].factual_hat =
          Eigen::Map<const Vector>(factual[k].data(), static_cast<Eigen::Index>(factual[k].size()));
    }
  }
  return out;
}

}  // namespace cateselect
