#include "cateselect/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "cateselect/io.hpp"

namespace cateselect::dgp {

void DgpConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
  };
  prob(rho, "rho");
  prob(coeff_p, "coeff_p");
  if (!(xi >= 0.0) || !std::isfinite(xi)) throw ValidationError("xi must be >= 0");
  if (!(missing_ratio >= 0.0 && missing_ratio < 1.0))
    throw ValidationError("missing ratio m must lie in [0, 1)");
  if (!(noise_sd >= 0.0)) throw ValidationError("noise_sd must be >= 0");
  if (interaction_order < 1 || interaction_order > 3)
    throw ValidationError("interaction_order must be 1, 2 or 3");
  if (!covariate_csv) {
    if (n < 4) throw ValidationError("n must be >= 4");
    if (d < 1) throw ValidationError("d must be >= 1");
  }
}

DgpCoefficients draw_coefficients(const DgpConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.d;
  std::bernoulli_distribution coeff(cfg.coeff_p);
  std::bernoulli_distribution gamma(cfg.rho);
  DgpCoefficients c;
  c.beta_t.resize(d);
  for (auto& b : c.beta_t) b = coeff(rng) ? 1 : 0;
  for (std::size_t j = 0; j < d; ++j)
    if (coeff(rng)) c.active_linear.push_back(j);
  if (cfg.interaction_order >= 2)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = j; k < d; ++k)
        if (coeff(rng)) c.active_pair.push_back({j, k});
  if (cfg.interaction_order >= 3)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = j; k < d; ++k)
        for (std::size_t l = k; l < d; ++l)
          if (coeff(rng)) c.active_triple.push_back({j, k, l});
  c.gamma.resize(d);
  for (auto& g : c.gamma) g = gamma(rng) ? 1 : 0;

  if (c.active_triple.size() > kMaxActiveTriples) {
    std::clog << "warning: " << c.active_triple.size() << " active triple terms for d = " << d
              << "; subsampling to " << kMaxActiveTriples << '\n';
    std::shuffle(c.active_triple.begin(), c.active_triple.end(), rng);
    c.active_triple.resize(kMaxActiveTriples);
    std::sort(c.active_triple.begin(), c.active_triple.end());
    c.triples_subsampled = true;
  }
  return c;
}

Vector treatment_probabilities(const Matrix& x, const std::vector<int>& beta_t, double xi,
                               double offset) {
  if (static_cast<std::size_t>(x.cols()) != beta_t.size())
    throw ValidationError("beta_t length does not match covariate dimension");
  Vector p(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double lin = offset;
    for (std::size_t j = 0; j < beta_t.size(); ++j)
      if (beta_t[j]) lin += x(i, static_cast<Eigen::Index>(j));
    const double z = xi * lin;
    p[i] = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return p;
}

std::vector<int> generate_treatment(const Matrix& x, const std::vector<int>& beta_t, double xi,
                                    double offset, Rng& rng) {
  const Vector p = treatment_probabilities(x, beta_t, xi, offset);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> t(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) t[static_cast<std::size_t>(i)] = u(rng) < p[i] ? 1 : 0;
  return t;
}

Vector baseline_outcome(const Matrix& x, const DgpCoefficients& c) {
  Vector base = Vector::Zero(x.rows());
  for (auto j : c.active_linear) base += x.col(static_cast<Eigen::Index>(j));
  for (const auto& [j, k] : c.active_pair)
    base.array() += x.col(static_cast<Eigen::Index>(j)).array() * x.col(static_cast<Eigen::Index>(k)).array();
  for (const auto& [j, k, l] : c.active_triple)
    base.array() += x.col(static_cast<Eigen::Index>(j)).array() *
                    x.col(static_cast<Eigen::Index>(k)).array() *
                    x.col(static_cast<Eigen::Index>(l)).array();
  return base;
}

Vector true_cate(const Matrix& x, const std::vector<int>& gamma) {
  if (static_cast<std::size_t>(x.cols()) != gamma.size())
    throw ValidationError("gamma length does not match covariate dimension");
  Vector tau = Vector::Zero(x.rows());
  for (std::size_t j = 0; j < gamma.size(); ++j)
    if (gamma[j]) tau += x.col(static_cast<Eigen::Index>(j));
  return tau;
}

Outcomes generate_outcomes(const Matrix& x, const DgpCoefficients& coeffs,
                           const std::vector<int>& treatment, double noise_sd, Rng& rng) {
  if (static_cast<std::size_t>(x.rows()) != treatment.size())
    throw ValidationError("treatment length does not match covariate rows");
  Outcomes o;
  const Vector base = baseline_outcome(x, coeffs);
  o.tau = true_cate(x, coeffs.gamma);
  Vector noise(x.rows());
  std::normal_distribution<double> eps(0.0, 1.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) noise[i] = noise_sd * eps(rng);
  o.y0 = base + noise;
  o.y1 = base + o.tau + noise;
  o.y.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    o.y[i] = treatment[static_cast<std::size_t>(i)] == 1 ? o.y1[i] : o.y0[i];
  return o;
}

ObservationalDataset apply_hidden_confounding(const ObservationalDataset& ds, double m,
                                              std::uint64_t seed, std::vector<std::size_t>* kept) {
  if (!(m >= 0.0 && m < 1.0)) throw ValidationError("missing ratio m must lie in [0, 1)");
  const std::size_t d = ds.d();
  // The small guard keeps products like 0.9 * 10 from flooring to 8.
  const auto removed = static_cast<std::size_t>(std::floor(m * static_cast<double>(d) + 1e-9));
  if (removed >= d) throw ValidationError("hidden confounding would remove every covariate");

  std::vector<std::size_t> cols(d);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  if (removed > 0) {
    Rng rng(seed);
    std::shuffle(cols.begin(), cols.end(), rng);
    cols.erase(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(removed));
    std::sort(cols.begin(), cols.end());
  }
  if (kept) *kept = cols;
  if (removed == 0) return ds;
  Matrix x(ds.covariates().rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    x.col(static_cast<Eigen::Index>(c)) = ds.covariates().col(static_cast<Eigen::Index>(cols[c]));
  return ds.with_covariates(std::move(x));
}

std::size_t continuous_columns(std::size_t d) { return (7 * d + 9) / 10; }

Matrix synth_covariates(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ValidationError("synth_covariates needs n, d >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const std::size_t n_cont = continuous_columns(d);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = 0; i < n; ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          j < n_cont ? normal(rng) : (coin(rng) ? 1.0 : 0.0);
  return x;
}

namespace {

Matrix load_covariate_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  Matrix x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const double v = parse_double(table.rows[r][c]);
      if (!std::isfinite(v))
        throw ValidationError("non-finite covariate at row " + std::to_string(r + 1) + ", column '" +
                              table.header[c] + "'");
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  if (x.rows() < 4) throw ValidationError("covariate file needs at least 4 rows");
  return x;
}

}  // namespace

Generated generate(const DgpConfig& cfg_in) {
  cfg_in.validate();
  DgpConfig cfg = cfg_in;
  Matrix x;
  if (cfg.covariate_csv) {
    x = load_covariate_csv(*cfg.covariate_csv);
    cfg.n = static_cast<std::size_t>(x.rows());
    cfg.d = static_cast<std::size_t>(x.cols());
  } else {
    x = synth_covariates(cfg.n, cfg.d, derive_seed(cfg.seed, {1}));
  }

  Rng coeff_rng(derive_seed(cfg.seed, {2}));
  Rng treat_rng(derive_seed(cfg.seed, {3}));
  Rng noise_rng(derive_seed(cfg.seed, {4}));

  // Redraw the treatment a few times if one arm comes out empty; this only
  // happens for tiny n with strong selection bias.
  Generated g;
  g.coefficients = draw_coefficients(cfg, coeff_rng);
  std::vector<int> t;
  for (int attempt = 0; attempt < 16; ++attempt) {
    t = generate_treatment(x, g.coefficients.beta_t, cfg.xi, cfg.treat_offset, treat_rng);
    const auto treated = std::accumulate(t.begin(), t.end(), std::size_t{0});
    if (treated > 0 && treated < t.size()) break;
  }
  auto o = generate_outcomes(x, g.coefficients, t, cfg.noise_sd, noise_rng);
  auto full = ObservationalDataset::create(x, std::move(t), std::move(o.y), std::move(o.y0),
                                           std::move(o.y1), std::move(o.tau));
  g.full_covariates = std::move(x);
  g.dataset = apply_hidden_confounding(full, cfg.missing_ratio, derive_seed(cfg.seed, {5}),
                                       &g.kept_columns);
  return g;
}

}  // namespace cateselect::dgp
