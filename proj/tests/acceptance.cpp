// Acceptance checks: one PASS/FAIL (or WARN for soft checks) line per
// criterion. Exit status is nonzero when any hard check fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cateselect/config.hpp"
#include "cateselect/dgp.hpp"
#include "cateselect/dro.hpp"
#include "cateselect/evaluation.hpp"
#include "cateselect/io.hpp"
#include "cateselect/kl_radius.hpp"
#include "cateselect/meta_learners.hpp"
#include "cateselect/pipeline.hpp"
#include "cateselect/selectors.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace cateselect;

namespace {

enum class Status { pass, fail, warn };

struct Result {
  Status status;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared random dual instances: 50 score sets, 25 each of n = 10 and n = 100,
// each paired with the four radii.

const std::vector<double> kRadii{0.0, 0.1, 1.0, 5.0};

std::vector<Vector> dual_score_sets() {
  std::vector<Vector> sets;
  Rng rng(20240611);
  std::uniform_real_distribution<double> loc(-5.0, 5.0), logscale(std::log(0.1), std::log(10.0));
  std::normal_distribution<double> z;
  for (int i = 0; i < 50; ++i) {
    const int n = i < 25 ? 10 : 100;
    const double mu = loc(rng), sigma = std::exp(logscale(rng));
    Vector s(n);
    for (int j = 0; j < n; ++j) s[j] = mu + sigma * z(rng);
    sets.push_back(s);
  }
  return sets;
}

dro::DualObjective objective(const Vector& s, double eps) {
  dro::DualObjective o;
  o.s = s;
  o.epsilon = eps;
  return o;
}

Result dual_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int instances = 0;
  for (const auto& s : dual_score_sets()) {
    const auto grid = oracle::dual_grid_min(std::vector<double>(s.data(), s.data() + s.size()), kRadii);
    for (std::size_t e = 0; e < kRadii.size(); ++e) {
      const double v = dro::solve_robust_value(objective(s, kRadii[e])).value;
      worst = std::max(worst, std::abs(v - grid[e]) / std::abs(grid[e]));
      ++instances;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst <= 1e-6 && secs < 30.0 && instances == 200;
  return {ok ? Status::pass : Status::fail,
          fmt("%d instances, max rel err %.3g (tol 1e-6), %.1f s (limit 30 s)", instances, worst, secs)};
}

Result dual_invariants() {
  const dro::SolverConfig cfg;
  int failures = 0, checks = 0;
  double worst_shift = 0, worst_deriv = 0;
  Rng rng(77);
  std::uniform_real_distribution<double> shift(-10.0, 10.0), loglam(std::log(1e-2), std::log(1e2));
  for (const auto& s : dual_score_sets()) {
    const double mean = s.mean(), max = s.maxCoeff();
    double prev = -std::numeric_limits<double>::infinity();
    for (double eps : kRadii) {
      const auto obj = objective(s, eps);
      const double v = dro::solve_robust_value(obj, cfg).value;
      checks += 4;
      if (v < mean - 1e-12 * (1 + std::abs(mean))) ++failures;
      if (v > max + cfg.lambda_max * eps) ++failures;
      if (v < prev) ++failures;
      prev = v;

      const double c = shift(rng);
      const double vs = dro::solve_robust_value(objective((s.array() + c).matrix(), eps), cfg).value;
      worst_shift = std::max(worst_shift, std::abs(vs - v - c));
      if (std::abs(vs - v - c) > 1e-9) ++failures;

      // Derivative at a lambda on the scale of the scores.
      const double scale = std::max(1.0, (s.array() - mean).abs().maxCoeff());
      const double lambda = scale * std::exp(loglam(rng));
      const double g = dro::eval_dual_derivative(obj, lambda);
      const double fd = oracle::derivative([&](double l) { return dro::eval_dual(obj, l); }, lambda, 1e-3 * lambda);
      const double rel = std::abs(g - fd) / std::abs(g);
      worst_deriv = std::max(worst_deriv, rel);
      ++checks;
      if (rel > 1e-6) ++failures;
    }
  }
  return {failures == 0 ? Status::pass : Status::fail,
          fmt("%d/%d checks failed; max shift err %.3g (tol 1e-9), max derivative rel err %.3g (tol 1e-6)", failures,
              checks, worst_shift, worst_deriv)};
}

// ---------------------------------------------------------------------------

Result kl_calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  double sum_abs = 0, worst = 0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(1000 + seed);
    std::normal_distribution<double> z;
    Matrix p(10000, 1), q(10000, 1);
    for (int i = 0; i < 10000; ++i) p(i, 0) = z(rng);
    for (int i = 0; i < 10000; ++i) q(i, 0) = 1.0 + z(rng);
    const double err = std::abs(kl::knn_kl_divergence(p, q, 5) - 0.5);
    sum_abs += err;
    worst = std::max(worst, err);
  }
  const double mae = sum_abs / 10.0, secs = seconds_since(t0);
  const bool ok = worst <= 0.1 && mae <= 0.05 && secs < 60.0;
  return {ok ? Status::pass : Status::fail,
          fmt("max |err| %.4f (tol 0.1), MAE %.4f (tol 0.05), %.1f s (limit 60 s)", worst, mae, secs)};
}

ObservationalDataset validation_split(const dgp::DgpConfig& cfg, std::uint64_t seed) {
  const auto gen = dgp::generate(cfg);
  const auto split = split_dataset(gen.dataset, {}, seed);
  return gen.dataset.subset(split.valid_idx);
}

Result radius_sanity() {
  // Strong overlap violation at xi=2 leaves few controls, so n is large enough
  // for the k-NN estimator in both arms of most seeds.
  dgp::DgpConfig cfg;
  cfg.n = 50000;
  double lo = 1e9, hi = -1e9;
  int shifted = 0, unestimable = 0;
  for (int seed = 0; seed < 10; ++seed) {
    cfg.seed = 500 + seed;
    cfg.xi = 0.0;
    const auto r0 = kl::compute_radii(validation_split(cfg, seed));
    lo = std::min({lo, r0.eps0, r0.eps1});
    hi = std::max({hi, r0.eps0, r0.eps1});
    cfg.xi = 2.0;
    try {
      const auto r2 = kl::compute_radii(validation_split(cfg, seed));
      shifted += r2.kl_treated_control + r2.kl_control_treated > r0.kl_treated_control + r0.kl_control_treated;
    } catch (const ValidationError&) {
      ++unestimable;  // counted as not detected
    }
  }
  const bool ok = lo >= 5.2 && hi <= 5.35 && shifted >= 9;
  return {ok ? Status::pass : Status::fail,
          fmt("xi=0 radii in [%.4f, %.4f] (need [5.2, 5.35]); xi=2 summed divergence larger in %d/10 seeds "
              "(need >= 9, %d unestimable); n=50000, d=20, validation split",
              lo, hi, shifted, unestimable)};
}

// ---------------------------------------------------------------------------

Result learner_recovery() {
  dgp::DgpConfig cfg;
  cfg.rho = 0.3;
  cfg.noise_sd = 0.0;
  cfg.interaction_order = 1;
  cfg.n = 2000;
  cfg.d = 10;
  cfg.seed = 31;
  const auto gen = dgp::generate(cfg);
  const auto split = split_dataset(gen.dataset, {}, 32);
  const auto train = gen.dataset.subset(split.train_idx);
  const auto test = gen.dataset.subset(split.test_idx);
  std::string detail;
  bool ok = true;
  // Exact recovery needs an unpenalized linear fit; the default alpha = 1 is
  // reported alongside for reference.
  auto pehe_with = [&](LearnerKind kind, double alpha) {
    auto spec = BaseModelSpec::of(BaseKind::ridge);
    spec.ridge.alpha = alpha;
    const auto est = fit_learner(kind, spec, train, 33);
    return eval::oracle_pehe(est.predict(test.covariates()), *test.true_cate_oracle());
  };
  for (auto kind : {LearnerKind::T, LearnerKind::X, LearnerKind::DR, LearnerKind::RA, LearnerKind::S}) {
    const double pehe = pehe_with(kind, 1e-6);
    const double tol = kind == LearnerKind::S ? 0.05 : 1e-2;
    ok = ok && pehe <= tol;
    detail += fmt("%s %.2e (tol %.0e; alpha=1 %.2e) ", to_string(kind).c_str(), pehe, tol, pehe_with(kind, 1.0));
  }
  return {ok ? Status::pass : Status::fail, "ridge alpha=1e-6 test PEHE: " + detail};
}

// ---------------------------------------------------------------------------
// Benchmark reproduction

struct BenchOutcome {
  std::vector<eval::SummaryRow> rows;
  fs::path run_dir;
  double seconds = 0;
};

BenchOutcome run_bench(const fs::path& out, char setting) {
  RunConfig cfg;
  apply_setting(cfg, setting);
  cfg.replications = 20;
  cfg.jobs = 4;
  cfg.out = out;
  const auto t0 = std::chrono::steady_clock::now();
  BenchOutcome b;
  b.run_dir = pipeline::bench(cfg, {false, cfg.jobs});
  b.rows = pipeline::report(cfg, b.run_dir);
  b.seconds = seconds_since(t0);
  return b;
}

const eval::SummaryRow& row(const BenchOutcome& b, const std::string& name) {
  for (const auto& r : b.rows)
    if (r.selector == name) return r;
  throw std::runtime_error("selector missing from summary: " + name);
}

Result drm_beats_baselines(const BenchOutcome& b, const char* label) {
  const double drm = row(b, "drm").regret_mean;
  bool ok = b.seconds <= 600.0;
  std::string detail = fmt("%s: drm %.4g vs", label, drm);
  for (const char* name : {"plug-T", "pseudo-DR", "pseudo-IF", "matching", "factual", "random"}) {
    const double v = row(b, name).regret_mean;
    ok = ok && drm < v;
    detail += fmt(" %s %.4g", name, v);
  }
  detail += fmt("; %.0f s (limit 600 s)", b.seconds);
  return {ok ? Status::pass : Status::fail, detail};
}

Result rank_correlation_floor(const BenchOutcome& a) {
  const auto& r = row(a, "drm");
  return {r.spearman_mean >= 0.5 ? Status::pass : Status::fail,
          fmt("setting A drm Spearman %.3f +- %.3f (need >= 0.5)", r.spearman_mean, r.spearman_sd)};
}

Result zero_estimator_identity(const std::vector<fs::path>& run_dirs) {
  std::vector<ObservationalDataset> datasets;
  for (const auto& run : run_dirs)
    for (std::size_t r = 0; r < 20; ++r) {
      const auto rep = pipeline::load_replication(pipeline::replication_directory(run, r));
      datasets.push_back(rep.data.subset(rep.split.valid_idx));
    }
  // Extra draws across the other knobs of the generator.
  int seed = 900;
  for (double xi : {0.0, 1.0, 2.0})
    for (double rho : {0.0, 0.3})
      for (double m : {0.0, 0.9}) {
        dgp::DgpConfig cfg;
        cfg.xi = xi;
        cfg.rho = rho;
        cfg.missing_ratio = m;
        cfg.n = 5000;
        cfg.seed = static_cast<std::uint64_t>(++seed);
        datasets.push_back(validation_split(cfg, static_cast<std::uint64_t>(seed)));
      }
  // The identity holds for any radii; arms too small for the k-NN estimator
  // fall back to the offset alone.
  double worst = 0;
  int fallback = 0;
  for (const auto& valid : datasets) {
    kl::Radii radii;
    try {
      radii = kl::compute_radii(valid);
    } catch (const ValidationError&) {
      radii.eps0 = radii.eps1 = kl::RadiusPolicy{}.offset;
      ++fallback;
    }
    const double r = select::score_drm(Vector::Zero(static_cast<Eigen::Index>(valid.n())), valid, radii.eps0, radii.eps1);
    worst = std::max(worst, std::abs(r));
  }
  return {worst <= 1e-5 ? Status::pass : Status::fail,
          fmt("%zu datasets (%d with offset-only radii), max |R_DRM(0)| = %.3g (tol 1e-5)", datasets.size(), fallback,
              worst)};
}

// ---------------------------------------------------------------------------

Result convergence_rate() {
  // Fixed tau_hat(x) = 1 + x with X ~ U(-1, 1), Y = 2X + U(-0.5, 0.5); Z is
  // bounded, control-arm objective with eps = 0.5.
  auto draw = [](std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> ux(-1.0, 1.0), ue(-0.5, 0.5);
    Vector z(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = ux(rng);
      z[static_cast<Eigen::Index>(i)] = (1.0 + x) * (2.0 * x + ue(rng));
    }
    return z;
  };
  auto value = [](const Vector& z) {
    return dro::solve_robust_value(dro::DualObjective::from_products(dro::Group::control, z, 0.5)).value;
  };
  const double reference = value(draw(100000, 4242));
  double err_small = 0, err_large = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    err_small += std::abs(value(draw(400, 10 + seed)) - reference) / 20.0;
    err_large += std::abs(value(draw(6400, 100 + seed)) - reference) / 20.0;
  }
  const double ratio = err_small / err_large;
  const double bound400 = dro::finite_sample_bound(400, 0.5, 0.05, 0.1, 10.0, -1.0, 3.0);
  const double bound6400 = dro::finite_sample_bound(6400, 0.5, 0.05, 0.1, 10.0, -1.0, 3.0);
  const auto status = ratio >= 2.5 ? Status::pass : Status::warn;
  return {status, fmt("mean |V_n - V_ref|: n=400 %.4g, n=6400 %.4g, ratio %.2f (target >= 2.5, theory 4; soft); "
                      "bound diagnostic ratio %.2f",
                      err_small, err_large, ratio, bound400 / bound6400)};
}

Result evaluation_identities(const BenchOutcome& a, const fs::path& work) {
  bool ok = true;
  std::string detail;
  // Oracle selector and self-correlation on every setting-A replication.
  double worst_regret = 0, worst_rho = 0;
  std::size_t oracle_bin_misses = 0;
  for (std::size_t r = 0; r < 20; ++r) {
    const auto text = io::read_text(pipeline::replication_directory(a.run_dir, r) / "eval" / "oracle.csv");
    const auto table = io::parse_csv(text);
    std::vector<double> pehe;
    for (const auto& row : table.rows) pehe.push_back(parse_double(row[1]));
    const auto best = select::argmin_first(pehe);
    worst_regret = std::max(worst_regret, eval::regret(best, pehe));
    worst_rho = std::max(worst_rho, std::abs(eval::spearman(pehe, pehe) - 1.0));
    oracle_bin_misses += eval::rank_bin(eval::selected_rank(best, pehe), pehe.size()) != 0;
  }
  ok = ok && worst_regret == 0.0 && worst_rho == 0.0 && oracle_bin_misses == 0;
  detail += fmt("oracle regret max %.3g, |spearman(o,o)-1| max %.3g, oracle outside first bin %zu; ", worst_regret,
                worst_rho, oracle_bin_misses);

  double worst_sum = 0;
  for (const auto& r : a.rows) {
    double sum = 0;
    for (double p : r.bin_percent) sum += p;
    worst_sum = std::max(worst_sum, std::abs(sum - 100.0));
  }
  ok = ok && worst_sum <= 1e-9;
  detail += fmt("bin percent |sum-100| max %.3g; ", worst_sum);

  // Determinism: rerun the setting-A benchmark into another directory.
  RunConfig cfg;
  apply_setting(cfg, 'A');
  cfg.replications = 20;
  cfg.jobs = 4;
  cfg.out = work / "rerun";
  const auto rerun = pipeline::bench(cfg, {false, cfg.jobs});
  const bool same = io::read_text(rerun / "summary.csv") == io::read_text(a.run_dir / "summary.csv") &&
                    io::read_text(rerun / "long.csv") == io::read_text(a.run_dir / "long.csv");
  ok = ok && same;
  detail += same ? "rerun summary byte-identical" : "rerun summary DIFFERS";
  return {ok ? Status::pass : Status::fail, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "cateselect-acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](const char* name, const std::function<Result()>& check) {
    Result r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = r.status == Status::pass ? "PASS" : r.status == Status::warn ? "WARN" : "FAIL";
    failures += r.status == Status::fail;
    std::printf("%s  %-34s %s\n", tag, name, r.detail.c_str());
    std::fflush(stdout);
  };

  report("dual solver oracle equivalence", dual_oracle_equivalence);
  report("dual invariants", dual_invariants);
  report("KL estimator calibration", kl_calibration);
  report("radius sanity", radius_sanity);
  report("learner recovery", learner_recovery);

  BenchOutcome a, c;
  bool benches = true;
  try {
    a = run_bench(work / "A", 'A');
    c = run_bench(work / "C", 'C');
  } catch (const std::exception& e) {
    benches = false;
    std::printf("benchmark runs failed: %s\n", e.what());
  }
  auto need_bench = [&](auto fn) {
    return [=, &a, &c]() -> Result {
      if (!benches) return {Status::fail, "benchmark runs failed"};
      return fn(a, c);
    };
  };
  report("benchmark direction, setting A", need_bench([](auto& a, auto&) { return drm_beats_baselines(a, "A rho=0.1 xi=1"); }));
  report("benchmark direction, setting C", need_bench([](auto&, auto& c) { return drm_beats_baselines(c, "C m=0.5"); }));
  report("rank correlation floor", need_bench([](auto& a, auto&) { return rank_correlation_floor(a); }));
  report("DRM zero-estimator identity", need_bench([](auto& a, auto& c) {
           return zero_estimator_identity({a.run_dir, c.run_dir});
         }));
  report("convergence-rate diagnostic", convergence_rate);
  report("evaluation identities", need_bench([&](auto& a, auto&) { return evaluation_identities(a, work); }));

  std::printf("%s\n", failures == 0 ? "acceptance: all hard checks passed" : "acceptance: FAILURES present");
  return failures == 0 ? 0 : 1;
}
