#include <benchmark/benchmark.h>

#include <random>

#include "cateselect/base_models.hpp"
#include "cateselect/dgp.hpp"
#include "cateselect/dro.hpp"
#include "cateselect/kl_radius.hpp"
#include "cateselect/selectors.hpp"

using namespace cateselect;

namespace {

Matrix gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = z(rng);
  return x;
}

void dual_solve(benchmark::State& state, dro::SolverMode mode) {
  const Vector z = gaussian(state.range(0), 1, 1).col(0);
  const auto obj = dro::DualObjective::from_products(dro::Group::control, z, 5.3);
  dro::SolverConfig cfg;
  cfg.mode = mode;
  for (auto _ : state) benchmark::DoNotOptimize(dro::solve_robust_value(obj, cfg).value);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DualSafeguarded(benchmark::State& state) { dual_solve(state, dro::SolverMode::safeguarded); }
void BM_DualAlgorithm1(benchmark::State& state) { dual_solve(state, dro::SolverMode::algorithm1); }

void BM_KnnKl(benchmark::State& state) {
  const Matrix p = gaussian(state.range(0), 20, 2), q = gaussian(state.range(0), 20, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kl::knn_kl_divergence(p, q, 5));
}

void BM_FitRegressor(benchmark::State& state, BaseKind kind) {
  const Matrix x = gaussian(state.range(0), 20, 4);
  const Vector y = x.col(0) + x.col(1).cwiseProduct(x.col(2));
  const auto spec = BaseModelSpec::of(kind);
  for (auto _ : state) benchmark::DoNotOptimize(fit_regressor(spec, x, y, std::nullopt, 5));
}

void BM_ScoreDrm(benchmark::State& state) {
  dgp::DgpConfig cfg;
  cfg.n = static_cast<std::size_t>(state.range(0));
  cfg.seed = 6;
  const auto ds = dgp::generate(cfg).dataset;
  const Vector cate = *ds.true_cate_oracle() * 0.9;
  for (auto _ : state) benchmark::DoNotOptimize(select::score_drm(cate, ds, 5.3, 5.3));
}

}  // namespace

BENCHMARK(BM_DualSafeguarded)->Arg(1000)->Arg(10000);
BENCHMARK(BM_DualAlgorithm1)->Arg(1000)->Arg(10000);
BENCHMARK(BM_KnnKl)->Arg(1000)->Arg(4000);
BENCHMARK_CAPTURE(BM_FitRegressor, ridge, BaseKind::ridge)->Arg(2000);
BENCHMARK_CAPTURE(BM_FitRegressor, boosted_trees, BaseKind::boosted_trees)->Arg(2000);
BENCHMARK(BM_ScoreDrm)->Arg(2000);
BENCHMARK_MAIN();
