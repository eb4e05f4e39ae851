#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "cateselect/evaluation.hpp"
#include "cateselect/rng.hpp"
#include "oracles.hpp"

using namespace cateselect;
using namespace cateselect::eval;

TEST(Evaluation, OraclePehe) {
  Vector t(3);
  t << 1, 2, 3;
  EXPECT_EQ(oracle_pehe(t, t), 0.0);
  EXPECT_DOUBLE_EQ(oracle_pehe((t.array() + 1.5).matrix(), t), 1.5);
  Vector gaps(3);
  gaps << 0, 3, 4;
  EXPECT_NEAR(oracle_pehe(t + gaps, t), std::sqrt(25.0 / 3.0), 1e-12);
}

TEST(Evaluation, Regret) {
  EXPECT_EQ(regret(1, {2.0, 1.0, 3.0}), 0.0);
  EXPECT_DOUBLE_EQ(regret(1, {1.0, 2.5}), 1.5);
  Rng rng(1);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<double> oracle(18);
  for (auto& v : oracle) v = u(rng);
  for (std::size_t c = 0; c < 18; ++c) {
    double best = oracle[0];
    for (double v : oracle) best = v < best ? v : best;
    EXPECT_EQ(regret(c, oracle), oracle[c] - best);
    EXPECT_GE(regret(c, oracle), 0.0);
  }
}

TEST(Evaluation, SpearmanHandCases) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  EXPECT_NEAR(spearman({1, 2, 3}, {1, 3, 2}), 0.5, 1e-15);
  EXPECT_EQ(spearman({1, 1, 1}, {1, 2, 3}), 0.0);
}

TEST(Evaluation, SpearmanMatchesNaiveRanksWithTies) {
  Rng rng(2);
  std::uniform_int_distribution<int> u(0, 6);
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<double> a(20), b(20);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    EXPECT_EQ(average_ranks(a), oracle::naive_ranks(a));
    EXPECT_NEAR(spearman(a, b), oracle::pearson(oracle::naive_ranks(a), oracle::naive_ranks(b)), 1e-12);
    EXPECT_EQ(spearman(b, b), 1.0);
  }
}

TEST(Evaluation, SelectedRank) {
  EXPECT_EQ(selected_rank(2, {3.0, 1.0, 0.5}), 1u);
  EXPECT_EQ(selected_rank(0, {3.0, 1.0, 0.5}), 3u);
  EXPECT_EQ(selected_rank(1, {1.0, 1.0, 0.5}), 2u);
}

TEST(RankBins, EdgesAndExamples) {
  EXPECT_EQ(rank_bin_edges(36), (std::vector<std::size_t>{3, 11, 19, 27, 36}));
  EXPECT_EQ(rank_bin(1, 36), 0u);
  EXPECT_EQ(rank_bin(3, 36), 0u);
  EXPECT_EQ(rank_bin(4, 36), 1u);
  EXPECT_EQ(rank_bin(36, 36), 4u);
  EXPECT_EQ(rank_bin_edges(18), (std::vector<std::size_t>{1, 5, 9, 13, 18}));
  EXPECT_EQ(rank_bin(1, 18), 0u);
  EXPECT_EQ(rank_bin(2, 18), 1u);
  EXPECT_EQ(rank_bin_labels(36)[4], "[28-36]");
  EXPECT_EQ(rank_bin_labels(36)[0], "[1-3]");
  for (std::size_t J = 1; J <= 60; ++J) {
    const auto e = rank_bin_edges(J);
    EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
    EXPECT_EQ(e.back(), J);
    EXPECT_EQ(rank_bin(1, J), 0u);
  }
  EXPECT_THROW(rank_bin(0, 5), ValidationError);
  EXPECT_THROW(rank_bin(6, 5), ValidationError);
}

namespace {

SelectorOutcome outcome(std::size_t rep, const std::string& sel, double regret, double rho, std::size_t bin) {
  SelectorOutcome o;
  o.replication = rep;
  o.selector = sel;
  o.chosen = "T-ridge";
  o.regret = regret;
  o.spearman = rho;
  o.rank = bin * 4 + 1;
  o.bin = bin;
  return o;
}

}  // namespace

TEST(Aggregate, PopulationSdAndBins) {
  auto rows = aggregate({outcome(0, "drm", 0.0, 0.5, 0), outcome(1, "drm", 2.0, 1.0, 2)});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].regret_mean, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].regret_sd, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].spearman_mean, 0.75);
  EXPECT_DOUBLE_EQ(rows[0].spearman_sd, 0.25);
  EXPECT_EQ(rows[0].bin_percent, (std::vector<double>{50, 0, 50, 0, 0}));
  const auto single = aggregate({outcome(0, "x", 3.0, 0.1, 1)});
  EXPECT_EQ(single[0].regret_sd, 0.0);
  EXPECT_EQ(single[0].spearman_sd, 0.0);
}

TEST(Aggregate, OrderInvariantAndBinsSumTo100) {
  std::vector<SelectorOutcome> v;
  Rng rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t r = 0; r < 7; ++r)
    for (const char* s : {"drm", "random", "plug-T"}) v.push_back(outcome(r, s, u(rng), u(rng), r % 5));
  const auto a = aggregate(v, {"drm", "plug-T", "random"});
  std::shuffle(v.begin(), v.end(), rng);
  const auto b = aggregate(v, {"drm", "plug-T", "random"});
  EXPECT_EQ(format_summary_csv(a), format_summary_csv(b));
  EXPECT_EQ(a[1].selector, "plug-T");
  for (const auto& row : a) {
    EXPECT_NEAR(std::accumulate(row.bin_percent.begin(), row.bin_percent.end(), 0.0), 100.0, 1e-9);
    EXPECT_EQ(row.replications, 7u);
  }
}

TEST(Aggregate, LongCsvRoundTripAndRecomputation) {
  std::vector<SelectorOutcome> v;
  for (std::size_t r = 0; r < 3; ++r) v.push_back(outcome(r, "drm", 0.1 * r + 1.0 / 3.0, 0.2 * r, r));
  const std::string text = format_long_csv(v);
  const auto back = parse_long_csv(text, 36);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].regret, v[i].regret);
    EXPECT_EQ(back[i].spearman, v[i].spearman);
    EXPECT_EQ(back[i].rank, v[i].rank);
    EXPECT_EQ(back[i].bin, rank_bin(v[i].rank, 36));
  }
  const auto rows = aggregate(back);
  double mean = 0, sq = 0;
  for (const auto& o : v) mean += o.regret / 3.0;
  for (const auto& o : v) sq += (o.regret - mean) * (o.regret - mean) / 3.0;
  EXPECT_NEAR(rows[0].regret_mean, mean, 1e-15);
  EXPECT_NEAR(rows[0].regret_sd, std::sqrt(sq), 1e-15);
  EXPECT_EQ(format_summary_csv(rows).substr(0, 54), "selector,regret_mean,regret_sd,spearman_mean,spearman_");
}

TEST(EvaluateReplication, OracleSelectorIsPerfect) {
  const std::vector<double> oracle{0.8, 0.2, 0.5, 0.9};
  select::SelectorScore oracle_sel;
  oracle_sel.kind = {select::SelectorFamily::random};
  oracle_sel.scores = oracle;
  oracle_sel.chosen = 1;
  select::SelectorScore worst;
  worst.kind = {select::SelectorFamily::drm};
  worst.scores = {0, 1, 2, -1};
  worst.chosen = 3;
  const auto out = evaluate_replication(2, {oracle_sel, worst}, {"a", "b", "c", "d"}, oracle);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].regret, 0.0);
  EXPECT_EQ(out[0].spearman, 1.0);
  EXPECT_EQ(out[0].rank, 1u);
  EXPECT_EQ(out[0].bin, 0u);
  EXPECT_EQ(out[0].chosen, "b");
  EXPECT_DOUBLE_EQ(out[1].regret, 0.7);
  EXPECT_EQ(out[1].rank, 4u);
  EXPECT_EQ(out[1].replication, 2u);
}
