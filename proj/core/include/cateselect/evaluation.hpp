#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cateselect/selectors.hpp"
#include "cateselect/types.hpp"

namespace cateselect::eval {

// sqrt(mean((tau_hat - tau_true)^2)).
double oracle_pehe(const Vector& cate, const Vector& true_cate);

// oracle[chosen] - min(oracle).
double regret(std::size_t chosen, const std::vector<double>& oracle);

// 1-based ranks, ties share their average rank.
std::vector<double> average_ranks(const std::vector<double>& values);

// Pearson correlation of average ranks. Defined as 0 when either sequence
// is constant.
double spearman(const std::vector<double>& scores, const std::vector<double>& oracle);

// 1 + number of candidates with strictly smaller oracle value.
std::size_t selected_rank(std::size_t chosen, const std::vector<double>& oracle);

inline constexpr std::size_t kRankBins = 5;

// Upper edges floor(J * {3, 11, 19, 27} / 36) then J, each at least 1 and
// non-decreasing. J = 36 gives 3, 11, 19, 27, 36.
std::vector<std::size_t> rank_bin_edges(std::size_t pool_size);
std::size_t rank_bin(std::size_t rank, std::size_t pool_size);
// "[1-3]", "[4-11]", ...; an empty bin is labelled "[]".
std::vector<std::string> rank_bin_labels(std::size_t pool_size);

struct SelectorOutcome {
  std::size_t replication = 0;
  std::string selector;
  std::string chosen;
  double regret = 0.0;
  double spearman = 0.0;
  std::size_t rank = 1;
  std::size_t bin = 0;
};

// `oracle` holds each candidate's test PEHE in pool order.
std::vector<SelectorOutcome> evaluate_replication(std::size_t replication,
                                                  const std::vector<select::SelectorScore>& scores,
                                                  const std::vector<std::string>& candidate_ids,
                                                  const std::vector<double>& oracle);

struct SummaryRow {
  std::string selector;
  std::size_t replications = 0;
  double regret_mean = 0.0;
  double regret_sd = 0.0;  // population sd
  double spearman_mean = 0.0;
  double spearman_sd = 0.0;
  std::vector<double> bin_percent;  // kRankBins entries summing to 100
};

// Groups outcomes by selector. Rows follow `selector_order` when given,
// otherwise selector names sorted. The result does not depend on the order
// of `outcomes`.
std::vector<SummaryRow> aggregate(std::vector<SelectorOutcome> outcomes,
                                  const std::vector<std::string>& selector_order = {});

std::string format_summary_csv(const std::vector<SummaryRow>& rows);
std::string format_rank_bins_csv(const std::vector<SummaryRow>& rows, std::size_t pool_size);
// replication,selector,metric,value with metrics regret, spearman, selected_rank.
std::string format_long_csv(const std::vector<SelectorOutcome>& outcomes);
std::vector<SelectorOutcome> parse_long_csv(const std::string& text, std::size_t pool_size);

}  // namespace cateselect::eval
