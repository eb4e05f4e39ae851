#include "cateselect/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "cateselect/dataset.hpp"
#include "cateselect/io.hpp"

namespace cateselect::eval {

double oracle_pehe(const Vector& cate, const Vector& true_cate) {
  if (cate.size() != true_cate.size()) throw ValidationError("prediction and oracle lengths differ");
  if (cate.size() == 0) throw ValidationError("PEHE of an empty split");
  return std::sqrt((cate - true_cate).squaredNorm() / static_cast<double>(cate.size()));
}

namespace {

void check_pool(std::size_t chosen, const std::vector<double>& oracle) {
  if (oracle.empty()) throw ValidationError("empty pool");
  if (chosen >= oracle.size()) throw ValidationError("chosen index outside the pool");
}

}  // namespace

double regret(std::size_t chosen, const std::vector<double>& oracle) {
  check_pool(chosen, oracle);
  return oracle[chosen] - *std::min_element(oracle.begin(), oracle.end());
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& scores, const std::vector<double>& oracle) {
  if (scores.size() != oracle.size()) throw ValidationError("spearman inputs differ in length");
  if (scores.empty()) throw ValidationError("spearman of empty sequences");
  const auto a = average_ranks(scores);
  const auto b = average_ranks(oracle);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - mean) * (b[i] - mean);
    saa += (a[i] - mean) * (a[i] - mean);
    sbb += (b[i] - mean) * (b[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  if (a == b) return 1.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::size_t selected_rank(std::size_t chosen, const std::vector<double>& oracle) {
  check_pool(chosen, oracle);
  const auto better = std::count_if(oracle.begin(), oracle.end(), [&](double v) { return v < oracle[chosen]; });
  return static_cast<std::size_t>(better) + 1;
}

std::vector<std::size_t> rank_bin_edges(std::size_t pool_size) {
  if (pool_size == 0) throw ValidationError("empty pool");
  std::vector<std::size_t> edges;
  std::size_t prev = 1;
  for (std::size_t q : {3u, 11u, 19u, 27u}) {
    prev = std::max(prev, pool_size * q / 36);
    edges.push_back(std::min(prev, pool_size));
  }
  edges.push_back(pool_size);
  return edges;
}

std::size_t rank_bin(std::size_t rank, std::size_t pool_size) {
  if (rank < 1 || rank > pool_size) throw ValidationError("rank outside [1, J]");
  const auto edges = rank_bin_edges(pool_size);
  for (std::size_t b = 0; b < edges.size(); ++b)
    if (rank <= edges[b]) return b;
  return edges.size() - 1;
}

std::vector<std::string> rank_bin_labels(std::size_t pool_size) {
  const auto edges = rank_bin_edges(pool_size);
  std::vector<std::string> labels;
  std::size_t lo = 1;
  for (std::size_t hi : edges) {
    labels.push_back(lo <= hi ? "[" + std::to_string(lo) + "-" + std::to_string(hi) + "]" : "[]");
    lo = std::max(lo, hi + 1);
  }
  return labels;
}

std::vector<SelectorOutcome> evaluate_replication(std::size_t replication,
                                                  const std::vector<select::SelectorScore>& scores,
                                                  const std::vector<std::string>& candidate_ids,
                                                  const std::vector<double>& oracle) {
  if (candidate_ids.size() != oracle.size()) throw ValidationError("candidate ids and oracle values differ in length");
  std::vector<SelectorOutcome> out;
  for (const auto& s : scores) {
    if (s.scores.size() != oracle.size()) throw ValidationError("selector " + s.kind.name() + " scored a different pool");
    SelectorOutcome o;
    o.replication = replication;
    o.selector = s.kind.name();
    o.chosen = candidate_ids[s.chosen];
    o.regret = regret(s.chosen, oracle);
    o.spearman = spearman(s.scores, oracle);
    o.rank = selected_rank(s.chosen, oracle);
    o.bin = rank_bin(o.rank, oracle.size());
    out.push_back(std::move(o));
  }
  return out;
}

namespace {

struct MeanSd {
  double mean = 0.0, sd = 0.0;
};

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd r;
  if (v.empty()) return r;
  const double n = static_cast<double>(v.size());
  for (double x : v) r.mean += x;
  r.mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(ss / n);
  return r;
}

}  // namespace

std::vector<SummaryRow> aggregate(std::vector<SelectorOutcome> outcomes, const std::vector<std::string>& selector_order) {
  std::sort(outcomes.begin(), outcomes.end(), [](const SelectorOutcome& a, const SelectorOutcome& b) {
    return std::tie(a.selector, a.replication) < std::tie(b.selector, b.replication);
  });
  std::map<std::string, std::vector<const SelectorOutcome*>> groups;
  for (const auto& o : outcomes) groups[o.selector].push_back(&o);

  std::vector<std::string> names = selector_order;
  for (const auto& [name, _] : groups)
    if (std::find(names.begin(), names.end(), name) == names.end() && selector_order.empty()) names.push_back(name);

  std::vector<SummaryRow> rows;
  for (const auto& name : names) {
    auto it = groups.find(name);
    if (it == groups.end()) continue;
    SummaryRow row;
    row.selector = name;
    row.replications = it->second.size();
    std::vector<double> regrets, rhos;
    row.bin_percent.assign(kRankBins, 0.0);
    for (const auto* o : it->second) {
      regrets.push_back(o->regret);
      rhos.push_back(o->spearman);
      row.bin_percent.at(o->bin) += 1.0;
    }
    for (auto& p : row.bin_percent) p = 100.0 * p / static_cast<double>(row.replications);
    const auto r = mean_sd(regrets);
    const auto s = mean_sd(rhos);
    row.regret_mean = r.mean;
    row.regret_sd = r.sd;
    row.spearman_mean = s.mean;
    row.spearman_sd = s.sd;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "selector,regret_mean,regret_sd,spearman_mean,spearman_sd\n";
  for (const auto& r : rows)
    out << r.selector << ',' << format_double(r.regret_mean) << ',' << format_double(r.regret_sd) << ','
        << format_double(r.spearman_mean) << ',' << format_double(r.spearman_sd) << '\n';
  return out.str();
}

std::string format_rank_bins_csv(const std::vector<SummaryRow>& rows, std::size_t pool_size) {
  const auto labels = rank_bin_labels(pool_size);
  std::ostringstream out;
  out << "selector,bin,percent\n";
  for (const auto& r : rows)
    for (std::size_t b = 0; b < kRankBins; ++b)
      out << r.selector << ',' << labels[b] << ',' << format_double(r.bin_percent[b]) << '\n';
  return out.str();
}

std::string format_long_csv(const std::vector<SelectorOutcome>& outcomes) {
  std::ostringstream out;
  out << "replication,selector,metric,value\n";
  for (const auto& o : outcomes) {
    out << o.replication << ',' << o.selector << ",regret," << format_double(o.regret) << '\n';
    out << o.replication << ',' << o.selector << ",spearman," << format_double(o.spearman) << '\n';
    out << o.replication << ',' << o.selector << ",selected_rank," << o.rank << '\n';
  }
  return out.str();
}

std::vector<SelectorOutcome> parse_long_csv(const std::string& text, std::size_t pool_size) {
  const auto table = io::parse_csv(text);
  const auto c_rep = table.column("replication");
  const auto c_sel = table.column("selector");
  const auto c_metric = table.column("metric");
  const auto c_value = table.column("value");
  std::map<std::pair<std::size_t, std::string>, SelectorOutcome> merged;
  for (const auto& row : table.rows) {
    const auto r = static_cast<std::size_t>(std::stoull(row[c_rep]));
    const auto& metric = row[c_metric];
    const auto& value = row[c_value];
    auto& o = merged[{r, row[c_sel]}];
    o.replication = r;
    o.selector = row[c_sel];
    if (metric == "regret") {
      o.regret = parse_double(value);
    } else if (metric == "spearman") {
      o.spearman = parse_double(value);
    } else if (metric == "selected_rank") {
      o.rank = static_cast<std::size_t>(std::stoull(value));
      o.bin = rank_bin(o.rank, pool_size);
    } else {
      throw ValidationError("unknown metric '" + metric + "' in long CSV");
    }
  }
  std::vector<SelectorOutcome> out;
  for (auto& [_, o] : merged) out.push_back(std::move(o));
  return out;
}

}  // namespace cateselect::eval
