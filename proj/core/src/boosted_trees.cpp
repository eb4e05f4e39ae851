#include <algorithm>
#include <cmath>
#include <numeric>

#include "cateselect/base_models.hpp"

namespace cateselect {

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

double leaf_score(double g, double h, double lambda) { return g * g / (h + lambda); }

}  // namespace

BoostedTrees::BoostedTrees(const Matrix& x, const Vector& y, const Vector& w,
                           const BoostedTreesParams& p, Loss loss) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  const double lambda = p.l2_leaf;

  // Presort each feature once; every level scans these orders.
  std::vector<std::vector<std::uint32_t>> order(d, std::vector<std::uint32_t>(n));
  for (std::size_t j = 0; j < d; ++j) {
    auto& o = order[j];
    std::iota(o.begin(), o.end(), 0u);
    const auto col = static_cast<Eigen::Index>(j);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x(static_cast<Eigen::Index>(a), col) < x(static_cast<Eigen::Index>(b), col);
    });
  }

  const double wsum = w.sum();
  const double ybar = w.dot(y) / wsum;
  if (loss == Loss::squared) {
    base_score_ = ybar;
  } else {
    const double pc = std::clamp(ybar, 1e-6, 1.0 - 1e-6);
    base_score_ = std::log(pc / (1.0 - pc));
  }

  Vector pred = Vector::Constant(x.rows(), base_score_);
  std::vector<double> g(n), h(n);
  std::vector<int> node_of(n);

  for (int round = 0; round < p.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      if (loss == Loss::squared) {
        g[i] = w[k] * (pred[k] - y[k]);
        h[i] = w[k];
      } else {
        const double z = pred[k];
        const double pr = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        g[i] = w[k] * (pr - y[k]);
        h[i] = w[k] * std::max(pr * (1.0 - pr), 1e-16);
      }
    }

    std::vector<Node> tree(1);
    std::vector<double> node_g(1, std::accumulate(g.begin(), g.end(), 0.0));
    std::vector<double> node_h(1, std::accumulate(h.begin(), h.end(), 0.0));
    std::fill(node_of.begin(), node_of.end(), 0);
    std::vector<int> frontier{0};

    for (int level = 0; level < p.depth && !frontier.empty(); ++level) {
      const std::size_t n_nodes = tree.size();
      std::vector<char> active(n_nodes, 0);
      for (int id : frontier) active[static_cast<std::size_t>(id)] = 1;
      std::vector<SplitCandidate> best(n_nodes);
      std::vector<double> gl(n_nodes), hl(n_nodes), last(n_nodes);
      std::vector<char> started(n_nodes);

      for (std::size_t j = 0; j < d; ++j) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(started.begin(), started.end(), 0);
        const auto col = static_cast<Eigen::Index>(j);
        for (std::uint32_t i : order[j]) {
          const auto node = static_cast<std::size_t>(node_of[i]);
          if (!active[node]) continue;
          const double v = x(static_cast<Eigen::Index>(i), col);
          if (started[node] && v > last[node]) {
            const double gr = node_g[node] - gl[node];
            const double hr = node_h[node] - hl[node];
            if (hl[node] >= p.min_child_weight && hr >= p.min_child_weight) {
              const double gain = leaf_score(gl[node], hl[node], lambda) + leaf_score(gr, hr, lambda) -
                                  leaf_score(node_g[node], node_h[node], lambda);
              if (gain > best[node].gain + 1e-12) {
                best[node] = {gain, static_cast<int>(j), 0.5 * (last[node] + v)};
                // Guard against midpoints that round onto the right value.
                if (!(best[node].threshold < v)) best[node].threshold = last[node];
              }
            }
          }
          started[node] = 1;
          gl[node] += g[i];
          hl[node] += h[i];
          last[node] = v;
        }
      }

      std::vector<int> next_frontier;
      for (int id : frontier) {
        const auto& b = best[static_cast<std::size_t>(id)];
        if (b.feature < 0) continue;
        const int left = static_cast<int>(tree.size());
        tree.push_back({});
        tree.push_back({});
        node_g.push_back(0.0);
        node_g.push_back(0.0);
        node_h.push_back(0.0);
        node_h.push_back(0.0);
        auto& node = tree[static_cast<std::size_t>(id)];
        node.feature = b.feature;
        node.threshold = b.threshold;
        node.left = left;
        node.right = left + 1;
        next_frontier.push_back(left);
        next_frontier.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& node = tree[static_cast<std::size_t>(node_of[i])];
        if (node.feature < 0) continue;
        const int child =
            x(static_cast<Eigen::Index>(i), node.feature) < node.threshold ? node.left : node.right;
        node_of[i] = child;
        node_g[static_cast<std::size_t>(child)] += g[i];
        node_h[static_cast<std::size_t>(child)] += h[i];
      }
      frontier = std::move(next_frontier);
    }

    bool any_split = false;
    for (std::size_t id = 0; id < tree.size(); ++id) {
      if (tree[id].feature >= 0) {
        any_split = true;
        continue;
      }
      tree[id].value = -p.learning_rate * node_g[id] / (node_h[id] + lambda);
    }
    for (std::size_t i = 0; i < n; ++i)
      pred[static_cast<Eigen::Index>(i)] += tree[static_cast<std::size_t>(node_of[i])].value;
    // A stump with a zero leaf changes nothing; later rounds would repeat it.
    if (!any_split && std::abs(tree[0].value) < 1e-15) break;
    trees_.push_back(std::move(tree));
  }
}

double BoostedTrees::predict_tree(const std::vector<Node>& tree, const Matrix& x, Eigen::Index row) const {
  std::size_t id = 0;
  while (tree[id].feature >= 0)
    id = static_cast<std::size_t>(x(row, tree[id].feature) < tree[id].threshold ? tree[id].left
                                                                                   : tree[id].right);
  return tree[id].value;
}

Vector BoostedTrees::decision_function(const Matrix& x) const {
  Vector out = Vector::Constant(x.rows(), base_score_);
  for (const auto& tree : trees_)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += predict_tree(tree, x, i);
  return out;
}

}  // namespace cateselect
