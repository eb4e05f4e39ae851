#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cateselect/types.hpp"

namespace cateselect {

// Probability outputs of every classifier are clipped to [p, 1 - p].
inline constexpr double kPropensityClip = 0.01;

enum class BaseKind { ridge, logistic, knn, boosted_trees, mlp };

std::string to_string(BaseKind k);
BaseKind base_kind_from_string(const std::string& s);

struct RidgeParams {
  double alpha = 1.0;
};

struct LogisticParams {
  double l2 = 1.0;  // penalty on slopes; intercept unpenalized
  int max_iter = 100;
};

struct KnnParams {
  int k = 5;
};

struct BoostedTreesParams {
  int rounds = 100;
  int depth = 3;
  double learning_rate = 0.1;
  double l2_leaf = 1.0;
  double min_child_weight = 1.0;
};

struct MlpParams {
  std::vector<int> hidden{64, 64};
  int epochs = 200;
  double learning_rate = 1e-3;
  int batch_size = 32;
};

// A base model family with its hyperparameters. Regression and
// classification map onto matching members of the family: ridge <-> logistic,
// k-NN average <-> k-NN vote, squared-loss <-> log-loss boosting, MLP with
// identity <-> sigmoid output.
struct BaseModelSpec {
  BaseKind kind = BaseKind::ridge;
  RidgeParams ridge;
  LogisticParams logistic;
  KnnParams knn;
  BoostedTreesParams trees;
  MlpParams mlp;

  static BaseModelSpec of(BaseKind kind) {
    BaseModelSpec s;
    s.kind = kind;
    return s;
  }
  std::string name() const { return to_string(kind); }
  // Throws ValidationError on out-of-range hyperparameters.
  void validate() const;
};

class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual Vector predict(const Matrix& x) const = 0;
  // Weighted mean squared error on the fitting data.
  double training_loss() const noexcept { return training_loss_; }

 protected:
  double training_loss_ = 0.0;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  // P(label = 1 | x), clipped to [kPropensityClip, 1 - kPropensityClip].
  virtual Vector predict_proba(const Matrix& x) const = 0;
  // Mean log loss on the fitting data.
  double training_loss() const noexcept { return training_loss_; }

 protected:
  double training_loss_ = 0.0;
};

using RegressorPtr = std::shared_ptr<const Regressor>;
using ClassifierPtr = std::shared_ptr<const Classifier>;

// Weighted least squares fit. Weights must be nonnegative with a positive
// sum. `seed` drives any internal randomness (MLP initialization and batch
// order); every other kind is deterministic.
RegressorPtr fit_regressor(const BaseModelSpec& spec, const Matrix& x, const Vector& y,
                           const std::optional<Vector>& weights = std::nullopt,
                           std::uint64_t seed = 0);

// Both classes must be present.
ClassifierPtr fit_classifier(const BaseModelSpec& spec, const Matrix& x,
                             const std::vector<int>& labels, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Concrete models, exposed for inspection in tests.

class RidgeRegressor final : public Regressor {
 public:
  RidgeRegressor(const Matrix& x, const Vector& y, const Vector& w, double alpha);
  Vector predict(const Matrix& x) const override;
  double intercept() const noexcept { return intercept_; }
  const Vector& coefficients() const noexcept { return beta_; }

 private:
  double intercept_ = 0.0;
  Vector beta_;
};

class LogisticClassifier final : public Classifier {
 public:
  LogisticClassifier(const Matrix& x, const std::vector<int>& labels, const LogisticParams& p);
  Vector predict_proba(const Matrix& x) const override;
  double intercept() const noexcept { return intercept_; }
  const Vector& coefficients() const noexcept { return beta_; }

 private:
  double intercept_ = 0.0;
  Vector beta_;
};

// Regression trees fitted by second-order gradient boosting with exact
// greedy splits over presorted features.
class BoostedTrees {
 public:
  enum class Loss { squared, logistic };

  BoostedTrees(const Matrix& x, const Vector& y, const Vector& w, const BoostedTreesParams& p,
               Loss loss);
  // Raw additive score (log-odds under the logistic loss).
  Vector decision_function(const Matrix& x) const;
  std::size_t tree_count() const noexcept { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  double predict_tree(const std::vector<Node>& tree, const Matrix& x, Eigen::Index row) const;

  double base_score_ = 0.0;
  std::vector<std::vector<Node>> trees_;
};

// Fully connected ReLU network on standardized inputs. Parameters live in one
// flat vector so the analytic gradient can be checked against finite
// differences.
class MlpNetwork {
 public:
  MlpNetwork(std::size_t inputs, std::vector<int> hidden);

  std::size_t parameter_count() const noexcept { return param_count_; }
  Vector initial_parameters(std::uint64_t seed) const;

  // Forward pass producing the raw output (pre-sigmoid for classifiers).
  Vector forward(const Vector& params, const Matrix& x) const;
  // Weighted mean loss (squared, or log loss on the sigmoid output when
  // `logistic`) and its gradient with respect to params.
  std::pair<double, Vector> loss_and_gradient(const Vector& params, const Matrix& x, const Vector& y,
                                              const Vector& w, bool logistic) const;

 private:
  std::vector<std::size_t> sizes_;  // inputs, hidden..., 1
  std::size_t param_count_ = 0;
};

}  // namespace cateselect
