#include "cateselect/base_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

#include "cateselect/dataset.hpp"
#include "cateselect/rng.hpp"

namespace cateselect {

std::string to_string(BaseKind k) {
  switch (k) {
    case BaseKind::ridge: return "ridge";
    case BaseKind::logistic: return "logistic";
    case BaseKind::knn: return "knn";
    case BaseKind::boosted_trees: return "boosted_trees";
    case BaseKind::mlp: return "mlp";
  }
  return "?";
}

BaseKind base_kind_from_string(const std::string& s) {
  if (s == "ridge") return BaseKind::ridge;
  if (s == "logistic") return BaseKind::logistic;
  if (s == "knn") return BaseKind::knn;
  if (s == "boosted_trees") return BaseKind::boosted_trees;
  if (s == "mlp") return BaseKind::mlp;
  throw ValidationError("unknown base model '" + s + "'");
}

void BaseModelSpec::validate() const {
  if (!(ridge.alpha >= 0)) throw ValidationError("ridge alpha must be >= 0");
  if (!(logistic.l2 >= 0) || logistic.max_iter < 1) throw ValidationError("invalid logistic params");
  if (knn.k < 1) throw ValidationError("knn k must be >= 1");
  if (trees.rounds < 1) throw ValidationError("boosted_trees rounds must be >= 1");
  if (trees.depth < 1 || trees.depth > 8) throw ValidationError("boosted_trees depth must be in [1, 8]");
  if (!(trees.learning_rate > 0)) throw ValidationError("boosted_trees learning_rate must be > 0");
  if (!(trees.l2_leaf >= 0) || !(trees.min_child_weight >= 0))
    throw ValidationError("invalid boosted_trees regularization");
  if (mlp.hidden.empty()) throw ValidationError("mlp needs at least one hidden layer");
  for (int h : mlp.hidden)
    if (h < 1) throw ValidationError("mlp hidden sizes must be >= 1");
  if (mlp.epochs < 1 || mlp.batch_size < 1) throw ValidationError("mlp epochs and batch_size must be >= 1");
  if (!(mlp.learning_rate > 0)) throw ValidationError("mlp learning_rate must be > 0");
}

namespace {

double clip_probability(double p) { return std::clamp(p, kPropensityClip, 1.0 - kPropensityClip); }

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double weighted_mse(const Vector& pred, const Vector& y, const Vector& w) {
  return (w.array() * (pred - y).array().square()).sum() / w.sum();
}

double log_loss(const Vector& p, const std::vector<int>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double pi = p[static_cast<Eigen::Index>(i)];
    s -= labels[i] ? std::log(pi) : std::log(1.0 - pi);
  }
  return s / static_cast<double>(labels.size());
}

Vector labels_to_vector(const std::vector<int>& labels) {
  Vector v(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) v[static_cast<Eigen::Index>(i)] = labels[i];
  return v;
}

// Solves the SPD system, adding diagonal jitter when the factorization fails
// or yields non-finite values.
Vector solve_spd(Matrix a, const Vector& b) {
  double jitter = 0.0;
  const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() == Eigen::Success) {
      Vector x = ldlt.solve(b);
      if (x.allFinite() && ldlt.isPositive()) return x;
    }
    const double next = jitter == 0.0 ? 1e-12 * scale : jitter * 10.0;
    a.diagonal().array() += next - jitter;
    jitter = next;
  }
  throw RuntimeError("linear system is singular even after jitter");
}

// k nearest rows of `ref` to `query` by squared Euclidean distance; ties
// resolve to the lower reference index.
void nearest(const Matrix& ref, const Eigen::RowVectorXd& query, std::size_t k,
             std::vector<std::pair<double, std::size_t>>& out) {
  out.clear();
  for (Eigen::Index r = 0; r < ref.rows(); ++r) {
    const double dist = (ref.row(r) - query).squaredNorm();
    const std::pair<double, std::size_t> cand{dist, static_cast<std::size_t>(r)};
    if (out.size() < k) {
      out.push_back(cand);
      std::push_heap(out.begin(), out.end());
    } else if (cand < out.front()) {
      std::pop_heap(out.begin(), out.end());
      out.back() = cand;
      std::push_heap(out.begin(), out.end());
    }
  }
}

class KnnRegressor final : public Regressor {
 public:
  KnnRegressor(Matrix x, Vector y, Vector w, int k)
      : x_(std::move(x)), y_(std::move(y)), w_(std::move(w)),
        k_(std::min<std::size_t>(static_cast<std::size_t>(k), static_cast<std::size_t>(x_.rows()))) {
    training_loss_ = weighted_mse(predict(x_), y_, w_);
  }

  Vector predict(const Matrix& x) const override {
    Vector out(x.rows());
    std::vector<std::pair<double, std::size_t>> nn;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      nearest(x_, x.row(i), k_, nn);
      double num = 0.0, den = 0.0, plain = 0.0;
      for (const auto& [dist, j] : nn) {
        const auto jj = static_cast<Eigen::Index>(j);
        num += w_[jj] * y_[jj];
        den += w_[jj];
        plain += y_[jj];
      }
      out[i] = den > 0 ? num / den : plain / static_cast<double>(nn.size());
    }
    return out;
  }

 private:
  Matrix x_;
  Vector y_;
  Vector w_;
  std::size_t k_;
};

class KnnClassifier final : public Classifier {
 public:
  KnnClassifier(Matrix x, const std::vector<int>& labels, int k)
      : x_(std::move(x)), y_(labels_to_vector(labels)),
        k_(std::min<std::size_t>(static_cast<std::size_t>(k), static_cast<std::size_t>(x_.rows()))) {
    training_loss_ = log_loss(predict_proba(x_), labels);
  }

  Vector predict_proba(const Matrix& x) const override {
    Vector out(x.rows());
    std::vector<std::pair<double, std::size_t>> nn;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      nearest(x_, x.row(i), k_, nn);
      double s = 0.0;
      for (const auto& [dist, j] : nn) s += y_[static_cast<Eigen::Index>(j)];
      out[i] = clip_probability(s / static_cast<double>(nn.size()));
    }
    return out;
  }

 private:
  Matrix x_;
  Vector y_;
  std::size_t k_;
};

class TreeRegressor final : public Regressor {
 public:
  TreeRegressor(const Matrix& x, const Vector& y, const Vector& w, const BoostedTreesParams& p)
      : model_(x, y, w, p, BoostedTrees::Loss::squared) {
    training_loss_ = weighted_mse(predict(x), y, w);
  }
  Vector predict(const Matrix& x) const override { return model_.decision_function(x); }

 private:
  BoostedTrees model_;
};

class TreeClassifier final : public Classifier {
 public:
  TreeClassifier(const Matrix& x, const std::vector<int>& labels, const BoostedTreesParams& p)
      : model_(x, labels_to_vector(labels), Vector::Ones(x.rows()), p, BoostedTrees::Loss::logistic) {
    training_loss_ = log_loss(predict_proba(x), labels);
  }
  Vector predict_proba(const Matrix& x) const override {
    Vector s = model_.decision_function(x);
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = clip_probability(sigmoid(s[i]));
    return s;
  }

 private:
  BoostedTrees model_;
};

// Trains an MlpNetwork with Adam on standardized inputs (and standardized
// targets for regression).
class MlpModel {
 public:
  MlpModel(const Matrix& x, const Vector& y, const Vector& w, const MlpParams& p, bool logistic,
           std::uint64_t seed)
      : net_(static_cast<std::size_t>(x.cols()), p.hidden), logistic_(logistic) {
    auto z = standardize_columns(x);
    x_stats_ = z.stats;
    Vector target = y;
    if (!logistic) {
      const double wsum = w.sum();
      y_mean_ = (w.array() * y.array()).sum() / wsum;
      const double var = (w.array() * (y.array() - y_mean_).square()).sum() / wsum;
      y_scale_ = std::sqrt(var);
      target = y_scale_ > 0 ? Vector((y.array() - y_mean_) / y_scale_) : Vector(Vector::Zero(y.size()));
    }
    params_ = net_.initial_parameters(seed);

    const auto n = static_cast<std::size_t>(x.rows());
    const auto batch = std::min<std::size_t>(static_cast<std::size_t>(p.batch_size), n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {17}));
    Vector m = Vector::Zero(params_.size()), v = Vector::Zero(params_.size());
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    long step = 0;
    Matrix xb;
    Vector yb, wb;
    for (int epoch = 0; epoch < p.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t len = std::min(batch, n - start);
        std::span<const std::size_t> rows(order.data() + start, len);
        xb = select_rows(z.values, rows);
        yb = select_rows(target, rows);
        wb = select_rows(w, rows);
        if (wb.sum() <= 0) continue;
        auto [loss, grad] = net_.loss_and_gradient(params_, xb, yb, wb, logistic_);
        ++step;
        m = b1 * m + (1 - b1) * grad;
        v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1 - std::pow(b2, static_cast<double>(step));
        params_.array() -= p.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      }
    }
  }

  Vector raw(const Matrix& x) const {
    return net_.forward(params_, standardize_columns(x, x_stats_).values);
  }
  Vector regression(const Matrix& x) const { return (raw(x).array() * y_scale_ + y_mean_).matrix(); }

 private:
  MlpNetwork net_;
  bool logistic_;
  StandardizationStats x_stats_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  Vector params_;
};

class MlpRegressor final : public Regressor {
 public:
  MlpRegressor(const Matrix& x, const Vector& y, const Vector& w, const MlpParams& p, std::uint64_t seed)
      : model_(x, y, w, p, false, seed) {
    training_loss_ = weighted_mse(predict(x), y, w);
  }
  Vector predict(const Matrix& x) const override { return model_.regression(x); }

 private:
  MlpModel model_;
};

class MlpClassifier final : public Classifier {
 public:
  MlpClassifier(const Matrix& x, const std::vector<int>& labels, const MlpParams& p, std::uint64_t seed)
      : model_(x, labels_to_vector(labels), Vector::Ones(x.rows()), p, true, seed) {
    training_loss_ = log_loss(predict_proba(x), labels);
  }
  Vector predict_proba(const Matrix& x) const override {
    Vector s = model_.raw(x);
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = clip_probability(sigmoid(s[i]));
    return s;
  }

 private:
  MlpModel model_;
};

}  // namespace

// ---------------------------------------------------------------------------

RidgeRegressor::RidgeRegressor(const Matrix& x, const Vector& y, const Vector& w, double alpha) {
  // Weighted centering leaves the intercept out of the penalty.
  const double wsum = w.sum();
  const Eigen::RowVectorXd x_mean = (w.transpose() * x) / wsum;
  const double y_mean = w.dot(y) / wsum;
  const Matrix xc = x.rowwise() - x_mean;
  const Vector yc = y.array() - y_mean;
  Matrix gram = xc.transpose() * w.asDiagonal() * xc;
  gram.diagonal().array() += alpha;
  beta_ = solve_spd(std::move(gram), xc.transpose() * (w.asDiagonal() * yc));
  intercept_ = y_mean - x_mean.dot(beta_);
  training_loss_ = weighted_mse(predict(x), y, w);
}

Vector RidgeRegressor::predict(const Matrix& x) const {
  return (x * beta_).array() + intercept_;
}

LogisticClassifier::LogisticClassifier(const Matrix& x, const std::vector<int>& labels,
                                       const LogisticParams& p) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const Vector y = labels_to_vector(labels);
  // Augmented design [1, X]; penalty skips the intercept column.
  Matrix a(n, d + 1);
  a.col(0).setOnes();
  a.rightCols(d) = x;
  Vector theta = Vector::Zero(d + 1);
  const double base = y.mean();
  theta[0] = std::log(base / (1.0 - base));
  Vector pen = Vector::Constant(d + 1, p.l2);
  pen[0] = 0.0;

  auto objective = [&](const Vector& th) {
    const Vector z = a * th;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + e^z) - y z, computed stably
      const double zi = z[i];
      s += (zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) - y[i] * zi;
    }
    return s + 0.5 * (pen.array() * th.array().square()).sum();
  };

  double f = objective(theta);
  for (int iter = 0; iter < p.max_iter; ++iter) {
    const Vector z = a * theta;
    Vector prob(n), h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(z[i]);
      h[i] = std::max(prob[i] * (1 - prob[i]), 1e-12);
    }
    const Vector grad = a.transpose() * (prob - y) + pen.cwiseProduct(theta);
    Matrix hess = a.transpose() * h.asDiagonal() * a;
    hess.diagonal() += pen;
    const Vector step = solve_spd(std::move(hess), grad);
    // Backtracking keeps Newton monotone on nearly separable data.
    double t = 1.0;
    Vector next = theta - step;
    double fn = objective(next);
    while (fn > f && t > 1e-8) {
      t *= 0.5;
      next = theta - t * step;
      fn = objective(next);
    }
    const double change = std::abs(f - fn);
    theta = next;
    f = fn;
    if (change < 1e-12 * (1.0 + std::abs(f))) break;
  }
  intercept_ = theta[0];
  beta_ = theta.tail(d);
  training_loss_ = log_loss(predict_proba(x), labels);
}

Vector LogisticClassifier::predict_proba(const Matrix& x) const {
  Vector z = (x * beta_).array() + intercept_;
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = clip_probability(sigmoid(z[i]));
  return z;
}

// ---------------------------------------------------------------------------

RegressorPtr fit_regressor(const BaseModelSpec& spec, const Matrix& x, const Vector& y,
                           const std::optional<Vector>& weights, std::uint64_t seed) {
  spec.validate();
  if (x.rows() == 0) throw ValidationError("cannot fit a regressor on empty data");
  if (x.rows() != y.size()) throw ValidationError("regressor rows and targets differ in length");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("non-finite regression inputs");
  Vector w = weights ? *weights : Vector::Ones(x.rows());
  if (w.size() != x.rows()) throw ValidationError("sample weights length mismatch");
  if ((w.array() < 0).any() || !w.allFinite()) throw ValidationError("sample weights must be nonnegative");
  if (!(w.sum() > 0)) throw ValidationError("sample weights must have a positive sum");

  switch (spec.kind) {
    case BaseKind::ridge:
      return std::make_shared<RidgeRegressor>(x, y, w, spec.ridge.alpha);
    case BaseKind::knn:
      return std::make_shared<KnnRegressor>(x, y, w, spec.knn.k);
    case BaseKind::boosted_trees: {
      // Mean-one weights keep l2_leaf and min_child_weight on a per-sample scale.
      const Vector wn = w * (static_cast<double>(w.size()) / w.sum());
      return std::make_shared<TreeRegressor>(x, y, wn, spec.trees);
    }
    case BaseKind::mlp:
      return std::make_shared<MlpRegressor>(x, y, w, spec.mlp, seed);
    case BaseKind::logistic:
      throw ValidationError("logistic is a classifier; use ridge for regression");
  }
  throw ValidationError("unsupported base model");
}

ClassifierPtr fit_classifier(const BaseModelSpec& spec, const Matrix& x, const std::vector<int>& labels,
                             std::uint64_t seed) {
  spec.validate();
  if (x.rows() == 0) throw ValidationError("cannot fit a classifier on empty data");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw ValidationError("classifier rows and labels differ in length");
  std::size_t ones = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("classifier labels must be binary");
    ones += static_cast<std::size_t>(l);
  }
  if (ones == 0 || ones == labels.size())
    throw ValidationError("classifier needs both classes (overlap violated)");

  switch (spec.kind) {
    case BaseKind::ridge:
    case BaseKind::logistic:
      return std::make_shared<LogisticClassifier>(x, labels, spec.logistic);
    case BaseKind::knn:
      return std::make_shared<KnnClassifier>(x, labels, spec.knn.k);
    case BaseKind::boosted_trees:
      return std::make_shared<TreeClassifier>(x, labels, spec.trees);
    case BaseKind::mlp:
      return std::make_shared<MlpClassifier>(x, labels, spec.mlp, seed);
  }
  throw ValidationError("unsupported base model");
}

}  // namespace cateselect
