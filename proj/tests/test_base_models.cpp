#include <gtest/gtest.h>

#include <cmath>

#include "cateselect/base_models.hpp"
#include "cateselect/rng.hpp"
#include "oracles.hpp"

using namespace cateselect;

namespace {

Matrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = z(rng);
  return x;
}

const BaseKind kAllKinds[] = {BaseKind::ridge, BaseKind::knn, BaseKind::boosted_trees, BaseKind::mlp};

}  // namespace

TEST(Ridge, RecoversExactSlope) {
  Matrix x(20, 1);
  for (int i = 0; i < 20; ++i) x(i, 0) = i - 9.5;
  auto spec = BaseModelSpec::of(BaseKind::ridge);
  spec.ridge.alpha = 1e-8;
  const auto m = fit_regressor(spec, x, (2.0 * x.col(0)).eval());
  const auto& ridge = dynamic_cast<const RidgeRegressor&>(*m);
  EXPECT_NEAR(ridge.coefficients()[0], 2.0, 1e-4);
  EXPECT_NEAR(ridge.intercept(), 0.0, 1e-6);
}

TEST(Ridge, MatchesQrOracle) {
  const Matrix x = random_matrix(200, 6, 1);
  Vector y = x * Vector::LinSpaced(6, -1, 2) + random_matrix(200, 1, 2).col(0);
  y.array() += 4.0;
  for (double alpha : {1e-10, 0.5, 3.0}) {
    auto spec = BaseModelSpec::of(BaseKind::ridge);
    spec.ridge.alpha = alpha;
    const auto model = fit_regressor(spec, x, y);
    const auto& r = dynamic_cast<const RidgeRegressor&>(*model);
    const Vector ref = oracle::ridge_qr(x, y, alpha);
    EXPECT_NEAR(r.intercept(), ref[0], 1e-6 * std::abs(ref[0]));
    EXPECT_LE((r.coefficients() - ref.tail(6)).norm(), 1e-6 * ref.tail(6).norm()) << alpha;
  }
}

TEST(Ridge, IntegerWeightsEqualReplicatedRows) {
  const Matrix x = random_matrix(30, 3, 3);
  const Vector y = random_matrix(30, 1, 4).col(0);
  Vector w(30);
  for (int i = 0; i < 30; ++i) w[i] = i % 3;
  Matrix xr(static_cast<Eigen::Index>(w.sum()), 3);
  Vector yr(xr.rows());
  Eigen::Index r = 0;
  for (int i = 0; i < 30; ++i)
    for (int c = 0; c < w[i]; ++c, ++r) {
      xr.row(r) = x.row(i);
      yr[r] = y[i];
    }
  const auto spec = BaseModelSpec::of(BaseKind::ridge);
  const Vector a = fit_regressor(spec, x, y, w)->predict(x);
  const Vector b = fit_regressor(spec, xr, yr)->predict(x);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Regressors, ConstantTargetReproduced) {
  const Matrix x = random_matrix(100, 3, 5);
  const Vector y = Vector::Constant(100, 2.5);
  for (auto kind : kAllKinds) {
    const double tol = kind == BaseKind::mlp || kind == BaseKind::boosted_trees ? 1e-3 : 1e-9;
    const Vector p = fit_regressor(BaseModelSpec::of(kind), x, y, std::nullopt, 7)->predict(x);
    EXPECT_LE((p.array() - 2.5).abs().maxCoeff(), tol) << to_string(kind);
  }
}

TEST(Regressors, OneNearestNeighbourInterpolates) {
  const Matrix x = random_matrix(40, 2, 6);
  const Vector y = random_matrix(40, 1, 7).col(0);
  auto spec = BaseModelSpec::of(BaseKind::knn);
  spec.knn.k = 1;
  EXPECT_EQ(fit_regressor(spec, x, y)->predict(x), y);
}

TEST(Regressors, DeterministicGivenSeed) {
  const Matrix x = random_matrix(80, 4, 8);
  const Vector y = x.rowwise().sum() + x.col(0).cwiseAbs();
  for (auto kind : kAllKinds) {
    const auto spec = BaseModelSpec::of(kind);
    EXPECT_EQ(fit_regressor(spec, x, y, std::nullopt, 3)->predict(x),
              fit_regressor(spec, x, y, std::nullopt, 3)->predict(x))
        << to_string(kind);
  }
}

TEST(Regressors, RejectsBadInput) {
  const auto spec = BaseModelSpec::of(BaseKind::ridge);
  EXPECT_THROW(fit_regressor(spec, Matrix(0, 2), Vector(0)), ValidationError);
  EXPECT_THROW(fit_regressor(spec, Matrix::Zero(3, 1), Vector::Zero(4)), ValidationError);
  EXPECT_THROW(fit_regressor(spec, Matrix::Zero(3, 1), Vector::Zero(3), Vector{{1.0, -1.0, 1.0}}), ValidationError);
}

TEST(Regressors, SingularDesignHandled) {
  Matrix x(10, 2);
  x.col(0) = Vector::LinSpaced(10, 0, 1);
  x.col(1) = x.col(0);
  auto spec = BaseModelSpec::of(BaseKind::ridge);
  spec.ridge.alpha = 0.0;
  const Vector p = fit_regressor(spec, x, (3.0 * x.col(0)).eval())->predict(x);
  EXPECT_TRUE(p.allFinite());
  EXPECT_LE((p - 3.0 * x.col(0)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Classifiers, BalancedNoiseGivesHalf) {
  const Matrix x = random_matrix(2000, 2, 9);
  std::vector<int> labels(2000);
  for (int i = 0; i < 2000; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  const Matrix probe = random_matrix(200, 2, 10);
  for (auto kind : {BaseKind::ridge, BaseKind::boosted_trees, BaseKind::mlp}) {
    const Vector p = fit_classifier(BaseModelSpec::of(kind), x, labels, 1)->predict_proba(probe);
    EXPECT_NEAR(p.mean(), 0.5, 0.05) << to_string(kind);
  }
}

TEST(Classifiers, SeparableDataClipped) {
  Matrix x(40, 1);
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = i < 20 ? -5.0 - i : 5.0 + i;
    labels[static_cast<std::size_t>(i)] = i >= 20;
  }
  for (auto kind : kAllKinds) {
    auto spec = BaseModelSpec::of(kind);
    spec.logistic.l2 = 1e-6;
    const Vector p = fit_classifier(spec, x, labels, 2)->predict_proba(x);
    EXPECT_GE(p.minCoeff(), kPropensityClip) << to_string(kind);
    EXPECT_LE(p.maxCoeff(), 1.0 - kPropensityClip) << to_string(kind);
  }
  auto spec = BaseModelSpec::of(BaseKind::ridge);
  spec.logistic.l2 = 1e-6;
  const Vector p = fit_classifier(spec, x, labels)->predict_proba(x);
  EXPECT_DOUBLE_EQ(p.maxCoeff(), 0.99);
  EXPECT_DOUBLE_EQ(p.minCoeff(), 0.01);
}

TEST(Classifiers, SingleClassRejected) {
  EXPECT_THROW(fit_classifier(BaseModelSpec::of(BaseKind::ridge), Matrix::Zero(4, 1), {1, 1, 1, 1}),
               ValidationError);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  const MlpNetwork net(3, {4, 3});
  const Matrix x = random_matrix(5, 3, 11);
  const Vector y = random_matrix(5, 1, 12).col(0);
  const Vector w{{1.0, 0.5, 2.0, 1.0, 1.5}};
  const Vector params = net.initial_parameters(13);
  for (bool logistic : {false, true}) {
    const Vector target = logistic ? (y.array() > 0).cast<double>().matrix() : y;
    const Vector grad = net.loss_and_gradient(params, x, target, w, logistic).second;
    double worst = 0;
    for (Eigen::Index k = 0; k < params.size(); ++k) {
      auto f = [&](double v) {
        Vector p = params;
        p[k] = v;
        return net.loss_and_gradient(p, x, target, w, logistic).first;
      };
      const double num = oracle::derivative(f, params[k], 1e-4);
      const double scale = std::max(std::abs(num), 1e-6);
      worst = std::max(worst, std::abs(grad[k] - num) / scale);
    }
    EXPECT_LE(worst, 1e-4) << (logistic ? "logistic" : "squared");
  }
}

TEST(BaseSpec, ValidatesHyperparameters) {
  auto spec = BaseModelSpec::of(BaseKind::knn);
  spec.knn.k = 0;
  EXPECT_THROW(spec.validate(), ValidationError);
  spec = BaseModelSpec::of(BaseKind::boosted_trees);
  spec.trees.depth = 9;
  EXPECT_THROW(spec.validate(), ValidationError);
  spec.trees.depth = 3;
  spec.trees.learning_rate = 0;
  EXPECT_THROW(spec.validate(), ValidationError);
  EXPECT_EQ(base_kind_from_string("boosted_trees"), BaseKind::boosted_trees);
  EXPECT_THROW(base_kind_from_string("svm"), ValidationError);
}
