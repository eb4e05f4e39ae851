#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "cateselect/dataset.hpp"

using namespace cateselect;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cateselect_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ObservationalDataset toy(std::size_t n, bool oracle = true) {
  Matrix x(static_cast<Eigen::Index>(n), 2);
  std::vector<int> t(n);
  Vector y0(static_cast<Eigen::Index>(n)), y1(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    x(ii, 0) = 0.1 * static_cast<double>(i) + 1.0 / 3.0;
    x(ii, 1) = static_cast<double>(i % 7) - 2.5;
    t[i] = static_cast<int>(i % 2);
    y0[ii] = x(ii, 0) * 0.7;
    y1[ii] = y0[ii] + x(ii, 1);
    y[ii] = t[i] ? y1[ii] : y0[ii];
  }
  if (!oracle) return ObservationalDataset::create(x, t, y);
  return ObservationalDataset::create(x, t, y, y0, y1, (y1 - y0).eval());
}

}  // namespace

TEST(Dataset, ParsesThreeRowCsv) {
  const auto ds = parse_dataset("x1,x2,t,y\n1,2,0,0.5\n3,4,1,1.5\n5,6,0,2\n");
  EXPECT_EQ(ds.n(), 3u);
  EXPECT_EQ(ds.d(), 2u);
  EXPECT_EQ(ds.n_treated(), 1u);
  EXPECT_EQ(ds.covariates()(2, 1), 6.0);
  EXPECT_FALSE(ds.has_oracle());
}

TEST(Dataset, RejectsNonBinaryTreatmentNamingRow) {
  try {
    parse_dataset("x1,x2,t,y\n1,2,0,0.5\n3,4,2,1.5\n5,6,1,2\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("non-binary treatment at row 2"), std::string::npos) << e.what();
  }
}

TEST(Dataset, RejectsMissingColumnAndNonFinite) {
  EXPECT_THROW(parse_dataset("x1,x2,y\n1,2,0\n3,4,1\n"), ValidationError);
  EXPECT_THROW(parse_dataset("x1,t,y\n1,0,nan\n3,1,1\n"), ValidationError);
}

TEST(Dataset, RoundTripIsBitExact) {
  const auto dir = scratch("roundtrip");
  const auto ds = toy(25);
  write_dataset(ds, dir / "d.csv");
  const auto back = load_dataset(dir / "d.csv");
  EXPECT_EQ(back.covariates(), ds.covariates());
  EXPECT_EQ(back.treatment(), ds.treatment());
  EXPECT_EQ(back.outcome(), ds.outcome());
  ASSERT_TRUE(back.has_oracle());
  EXPECT_EQ(*back.y0_oracle(), *ds.y0_oracle());
  EXPECT_EQ(*back.y1_oracle(), *ds.y1_oracle());
  EXPECT_EQ(*back.true_cate_oracle(), *ds.true_cate_oracle());
}

TEST(Dataset, InvariantsEnforced) {
  Matrix x = Matrix::Zero(3, 1);
  Vector y = Vector::Zero(3);
  EXPECT_THROW(ObservationalDataset::create(x, {1, 1, 1}, y), ValidationError);
  EXPECT_THROW(ObservationalDataset::create(x, {0, 1}, y), ValidationError);
  EXPECT_THROW(ObservationalDataset::create(Matrix::Zero(1, 1), {1}, Vector::Zero(1)), ValidationError);
  Vector y0 = Vector::Zero(3), y1 = Vector::Ones(3);
  // Consistency: unit 1 is treated but reports y0.
  EXPECT_THROW(ObservationalDataset::create(x, {0, 1, 0}, y, y0, y1, (y1 - y0).eval()), ValidationError);
  EXPECT_NO_THROW(ObservationalDataset::create(x, {0, 1, 0}, Vector{{0.0, 1.0, 0.0}}, y0, y1, (y1 - y0).eval()));
}

TEST(Split, SizesFollowRatios) {
  const auto s = split_dataset(toy(100), {}, 7);
  EXPECT_EQ(s.train_idx.size(), 49u);
  EXPECT_EQ(s.valid_idx.size(), 21u);
  EXPECT_EQ(s.test_idx.size(), 30u);
}

TEST(Split, DeterministicForSeed) {
  const auto ds = toy(100);
  const auto a = split_dataset(ds, {}, 11), b = split_dataset(ds, {}, 11), c = split_dataset(ds, {}, 12);
  EXPECT_EQ(a.train_idx, b.train_idx);
  EXPECT_EQ(a.valid_idx, b.valid_idx);
  EXPECT_EQ(a.test_idx, b.test_idx);
  EXPECT_NE(a.train_idx, c.train_idx);
}

TEST(Split, DegenerateSplitIsAnError) {
  Matrix x = Matrix::Random(10, 1);
  std::vector<int> t(10, 1);
  t[0] = 0;  // a single control cannot appear in all three splits
  const auto ds = ObservationalDataset::create(x, t, Vector::Zero(10));
  EXPECT_THROW(split_dataset(ds, {}, 1), ValidationError);
  EXPECT_THROW(split_dataset(toy(10), {0.5, 0.5, 0.5}, 1), ValidationError);
}

TEST(Split, PartitionsIndicesExhaustively) {
  for (std::size_t n : {40u, 100u, 1000u, 10000u}) {
    const auto s = split_dataset(toy(n), {}, n);
    std::vector<int> seen(n, 0);
    for (auto* part : {&s.train_idx, &s.valid_idx, &s.test_idx}) {
      EXPECT_FALSE(part->empty());
      for (auto i : *part) {
        ASSERT_LT(i, n);
        ++seen[i];
      }
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; })) << "n=" << n;
  }
}

TEST(Split, FileRoundTrip) {
  const auto dir = scratch("split");
  const auto s = split_dataset(toy(50), {}, 3);
  write_split(s, dir / "split.csv");
  const auto back = read_split(dir / "split.csv", 50);
  auto sorted = [](IndexList v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  // The file records membership only; indices come back in row order.
  EXPECT_EQ(back.train_idx, sorted(s.train_idx));
  EXPECT_EQ(back.valid_idx, sorted(s.valid_idx));
  EXPECT_EQ(back.test_idx, sorted(s.test_idx));
}

TEST(Standardize, PopulationSdHandValues) {
  Matrix x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  const auto z = standardize_columns(x);
  const double a = std::sqrt(1.5);  // 1 / sqrt(2/3)
  EXPECT_NEAR(z.values(0, 0), -a, 1e-12);
  EXPECT_NEAR(z.values(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(z.values(2, 0), a, 1e-12);
  EXPECT_EQ(z.values.col(1), Vector::Zero(3));
}

TEST(Standardize, ReapplyingStatsAndInverse) {
  Matrix x = Matrix::Random(200, 4) * 30.0;
  x.col(2).array() += 1e3;
  const auto z = standardize_columns(x);
  EXPECT_NEAR(z.values.colwise().mean().cwiseAbs().maxCoeff(), 0.0, 1e-9);
  const Vector sd = (z.values.array().square().colwise().mean()).sqrt();
  EXPECT_NEAR((sd.array() - 1.0).abs().maxCoeff(), 0.0, 1e-9);
  EXPECT_EQ(standardize_columns(x, z.stats).values, z.values);
  const Matrix back = destandardize_columns(z.values, z.stats);
  EXPECT_LE(((back - x).array().abs() / x.array().abs().max(1.0)).maxCoeff(), 1e-9);
}

TEST(Predictions, RoundTripWithOptionalFactual) {
  const auto dir = scratch("pred");
  PredictionTable a{"T-ridge", Split::valid, {4, 1, 9}, Vector{{0.1, -2.0, 1e-300}}, Vector{{1.0, 2.0, 3.0}}};
  PredictionTable b{"T-ridge", Split::test, {0, 2}, Vector{{5.0, 1.0 / 3.0}}, std::nullopt};
  const std::vector<PredictionTable> tables{a, b};
  write_predictions(tables, dir / "p.csv");
  const auto back = read_predictions(dir / "p.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].row_index, a.row_index);
  EXPECT_EQ(back[0].cate_hat, a.cate_hat);
  ASSERT_TRUE(back[0].factual_hat);
  EXPECT_EQ(*back[0].factual_hat, *a.factual_hat);
  EXPECT_EQ(back[1].split, Split::test);
  EXPECT_EQ(back[1].cate_hat, b.cate_hat);
  EXPECT_FALSE(back[1].factual_hat);
}

TEST(Predictions, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -1e-308, 6.02214076e23, 0.0})
    EXPECT_EQ(parse_double(format_double(v)), v);
}
