#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "radaudit/csv.hpp"
#include "radaudit/error.hpp"
#include "radaudit/gen_quality.hpp"
#include "radaudit/random.hpp"

using namespace radaudit;

namespace {

Eigen::MatrixXd gaussian_rows(Rng& rng, int n, const Eigen::VectorXd& mean,
                              const Eigen::MatrixXd& mix) {
  Eigen::MatrixXd out(n, mean.size());
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(mean.size());
    for (auto& v : z) v = rng.normal();
    out.row(i) = (mean + mix * z).transpose();
  }
  return out;
}

}  // namespace

TEST(FitGaussian, UnbiasedCovariance) {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  const auto g = fit_gaussian(x);
  EXPECT_DOUBLE_EQ(g.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(g.covariance(0, 0), 1.0);
  EXPECT_THROW(fit_gaussian(Eigen::MatrixXd(1, 2)), InputError);
}

TEST(Frechet, ClosedFormForKnownGaussians) {
  GaussianSummary<double> a, b;
  a.mean = Eigen::Vector2d(0, 0);
  b.mean = Eigen::Vector2d(1, 2);
  a.covariance = Eigen::Vector2d(4, 1).asDiagonal();
  b.covariance = Eigen::Vector2d(1, 9).asDiagonal();
  // 5 + (4 + 1 - 4) + (1 + 9 - 6)
  EXPECT_NEAR(frechet_distance(a, b).distance, 10.0, 1e-12);
}

TEST(Frechet, WorksInFloat) {
  GaussianSummary<float> a, b;
  a.mean = Eigen::Vector2f(0, 0);
  b.mean = Eigen::Vector2f(3, 0);
  a.covariance = Eigen::Matrix2f::Identity();
  b.covariance = Eigen::Matrix2f::Identity();
  EXPECT_NEAR(frechet_distance(a, b).distance, 9.0, 1e-5);
}

TEST(Fid, SelfDistanceAndRotation) {
  Rng rng(2);
  Eigen::MatrixXd mix = Eigen::MatrixXd::Random(4, 4);
  const auto x = gaussian_rows(rng, 2000, Eigen::VectorXd::Zero(4), mix);
  const auto y = gaussian_rows(rng, 2000, Eigen::VectorXd::Constant(4, 0.5), mix);
  EXPECT_LT(fid(x, x).distance, 1e-9);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Random(4, 4));
  const Eigen::MatrixXd q = qr.householderQ();
  EXPECT_NEAR(fid(x * q, y * q).distance, fid(x, y).distance, 1e-8);
}

TEST(Fid, DimensionMismatch) {
  EXPECT_THROW(fid(Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(3, 3)), InputError);
}

TEST(Fid, RankDeficientCovarianceClampsQuietly) {
  Eigen::MatrixXd x(4, 3);
  x << 1, 1, 0, 2, 2, 0, 3, 3, 0, 4, 4, 0;
  const auto r = fid(x, x);
  EXPECT_LT(r.distance, 1e-9);
  EXPECT_FALSE(r.warning.has_value());
}

TEST(Cosine, Basics) {
  EXPECT_DOUBLE_EQ(embedding_cosine(Eigen::Vector2d(1, 0), Eigen::Vector2d(2, 0)), 1.0);
  EXPECT_NEAR(embedding_cosine(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 3)), 0.0, 1e-15);
  EXPECT_THROW(embedding_cosine(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 3)), InputError);
}

TEST(Diversity, MatchesDoubleLoop) {
  Rng rng(8);
  std::vector<std::vector<Eigen::VectorXd>> groups(6);
  for (auto& g : groups) {
    const int k = 2 + static_cast<int>(rng.below(4));
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd v(5);
      for (auto& e : v) e = rng.normal();
      g.push_back(v);
    }
  }
  auto cos = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return embedding_cosine(a, b);
  };
  const auto d = intra_prompt_diversity(groups, cos);
  EXPECT_NEAR(d.value, oracle::diversity(groups, cos), 1e-12);
  EXPECT_EQ(d.per_prompt.size(), groups.size());
}

TEST(Diversity, IdenticalSamplesScoreOne) {
  std::vector<std::vector<Eigen::VectorXd>> groups = {
      {Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)}};
  auto cos = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return embedding_cosine(a, b);
  };
  EXPECT_NEAR(intra_prompt_diversity(groups, cos).value, 1.0, 1e-15);
  groups[0].resize(1);
  EXPECT_THROW(intra_prompt_diversity(groups, cos), InputError);
}

TEST(Alignment, AccuraciesAndRmse) {
  std::vector<AlignmentRecord> records;
  for (int i = 0; i < 4; ++i) {
    AlignmentRecord r;
    r.target = {Sex::female, 50, Race::white};
    r.predicted = {i == 0 ? Sex::male : Sex::female, i < 2 ? Race::black : Race::white,
                   50.0 + (i % 2 ? 4.0 : -4.0)};
    r.disease_scores = Eigen::VectorXd::Constant(5, 0.1 * i);
    r.disease_labels = Eigen::VectorXi::Constant(5, i >= 2 ? 1 : 0);
    r.disease_labels[4] = 0;
    records.push_back(r);
  }
  const auto s = alignment_scores(records);
  EXPECT_DOUBLE_EQ(s.sex_accuracy, 0.75);
  EXPECT_DOUBLE_EQ(s.race_accuracy, 0.5);
  EXPECT_DOUBLE_EQ(s.age_rmse, 4.0);
  EXPECT_EQ(s.excluded, std::vector<std::string>{"Pneumothorax"});
  EXPECT_DOUBLE_EQ(*s.mean_disease_auroc, 1.0);
}

TEST(Checkpoint, StepCounts) {
  EXPECT_EQ(parse_step_count("10k (28 ep)"), 10000);
  EXPECT_EQ(parse_step_count("7.5k"), 7500);
  EXPECT_EQ(parse_step_count("2500"), 2500);
  EXPECT_FALSE(parse_step_count("real data").has_value());
  EXPECT_FALSE(parse_step_count("RoentGen").has_value());
}

TEST(Checkpoint, PublishedTableSelects10k) {
  std::vector<std::string> refs;
  const auto rows = parse_checkpoint_table(
      read_file(RADAUDIT_TEST_DATA "/checkpoints.csv"), "checkpoints.csv", &refs);
  EXPECT_EQ(rows.size(), 10u);
  EXPECT_EQ(refs, (std::vector<std::string>{"real data", "RoentGen"}));
  EXPECT_EQ(select_checkpoint(rows), "10k (28 ep)");
}

TEST(Checkpoint, TieBreaks) {
  std::vector<CheckpointRow> rows = {
      {"a", 5000, 0.800, 90.0, {}},
      {"b", 9000, 0.797, 80.0, {}},
      {"c", 7000, 0.796, 80.0, {}},
      {"d", 1000, 0.700, 10.0, {}},
  };
  EXPECT_EQ(select_checkpoint(rows), "c");
  EXPECT_EQ(select_checkpoint(rows, 0.0), "a");
  EXPECT_THROW(select_checkpoint({}), InputError);
}
