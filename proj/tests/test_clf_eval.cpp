#include <gtest/gtest.h>

#include <vector>

#include "oracles.hpp"
#include "radaudit/clf_eval.hpp"
#include "radaudit/error.hpp"
#include "radaudit/random.hpp"

using namespace radaudit;

namespace {

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
Eigen::VectorXi ivec(const std::vector<int>& v) {
  return Eigen::Map<const Eigen::VectorXi>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct Fixture {
  std::vector<double> s;
  std::vector<int> y;
};

// Scores on a coarse grid so ties are common.
Fixture random_fixture(Rng& rng, int n) {
  Fixture f;
  for (int i = 0; i < n; ++i) {
    f.s.push_back(static_cast<double>(rng.below(20)) / 20.0);
    f.y.push_back(rng.bernoulli(0.3) ? 1 : 0);
  }
  f.y[0] = 1;
  f.y[1] = 0;
  return f;
}

}  // namespace

TEST(BinaryAuroc, PerfectAndInverted) {
  EXPECT_EQ(binary_auroc(vec({0.1, 0.2, 0.8, 0.9}), ivec({0, 0, 1, 1})), 1.0);
  EXPECT_EQ(binary_auroc(vec({0.9, 0.8, 0.2, 0.1}), ivec({0, 0, 1, 1})), 0.0);
}

TEST(BinaryAuroc, AllTiedIsHalf) {
  EXPECT_EQ(binary_auroc(vec({0.5, 0.5, 0.5, 0.5}), ivec({0, 1, 0, 1})), 0.5);
}

TEST(BinaryAuroc, SingleClassIsUndefined) {
  EXPECT_THROW(binary_auroc(vec({0.1, 0.4}), ivec({1, 1})), UndefinedMetricError);
  EXPECT_THROW(binary_auroc(vec({0.1, 0.4}), ivec({0, 0})), UndefinedMetricError);
}

TEST(BinaryAuroc, MatchesPairwiseOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_fixture(rng, 2 + static_cast<int>(rng.below(120)));
    EXPECT_EQ(binary_auroc(vec(f.s), ivec(f.y)), oracle::auroc(f.s, f.y)) << trial;
  }
}

TEST(BinaryAuroc, InvariantUnderMonotoneTransform) {
  Rng rng(3);
  const auto f = random_fixture(rng, 80);
  Eigen::VectorXd s = vec(f.s);
  const double base = binary_auroc(s, ivec(f.y));
  EXPECT_EQ(binary_auroc(s.array().exp().matrix(), ivec(f.y)), base);
  EXPECT_EQ(binary_auroc((3.0 * s.array() - 1.0).matrix(), ivec(f.y)), base);
}

TEST(AveragePrecision, HandExample) {
  // cut 0.9: P=1 R=1/2; cut 0.8: P=1/2 R=1/2; cut 0.7: P=2/3 R=1
  const double ap = average_precision(vec({0.9, 0.8, 0.7}), ivec({1, 0, 1}));
  EXPECT_NEAR(ap, 0.5 * 1.0 + 0.5 * (2.0 / 3.0), 1e-15);
}

TEST(AveragePrecision, TiesFormOneCutPoint) {
  EXPECT_NEAR(average_precision(vec({0.5, 0.5}), ivec({1, 0})), 0.5, 1e-15);
}

TEST(AveragePrecision, NoPositivesUndefined) {
  EXPECT_THROW(average_precision(vec({0.5, 0.2}), ivec({0, 0})), UndefinedMetricError);
}

TEST(AveragePrecision, MatchesCutPointOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_fixture(rng, 2 + static_cast<int>(rng.below(150)));
    EXPECT_NEAR(average_precision(vec(f.s), ivec(f.y)), oracle::average_precision(f.s, f.y),
                1e-12);
  }
}

TEST(F1Threshold, MatchesExhaustiveScan) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_fixture(rng, 2 + static_cast<int>(rng.below(100)));
    EXPECT_EQ(f1_optimal_threshold(vec(f.s), ivec(f.y)), oracle::f1_threshold(f.s, f.y));
  }
}

TEST(F1Threshold, TieGoesToSmallestThreshold) {
  // t=0.9 gives F1 = 2/3 (tp1 fn1); t=0.4 gives tp2 fp2 -> F1 = 2/3 as well.
  const auto t = f1_optimal_threshold(vec({0.9, 0.5, 0.45, 0.4}), ivec({1, 0, 0, 1}));
  EXPECT_EQ(t, 0.4);
}

TEST(FalsePositiveRate, Basic) {
  EXPECT_DOUBLE_EQ(false_positive_rate(ivec({1, 0, 1, 1}), ivec({0, 0, 1, 0})), 2.0 / 3.0);
  EXPECT_THROW(false_positive_rate(ivec({1}), ivec({1})), UndefinedMetricError);
}

TEST(DefinedEntries, DropsMissing) {
  auto [s, y] = defined_entries(vec({0.1, 0.2, 0.3}), ivec({1, -1, 0}));
  ASSERT_EQ(s.size(), 2);
  EXPECT_EQ(s[1], 0.3);
  EXPECT_EQ(y[1], 0);
}

TEST(MacroAuroc, ExcludesSingleClassLabels) {
  LabelSchema schema({"A", "B", "C"});
  Eigen::MatrixXd scores(4, 3);
  scores << 0.9, 0.1, 0.5,
            0.8, 0.2, 0.5,
            0.2, 0.3, 0.5,
            0.1, 0.4, 0.5;
  Eigen::MatrixXi labels(4, 3);
  labels << 1, 0, 1,
            1, 0, -1,
            0, 0, 0,
            0, 0, -1;
  const auto m = macro_auroc(scores, labels, schema, {"A", "B", "C"});
  ASSERT_EQ(m.excluded, std::vector<std::string>{"B"});
  EXPECT_DOUBLE_EQ(m.value, (1.0 + 0.5) / 2.0);
  EXPECT_FALSE(m.per_label[1].value.has_value());
  EXPECT_EQ(m.per_label[2].positives, 1u);
  EXPECT_EQ(m.per_label[2].negatives, 1u);
}

TEST(MacroAuroc, AllUndefinedThrows) {
  LabelSchema schema({"A"});
  Eigen::MatrixXd scores(2, 1);
  scores << 0.1, 0.2;
  Eigen::MatrixXi labels(2, 1);
  labels << 0, 0;
  EXPECT_THROW(macro_auroc(scores, labels, schema, {"A"}), UndefinedMetricError);
}

TEST(MacroAuroc, UnknownSubsetLabel) {
  LabelSchema schema({"A"});
  EXPECT_THROW(resolve_subset(schema, {"Z"}), InputError);
}

TEST(Thresholds, JsonRoundTrip) {
  ThresholdTable t;
  t.set("m1", "Edema", {0.25, "val-1"});
  t.set("m1", "No Finding", {0.625, "val-1"});
  const auto back = ThresholdTable::parse(t.to_json_text(), "t.json");
  EXPECT_EQ(back.entries(), t.entries());
  EXPECT_EQ(back.get_any_model("Edema")->threshold, 0.25);
  EXPECT_FALSE(back.get("m2", "Edema").has_value());
}

TEST(Thresholds, FitUsesF1Optimum) {
  LabelSchema schema({"A"});
  Eigen::MatrixXd scores(4, 1);
  scores << 0.9, 0.5, 0.45, 0.4;
  Eigen::MatrixXi labels(4, 1);
  labels << 1, 0, 0, 1;
  const auto t = fit_thresholds("m", scores, labels, schema, "val");
  EXPECT_EQ(t.get("m", "A")->threshold, 0.4);
  EXPECT_EQ(t.get("m", "A")->provenance, "val");
}
