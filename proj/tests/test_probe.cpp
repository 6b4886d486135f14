#include <gtest/gtest.h>

#include <cmath>

#include "radaudit/error.hpp"
#include "radaudit/probe.hpp"
#include "radaudit/random.hpp"

using namespace radaudit;

namespace {

Dataset linear_data(Rng& rng, int n, int d, double noise) {
  Dataset ds;
  ds.features.resize(n, d);
  ds.labels.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = rng.normal();
    ds.labels(i, 0) = ds.features(i, 0) + noise * rng.normal() > 0 ? 1 : 0;
    ds.labels(i, 1) = ds.features(i, 1) - ds.features(i, 2) + noise * rng.normal() > 0 ? 1 : 0;
  }
  return ds;
}

}  // namespace

TEST(Probe, CosineSchedule) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 10, 0.1), 0.1);
  EXPECT_NEAR(cosine_lr(5, 10, 0.1), 0.05, 1e-15);
  EXPECT_NEAR(cosine_lr(10, 10, 0.1), 0.0, 1e-15);
}

TEST(Probe, StrategyTokens) {
  EXPECT_EQ(parse_strategy("iv"), Strategy::synth_pretrain_finetune);
  EXPECT_EQ(parse_strategy("real_only"), Strategy::real_only);
  EXPECT_THROW(parse_strategy("v"), InputError);
}

TEST(Probe, LossIgnoresMissingLabels) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(2, 1);
  d.labels.resize(2, 1);
  d.labels << 1, -1;
  const auto m = ProbeModel::zeros(1, 1);
  EXPECT_NEAR(probe_loss(m, d), std::log(2.0), 1e-15);
}

TEST(Probe, LearnsSeparableData) {
  Rng rng(1);
  ProbeData data;
  data.real = linear_data(rng, 400, 4, 0.1);
  data.val = linear_data(rng, 200, 4, 0.1);
  ProbeConfig cfg;
  cfg.lr_initial = 0.5;
  cfg.max_epochs = 150;
  cfg.patience = 150;
  const auto r = train_probe(data, cfg);
  const auto eval = evaluate_probe(r.model, data.val, LabelSchema({"a", "b"}), {"a", "b"});
  EXPECT_GT(eval.auroc.value, 0.95);
  EXPECT_LT(r.log.back().train_loss, r.log.front().train_loss);
}

TEST(Probe, EarlyStopFiresAtBestPlusPatience) {
  // Validation labels are the opposite of training labels, so validation loss
  // is best after the first update and only rises afterwards.
  Rng rng(2);
  ProbeData data;
  data.real = linear_data(rng, 100, 3, 0.0);
  data.val = *data.real;
  data.val.labels = (1 - data.val.labels.array()).matrix();
  ProbeConfig cfg;
  cfg.lr_initial = 0.5;
  cfg.max_epochs = 100;
  cfg.patience = 7;
  const auto r = train_probe(data, cfg);
  const auto& s = r.stages.at(0);
  EXPECT_TRUE(s.early_stopped);
  EXPECT_EQ(s.epochs_run, s.best_loss_epoch + cfg.patience);
  EXPECT_EQ(s.best_loss_epoch, 1);
}

TEST(Probe, EmptySynthMixEqualsRealOnly) {
  Rng rng(3);
  ProbeData data;
  data.real = linear_data(rng, 120, 3, 0.5);
  data.val = linear_data(rng, 60, 3, 0.5);
  data.synth = Dataset{Eigen::MatrixXd(0, 3), Eigen::MatrixXi(0, 2)};
  ProbeConfig cfg;
  cfg.lr_initial = 0.3;
  cfg.max_epochs = 40;
  const auto a = train_probe(data, cfg);
  cfg.strategy = Strategy::synth_real_mix;
  const auto b = train_probe(data, cfg);
  EXPECT_EQ(a.model.weights, b.model.weights);
  EXPECT_EQ(a.model.bias, b.model.bias);
  EXPECT_EQ(a.log.size(), b.log.size());
}

TEST(Probe, MissingInputsRejected) {
  ProbeData data;
  data.val = Dataset{Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXi::Zero(2, 1)};
  ProbeConfig cfg;
  EXPECT_THROW(train_probe(data, cfg), InputError);
  cfg.strategy = Strategy::synth_only;
  EXPECT_THROW(train_probe(data, cfg), InputError);
  cfg.lr_initial = -1;
  EXPECT_THROW(cfg.validate(), InputError);
}

TEST(Probe, DivergenceReported) {
  Rng rng(4);
  ProbeData data;
  data.real = linear_data(rng, 50, 2, 0.0);
  data.real->features *= 1e200;
  data.val = linear_data(rng, 20, 2, 0.0);
  ProbeConfig cfg;
  cfg.lr_initial = 1e200;
  EXPECT_THROW(train_probe(data, cfg), DivergenceError);
}

TEST(Probe, MiniBatchIsDeterministic) {
  Rng rng(5);
  ProbeData data;
  data.real = linear_data(rng, 90, 3, 0.3);
  data.val = linear_data(rng, 40, 3, 0.3);
  ProbeConfig cfg;
  cfg.lr_initial = 0.2;
  cfg.max_epochs = 10;
  cfg.patience = 10;
  cfg.batch_size = 16;
  cfg.seed = 9;
  EXPECT_EQ(train_probe(data, cfg).model.weights, train_probe(data, cfg).model.weights);
}
