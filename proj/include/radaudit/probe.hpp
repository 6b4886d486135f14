#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "radaudit/clf_eval.hpp"

namespace radaudit {

// (i) real only, (ii) synthetic only, (iii) synthetic + real pooled,
// (iv) synthetic pretraining then real fine-tuning.
enum class Strategy { real_only, synth_only, synth_real_mix, synth_pretrain_finetune };
std::string_view to_string(Strategy s);
// Accepts i|ii|iii|iv or the enum names.
Strategy parse_strategy(std::string_view token);

struct ProbeConfig {
  Strategy strategy = Strategy::real_only;
  double lr_initial = 1e-4;
  double lr_finetune = 5e-5;
  double weight_decay = 0.05;
  int max_epochs = 100;
  int patience = 20;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;  // 0: full batch
  double init_scale = 0.01;    // sd of the random initial weights

  void validate() const;
};

// Feature rows with multi-label targets (1 / 0 / -1 missing).
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::MatrixXi labels;

  Eigen::Index rows() const { return features.rows(); }
};

// Linear multi-label probe: scores = logistic(features * weights + bias).
struct ProbeModel {
  Eigen::MatrixXd weights;  // features x labels
  Eigen::VectorXd bias;     // labels

  static ProbeModel zeros(Eigen::Index features, Eigen::Index labels);
  Eigen::MatrixXd logits(const Eigen::MatrixXd& features) const;
  Eigen::MatrixXd scores(const Eigen::MatrixXd& features) const;
};

// Mean binary cross-entropy over non-missing label entries.
double probe_loss(const ProbeModel& model, const Dataset& data);

// lr_initial * 0.5 * (1 + cos(pi * epoch / max_epochs))
double cosine_lr(int epoch, int max_epochs, double lr_initial);

struct EpochLog {
  int stage = 0;  // 0, or 1 for the fine-tuning run of strategy (iv)
  int epoch = 0;  // 1-based within the stage
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_auroc;
};

struct StageSummary {
  std::string source;  // "real", "synth" or "synth+real"
  int epochs_run = 0;
  bool early_stopped = false;
  int best_loss_epoch = 0;
  int checkpoint_epoch = 0;  // epoch of the returned weights
  std::optional<double> checkpoint_val_auroc;
};

struct TrainingResult {
  ProbeModel model;
  std::vector<EpochLog> log;
  std::vector<StageSummary> stages;
};

struct ProbeData {
  std::optional<Dataset> real;
  std::optional<Dataset> synth;
  Dataset val;
};

// Trains with full-batch (or seeded mini-batch) gradient descent on the
// multi-label logistic loss with decoupled weight decay and a cosine
// schedule. Each run stops once validation loss has not improved for
// `patience` epochs and returns the epoch with the highest validation macro
// AUROC (falling back to the lowest validation loss when AUROC is undefined
// throughout). Strategy (iv) runs on synth at lr_initial, then on real at
// lr_finetune starting from the first run's checkpoint.
TrainingResult train_probe(const ProbeData& data, const ProbeConfig& config);

struct ProbeEvaluation {
  MacroMetric auroc;
  MacroMetric auprc;
};

ProbeEvaluation evaluate_probe(const ProbeModel& model, const Dataset& test,
                               const LabelSchema& schema,
                               const std::vector<std::string>& subset);

}  // namespace radaudit
