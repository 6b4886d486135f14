#include "radaudit/probe.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "radaudit/error.hpp"
#include "radaudit/random.hpp"

namespace radaudit {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::real_only: return "real_only";
    case Strategy::synth_only: return "synth_only";
    case Strategy::synth_real_mix: return "synth_real_mix";
    case Strategy::synth_pretrain_finetune: return "synth_pretrain_finetune";
  }
  return "";
}

Strategy parse_strategy(std::string_view token) {
  if (token == "i" || token == "real_only") return Strategy::real_only;
  if (token == "ii" || token == "synth_only") return Strategy::synth_only;
  if (token == "iii" || token == "synth_real_mix") return Strategy::synth_real_mix;
  if (token == "iv" || token == "synth_pretrain_finetune") {
    return Strategy::synth_pretrain_finetune;
  }
  throw InputError("unknown strategy '" + std::string(token) + "' (expected i|ii|iii|iv)");
}

void ProbeConfig::validate() const {
  if (!(lr_initial > 0.0) || !(lr_finetune > 0.0)) {
    throw InputError("learning rates must be positive");
  }
  if (!(weight_decay >= 0.0)) throw InputError("weight_decay must be >= 0");
  if (max_epochs < 1) throw InputError("max_epochs must be >= 1");
  if (patience < 1 || patience > max_epochs) {
    throw InputError("patience must lie in [1, max_epochs]");
  }
  if (!(init_scale >= 0.0)) throw InputError("init_scale must be >= 0");
}

ProbeModel ProbeModel::zeros(Eigen::Index features, Eigen::Index labels) {
  return {Eigen::MatrixXd::Zero(features, labels), Eigen::VectorXd::Zero(labels)};
}

Eigen::MatrixXd ProbeModel::logits(const Eigen::MatrixXd& features) const {
  return (features * weights).rowwise() + bias.transpose();
}

Eigen::MatrixXd ProbeModel::scores(const Eigen::MatrixXd& features) const {
  return (1.0 / (1.0 + (-logits(features).array()).exp())).matrix();
}

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LossAndGradient {
  double loss = 0.0;
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_bias;
};

LossAndGradient loss_and_gradient(const ProbeModel& model, const Eigen::MatrixXd& x,
                                  const Eigen::MatrixXi& y, bool with_gradient) {
  const Eigen::MatrixXd z = model.logits(x);
  Eigen::MatrixXd residual = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  double total = 0.0;
  std::size_t count = 0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const int label = y(i, j);
      if (label < 0) continue;
      total += softplus(z(i, j)) - label * z(i, j);
      residual(i, j) = sigmoid(z(i, j)) - label;
      ++count;
    }
  }
  LossAndGradient out;
  if (count == 0) throw InputError("no labeled entries to train or validate on");
  out.loss = total / static_cast<double>(count);
  if (with_gradient) {
    residual /= static_cast<double>(count);
    out.grad_weights = x.transpose() * residual;
    out.grad_bias = residual.colwise().sum().transpose();
  }
  return out;
}

std::optional<double> val_macro_auroc(const ProbeModel& model, const Dataset& val) {
  const Eigen::MatrixXd s = model.scores(val.features);
  std::vector<double> defined;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    auto [ds, dl] = defined_entries(s.col(j), val.labels.col(j));
    try {
      defined.push_back(binary_auroc(ds, dl));
    } catch (const UndefinedMetricError&) {
    }
  }
  if (defined.empty()) return std::nullopt;
  return std::accumulate(defined.begin(), defined.end(), 0.0) /
         static_cast<double>(defined.size());
}

void check_dataset(const Dataset& d, const char* name, Eigen::Index features,
                   Eigen::Index labels) {
  if (d.features.rows() != d.labels.rows()) {
    throw InputError(std::string(name) + ": feature and label rows differ");
  }
  if (d.features.cols() != features || d.labels.cols() != labels) {
    throw InputError(std::string(name) + ": dimensions differ from the validation set");
  }
  if (!d.features.allFinite()) throw InputError(std::string(name) + ": non-finite features");
}

struct StageOutcome {
  ProbeModel model;
  StageSummary summary;
};

StageOutcome run_stage(const Dataset& train, const Dataset& val, ProbeModel model,
                       double lr0, const ProbeConfig& config, int stage,
                       std::vector<EpochLog>& log) {
  if (train.rows() == 0) throw InputError("training set is empty");
  StageOutcome out;
  out.model = model;
  double best_loss = std::numeric_limits<double>::infinity();
  std::optional<double> best_auroc;
  double best_loss_for_fallback = std::numeric_limits<double>::infinity();
  ProbeModel fallback = model;
  int fallback_epoch = 0;

  const Eigen::Index n = train.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = cosine_lr(epoch - 1, config.max_epochs, lr0);
    auto step = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXi& y) {
      const LossAndGradient g = loss_and_gradient(model, x, y, true);
      model.weights -= lr * (g.grad_weights + config.weight_decay * model.weights);
      model.bias -= lr * g.grad_bias;
    };
    if (config.batch_size == 0 || config.batch_size >= static_cast<std::size_t>(n)) {
      step(train.features, train.labels);
    } else {
      Rng rng(derive_seed(config.seed, {0xba7c4ULL, static_cast<std::uint64_t>(stage),
                                        static_cast<std::uint64_t>(epoch)}));
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
      }
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
        step(train.features(rows, Eigen::all), train.labels(rows, Eigen::all));
      }
    }

    EpochLog e;
    e.stage = stage;
    e.epoch = epoch;
    e.lr = lr;
    e.train_loss = loss_and_gradient(model, train.features, train.labels, false).loss;
    e.val_loss = loss_and_gradient(model, val.features, val.labels, false).loss;
    if (!std::isfinite(e.train_loss) || !std::isfinite(e.val_loss) ||
        !model.weights.allFinite() || !model.bias.allFinite()) {
      throw DivergenceError("training diverged (non-finite loss) at epoch " +
                                std::to_string(epoch) + " of stage " + std::to_string(stage),
                            epoch);
    }
    e.val_auroc = val_macro_auroc(model, val);
    log.push_back(e);
    out.summary.epochs_run = epoch;

    if (e.val_auroc && (!best_auroc || *e.val_auroc > *best_auroc)) {
      best_auroc = e.val_auroc;
      out.model = model;
      out.summary.checkpoint_epoch = epoch;
    }
    if (e.val_loss < best_loss_for_fallback) {
      best_loss_for_fallback = e.val_loss;
      fallback = model;
      fallback_epoch = epoch;
    }
    if (e.val_loss < best_loss) {
      best_loss = e.val_loss;
      out.summary.best_loss_epoch = epoch;
    } else if (epoch - out.summary.best_loss_epoch >= config.patience) {
      out.summary.early_stopped = true;
      break;
    }
  }
  out.summary.checkpoint_val_auroc = best_auroc;
  if (!best_auroc) {
    out.model = fallback;
    out.summary.checkpoint_epoch = fallback_epoch;
  }
  return out;
}

Dataset concatenate(const Dataset& a, const Dataset& b) {
  Dataset d;
  d.features.resize(a.rows() + b.rows(), a.features.cols());
  d.labels.resize(a.rows() + b.rows(), a.labels.cols());
  d.features << a.features, b.features;
  d.labels << a.labels, b.labels;
  return d;
}

}  // namespace

double probe_loss(const ProbeModel& model, const Dataset& data) {
  return loss_and_gradient(model, data.features, data.labels, false).loss;
}

double cosine_lr(int epoch, int max_epochs, double lr_initial) {
  if (max_epochs < 1 || epoch < 0 || epoch > max_epochs) {
    throw InputError("cosine_lr: epoch outside [0, max_epochs]");
  }
  if (epoch == max_epochs) return 0.0;
  return lr_initial * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                         static_cast<double>(max_epochs)));
}

TrainingResult train_probe(const ProbeData& data, const ProbeConfig& config) {
  config.validate();
  const Eigen::Index features = data.val.features.cols();
  const Eigen::Index labels = data.val.labels.cols();
  check_dataset(data.val, "validation set", features, labels);
  if (data.real) check_dataset(*data.real, "real set", features, labels);
  if (data.synth) check_dataset(*data.synth, "synthetic set", features, labels);

  const bool needs_real = config.strategy != Strategy::synth_only;
  const bool needs_synth = config.strategy == Strategy::synth_only ||
                           config.strategy == Strategy::synth_pretrain_finetune;
  if (needs_real && !data.real) {
    throw InputError(std::string("strategy ") + std::string(to_string(config.strategy)) +
                     " needs a real training set");
  }
  if (needs_synth && !data.synth) {
    throw InputError(std::string("strategy ") + std::string(to_string(config.strategy)) +
                     " needs a synthetic training set");
  }

  ProbeModel init = ProbeModel::zeros(features, labels);
  Rng rng(derive_seed(config.seed, {0x1417ULL}));
  for (Eigen::Index j = 0; j < init.weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < init.weights.rows(); ++i) {
      init.weights(i, j) = config.init_scale * rng.normal();
    }
  }

  TrainingResult result;
  auto record = [&](StageOutcome&& o, std::string source) {
    o.summary.source = std::move(source);
    result.stages.push_back(o.summary);
    result.model = std::move(o.model);
  };
  switch (config.strategy) {
    case Strategy::real_only:
      record(run_stage(*data.real, data.val, init, config.lr_initial, config, 0, result.log),
             "real");
      break;
    case Strategy::synth_only:
      record(run_stage(*data.synth, data.val, init, config.lr_initial, config, 0, result.log),
             "synth");
      break;
    case Strategy::synth_real_mix: {
      const Dataset pooled = data.synth ? concatenate(*data.real, *data.synth) : *data.real;
      record(run_stage(pooled, data.val, init, config.lr_initial, config, 0, result.log),
             "synth+real");
      break;
    }
    case Strategy::synth_pretrain_finetune: {
      record(run_stage(*data.synth, data.val, init, config.lr_initial, config, 0, result.log),
             "synth");
      ProbeModel pretrained = result.model;
      record(run_stage(*data.real, data.val, std::move(pretrained), config.lr_finetune,
                       config, 1, result.log),
             "real");
      break;
    }
  }
  return result;
}

ProbeEvaluation evaluate_probe(const ProbeModel& model, const Dataset& test,
                               const LabelSchema& schema,
                               const std::vector<std::string>& subset) {
  if (test.features.cols() != model.weights.rows()) {
    throw InputError("test feature dimension differs from the probe");
  }
  if (test.labels.cols() != model.weights.cols() ||
      test.labels.cols() != static_cast<Eigen::Index>(schema.size())) {
    throw InputError("test labels differ from the probe's label count");
  }
  const Eigen::MatrixXd s = model.scores(test.features);
  return {macro_auroc(s, test.labels, schema, subset),
          macro_auprc(s, test.labels, schema, subset)};
}

}  // namespace radaudit
