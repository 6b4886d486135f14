#include "radaudit/clf_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "radaudit/error.hpp"
#include "radaudit/numeric.hpp"

namespace radaudit {

namespace {

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

ClassCounts check_binary(const ScoresRef& scores, const LabelsRef& labels) {
  if (scores.size() != labels.size()) {
    throw InputError("scores and labels differ in length (" +
                     std::to_string(scores.size()) + " vs " +
                     std::to_string(labels.size()) + ")");
  }
  ClassCounts c;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InputError("non-finite score");
    if (labels[i] == 1) {
      ++c.positives;
    } else if (labels[i] == 0) {
      ++c.negatives;
    } else {
      throw InputError("label values must be 0 or 1");
    }
  }
  return c;
}

// Indices ordered by descending score; ties keep input order.
std::vector<Eigen::Index> descending_order(const ScoresRef& scores) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores[a] > scores[b];
  });
  return order;
}

}  // namespace

double binary_auroc(const ScoresRef& scores, const LabelsRef& labels) {
  const ClassCounts c = check_binary(scores, labels);
  if (c.positives == 0 || c.negatives == 0) {
    throw UndefinedMetricError("AUROC undefined: " +
                               std::string(c.positives ? "no negatives" : "no positives"));
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });
  // Sum of mid-ranks of positives. Ranks are half-integers, so the sum is
  // exact for any n below 2^52.
  double positive_rank_sum = 0.0;
  const std::size_t n = order.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += mid_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(c.positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(c.negatives));
}

double average_precision(const ScoresRef& scores, const LabelsRef& labels) {
  const ClassCounts c = check_binary(scores, labels);
  if (c.positives == 0) {
    throw UndefinedMetricError("average precision undefined: no positives");
  }
  const auto order = descending_order(scores);
  const double total_pos = static_cast<double>(c.positives);
  std::size_t tp = 0;
  std::size_t fp = 0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++tp; else ++fp;
      ++j;
    }
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double f1_optimal_threshold(const ScoresRef& scores, const LabelsRef& labels) {
  const ClassCounts c = check_binary(scores, labels);
  if (c.positives == 0) {
    throw UndefinedMetricError("F1 threshold undefined: no positives");
  }
  const auto order = descending_order(scores);
  // F1 = 2TP / (2TP + FP + FN); compared as exact fractions.
  long long best_num = -1;
  long long best_den = 1;
  double best_t = scores[order.front()];
  long long tp = 0;
  long long fp = 0;
  const auto total_pos = static_cast<long long>(c.positives);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++tp; else ++fp;
      ++j;
    }
    const long long num = 2 * tp;
    const long long den = 2 * tp + fp + (total_pos - tp);
    const __int128 lhs = static_cast<__int128>(num) * best_den;
    const __int128 rhs = static_cast<__int128>(best_num) * den;
    if (best_num < 0 || lhs >= rhs) {  // >= : later candidates are smaller
      best_num = num;
      best_den = den;
      best_t = scores[order[i]];
    }
    i = j;
  }
  return best_t;
}

double false_positive_rate(const LabelsRef& predictions, const LabelsRef& labels) {
  if (predictions.size() != labels.size()) {
    throw InputError("predictions and labels differ in length");
  }
  std::size_t fp = 0;
  std::size_t tn = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InputError("label values must be 0 or 1");
    if (predictions[i] != 0 && predictions[i] != 1) {
      throw InputError("prediction values must be 0 or 1");
    }
    if (labels[i] == 0) {
      if (predictions[i] == 1) ++fp; else ++tn;
    }
  }
  if (fp + tn == 0) throw UndefinedMetricError("FPR undefined: no negatives");
  return static_cast<double>(fp) / static_cast<double>(fp + tn);
}

Eigen::VectorXi binarize(const ScoresRef& scores, double threshold) {
  return (scores.array() >= threshold).cast<int>();
}

std::pair<Eigen::VectorXd, Eigen::VectorXi> defined_entries(
    const ScoresRef& scores, const LabelsRef& labels_with_missing) {
  if (scores.size() != labels_with_missing.size()) {
    throw InputError("scores and labels differ in length");
  }
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (labels_with_missing[i] >= 0) keep.push_back(i);
  }
  return {scores(keep), labels_with_missing(keep)};
}

std::vector<std::size_t> resolve_subset(const LabelSchema& schema,
                                        const std::vector<std::string>& subset) {
  std::vector<std::size_t> cols;
  cols.reserve(subset.size());
  for (const auto& name : subset) {
    auto idx = schema.index_of(name);
    if (!idx) throw InputError("label '" + name + "' is not in the schema");
    cols.push_back(*idx);
  }
  return cols;
}

namespace {

template <typename MetricFn>
MacroMetric macro_metric(const Eigen::MatrixXd& scores,
                         const Eigen::MatrixXi& labels,
                         const LabelSchema& schema,
                         const std::vector<std::string>& subset,
                         MetricFn&& metric, const char* metric_name) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols() ||
      scores.cols() != static_cast<Eigen::Index>(schema.size())) {
    throw InputError("score and label matrices disagree with the schema");
  }
  const auto cols = resolve_subset(schema, subset);
  MacroMetric out;
  std::vector<double> defined;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(cols[k]);
    auto [s, l] = defined_entries(scores.col(col), labels.col(col));
    LabelMetric m;
    m.label = subset[k];
    m.positives = static_cast<std::size_t>(l.sum());
    m.negatives = static_cast<std::size_t>(l.size()) - m.positives;
    try {
      m.value = metric(s, l);
      defined.push_back(*m.value);
    } catch (const UndefinedMetricError& e) {
      m.note = e.what();
      out.excluded.push_back(subset[k]);
    }
    out.per_label.push_back(std::move(m));
  }
  if (defined.empty()) {
    throw UndefinedMetricError(std::string("macro ") + metric_name +
                               " undefined: no label has a defined value");
  }
  out.value = pairwise_sum(defined) / static_cast<double>(defined.size());
  return out;
}

}  // namespace

MacroMetric macro_auroc(const Eigen::MatrixXd& scores,
                        const Eigen::MatrixXi& labels, const LabelSchema& schema,
                        const std::vector<std::string>& subset) {
  return macro_metric(scores, labels, schema, subset,
                      [](const auto& s, const auto& l) { return binary_auroc(s, l); },
                      "AUROC");
}

MacroMetric macro_auprc(const Eigen::MatrixXd& scores,
                        const Eigen::MatrixXi& labels, const LabelSchema& schema,
                        const std::vector<std::string>& subset) {
  return macro_metric(
      scores, labels, schema, subset,
      [](const auto& s, const auto& l) { return average_precision(s, l); },
      "AUPRC");
}

// ---------------------------------------------------------------------------

void ThresholdTable::set(const std::string& model, const std::string& label,
                         ThresholdEntry entry) {
  if (!(entry.threshold >= 0.0 && entry.threshold <= 1.0)) {
    throw InputError("threshold for " + model + "/" + label + " outside [0, 1]");
  }
  entries_[{model, label}] = std::move(entry);
}

std::optional<ThresholdEntry> ThresholdTable::get(std::string_view model,
                                                  std::string_view label) const {
  auto it = entries_.find({std::string(model), std::string(label)});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<ThresholdEntry> ThresholdTable::get_any_model(
    std::string_view label) const {
  std::optional<ThresholdEntry> found;
  std::string model;
  for (const auto& [key, entry] : entries_) {
    if (key.second != label) continue;
    if (found && key.first != model) {
      throw InputError("thresholds hold several models for '" +
                       std::string(label) + "'; name the model explicitly");
    }
    found = entry;
    model = key.first;
  }
  return found;
}

std::string ThresholdTable::to_json_text() const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [key, entry] : entries_) {
    doc[key.first][key.second] = {{"threshold", entry.threshold},
                                  {"provenance", entry.provenance}};
  }
  return doc.dump(2) + "\n";
}

ThresholdTable ThresholdTable::parse(std::string_view text,
                                     std::string_view origin) {
  ThresholdTable table;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string(origin) + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw InputError(std::string(origin) + ": expected an object");
  for (const auto& [model, labels] : doc.items()) {
    if (!labels.is_object()) {
      throw InputError(std::string(origin) + ": model '" + model +
                       "' must map labels to entries");
    }
    for (const auto& [label, entry] : labels.items()) {
      if (!entry.is_object() || !entry.contains("threshold") ||
          !entry["threshold"].is_number()) {
        throw InputError(std::string(origin) + ": entry " + model + "/" + label +
                         " needs a numeric 'threshold'");
      }
      ThresholdEntry e;
      e.threshold = entry["threshold"].get<double>();
      e.provenance = entry.value("provenance", std::string{});
      table.set(model, label, std::move(e));
    }
  }
  return table;
}

ThresholdTable fit_thresholds(const std::string& model,
                              const Eigen::MatrixXd& scores,
                              const Eigen::MatrixXi& labels,
                              const LabelSchema& schema,
                              const std::string& provenance) {
  ThresholdTable table;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    auto [s, l] = defined_entries(scores.col(col), labels.col(col));
    if (l.sum() == 0) continue;
    table.set(model, schema.name(j), {f1_optimal_threshold(s, l), provenance});
  }
  return table;
}

}  // namespace radaudit
