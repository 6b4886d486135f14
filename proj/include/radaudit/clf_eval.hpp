#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "radaudit/core.hpp"

namespace radaudit {

using ScoresRef = Eigen::Ref<const Eigen::VectorXd>;
// Binary labels (0/1). Missing entries must be filtered out by the caller;
// see defined_entries().
using LabelsRef = Eigen::Ref<const Eigen::VectorXi>;

// P(score_pos > score_neg) + 0.5 P(tie), from mid-ranks in O(n log n).
// UndefinedMetricError unless both classes are present.
double binary_auroc(const ScoresRef& scores, const LabelsRef& labels);

// Step-wise average precision: sum_k (R_k - R_{k-1}) P_k over descending
// distinct-score cut points. Tied scores form a single cut point.
double average_precision(const ScoresRef& scores, const LabelsRef& labels);

// Candidate thresholds are the distinct scores; the rule is
// "positive iff score >= t". Returns the F1-maximizing candidate, the
// smallest one among ties.
double f1_optimal_threshold(const ScoresRef& scores, const LabelsRef& labels);

// FP / (FP + TN). UndefinedMetricError with no negatives.
double false_positive_rate(const LabelsRef& predictions, const LabelsRef& labels);

// 1 where score >= threshold.
Eigen::VectorXi binarize(const ScoresRef& scores, double threshold);

// Drops rows whose label is missing (-1) from one label column.
std::pair<Eigen::VectorXd, Eigen::VectorXi> defined_entries(
    const ScoresRef& scores, const LabelsRef& labels_with_missing);

struct LabelMetric {
  std::string label;
  std::optional<double> value;  // empty when undefined on this data
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::string note;  // why the value is undefined
};

struct MacroMetric {
  double value = 0.0;  // mean over defined labels
  std::vector<LabelMetric> per_label;
  std::vector<std::string> excluded;
};

// Column indices of `subset` within `schema`; InputError if one is absent.
std::vector<std::size_t> resolve_subset(const LabelSchema& schema,
                                        const std::vector<std::string>& subset);

// Macro averages over label columns. `labels` holds 1/0/-1 (missing); missing
// rows are excluded per label. Labels without both classes (AUROC) or without
// positives (AP) are excluded and listed. UndefinedMetricError if no label is
// defined.
MacroMetric macro_auroc(const Eigen::MatrixXd& scores,
                        const Eigen::MatrixXi& labels, const LabelSchema& schema,
                        const std::vector<std::string>& subset);
MacroMetric macro_auprc(const Eigen::MatrixXd& scores,
                        const Eigen::MatrixXi& labels, const LabelSchema& schema,
                        const std::vector<std::string>& subset);

struct ThresholdEntry {
  double threshold = 0.5;
  std::string provenance;  // id of the validation split it was fitted on

  friend bool operator==(const ThresholdEntry&, const ThresholdEntry&) = default;
};

// Per-(model, label) decision thresholds, persisted as thresholds.json:
//   {"<model>": {"<label>": {"threshold": t, "provenance": "..."}}}
class ThresholdTable {
 public:
  void set(const std::string& model, const std::string& label,
           ThresholdEntry entry);
  std::optional<ThresholdEntry> get(std::string_view model,
                                    std::string_view label) const;
  // Looks up `label` for the only model in the table.
  std::optional<ThresholdEntry> get_any_model(std::string_view label) const;
  bool empty() const { return entries_.empty(); }
  const std::map<std::pair<std::string, std::string>, ThresholdEntry>& entries()
      const {
    return entries_;
  }

  std::string to_json_text() const;
  static ThresholdTable parse(std::string_view text, std::string_view origin);

 private:
  std::map<std::pair<std::string, std::string>, ThresholdEntry> entries_;
};

// F1-optimal thresholds for every label with at least one positive.
ThresholdTable fit_thresholds(const std::string& model,
                              const Eigen::MatrixXd& scores,
                              const Eigen::MatrixXi& labels,
                              const LabelSchema& schema,
                              const std::string& provenance);

}  // namespace radaudit
