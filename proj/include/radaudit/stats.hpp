#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "radaudit/clf_eval.hpp"

namespace radaudit {

struct ResamplePlan {
  int n_resamples = 1000;
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  // Redraws allowed per resample when the statistic is undefined on it.
  int max_redraws = 10;

  void validate() const;
};

// Statistic evaluated on a multiset of row indices in [0, n).
using IndexStatistic = std::function<double(std::span<const std::size_t>)>;

struct BootstrapResult {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int resamples = 0;            // resamples with a defined statistic
  int undefined_resamples = 0;  // gave up after max_redraws
  int redraws = 0;              // total redraws spent
};

// Percentile bootstrap over rows drawn with replacement. Resample r uses a
// generator derived from (seed, r, redraw), so the result does not depend on
// the worker count. More than half of the resamples undefined ->
// UndefinedMetricError.
BootstrapResult bootstrap_ci(const IndexStatistic& statistic, std::size_t n,
                             const ResamplePlan& plan);

// Linear-interpolated quantile of sorted values, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Per-study structural components of an empirical AUROC: for each positive
// the fraction of negatives it outranks (ties count 1/2), and for each
// negative the fraction of positives that outrank it.
struct StructuralComponents {
  Eigen::VectorXd positive;  // V10, one per positive
  Eigen::VectorXd negative;  // V01, one per negative
  double auroc = 0.0;
};
StructuralComponents structural_components(const ScoresRef& scores,
                                           const LabelsRef& labels);

struct DelongResult {
  double auroc_a = 0.0;
  double auroc_b = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double covariance = 0.0;
  double z = 0.0;
  double p = 1.0;  // two-sided
};

// Paired test of AUROC(a) == AUROC(b) on the same studies.
DelongResult delong_test(const ScoresRef& scores_a, const ScoresRef& scores_b,
                         const LabelsRef& labels);

struct PermutationResult {
  double delta = 0.0;  // AP(a) - AP(b)
  double p = 1.0;
  bool exact = false;
  std::uint64_t assignments = 0;  // 2^n when exact, else n_resamples
};

// Paired sign-flip permutation test on |AP(a) - AP(b)|: each study's pair of
// scores is swapped with probability 1/2. Enumerates all 2^n assignments
// when n <= exact_max_n; otherwise p = (1 + #{>= observed}) / (1 + R).
PermutationResult permutation_test_auprc(const ScoresRef& scores_a,
                                         const ScoresRef& scores_b,
                                         const LabelsRef& labels,
                                         const ResamplePlan& plan,
                                         int exact_max_n = 20);

// Two-sided standard-normal p-value.
double two_sided_p(double z);

}  // namespace radaudit
