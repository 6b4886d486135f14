#include "radaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "radaudit/error.hpp"
#include "radaudit/parallel.hpp"
#include "radaudit/random.hpp"

namespace radaudit {

void ResamplePlan::validate() const {
  if (n_resamples < 1) throw InputError("n_resamples must be >= 1");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw InputError("ci_level must lie in (0, 1)");
  if (max_redraws < 1) throw InputError("max_redraws must be >= 1");
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_ci(const IndexStatistic& statistic, std::size_t n,
                             const ResamplePlan& plan) {
  plan.validate();
  if (n == 0) throw InputError("bootstrap over an empty cohort");
  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  BootstrapResult r;
  r.point = statistic(identity);

  const auto count = static_cast<std::size_t>(plan.n_resamples);
  std::vector<double> values(count, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> redraws(count, 0);
  parallel_for(count, [&](std::size_t s) {
    std::vector<std::size_t> rows(n);
    for (int k = 0; k < plan.max_redraws; ++k) {
      Rng rng(derive_seed(plan.seed, {s, static_cast<std::uint64_t>(k)}));
      for (auto& row : rows) row = static_cast<std::size_t>(rng.below(n));
      try {
        values[s] = statistic(rows);
        redraws[s] = k;
        return;
      } catch (const UndefinedMetricError&) {
      }
    }
    redraws[s] = plan.max_redraws;
  });

  std::vector<double> defined;
  defined.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    r.redraws += redraws[s];
    if (std::isnan(values[s])) {
      ++r.undefined_resamples;
    } else {
      defined.push_back(values[s]);
    }
  }
  if (2 * static_cast<std::size_t>(r.undefined_resamples) > count) {
    throw UndefinedMetricError("degenerate statistic: undefined on " +
                               std::to_string(r.undefined_resamples) + " of " +
                               std::to_string(count) + " bootstrap resamples");
  }
  std::sort(defined.begin(), defined.end());
  r.resamples = static_cast<int>(defined.size());
  const double tail = (1.0 - plan.ci_level) / 2.0;
  r.lo = quantile_sorted(defined, tail);
  r.hi = quantile_sorted(defined, 1.0 - tail);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

// Mid-ranks (1-based) of `values`.
Eigen::VectorXd midranks(const Eigen::VectorXd& values) {
  const auto n = static_cast<std::size_t>(values.size());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  Eigen::VectorXd ranks(values.size());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double sample_covariance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() < 2) return 0.0;
  const double mx = x.mean();
  const double my = y.mean();
  return ((x.array() - mx) * (y.array() - my)).sum() / static_cast<double>(x.size() - 1);
}

}  // namespace

StructuralComponents structural_components(const ScoresRef& scores,
                                           const LabelsRef& labels) {
  if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
  std::vector<Eigen::Index> pos_idx;
  std::vector<Eigen::Index> neg_idx;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InputError("non-finite score");
    if (labels[i] == 1) pos_idx.push_back(i);
    else if (labels[i] == 0) neg_idx.push_back(i);
    else throw InputError("label values must be 0 or 1");
  }
  if (pos_idx.empty() || neg_idx.empty()) {
    throw UndefinedMetricError("AUROC undefined: labels contain a single class");
  }
  const Eigen::VectorXd pos = scores(pos_idx);
  const Eigen::VectorXd neg = scores(neg_idx);
  const Eigen::VectorXd all = scores;
  const Eigen::VectorXd r_all = midranks(all);
  const Eigen::VectorXd r_pos = midranks(pos);
  const Eigen::VectorXd r_neg = midranks(neg);
  const auto m = static_cast<double>(pos_idx.size());
  const auto n = static_cast<double>(neg_idx.size());
  StructuralComponents c;
  c.positive.resize(pos.size());
  c.negative.resize(neg.size());
  for (Eigen::Index i = 0; i < pos.size(); ++i) {
    c.positive[i] = (r_all[pos_idx[static_cast<std::size_t>(i)]] - r_pos[i]) / n;
  }
  for (Eigen::Index j = 0; j < neg.size(); ++j) {
    c.negative[j] = 1.0 - (r_all[neg_idx[static_cast<std::size_t>(j)]] - r_neg[j]) / m;
  }
  c.auroc = c.positive.mean();
  return c;
}

double two_sided_p(double z) {
  if (std::isinf(z)) return 0.0;
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

DelongResult delong_test(const ScoresRef& scores_a, const ScoresRef& scores_b,
                         const LabelsRef& labels) {
  if (scores_a.size() != scores_b.size() || scores_a.size() != labels.size()) {
    throw InputError("DeLong test needs paired scores of equal length");
  }
  const StructuralComponents a = structural_components(scores_a, labels);
  const StructuralComponents b = structural_components(scores_b, labels);
  const auto m = static_cast<double>(a.positive.size());
  const auto n = static_cast<double>(a.negative.size());
  DelongResult r;
  r.auroc_a = a.auroc;
  r.auroc_b = b.auroc;
  r.var_a = sample_covariance(a.positive, a.positive) / m +
            sample_covariance(a.negative, a.negative) / n;
  r.var_b = sample_covariance(b.positive, b.positive) / m +
            sample_covariance(b.negative, b.negative) / n;
  r.covariance = sample_covariance(a.positive, b.positive) / m +
                 sample_covariance(a.negative, b.negative) / n;
  const double diff = r.auroc_a - r.auroc_b;
  const double var = r.var_a + r.var_b - 2.0 * r.covariance;
  if (var <= 0.0) {
    if (diff == 0.0) {
      r.z = 0.0;
    } else {
      r.z = diff > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
    }
  } else {
    r.z = diff / std::sqrt(var);
  }
  r.p = two_sided_p(r.z);
  return r;
}

// ---------------------------------------------------------------------------

PermutationResult permutation_test_auprc(const ScoresRef& scores_a,
                                         const ScoresRef& scores_b,
                                         const LabelsRef& labels,
                                         const ResamplePlan& plan, int exact_max_n) {
  plan.validate();
  if (scores_a.size() != scores_b.size() || scores_a.size() != labels.size()) {
    throw InputError("permutation test needs paired scores of equal length");
  }
  const double ap_a = average_precision(scores_a, labels);
  const double ap_b = average_precision(scores_b, labels);
  PermutationResult r;
  r.delta = ap_a - ap_b;
  const double observed = std::abs(r.delta);
  // Swapped assignments can reproduce the observed value up to rounding.
  const double cutoff = observed - 1e-12 * std::max(1.0, observed);
  const Eigen::Index n = scores_a.size();

  auto statistic = [&](auto&& swapped) {
    Eigen::VectorXd x(n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool s = swapped(i);
      x[i] = s ? scores_b[i] : scores_a[i];
      y[i] = s ? scores_a[i] : scores_b[i];
    }
    return std::abs(average_precision(x, labels) - average_precision(y, labels));
  };

  if (n <= exact_max_n) {
    const std::uint64_t total = std::uint64_t{1} << n;
    // Chunked so that the per-chunk counts, not the schedule, decide the sum.
    const std::uint64_t chunk = 4096;
    const std::uint64_t chunks = (total + chunk - 1) / chunk;
    std::vector<std::uint64_t> hits(chunks, 0);
    parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
      const std::uint64_t end = std::min<std::uint64_t>(total, (c + 1) * chunk);
      for (std::uint64_t mask = c * chunk; mask < end; ++mask) {
        if (statistic([mask](Eigen::Index i) { return ((mask >> i) & 1U) != 0; }) >= cutoff) {
          ++hits[c];
        }
      }
    });
    const std::uint64_t hit_total = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
    r.exact = true;
    r.assignments = total;
    r.p = static_cast<double>(hit_total) / static_cast<double>(total);
    return r;
  }

  const auto count = static_cast<std::size_t>(plan.n_resamples);
  std::vector<std::uint8_t> hit(count, 0);
  parallel_for(count, [&](std::size_t s) {
    Rng rng(derive_seed(plan.seed, {s}));
    std::vector<bool> swap(static_cast<std::size_t>(n));
    for (auto&& bit : swap) bit = (rng() >> 63) != 0;
    hit[s] = statistic([&swap](Eigen::Index i) { return swap[static_cast<std::size_t>(i)]; }) >=
             cutoff;
  });
  const auto k = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  r.assignments = count;
  r.p = (1.0 + k) / (1.0 + static_cast<double>(count));
  return r;
}

}  // namespace radaudit
