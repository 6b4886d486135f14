#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "radaudit/clf_eval.hpp"
#include "radaudit/core.hpp"
#include "radaudit/error.hpp"
#include "radaudit/numeric.hpp"
#include "radaudit/parallel.hpp"
#include "radaudit/qc.hpp"

namespace radaudit {

template <typename Scalar>
struct GaussianSummary {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> covariance;
  Eigen::Index n = 0;

  Eigen::Index dim() const { return mean.size(); }
};

// Mean and unbiased (n - 1) covariance of the rows of `samples`.
template <typename Derived>
GaussianSummary<typename Derived::Scalar> fit_gaussian(
    const Eigen::MatrixBase<Derived>& samples) {
  using Scalar = typename Derived::Scalar;
  if (samples.rows() < 2) {
    throw InputError("a Gaussian fit needs at least 2 samples, got " +
                     std::to_string(samples.rows()));
  }
  GaussianSummary<Scalar> g;
  g.n = samples.rows();
  g.mean = samples.colwise().mean().transpose();
  const auto centered = (samples.rowwise() - g.mean.transpose()).eval();
  g.covariance = (centered.transpose() * centered) / Scalar(g.n - 1);
  g.covariance = Scalar(0.5) * (g.covariance + g.covariance.transpose()).eval();
  return g;
}

struct FrechetResult {
  double distance = 0.0;
  // Smallest eigenvalue of sqrt(S1) S2 sqrt(S1) before clamping at zero.
  double min_eigenvalue = 0.0;
  // Set when an eigenvalue below -1e-6 had to be clamped.
  std::optional<std::string> warning;
};

namespace detail {

template <typename Matrix>
Matrix symmetric_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const auto roots = es.eigenvalues().cwiseMax(0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}). The trace of the cross
// term is taken from the symmetric form S1^{1/2} S2 S1^{1/2}, whose
// eigenvalues are clamped at 0.
template <typename Scalar>
FrechetResult frechet_distance(const GaussianSummary<Scalar>& a,
                               const GaussianSummary<Scalar>& b) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (a.dim() != b.dim()) {
    throw InputError("embedding dimensions differ (" + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()) + ")");
  }
  const Matrix root_a = detail::symmetric_sqrt<Matrix>(a.covariance);
  Matrix cross = root_a * b.covariance * root_a;
  cross = Scalar(0.5) * (cross + cross.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(cross, Eigen::EigenvaluesOnly);
  const auto& eig = es.eigenvalues();

  FrechetResult r;
  r.min_eigenvalue = eig.size() ? static_cast<double>(eig.minCoeff()) : 0.0;
  if (r.min_eigenvalue < -1e-6) {
    r.warning = "clamped negative eigenvalue " + std::to_string(r.min_eigenvalue) +
                " in the covariance cross term";
  }
  const Scalar trace_sqrt = eig.cwiseMax(0).cwiseSqrt().sum();
  const Scalar d = (a.mean - b.mean).squaredNorm() + a.covariance.trace() +
                   b.covariance.trace() - Scalar(2) * trace_sqrt;
  r.distance = std::max(0.0, static_cast<double>(d));
  return r;
}

// Frechet distance between Gaussian fits of two embedding sets (rows are
// samples).
template <typename DerivedA, typename DerivedB>
FrechetResult fid(const Eigen::MatrixBase<DerivedA>& real,
                  const Eigen::MatrixBase<DerivedB>& synth) {
  if (real.cols() != synth.cols()) {
    throw InputError("embedding dimensions differ (" + std::to_string(real.cols()) +
                     " vs " + std::to_string(synth.cols()) + ")");
  }
  return frechet_distance(fit_gaussian(real), fit_gaussian(synth));
}

inline FrechetResult fid(const EmbeddingMatrix& real, const EmbeddingMatrix& synth) {
  return fid(real.values, synth.values);
}

// dot(a, b) / (|a| |b|)
template <typename DerivedA, typename DerivedB>
double embedding_cosine(const Eigen::MatrixBase<DerivedA>& a,
                        const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw InputError("cosine of vectors of different length");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InputError("cosine similarity of a zero vector");
  const double c = a.dot(b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

struct DiversityResult {
  double value = 0.0;                // mean over prompts
  std::vector<double> per_prompt;    // mean over the C(k, 2) pairs
};

// Mean over prompts of the mean pairwise score among that prompt's samples.
// A value of 1 means every prompt produced identical samples. Groups run in
// parallel, so `pairwise` must be safe to call concurrently.
template <typename SampleT, typename PairFn>
DiversityResult intra_prompt_diversity(const std::vector<std::vector<SampleT>>& groups,
                                       PairFn&& pairwise) {
  if (groups.empty()) throw InputError("no prompt groups");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].size() < 2) {
      throw InputError("prompt group " + std::to_string(g) + " has " +
                       std::to_string(groups[g].size()) +
                       " samples; pairwise diversity needs at least 2");
    }
  }
  DiversityResult r;
  r.per_prompt.resize(groups.size());
  parallel_for(groups.size(), [&](std::size_t g) {
    const auto& members = groups[g];
    std::vector<double> scores;
    scores.reserve(members.size() * (members.size() - 1) / 2);
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        scores.push_back(static_cast<double>(pairwise(members[i], members[j])));
      }
    }
    r.per_prompt[g] = mean(scores);
  });
  r.value = mean(r.per_prompt);
  return r;
}

// Diseases scored for prompt alignment.
inline const std::vector<std::string> kAlignmentDiseases = {
    "Atelectasis", "Cardiomegaly", "Edema", "Pleural Effusion", "Pneumothorax"};

// Auditor output on one synthetic image next to what its prompt asked for.
struct AlignmentRecord {
  Demographics target;
  AuditReadout predicted;
  Eigen::VectorXd disease_scores;  // aligned to the disease list
  Eigen::VectorXi disease_labels;  // 1 / 0 / -1 (missing), from the source report
};

struct AlignmentScores {
  std::vector<LabelMetric> per_disease;
  std::optional<double> mean_disease_auroc;  // over defined diseases
  std::vector<std::string> excluded;         // diseases lacking a class
  double sex_accuracy = 0.0;
  double race_accuracy = 0.0;
  double age_rmse = 0.0;  // years
};

AlignmentScores alignment_scores(
    const std::vector<AlignmentRecord>& records,
    const std::vector<std::string>& diseases = kAlignmentDiseases);

struct CheckpointRow {
  std::string id;
  std::optional<long long> steps;
  double mean_disease_auroc = 0.0;
  double fid = 0.0;
  std::map<std::string, double> extra;  // remaining table columns
};

inline constexpr double kCheckpointAurocTieWindow = 0.005;

// Highest mean disease AUROC; rows within `tie_window` of the best are
// decided by lowest FID, then by fewest training steps.
std::string select_checkpoint(const std::vector<CheckpointRow>& rows,
                              double tie_window = kCheckpointAurocTieWindow);

// "10k (28 ep)" -> 10000, "7.5k" -> 7500, "2500" -> 2500; otherwise nullopt.
std::optional<long long> parse_step_count(std::string_view id);

// Checkpoint table CSV with a `checkpoint` column plus at least `mean_auroc`
// and `fid`. Rows whose id carries no step count ("real data", baselines) are
// reference rows: returned through `reference_ids`, not as candidates.
std::vector<CheckpointRow> parse_checkpoint_table(
    std::string_view text, std::string_view origin,
    std::vector<std::string>* reference_ids = nullptr);

}  // namespace radaudit
