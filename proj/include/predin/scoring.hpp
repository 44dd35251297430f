#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "predin/common.hpp"

namespace predin {

/// Sim(z, p^k) = z . p^k for every prototype row.
template <typename DerivedZ, typename DerivedP>
Vector<typename DerivedZ::Scalar> branch_similarity(const Eigen::MatrixBase<DerivedZ>& z,
                                                    const Eigen::MatrixBase<DerivedP>& prototypes) {
  if (z.size() != prototypes.cols()) throw InvalidArgument("embedding/prototype dim mismatch");
  return prototypes * z.derived().reshaped();
}

/// Batched form: M x N similarity matrix.
template <typename DerivedZ, typename DerivedP>
Matrix<typename DerivedZ::Scalar> branch_similarities(const Eigen::MatrixBase<DerivedZ>& embeddings,
                                                      const Eigen::MatrixBase<DerivedP>& prototypes) {
  if (embeddings.cols() != prototypes.cols())
    throw InvalidArgument("embedding/prototype dim mismatch");
  return embeddings * prototypes.transpose();
}

/// Element-wise arithmetic mean over branches (vectors or M x N matrices).
template <typename MatrixType>
MatrixType fuse_scores(const std::vector<MatrixType>& per_branch) {
  if (per_branch.empty()) throw InvalidArgument("need at least one branch to fuse");
  MatrixType sum = per_branch.front();
  for (std::size_t b = 1; b < per_branch.size(); ++b) {
    if (per_branch[b].rows() != sum.rows() || per_branch[b].cols() != sum.cols())
      throw InvalidArgument("branch score shapes differ");
    sum += per_branch[b];
  }
  if (per_branch.size() == 1) return sum;
  return sum / static_cast<typename MatrixType::Scalar>(per_branch.size());
}

template <typename Scalar>
struct Classification {
  Scalar s_max;
  ClassId predicted;
};

/// Argmax with ties broken toward the lowest class index.
template <typename Derived>
Classification<typename Derived::Scalar> classify(const Eigen::MatrixBase<Derived>& scores) {
  if (scores.size() < 1) throw InvalidArgument("cannot classify an empty score vector");
  ClassId best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k)
    if (scores(k) > scores(best)) best = static_cast<ClassId>(k);
  return {scores(best), best};
}

struct Threshold {
  double value = 0.0;
  double retention_target = 0.95;
  std::size_t calibration_size = 0;
  double achieved_retention = 0.0;
};

/// Nearest-rank threshold: the ceil((1 - retention) * n)-th smallest calibration score.
/// Accepting scores >= threshold keeps at least `retention` of the calibration set.
inline Threshold calibrate_threshold(std::span<const double> known_smax, double retention) {
  if (known_smax.empty()) throw InvalidArgument("threshold calibration needs scores");
  if (!(retention > 0.0 && retention < 1.0))
    throw InvalidArgument("retention must lie strictly between 0 and 1");
  std::vector<double> sorted(known_smax.begin(), known_smax.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  // The small slack keeps e.g. (1 - 0.95) * 100 from rounding up to rank 6.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - retention) * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  Threshold t;
  t.value = sorted[rank - 1];
  t.retention_target = retention;
  t.calibration_size = n;
  const auto kept = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t.value);
  t.achieved_retention = static_cast<double>(kept) / static_cast<double>(n);
  return t;
}

struct Decision {
  bool accepted = false;
  ClassId predicted = 0;
};

/// Accept as k* iff s_max >= threshold.
inline Decision decide(double s_max, ClassId predicted, const Threshold& threshold) {
  return {s_max >= threshold.value, predicted};
}

/// One scored test sample. `true_label` is kUnknownLabel (-1) for unknown-class samples.
struct ScoredSample {
  std::vector<Eigen::VectorXd> sims_per_branch;
  Eigen::VectorXd fused_scores;
  double s_max = 0.0;
  ClassId predicted_class = 0;
  ClassId true_label = 0;
};

/// Scores a batch given per-branch M x N similarity matrices.
inline std::vector<ScoredSample> score_samples(const std::vector<Eigen::MatrixXd>& sims,
                                               const Labels& true_labels) {
  const Eigen::MatrixXd fused = fuse_scores(sims);
  if (fused.rows() != true_labels.size()) throw InvalidArgument("label count mismatch");
  std::vector<ScoredSample> out(static_cast<std::size_t>(fused.rows()));
  for (Eigen::Index i = 0; i < fused.rows(); ++i) {
    auto& s = out[static_cast<std::size_t>(i)];
    for (const auto& m : sims) s.sims_per_branch.emplace_back(m.row(i).transpose());
    s.fused_scores = fused.row(i).transpose();
    const auto c = classify(s.fused_scores);
    s.s_max = c.s_max;
    s.predicted_class = c.predicted;
    s.true_label = true_labels(i);
  }
  return out;
}

}  // namespace predin
