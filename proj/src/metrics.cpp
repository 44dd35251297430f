#include "predin/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "predin/prototype.hpp"

namespace predin {

double auc(std::span<const double> known_scores, std::span<const double> unknown_scores) {
  if (known_scores.empty() || unknown_scores.empty())
    throw InvalidArgument("AUC needs both known and unknown scores");
  std::vector<double> unknown(unknown_scores.begin(), unknown_scores.end());
  std::sort(unknown.begin(), unknown.end());
  // Count pairs in integer halves so the result is exact before the final division.
  long long twice_wins = 0;
  for (double s : known_scores) {
    const auto lo = std::lower_bound(unknown.begin(), unknown.end(), s);
    const auto hi = std::upper_bound(lo, unknown.end(), s);
    twice_wins += 2 * (lo - unknown.begin()) + (hi - lo);
  }
  return static_cast<double>(twice_wins) /
         (2.0 * static_cast<double>(known_scores.size()) *
          static_cast<double>(unknown_scores.size()));
}

double closed_acc(std::span<const ClassId> predictions, std::span<const ClassId> labels) {
  if (predictions.empty()) throw InvalidArgument("accuracy needs at least one prediction");
  if (predictions.size() != labels.size()) throw InvalidArgument("prediction/label mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double oscr(std::span<const KnownOutcome> known, std::span<const double> unknown_scores) {
  if (known.empty() || unknown_scores.empty())
    throw InvalidArgument("OSCR needs both known and unknown samples");
  std::vector<double> correct;
  for (const auto& k : known)
    if (k.correct) correct.push_back(k.s_max);
  std::sort(correct.begin(), correct.end());
  long long area = 0;
  for (double u : unknown_scores)
    area += correct.end() - std::lower_bound(correct.begin(), correct.end(), u);
  return static_cast<double>(area) /
         (static_cast<double>(known.size()) * static_cast<double>(unknown_scores.size()));
}

std::optional<double> incon_metric(std::span<const ClassId> preds_a,
                                   std::span<const ClassId> preds_b,
                                   std::span<const bool> is_known) {
  if (preds_a.size() != preds_b.size() || preds_a.size() != is_known.size())
    throw InvalidArgument("prediction lists are not aligned");
  std::size_t n_known = 0, n_unknown = 0, changed_known = 0, changed_unknown = 0;
  for (std::size_t i = 0; i < preds_a.size(); ++i) {
    const bool changed = preds_a[i] != preds_b[i];
    if (is_known[i]) {
      ++n_known;
      changed_known += changed;
    } else {
      ++n_unknown;
      changed_unknown += changed;
    }
  }
  if (n_known == 0 || n_unknown == 0)
    throw InvalidArgument("Incon needs both known and unknown samples");
  if (changed_known == 0) return std::nullopt;
  const double unknown_rate = static_cast<double>(changed_unknown) / static_cast<double>(n_unknown);
  const double known_rate = static_cast<double>(changed_known) / static_cast<double>(n_known);
  return unknown_rate / known_rate;
}

Eigen::MatrixXd proximity_matrix(const Eigen::MatrixXd& prototypes) {
  const Eigen::Index N = prototypes.rows();
  if (N < 2) throw InvalidArgument("proximity matrix needs at least two prototypes");
  const Eigen::MatrixXd gram = prototypes * prototypes.transpose();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index k = 0; k < N; ++k) {
    Eigen::RowVectorXd logits(N - 1);
    for (Eigen::Index c = 0; c < N - 1; ++c) logits(c) = gram(k, c < k ? c : c + 1);
    const Eigen::RowVectorXd probs = softmax_rows(logits);
    for (Eigen::Index c = 0; c < N - 1; ++c) out(k, c < k ? c : c + 1) = probs(c);
  }
  return out;
}

Eigen::MatrixXi agreement_confusion(std::span<const ClassId> preds_a,
                                    std::span<const ClassId> preds_b,
                                    std::span<const bool> is_known, Subset subset,
                                    int n_classes) {
  if (preds_a.size() != preds_b.size() || preds_a.size() != is_known.size())
    throw InvalidArgument("prediction lists are not aligned");
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(n_classes, n_classes);
  const bool want_known = subset == Subset::known;
  for (std::size_t i = 0; i < preds_a.size(); ++i) {
    if (is_known[i] != want_known) continue;
    if (preds_a[i] < 0 || preds_a[i] >= n_classes || preds_b[i] < 0 || preds_b[i] >= n_classes)
      throw InvalidArgument("prediction outside the class range");
    ++counts(preds_a[i], preds_b[i]);
  }
  return counts;
}

double off_diagonal_fraction(const Eigen::MatrixXi& counts) {
  const long total = counts.cast<long>().sum();
  if (total == 0) return 0.0;
  const long diag = counts.diagonal().cast<long>().sum();
  return static_cast<double>(total - diag) / static_cast<double>(total);
}

}  // namespace predin
