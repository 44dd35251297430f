#pragma once

#include <optional>
#include <span>
#include <vector>

#include "predin/common.hpp"

namespace predin {

/// Mann-Whitney AUC: P(known > unknown) + 0.5 * P(tie).
double auc(std::span<const double> known_scores, std::span<const double> unknown_scores);

double closed_acc(std::span<const ClassId> predictions, std::span<const ClassId> labels);

struct KnownOutcome {
  double s_max = 0.0;
  bool correct = false;
};

/// Area under the CCR-vs-FPR curve swept over every threshold. Each unknown sample adds a
/// step of width 1/n_unknown at height CCR(s_u), where CCR counts correct knowns with
/// s_max >= s_u.
double oscr(std::span<const KnownOutcome> known, std::span<const double> unknown_scores);

/// Ratio of the branch-disagreement rate on unknown samples to that on known samples.
/// nullopt when the known disagreement rate is zero.
std::optional<double> incon_metric(std::span<const ClassId> preds_a,
                                   std::span<const ClassId> preds_b,
                                   std::span<const bool> is_known);

/// Row k holds softmax over j != k of p^k . p^j; the diagonal is zero.
Eigen::MatrixXd proximity_matrix(const Eigen::MatrixXd& prototypes);

enum class Subset { known, unknown };

/// Cell (a, b) counts subset samples predicted a by branch A and b by branch B.
Eigen::MatrixXi agreement_confusion(std::span<const ClassId> preds_a,
                                    std::span<const ClassId> preds_b,
                                    std::span<const bool> is_known, Subset subset,
                                    int n_classes);

/// Fraction of a count matrix's mass that lies off the diagonal (0 for an empty matrix).
double off_diagonal_fraction(const Eigen::MatrixXi& counts);

}  // namespace predin
