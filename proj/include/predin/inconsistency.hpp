#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "predin/prototype.hpp"

namespace predin {

/// Weights and margins of the joint objective
///   L = L_PL(A) + L_PL(B) + gamma * L_incon(A, B) + alpha * (L_trip(A) + L_trip(B)).
template <typename Scalar>
struct DivHyperParams {
  Scalar beta = Scalar(1);
  Scalar gamma = Scalar(1);
  Scalar alpha = Scalar(1);
  Scalar m1 = Scalar(0.5);
  Scalar m2 = Scalar(1);
  Scalar epsilon_log = Scalar(1e-12);
  CompactnessForm form = CompactnessForm::huber_sq;

  void validate() const {
    if (beta < 0 || gamma < 0 || alpha < 0) throw InvalidArgument("loss weights must be >= 0");
    if (m1 < 0 || m2 < 0) throw InvalidArgument("margins must be >= 0");
    if (!(epsilon_log > 0)) throw InvalidArgument("epsilon_log must be > 0");
  }
  PLHyperParams<Scalar> pl() const { return {beta, form}; }
};

/// Column c of a proximity row for label y refers to class c when c < y, c + 1 otherwise.
inline Eigen::Index other_class(Eigen::Index column, Eigen::Index label) {
  return column < label ? column : column + 1;
}

/// d(z, p^j) = -max(z.p^y - z.p^j - m1, 0) for every j != y, in ascending j order.
template <typename DerivedZ, typename DerivedP>
Vector<typename DerivedZ::Scalar> margin_distance(const Eigen::MatrixBase<DerivedZ>& z,
                                                  const Eigen::MatrixBase<DerivedP>& prototypes,
                                                  ClassId label, typename DerivedZ::Scalar m1) {
  using Scalar = typename DerivedZ::Scalar;
  const Eigen::Index N = prototypes.rows();
  if (z.size() != prototypes.cols()) throw InvalidArgument("embedding/prototype dim mismatch");
  if (label < 0 || label >= N) throw InvalidArgument("label out of range");
  const Vector<Scalar> sims = prototypes * z.derived().reshaped();
  Vector<Scalar> d(N - 1);
  for (Eigen::Index c = 0; c < N - 1; ++c)
    d(c) = -std::max(sims(label) - sims(other_class(c, label)) - m1, Scalar(0));
  return d;
}

/// Softmax over the non-target classes of the clamped relative distances, one row per sample.
template <typename Scalar>
struct ProximityDistribution {
  Matrix<Scalar> probs;                                      // M x (N-1)
  Labels excluded;                                           // y_i per row
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> active;  // gap above the margin
};

/// z_i . p^{y_i} per row.
template <typename DerivedZ, typename DerivedP>
Vector<typename DerivedZ::Scalar> target_similarity(const Eigen::MatrixBase<DerivedZ>& embeddings,
                                                   const Labels& labels,
                                                   const Eigen::MatrixBase<DerivedP>& prototypes) {
  detail::check_dims(embeddings, prototypes);
  detail::check_labels<typename DerivedZ::Scalar>(labels, embeddings.rows(), prototypes.rows());
  Vector<typename DerivedZ::Scalar> out(embeddings.rows());
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i)
    out(i) = embeddings.row(i).dot(prototypes.row(labels(i)));
  return out;
}

/// `anchors`, when given, replaces z_i . p^{y_i}; holding it fixed makes the stop-gradient
/// explicit for finite-difference checks.
template <typename DerivedZ, typename DerivedP>
ProximityDistribution<typename DerivedZ::Scalar> proximity_probs(
    const Eigen::MatrixBase<DerivedZ>& embeddings, const Labels& labels,
    const Eigen::MatrixBase<DerivedP>& prototypes, typename DerivedZ::Scalar m1,
    const Vector<typename DerivedZ::Scalar>* anchors = nullptr) {
  using Scalar = typename DerivedZ::Scalar;
  detail::check_dims(embeddings, prototypes);
  detail::check_labels<Scalar>(labels, embeddings.rows(), prototypes.rows());
  const Eigen::Index M = embeddings.rows(), N = prototypes.rows();
  const Matrix<Scalar> sims = embeddings * prototypes.transpose();
  ProximityDistribution<Scalar> out;
  out.excluded = labels;
  if (anchors && anchors->size() != M) throw InvalidArgument("one anchor per sample required");
  out.active.resize(M, N - 1);
  Matrix<Scalar> logits(M, N - 1);
  for (Eigen::Index i = 0; i < M; ++i) {
    // The target similarity is a constant: no gradient flows through it.
    const Scalar anchor = anchors ? (*anchors)(i) : sims(i, labels(i));
    for (Eigen::Index c = 0; c < N - 1; ++c) {
      const Scalar gap = anchor - sims(i, other_class(c, labels(i))) - m1;
      out.active(i, c) = gap > Scalar(0);
      logits(i, c) = out.active(i, c) ? gap : Scalar(0);
    }
  }
  out.probs = softmax_rows(logits);
  return out;
}

/// Pulls a gradient on the proximity probabilities back to embeddings and prototypes.
template <typename Scalar, typename DerivedZ, typename DerivedP>
void proximity_backward(const ProximityDistribution<Scalar>& dist,
                        const Eigen::MatrixBase<DerivedZ>& embeddings,
                        const Eigen::MatrixBase<DerivedP>& prototypes,
                        const Matrix<Scalar>& grad_probs, Matrix<Scalar>& grad_embeddings,
                        Matrix<Scalar>& grad_prototypes) {
  const Eigen::Index M = embeddings.rows(), N = prototypes.rows();
  if (grad_embeddings.size() == 0) grad_embeddings = Matrix<Scalar>::Zero(M, embeddings.cols());
  if (grad_prototypes.size() == 0) grad_prototypes = Matrix<Scalar>::Zero(N, prototypes.cols());
  for (Eigen::Index i = 0; i < M; ++i) {
    const auto q = dist.probs.row(i).array();
    const auto g = grad_probs.row(i).array();
    const auto dlogit = (q * (g - (q * g).sum())).eval();
    for (Eigen::Index c = 0; c < N - 1; ++c) {
      if (!dist.active(i, c)) continue;
      // logit = anchor - z.p^j - m1, so d logit / d(z.p^j) = -1.
      const Eigen::Index j = other_class(c, dist.excluded(i));
      grad_embeddings.row(i) -= dlogit(c) * prototypes.row(j);
      grad_prototypes.row(j) -= dlogit(c) * embeddings.row(i);
    }
  }
}

template <typename Scalar>
struct InconsistencyLoss {
  Scalar value = Scalar(0);
  Matrix<Scalar> grad_probs_a;
  Matrix<Scalar> grad_probs_b;
  std::vector<std::uint8_t> regime;  // 1 where the log argument was clamped
};

/// -(1/M) sum_i log max(sum_k [pA(1-pB) + pB(1-pA)], epsilon_log).
template <typename Scalar>
InconsistencyLoss<Scalar> inconsistency_loss(const ProximityDistribution<Scalar>& a,
                                             const ProximityDistribution<Scalar>& b,
                                             Scalar epsilon_log = Scalar(1e-12)) {
  if (a.probs.rows() != b.probs.rows() || a.probs.cols() != b.probs.cols())
    throw InvalidArgument("proximity distributions have different shapes");
  if (a.excluded != b.excluded)
    throw InvalidArgument("proximity distributions exclude different classes");
  if (a.probs.rows() < 1) throw InvalidArgument("empty proximity distribution");
  const Eigen::Index M = a.probs.rows();
  InconsistencyLoss<Scalar> out;
  out.grad_probs_a = Matrix<Scalar>::Zero(M, a.probs.cols());
  out.grad_probs_b = Matrix<Scalar>::Zero(M, a.probs.cols());
  for (Eigen::Index i = 0; i < M; ++i) {
    const auto pa = a.probs.row(i).array();
    const auto pb = b.probs.row(i).array();
    const Scalar inner = (pa * (Scalar(1) - pb) + pb * (Scalar(1) - pa)).sum();
    const bool clamped = inner < epsilon_log;
    out.regime.push_back(clamped);
    if (clamped) {
      out.value -= std::log(epsilon_log);
      continue;
    }
    out.value -= std::log(inner);
    const Scalar scale = Scalar(-1) / (inner * Scalar(M));
    out.grad_probs_a.row(i) = (scale * (Scalar(1) - Scalar(2) * pb)).matrix();
    out.grad_probs_b.row(i) = (scale * (Scalar(1) - Scalar(2) * pa)).matrix();
  }
  out.value /= Scalar(M);
  return out;
}

/// For each class k, the index of the Euclidean-nearest other prototype (lowest index on ties).
template <typename Derived>
std::vector<Eigen::Index> nearest_negatives(const Eigen::MatrixBase<Derived>& prototypes) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index N = prototypes.rows();
  std::vector<Eigen::Index> out(static_cast<std::size_t>(N));
  for (Eigen::Index k = 0; k < N; ++k) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < N; ++j) {
      if (j == k) continue;
      const Scalar d = (prototypes.row(k) - prototypes.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        out[static_cast<std::size_t>(k)] = j;
      }
    }
  }
  return out;
}

/// (1/M) sum_i max(||z_i - p^{y_i}|| - ||z_i - p^{j*}|| + m2, 0), j* = nearest_negatives[y_i].
template <typename DerivedZ, typename DerivedP>
LossGrad<typename DerivedZ::Scalar> triplet_loss(const Eigen::MatrixBase<DerivedZ>& embeddings,
                                                 const Labels& labels,
                                                 const Eigen::MatrixBase<DerivedP>& prototypes,
                                                 typename DerivedZ::Scalar m2) {
  using Scalar = typename DerivedZ::Scalar;
  detail::check_dims(embeddings, prototypes);
  detail::check_labels<Scalar>(labels, embeddings.rows(), prototypes.rows());
  const Eigen::Index M = embeddings.rows();
  const auto negatives = nearest_negatives(prototypes);
  LossGrad<Scalar> out;
  out.grad_embeddings = Matrix<Scalar>::Zero(M, embeddings.cols());
  out.grad_prototypes = Matrix<Scalar>::Zero(prototypes.rows(), prototypes.cols());
  for (auto j : negatives) out.regime.push_back(static_cast<std::uint8_t>(j));
  const Scalar inv_m = Scalar(1) / Scalar(M);
  for (Eigen::Index i = 0; i < M; ++i) {
    const Eigen::Index k = labels(i);
    const Eigen::Index j = negatives[static_cast<std::size_t>(k)];
    const RowVector<Scalar> to_pos = embeddings.row(i) - prototypes.row(k);
    const RowVector<Scalar> to_neg = embeddings.row(i) - prototypes.row(j);
    const Scalar d_pos = to_pos.norm(), d_neg = to_neg.norm();
    const Scalar hinge = d_pos - d_neg + m2;
    out.regime.push_back(hinge > Scalar(0));
    if (hinge <= Scalar(0)) continue;
    out.value += hinge;
    RowVector<Scalar> g = RowVector<Scalar>::Zero(embeddings.cols());
    if (d_pos > Scalar(0)) {
      g += to_pos / d_pos;
      out.grad_prototypes.row(k) -= inv_m * to_pos / d_pos;
    }
    if (d_neg > Scalar(0)) {
      g -= to_neg / d_neg;
      out.grad_prototypes.row(j) += inv_m * to_neg / d_neg;
    }
    out.grad_embeddings.row(i) = inv_m * g;
  }
  out.value *= inv_m;
  return out;
}

/// Components and embedding/prototype gradients of the two-branch objective.
template <typename Scalar>
struct DivLoss {
  Scalar total = Scalar(0);
  Scalar pl_a = Scalar(0), pl_b = Scalar(0);
  Scalar incon = Scalar(0);
  Scalar trip_a = Scalar(0), trip_b = Scalar(0);
  Matrix<Scalar> grad_embeddings_a, grad_prototypes_a;
  Matrix<Scalar> grad_embeddings_b, grad_prototypes_b;
  std::vector<std::uint8_t> regime;
};

/// Both branches see the same batch; row i of branch A is paired with row i of branch B.
template <typename Scalar>
struct FrozenAnchors {
  Vector<Scalar> a;
  Vector<Scalar> b;
};

/// When `freeze_b` is set, branch B only supplies its proximity distribution (no PL/trip terms
/// for B and no gradients into B), which is the sequential multi-perspective objective.
template <typename DerivedZ, typename DerivedP>
DivLoss<typename DerivedZ::Scalar> div_loss_embeddings(
    const Eigen::MatrixBase<DerivedZ>& emb_a, const Eigen::MatrixBase<DerivedP>& proto_a,
    const Eigen::MatrixBase<DerivedZ>& emb_b, const Eigen::MatrixBase<DerivedP>& proto_b,
    const Labels& labels, const DivHyperParams<typename DerivedZ::Scalar>& hp,
    bool freeze_b = false, const FrozenAnchors<typename DerivedZ::Scalar>* anchors = nullptr) {
  using Scalar = typename DerivedZ::Scalar;
  hp.validate();
  if (proto_a.rows() != proto_b.rows() || proto_a.cols() != proto_b.cols())
    throw InvalidArgument("branches must share (N, d)");
  DivLoss<Scalar> out;
  auto append = [&out](const std::vector<std::uint8_t>& r) {
    out.regime.insert(out.regime.end(), r.begin(), r.end());
  };

  LossGrad<Scalar> pl_a = pl_loss(emb_a, labels, proto_a, hp.pl());
  out.pl_a = pl_a.value;
  out.grad_embeddings_a = std::move(pl_a.grad_embeddings);
  out.grad_prototypes_a = std::move(pl_a.grad_prototypes);
  append(pl_a.regime);
  if (!freeze_b) {
    LossGrad<Scalar> pl_b = pl_loss(emb_b, labels, proto_b, hp.pl());
    out.pl_b = pl_b.value;
    out.grad_embeddings_b = std::move(pl_b.grad_embeddings);
    out.grad_prototypes_b = std::move(pl_b.grad_prototypes);
    append(pl_b.regime);
  } else {
    out.grad_embeddings_b = Matrix<Scalar>::Zero(emb_b.rows(), emb_b.cols());
    out.grad_prototypes_b = Matrix<Scalar>::Zero(proto_b.rows(), proto_b.cols());
  }

  if (hp.gamma > Scalar(0)) {
    const auto dist_a = proximity_probs(emb_a, labels, proto_a, hp.m1, anchors ? &anchors->a : nullptr);
    const auto dist_b = proximity_probs(emb_b, labels, proto_b, hp.m1, anchors ? &anchors->b : nullptr);
    const auto inc = inconsistency_loss(dist_a, dist_b, hp.epsilon_log);
    out.incon = inc.value;
    append(inc.regime);
    for (Eigen::Index i = 0; i < dist_a.active.size(); ++i) {
      out.regime.push_back(dist_a.active.data()[i]);
      out.regime.push_back(dist_b.active.data()[i]);
    }
    Matrix<Scalar> ga, pa, gb, pb;
    proximity_backward(dist_a, emb_a, proto_a, Matrix<Scalar>(hp.gamma * inc.grad_probs_a), ga, pa);
    out.grad_embeddings_a += ga;
    out.grad_prototypes_a += pa;
    if (!freeze_b) {
      proximity_backward(dist_b, emb_b, proto_b, Matrix<Scalar>(hp.gamma * inc.grad_probs_b), gb,
                         pb);
      out.grad_embeddings_b += gb;
      out.grad_prototypes_b += pb;
    }
  }

  if (hp.alpha > Scalar(0)) {
    const auto ta = triplet_loss(emb_a, labels, proto_a, hp.m2);
    out.trip_a = ta.value;
    out.grad_embeddings_a += hp.alpha * ta.grad_embeddings;
    out.grad_prototypes_a += hp.alpha * ta.grad_prototypes;
    append(ta.regime);
    if (!freeze_b) {
      const auto tb = triplet_loss(emb_b, labels, proto_b, hp.m2);
      out.trip_b = tb.value;
      out.grad_embeddings_b += hp.alpha * tb.grad_embeddings;
      out.grad_prototypes_b += hp.alpha * tb.grad_prototypes;
      append(tb.regime);
    }
  }

  out.total = out.pl_a + out.pl_b + hp.gamma * out.incon + hp.alpha * (out.trip_a + out.trip_b);
  return out;
}

}  // namespace predin
