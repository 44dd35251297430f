#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "predin/common.hpp"

namespace predin {

/// N x d matrix of learnable class prototypes; row k belongs to remapped class k.
template <typename Scalar>
struct PrototypeSet {
  Matrix<Scalar> prototypes;
  std::uint64_t seed = 0;

  Eigen::Index n_classes() const { return prototypes.rows(); }
  Eigen::Index dim() const { return prototypes.cols(); }
};

template <typename Scalar = double>
PrototypeSet<Scalar> init_prototypes(Eigen::Index n_classes, Eigen::Index dim, std::uint64_t seed) {
  if (n_classes < 2) throw InvalidArgument("need at least two prototypes");
  if (dim < 1) throw InvalidArgument("prototype dimension must be >= 1");
  Rng rng(seed);
  return {standard_normal<Scalar>(n_classes, dim, rng), seed};
}

/// Loss value with gradients for the embeddings (M x d) and the prototypes (N x d).
/// `regime` records which side of every kink each piecewise term evaluated on.
template <typename Scalar>
struct LossGrad {
  Scalar value = Scalar(0);
  Matrix<Scalar> grad_embeddings;
  Matrix<Scalar> grad_prototypes;
  std::vector<std::uint8_t> regime;
};

namespace detail {

template <typename Scalar>
void check_labels(const Labels& labels, Eigen::Index rows, Eigen::Index n_classes) {
  if (labels.size() != rows) throw InvalidArgument("label count does not match the batch");
  if (rows < 1) throw InvalidArgument("batch must contain at least one sample");
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels(i) < 0 || labels(i) >= n_classes)
      throw InvalidArgument("label " + std::to_string(labels(i)) + " outside 0.." +
                            std::to_string(n_classes - 1));
}

template <typename DerivedZ, typename DerivedP>
void check_dims(const Eigen::MatrixBase<DerivedZ>& z, const Eigen::MatrixBase<DerivedP>& p) {
  if (z.cols() != p.cols())
    throw InvalidArgument("embedding dim " + std::to_string(z.cols()) +
                          " differs from prototype dim " + std::to_string(p.cols()));
}

}  // namespace detail

/// Row-wise softmax with max subtraction.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// p(k | z) = softmax_k(z . p^k): the negative dot product is the distance.
template <typename DerivedZ, typename DerivedP>
Vector<typename DerivedZ::Scalar> class_posterior(const Eigen::MatrixBase<DerivedZ>& z,
                                                  const Eigen::MatrixBase<DerivedP>& prototypes) {
  if (z.size() != prototypes.cols()) throw InvalidArgument("embedding/prototype dim mismatch");
  using Scalar = typename DerivedZ::Scalar;
  const RowVector<Scalar> logits = (prototypes * z.derived().reshaped()).transpose();
  return softmax_rows(logits).transpose();
}

/// Distance-based cross-entropy: -(1/M) sum_i log p(y_i | z_i).
template <typename DerivedZ, typename DerivedP>
LossGrad<typename DerivedZ::Scalar> dce_loss(const Eigen::MatrixBase<DerivedZ>& embeddings,
                                             const Labels& labels,
                                             const Eigen::MatrixBase<DerivedP>& prototypes) {
  using Scalar = typename DerivedZ::Scalar;
  detail::check_dims(embeddings, prototypes);
  detail::check_labels<Scalar>(labels, embeddings.rows(), prototypes.rows());
  const Eigen::Index M = embeddings.rows();
  const Matrix<Scalar> logits = embeddings * prototypes.transpose();
  Matrix<Scalar> dlogits(M, prototypes.rows());
  LossGrad<Scalar> out;
  for (Eigen::Index i = 0; i < M; ++i) {
    const Scalar mx = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - mx).eval();
    const Scalar log_z = std::log(shifted.exp().sum());
    out.value -= shifted(labels(i)) - log_z;
    dlogits.row(i) = (shifted - log_z).exp().matrix();
    dlogits(i, labels(i)) -= Scalar(1);
  }
  out.value /= Scalar(M);
  dlogits /= Scalar(M);
  out.grad_embeddings = dlogits * prototypes;
  out.grad_prototypes = dlogits.transpose() * embeddings;
  return out;
}

enum class CompactnessForm {
  huber_sq,  // 0.5 * ||u||_2^2 below the L1 switch point
  literal,   // 0.5 * ||u||_2 below the L1 switch point
};

/// Piecewise penalty on u = z_i - p^{y_i}: quadratic-ish near zero, L1 beyond ||u||_1 = 1.
template <typename DerivedZ, typename DerivedP>
LossGrad<typename DerivedZ::Scalar> compactness_loss(
    const Eigen::MatrixBase<DerivedZ>& embeddings, const Labels& labels,
    const Eigen::MatrixBase<DerivedP>& prototypes,
    CompactnessForm form = CompactnessForm::huber_sq) {
  using Scalar = typename DerivedZ::Scalar;
  detail::check_dims(embeddings, prototypes);
  detail::check_labels<Scalar>(labels, embeddings.rows(), prototypes.rows());
  const Eigen::Index M = embeddings.rows();
  LossGrad<Scalar> out;
  out.grad_embeddings = Matrix<Scalar>::Zero(M, embeddings.cols());
  out.grad_prototypes = Matrix<Scalar>::Zero(prototypes.rows(), prototypes.cols());
  const Scalar inv_m = Scalar(1) / Scalar(M);
  for (Eigen::Index i = 0; i < M; ++i) {
    const RowVector<Scalar> u = embeddings.row(i) - prototypes.row(labels(i));
    const Scalar l1 = u.template lpNorm<1>();
    RowVector<Scalar> g;
    if (l1 < Scalar(1)) {
      out.regime.push_back(0);
      if (form == CompactnessForm::huber_sq) {
        out.value += Scalar(0.5) * u.squaredNorm();
        g = u;
      } else {
        const Scalar l2 = u.norm();
        out.value += Scalar(0.5) * l2;
        g = l2 > Scalar(0) ? RowVector<Scalar>(Scalar(0.5) * u / l2)
                           : RowVector<Scalar>::Zero(u.size());
      }
    } else {
      out.regime.push_back(1);
      out.value += l1 - Scalar(0.5);
      g = u.array().sign().matrix();
    }
    for (Eigen::Index c = 0; c < u.size(); ++c) out.regime.push_back(u(c) > Scalar(0));
    out.grad_embeddings.row(i) = g * inv_m;
    out.grad_prototypes.row(labels(i)) -= g * inv_m;
  }
  out.value *= inv_m;
  return out;
}

template <typename Scalar>
struct PLHyperParams {
  Scalar beta = Scalar(1);
  CompactnessForm form = CompactnessForm::huber_sq;
};

/// L_PL = L_dce + beta * L_com.
template <typename DerivedZ, typename DerivedP>
LossGrad<typename DerivedZ::Scalar> pl_loss(const Eigen::MatrixBase<DerivedZ>& embeddings,
                                            const Labels& labels,
                                            const Eigen::MatrixBase<DerivedP>& prototypes,
                                            const PLHyperParams<typename DerivedZ::Scalar>& hp) {
  using Scalar = typename DerivedZ::Scalar;
  if (hp.beta < Scalar(0)) throw InvalidArgument("beta must be non-negative");
  LossGrad<Scalar> out = dce_loss(embeddings, labels, prototypes);
  if (hp.beta == Scalar(0)) return out;
  const LossGrad<Scalar> com = compactness_loss(embeddings, labels, prototypes, hp.form);
  out.value += hp.beta * com.value;
  out.grad_embeddings += hp.beta * com.grad_embeddings;
  out.grad_prototypes += hp.beta * com.grad_prototypes;
  out.regime = com.regime;
  return out;
}

}  // namespace predin
