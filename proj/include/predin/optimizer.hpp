#pragma once

#include <vector>

#include "predin/common.hpp"

namespace predin {

inline constexpr double kDefaultMomentum = 0.9;

struct LrSchedule {
  double base_lr = 0.01;
  std::vector<int> milestones{60, 80};
  double factor = 0.1;
};

/// Step decay: base_lr multiplied by `factor` once per milestone already reached.
inline double lr_schedule(int epoch, const LrSchedule& schedule) {
  if (epoch < 0) throw InvalidArgument("epoch must be non-negative");
  double lr = schedule.base_lr;
  for (int m : schedule.milestones)
    if (epoch >= m) lr *= schedule.factor;
  return lr;
}

inline double lr_schedule(int epoch, double base_lr) {
  return lr_schedule(epoch, LrSchedule{base_lr, {60, 80}, 0.1});
}

/// Momentum SGD over an ordered list of parameter blocks; velocity[i] mirrors block i.
template <typename Scalar>
struct OptimizerState {
  Scalar learning_rate = Scalar(0.01);
  Scalar momentum = Scalar(kDefaultMomentum);
  std::vector<Matrix<Scalar>> velocity;
  int epoch = 0;
};

template <typename Scalar>
using ParamBlock = Eigen::Map<Matrix<Scalar>>;
template <typename Scalar>
using GradBlock = Eigen::Map<const Matrix<Scalar>>;

template <typename Scalar>
ParamBlock<Scalar> block(Matrix<Scalar>& m) {
  return {m.data(), m.rows(), m.cols()};
}
template <typename Scalar>
ParamBlock<Scalar> block(Vector<Scalar>& v) {
  return {v.data(), v.size(), 1};
}
template <typename Scalar>
GradBlock<Scalar> block(const Matrix<Scalar>& m) {
  return {m.data(), m.rows(), m.cols()};
}
template <typename Scalar>
GradBlock<Scalar> block(const Vector<Scalar>& v) {
  return {v.data(), v.size(), 1};
}

/// v <- momentum * v + g; p <- p - lr * v. Non-finite gradients abort before any update.
template <typename Scalar>
void sgd_step(std::vector<ParamBlock<Scalar>>& params, const std::vector<GradBlock<Scalar>>& grads,
              OptimizerState<Scalar>& state, int batch_index = -1) {
  if (params.size() != grads.size()) throw InvalidArgument("parameter/gradient block mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols())
      throw InvalidArgument("gradient block " + std::to_string(i) + " has the wrong shape");
    if (!grads[i].allFinite())
      throw TrainingError("non-finite gradient in block " + std::to_string(i), state.epoch,
                          batch_index);
  }
  if (state.velocity.empty())
    for (const auto& p : params) state.velocity.push_back(Matrix<Scalar>::Zero(p.rows(), p.cols()));
  if (state.velocity.size() != params.size())
    throw InvalidArgument("optimizer velocity does not mirror the parameter blocks");
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.velocity[i] = state.momentum * state.velocity[i] + grads[i];
    params[i] -= state.learning_rate * state.velocity[i];
  }
}

}  // namespace predin
