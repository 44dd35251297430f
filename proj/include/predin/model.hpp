#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "predin/encoder.hpp"
#include "predin/inconsistency.hpp"
#include "predin/optimizer.hpp"
#include "predin/prototype.hpp"
#include "predin/signal.hpp"

namespace predin {

/// One perspective: an encoder, its class prototypes and their shared optimizer state.
struct Branch {
  EncoderParams<double> encoder;
  PrototypeSet<double> prototypes;
  OptimizerState<double> optimizer;
  std::uint64_t seed = 0;
};

/// Encoder and prototypes are seeded from independent streams of `seed`.
Branch make_branch(const EncoderSpec& spec, Eigen::Index n_classes, std::uint64_t seed,
                   double momentum = kDefaultMomentum);

std::vector<ParamBlock<double>> param_blocks(Branch& branch);

struct DualModel {
  Branch a;
  Branch b;
  DivHyperParams<double> hp;
};

/// Linear classification head on top of the shared encoder architecture.
struct SoftmaxModel {
  EncoderParams<double> encoder;
  Eigen::MatrixXd head_weight;  // N x d
  Eigen::VectorXd head_bias;    // N
  OptimizerState<double> optimizer;
  std::uint64_t seed = 0;
};

SoftmaxModel make_softmax_model(const EncoderSpec& spec, Eigen::Index n_classes,
                                std::uint64_t seed, double momentum = kDefaultMomentum);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 256;
  LrSchedule schedule{};
  std::uint64_t shuffle_seed = 0;
};

/// Per-epoch means over mini-batches. Unused components stay zero.
struct LossTraceRow {
  int epoch = 0;
  double pl_a = 0, pl_b = 0, incon = 0, trip_a = 0, trip_b = 0, total = 0;
};
using LossTrace = std::vector<LossTraceRow>;

/// Mini-batch index order for one epoch; identical for every branch and every variant.
std::vector<Eigen::Index> epoch_order(Eigen::Index n_samples, std::uint64_t shuffle_seed,
                                      int epoch);

/// Embedding-level objective plus encoder gradients for both branches on one batch.
struct DualStep {
  DivLoss<double> loss;
  EncoderGrads<double> encoder_grads_a;
  EncoderGrads<double> encoder_grads_b;
};

DualStep div_loss(const Eigen::MatrixXd& inputs, const Labels& labels, const Branch& a,
                  const Branch& b, const DivHyperParams<double>& hp, bool freeze_b = false);

/// Joint training of both branches on identical mini-batches.
LossTrace train(DualModel& model, const Eigen::MatrixXd& inputs, const Labels& labels,
                const TrainConfig& config);

/// Single-branch prototype learning (L_PL, plus alpha * L_trip when alpha > 0).
LossTrace train_single(Branch& branch, const Eigen::MatrixXd& inputs, const Labels& labels,
                       const DivHyperParams<double>& hp, const TrainConfig& config);

/// Model 1 is trained with L_PL alone; model t > 1 with L_Div against frozen model t - 1.
std::vector<Branch> train_sequential(int k, const EncoderSpec& spec, Eigen::Index n_classes,
                                     const std::vector<std::uint64_t>& branch_seeds,
                                     const Eigen::MatrixXd& inputs, const Labels& labels,
                                     const DivHyperParams<double>& hp, const TrainConfig& config,
                                     std::vector<LossTrace>* traces = nullptr,
                                     double momentum = kDefaultMomentum);

struct SoftmaxStep {
  double loss = 0.0;
  EncoderGrads<double> encoder_grads;
  Eigen::MatrixXd grad_head_weight;
  Eigen::VectorXd grad_head_bias;
};

SoftmaxStep softmax_loss(const Eigen::MatrixXd& inputs, const Labels& labels,
                         const SoftmaxModel& model);

LossTrace baseline_softmax_train(SoftmaxModel& model, const Eigen::MatrixXd& inputs,
                                 const Labels& labels, const TrainConfig& config);

/// M x N similarity (z . p^k) for a prototype branch.
Eigen::MatrixXd branch_scores(const Branch& branch, const Eigen::MatrixXd& inputs);

/// M x N class posterior for the softmax baseline.
Eigen::MatrixXd softmax_scores(const SoftmaxModel& model, const Eigen::MatrixXd& inputs);

// Checkpoints: a versioned text format with a spec header, layer shapes and row-major values
// written in shortest round-trip form, so load(save(x)) is bitwise identical.
void save_checkpoint(const std::vector<Branch>& branches, const DivHyperParams<double>& hp,
                     const std::filesystem::path& path);
struct Checkpoint {
  std::vector<Branch> branches;
  DivHyperParams<double> hp;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace predin
