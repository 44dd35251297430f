#include "predin/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace predin {

Branch make_branch(const EncoderSpec& spec, Eigen::Index n_classes, std::uint64_t seed,
                   double momentum) {
  Branch b;
  b.seed = seed;
  b.encoder = init_encoder<double>(spec, derive_seed(seed, 0));
  b.prototypes = init_prototypes<double>(n_classes, spec.output_dim, derive_seed(seed, 1));
  b.optimizer.momentum = momentum;
  return b;
}

std::vector<ParamBlock<double>> param_blocks(Branch& branch) {
  std::vector<ParamBlock<double>> blocks;
  for (auto& l : branch.encoder.layers) {
    blocks.push_back(block(l.weight));
    blocks.push_back(block(l.bias));
  }
  blocks.push_back(block(branch.prototypes.prototypes));
  return blocks;
}

SoftmaxModel make_softmax_model(const EncoderSpec& spec, Eigen::Index n_classes,
                                std::uint64_t seed, double momentum) {
  if (n_classes < 2) throw InvalidArgument("softmax head needs at least two classes");
  SoftmaxModel m;
  m.seed = seed;
  m.encoder = init_encoder<double>(spec, derive_seed(seed, 0));
  Rng rng(derive_seed(seed, 1));
  m.head_weight = standard_normal<double>(n_classes, spec.output_dim, rng) *
                  std::sqrt(1.0 / static_cast<double>(spec.output_dim));
  m.head_bias = Eigen::VectorXd::Zero(n_classes);
  m.optimizer.momentum = momentum;
  return m;
}

std::vector<Eigen::Index> epoch_order(Eigen::Index n_samples, std::uint64_t shuffle_seed,
                                      int epoch) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_samples));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

namespace {

void check_training_inputs(const Eigen::MatrixXd& inputs, const Labels& labels,
                           const TrainConfig& config) {
  if (inputs.rows() != labels.size()) throw InvalidArgument("inputs and labels disagree in length");
  if (config.epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (config.batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (config.epochs > 0 && inputs.rows() < 1) throw InvalidArgument("no training samples");
}

// Calls step(rows, labels, epoch, batch, row) for every mini-batch and averages the trace.
template <typename Step>
LossTrace run_epochs(const Eigen::MatrixXd& inputs, const Labels& labels,
                     const TrainConfig& config, Step&& step) {
  check_training_inputs(inputs, labels, config);
  LossTrace trace;
  const Eigen::Index n = inputs.rows();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.schedule);
    const auto order = epoch_order(n, config.shuffle_seed, epoch);
    LossTraceRow row;
    row.epoch = epoch;
    int batches = 0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size, ++batches) {
      const Eigen::Index len = std::min<Eigen::Index>(config.batch_size, n - start);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
      const Eigen::MatrixXd x = inputs(idx, Eigen::all);
      const Labels y = labels(idx);
      LossTraceRow batch_row = step(x, y, epoch, batches, lr);
      if (!std::isfinite(batch_row.total))
        throw TrainingError("non-finite loss", epoch, batches);
      row.pl_a += batch_row.pl_a;
      row.pl_b += batch_row.pl_b;
      row.incon += batch_row.incon;
      row.trip_a += batch_row.trip_a;
      row.trip_b += batch_row.trip_b;
      row.total += batch_row.total;
    }
    const double inv = 1.0 / batches;
    row.pl_a *= inv;
    row.pl_b *= inv;
    row.incon *= inv;
    row.trip_a *= inv;
    row.trip_b *= inv;
    row.total *= inv;
    trace.push_back(row);
  }
  return trace;
}

void apply_update(Branch& branch, const EncoderGrads<double>& enc_grads,
                  const Eigen::MatrixXd& proto_grad, double lr, int epoch, int batch) {
  auto params = param_blocks(branch);
  std::vector<GradBlock<double>> grads;
  for (const auto& g : enc_grads) {
    grads.push_back(block(g.weight));
    grads.push_back(block(g.bias));
  }
  grads.push_back(block(proto_grad));
  branch.optimizer.learning_rate = lr;
  branch.optimizer.epoch = epoch;
  sgd_step(params, grads, branch.optimizer, batch);
  ++branch.encoder.version;
}

}  // namespace

DualStep div_loss(const Eigen::MatrixXd& inputs, const Labels& labels, const Branch& a,
                  const Branch& b, const DivHyperParams<double>& hp, bool freeze_b) {
  if (a.prototypes.n_classes() != b.prototypes.n_classes() ||
      a.prototypes.dim() != b.prototypes.dim())
    throw InvalidArgument("branches must share (N, d)");
  ForwardCache<double> cache_a, cache_b;
  const Eigen::MatrixXd za = forward(a.encoder, inputs, &cache_a);
  const Eigen::MatrixXd zb = forward(b.encoder, inputs, freeze_b ? nullptr : &cache_b);
  DualStep step;
  step.loss =
      div_loss_embeddings(za, a.prototypes.prototypes, zb, b.prototypes.prototypes, labels, hp,
                          freeze_b);
  step.encoder_grads_a = backward(a.encoder, cache_a, step.loss.grad_embeddings_a);
  if (!freeze_b) step.encoder_grads_b = backward(b.encoder, cache_b, step.loss.grad_embeddings_b);
  auto ra = cache_a.regime();
  step.loss.regime.insert(step.loss.regime.end(), ra.begin(), ra.end());
  if (!freeze_b) {
    auto rb = cache_b.regime();
    step.loss.regime.insert(step.loss.regime.end(), rb.begin(), rb.end());
  }
  return step;
}

LossTrace train(DualModel& model, const Eigen::MatrixXd& inputs, const Labels& labels,
                const TrainConfig& config) {
  model.hp.validate();
  return run_epochs(inputs, labels, config,
                    [&](const Eigen::MatrixXd& x, const Labels& y, int epoch, int batch,
                        double lr) {
                      const DualStep step = div_loss(x, y, model.a, model.b, model.hp);
                      if (!std::isfinite(step.loss.total))
                        throw TrainingError("non-finite loss", epoch, batch);
                      // Fixed update order: branch A, then branch B.
                      apply_update(model.a, step.encoder_grads_a, step.loss.grad_prototypes_a, lr,
                                   epoch, batch);
                      apply_update(model.b, step.encoder_grads_b, step.loss.grad_prototypes_b, lr,
                                   epoch, batch);
                      return LossTraceRow{epoch,
                                          step.loss.pl_a,
                                          step.loss.pl_b,
                                          step.loss.incon,
                                          step.loss.trip_a,
                                          step.loss.trip_b,
                                          step.loss.total};
                    });
}

LossTrace train_single(Branch& branch, const Eigen::MatrixXd& inputs, const Labels& labels,
                       const DivHyperParams<double>& hp, const TrainConfig& config) {
  hp.validate();
  return run_epochs(
      inputs, labels, config,
      [&](const Eigen::MatrixXd& x, const Labels& y, int epoch, int batch, double lr) {
        ForwardCache<double> cache;
        const Eigen::MatrixXd z = forward(branch.encoder, x, &cache);
        LossGrad<double> pl = pl_loss(z, y, branch.prototypes.prototypes, hp.pl());
        LossTraceRow row;
        row.epoch = epoch;
        row.pl_a = pl.value;
        if (hp.alpha > 0) {
          const auto trip = triplet_loss(z, y, branch.prototypes.prototypes, hp.m2);
          row.trip_a = trip.value;
          pl.grad_embeddings += hp.alpha * trip.grad_embeddings;
          pl.grad_prototypes += hp.alpha * trip.grad_prototypes;
        }
        row.total = row.pl_a + hp.alpha * row.trip_a;
        if (!std::isfinite(row.total)) throw TrainingError("non-finite loss", epoch, batch);
        const auto enc = backward(branch.encoder, cache, pl.grad_embeddings);
        apply_update(branch, enc, pl.grad_prototypes, lr, epoch, batch);
        return row;
      });
}

std::vector<Branch> train_sequential(int k, const EncoderSpec& spec, Eigen::Index n_classes,
                                     const std::vector<std::uint64_t>& branch_seeds,
                                     const Eigen::MatrixXd& inputs, const Labels& labels,
                                     const DivHyperParams<double>& hp, const TrainConfig& config,
                                     std::vector<LossTrace>* traces, double momentum) {
  if (k < 1) throw InvalidArgument("sequential training needs K >= 1");
  if (static_cast<int>(branch_seeds.size()) < k)
    throw InvalidArgument("need one seed per sequential model");
  hp.validate();
  std::vector<Branch> models;
  for (int t = 0; t < k; ++t) {
    Branch current =
        make_branch(spec, n_classes, branch_seeds[static_cast<std::size_t>(t)], momentum);
    LossTrace trace;
    if (t == 0) {
      DivHyperParams<double> pl_only = hp;
      pl_only.gamma = 0;
      pl_only.alpha = 0;
      trace = train_single(current, inputs, labels, pl_only, config);
    } else {
      const Branch& former = models.back();
      trace = run_epochs(inputs, labels, config,
                         [&](const Eigen::MatrixXd& x, const Labels& y, int epoch, int batch,
                             double lr) {
                           const DualStep step = div_loss(x, y, current, former, hp, true);
                           apply_update(current, step.encoder_grads_a,
                                        step.loss.grad_prototypes_a, lr, epoch, batch);
                           return LossTraceRow{epoch,           step.loss.pl_a, 0.0,
                                               step.loss.incon, step.loss.trip_a, 0.0,
                                               step.loss.total};
                         });
    }
    if (traces) traces->push_back(std::move(trace));
    models.push_back(std::move(current));
  }
  return models;
}

SoftmaxStep softmax_loss(const Eigen::MatrixXd& inputs, const Labels& labels,
                         const SoftmaxModel& model) {
  const Eigen::Index N = model.head_weight.rows();
  detail::check_labels<double>(labels, inputs.rows(), N);
  ForwardCache<double> cache;
  const Eigen::MatrixXd z = forward(model.encoder, inputs, &cache);
  Eigen::MatrixXd logits = z * model.head_weight.transpose();
  logits.rowwise() += model.head_bias.transpose();
  Eigen::MatrixXd probs = softmax_rows(logits);
  const double M = static_cast<double>(inputs.rows());
  SoftmaxStep step;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double log_z = std::log((logits.row(i).array() - mx).exp().sum()) + mx;
    step.loss -= logits(i, labels(i)) - log_z;
    probs(i, labels(i)) -= 1.0;
  }
  step.loss /= M;
  probs /= M;
  step.grad_head_weight = probs.transpose() * z;
  step.grad_head_bias = probs.colwise().sum().transpose();
  step.encoder_grads = backward(model.encoder, cache, probs * model.head_weight);
  return step;
}

LossTrace baseline_softmax_train(SoftmaxModel& model, const Eigen::MatrixXd& inputs,
                                 const Labels& labels, const TrainConfig& config) {
  return run_epochs(inputs, labels, config,
                    [&](const Eigen::MatrixXd& x, const Labels& y, int epoch, int batch,
                        double lr) {
                      const SoftmaxStep step = softmax_loss(x, y, model);
                      if (!std::isfinite(step.loss))
                        throw TrainingError("non-finite loss", epoch, batch);
                      std::vector<ParamBlock<double>> params;
                      std::vector<GradBlock<double>> grads;
                      for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
                        params.push_back(block(model.encoder.layers[l].weight));
                        params.push_back(block(model.encoder.layers[l].bias));
                        grads.push_back(block(step.encoder_grads[l].weight));
                        grads.push_back(block(step.encoder_grads[l].bias));
                      }
                      params.push_back(block(model.head_weight));
                      params.push_back(block(model.head_bias));
                      grads.push_back(block(step.grad_head_weight));
                      grads.push_back(block(step.grad_head_bias));
                      model.optimizer.learning_rate = lr;
                      model.optimizer.epoch = epoch;
                      sgd_step(params, grads, model.optimizer, batch);
                      ++model.encoder.version;
                      LossTraceRow row;
                      row.epoch = epoch;
                      row.pl_a = step.loss;
                      row.total = step.loss;
                      return row;
                    });
}

Eigen::MatrixXd branch_scores(const Branch& branch, const Eigen::MatrixXd& inputs) {
  return forward(branch.encoder, inputs) * branch.prototypes.prototypes.transpose();
}

Eigen::MatrixXd softmax_scores(const SoftmaxModel& model, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd logits = forward(model.encoder, inputs) * model.head_weight.transpose();
  logits.rowwise() += model.head_bias.transpose();
  return softmax_rows(logits);
}

}  // namespace predin
