#include "predin/gradient_suite.hpp"

#include <functional>

#include "predin/encoder.hpp"
#include "predin/inconsistency.hpp"

namespace predin {

namespace {

struct Instance {
  EncoderParams<double> enc_a, enc_b;
  Eigen::MatrixXd proto_a, proto_b;
  Eigen::MatrixXd inputs;
  Labels labels;
};

Eigen::Index branch_size(const Instance& inst) {
  return parameter_count(inst.enc_a) + inst.proto_a.size();
}

Eigen::VectorXd pack(const EncoderParams<double>& enc, const Eigen::MatrixXd& proto) {
  const Eigen::VectorXd e = flatten(enc.layers);
  Eigen::VectorXd v(e.size() + proto.size());
  v << e, proto.reshaped();
  return v;
}

void unpack(const Eigen::VectorXd& v, EncoderParams<double>& enc, Eigen::MatrixXd& proto) {
  const Eigen::Index n = parameter_count(enc);
  unflatten(v.head(n), enc.layers);
  proto.reshaped() = v.segment(n, proto.size());
  ++enc.version;
}

// A single-branch embedding-level loss: (Z, labels, P) -> LossGrad.
using BranchLoss =
    std::function<LossGrad<double>(const Eigen::MatrixXd&, const Labels&, const Eigen::MatrixXd&)>;

struct Evaluation {
  ProbeResult probe;
  Eigen::VectorXd gradient;
};

Evaluation eval_single(const Instance& base, const Eigen::VectorXd& theta, const BranchLoss& fn) {
  Instance inst = base;
  unpack(theta, inst.enc_a, inst.proto_a);
  ForwardCache<double> cache;
  const Eigen::MatrixXd z = forward(inst.enc_a, inst.inputs, &cache);
  LossGrad<double> lg = fn(z, inst.labels, inst.proto_a);
  const auto enc_grads = backward(inst.enc_a, cache, lg.grad_embeddings);
  Evaluation out;
  out.probe.value = lg.value;
  out.probe.regime = cache.regime();
  out.probe.regime.insert(out.probe.regime.end(), lg.regime.begin(), lg.regime.end());
  out.gradient.resize(theta.size());
  const Eigen::VectorXd ge = flatten(enc_grads);
  out.gradient << ge, lg.grad_prototypes.reshaped();
  return out;
}

enum class PairLoss { incon, div };

// The target similarity inside the proximity logits carries a stop-gradient, so the probed
// function holds it at the value it takes at the expansion point.
Evaluation eval_pair(const Instance& base, const Eigen::VectorXd& theta, PairLoss which,
                     const DivHyperParams<double>& hp, const FrozenAnchors<double>* anchors) {
  Instance inst = base;
  const Eigen::Index n = branch_size(base);
  unpack(theta.head(n), inst.enc_a, inst.proto_a);
  unpack(theta.segment(n, n), inst.enc_b, inst.proto_b);
  ForwardCache<double> ca, cb;
  const Eigen::MatrixXd za = forward(inst.enc_a, inst.inputs, &ca);
  const Eigen::MatrixXd zb = forward(inst.enc_b, inst.inputs, &cb);
  Evaluation out;
  Eigen::MatrixXd gza, gpa, gzb, gpb;
  if (which == PairLoss::incon) {
    const auto da = proximity_probs(za, inst.labels, inst.proto_a, hp.m1, anchors ? &anchors->a : nullptr);
    const auto db = proximity_probs(zb, inst.labels, inst.proto_b, hp.m1, anchors ? &anchors->b : nullptr);
    const auto inc = inconsistency_loss(da, db, hp.epsilon_log);
    out.probe.value = inc.value;
    out.probe.regime = inc.regime;
    for (Eigen::Index i = 0; i < da.active.size(); ++i) {
      out.probe.regime.push_back(da.active.data()[i]);
      out.probe.regime.push_back(db.active.data()[i]);
    }
    proximity_backward(da, za, inst.proto_a, inc.grad_probs_a, gza, gpa);
    proximity_backward(db, zb, inst.proto_b, inc.grad_probs_b, gzb, gpb);
  } else {
    auto loss = div_loss_embeddings(za, inst.proto_a, zb, inst.proto_b, inst.labels, hp, false, anchors);
    out.probe.value = loss.total;
    out.probe.regime = std::move(loss.regime);
    gza = std::move(loss.grad_embeddings_a);
    gpa = std::move(loss.grad_prototypes_a);
    gzb = std::move(loss.grad_embeddings_b);
    gpb = std::move(loss.grad_prototypes_b);
  }
  for (const auto& r : {ca.regime(), cb.regime()})
    out.probe.regime.insert(out.probe.regime.end(), r.begin(), r.end());
  const Eigen::VectorXd ga = flatten(backward(inst.enc_a, ca, gza));
  const Eigen::VectorXd gb = flatten(backward(inst.enc_b, cb, gzb));
  out.gradient.resize(theta.size());
  out.gradient << ga, gpa.reshaped(), gb, gpb.reshaped();
  return out;
}

Instance make_instance(const GradientSuiteOptions& o, std::uint64_t seed) {
  EncoderSpec spec;
  spec.input_dim = o.input_dim;
  spec.hidden_dims = {o.hidden_dim};
  spec.output_dim = o.embedding_dim;
  Instance inst;
  inst.enc_a = init_encoder<double>(spec, derive_seed(seed, 1));
  inst.enc_b = init_encoder<double>(spec, derive_seed(seed, 2));
  // Unit-scale prototypes keep dot products O(1), so margins and clamps are exercised on
  // both sides without saturating the softmax.
  inst.proto_a = init_prototypes<double>(o.n_classes, o.embedding_dim, derive_seed(seed, 3))
                     .prototypes * 0.5;
  inst.proto_b = init_prototypes<double>(o.n_classes, o.embedding_dim, derive_seed(seed, 4))
                     .prototypes * 0.5;
  Rng rng(derive_seed(seed, 5));
  inst.inputs = standard_normal<double>(o.batch, o.input_dim, rng);
  inst.labels.resize(o.batch);
  for (Eigen::Index i = 0; i < o.batch; ++i) inst.labels(i) = static_cast<int>(i % o.n_classes);
  return inst;
}

}  // namespace

std::vector<GradientSuiteEntry> run_gradient_suite(const GradientSuiteOptions& options) {
  DivHyperParams<double> hp;  // beta = gamma = alpha = 1, m1 = 0.5, m2 = 1
  const std::vector<std::pair<std::string, BranchLoss>> single{
      {"dce", [](const auto& z, const auto& y, const auto& p) { return dce_loss(z, y, p); }},
      {"compactness",
       [](const auto& z, const auto& y, const auto& p) { return compactness_loss(z, y, p); }},
      {"pl", [&](const auto& z, const auto& y, const auto& p) { return pl_loss(z, y, p, hp.pl()); }},
      {"triplet",
       [&](const auto& z, const auto& y, const auto& p) { return triplet_loss(z, y, p, hp.m2); }},
  };

  std::vector<GradientSuiteEntry> out;
  for (std::uint64_t seed : options.seeds) {
    const Instance inst = make_instance(options, seed);
    GradCheckOptions gc;
    gc.epsilon = options.epsilon;
    gc.seed = seed;

    const Eigen::VectorXd theta_a = pack(inst.enc_a, inst.proto_a);
    gc.min_coordinates = static_cast<int>(std::max<Eigen::Index>(200, theta_a.size()));
    for (const auto& [name, fn] : single) {
      auto probe = [&](const Eigen::VectorXd& t) { return eval_single(inst, t, fn).probe; };
      const Eigen::VectorXd analytic = eval_single(inst, theta_a, fn).gradient;
      out.push_back({name, seed, theta_a.size(), finite_diff_check(probe, theta_a, analytic, gc)});
    }

    Eigen::VectorXd theta_ab(2 * theta_a.size());
    theta_ab << theta_a, pack(inst.enc_b, inst.proto_b);
    gc.min_coordinates = static_cast<int>(theta_ab.size());
    FrozenAnchors<double> anchors;
    anchors.a = target_similarity(forward(inst.enc_a, inst.inputs), inst.labels, inst.proto_a);
    anchors.b = target_similarity(forward(inst.enc_b, inst.inputs), inst.labels, inst.proto_b);
    for (auto [name, which] : {std::pair{"incon", PairLoss::incon}, std::pair{"div", PairLoss::div}}) {
      auto probe = [&](const Eigen::VectorXd& t) { return eval_pair(inst, t, which, hp, &anchors).probe; };
      const Eigen::VectorXd analytic = eval_pair(inst, theta_ab, which, hp, nullptr).gradient;
      out.push_back(
          {name, seed, theta_ab.size(), finite_diff_check(probe, theta_ab, analytic, gc)});
    }
  }
  return out;
}

}  // namespace predin
