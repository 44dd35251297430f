#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "predin/common.hpp"

namespace predin {

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + s + "'");
}

/// Flatten-then-MLP encoder shape. Hidden layers use `activation`; the output layer is linear.
struct EncoderSpec {
  Eigen::Index input_dim = 1;
  std::vector<Eigen::Index> hidden_dims{256, 128};
  Eigen::Index output_dim = 128;
  Activation activation = Activation::relu;

  void validate() const {
    if (input_dim < 1 || output_dim < 1) throw InvalidArgument("encoder dims must be >= 1");
    for (auto h : hidden_dims)
      if (h < 1) throw InvalidArgument("hidden layer widths must be >= 1");
  }
  std::size_t n_layers() const { return hidden_dims.size() + 1; }
  Eigen::Index fan_in(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden_dims[layer - 1];
  }
  Eigen::Index fan_out(std::size_t layer) const {
    return layer == hidden_dims.size() ? output_dim : hidden_dims[layer];
  }
  bool operator==(const EncoderSpec&) const = default;
};

template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;  // fan_out x fan_in
  Vector<Scalar> bias;    // fan_out
};

template <typename Scalar>
struct EncoderParams {
  EncoderSpec spec;
  std::vector<DenseLayer<Scalar>> layers;
  std::uint64_t init_seed = 0;
  // Bumped whenever the values change so stale forward caches can be detected.
  std::uint64_t version = 0;

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }
};

template <typename Scalar>
using EncoderGrads = std::vector<DenseLayer<Scalar>>;

template <typename Scalar>
struct ForwardCache {
  std::vector<Matrix<Scalar>> inputs;       // input to each layer, M x fan_in
  std::vector<Matrix<Scalar>> activations;  // post-activation of each hidden layer
  std::uint64_t version = 0;
  Eigen::Index batch = 0;
  Activation activation = Activation::relu;

  /// Which side of the ReLU kink each hidden unit sits on (empty for tanh).
  std::vector<std::uint8_t> regime() const {
    std::vector<std::uint8_t> r;
    if (activation != Activation::relu) return r;
    for (const auto& a : activations)
      for (Eigen::Index i = 0; i < a.size(); ++i) r.push_back(a.data()[i] > Scalar(0));
    return r;
  }
};

/// He-style init: weights ~ N(0, 2/fan_in), biases zero.
template <typename Scalar = double>
EncoderParams<Scalar> init_encoder(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  EncoderParams<Scalar> params;
  params.spec = spec;
  params.init_seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const auto in = spec.fan_in(l), out = spec.fan_out(l);
    DenseLayer<Scalar> layer;
    layer.weight = standard_normal<Scalar>(out, in, rng) * std::sqrt(Scalar(2) / Scalar(in));
    layer.bias = Vector<Scalar>::Zero(out);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

template <typename Scalar>
EncoderGrads<Scalar> zero_grads(const EncoderParams<Scalar>& params) {
  EncoderGrads<Scalar> g;
  for (const auto& l : params.layers)
    g.push_back({Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()),
                 Vector<Scalar>::Zero(l.bias.size())});
  return g;
}

/// Embeds each row of `inputs` (M x input_dim) into an M x d matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> forward(const EncoderParams<typename Derived::Scalar>& params,
                                         const Eigen::MatrixBase<Derived>& inputs,
                                         ForwardCache<typename Derived::Scalar>* cache = nullptr) {
  using Scalar = typename Derived::Scalar;
  if (inputs.cols() != params.spec.input_dim)
    throw InvalidArgument("encoder expects input dim " + std::to_string(params.spec.input_dim) +
                          ", got " + std::to_string(inputs.cols()));
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
    cache->version = params.version;
    cache->batch = inputs.rows();
    cache->activation = params.spec.activation;
  }
  Matrix<Scalar> h = inputs;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix<Scalar> pre = h * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    if (cache) cache->inputs.push_back(std::move(h));
    if (l == last) return pre;
    if (params.spec.activation == Activation::relu)
      h = pre.cwiseMax(Scalar(0));
    else
      h = pre.array().tanh().matrix();
    if (cache) cache->activations.push_back(h);
  }
  return h;
}

/// Chain rule through the MLP. Kinked ReLU units at exactly zero get subgradient 0.
template <typename Scalar, typename Derived>
EncoderGrads<Scalar> backward(const EncoderParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                              const Eigen::MatrixBase<Derived>& grad_embeddings) {
  if (cache.version != params.version || cache.inputs.size() != params.layers.size())
    throw InvalidState("forward cache does not match the current encoder parameters");
  if (grad_embeddings.rows() != cache.batch || grad_embeddings.cols() != params.spec.output_dim)
    throw InvalidArgument("embedding gradient shape does not match the cached batch");
  EncoderGrads<Scalar> grads(params.layers.size());
  Matrix<Scalar> delta = grad_embeddings;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    grads[l].weight = delta.transpose() * cache.inputs[l];
    grads[l].bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix<Scalar> upstream = delta * params.layers[l].weight;
    const auto& act = cache.activations[l - 1];
    if (params.spec.activation == Activation::relu)
      delta = (act.array() > Scalar(0)).select(upstream, Scalar(0));
    else
      delta = (upstream.array() * (Scalar(1) - act.array().square())).matrix();
  }
  return grads;
}

template <typename Scalar>
Eigen::Index parameter_count(const EncoderParams<Scalar>& params) {
  Eigen::Index n = 0;
  for (const auto& l : params.layers) n += l.weight.size() + l.bias.size();
  return n;
}

/// Packs weights then bias of each layer, column-major, into one vector.
template <typename Scalar>
Vector<Scalar> flatten(const std::vector<DenseLayer<Scalar>>& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  Vector<Scalar> v(n);
  Eigen::Index o = 0;
  for (const auto& l : layers) {
    v.segment(o, l.weight.size()) = l.weight.reshaped();
    o += l.weight.size();
    v.segment(o, l.bias.size()) = l.bias;
    o += l.bias.size();
  }
  return v;
}

template <typename Scalar, typename Derived>
void unflatten(const Eigen::MatrixBase<Derived>& v, std::vector<DenseLayer<Scalar>>& layers) {
  Eigen::Index o = 0;
  for (auto& l : layers) {
    l.weight.reshaped() = v.segment(o, l.weight.size());
    o += l.weight.size();
    l.bias = v.segment(o, l.bias.size());
    o += l.bias.size();
  }
  if (o != v.size()) throw InvalidArgument("flat parameter vector has the wrong length");
}

}  // namespace predin
