#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace predin {

// Class ids are zero-based once remapped: known classes occupy 0..N-1.
using ClassId = int;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Labels = Eigen::VectorXi;

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidState : std::logic_error {
  using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, int epoch, int batch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ")"),
        epoch(epoch),
        batch(batch) {}
  int epoch;
  int batch;
};

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a stream tag (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename Scalar>
Matrix<Scalar> standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<Scalar> dist(Scalar(0), Scalar(1));
  Matrix<Scalar> m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace predin
