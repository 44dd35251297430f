#pragma once

#include <string>
#include <vector>

#include "predin/gradcheck.hpp"

namespace predin {

struct GradientSuiteEntry {
  std::string loss;  // dce, compactness, pl, incon, triplet, div
  std::uint64_t seed = 0;
  Eigen::Index n_parameters = 0;
  GradCheckReport report;
};

struct GradientSuiteOptions {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  Eigen::Index n_classes = 3;
  Eigen::Index embedding_dim = 8;
  Eigen::Index input_dim = 12;
  Eigen::Index hidden_dim = 12;
  Eigen::Index batch = 9;
  double epsilon = 1e-4;
};

/// Checks every loss end to end (encoder weights and prototypes) against central differences
/// on small random instances.
std::vector<GradientSuiteEntry> run_gradient_suite(const GradientSuiteOptions& options = {});

}  // namespace predin
