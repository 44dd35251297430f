#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "predin/encoder.hpp"
#include "predin/inconsistency.hpp"
#include "predin/signal.hpp"

namespace predin {

enum class Variant { softmax, pl_baseline, dual, dual_trip, predin_wo_trip, predin, sequential };

struct VariantSpec {
  Variant kind = Variant::predin;
  int sequential_k = 2;  // only for Variant::sequential

  std::string name() const;
  int n_branches() const;
  bool operator==(const VariantSpec&) const = default;
};

/// Accepts softmax, pl_baseline, dual, dual_trip, predin_wo_trip, predin and sequential_<K>.
VariantSpec parse_variant(const std::string& name);

/// The five module-ablation variants plus the softmax head, in report order.
std::vector<VariantSpec> ablation_variants();

enum class CalibrationSource { test_known, train_holdout };

struct ExperimentConfig {
  // Data source: "synthetic" or "csv".
  std::string source = "synthetic";
  std::filesystem::path csv_data;
  std::filesystem::path csv_meta;
  SyntheticConfig synthetic{};
  std::uint64_t data_seed = 7;

  double window_ms = 200.0;
  double step_ms = 50.0;
  int n_known = 6;
  std::set<int> train_trials{1, 2};
  std::set<int> test_trials{3};

  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  VariantSpec variant{};

  DivHyperParams<double> hp{};
  std::vector<Eigen::Index> hidden_dims{256, 128};
  Eigen::Index embedding_dim = 128;
  Activation activation = Activation::relu;

  double lr = 0.01;
  std::vector<int> lr_milestones{60, 80};
  double lr_factor = 0.1;
  double momentum = 0.9;
  int batch_size = 256;
  int epochs = 100;

  double retention = 0.95;
  CalibrationSource calibration = CalibrationSource::test_known;
  double holdout_fraction = 0.1;

  std::filesystem::path output_dir = "out";

  void validate() const;
};

/// Parses `key = value` lines ('#' starts a comment) on top of the defaults.
ExperimentConfig parse_config_text(const std::string& text,
                                   const ExperimentConfig& base = ExperimentConfig{});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one key/value pair; throws ParseError for unknown keys or malformed values.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Every key that affects results, in canonical `key = value` form (output_dir excluded).
std::map<std::string, std::string> config_echo(const ExperimentConfig& config);
std::string config_echo_text(const ExperimentConfig& config);

}  // namespace predin
