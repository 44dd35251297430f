#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "predin/common.hpp"

namespace predin {

// Label carried by test windows whose class is not among the known classes.
inline constexpr ClassId kUnknownLabel = -1;

/// A raw multichannel recording: channels x timesteps.
struct SignalRecording {
  Eigen::MatrixXd samples;
  double sampling_rate = 0.0;
  int gesture_label = 0;
  int trial_id = 0;
  int subject_id = 0;

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index timesteps() const { return samples.cols(); }
  void validate() const;
};

/// One fixed-length window. `label` is the source gesture id until the window is routed
/// through split_trials, after which it holds the remapped known index or kUnknownLabel.
struct WindowSample {
  Eigen::MatrixXd x;
  int label = 0;
  int source_label = 0;
  int trial_id = 0;
  int subject_id = 0;
};

struct LabelSplit {
  std::vector<int> known_classes;    // ascending source ids; position is the remapped index
  std::vector<int> unknown_classes;  // ascending source ids
  std::uint64_t seed = 0;

  int n_known() const { return static_cast<int>(known_classes.size()); }
  std::optional<ClassId> remap(int source_label) const;
};

struct StandardizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::vector<int> floored_channels;  // channels whose std fell below the floor
};

struct DatasetPartition {
  std::vector<WindowSample> train_windows;
  std::vector<WindowSample> test_windows;
  std::optional<StandardizationStats> stats;
  LabelSplit split;
};

inline constexpr double kStdFloor = 1e-8;

struct WindowGeometry {
  Eigen::Index length = 0;  // T
  Eigen::Index stride = 0;
};

WindowGeometry window_geometry(double sampling_rate, double window_ms, double step_ms);

/// Sliding windows with stride step_ms; partial trailing windows are discarded.
std::vector<WindowSample> segment_windows(const SignalRecording& recording, double window_ms,
                                          double step_ms);

/// Per-channel population mean/std over every timestep of every window (floor applied).
StandardizationStats compute_channel_stats(const std::vector<WindowSample>& windows);

/// Standardizes train and test windows with statistics from the training windows only.
DatasetPartition standardize(DatasetPartition partition);

LabelSplit split_known_unknown(const std::set<int>& all_classes, int n_known, std::uint64_t seed);

DatasetPartition split_trials(const std::vector<WindowSample>& windows, const LabelSplit& split,
                              const std::set<int>& train_trials, const std::set<int>& test_trials);

struct SyntheticConfig {
  int n_classes = 10;
  int channels = 4;
  int trials_per_class = 3;
  int subject_id = 1;
  double sampling_rate = 2000.0;
  double duration_s = 2.0;
  double separation = 1.0;  // scale of class-specific offsets and oscillations
  double noise = 1.0;       // scale of the shared band-limited noise
  double trial_jitter = 0.1;
};

struct SyntheticDataset {
  std::vector<SignalRecording> recordings;
  std::set<int> classes;
};

SyntheticDataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

/// Signal CSV: one row per timestep, C comma-separated values, no header.
/// Metadata CSV: start_row,end_row,label,trial,subject,sampling_rate_hz with an optional
/// header line; rows are zero-based, end_row is exclusive.
std::vector<SignalRecording> load_csv(const std::filesystem::path& data_path,
                                      const std::filesystem::path& meta_path);

void save_csv(const std::vector<SignalRecording>& recordings,
              const std::filesystem::path& data_path, const std::filesystem::path& meta_path);

/// Flattens windows row-major (channel by channel) into the rows of an M x (C*T) matrix.
Eigen::MatrixXd flatten_windows(const std::vector<WindowSample>& windows);
Labels window_labels(const std::vector<WindowSample>& windows);

}  // namespace predin
