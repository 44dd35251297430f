#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "predin/config.hpp"
#include "predin/model.hpp"

namespace predin {

/// Metrics for one seed. `failed` seeds keep only `seed` and `error`.
struct MetricsReport {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;

  double auc = 0.0;
  double acc = 0.0;
  double oscr = 0.0;
  std::optional<double> incon;  // undefined for single-branch variants or a zero denominator
  double threshold = 0.0;
  double achieved_retention = 0.0;
  std::size_t n_known = 0;
  std::size_t n_unknown = 0;
  double mean_smax_known = 0.0;
  double mean_smax_unknown = 0.0;
  std::vector<double> branch_auc;        // AUC of each branch's own s_max
  std::optional<double> known_offdiag;   // agreement off-diagonal fraction, first two branches
  std::optional<double> unknown_offdiag;
};

/// Per-seed analysis matrices kept in memory for CSV emission.
struct SeedMatrices {
  std::uint64_t seed = 0;
  std::vector<Eigen::MatrixXd> proximity;  // one per prototype branch
  std::optional<Eigen::MatrixXi> agreement_known;
  std::optional<Eigen::MatrixXi> agreement_unknown;
};

struct AggregateMetrics {
  double auc = 0.0, acc = 0.0, oscr = 0.0;
  std::optional<double> incon;  // mean over seeds where it is defined
  std::size_t n_seeds_ok = 0;
  std::vector<std::uint64_t> missing_seeds;
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<MetricsReport> per_seed;  // config.seeds order
  AggregateMetrics aggregate;
  double wall_clock_s = 0.0;
  std::vector<std::string> artifacts;  // relative to config.output_dir
  std::vector<SeedMatrices> matrices;
};

struct RunOptions {
  bool write_artifacts = true;  // checkpoints, score dumps, loss traces
};

/// Runs every seed of the configured variant. Divergent seeds are recorded as failures.
RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

AggregateMetrics aggregate(const std::vector<MetricsReport>& per_seed);

enum class ReportFormat { json, csv };

/// json: report.json. csv: metrics.csv plus proximity and agreement matrices.
/// Returns the written paths.
std::vector<std::filesystem::path> emit_report(const RunRecord& record,
                                               const std::set<ReportFormat>& formats);

std::string report_json(const RunRecord& record);

/// Reads back the numeric content of report.json (config echo, per-seed and aggregate metrics).
struct LoadedReport {
  std::map<std::string, std::string> config;
  std::vector<MetricsReport> per_seed;
  AggregateMetrics aggregate;
  std::vector<std::string> artifacts;
};
LoadedReport load_report(const std::filesystem::path& path);

struct AblationRow {
  VariantSpec variant;
  RunRecord record;
};

/// Runs each ablation variant on the same seeds into output_dir/<variant>, then writes
/// ablation.csv and ablation.json at output_dir.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const RunOptions& options = {});
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Writes via a temporary file in the same directory followed by a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Fails with IoError when `dir` cannot be created or written.
void ensure_writable_dir(const std::filesystem::path& dir);

}  // namespace predin
