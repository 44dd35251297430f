#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "predin/experiment.hpp"
#include "predin/gradient_suite.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;

int fail(const std::string& type, const std::string& message, int code) {
  json j;
  j["status"] = "error";
  j["error"] = {{"type", type}, {"message", message}};
  std::cerr << j.dump() << std::endl;
  return code;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw predin::ParseError("empty entry in --seeds");
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || item.front() == '-')
      throw predin::ParseError("--seeds entry '" + item + "' is not a non-negative integer");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw predin::ParseError("--seeds is empty");
  return seeds;
}

struct Overrides {
  std::string config;
  std::string variant;
  std::string seeds;
  std::string out;
  std::vector<std::string> set;
};

predin::ExperimentConfig resolve(const Overrides& o) {
  predin::ExperimentConfig c = predin::load_config(o.config);
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw predin::ParseError("--set expects key=value, got '" + kv + "'");
    predin::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.variant.empty()) c.variant = predin::parse_variant(o.variant);
  if (!o.seeds.empty()) c.seeds = parse_seed_list(o.seeds);
  if (!o.out.empty()) c.output_dir = o.out;
  c.validate();
  return c;
}

json aggregate_summary(const predin::AggregateMetrics& a) {
  json j;
  j["auc"] = a.auc;
  j["acc"] = a.acc;
  j["oscr"] = a.oscr;
  j["incon"] = a.incon ? json(*a.incon) : json(nullptr);
  j["n_seeds_ok"] = a.n_seeds_ok;
  j["missing_seeds"] = a.missing_seeds;
  return j;
}

void write_timing(const fs::path& dir, double seconds) {
  json j;
  j["wall_clock_s"] = seconds;
  predin::write_file_atomic(dir / "timing.json", j.dump(2) + "\n");
}

int cmd_run(const Overrides& o) {
  const auto config = resolve(o);
  const auto record = predin::run_experiment(config);
  predin::emit_report(record, {predin::ReportFormat::json, predin::ReportFormat::csv});
  write_timing(config.output_dir, record.wall_clock_s);
  json j;
  j["status"] = record.aggregate.n_seeds_ok > 0 ? "ok" : "all_seeds_failed";
  j["variant"] = config.variant.name();
  j["report"] = (config.output_dir / "report.json").string();
  j["aggregate"] = aggregate_summary(record.aggregate);
  j["wall_clock_s"] = record.wall_clock_s;
  std::cout << j.dump(2) << std::endl;
  return record.aggregate.n_seeds_ok > 0 ? 0 : 1;
}

int cmd_ablation(const Overrides& o) {
  const auto config = resolve(o);
  const auto rows = predin::run_ablation(config);
  json j;
  j["status"] = "ok";
  j["table"] = (config.output_dir / "ablation.csv").string();
  json table = json::array();
  for (const auto& r : rows) {
    json row = aggregate_summary(r.record.aggregate);
    row["variant"] = r.variant.name();
    table.push_back(row);
  }
  j["rows"] = table;
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int cmd_check_gradients() {
  const auto entries = predin::run_gradient_suite();
  json j;
  json rows = json::array();
  bool ok = true;
  double worst = 0.0;
  for (const auto& e : entries) {
    const bool pass = e.report.max_rel_error <= kGradTolerance;
    ok = ok && pass;
    worst = std::max(worst, e.report.max_rel_error);
    rows.push_back({{"loss", e.loss},
                    {"seed", e.seed},
                    {"parameters", e.n_parameters},
                    {"checked", e.report.checked},
                    {"exempt_small", e.report.exempt_small},
                    {"exempt_kink", e.report.exempt_kink},
                    {"max_rel_error", e.report.max_rel_error},
                    {"pass", pass}});
  }
  j["status"] = ok ? "ok" : "gradient_mismatch";
  j["tolerance"] = kGradTolerance;
  j["max_rel_error"] = worst;
  j["checks"] = rows;
  std::cout << j.dump(2) << std::endl;
  if (!ok)
    return fail("gradient_mismatch",
                "max relative error " + std::to_string(worst) + " exceeds tolerance", 1);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-perspective prototype open-set recognition experiments"};
  app.require_subcommand(1);

  Overrides run_opts, abl_opts;
  auto* run = app.add_subcommand("run", "Train and evaluate one variant over all seeds");
  run->add_option("--config", run_opts.config, "Config file (key = value lines)")->required();
  run->add_option("--variant", run_opts.variant, "Model variant override");
  run->add_option("--seeds", run_opts.seeds, "Comma-separated seed list override");
  run->add_option("--out", run_opts.out, "Output directory override");
  run->add_option("--set", run_opts.set, "Extra key=value config override (repeatable)");

  auto* abl = app.add_subcommand("ablation", "Run every ablation variant and tabulate");
  abl->add_option("--config", abl_opts.config, "Config file (key = value lines)")->required();
  abl->add_option("--seeds", abl_opts.seeds, "Comma-separated seed list override");
  abl->add_option("--out", abl_opts.out, "Output directory override");
  abl->add_option("--set", abl_opts.set, "Extra key=value config override (repeatable)");

  auto* grad = app.add_subcommand("check-gradients", "Finite-difference check of every loss");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (abl->parsed()) return cmd_ablation(abl_opts);
    if (grad->parsed()) return cmd_check_gradients();
  } catch (const predin::ParseError& e) {
    return fail("parse_error", e.what(), 2);
  } catch (const predin::InvalidArgument& e) {
    return fail("invalid_argument", e.what(), 2);
  } catch (const predin::IoError& e) {
    return fail("io_error", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("internal_error", e.what(), 4);
  }
  return fail("usage", "no subcommand", 2);
}
