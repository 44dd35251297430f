#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "predin/config.hpp"
#include "predin/experiment.hpp"

using namespace predin;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(
# small enough to train in well under a second per seed
synthetic.n_classes = 4
synthetic.channels = 2
synthetic.sampling_rate = 500
synthetic.duration_s = 1
n_known = 2
window_ms = 200
step_ms = 100
hidden_dims = 16
embedding_dim = 8
lr = 0.01
lr_milestones = 3
epochs = 4
batch_size = 16
seeds = 0,1
)";

ExperimentConfig tiny(const std::string& name) {
  auto c = parse_config_text(kTiny);
  c.output_dir = fs::temp_directory_path() / ("predin_test_" + name);
  fs::remove_all(c.output_dir);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, DefaultsMatchTrainingRecipe) {
  const ExperimentConfig c;
  EXPECT_EQ(c.epochs, 100);
  EXPECT_EQ(c.batch_size, 256);
  EXPECT_EQ(c.lr, 0.01);
  EXPECT_EQ(c.lr_milestones, (std::vector<int>{60, 80}));
  EXPECT_EQ(c.hp.gamma, 1.0);
  EXPECT_EQ(c.hp.alpha, 1.0);
  EXPECT_EQ(c.retention, 0.95);
  EXPECT_EQ(c.seeds.size(), 5u);
  EXPECT_EQ(c.synthetic.n_classes, 10);
  EXPECT_EQ(c.n_known, 6);
}

TEST(Config, ParsesKeysAndComments) {
  const auto c = parse_config_text("epochs = 7  # trailing\n\n  variant = sequential_3\nseeds=4,2\n");
  EXPECT_EQ(c.epochs, 7);
  EXPECT_EQ(c.variant.kind, Variant::sequential);
  EXPECT_EQ(c.variant.sequential_k, 3);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 2}));
}

TEST(Config, ErrorsCarryLineNumbers) {
  try {
    parse_config_text("epochs = 3\nbogus_key = 1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus_key"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("epochs = three\n"), ParseError);
  EXPECT_THROW(parse_config_text("no equals sign\n"), ParseError);
  EXPECT_THROW(parse_config_text("variant = nope\n"), ParseError);
  EXPECT_THROW(load_config("/nonexistent/predin.cfg"), IoError);
}

TEST(Config, ValidationRejectsBadValues) {
  auto c = parse_config_text("retention = 1.0\n");
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = parse_config_text("train_trials = 1,2\ntest_trials = 2\n");
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = parse_config_text("n_known = 1\n");
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Config, EchoRoundTrips) {
  auto c = parse_config_text(kTiny);
  c.hp.m1 = 0.1 + 0.2;  // not exactly representable in short decimal
  c.variant = parse_variant("dual_trip");
  const auto text = config_echo_text(c);
  const auto back = parse_config_text(text);
  EXPECT_EQ(config_echo(back), config_echo(c));
  EXPECT_EQ(back.hp.m1, c.hp.m1);
  EXPECT_EQ(config_echo(c).count("output_dir"), 0u);
}

TEST(Config, VariantNames) {
  for (const auto& v : ablation_variants()) EXPECT_EQ(parse_variant(v.name()), v);
  EXPECT_EQ(ablation_variants().size(), 6u);
  EXPECT_EQ(parse_variant("sequential_5").n_branches(), 5);
  EXPECT_EQ(parse_variant("pl_baseline").n_branches(), 1);
  EXPECT_THROW(parse_variant("sequential_0"), InvalidArgument);
}

TEST(Experiment, SameConfigSameReport) {
  auto c = tiny("determinism");
  RunOptions opt;
  opt.write_artifacts = false;
  const auto r1 = run_experiment(c, opt);
  const auto r2 = run_experiment(c, opt);
  EXPECT_EQ(report_json(r1), report_json(r2));
  ASSERT_EQ(r1.per_seed.size(), 2u);
  EXPECT_FALSE(r1.per_seed[0].failed);
  EXPECT_NE(r1.per_seed[0].auc, r1.per_seed[1].auc);
  fs::remove_all(c.output_dir);
}

TEST(Experiment, ArtifactsExistAndReportReloads) {
  auto c = tiny("artifacts");
  const auto rec = run_experiment(c);
  const auto files = emit_report(rec, {ReportFormat::json, ReportFormat::csv});
  for (const auto& a : rec.artifacts) EXPECT_TRUE(fs::exists(c.output_dir / a)) << a;
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
  EXPECT_TRUE(fs::exists(c.output_dir / "seed_0" / "scores.csv"));
  EXPECT_TRUE(fs::exists(c.output_dir / "seed_0" / "loss_trace.csv"));
  EXPECT_TRUE(fs::exists(c.output_dir / "seed_1" / "checkpoint.txt"));
  EXPECT_TRUE(fs::exists(c.output_dir / "metrics.csv"));

  const auto back = load_report(c.output_dir / "report.json");
  EXPECT_EQ(back.config, config_echo(c));
  ASSERT_EQ(back.per_seed.size(), rec.per_seed.size());
  for (std::size_t i = 0; i < rec.per_seed.size(); ++i) {
    const auto& a = rec.per_seed[i];
    const auto& b = back.per_seed[i];
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_EQ(a.auc, b.auc);
    EXPECT_EQ(a.acc, b.acc);
    EXPECT_EQ(a.oscr, b.oscr);
    EXPECT_EQ(a.incon, b.incon);
    EXPECT_EQ(a.threshold, b.threshold);
    EXPECT_EQ(a.achieved_retention, b.achieved_retention);
    EXPECT_EQ(a.branch_auc, b.branch_auc);
  }
  EXPECT_EQ(back.aggregate.auc, rec.aggregate.auc);
  EXPECT_EQ(back.aggregate.oscr, rec.aggregate.oscr);
  EXPECT_EQ(back.aggregate.n_seeds_ok, 2u);
  EXPECT_EQ(back.artifacts.size(), rec.artifacts.size());

  // aggregate is the plain mean over seeds
  EXPECT_DOUBLE_EQ(rec.aggregate.auc, (rec.per_seed[0].auc + rec.per_seed[1].auc) / 2.0);

  // scores.csv header and one line per test sample
  std::ifstream scores(c.output_dir / "seed_0" / "scores.csv");
  std::string header;
  std::getline(scores, header);
  EXPECT_EQ(header, "sample_id,true_label,smax_branch_0,smax_branch_1,fused_smax,predicted,decision");
  std::size_t lines = 0;
  for (std::string l; std::getline(scores, l);) ++lines;
  EXPECT_EQ(lines, rec.per_seed[0].n_known + rec.per_seed[0].n_unknown);
  fs::remove_all(c.output_dir);
}

TEST(Experiment, JsonOnlyWritesOneFile) {
  auto c = tiny("jsononly");
  RunOptions opt;
  opt.write_artifacts = false;
  const auto rec = run_experiment(c, opt);
  const auto files = emit_report(rec, {ReportFormat::json});
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0].filename(), "report.json");
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(c.output_dir))
    n += e.is_regular_file();
  EXPECT_EQ(n, 1u);
  fs::remove_all(c.output_dir);
}

TEST(Experiment, UnwritableOutputFailsBeforeTraining) {
  auto c = tiny("unused");
  c.output_dir = "/proc/predin_cannot_write_here";
  c.epochs = 1000000;  // would take far longer than the assertion below allows
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(run_experiment(c), IoError);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 5.0);
}

TEST(Experiment, DivergentSeedsAreRecorded) {
  auto c = tiny("diverge");
  c.lr = 1e12;
  c.momentum = 0.0;
  RunOptions opt;
  opt.write_artifacts = false;
  const auto rec = run_experiment(c, opt);
  ASSERT_EQ(rec.per_seed.size(), 2u);
  std::size_t failed = 0;
  for (const auto& s : rec.per_seed) {
    failed += s.failed;
    if (s.failed) EXPECT_FALSE(s.error.empty());
  }
  EXPECT_GT(failed, 0u);
  EXPECT_EQ(rec.aggregate.n_seeds_ok + rec.aggregate.missing_seeds.size(), 2u);
  fs::remove_all(c.output_dir);
}

TEST(Experiment, PredinWithoutExtraTermsEqualsDual) {
  auto c = tiny("lattice");
  RunOptions opt;
  opt.write_artifacts = false;
  c.variant = parse_variant("predin");
  c.hp.gamma = 0.0;
  c.hp.alpha = 0.0;
  const auto p = run_experiment(c, opt);
  auto d_cfg = tiny("lattice");
  d_cfg.variant = parse_variant("dual");
  const auto d = run_experiment(d_cfg, opt);
  for (std::size_t i = 0; i < p.per_seed.size(); ++i) {
    EXPECT_EQ(p.per_seed[i].auc, d.per_seed[i].auc);
    EXPECT_EQ(p.per_seed[i].oscr, d.per_seed[i].oscr);
    EXPECT_EQ(p.per_seed[i].acc, d.per_seed[i].acc);
    EXPECT_EQ(p.per_seed[i].branch_auc, d.per_seed[i].branch_auc);
  }
}

TEST(Experiment, DualBranchMatchesBaselineScoring) {
  auto c = tiny("lattice2");
  RunOptions opt;
  opt.write_artifacts = false;
  c.variant = parse_variant("dual");
  const auto d = run_experiment(c, opt);
  c.variant = parse_variant("pl_baseline");
  const auto b = run_experiment(c, opt);
  for (std::size_t i = 0; i < d.per_seed.size(); ++i) {
    ASSERT_EQ(b.per_seed[i].branch_auc.size(), 1u);
    EXPECT_EQ(d.per_seed[i].branch_auc[0], b.per_seed[i].branch_auc[0]);
    EXPECT_EQ(b.per_seed[i].auc, b.per_seed[i].branch_auc[0]);
    EXPECT_FALSE(b.per_seed[i].incon.has_value());
  }
}

TEST(Experiment, SoftmaxAndSequentialRun) {
  for (const char* v : {"softmax", "sequential_3"}) {
    auto c = tiny(v);
    c.variant = parse_variant(v);
    c.seeds = {0};
    const auto rec = run_experiment(c);
    ASSERT_EQ(rec.per_seed.size(), 1u);
    EXPECT_FALSE(rec.per_seed[0].failed) << rec.per_seed[0].error;
    EXPECT_GE(rec.per_seed[0].auc, 0.0);
    EXPECT_LE(rec.per_seed[0].auc, 1.0);
    for (const auto& a : rec.artifacts) EXPECT_TRUE(fs::exists(c.output_dir / a)) << a;
    fs::remove_all(c.output_dir);
  }
}

TEST(Experiment, HoldoutCalibration) {
  auto c = tiny("holdout");
  c.calibration = CalibrationSource::train_holdout;
  RunOptions opt;
  opt.write_artifacts = false;
  const auto rec = run_experiment(c, opt);
  for (const auto& s : rec.per_seed) {
    EXPECT_FALSE(s.failed);
    EXPECT_GE(s.achieved_retention, 0.0);
  }
}

TEST(Ablation, TableShape) {
  auto c = tiny("ablation");
  c.seeds = {3};
  const auto rows = run_ablation(c);
  ASSERT_EQ(rows.size(), 6u);
  const auto csv = slurp(c.output_dir / "ablation.csv");
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "variant,auc,oscr,acc,incon,n_seeds_ok");
  int n = 0;
  while (std::getline(is, line)) ++n;
  EXPECT_EQ(n, 6);
  EXPECT_TRUE(fs::exists(c.output_dir / "ablation.json"));
  EXPECT_TRUE(fs::exists(c.output_dir / "predin" / "report.json"));
  fs::remove_all(c.output_dir);
}

TEST(Io, AtomicWriteReplaces) {
  const auto dir = fs::temp_directory_path() / "predin_atomic";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "a.txt", "one");
  write_file_atomic(dir / "a.txt", "two");
  EXPECT_EQ(slurp(dir / "a.txt"), "two");
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  EXPECT_EQ(n, 1u);
  EXPECT_THROW(write_file_atomic("/proc/nope/a.txt", "x"), IoError);
  fs::remove_all(dir);
}
