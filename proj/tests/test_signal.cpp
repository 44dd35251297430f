#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "predin/signal.hpp"

using namespace predin;
namespace fs = std::filesystem;

namespace {

SignalRecording ramp(Eigen::Index channels, Eigen::Index timesteps, double fs = 2000.0) {
  SignalRecording r;
  r.samples.resize(channels, timesteps);
  for (Eigen::Index c = 0; c < channels; ++c)
    for (Eigen::Index t = 0; t < timesteps; ++t) r.samples(c, t) = 1000.0 * c + t;
  r.sampling_rate = fs;
  r.gesture_label = 4;
  r.trial_id = 2;
  r.subject_id = 9;
  return r;
}

WindowSample window(int label, int trial, Eigen::MatrixXd x) {
  WindowSample w;
  w.x = std::move(x);
  w.label = w.source_label = label;
  w.trial_id = trial;
  return w;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("predin_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(WindowGeometry, EmgDefaults) {
  const auto g = window_geometry(2000.0, 200.0, 50.0);
  EXPECT_EQ(g.length, 400);
  EXPECT_EQ(g.stride, 100);
}

TEST(WindowGeometry, RejectsNonPositiveStep) {
  EXPECT_THROW(window_geometry(2000.0, 200.0, 0.0), InvalidArgument);
  EXPECT_THROW(window_geometry(2000.0, 200.0, -5.0), InvalidArgument);
  EXPECT_THROW(segment_windows(ramp(1, 1000), 200.0, 0.0), InvalidArgument);
}

TEST(SegmentWindows, CountsAndContents) {
  EXPECT_EQ(segment_windows(ramp(2, 400), 200.0, 50.0).size(), 1u);
  const auto w = segment_windows(ramp(2, 1000), 200.0, 50.0);
  ASSERT_EQ(w.size(), 7u);
  for (std::size_t k = 0; k < w.size(); ++k) {
    EXPECT_EQ(w[k].x.rows(), 2);
    EXPECT_EQ(w[k].x.cols(), 400);
    EXPECT_DOUBLE_EQ(w[k].x(0, 0), 100.0 * k);
    EXPECT_DOUBLE_EQ(w[k].x(1, 399), 1000.0 + 100.0 * k + 399);
    EXPECT_EQ(w[k].label, 4);
    EXPECT_EQ(w[k].trial_id, 2);
    EXPECT_EQ(w[k].subject_id, 9);
  }
}

TEST(SegmentWindows, ShortRecordingGivesNoWindows) {
  EXPECT_TRUE(segment_windows(ramp(1, 399), 200.0, 50.0).empty());
}

TEST(SegmentWindows, CountFormulaMatchesEnumeration) {
  Rng rng(123);
  std::uniform_int_distribution<int> len(1, 5000), fs_pick(0, 2);
  const double rates[] = {1000.0, 2000.0, 1200.0};
  for (int trial = 0; trial < 50; ++trial) {
    const double fs = rates[fs_pick(rng)];
    const auto rec = ramp(1, len(rng), fs);
    const auto g = window_geometry(fs, 200.0, 50.0);
    std::size_t enumerated = 0;
    for (Eigen::Index start = 0; start + g.length <= rec.timesteps(); start += g.stride) ++enumerated;
    EXPECT_EQ(segment_windows(rec, 200.0, 50.0).size(), enumerated) << "length " << rec.timesteps();
  }
}

TEST(Standardize, TrainStatisticsApplyToBoth) {
  DatasetPartition p;
  p.train_windows.push_back(window(0, 1, Eigen::MatrixXd{{1.0, 3.0}}));
  p.test_windows.push_back(window(0, 3, Eigen::MatrixXd{{5.0, 2.0}}));
  const auto out = standardize(p);
  ASSERT_TRUE(out.stats);
  EXPECT_DOUBLE_EQ(out.stats->mean(0), 2.0);
  EXPECT_DOUBLE_EQ(out.stats->stddev(0), 1.0);
  EXPECT_DOUBLE_EQ(out.train_windows[0].x(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(out.train_windows[0].x(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(out.test_windows[0].x(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(out.test_windows[0].x(0, 1), 0.0);
}

TEST(Standardize, ConstantChannelUsesFloor) {
  DatasetPartition p;
  p.train_windows.push_back(window(0, 1, Eigen::MatrixXd{{5.0, 5.0, 5.0}, {0.0, 1.0, 2.0}}));
  const auto out = standardize(p);
  EXPECT_EQ(out.stats->floored_channels, std::vector<int>{0});
  EXPECT_DOUBLE_EQ(out.stats->stddev(0), kStdFloor);
  EXPECT_TRUE(out.train_windows[0].x.row(0).isZero(0.0));
}

TEST(Standardize, NormalizedInputUnchanged) {
  DatasetPartition p;
  p.train_windows.push_back(window(0, 1, Eigen::MatrixXd{{-1.0, 1.0, -1.0, 1.0}}));
  const auto out = standardize(p);
  EXPECT_TRUE(out.train_windows[0].x.isApprox(p.train_windows[0].x, 1e-12));
}

TEST(Standardize, StoredStatsMatchRecomputation) {
  const auto ds = generate_synthetic(SyntheticConfig{}, 3);
  std::vector<WindowSample> windows;
  for (const auto& r : ds.recordings) {
    auto w = segment_windows(r, 200.0, 50.0);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  const auto split = split_known_unknown(ds.classes, 6, 0);
  const auto raw = split_trials(windows, split, {1, 2}, {3});
  const auto out = standardize(raw);
  const auto recomputed = compute_channel_stats(raw.train_windows);
  EXPECT_EQ(out.stats->mean, recomputed.mean);
  EXPECT_EQ(out.stats->stddev, recomputed.stddev);
  const auto after = compute_channel_stats(out.train_windows);
  EXPECT_LT(after.mean.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((after.stddev.array() - 1.0).abs().maxCoeff(), 1e-6);
}

TEST(SplitKnownUnknown, SizesAndDeterminism) {
  std::set<int> classes;
  for (int c = 1; c <= 27; ++c) classes.insert(c);
  const auto a = split_known_unknown(classes, 10, 5);
  EXPECT_EQ(a.known_classes.size(), 10u);
  EXPECT_EQ(a.unknown_classes.size(), 17u);
  const auto b = split_known_unknown(classes, 10, 5);
  EXPECT_EQ(a.known_classes, b.known_classes);
  EXPECT_EQ(a.unknown_classes, b.unknown_classes);
  EXPECT_TRUE(std::is_sorted(a.known_classes.begin(), a.known_classes.end()));
  for (int k : a.known_classes)
    EXPECT_EQ(std::count(a.unknown_classes.begin(), a.unknown_classes.end(), k), 0);
  EXPECT_EQ(split_known_unknown(classes, 26, 1).unknown_classes.size(), 1u);

  bool differs = false;
  for (std::uint64_t s = 6; s < 11; ++s)
    differs |= split_known_unknown(classes, 10, s).known_classes != a.known_classes;
  EXPECT_TRUE(differs);
}

TEST(SplitKnownUnknown, Errors) {
  const std::set<int> classes{1, 2, 3, 4};
  EXPECT_THROW(split_known_unknown(classes, 4, 0), InvalidArgument);
  EXPECT_THROW(split_known_unknown(classes, 5, 0), InvalidArgument);
  EXPECT_THROW(split_known_unknown(classes, 1, 0), InvalidArgument);
}

TEST(SplitTrials, RoutingAndRemap) {
  LabelSplit split;
  split.known_classes = {2, 5};
  split.unknown_classes = {7};
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 2);
  const std::vector<WindowSample> windows{window(2, 1, x), window(5, 2, x), window(7, 1, x),
                                          window(5, 3, x), window(7, 3, x), window(2, 4, x)};
  const auto p = split_trials(windows, split, {1, 2}, {3});
  ASSERT_EQ(p.train_windows.size(), 2u);
  EXPECT_EQ(p.train_windows[0].label, 0);
  EXPECT_EQ(p.train_windows[1].label, 1);
  ASSERT_EQ(p.test_windows.size(), 2u);
  EXPECT_EQ(p.test_windows[0].label, 1);
  EXPECT_EQ(p.test_windows[1].label, kUnknownLabel);
  EXPECT_EQ(p.test_windows[1].source_label, 7);
  for (const auto& w : p.test_windows) EXPECT_EQ(w.trial_id, 3);

  EXPECT_TRUE(split_trials(windows, split, {1, 2}, {}).test_windows.empty());
  EXPECT_THROW(split_trials(windows, split, {1, 2}, {2, 3}), InvalidArgument);
}

TEST(Synthetic, ShapeAndDeterminism) {
  const auto a = generate_synthetic(SyntheticConfig{}, 7);
  const auto b = generate_synthetic(SyntheticConfig{}, 7);
  ASSERT_EQ(a.recordings.size(), 30u);
  EXPECT_EQ(a.classes.size(), 10u);
  for (std::size_t i = 0; i < a.recordings.size(); ++i) {
    EXPECT_EQ(a.recordings[i].samples, b.recordings[i].samples);
    EXPECT_EQ(a.recordings[i].channels(), 4);
    EXPECT_EQ(a.recordings[i].timesteps(), 4000);
  }
  const auto c = generate_synthetic(SyntheticConfig{}, 8);
  EXPECT_NE(a.recordings[0].samples, c.recordings[0].samples);
  SyntheticConfig two;
  two.n_classes = 2;
  EXPECT_THROW(generate_synthetic(two, 1), InvalidArgument);
}

TEST(Csv, Fixture) {
  const fs::path dir = fs::path(PREDIN_SOURCE_DIR) / "data" / "fixtures";
  const auto recs = load_csv(dir / "tiny_signal.csv", dir / "tiny_meta.csv");
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[2].gesture_label, 3);
  EXPECT_EQ(recs[2].trial_id, 2);
  EXPECT_EQ(recs[0].subject_id, 1);
  EXPECT_DOUBLE_EQ(recs[0].sampling_rate, 1000.0);
  EXPECT_EQ(recs[1].channels(), 2);
  EXPECT_EQ(recs[1].timesteps(), 6);
  EXPECT_DOUBLE_EQ(recs[1].samples(0, 5), 2.5);
  EXPECT_DOUBLE_EQ(recs[1].samples(1, 5), 0.5);
}

TEST(Csv, RoundTrip) {
  const auto dir = temp_dir("csv_round_trip");
  SyntheticConfig cfg;
  cfg.n_classes = 3;
  cfg.duration_s = 0.05;
  const auto ds = generate_synthetic(cfg, 11);
  save_csv(ds.recordings, dir / "d.csv", dir / "m.csv");
  const auto back = load_csv(dir / "d.csv", dir / "m.csv");
  ASSERT_EQ(back.size(), ds.recordings.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].samples, ds.recordings[i].samples);
    EXPECT_EQ(back[i].gesture_label, ds.recordings[i].gesture_label);
    EXPECT_EQ(back[i].trial_id, ds.recordings[i].trial_id);
  }
}

TEST(Csv, EmptyFileGivesEmptyList) {
  const auto dir = temp_dir("csv_empty");
  write(dir / "d.csv", "");
  write(dir / "m.csv", "");
  EXPECT_TRUE(load_csv(dir / "d.csv", dir / "m.csv").empty());
}

TEST(Csv, MalformedRowsNamed) {
  const auto dir = temp_dir("csv_bad");
  write(dir / "m.csv", "0,3,1,1,1,1000\n");
  write(dir / "d.csv", "1,2,3\n4,5\n7,8,9\n");
  try {
    load_csv(dir / "d.csv", dir / "m.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  write(dir / "d.csv", "1,2,3\n4,x,6\n7,8,9\n");
  try {
    load_csv(dir / "d.csv", dir / "m.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":2, column 2"), std::string::npos) << msg;
  }
}

TEST(Csv, MetadataCoverageErrors) {
  const auto dir = temp_dir("csv_meta");
  write(dir / "d.csv", "1\n2\n3\n4\n");
  write(dir / "m.csv", "0,2,1,1,1,1000\n");
  EXPECT_THROW(load_csv(dir / "d.csv", dir / "m.csv"), ParseError);
  write(dir / "m.csv", "0,3,1,1,1,1000\n2,4,2,1,1,1000\n");
  EXPECT_THROW(load_csv(dir / "d.csv", dir / "m.csv"), ParseError);
  write(dir / "m.csv", "0,5,1,1,1,1000\n");
  EXPECT_THROW(load_csv(dir / "d.csv", dir / "m.csv"), ParseError);
  EXPECT_THROW(load_csv(dir / "missing.csv", dir / "m.csv"), IoError);
}

TEST(Flatten, RowMajorByChannel) {
  const std::vector<WindowSample> w{window(1, 1, Eigen::MatrixXd{{1, 2, 3}, {4, 5, 6}})};
  const Eigen::MatrixXd flat = flatten_windows(w);
  ASSERT_EQ(flat.cols(), 6);
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(flat(0, i), i + 1.0);
  EXPECT_EQ(window_labels(w)(0), 1);
}
