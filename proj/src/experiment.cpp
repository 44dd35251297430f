#include "predin/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "predin/metrics.hpp"
#include "predin/scoring.hpp"
#include "predin/text.hpp"

#ifndef PREDIN_VERSION
#define PREDIN_VERSION "0.0.0"
#endif
#ifndef PREDIN_GIT_REV
#define PREDIN_GIT_REV "unknown"
#endif

namespace predin {

namespace fs = std::filesystem;
using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("output directory " + dir.string() + " cannot be created" +
                  (ec ? ": " + ec.message() : std::string{}));
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

namespace {

struct SeedData {
  Eigen::MatrixXd x_train;
  Labels y_train;
  Eigen::MatrixXd x_test;
  Labels y_test;
  Eigen::MatrixXd x_holdout;
  int n_known = 0;
};

struct Corpus {
  std::vector<WindowSample> windows;
  std::set<int> classes;
};

Corpus load_corpus(const ExperimentConfig& c) {
  std::vector<SignalRecording> recordings;
  Corpus corpus;
  if (c.source == "synthetic") {
    auto ds = generate_synthetic(c.synthetic, c.data_seed);
    recordings = std::move(ds.recordings);
    corpus.classes = std::move(ds.classes);
  } else {
    recordings = load_csv(c.csv_data, c.csv_meta);
    for (const auto& r : recordings) corpus.classes.insert(r.gesture_label);
  }
  for (const auto& r : recordings) {
    auto w = segment_windows(r, c.window_ms, c.step_ms);
    corpus.windows.insert(corpus.windows.end(), std::make_move_iterator(w.begin()),
                          std::make_move_iterator(w.end()));
  }
  if (corpus.windows.empty()) throw InvalidArgument("no recording is long enough for one window");
  return corpus;
}

SeedData prepare_seed(const ExperimentConfig& c, const Corpus& corpus, std::uint64_t seed) {
  const LabelSplit split = split_known_unknown(corpus.classes, c.n_known, seed);
  const DatasetPartition part =
      standardize(split_trials(corpus.windows, split, c.train_trials, c.test_trials));
  if (part.train_windows.empty()) throw InvalidArgument("training partition is empty");
  if (part.test_windows.empty()) throw InvalidArgument("test partition is empty");
  SeedData d;
  d.n_known = split.n_known();
  d.x_train = flatten_windows(part.train_windows);
  d.y_train = window_labels(part.train_windows);
  d.x_test = flatten_windows(part.test_windows);
  d.y_test = window_labels(part.test_windows);

  if (c.calibration == CalibrationSource::train_holdout) {
    const Eigen::Index n = d.x_train.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(derive_seed(seed, 98));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_hold = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(c.holdout_fraction * static_cast<double>(n)), 1, n - 1);
    std::vector<Eigen::Index> hold(order.begin(), order.begin() + n_hold);
    std::vector<Eigen::Index> keep(order.begin() + n_hold, order.end());
    std::sort(hold.begin(), hold.end());
    std::sort(keep.begin(), keep.end());
    d.x_holdout = d.x_train(hold, Eigen::all);
    Eigen::MatrixXd x = d.x_train(keep, Eigen::all);
    Labels y = d.y_train(keep);
    d.x_train = std::move(x);
    d.y_train = std::move(y);
  }
  return d;
}

DivHyperParams<double> effective_hp(const ExperimentConfig& c) {
  DivHyperParams<double> hp = c.hp;
  switch (c.variant.kind) {
    case Variant::pl_baseline:
    case Variant::dual: hp.gamma = 0; hp.alpha = 0; break;
    case Variant::dual_trip: hp.gamma = 0; break;
    case Variant::predin_wo_trip: hp.alpha = 0; break;
    default: break;
  }
  return hp;
}

EncoderSpec encoder_spec(const ExperimentConfig& c, Eigen::Index input_dim) {
  EncoderSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_dims = c.hidden_dims;
  spec.output_dim = c.embedding_dim;
  spec.activation = c.activation;
  spec.validate();
  return spec;
}

TrainConfig train_config(const ExperimentConfig& c, std::uint64_t seed) {
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.schedule = LrSchedule{c.lr, c.lr_milestones, c.lr_factor};
  t.shuffle_seed = derive_seed(seed, 99);
  return t;
}

std::uint64_t branch_seed(std::uint64_t seed, int b) {
  return derive_seed(seed, 100 + static_cast<std::uint64_t>(b));
}

struct Trained {
  std::vector<Branch> branches;  // empty for softmax
  std::vector<std::pair<std::string, LossTrace>> traces;
  std::function<Eigen::MatrixXd(int, const Eigen::MatrixXd&)> scores;  // branch, inputs
  int n_branches = 1;
};

Trained train_variant(const ExperimentConfig& c, const SeedData& d, std::uint64_t seed) {
  const EncoderSpec spec = encoder_spec(c, d.x_train.cols());
  const TrainConfig tc = train_config(c, seed);
  const DivHyperParams<double> hp = effective_hp(c);
  Trained out;
  switch (c.variant.kind) {
    case Variant::softmax: {
      auto model = std::make_shared<SoftmaxModel>(
          make_softmax_model(spec, d.n_known, branch_seed(seed, 0), c.momentum));
      out.traces.emplace_back("loss_trace.csv", baseline_softmax_train(*model, d.x_train, d.y_train, tc));
      out.scores = [model](int, const Eigen::MatrixXd& x) { return softmax_scores(*model, x); };
      return out;
    }
    case Variant::pl_baseline: {
      Branch b = make_branch(spec, d.n_known, branch_seed(seed, 0), c.momentum);
      out.traces.emplace_back("loss_trace.csv", train_single(b, d.x_train, d.y_train, hp, tc));
      out.branches.push_back(std::move(b));
      break;
    }
    case Variant::sequential: {
      std::vector<std::uint64_t> seeds;
      for (int t = 0; t < c.variant.sequential_k; ++t) seeds.push_back(branch_seed(seed, t));
      std::vector<LossTrace> traces;
      out.branches = train_sequential(c.variant.sequential_k, spec, d.n_known, seeds, d.x_train,
                                      d.y_train, hp, tc, &traces, c.momentum);
      for (std::size_t t = 0; t < traces.size(); ++t)
        out.traces.emplace_back("loss_trace_model_" + std::to_string(t + 1) + ".csv",
                                std::move(traces[t]));
      break;
    }
    default: {
      DualModel m{make_branch(spec, d.n_known, branch_seed(seed, 0), c.momentum),
                  make_branch(spec, d.n_known, branch_seed(seed, 1), c.momentum), hp};
      out.traces.emplace_back("loss_trace.csv", train(m, d.x_train, d.y_train, tc));
      out.branches.push_back(std::move(m.a));
      out.branches.push_back(std::move(m.b));
      break;
    }
  }
  out.n_branches = static_cast<int>(out.branches.size());
  auto branches = std::make_shared<std::vector<Branch>>(out.branches);
  out.scores = [branches](int b, const Eigen::MatrixXd& x) {
    return branch_scores((*branches)[static_cast<std::size_t>(b)], x);
  };
  return out;
}

std::string trace_csv(const LossTrace& trace) {
  std::ostringstream os;
  os << "epoch,L_PL_A,L_PL_B,L_incon,L_trip_A,L_trip_B,total\n";
  for (const auto& r : trace)
    os << r.epoch << ',' << format_double(r.pl_a) << ',' << format_double(r.pl_b) << ','
       << format_double(r.incon) << ',' << format_double(r.trip_a) << ','
       << format_double(r.trip_b) << ',' << format_double(r.total) << '\n';
  return os.str();
}

template <typename M>
std::string matrix_csv(const M& m) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      if constexpr (std::is_same_v<typename M::Scalar, double>)
        os << format_double(m(i, j));
      else
        os << m(i, j);
    }
    os << '\n';
  }
  return os.str();
}

std::vector<ClassId> row_argmax(const Eigen::MatrixXd& sims) {
  std::vector<ClassId> out(static_cast<std::size_t>(sims.rows()));
  for (Eigen::Index i = 0; i < sims.rows(); ++i)
    out[static_cast<std::size_t>(i)] = classify(sims.row(i)).predicted;
  return out;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct SeedOutcome {
  MetricsReport metrics;
  SeedMatrices matrices;
  std::vector<std::string> artifacts;
};

SeedOutcome run_seed(const ExperimentConfig& c, const Corpus& corpus, std::uint64_t seed,
                     const RunOptions& options) {
  SeedOutcome out;
  out.metrics.seed = seed;
  out.matrices.seed = seed;
  const SeedData d = prepare_seed(c, corpus, seed);
  const Trained model = train_variant(c, d, seed);
  const int k_branches = std::max(1, model.n_branches);

  std::vector<Eigen::MatrixXd> sims;
  for (int b = 0; b < k_branches; ++b) {
    sims.push_back(model.scores(b, d.x_test));
    if (!sims.back().allFinite()) throw TrainingError("non-finite test scores", c.epochs, -1);
  }
  const auto samples = score_samples(sims, d.y_test);

  std::vector<bool> is_known;
  std::vector<double> smax_known, smax_unknown;
  std::vector<KnownOutcome> known_outcomes;
  std::vector<ClassId> pred_known, label_known;
  for (const auto& s : samples) {
    const bool known = s.true_label != kUnknownLabel;
    is_known.push_back(known);
    if (known) {
      smax_known.push_back(s.s_max);
      known_outcomes.push_back({s.s_max, s.predicted_class == s.true_label});
      pred_known.push_back(s.predicted_class);
      label_known.push_back(s.true_label);
    } else {
      smax_unknown.push_back(s.s_max);
    }
  }
  if (smax_known.empty()) throw InvalidArgument("test partition has no known-class samples");
  if (smax_unknown.empty()) throw InvalidArgument("test partition has no unknown-class samples");

  MetricsReport& m = out.metrics;
  m.n_known = smax_known.size();
  m.n_unknown = smax_unknown.size();
  m.auc = auc(smax_known, smax_unknown);
  m.acc = closed_acc(pred_known, label_known);
  m.oscr = oscr(known_outcomes, smax_unknown);
  m.mean_smax_known = mean(smax_known);
  m.mean_smax_unknown = mean(smax_unknown);

  std::vector<std::vector<ClassId>> branch_preds;
  for (const auto& s : sims) {
    const Eigen::VectorXd bmax = s.rowwise().maxCoeff();
    std::vector<double> bk, bu;
    for (std::size_t i = 0; i < is_known.size(); ++i)
      (is_known[i] ? bk : bu).push_back(bmax(static_cast<Eigen::Index>(i)));
    m.branch_auc.push_back(auc(bk, bu));
    branch_preds.push_back(row_argmax(s));
  }
  // Incon and agreement compare the first two perspectives.
  const auto mask_storage = std::make_unique<bool[]>(is_known.size());
  std::copy(is_known.begin(), is_known.end(), mask_storage.get());
  const std::span<const bool> mask(mask_storage.get(), is_known.size());
  if (branch_preds.size() >= 2) {
    m.incon = incon_metric(branch_preds[0], branch_preds[1], mask);
    out.matrices.agreement_known =
        agreement_confusion(branch_preds[0], branch_preds[1], mask, Subset::known, d.n_known);
    out.matrices.agreement_unknown =
        agreement_confusion(branch_preds[0], branch_preds[1], mask, Subset::unknown, d.n_known);
    m.known_offdiag = off_diagonal_fraction(*out.matrices.agreement_known);
    m.unknown_offdiag = off_diagonal_fraction(*out.matrices.agreement_unknown);
  }
  for (const auto& b : model.branches) out.matrices.proximity.push_back(proximity_matrix(b.prototypes.prototypes));

  Threshold th;
  if (c.calibration == CalibrationSource::test_known) {
    th = calibrate_threshold(smax_known, c.retention);
  } else {
    std::vector<Eigen::MatrixXd> hs;
    for (int b = 0; b < k_branches; ++b) hs.push_back(model.scores(b, d.x_holdout));
    const Eigen::VectorXd hmax = fuse_scores(hs).rowwise().maxCoeff();
    th = calibrate_threshold(std::span<const double>(hmax.data(), static_cast<std::size_t>(hmax.size())),
                             c.retention);
  }
  m.threshold = th.value;
  // Retention reported on the known test samples, whichever set calibrated the threshold.
  m.achieved_retention =
      static_cast<double>(std::count_if(smax_known.begin(), smax_known.end(),
                                        [&](double s) { return s >= th.value; })) /
      static_cast<double>(smax_known.size());

  if (!options.write_artifacts) return out;
  const fs::path dir = fs::path("seed_" + std::to_string(seed));
  const fs::path root = c.output_dir;

  std::ostringstream dump;
  dump << "sample_id,true_label";
  for (int b = 0; b < k_branches; ++b) dump << ",smax_branch_" << b;
  dump << ",fused_smax,predicted,decision\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    dump << i << ',' << s.true_label;
    for (const auto& v : s.sims_per_branch) dump << ',' << format_double(v.maxCoeff());
    const Decision dec = decide(s.s_max, s.predicted_class, th);
    dump << ',' << format_double(s.s_max) << ',' << s.predicted_class << ','
         << (dec.accepted ? "accept" : "reject") << '\n';
  }
  write_file_atomic(root / dir / "scores.csv", dump.str());
  out.artifacts.push_back((dir / "scores.csv").generic_string());

  for (const auto& [name, trace] : model.traces) {
    write_file_atomic(root / dir / name, trace_csv(trace));
    out.artifacts.push_back((dir / name).generic_string());
  }
  if (!model.branches.empty()) {
    save_checkpoint(model.branches, effective_hp(c), root / dir / "checkpoint.txt");
    out.artifacts.push_back((dir / "checkpoint.txt").generic_string());
  }
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json metrics_json(const MetricsReport& m) {
  json j;
  j["seed"] = m.seed;
  j["failed"] = m.failed;
  if (m.failed) {
    j["error"] = m.error;
    return j;
  }
  j["auc"] = m.auc;
  j["acc"] = m.acc;
  j["oscr"] = m.oscr;
  j["incon"] = optional_json(m.incon);
  j["threshold"] = m.threshold;
  j["achieved_retention"] = m.achieved_retention;
  j["n_known"] = m.n_known;
  j["n_unknown"] = m.n_unknown;
  j["mean_smax_known"] = m.mean_smax_known;
  j["mean_smax_unknown"] = m.mean_smax_unknown;
  j["branch_auc"] = m.branch_auc;
  j["agreement_offdiag_known"] = optional_json(m.known_offdiag);
  j["agreement_offdiag_unknown"] = optional_json(m.unknown_offdiag);
  return j;
}

MetricsReport metrics_from(const json& j) {
  MetricsReport m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.failed = j.at("failed").get<bool>();
  if (m.failed) {
    m.error = j.at("error").get<std::string>();
    return m;
  }
  m.auc = j.at("auc").get<double>();
  m.acc = j.at("acc").get<double>();
  m.oscr = j.at("oscr").get<double>();
  m.incon = optional_from(j.at("incon"));
  m.threshold = j.at("threshold").get<double>();
  m.achieved_retention = j.at("achieved_retention").get<double>();
  m.n_known = j.at("n_known").get<std::size_t>();
  m.n_unknown = j.at("n_unknown").get<std::size_t>();
  m.mean_smax_known = j.at("mean_smax_known").get<double>();
  m.mean_smax_unknown = j.at("mean_smax_unknown").get<double>();
  m.branch_auc = j.at("branch_auc").get<std::vector<double>>();
  m.known_offdiag = optional_from(j.at("agreement_offdiag_known"));
  m.unknown_offdiag = optional_from(j.at("agreement_offdiag_unknown"));
  return m;
}

json aggregate_json(const AggregateMetrics& a) {
  json j;
  j["auc"] = a.auc;
  j["acc"] = a.acc;
  j["oscr"] = a.oscr;
  j["incon"] = optional_json(a.incon);
  j["n_seeds_ok"] = a.n_seeds_ok;
  j["missing_seeds"] = a.missing_seeds;
  return j;
}

std::string fmt_optional(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

}  // namespace

AggregateMetrics aggregate(const std::vector<MetricsReport>& per_seed) {
  AggregateMetrics a;
  std::vector<double> auc_v, acc_v, oscr_v, incon_v;
  for (const auto& m : per_seed) {
    if (m.failed) {
      a.missing_seeds.push_back(m.seed);
      continue;
    }
    auc_v.push_back(m.auc);
    acc_v.push_back(m.acc);
    oscr_v.push_back(m.oscr);
    if (m.incon) incon_v.push_back(*m.incon);
  }
  a.n_seeds_ok = auc_v.size();
  a.auc = mean(auc_v);
  a.acc = mean(acc_v);
  a.oscr = mean(oscr_v);
  if (!incon_v.empty()) a.incon = mean(incon_v);
  return a;
}

RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  if (options.write_artifacts) ensure_writable_dir(config.output_dir);
  const auto start = std::chrono::steady_clock::now();
  RunRecord record;
  record.config = config;
  const Corpus corpus = load_corpus(config);
  for (std::uint64_t seed : config.seeds) {
    try {
      SeedOutcome o = run_seed(config, corpus, seed, options);
      record.per_seed.push_back(std::move(o.metrics));
      record.matrices.push_back(std::move(o.matrices));
      record.artifacts.insert(record.artifacts.end(), o.artifacts.begin(), o.artifacts.end());
    } catch (const TrainingError& e) {
      MetricsReport m;
      m.seed = seed;
      m.failed = true;
      m.error = e.what();
      record.per_seed.push_back(std::move(m));
    }
  }
  record.aggregate = aggregate(record.per_seed);
  record.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

std::string report_json(const RunRecord& record) {
  json j;
  j["format"] = "predin-report";
  j["version"] = PREDIN_VERSION;
  j["git_rev"] = PREDIN_GIT_REV;
  j["config"] = config_echo(record.config);
  json seeds = json::array();
  for (const auto& m : record.per_seed) seeds.push_back(metrics_json(m));
  j["per_seed"] = std::move(seeds);
  j["aggregate"] = aggregate_json(record.aggregate);
  j["artifacts"] = record.artifacts;
  return j.dump(2) + "\n";
}

std::vector<fs::path> emit_report(const RunRecord& record, const std::set<ReportFormat>& formats) {
  const fs::path root = record.config.output_dir;
  std::vector<fs::path> written;
  auto put = [&](const fs::path& rel, const std::string& content) {
    try {
      write_file_atomic(root / rel, content);
    } catch (const IoError& e) {
      throw IoError(std::string("report emission failed for ") + (root / rel).string() + ": " + e.what());
    }
    written.push_back(root / rel);
  };
  if (formats.count(ReportFormat::json)) put("report.json", report_json(record));
  if (formats.count(ReportFormat::csv)) {
    std::ostringstream os;
    os << "seed,auc,oscr,acc,incon,threshold,achieved_retention,n_known,n_unknown,status\n";
    for (const auto& m : record.per_seed) {
      if (m.failed) {
        os << m.seed << ",NA,NA,NA,NA,NA,NA,NA,NA,failed\n";
        continue;
      }
      os << m.seed << ',' << format_double(m.auc) << ',' << format_double(m.oscr) << ','
         << format_double(m.acc) << ',' << fmt_optional(m.incon) << ','
         << format_double(m.threshold) << ',' << format_double(m.achieved_retention) << ','
         << m.n_known << ',' << m.n_unknown << ",ok\n";
    }
    const auto& a = record.aggregate;
    os << "mean," << format_double(a.auc) << ',' << format_double(a.oscr) << ','
       << format_double(a.acc) << ',' << fmt_optional(a.incon) << ",NA,NA,NA,NA,"
       << a.n_seeds_ok << "_of_" << record.per_seed.size() << '\n';
    put("metrics.csv", os.str());
    for (const auto& sm : record.matrices) {
      const fs::path dir = "seed_" + std::to_string(sm.seed);
      for (std::size_t b = 0; b < sm.proximity.size(); ++b)
        put(dir / ("proximity_branch_" + std::to_string(b) + ".csv"), matrix_csv(sm.proximity[b]));
      if (sm.agreement_known) put(dir / "agreement_known.csv", matrix_csv(*sm.agreement_known));
      if (sm.agreement_unknown) put(dir / "agreement_unknown.csv", matrix_csv(*sm.agreement_unknown));
    }
  }
  return written;
}

LoadedReport load_report(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open report " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError("report " + path.string() + ": " + e.what());
  }
  try {
    LoadedReport r;
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& s : j.at("per_seed")) r.per_seed.push_back(metrics_from(s));
    const auto& a = j.at("aggregate");
    r.aggregate.auc = a.at("auc").get<double>();
    r.aggregate.acc = a.at("acc").get<double>();
    r.aggregate.oscr = a.at("oscr").get<double>();
    r.aggregate.incon = optional_from(a.at("incon"));
    r.aggregate.n_seeds_ok = a.at("n_seeds_ok").get<std::size_t>();
    r.aggregate.missing_seeds = a.at("missing_seeds").get<std::vector<std::uint64_t>>();
    r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError("report " + path.string() + ": " + e.what());
  }
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,auc,oscr,acc,incon,n_seeds_ok\n";
  for (const auto& r : rows) {
    const auto& a = r.record.aggregate;
    os << r.variant.name() << ',' << format_double(a.auc) << ',' << format_double(a.oscr) << ','
       << format_double(a.acc) << ',' << fmt_optional(a.incon) << ',' << a.n_seeds_ok << '\n';
  }
  return os.str();
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const RunOptions& options) {
  base.validate();
  if (options.write_artifacts) ensure_writable_dir(base.output_dir);
  std::vector<AblationRow> rows;
  for (const auto& v : ablation_variants()) {
    ExperimentConfig c = base;
    c.variant = v;
    c.output_dir = base.output_dir / v.name();
    AblationRow row{v, run_experiment(c, options)};
    if (options.write_artifacts) emit_report(row.record, {ReportFormat::json, ReportFormat::csv});
    rows.push_back(std::move(row));
  }
  if (options.write_artifacts) {
    write_file_atomic(base.output_dir / "ablation.csv", ablation_csv(rows));
    json j;
    j["format"] = "predin-ablation";
    j["version"] = PREDIN_VERSION;
    j["git_rev"] = PREDIN_GIT_REV;
    j["config"] = config_echo(base);
    json table = json::array();
    for (const auto& r : rows) {
      json row = aggregate_json(r.record.aggregate);
      row["variant"] = r.variant.name();
      table.push_back(std::move(row));
    }
    j["rows"] = std::move(table);
    write_file_atomic(base.output_dir / "ablation.json", j.dump(2) + "\n");
  }
  return rows;
}

}  // namespace predin
