#include "predin/signal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace predin {

void SignalRecording::validate() const {
  if (samples.rows() < 1 || samples.cols() < 1)
    throw InvalidArgument("recording needs at least one channel and one timestep");
  if (!(sampling_rate > 0.0)) throw InvalidArgument("sampling rate must be positive");
  if (!samples.allFinite()) throw InvalidArgument("recording contains non-finite samples");
}

std::optional<ClassId> LabelSplit::remap(int source_label) const {
  auto it = std::lower_bound(known_classes.begin(), known_classes.end(), source_label);
  if (it == known_classes.end() || *it != source_label) return std::nullopt;
  return static_cast<ClassId>(it - known_classes.begin());
}

WindowGeometry window_geometry(double sampling_rate, double window_ms, double step_ms) {
  if (!(sampling_rate > 0.0)) throw InvalidArgument("sampling rate must be positive");
  if (!(window_ms > 0.0)) throw InvalidArgument("window length must be positive");
  if (!(step_ms > 0.0)) throw InvalidArgument("window step must be positive");
  WindowGeometry g;
  g.length = static_cast<Eigen::Index>(std::llround(window_ms * sampling_rate / 1000.0));
  g.stride = static_cast<Eigen::Index>(std::llround(step_ms * sampling_rate / 1000.0));
  if (g.length < 1) throw InvalidArgument("window shorter than one sample");
  if (g.stride < 1) throw InvalidArgument("window step shorter than one sample");
  return g;
}

std::vector<WindowSample> segment_windows(const SignalRecording& recording, double window_ms,
                                          double step_ms) {
  recording.validate();
  const WindowGeometry g = window_geometry(recording.sampling_rate, window_ms, step_ms);
  std::vector<WindowSample> out;
  const Eigen::Index n = recording.timesteps();
  if (n < g.length) return out;
  out.reserve(static_cast<std::size_t>((n - g.length) / g.stride + 1));
  for (Eigen::Index start = 0; start + g.length <= n; start += g.stride) {
    WindowSample w;
    w.x = recording.samples.middleCols(start, g.length);
    w.label = recording.gesture_label;
    w.source_label = recording.gesture_label;
    w.trial_id = recording.trial_id;
    w.subject_id = recording.subject_id;
    out.push_back(std::move(w));
  }
  return out;
}

StandardizationStats compute_channel_stats(const std::vector<WindowSample>& windows) {
  if (windows.empty()) throw InvalidArgument("standardization needs training windows");
  const Eigen::Index channels = windows.front().x.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
  double count = 0.0;
  for (const auto& w : windows) {
    if (w.x.rows() != channels) throw InvalidArgument("windows disagree on channel count");
    sum += w.x.rowwise().sum();
    count += static_cast<double>(w.x.cols());
  }
  StandardizationStats stats;
  stats.mean = sum / count;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(channels);
  for (const auto& w : windows)
    sq += (w.x.colwise() - stats.mean).array().square().matrix().rowwise().sum();
  stats.stddev = (sq / count).cwiseSqrt();
  for (Eigen::Index c = 0; c < channels; ++c) {
    if (stats.stddev(c) < kStdFloor) {
      stats.stddev(c) = kStdFloor;
      stats.floored_channels.push_back(static_cast<int>(c));
    }
  }
  return stats;
}

DatasetPartition standardize(DatasetPartition partition) {
  StandardizationStats stats = compute_channel_stats(partition.train_windows);
  const Eigen::ArrayXd inv = stats.stddev.array().inverse();
  auto apply = [&](std::vector<WindowSample>& ws) {
    for (auto& w : ws) {
      if (w.x.rows() != stats.mean.size())
        throw InvalidArgument("test window channel count differs from training");
      w.x = ((w.x.colwise() - stats.mean).array().colwise() * inv).matrix();
    }
  };
  apply(partition.train_windows);
  apply(partition.test_windows);
  partition.stats = std::move(stats);
  return partition;
}

LabelSplit split_known_unknown(const std::set<int>& all_classes, int n_known,
                               std::uint64_t seed) {
  if (n_known < 2) throw InvalidArgument("need at least two known classes");
  if (n_known >= static_cast<int>(all_classes.size()))
    throw InvalidArgument("n_known must be smaller than the number of classes");
  std::vector<int> pool(all_classes.begin(), all_classes.end());
  Rng rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  LabelSplit split;
  split.seed = seed;
  split.known_classes.assign(pool.begin(), pool.begin() + n_known);
  split.unknown_classes.assign(pool.begin() + n_known, pool.end());
  std::sort(split.known_classes.begin(), split.known_classes.end());
  std::sort(split.unknown_classes.begin(), split.unknown_classes.end());
  return split;
}

DatasetPartition split_trials(const std::vector<WindowSample>& windows, const LabelSplit& split,
                              const std::set<int>& train_trials,
                              const std::set<int>& test_trials) {
  for (int t : train_trials)
    if (test_trials.count(t))
      throw InvalidArgument("trial " + std::to_string(t) + " is in both train and test sets");
  DatasetPartition part;
  part.split = split;
  for (const auto& w : windows) {
    const auto known = split.remap(w.source_label);
    WindowSample routed = w;
    routed.label = known ? *known : kUnknownLabel;
    if (train_trials.count(w.trial_id)) {
      if (known) part.train_windows.push_back(std::move(routed));
    } else if (test_trials.count(w.trial_id)) {
      part.test_windows.push_back(std::move(routed));
    }
  }
  return part;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  if (config.n_classes < 3) throw InvalidArgument("synthetic data needs at least 3 classes");
  if (config.channels < 1 || config.trials_per_class < 1)
    throw InvalidArgument("synthetic data needs channels and trials");
  if (!(config.sampling_rate > 0.0) || !(config.duration_s > 0.0))
    throw InvalidArgument("synthetic sampling rate and duration must be positive");
  if (config.separation < 0.0 || config.noise < 0.0 || config.trial_jitter < 0.0)
    throw InvalidArgument("synthetic scales must be non-negative");

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> amp_dist(0.5, 1.5);
  std::uniform_real_distribution<double> freq_dist(10.0, 150.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);

  const int C = config.channels;
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::llround(config.duration_s * config.sampling_rate));
  Eigen::MatrixXd offset(config.n_classes, C), amplitude(config.n_classes, C),
      frequency(config.n_classes, C);
  for (int c = 0; c < config.n_classes; ++c)
    for (int ch = 0; ch < C; ++ch) {
      offset(c, ch) = normal(rng);
      amplitude(c, ch) = amp_dist(rng);
      frequency(c, ch) = freq_dist(rng);
    }

  // One-pole low-pass keeps the shared noise band-limited with unit variance.
  const double pole = 0.9;
  const double drive = std::sqrt(1.0 - pole * pole);

  SyntheticDataset out;
  for (int c = 0; c < config.n_classes; ++c) {
    out.classes.insert(c + 1);
    for (int trial = 1; trial <= config.trials_per_class; ++trial) {
      SignalRecording rec;
      rec.sampling_rate = config.sampling_rate;
      rec.gesture_label = c + 1;
      rec.trial_id = trial;
      rec.subject_id = config.subject_id;
      rec.samples.resize(C, n);
      for (int ch = 0; ch < C; ++ch) {
        const double level = offset(c, ch) + config.trial_jitter * normal(rng);
        const double phase = phase_dist(rng);
        const double omega = 2.0 * std::numbers::pi * frequency(c, ch) / config.sampling_rate;
        double state = normal(rng);
        for (Eigen::Index t = 0; t < n; ++t) {
          state = pole * state + drive * normal(rng);
          const double signature =
              level + amplitude(c, ch) * std::sin(omega * static_cast<double>(t) + phase);
          rec.samples(ch, t) = config.separation * signature + config.noise * state;
        }
      }
      out.recordings.push_back(std::move(rec));
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && !text.empty();
}

std::string location(const std::filesystem::path& path, std::size_t line, std::size_t column) {
  std::ostringstream os;
  os << path.string() << ":" << line << ", column " << column;
  return os.str();
}

struct MetaRow {
  long start = 0, end = 0;
  int label = 0, trial = 0, subject = 0;
  double rate = 0.0;
  std::size_t line = 0;
};

}  // namespace

std::vector<SignalRecording> load_csv(const std::filesystem::path& data_path,
                                      const std::filesystem::path& meta_path) {
  std::ifstream data(data_path);
  if (!data) throw IoError("cannot open signal file " + data_path.string());

  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(data, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (rows.empty()) width = fields.size();
    if (fields.size() != width)
      throw ParseError("row " + std::to_string(line_no) + " of " + data_path.string() + " has " +
                       std::to_string(fields.size()) + " values, expected " +
                       std::to_string(width));
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c)
      if (!parse_number(fields[c], values[c]) || !std::isfinite(values[c]))
        throw ParseError("non-numeric cell at " + location(data_path, line_no, c + 1));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) return {};

  std::ifstream meta(meta_path);
  if (!meta) throw IoError("cannot open metadata file " + meta_path.string());
  std::vector<MetaRow> entries;
  line_no = 0;
  while (std::getline(meta, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (entries.empty() && line_no == 1 && t.rfind("start_row", 0) == 0) continue;
    const auto fields = split_fields(t);
    if (fields.size() != 6)
      throw ParseError("metadata row " + std::to_string(line_no) + " of " + meta_path.string() +
                       " needs 6 fields");
    MetaRow m;
    m.line = line_no;
    bool ok = parse_number(fields[0], m.start) && parse_number(fields[1], m.end);
    ok = ok && parse_number(fields[2], m.label) && parse_number(fields[3], m.trial);
    ok = ok && parse_number(fields[4], m.subject) && parse_number(fields[5], m.rate);
    if (!ok) throw ParseError("non-numeric metadata field at " + location(meta_path, line_no, 1));
    if (m.start < 0 || m.end <= m.start || m.end > static_cast<long>(rows.size()))
      throw ParseError("metadata range [" + std::to_string(m.start) + ", " +
                       std::to_string(m.end) + ") at " + meta_path.string() + ":" +
                       std::to_string(line_no) + " is outside the " +
                       std::to_string(rows.size()) + " signal rows");
    entries.push_back(m);
  }

  std::vector<MetaRow> sorted = entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const MetaRow& a, const MetaRow& b) { return a.start < b.start; });
  long cursor = 0;
  for (const auto& m : sorted) {
    if (m.start > cursor)
      throw ParseError("signal rows [" + std::to_string(cursor) + ", " + std::to_string(m.start) +
                       ") have no metadata entry");
    if (m.start < cursor)
      throw ParseError("metadata range at line " + std::to_string(m.line) + " overlaps another");
    cursor = m.end;
  }
  if (cursor < static_cast<long>(rows.size()))
    throw ParseError("signal rows [" + std::to_string(cursor) + ", " +
                     std::to_string(rows.size()) + ") have no metadata entry");

  std::vector<SignalRecording> out;
  out.reserve(entries.size());
  for (const auto& m : entries) {
    SignalRecording rec;
    rec.sampling_rate = m.rate;
    rec.gesture_label = m.label;
    rec.trial_id = m.trial;
    rec.subject_id = m.subject;
    rec.samples.resize(static_cast<Eigen::Index>(width), m.end - m.start);
    for (long r = m.start; r < m.end; ++r)
      for (std::size_t c = 0; c < width; ++c)
        rec.samples(static_cast<Eigen::Index>(c), r - m.start) = rows[r][c];
    rec.validate();
    out.push_back(std::move(rec));
  }
  return out;
}

void save_csv(const std::vector<SignalRecording>& recordings,
              const std::filesystem::path& data_path, const std::filesystem::path& meta_path) {
  std::ofstream data(data_path), meta(meta_path);
  if (!data) throw IoError("cannot write " + data_path.string());
  if (!meta) throw IoError("cannot write " + meta_path.string());
  data.precision(17);
  meta.precision(17);
  meta << "start_row,end_row,label,trial,subject,sampling_rate_hz\n";
  long row = 0;
  for (const auto& rec : recordings) {
    for (Eigen::Index t = 0; t < rec.timesteps(); ++t) {
      for (Eigen::Index c = 0; c < rec.channels(); ++c)
        data << (c ? "," : "") << rec.samples(c, t);
      data << '\n';
    }
    meta << row << ',' << row + rec.timesteps() << ',' << rec.gesture_label << ','
         << rec.trial_id << ',' << rec.subject_id << ',' << rec.sampling_rate << '\n';
    row += rec.timesteps();
  }
}

Eigen::MatrixXd flatten_windows(const std::vector<WindowSample>& windows) {
  if (windows.empty()) return {};
  const Eigen::Index dim = windows.front().x.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), dim);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& x = windows[i].x;
    if (x.size() != dim) throw InvalidArgument("windows differ in shape");
    // Row-major flattening: all timesteps of channel 0, then channel 1, ...
    for (Eigen::Index c = 0; c < x.rows(); ++c)
      out.row(static_cast<Eigen::Index>(i)).segment(c * x.cols(), x.cols()) = x.row(c);
  }
  return out;
}

Labels window_labels(const std::vector<WindowSample>& windows) {
  Labels y(static_cast<Eigen::Index>(windows.size()));
  for (std::size_t i = 0; i < windows.size(); ++i) y(static_cast<Eigen::Index>(i)) = windows[i].label;
  return y;
}

}  // namespace predin
