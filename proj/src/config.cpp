#include "predin/config.hpp"

#include <fstream>
#include <sstream>

#include "predin/text.hpp"

namespace predin {

std::string VariantSpec::name() const {
  switch (kind) {
    case Variant::softmax: return "softmax";
    case Variant::pl_baseline: return "pl_baseline";
    case Variant::dual: return "dual";
    case Variant::dual_trip: return "dual_trip";
    case Variant::predin_wo_trip: return "predin_wo_trip";
    case Variant::predin: return "predin";
    case Variant::sequential: return "sequential_" + std::to_string(sequential_k);
  }
  return "unknown";
}

int VariantSpec::n_branches() const {
  switch (kind) {
    case Variant::softmax:
    case Variant::pl_baseline: return 1;
    case Variant::sequential: return sequential_k;
    default: return 2;
  }
}

VariantSpec parse_variant(const std::string& name) {
  static const std::map<std::string, Variant> fixed{
      {"softmax", Variant::softmax},     {"pl_baseline", Variant::pl_baseline},
      {"dual", Variant::dual},           {"dual_trip", Variant::dual_trip},
      {"predin_wo_trip", Variant::predin_wo_trip}, {"predin", Variant::predin}};
  if (auto it = fixed.find(name); it != fixed.end()) return {it->second, 2};
  const std::string prefix = "sequential_";
  if (name.rfind(prefix, 0) == 0) {
    const std::string k = name.substr(prefix.size());
    try {
      std::size_t pos = 0;
      const int v = std::stoi(k, &pos);
      if (pos == k.size() && v >= 1) return {Variant::sequential, v};
    } catch (const std::exception&) {
    }
  }
  throw InvalidArgument("unknown model variant '" + name + "'");
}

std::vector<VariantSpec> ablation_variants() {
  return {{Variant::softmax, 2},        {Variant::pl_baseline, 2}, {Variant::dual, 2},
          {Variant::dual_trip, 2},      {Variant::predin_wo_trip, 2}, {Variant::predin, 2}};
}

void ExperimentConfig::validate() const {
  if (source != "synthetic" && source != "csv")
    throw InvalidArgument("source must be 'synthetic' or 'csv'");
  if (source == "csv" && (csv_data.empty() || csv_meta.empty()))
    throw InvalidArgument("csv source needs csv_data and csv_meta");
  if (seeds.empty()) throw InvalidArgument("at least one seed is required");
  if (n_known < 2) throw InvalidArgument("n_known must be >= 2");
  hp.validate();
  if (embedding_dim < 1) throw InvalidArgument("embedding_dim must be >= 1");
  for (auto h : hidden_dims)
    if (h < 1) throw InvalidArgument("hidden layer widths must be >= 1");
  if (!(lr > 0)) throw InvalidArgument("lr must be > 0");
  if (momentum < 0 || momentum >= 1) throw InvalidArgument("momentum must lie in [0, 1)");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (!(retention > 0 && retention < 1)) throw InvalidArgument("retention must lie in (0, 1)");
  if (!(holdout_fraction > 0 && holdout_fraction < 1))
    throw InvalidArgument("holdout_fraction must lie in (0, 1)");
  for (int t : train_trials)
    if (test_trials.count(t)) throw InvalidArgument("train and test trials overlap");
  if (!(window_ms > 0) || !(step_ms > 0)) throw InvalidArgument("window and step must be > 0");
  if (variant.kind == Variant::sequential && variant.sequential_k < 1)
    throw InvalidArgument("sequential variant needs K >= 1");
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ParseError("config key '" + key + "': expected an integer, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v.front() != '-') {
      const auto x = std::stoull(v, &pos);
      if (pos == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  throw ParseError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const ParseError&) {
    throw ParseError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

template <typename T, typename F>
std::string join(const T& items, F&& fmt) {
  std::string out;
  for (const auto& x : items) {
    if (!out.empty()) out += ",";
    out += fmt(x);
  }
  return out;
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  auto real = [&](double& field) { field = parse_real(key, v); };
  auto integer = [&](int& field) { field = static_cast<int>(parse_long(key, v)); };
  auto int_set = [&](std::set<int>& field) {
    field.clear();
    for (const auto& s : split_list(v)) field.insert(static_cast<int>(parse_long(key, s)));
  };
  if (key == "source") c.source = v;
  else if (key == "csv_data") c.csv_data = v;
  else if (key == "csv_meta") c.csv_meta = v;
  else if (key == "data_seed") c.data_seed = parse_u64(key, v);
  else if (key == "synthetic.n_classes") integer(c.synthetic.n_classes);
  else if (key == "synthetic.channels") integer(c.synthetic.channels);
  else if (key == "synthetic.trials") integer(c.synthetic.trials_per_class);
  else if (key == "synthetic.subject") integer(c.synthetic.subject_id);
  else if (key == "synthetic.sampling_rate") real(c.synthetic.sampling_rate);
  else if (key == "synthetic.duration_s") real(c.synthetic.duration_s);
  else if (key == "synthetic.separation") real(c.synthetic.separation);
  else if (key == "synthetic.noise") real(c.synthetic.noise);
  else if (key == "synthetic.trial_jitter") real(c.synthetic.trial_jitter);
  else if (key == "window_ms") real(c.window_ms);
  else if (key == "step_ms") real(c.step_ms);
  else if (key == "n_known") integer(c.n_known);
  else if (key == "train_trials") int_set(c.train_trials);
  else if (key == "test_trials") int_set(c.test_trials);
  else if (key == "seeds") {
    c.seeds.clear();
    for (const auto& s : split_list(v)) c.seeds.push_back(parse_u64(key, s));
  } else if (key == "variant") {
    try {
      c.variant = parse_variant(v);
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("config key 'variant': ") + e.what());
    }
  }
  else if (key == "beta") real(c.hp.beta);
  else if (key == "gamma") real(c.hp.gamma);
  else if (key == "alpha") real(c.hp.alpha);
  else if (key == "m1") real(c.hp.m1);
  else if (key == "m2") real(c.hp.m2);
  else if (key == "epsilon_log") real(c.hp.epsilon_log);
  else if (key == "compactness_form") {
    if (v == "huber_sq") c.hp.form = CompactnessForm::huber_sq;
    else if (v == "literal") c.hp.form = CompactnessForm::literal;
    else throw ParseError("config key 'compactness_form': expected huber_sq or literal");
  }
  else if (key == "hidden_dims") {
    c.hidden_dims.clear();
    for (const auto& s : split_list(v)) c.hidden_dims.push_back(parse_long(key, s));
  }
  else if (key == "embedding_dim") c.embedding_dim = parse_long(key, v);
  else if (key == "activation") {
    try {
      c.activation = parse_activation(v);
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("config key 'activation': ") + e.what());
    }
  }
  else if (key == "lr") real(c.lr);
  else if (key == "lr_milestones") {
    c.lr_milestones.clear();
    for (const auto& s : split_list(v)) c.lr_milestones.push_back(static_cast<int>(parse_long(key, s)));
  }
  else if (key == "lr_factor") real(c.lr_factor);
  else if (key == "momentum") real(c.momentum);
  else if (key == "batch_size") integer(c.batch_size);
  else if (key == "epochs") integer(c.epochs);
  else if (key == "retention") real(c.retention);
  else if (key == "calibration") {
    if (v == "test_known") c.calibration = CalibrationSource::test_known;
    else if (v == "train_holdout") c.calibration = CalibrationSource::train_holdout;
    else throw ParseError("config key 'calibration': expected test_known or train_holdout");
  }
  else if (key == "holdout_fraction") real(c.holdout_fraction);
  else if (key == "output_dir") c.output_dir = v;
  else throw ParseError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set_config_value(c, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::map<std::string, std::string> config_echo(const ExperimentConfig& c) {
  auto num = [](double x) { return format_double(x); };
  auto ints = [](const auto& xs) { return join(xs, [](auto x) { return std::to_string(x); }); };
  std::map<std::string, std::string> m;
  m["source"] = c.source;
  if (c.source == "csv") {
    m["csv_data"] = c.csv_data.string();
    m["csv_meta"] = c.csv_meta.string();
  } else {
    m["data_seed"] = std::to_string(c.data_seed);
    m["synthetic.n_classes"] = std::to_string(c.synthetic.n_classes);
    m["synthetic.channels"] = std::to_string(c.synthetic.channels);
    m["synthetic.trials"] = std::to_string(c.synthetic.trials_per_class);
    m["synthetic.subject"] = std::to_string(c.synthetic.subject_id);
    m["synthetic.sampling_rate"] = num(c.synthetic.sampling_rate);
    m["synthetic.duration_s"] = num(c.synthetic.duration_s);
    m["synthetic.separation"] = num(c.synthetic.separation);
    m["synthetic.noise"] = num(c.synthetic.noise);
    m["synthetic.trial_jitter"] = num(c.synthetic.trial_jitter);
  }
  m["window_ms"] = num(c.window_ms);
  m["step_ms"] = num(c.step_ms);
  m["n_known"] = std::to_string(c.n_known);
  m["train_trials"] = ints(c.train_trials);
  m["test_trials"] = ints(c.test_trials);
  m["seeds"] = ints(c.seeds);
  m["variant"] = c.variant.name();
  m["beta"] = num(c.hp.beta);
  m["gamma"] = num(c.hp.gamma);
  m["alpha"] = num(c.hp.alpha);
  m["m1"] = num(c.hp.m1);
  m["m2"] = num(c.hp.m2);
  m["epsilon_log"] = num(c.hp.epsilon_log);
  m["compactness_form"] = c.hp.form == CompactnessForm::huber_sq ? "huber_sq" : "literal";
  m["hidden_dims"] = ints(c.hidden_dims);
  m["embedding_dim"] = std::to_string(c.embedding_dim);
  m["activation"] = to_string(c.activation);
  m["lr"] = num(c.lr);
  m["lr_milestones"] = ints(c.lr_milestones);
  m["lr_factor"] = num(c.lr_factor);
  m["momentum"] = num(c.momentum);
  m["batch_size"] = std::to_string(c.batch_size);
  m["epochs"] = std::to_string(c.epochs);
  m["retention"] = num(c.retention);
  m["calibration"] = c.calibration == CalibrationSource::test_known ? "test_known" : "train_holdout";
  m["holdout_fraction"] = num(c.holdout_fraction);
  return m;
}

std::string config_echo_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_echo(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace predin
