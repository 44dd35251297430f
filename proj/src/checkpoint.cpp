#include <fstream>
#include <sstream>

#include "predin/model.hpp"
#include "predin/text.hpp"

namespace predin {

namespace {

constexpr const char* kMagic = "predin-checkpoint";
constexpr int kFormatVersion = 1;

void write_matrix(std::ostream& os, const char* tag, const Eigen::MatrixXd& m) {
  os << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << format_double(m(i, j));
    os << '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw ParseError("checkpoint ended unexpectedly");
    return w;
  }
  void expect(const std::string& tag) {
    const std::string w = word();
    if (w != tag) throw ParseError("checkpoint: expected '" + tag + "', found '" + w + "'");
  }
  long integer() {
    const std::string w = word();
    try {
      std::size_t pos = 0;
      const long v = std::stol(w, &pos);
      if (pos != w.size()) throw ParseError("");
      return v;
    } catch (const std::exception&) {
      throw ParseError("checkpoint: expected an integer, found '" + w + "'");
    }
  }
  std::uint64_t unsigned_integer() {
    const std::string w = word();
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(w, &pos);
      if (pos != w.size()) throw ParseError("");
      return v;
    } catch (const std::exception&) {
      throw ParseError("checkpoint: expected an unsigned integer, found '" + w + "'");
    }
  }
  double real() { return parse_double(word()); }
  Eigen::MatrixXd matrix(const std::string& tag) {
    expect(tag);
    const long rows = integer(), cols = integer();
    if (rows < 0 || cols < 0) throw ParseError("checkpoint: negative matrix shape");
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) m(i, j) = real();
    return m;
  }

 private:
  std::istream& is_;
};

}  // namespace

void save_checkpoint(const std::vector<Branch>& branches, const DivHyperParams<double>& hp,
                     const std::filesystem::path& path) {
  std::ostringstream os;
  os << kMagic << ' ' << kFormatVersion << '\n';
  os << "hyperparams " << format_double(hp.beta) << ' ' << format_double(hp.gamma) << ' '
     << format_double(hp.alpha) << ' ' << format_double(hp.m1) << ' ' << format_double(hp.m2)
     << ' ' << format_double(hp.epsilon_log) << ' '
     << (hp.form == CompactnessForm::huber_sq ? "huber_sq" : "literal") << '\n';
  os << "branches " << branches.size() << '\n';
  for (const auto& b : branches) {
    const auto& spec = b.encoder.spec;
    os << "branch " << b.seed << '\n';
    os << "encoder " << spec.input_dim << ' ' << to_string(spec.activation) << ' '
       << spec.hidden_dims.size();
    for (auto h : spec.hidden_dims) os << ' ' << h;
    os << ' ' << spec.output_dim << ' ' << b.encoder.init_seed << '\n';
    for (const auto& l : b.encoder.layers) {
      write_matrix(os, "weight", l.weight);
      write_matrix(os, "bias", l.bias);
    }
    os << "prototype_seed " << b.prototypes.seed << '\n';
    write_matrix(os, "prototypes", b.prototypes.prototypes);
    os << "optimizer " << format_double(b.optimizer.learning_rate) << ' '
       << format_double(b.optimizer.momentum) << ' ' << b.optimizer.epoch << ' '
       << b.optimizer.velocity.size() << '\n';
    for (const auto& v : b.optimizer.velocity) write_matrix(os, "velocity", v);
  }
  os << "end\n";

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint " + tmp.string());
    f << os.str();
    if (!f) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  Reader r(f);
  r.expect(kMagic);
  if (r.integer() != kFormatVersion) throw ParseError("unsupported checkpoint version");
  Checkpoint cp;
  r.expect("hyperparams");
  cp.hp.beta = r.real();
  cp.hp.gamma = r.real();
  cp.hp.alpha = r.real();
  cp.hp.m1 = r.real();
  cp.hp.m2 = r.real();
  cp.hp.epsilon_log = r.real();
  const std::string form = r.word();
  if (form == "huber_sq")
    cp.hp.form = CompactnessForm::huber_sq;
  else if (form == "literal")
    cp.hp.form = CompactnessForm::literal;
  else
    throw ParseError("checkpoint: unknown compactness form '" + form + "'");
  r.expect("branches");
  const long n = r.integer();
  for (long k = 0; k < n; ++k) {
    Branch b;
    r.expect("branch");
    b.seed = r.unsigned_integer();
    r.expect("encoder");
    EncoderSpec spec;
    spec.input_dim = r.integer();
    spec.activation = parse_activation(r.word());
    const long hidden = r.integer();
    spec.hidden_dims.clear();
    for (long h = 0; h < hidden; ++h) spec.hidden_dims.push_back(r.integer());
    spec.output_dim = r.integer();
    spec.validate();
    b.encoder.spec = spec;
    b.encoder.init_seed = r.unsigned_integer();
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
      DenseLayer<double> layer;
      layer.weight = r.matrix("weight");
      layer.bias = r.matrix("bias");
      if (layer.weight.rows() != spec.fan_out(l) || layer.weight.cols() != spec.fan_in(l) ||
          layer.bias.size() != spec.fan_out(l))
        throw ParseError("checkpoint: layer " + std::to_string(l) + " shape disagrees with spec");
      b.encoder.layers.push_back(std::move(layer));
    }
    r.expect("prototype_seed");
    b.prototypes.seed = r.unsigned_integer();
    b.prototypes.prototypes = r.matrix("prototypes");
    if (b.prototypes.dim() != spec.output_dim)
      throw ParseError("checkpoint: prototype dim disagrees with encoder output");
    r.expect("optimizer");
    b.optimizer.learning_rate = r.real();
    b.optimizer.momentum = r.real();
    b.optimizer.epoch = static_cast<int>(r.integer());
    const long blocks = r.integer();
    for (long v = 0; v < blocks; ++v) b.optimizer.velocity.push_back(r.matrix("velocity"));
    cp.branches.push_back(std::move(b));
  }
  r.expect("end");
  return cp;
}

}  // namespace predin
