#include <cmath>
#include <cstdlib>
#include <sstream>

#include "dqjl/qnet.hpp"
#include "dqjl/table.hpp"

namespace dqjl {

namespace {

constexpr std::string_view kMagic = "dqjl-qnetwork";
constexpr int kFormatVersion = 1;

void write_tensor(std::string& out, const std::string& name,
                  const MatrixX<double>& m) {
  out += "tensor " + name + " " + std::to_string(m.rows()) + " " +
         std::to_string(m.cols()) + "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      out += format_exact(m(r, c));
    }
    out += '\n';
  }
}

void write_layers(std::string& out, const std::string& prefix,
                  const std::vector<DenseLayer<double>>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto base = prefix + std::to_string(i);
    write_tensor(out, base + ".weight", layers[i].weight);
    write_tensor(out, base + ".bias", MatrixX<double>(layers[i].bias));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view text) : in_(std::string(text)) {}

  std::string word(std::string_view what) {
    std::string token;
    if (!(in_ >> token)) throw CheckpointError("checkpoint truncated while reading " + std::string(what));
    return token;
  }

  void expect(std::string_view keyword) {
    const auto token = word(keyword);
    if (token != keyword) {
      throw CheckpointError("expected '" + std::string(keyword) + "', found '" + token + "'");
    }
  }

  long long integer(std::string_view what) {
    const auto token = word(what);
    try {
      return parse_int(token, what);
    } catch (const IoError& e) {
      throw CheckpointError(e.what());
    }
  }

  double number(std::string_view what) {
    const auto token = word(what);
    char* end = nullptr;
    const double value = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) {
      throw CheckpointError("invalid number '" + token + "' in " + std::string(what));
    }
    if (!std::isfinite(value)) {
      throw CheckpointError("non-finite value '" + token + "' in " + std::string(what));
    }
    return value;
  }

  void tensor(const std::string& name, MatrixX<double>& target) {
    expect("tensor");
    const auto found = word("tensor name");
    if (found != name) throw CheckpointError("expected tensor " + name + ", found " + found);
    const auto rows = integer(name + " rows");
    const auto cols = integer(name + " cols");
    if (rows != target.rows() || cols != target.cols()) {
      throw CheckpointError("tensor " + name + " has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", expected " +
                            std::to_string(target.rows()) + "x" +
                            std::to_string(target.cols()));
    }
    for (Eigen::Index r = 0; r < target.rows(); ++r) {
      for (Eigen::Index c = 0; c < target.cols(); ++c) target(r, c) = number(name);
    }
  }

  void layers(const std::string& prefix, std::vector<DenseLayer<double>>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto base = prefix + std::to_string(i);
      tensor(base + ".weight", layers[i].weight);
      MatrixX<double> bias(layers[i].bias.size(), 1);
      tensor(base + ".bias", bias);
      layers[i].bias = bias.col(0);
    }
  }

  bool at_end() {
    std::string token;
    return !(in_ >> token);
  }

 private:
  std::istringstream in_;
};

}  // namespace

std::string_view to_string(Architecture arch) {
  return arch == Architecture::Standard ? "standard" : "dueling";
}

Architecture parse_architecture(std::string_view text) {
  if (text == "standard") return Architecture::Standard;
  if (text == "dueling") return Architecture::Dueling;
  throw ConfigError("unknown architecture '" + std::string(text) + "'");
}

std::string checkpoint_to_string(const QNetworkd& net) {
  std::string out;
  out += std::string(kMagic) + " " + std::to_string(kFormatVersion) + "\n";
  out += "architecture " + std::string(to_string(net.architecture)) + "\n";
  out += "pad_size " + std::to_string(net.pad_size) + "\n";
  out += "hidden " + std::to_string(net.hidden1()) + " " + std::to_string(net.hidden2()) + "\n";
  out += "adam_step " + std::to_string(net.adam_step) + "\n";
  out += "layers " + std::to_string(net.layers.size()) + "\n";
  write_layers(out, "layer", net.layers);
  write_layers(out, "adam_m.layer", net.adam_m);
  write_layers(out, "adam_v.layer", net.adam_v);
  out += "end\n";
  return out;
}

void save_checkpoint(const QNetworkd& net, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_to_string(net));
}

QNetworkd checkpoint_from_string(std::string_view text) {
  Reader in(text);
  in.expect(kMagic);
  if (in.integer("format version") != kFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version");
  }
  in.expect("architecture");
  Architecture arch{};
  try {
    arch = parse_architecture(in.word("architecture"));
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
  in.expect("pad_size");
  const auto pad_size = in.integer("pad_size");
  in.expect("hidden");
  const auto h1 = in.integer("hidden1");
  const auto h2 = in.integer("hidden2");
  if (pad_size < 1 || h1 < 1 || h2 < 1 || pad_size > 100000 || h1 > 100000 || h2 > 100000) {
    throw CheckpointError("checkpoint dimensions out of range");
  }
  in.expect("adam_step");
  const auto adam_step = in.integer("adam_step");
  if (adam_step < 0) throw CheckpointError("negative adam_step");
  auto net = make_zero_qnetwork<double>(arch, static_cast<int>(pad_size),
                                        static_cast<int>(h1), static_cast<int>(h2));
  net.adam_step = adam_step;
  in.expect("layers");
  if (in.integer("layer count") != static_cast<long long>(net.layers.size())) {
    throw CheckpointError("layer count does not match architecture");
  }
  in.layers("layer", net.layers);
  in.layers("adam_m.layer", net.adam_m);
  in.layers("adam_v.layer", net.adam_v);
  in.expect("end");
  if (!in.at_end()) throw CheckpointError("trailing data after checkpoint end marker");
  return net;
}

QNetworkd load_checkpoint(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  return checkpoint_from_string(text);
}

}  // namespace dqjl
