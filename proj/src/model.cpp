// SPDX-License-Identifier: Apache-2.0
#include "gtlens/model.hpp"

#include "gtlens/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace gtlens {

std::string_view to_string(ForwardMode mode) { return mode == ForwardMode::Full ? "full" : "proxy"; }

ForwardMode parse_forward_mode(std::string_view text) {
  if (text == "full") return ForwardMode::Full;
  if (text == "proxy") return ForwardMode::Proxy;
  throw Error(ErrorCode::Schema, "unknown forward mode '" + std::string(text) + "'");
}

void SanConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::Schema, what); };
  // layers == 0 is the identity network used as a sensitivity baseline.
  if (layers < 0) bad("layers must be >= 0");
  if (heads < 1) bad("heads must be >= 1");
  if (dim < heads) bad("dim must be >= heads");
  if (dim % heads != 0) bad("dim must be divisible by heads");
  if (max_dist < 1) bad("max_dist must be >= 1");
}

SanConfig SanConfig::full_scale() {
  SanConfig cfg;
  cfg.layers = 20;
  cfg.dim = 256;
  cfg.heads = 32;
  return cfg;
}

const std::vector<std::string>& element_vocabulary() {
  static const std::vector<std::string> vocab = {
      "B", "C", "N", "O", "F", "Si", "P", "S", "Cl", "Se", "Br", "I",
      "Li", "Na", "K", "Mg", "Ca", "Zn", "Sn", std::string(kMaskToken),
  };
  return vocab;
}

int element_index(std::string_view element) {
  const auto& vocab = element_vocabulary();
  for (size_t i = 0; i + 1 < vocab.size(); ++i) {
    if (vocab[i] == element) return static_cast<int>(i);
  }
  throw Error(ErrorCode::Vocab, "element '" + std::string(element) + "' is not in the vocabulary");
}

std::uint64_t SanWeights::checksum() const {
  std::uint64_t hash = 1469598103934665603ULL;
  auto mix = [&](const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ULL;
    }
  };
  for_each_tensor(*this, [&](const std::string& name, const Eigen::MatrixXd& t) {
    mix(name.data(), name.size());
    const std::int64_t shape[2] = {t.rows(), t.cols()};
    mix(shape, sizeof(shape));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const double v = t(r, c);
        mix(&v, sizeof(v));
      }
    }
  });
  return hash;
}

Eigen::MatrixXd LayerTrace::mean_attention(int layer) const {
  const auto& heads = attention.at(layer - 1);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(heads.front().rows(), heads.front().cols());
  for (const auto& a : heads) mean += a;
  return mean / static_cast<double>(heads.size());
}

SanWeights init_weights(const SanConfig& cfg) {
  cfg.validate();
  const int d = cfg.dim;
  SanWeights w;
  w.config = cfg;
  w.atom_embedding.resize(static_cast<Eigen::Index>(element_vocabulary().size()), d);
  w.centrality_embedding.resize(kMaxCentrality + 1, d);
  w.class_embedding.resize(1, d);
  w.layers.resize(cfg.layers);
  for (auto& layer : w.layers) {
    layer.norm1_gain.resize(1, d);
    layer.norm1_bias.resize(1, d);
    layer.query.resize(d, d);
    layer.key.resize(d, d);
    layer.value.resize(d, d);
    layer.proj.resize(d, d);
    layer.norm2_gain.resize(1, d);
    layer.norm2_bias.resize(1, d);
    layer.ffn_in.resize(d, cfg.ffn_dim());
    layer.ffn_in_bias.resize(1, cfg.ffn_dim());
    layer.ffn_out.resize(cfg.ffn_dim(), d);
    layer.ffn_out_bias.resize(1, d);
    layer.distance_bias.resize(cfg.heads, cfg.distance_codes());
  }

  std::mt19937_64 rng(cfg.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  SanWeights::for_each_tensor(w, [&](const std::string& name, Eigen::MatrixXd& t) {
    const bool gain = name.ends_with("_gain");
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = (gain ? 1.0 : 0.0) + uniform(rng);
    }
  });
  return w;
}

Eigen::MatrixXd encode(const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg) {
  const int offset = cfg.include_class_token ? 1 : 0;
  Eigen::MatrixXd x(g.size() + offset, w.config.dim);
  if (offset) x.row(0) = w.class_embedding.row(0);
  for (int i = 0; i < g.size(); ++i) {
    const auto& atom = g.atoms()[i];
    const int type = element_index(atom.element);
    const int centrality = std::min(g.degree(i) + atom.implicit_h, kMaxCentrality);
    x.row(i + offset) = w.atom_embedding.row(type) + w.centrality_embedding.row(centrality);
  }
  return x;
}

Eigen::MatrixXi distance_codes(const MolecularGraph& g, const SanConfig& cfg) {
  const Eigen::MatrixXi dist = bfs_distances(g);
  const int offset = cfg.include_class_token ? 1 : 0;
  const int n = g.size() + offset;
  Eigen::MatrixXi codes(n, n);
  if (offset) {
    codes.row(0).setConstant(cfg.class_code());
    codes.col(0).setConstant(cfg.class_code());
  }
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) {
      const int hops = dist(i, j);
      codes(i + offset, j + offset) =
          hops == kUnreachable ? cfg.unreachable_code() : std::min(hops, cfg.max_dist);
    }
  }
  return codes;
}

namespace {

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gain,
                           const Eigen::MatrixXd& bias) {
  constexpr double kNormEps = 1e-5;
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    out.row(r) = ((x.row(r).array() - mean) * inv * gain.row(0).array() + bias.row(0).array()).matrix();
  }
  return out;
}

Eigen::MatrixXd gelu(Eigen::MatrixXd x) {
  x = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
  return x;
}

/// Row-wise max-shifted softmax of logits; E_NONFINITE on corrupt input.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  if (!logits.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite attention logits");
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - top).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

void check_compatible(const SanWeights& w, const SanConfig& cfg) {
  cfg.validate();
  const SanConfig& base = w.config;
  if (cfg.dim != base.dim || cfg.heads != base.heads || cfg.max_dist != base.max_dist) {
    throw Error(ErrorCode::Schema, "config widths do not match the weights");
  }
  if (cfg.layers > static_cast<int>(w.layers.size())) {
    throw Error(ErrorCode::Schema, "config asks for more layers than the weights provide");
  }
}

}  // namespace

LayerTrace forward_embedded(const Eigen::MatrixXd& x0, const Eigen::MatrixXi& codes,
                            const SanWeights& w, const SanConfig& cfg, bool capture) {
  check_compatible(w, cfg);
  const Eigen::Index n = x0.rows();
  if (x0.cols() != cfg.dim || codes.rows() != n || codes.cols() != n) {
    throw Error(ErrorCode::Dim, "embedding or distance-code shape mismatch");
  }
  const int hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  LayerTrace trace;
  trace.has_class_token = cfg.include_class_token;
  if (capture) trace.states.push_back(x0);

  Eigen::MatrixXd x = x0;
  std::vector<Eigen::MatrixXd> heads(cfg.heads);
  Eigen::MatrixXd bias(n, n);
  for (int l = 0; l < cfg.layers; ++l) {
    const LayerWeights& lw = w.layers[l];
    const Eigen::MatrixXd h = layer_norm(x, lw.norm1_gain, lw.norm1_bias);
    const Eigen::MatrixXd q = h * lw.query;
    const Eigen::MatrixXd k = h * lw.key;
    for (int head = 0; head < cfg.heads; ++head) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) bias(i, j) = lw.distance_bias(head, codes(i, j));
      }
      const auto qh = q.middleCols(head * hd, hd);
      const auto kh = k.middleCols(head * hd, hd);
      heads[head] = softmax_rows(scale * (qh * kh.transpose()) + bias);
    }

    if (cfg.mode == ForwardMode::Proxy) {
      Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
      for (const auto& a : heads) mean += a;
      mean /= static_cast<double>(cfg.heads);
      x = x + mean * x;
    } else {
      const Eigen::MatrixXd v = h * lw.value;
      Eigen::MatrixXd mixed(n, cfg.dim);
      for (int head = 0; head < cfg.heads; ++head) {
        mixed.middleCols(head * hd, hd) = heads[head] * v.middleCols(head * hd, hd);
      }
      x = x + mixed * lw.proj;
      const Eigen::MatrixXd h2 = layer_norm(x, lw.norm2_gain, lw.norm2_bias);
      Eigen::MatrixXd inner = h2 * lw.ffn_in;
      inner.rowwise() += lw.ffn_in_bias.row(0);
      Eigen::MatrixXd ffn = gelu(std::move(inner)) * lw.ffn_out;
      ffn.rowwise() += lw.ffn_out_bias.row(0);
      x = x + ffn;
    }
    if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite token state");
    if (capture) {
      trace.states.push_back(x);
      trace.attention.push_back(heads);
    }
  }
  if (!capture) trace.states.push_back(std::move(x));
  return trace;
}

LayerTrace forward(const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg) {
  check_compatible(w, cfg);
  return forward_embedded(encode(g, w, cfg), distance_codes(g, cfg), w, cfg, true);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json config_json(const SanConfig& cfg) {
  return {{"layers", cfg.layers},
          {"dim", cfg.dim},
          {"heads", cfg.heads},
          {"max_dist", cfg.max_dist},
          {"include_class_token", cfg.include_class_token},
          {"mode", std::string(to_string(cfg.mode))},
          {"seed", cfg.seed}};
}

SanConfig config_from(const nlohmann::json& j) {
  SanConfig cfg;
  try {
    cfg.layers = j.at("layers").get<int>();
    cfg.dim = j.at("dim").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.max_dist = j.at("max_dist").get<int>();
    cfg.include_class_token = j.at("include_class_token").get<bool>();
    cfg.mode = parse_forward_mode(j.at("mode").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("bad config block: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace

std::string config_to_json(const SanConfig& cfg) { return config_json(cfg).dump(); }

std::string weights_to_json(const SanWeights& w) {
  // Tensors are written by hand so every number carries 17 significant digits.
  std::string out = fmt::format("{{\"version\":1,\"config\":{},\"tensors\":{{", config_to_json(w.config));
  bool first = true;
  SanWeights::for_each_tensor(w, [&](const std::string& name, const Eigen::MatrixXd& t) {
    out += fmt::format("{}\"{}\":{{\"shape\":[{},{}],\"data\":[", first ? "" : ",\n", name, t.rows(),
                       t.cols());
    first = false;
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        if (r + c > 0) out += ',';
        out += fmt::format("{:.17g}", t(r, c));
      }
    }
    out += "]}";
  });
  out += "}}\n";
  return out;
}

SanWeights weights_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Schema, std::string("unreadable weights file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("version")) throw Error(ErrorCode::Schema, "missing version");
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != 1) {
    throw Error(ErrorCode::Schema, "unsupported weights version " + doc["version"].dump());
  }
  if (!doc.contains("config") || !doc.contains("tensors")) {
    throw Error(ErrorCode::Schema, "weights file needs 'config' and 'tensors'");
  }
  // Allocate the expected shapes, then fill them from the file.
  SanWeights w = init_weights(config_from(doc["config"]));
  const auto& tensors = doc["tensors"];
  size_t seen = 0;
  SanWeights::for_each_tensor(w, [&](const std::string& name, Eigen::MatrixXd& t) {
    if (!tensors.contains(name)) throw Error(ErrorCode::Schema, "missing tensor '" + name + "'");
    const auto& entry = tensors[name];
    try {
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      const auto& data = entry.at("data");
      if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
          data.size() != static_cast<size_t>(t.size())) {
        throw Error(ErrorCode::Schema, "tensor '" + name + "' has the wrong shape");
      }
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) {
          t(r, c) = data[static_cast<size_t>(r * t.cols() + c)].get<double>();
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Schema, "tensor '" + name + "': " + e.what());
    }
    if (!t.allFinite()) throw Error(ErrorCode::Schema, "tensor '" + name + "' has non-finite data");
    ++seen;
  });
  if (seen != tensors.size()) throw Error(ErrorCode::Schema, "unexpected extra tensors");
  return w;
}

void save_weights(const SanWeights& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << weights_to_json(w);
  if (!out.flush()) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

SanWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return weights_from_json(buffer.str());
}

}  // namespace gtlens
