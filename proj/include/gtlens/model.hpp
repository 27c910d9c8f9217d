// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gtlens/graph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gtlens {

enum class ForwardMode { Full, Proxy };

std::string_view to_string(ForwardMode mode);
ForwardMode parse_forward_mode(std::string_view text);

struct SanConfig {
  int layers = 4;
  int dim = 32;
  int heads = 4;
  int max_dist = 8;
  bool include_class_token = false;
  ForwardMode mode = ForwardMode::Full;
  std::uint64_t seed = 0;

  int head_dim() const { return dim / heads; }
  int ffn_dim() const { return 2 * dim; }
  /// Distance-bias codes: 0..max_dist, then unreachable, then class-token link.
  int distance_codes() const { return max_dist + 3; }
  int unreachable_code() const { return max_dist + 1; }
  int class_code() const { return max_dist + 2; }

  /// Throws E_SCHEMA on an inconsistent configuration.
  void validate() const;

  /// 20 layers, width 256, 32 heads.
  static SanConfig full_scale();

  bool operator==(const SanConfig&) const = default;
};

/// Atom-type vocabulary. The last entry is the mask token; it has an embedding
/// row but no element maps onto it.
const std::vector<std::string>& element_vocabulary();
int element_index(std::string_view element);
inline constexpr std::string_view kMaskToken = "<mask>";

/// Centrality index = explicit degree + implicit hydrogens, clipped to this.
inline constexpr int kMaxCentrality = 8;

struct LayerWeights {
  Eigen::MatrixXd norm1_gain, norm1_bias;  // 1 x d
  Eigen::MatrixXd query, key, value, proj;  // d x d, heads occupy column blocks
  Eigen::MatrixXd norm2_gain, norm2_bias;  // 1 x d
  Eigen::MatrixXd ffn_in, ffn_in_bias;     // d x 2d, 1 x 2d
  Eigen::MatrixXd ffn_out, ffn_out_bias;   // 2d x d, 1 x d
  Eigen::MatrixXd distance_bias;           // heads x distance_codes
};

struct SanWeights {
  SanConfig config;
  Eigen::MatrixXd atom_embedding;        // vocab x d
  Eigen::MatrixXd centrality_embedding;  // (kMaxCentrality + 1) x d
  Eigen::MatrixXd class_embedding;       // 1 x d
  std::vector<LayerWeights> layers;

  /// Visits every tensor in a fixed order with its serialized name.
  template <typename Self, typename Fn>
  static void for_each_tensor(Self& self, Fn&& fn) {
    fn("atom_embedding", self.atom_embedding);
    fn("centrality_embedding", self.centrality_embedding);
    fn("class_embedding", self.class_embedding);
    for (size_t l = 0; l < self.layers.size(); ++l) {
      auto& layer = self.layers[l];
      const std::string p = "layers." + std::to_string(l) + ".";
      fn(p + "norm1_gain", layer.norm1_gain);
      fn(p + "norm1_bias", layer.norm1_bias);
      fn(p + "query", layer.query);
      fn(p + "key", layer.key);
      fn(p + "value", layer.value);
      fn(p + "proj", layer.proj);
      fn(p + "norm2_gain", layer.norm2_gain);
      fn(p + "norm2_bias", layer.norm2_bias);
      fn(p + "ffn_in", layer.ffn_in);
      fn(p + "ffn_in_bias", layer.ffn_in_bias);
      fn(p + "ffn_out", layer.ffn_out);
      fn(p + "ffn_out_bias", layer.ffn_out_bias);
      fn(p + "distance_bias", layer.distance_bias);
    }
  }

  /// FNV-1a over shapes and raw IEEE bytes of every tensor.
  std::uint64_t checksum() const;
};

/// Per-layer token states and attention captured by a forward pass.
struct LayerTrace {
  bool has_class_token = false;
  /// states[0] = X_0 ... states[L] = X_L, each n x d.
  std::vector<Eigen::MatrixXd> states;
  /// attention[l-1][h] = head h of A_l, each n x n.
  std::vector<std::vector<Eigen::MatrixXd>> attention;

  int layers() const { return static_cast<int>(attention.size()); }
  Eigen::Index tokens() const { return states.empty() ? 0 : states.front().rows(); }
  /// Head average of A_l, 1-based layer index.
  Eigen::MatrixXd mean_attention(int layer) const;
};

SanWeights init_weights(const SanConfig& cfg);

/// X_0: atom-type + centrality embedding per atom, class token prepended when
/// enabled. Throws E_VOCAB for elements outside the vocabulary.
Eigen::MatrixXd encode(const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg);

/// Token-pair distance-bias codes for the n x n token grid.
Eigen::MatrixXi distance_codes(const MolecularGraph& g, const SanConfig& cfg);

/// `cfg` may differ from `w.config` in mode, class-token use and depth (up to
/// the number of stored layers); widths must agree.
LayerTrace forward(const MolecularGraph& g, const SanWeights& w, const SanConfig& cfg);

/// Forward from given token embeddings. With capture = false only the final
/// state is kept (states = {X_L}, no attention).
LayerTrace forward_embedded(const Eigen::MatrixXd& x0, const Eigen::MatrixXi& codes,
                            const SanWeights& w, const SanConfig& cfg, bool capture = true);

std::string weights_to_json(const SanWeights& w);
SanWeights weights_from_json(std::string_view text);
void save_weights(const SanWeights& w, const std::filesystem::path& path);
SanWeights load_weights(const std::filesystem::path& path);

std::string config_to_json(const SanConfig& cfg);

}  // namespace gtlens
