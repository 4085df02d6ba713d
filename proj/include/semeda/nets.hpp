#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semeda/grid.hpp"
#include "semeda/tape.hpp"

namespace semeda {

struct ConvLayer {
  Grid kernel;  // Cout x Cin x k x k
  Grid bias;    // Cout
  int stride = 1;

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t kernel_size() const { return kernel.dim(2); }

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

using LayerStack = std::vector<ConvLayer>;

/// Edge detector over a C-channel mask: three 3x3 stride-1 convolutions
/// with channel plan C -> 16 -> 32 -> 2, ReLU after the first two and a
/// channel softmax after the last.
struct EdgeNetParams {
  std::size_t classes = 0;
  LayerStack layers;

  friend bool operator==(const EdgeNetParams&, const EdgeNetParams&) = default;
};

inline constexpr std::array<std::size_t, 3> kEdgeNetWidths{16, 32, 2};
inline constexpr std::size_t kEdgeNetDepth = 3;

/// Small encoder-decoder segmentation network:
///   conv 3->16 (3x3) relu, conv 16->32 (3x3, stride 2) relu,
///   conv 32->32 (3x3) relu, conv 32->C (1x1), bilinear x2, softmax.
/// With `edge_head`, a fifth layer conv 32->2 (1x1) reads the last shared
/// 32-channel map and is upsampled and softmaxed the same way.
struct SegNetParams {
  std::size_t classes = 0;
  LayerStack layers;
  bool edge_head = false;

  friend bool operator==(const SegNetParams&, const SegNetParams&) = default;
};

inline constexpr int kSegNetDownsample = 2;
inline constexpr std::size_t kSegNetClassifier = 3;
inline constexpr std::size_t kSegNetEdgeHead = 4;

EdgeNetParams init_edge_net(std::size_t classes, std::uint64_t seed);
SegNetParams init_seg_net(std::size_t classes, bool edge_head, std::uint64_t seed);
/// All-zero parameters, same shapes as the initialized networks.
EdgeNetParams zero_edge_net(std::size_t classes);
SegNetParams zero_seg_net(std::size_t classes, bool edge_head);

void validate(const EdgeNetParams& params);
void validate(const SegNetParams& params);

/// Per-layer activations of the edge net for one mask. `pre[l]` is the
/// convolution output of layer l; `post[l]` is relu(pre[l]) for the first
/// two layers and the softmax edge map for the last.
struct EmbeddingSet {
  std::array<Grid, 3> pre;
  std::array<Grid, 3> post;
};

struct EdgeNetOutput {
  Grid edges;  // 2 x H x W, channel 1 = edge probability
  EmbeddingSet embeddings;
};

EdgeNetOutput edge_net_forward(const EdgeNetParams& params, const Grid& mask);

struct SegNetOutput {
  Grid probs;                      // C x H x W
  std::optional<Grid> edge_probs;  // 2 x H x W when the edge head is enabled
};

SegNetOutput seg_net_forward(const SegNetParams& params, const Grid& image);

// Tape-level forward passes.

struct LayerNodes {
  NodeId kernel;
  NodeId bias;
  int stride;
};
using ParamNodes = std::vector<LayerNodes>;

/// Registers a layer stack on the tape, as variables or as constants.
ParamNodes bind_params(Tape& tape, const LayerStack& layers, bool trainable);
/// Collects the gradients of bound parameters after backward().
LayerStack collect_grads(const Tape& tape, const ParamNodes& nodes, const LayerStack& like);

struct EdgeNetNodes {
  std::size_t depth = 0;
  std::array<NodeId, 3> pre{};
  std::array<NodeId, 3> post{};
  NodeId edges = 0;  // valid when depth == 3
};

/// Runs the first `depth` layers (1..3) of the edge net on `mask`.
EdgeNetNodes edge_net_forward(Tape& tape, const ParamNodes& params, std::size_t classes,
                              NodeId mask, std::size_t depth = kEdgeNetDepth);

struct SegNetNodes {
  NodeId probs;
  std::optional<NodeId> edge_probs;
};

SegNetNodes seg_net_forward(Tape& tape, const SegNetParams& params, const ParamNodes& nodes,
                            NodeId image);

// Checkpoints: "SEMEDA1", u32 kind, u32 classes, u32 layer count, per layer
// u32 (out, in, k, stride), then per layer the kernel and bias as
// little-endian IEEE-754 doubles. All integers little-endian.

enum class NetworkKind : std::uint32_t {
  edge = 1,
  segmentation = 2,
  segmentation_with_edge_head = 3,
};

std::vector<std::uint8_t> encode_checkpoint(const EdgeNetParams& params);
std::vector<std::uint8_t> encode_checkpoint(const SegNetParams& params);
EdgeNetParams decode_edge_checkpoint(const std::vector<std::uint8_t>& bytes);
SegNetParams decode_seg_checkpoint(const std::vector<std::uint8_t>& bytes);
NetworkKind checkpoint_kind(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const EdgeNetParams& params);
void save_checkpoint(const std::string& path, const SegNetParams& params);
EdgeNetParams load_edge_checkpoint(const std::string& path);
SegNetParams load_seg_checkpoint(const std::string& path);

}  // namespace semeda
