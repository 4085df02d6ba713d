#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "semeda/grid.hpp"
#include "semeda/mask.hpp"
#include "semeda/nets.hpp"
#include "semeda/tape.hpp"

namespace semeda {

enum class Strategy { ppce, multitask, ppce_on_edges, semeda };
enum class MatchPoint { before_relu, after_relu };
/// element_mean: PPCE averaged over scored pixels, each layer's embedding
/// distance averaged over pixels and channels. mean: PPCE as above,
/// embedding distance averaged over pixels only (summed over channels).
/// sum: the plain sums.
enum class Reduction { element_mean, mean, sum };
enum class MatchNorm { l1, l2 };
/// What the third edge-net layer contributes to embedding matching: its
/// logits or its softmax output.
enum class FinalEmbedding { logits, softmax };

struct LossConfig {
  Strategy strategy = Strategy::semeda;
  /// lambda[0] doubles as the edge-term weight for multitask and
  /// ppce_on_edges.
  std::array<double, 3> lambda{0.0, 1.0, 0.0};
  MatchPoint match_point = MatchPoint::before_relu;
  Reduction reduction = Reduction::element_mean;
  MatchNorm norm = MatchNorm::l1;
  FinalEmbedding final_embedding = FinalEmbedding::logits;
  std::uint8_t void_label = kVoidLabel;

  bool needs_edge_net() const { return strategy == Strategy::semeda || strategy == Strategy::ppce_on_edges; }
  bool needs_edge_head() const { return strategy == Strategy::multitask; }
};

/// Throws std::invalid_argument for negative or non-finite weights.
void validate(const LossConfig& config);

std::string_view to_string(Strategy s);
std::string_view to_string(MatchPoint m);
std::string_view to_string(Reduction r);
std::string_view to_string(MatchNorm n);
std::string_view to_string(FinalEmbedding f);
Strategy parse_strategy(std::string_view s);
MatchPoint parse_match_point(std::string_view s);
Reduction parse_reduction(std::string_view s);
MatchNorm parse_match_norm(std::string_view s);
FinalEmbedding parse_final_embedding(std::string_view s);

/// Cross-entropy targets: the label per pixel, -1 for void.
std::vector<int> class_targets(const LabelMask& mask, std::uint8_t void_label = kVoidLabel);
std::vector<int> edge_targets(const EdgeMap& edges);

// Tape-level losses; each returns a scalar node.

NodeId ppce(Tape& tape, NodeId pred, const LabelMask& target, Reduction reduction = Reduction::mean,
            std::uint8_t void_label = kVoidLabel);
NodeId ppce(Tape& tape, NodeId pred, const EdgeMap& target, Reduction reduction = Reduction::mean);

/// Frozen edge net bound on a tape (constants, never receives gradients).
struct FrozenEdgeNet {
  ParamNodes nodes;
  std::size_t classes;
};
FrozenEdgeNet bind_frozen(Tape& tape, const EdgeNetParams& params);

/// Weighted embedding distance between the edge-net activations of `pred`
/// and of the constant mask `gt`.
NodeId semeda_loss(Tape& tape, NodeId pred, const Grid& gt, const FrozenEdgeNet& edge_net,
                   const LossConfig& config);
NodeId edge_ppce_loss(Tape& tape, NodeId pred, const FrozenEdgeNet& edge_net, const EdgeMap& gt_edges,
                      Reduction reduction = Reduction::mean);
NodeId multitask_loss(Tape& tape, NodeId seg_pred, NodeId edge_head_pred, const LabelMask& target,
                      const EdgeMap& gt_edges, double edge_weight, Reduction reduction = Reduction::mean,
                      std::uint8_t void_label = kVoidLabel);
/// ppce plus the edge term selected by config.strategy (semeda or
/// ppce_on_edges). `gt_edges` is only read for ppce_on_edges.
NodeId total_loss(Tape& tape, NodeId pred, const LabelMask& target, const Grid& gt_one_hot,
                  const FrozenEdgeNet& edge_net, const LossConfig& config, const EdgeMap& gt_edges);

// Value-level conveniences.

double ppce(const Grid& pred, const LabelMask& target, Reduction reduction = Reduction::mean,
            std::uint8_t void_label = kVoidLabel);
double semeda_loss(const Grid& pred, const Grid& gt, const EdgeNetParams& edge_net, const LossConfig& config);
double edge_ppce_loss(const Grid& pred, const EdgeNetParams& edge_net, const EdgeMap& gt_edges,
                      Reduction reduction = Reduction::mean);
double multitask_loss(const Grid& seg_pred, const Grid& edge_head_pred, const LabelMask& target,
                      const EdgeMap& gt_edges, double edge_weight, Reduction reduction = Reduction::mean,
                      std::uint8_t void_label = kVoidLabel);
double total_loss(const Grid& pred, const LabelMask& target, const Grid& gt_one_hot,
                  const EdgeNetParams& edge_net, const LossConfig& config);

}  // namespace semeda
