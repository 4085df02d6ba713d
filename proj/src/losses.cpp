#include "semeda/losses.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace semeda {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& names,
                const char* what) {
  for (const auto& [name, value] : names)
    if (name == s) return value;
  std::string known;
  for (const auto& [name, value] : names) known += (known.empty() ? "" : ", ") + std::string(name);
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "' (expected one of " +
                              known + ")");
}

constexpr std::array<std::pair<std::string_view, Strategy>, 4> kStrategies{{
    {"ppce", Strategy::ppce},
    {"multitask", Strategy::multitask},
    {"ppce_on_edges", Strategy::ppce_on_edges},
    {"semeda", Strategy::semeda},
}};
constexpr std::array<std::pair<std::string_view, MatchPoint>, 2> kMatchPoints{{
    {"before_relu", MatchPoint::before_relu},
    {"after_relu", MatchPoint::after_relu},
}};
constexpr std::array<std::pair<std::string_view, Reduction>, 3> kReductions{{
    {"element_mean", Reduction::element_mean},
    {"mean", Reduction::mean},
    {"sum", Reduction::sum},
}};
constexpr std::array<std::pair<std::string_view, MatchNorm>, 2> kNorms{{
    {"l1", MatchNorm::l1},
    {"l2", MatchNorm::l2},
}};
constexpr std::array<std::pair<std::string_view, FinalEmbedding>, 2> kFinal{{
    {"logits", FinalEmbedding::logits},
    {"softmax", FinalEmbedding::softmax},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& names) {
  for (const auto& [name, value] : names)
    if (value == v) return name;
  return "?";
}

NodeId cross_entropy(Tape& tape, NodeId pred, std::vector<int> targets, Reduction reduction) {
  std::size_t scored = 0;
  for (int t : targets) scored += t >= 0 ? 1 : 0;
  if (scored == 0) throw std::invalid_argument("ppce: every pixel is void, the loss is undefined");
  const double weight = reduction == Reduction::sum ? 1.0 : 1.0 / static_cast<double>(scored);
  return tape.cross_entropy(pred, std::move(targets), weight);
}

void require_target_dims(const Grid& pred, std::size_t h, std::size_t w, const char* what) {
  require_chw(pred, what);
  if (pred.dim(1) != h || pred.dim(2) != w) {
    throw std::invalid_argument(std::string(what) + ": prediction " + shape_string(pred.shape()) +
                                " does not match target " + std::to_string(h) + "x" + std::to_string(w));
  }
}

/// The activation compared at layer `l` under `config`.
NodeId matched_node(const EdgeNetNodes& e, std::size_t l, const LossConfig& config) {
  if (l + 1 == kEdgeNetDepth) {
    return config.final_embedding == FinalEmbedding::softmax ? e.post[l] : e.pre[l];
  }
  return config.match_point == MatchPoint::after_relu ? e.post[l] : e.pre[l];
}

}  // namespace

void validate(const LossConfig& config) {
  for (double l : config.lambda) {
    if (!std::isfinite(l) || l < 0.0) throw std::invalid_argument("loss weights must be finite and non-negative");
  }
}

std::string_view to_string(Strategy s) { return name_of(s, kStrategies); }
std::string_view to_string(MatchPoint m) { return name_of(m, kMatchPoints); }
std::string_view to_string(Reduction r) { return name_of(r, kReductions); }
std::string_view to_string(MatchNorm n) { return name_of(n, kNorms); }
std::string_view to_string(FinalEmbedding f) { return name_of(f, kFinal); }

Strategy parse_strategy(std::string_view s) { return parse_enum(s, kStrategies, "strategy"); }

MatchPoint parse_match_point(std::string_view s) {
  if (s == "before") return MatchPoint::before_relu;
  if (s == "after") return MatchPoint::after_relu;
  return parse_enum(s, kMatchPoints, "match point");
}

Reduction parse_reduction(std::string_view s) { return parse_enum(s, kReductions, "reduction"); }
MatchNorm parse_match_norm(std::string_view s) { return parse_enum(s, kNorms, "match norm"); }
FinalEmbedding parse_final_embedding(std::string_view s) { return parse_enum(s, kFinal, "final embedding"); }

std::vector<int> class_targets(const LabelMask& mask, std::uint8_t void_label) {
  std::vector<int> t(mask.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = mask.labels[i] == void_label ? -1 : mask.labels[i];
  return t;
}

std::vector<int> edge_targets(const EdgeMap& edges) {
  return std::vector<int>(edges.flags.begin(), edges.flags.end());
}

NodeId ppce(Tape& tape, NodeId pred, const LabelMask& target, Reduction reduction, std::uint8_t void_label) {
  require_target_dims(tape.value(pred), target.height, target.width, "ppce");
  return cross_entropy(tape, pred, class_targets(target, void_label), reduction);
}

NodeId ppce(Tape& tape, NodeId pred, const EdgeMap& target, Reduction reduction) {
  require_target_dims(tape.value(pred), target.height, target.width, "ppce");
  if (tape.value(pred).dim(0) != 2) throw std::invalid_argument("ppce: edge prediction must have 2 channels");
  return cross_entropy(tape, pred, edge_targets(target), reduction);
}

FrozenEdgeNet bind_frozen(Tape& tape, const EdgeNetParams& params) {
  validate(params);
  return {bind_params(tape, params.layers, false), params.classes};
}

NodeId semeda_loss(Tape& tape, NodeId pred, const Grid& gt, const FrozenEdgeNet& edge_net,
                   const LossConfig& config) {
  validate(config);
  const Grid& p = tape.value(pred);
  if (!p.same_shape(gt)) {
    throw std::invalid_argument("semeda_loss: prediction " + shape_string(p.shape()) + " vs ground truth " +
                                shape_string(gt.shape()));
  }
  std::size_t depth = 0;
  for (std::size_t l = 0; l < kEdgeNetDepth; ++l)
    if (config.lambda[l] > 0.0) depth = l + 1;
  if (depth == 0) return tape.constant(Grid::scalar(0.0));

  const auto gt_emb = edge_net_forward(tape, edge_net.nodes, edge_net.classes, tape.constant(gt), depth);
  const auto pred_emb = edge_net_forward(tape, edge_net.nodes, edge_net.classes, pred, depth);
  const double pixels = static_cast<double>(p.dim(1) * p.dim(2));

  std::optional<NodeId> total;
  for (std::size_t l = 0; l < depth; ++l) {
    if (config.lambda[l] <= 0.0) continue;
    const NodeId a = matched_node(pred_emb, l, config);
    const NodeId b = matched_node(gt_emb, l, config);
    if (!tape.value(a).same_shape(tape.value(b))) {
      throw std::logic_error("semeda_loss: embedding shapes diverged at layer " + std::to_string(l + 1));
    }
    const NodeId diff = tape.sub(a, b);
    const NodeId dist = tape.sum(config.norm == MatchNorm::l1 ? tape.abs(diff) : tape.square(diff));
    double weight = config.lambda[l];
    if (config.reduction != Reduction::sum) weight /= pixels;
    if (config.reduction == Reduction::element_mean) weight /= static_cast<double>(tape.value(a).dim(0));
    const NodeId term = tape.scale(dist, weight);
    total = total ? tape.add(*total, term) : term;
  }
  return *total;
}

NodeId edge_ppce_loss(Tape& tape, NodeId pred, const FrozenEdgeNet& edge_net, const EdgeMap& gt_edges,
                      Reduction reduction) {
  const auto e = edge_net_forward(tape, edge_net.nodes, edge_net.classes, pred);
  return ppce(tape, e.edges, gt_edges, reduction);
}

NodeId multitask_loss(Tape& tape, NodeId seg_pred, NodeId edge_head_pred, const LabelMask& target,
                      const EdgeMap& gt_edges, double edge_weight, Reduction reduction,
                      std::uint8_t void_label) {
  const NodeId seg = ppce(tape, seg_pred, target, reduction, void_label);
  const NodeId edge = ppce(tape, edge_head_pred, gt_edges, reduction);
  return tape.add(seg, tape.scale(edge, edge_weight));
}

NodeId total_loss(Tape& tape, NodeId pred, const LabelMask& target, const Grid& gt_one_hot,
                  const FrozenEdgeNet& edge_net, const LossConfig& config, const EdgeMap& gt_edges) {
  const NodeId base = ppce(tape, pred, target, config.reduction, config.void_label);
  switch (config.strategy) {
    case Strategy::semeda:
      return tape.add(base, semeda_loss(tape, pred, gt_one_hot, edge_net, config));
    case Strategy::ppce_on_edges:
      return tape.add(base,
                      tape.scale(edge_ppce_loss(tape, pred, edge_net, gt_edges, config.reduction), config.lambda[0]));
    default:
      throw std::invalid_argument("total_loss: strategy must be semeda or ppce_on_edges, got " +
                                  std::string(to_string(config.strategy)));
  }
}

double ppce(const Grid& pred, const LabelMask& target, Reduction reduction, std::uint8_t void_label) {
  Tape tape;
  return tape.scalar(ppce(tape, tape.constant(pred), target, reduction, void_label));
}

double semeda_loss(const Grid& pred, const Grid& gt, const EdgeNetParams& edge_net, const LossConfig& config) {
  Tape tape;
  const auto frozen = bind_frozen(tape, edge_net);
  return tape.scalar(semeda_loss(tape, tape.constant(pred), gt, frozen, config));
}

double edge_ppce_loss(const Grid& pred, const EdgeNetParams& edge_net, const EdgeMap& gt_edges,
                      Reduction reduction) {
  Tape tape;
  const auto frozen = bind_frozen(tape, edge_net);
  return tape.scalar(edge_ppce_loss(tape, tape.constant(pred), frozen, gt_edges, reduction));
}

double multitask_loss(const Grid& seg_pred, const Grid& edge_head_pred, const LabelMask& target,
                      const EdgeMap& gt_edges, double edge_weight, Reduction reduction, std::uint8_t void_label) {
  Tape tape;
  return tape.scalar(multitask_loss(tape, tape.constant(seg_pred), tape.constant(edge_head_pred), target,
                                    gt_edges, edge_weight, reduction, void_label));
}

double total_loss(const Grid& pred, const LabelMask& target, const Grid& gt_one_hot,
                  const EdgeNetParams& edge_net, const LossConfig& config) {
  Tape tape;
  const auto frozen = bind_frozen(tape, edge_net);
  const auto edges = extract_edge_map(target, config.void_label);
  return tape.scalar(total_loss(tape, tape.constant(pred), target, gt_one_hot, frozen, config, edges));
}

}  // namespace semeda
