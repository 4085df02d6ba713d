#include "semeda/nets.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace semeda {

namespace {

struct LayerPlan {
  std::size_t in, out, k;
  int stride;
};

std::vector<LayerPlan> edge_plan(std::size_t classes) {
  return {{classes, kEdgeNetWidths[0], 3, 1},
          {kEdgeNetWidths[0], kEdgeNetWidths[1], 3, 1},
          {kEdgeNetWidths[1], kEdgeNetWidths[2], 3, 1}};
}

std::vector<LayerPlan> seg_plan(std::size_t classes, bool edge_head) {
  std::vector<LayerPlan> plan{{3, 16, 3, 1}, {16, 32, 3, kSegNetDownsample}, {32, 32, 3, 1}, {32, classes, 1, 1}};
  if (edge_head) plan.push_back({32, 2, 1, 1});
  return plan;
}

LayerStack build(const std::vector<LayerPlan>& plan, std::mt19937_64* rng) {
  LayerStack layers;
  for (const auto& p : plan) {
    ConvLayer layer{Grid({p.out, p.in, p.k, p.k}), Grid({p.out}), p.stride};
    if (rng) {
      const double fan_in = static_cast<double>(p.in * p.k * p.k);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (auto& w : layer.kernel.data()) w = dist(*rng);
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

void check_plan(const LayerStack& layers, const std::vector<LayerPlan>& plan, const char* what) {
  if (layers.size() != plan.size()) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(plan.size()) +
                                " layers, got " + std::to_string(layers.size()));
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& l = layers[i];
    const auto& p = plan[i];
    const std::vector<std::size_t> kshape{p.out, p.in, p.k, p.k};
    if (l.kernel.shape() != kshape || l.bias.shape() != std::vector<std::size_t>{p.out} ||
        l.stride != p.stride) {
      throw std::invalid_argument(std::string(what) + ": layer " + std::to_string(i) + " is " +
                                  shape_string(l.kernel.shape()) + " stride " +
                                  std::to_string(l.stride) + ", expected " + shape_string(kshape) +
                                  " stride " + std::to_string(p.stride));
    }
  }
}

void require_channels(const Grid& g, std::size_t channels, const char* what) {
  require_chw(g, what);
  if (g.dim(0) != channels) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(channels) +
                                " channels, got " + shape_string(g.shape()));
  }
}

}  // namespace

EdgeNetParams init_edge_net(std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {classes, build(edge_plan(classes), &rng)};
}

SegNetParams init_seg_net(std::size_t classes, bool edge_head, std::uint64_t seed) {
  // The head is drawn last so the backbone does not depend on its presence.
  std::mt19937_64 rng(seed);
  return {classes, build(seg_plan(classes, edge_head), &rng), edge_head};
}

EdgeNetParams zero_edge_net(std::size_t classes) { return {classes, build(edge_plan(classes), nullptr)}; }

SegNetParams zero_seg_net(std::size_t classes, bool edge_head) {
  return {classes, build(seg_plan(classes, edge_head), nullptr), edge_head};
}

void validate(const EdgeNetParams& params) { check_plan(params.layers, edge_plan(params.classes), "edge net"); }

void validate(const SegNetParams& params) {
  check_plan(params.layers, seg_plan(params.classes, params.edge_head), "segmentation net");
}

ParamNodes bind_params(Tape& tape, const LayerStack& layers, bool trainable) {
  ParamNodes nodes;
  nodes.reserve(layers.size());
  for (const auto& l : layers) {
    if (trainable) {
      nodes.push_back({tape.variable(l.kernel), tape.variable(l.bias), l.stride});
    } else {
      nodes.push_back({tape.constant(l.kernel), tape.constant(l.bias), l.stride});
    }
  }
  return nodes;
}

LayerStack collect_grads(const Tape& tape, const ParamNodes& nodes, const LayerStack& like) {
  LayerStack grads;
  grads.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    ConvLayer g{Grid(like[i].kernel.shape()), Grid(like[i].bias.shape()), like[i].stride};
    if (tape.has_grad(nodes[i].kernel)) g.kernel = tape.grad(nodes[i].kernel);
    if (tape.has_grad(nodes[i].bias)) g.bias = tape.grad(nodes[i].bias);
    grads.push_back(std::move(g));
  }
  return grads;
}

EdgeNetNodes edge_net_forward(Tape& tape, const ParamNodes& params, std::size_t classes, NodeId mask,
                              std::size_t depth) {
  if (depth < 1 || depth > kEdgeNetDepth) throw std::invalid_argument("edge_net_forward: depth must be 1..3");
  if (params.size() != kEdgeNetDepth) throw std::invalid_argument("edge_net_forward: expected 3 layers");
  require_channels(tape.value(mask), classes, "edge_net_forward");
  EdgeNetNodes out;
  out.depth = depth;
  NodeId x = mask;
  for (std::size_t l = 0; l < depth; ++l) {
    out.pre[l] = tape.conv2d(x, params[l].kernel, params[l].bias, params[l].stride);
    if (l + 1 < kEdgeNetDepth) {
      out.post[l] = tape.relu(out.pre[l]);
    } else {
      out.post[l] = tape.channel_softmax(out.pre[l]);
      out.edges = out.post[l];
    }
    x = out.post[l];
  }
  return out;
}

EdgeNetOutput edge_net_forward(const EdgeNetParams& params, const Grid& mask) {
  validate(params);
  Tape tape;
  const auto nodes = bind_params(tape, params.layers, false);
  const auto out = edge_net_forward(tape, nodes, params.classes, tape.constant(mask));
  EdgeNetOutput result;
  for (std::size_t l = 0; l < kEdgeNetDepth; ++l) {
    result.embeddings.pre[l] = tape.value(out.pre[l]);
    result.embeddings.post[l] = tape.value(out.post[l]);
  }
  result.edges = tape.value(out.edges);
  return result;
}

SegNetNodes seg_net_forward(Tape& tape, const SegNetParams& params, const ParamNodes& nodes, NodeId image) {
  const Grid& img = tape.value(image);
  require_channels(img, 3, "seg_net_forward");
  if (img.dim(1) % kSegNetDownsample != 0 || img.dim(2) % kSegNetDownsample != 0) {
    throw std::invalid_argument("seg_net_forward: image " + shape_string(img.shape()) +
                                " must have height and width divisible by " +
                                std::to_string(kSegNetDownsample) + "; resize or crop it first");
  }
  if (nodes.size() != params.layers.size()) throw std::invalid_argument("seg_net_forward: parameter count mismatch");
  NodeId x = image;
  for (std::size_t l = 0; l < kSegNetClassifier; ++l) {
    x = tape.relu(tape.conv2d(x, nodes[l].kernel, nodes[l].bias, nodes[l].stride));
  }
  const NodeId features = x;
  const auto& cls = nodes[kSegNetClassifier];
  const NodeId logits = tape.conv2d(features, cls.kernel, cls.bias, cls.stride);
  SegNetNodes out{tape.channel_softmax(tape.bilinear_upsample(logits, kSegNetDownsample)), std::nullopt};
  if (params.edge_head) {
    const auto& head = nodes[kSegNetEdgeHead];
    const NodeId edge_logits = tape.conv2d(features, head.kernel, head.bias, head.stride);
    out.edge_probs = tape.channel_softmax(tape.bilinear_upsample(edge_logits, kSegNetDownsample));
  }
  return out;
}

SegNetOutput seg_net_forward(const SegNetParams& params, const Grid& image) {
  validate(params);
  Tape tape;
  const auto nodes = bind_params(tape, params.layers, false);
  const auto out = seg_net_forward(tape, params, nodes, tape.constant(image));
  SegNetOutput result{tape.value(out.probs), std::nullopt};
  if (out.edge_probs) result.edge_probs = tape.value(*out.edge_probs);
  return result;
}

}  // namespace semeda
