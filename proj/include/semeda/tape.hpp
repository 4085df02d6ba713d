#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "semeda/grid.hpp"

namespace semeda {

using NodeId = std::size_t;

/// Reverse-mode recorder. Every operation appends an entry whose inputs
/// were created earlier, so the entry list is already in topological
/// order and backward() is a single reverse sweep.
///
/// A node needs a gradient iff it is a trainable leaf or depends on one.
/// Operations whose inputs are all constants record their value only.
class Tape {
 public:
  enum class Op : std::uint8_t {
    conv2d,
    relu,
    channel_softmax,
    bilinear_upsample,
    add,
    sub,
    scale,
    abs,
    square,
    sum,
    cross_entropy,
  };

  /// Trainable leaf: receives a gradient on backward().
  NodeId variable(Grid value);
  /// Leaf that never receives a gradient.
  NodeId constant(Grid value);

  NodeId conv2d(NodeId input, NodeId kernel, NodeId bias, int stride);
  NodeId relu(NodeId x);
  NodeId channel_softmax(NodeId x);
  NodeId bilinear_upsample(NodeId x, int factor);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId abs(NodeId x);
  NodeId square(NodeId x);
  /// Scalar sum of all elements.
  NodeId sum(NodeId x);

  /// Scalar -weight * sum_p log(max(probs[target_p, p], 1e-12)) over pixels
  /// whose target is non-negative. `probs` is C x H x W, `targets` has H*W
  /// entries; a negative target marks a pixel excluded from the sum.
  NodeId cross_entropy(NodeId probs, std::vector<int> targets, double weight);

  const Grid& value(NodeId id) const { return nodes_.at(id).value; }
  double scalar(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }

  /// Reverse sweep from a scalar node. Gradients of every node that needs
  /// one are reset first, so calling it twice does not accumulate.
  void backward(NodeId loss);

  /// Gradient of a node after backward(). Nodes that need no gradient have
  /// none; asking for it throws.
  const Grid& grad(NodeId id) const;
  bool has_grad(NodeId id) const { return !nodes_.at(id).grad.empty(); }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t entry_count() const { return entries_.size(); }

  struct Entry {
    Op op;
    std::vector<NodeId> inputs;
    NodeId output;
    int int_arg = 0;
    double real_arg = 0.0;
    std::shared_ptr<const std::vector<int>> targets;
    /// Forward im2col buffer of a conv2d, kept for the kernel gradient.
    std::shared_ptr<const std::vector<double>> columns;
  };
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  struct Node {
    Grid value;
    Grid grad;
    bool requires_grad = false;
  };

  NodeId push_node(Grid value, bool requires_grad);
  NodeId record(Op op, std::vector<NodeId> inputs, Grid value, int int_arg = 0,
                double real_arg = 0.0,
                std::shared_ptr<const std::vector<int>> targets = nullptr);
  void backward_entry(const Entry& e);
  Grid& grad_slot(NodeId id);

  // deque keeps value() references valid while the tape grows.
  std::deque<Node> nodes_;
  std::vector<Entry> entries_;
};

inline constexpr double kLogFloor = 1e-12;

}  // namespace semeda
