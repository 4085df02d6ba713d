#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "semeda/data.hpp"
#include "semeda/losses.hpp"
#include "semeda/nets.hpp"

namespace semeda {

struct AugmentOptions {
  bool mirror = true;
  /// Square crop side; 0 keeps the full image.
  std::size_t crop = 0;
};

struct TrainConfig {
  std::size_t batch = 8;
  int epochs = 60;
  double lr = 1e-2;
  double momentum = 0.9;
  /// Noise scale for perturb_mask during edge-net training.
  double sigma = 0.5;
  std::uint64_t seed = 1;
  AugmentOptions augment;
  LossConfig loss;
  /// Learning-rate multiplier for the classifier (and edge head) layers.
  double classifier_lr_scale = 1.0;
  /// Worker threads for per-sample gradients within a batch.
  std::size_t threads = 1;

  static TrainConfig edge_defaults();
  static TrainConfig seg_defaults();
};

void validate(const TrainConfig& config);

/// v <- momentum * v + g;  p <- p - lr * v.
void sgd_step(Grid& param, const Grid& grad, Grid& velocity, double lr, double momentum);
/// Layer-wise sgd_step; `layer_scale[i]` multiplies lr for layer i when given.
void sgd_step(LayerStack& params, const LayerStack& grads, LayerStack& velocity, double lr, double momentum,
              std::span<const double> layer_scale = {});
LayerStack zeros_like(const LayerStack& layers);

Grid mirror_horizontal(const Grid& image);
Grid crop(const Grid& image, std::size_t top, std::size_t left, std::size_t size);
LabelMask crop(const LabelMask& mask, std::size_t top, std::size_t left, std::size_t size);

struct Augmented {
  Grid image;
  LabelMask mask;
};

/// Applies the same mirror coin and crop window to image and mask.
Augmented augment(const Grid& image, const LabelMask& mask, const AugmentOptions& options, std::mt19937_64& rng);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  /// Held-out edge accuracy (edge phase) or validation mIoU (seg phase).
  std::optional<double> val_metric;
  double wall_seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct SampleGradient {
  double loss = 0.0;
  LayerStack grads;
};

/// Loss and parameter gradients of one edge-net training sample: the
/// one-hot mask perturbed with (sigma, noise_seed) against its edge map.
SampleGradient edge_sample_gradient(const EdgeNetParams& params, const LabelMask& mask, double sigma,
                                    std::uint64_t noise_seed, std::uint8_t void_label = kVoidLabel);

/// Loss and segmentation-net gradients of one (image, mask) pair under the
/// configured strategy. `edge_net` is read-only and required for semeda and
/// ppce_on_edges.
SampleGradient seg_sample_gradient(const SegNetParams& params, const Grid& image, const LabelMask& mask,
                                   const EdgeNetParams* edge_net, const LossConfig& config);

struct EdgeTrainResult {
  EdgeNetParams params;
  std::vector<EpochLog> epochs;
};

EdgeTrainResult train_edge_net(const std::vector<LabelMask>& masks, std::size_t classes, const TrainConfig& config,
                               const std::vector<LabelMask>& holdout = {}, const EpochCallback& on_epoch = {});

/// Held-out pixel accuracy of argmax(g(perturb(one_hot(mask)))) against
/// the edge map. Mask i is perturbed with derive_seed(seed, perturb, ~0, i), a
/// stream disjoint from the training noise.
double edge_net_accuracy(const EdgeNetParams& params, const std::vector<LabelMask>& masks, double sigma,
                         std::uint64_t seed, std::uint8_t void_label = kVoidLabel);

struct SegTrainResult {
  SegNetParams params;
  std::vector<EpochLog> epochs;
};

SegTrainResult train_seg_net(const std::vector<Sample>& train, const std::vector<Sample>& val, std::size_t classes,
                             const EdgeNetParams* edge_net, const TrainConfig& config,
                             const EpochCallback& on_epoch = {});

/// Argmax predictions of a trained network over a dataset.
std::vector<LabelMask> predict(const SegNetParams& params, const std::vector<Sample>& samples,
                               std::size_t threads = 1);

}  // namespace semeda
