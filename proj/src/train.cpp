#include "semeda/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "semeda/error.hpp"
#include "semeda/eval.hpp"
#include "semeda/parallel.hpp"
#include "semeda/rng.hpp"

namespace semeda {

TrainConfig TrainConfig::edge_defaults() {
  TrainConfig c;
  c.epochs = 30;
  c.lr = 5e-2;
  c.augment.mirror = false;
  return c;
}

TrainConfig TrainConfig::seg_defaults() {
  TrainConfig c;
  c.epochs = 60;
  c.lr = 1e-2;
  return c;
}

void validate(const TrainConfig& config) {
  if (config.batch < 1) throw std::invalid_argument("batch size must be >= 1");
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(config.lr > 0.0) || !std::isfinite(config.lr)) throw std::invalid_argument("learning rate must be > 0");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(config.sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (!(config.classifier_lr_scale > 0.0)) throw std::invalid_argument("classifier_lr_scale must be > 0");
  if (config.augment.crop % kSegNetDownsample != 0) {
    throw std::invalid_argument("crop size must be a multiple of " + std::to_string(kSegNetDownsample));
  }
  validate(config.loss);
}

void sgd_step(Grid& param, const Grid& grad, Grid& velocity, double lr, double momentum) {
  if (!param.same_shape(grad) || !param.same_shape(velocity)) {
    throw std::invalid_argument("sgd_step: parameter " + shape_string(param.shape()) + ", gradient " +
                                shape_string(grad.shape()) + " and velocity " + shape_string(velocity.shape()) +
                                " must agree");
  }
  auto p = param.data();
  auto v = velocity.data();
  const auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

void sgd_step(LayerStack& params, const LayerStack& grads, LayerStack& velocity, double lr, double momentum,
              std::span<const double> layer_scale) {
  if (grads.size() != params.size() || velocity.size() != params.size()) {
    throw std::invalid_argument("sgd_step: layer counts differ");
  }
  if (!layer_scale.empty() && layer_scale.size() != params.size()) {
    throw std::invalid_argument("sgd_step: one learning-rate scale per layer expected");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double rate = layer_scale.empty() ? lr : lr * layer_scale[i];
    sgd_step(params[i].kernel, grads[i].kernel, velocity[i].kernel, rate, momentum);
    sgd_step(params[i].bias, grads[i].bias, velocity[i].bias, rate, momentum);
  }
}

LayerStack zeros_like(const LayerStack& layers) {
  LayerStack out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back({Grid(l.kernel.shape()), Grid(l.bias.shape()), l.stride});
  return out;
}

Grid mirror_horizontal(const Grid& image) {
  require_chw(image, "mirror_horizontal");
  Grid out(image.shape());
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(ch, y, x) = image.at(ch, y, w - 1 - x);
  return out;
}

Grid crop(const Grid& image, std::size_t top, std::size_t left, std::size_t size) {
  require_chw(image, "crop");
  if (top + size > image.dim(1) || left + size > image.dim(2)) {
    throw std::invalid_argument("crop: window exceeds image " + shape_string(image.shape()));
  }
  Grid out({image.dim(0), size, size});
  for (std::size_t ch = 0; ch < image.dim(0); ++ch)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) out.at(ch, y, x) = image.at(ch, top + y, left + x);
  return out;
}

LabelMask crop(const LabelMask& mask, std::size_t top, std::size_t left, std::size_t size) {
  if (top + size > mask.height || left + size > mask.width) throw std::invalid_argument("crop: window exceeds mask");
  LabelMask out(size, size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) out.at(y, x) = mask.at(top + y, left + x);
  return out;
}

Augmented augment(const Grid& image, const LabelMask& mask, const AugmentOptions& options, std::mt19937_64& rng) {
  require_chw(image, "augment");
  if (image.dim(1) != mask.height || image.dim(2) != mask.width) {
    throw std::invalid_argument("augment: image and mask dimensions differ");
  }
  const std::size_t size = options.crop;
  if (size > image.dim(1) || size > image.dim(2)) {
    throw std::invalid_argument("augment: crop " + std::to_string(size) + " larger than image " +
                                shape_string(image.shape()));
  }
  // Draw order is fixed (coin, then offsets) so streams stay comparable.
  const bool flip = options.mirror && std::bernoulli_distribution(0.5)(rng);
  Augmented out{flip ? mirror_horizontal(image) : image, flip ? mirror_horizontal(mask) : mask};
  if (size > 0) {
    const auto top = std::uniform_int_distribution<std::size_t>(0, image.dim(1) - size)(rng);
    const auto left = std::uniform_int_distribution<std::size_t>(0, image.dim(2) - size)(rng);
    out.image = crop(out.image, top, left, size);
    out.mask = crop(out.mask, top, left, size);
  }
  return out;
}

SampleGradient edge_sample_gradient(const EdgeNetParams& params, const LabelMask& mask, double sigma,
                                    std::uint64_t noise_seed, std::uint8_t void_label) {
  Tape tape;
  const auto nodes = bind_params(tape, params.layers, true);
  const Grid input = perturb_mask(one_hot(mask, params.classes, void_label), sigma, noise_seed);
  const auto out = edge_net_forward(tape, nodes, params.classes, tape.constant(input));
  const NodeId loss = ppce(tape, out.edges, extract_edge_map(mask, void_label));
  tape.backward(loss);
  return {tape.scalar(loss), collect_grads(tape, nodes, params.layers)};
}

SampleGradient seg_sample_gradient(const SegNetParams& params, const Grid& image, const LabelMask& mask,
                                   const EdgeNetParams* edge_net, const LossConfig& config) {
  if (config.needs_edge_net() && edge_net == nullptr) {
    throw std::invalid_argument("strategy " + std::string(to_string(config.strategy)) + " needs a trained edge net");
  }
  Tape tape;
  const auto nodes = bind_params(tape, params.layers, true);
  const auto out = seg_net_forward(tape, params, nodes, tape.constant(image));
  NodeId loss = 0;
  switch (config.strategy) {
    case Strategy::ppce:
      loss = ppce(tape, out.probs, mask, config.reduction, config.void_label);
      break;
    case Strategy::multitask:
      if (!out.edge_probs) throw std::invalid_argument("multitask strategy needs a network with an edge head");
      loss = multitask_loss(tape, out.probs, *out.edge_probs, mask, extract_edge_map(mask, config.void_label),
                            config.lambda[0], config.reduction, config.void_label);
      break;
    case Strategy::ppce_on_edges:
    case Strategy::semeda: {
      const auto frozen = bind_frozen(tape, *edge_net);
      const EdgeMap edges =
          config.strategy == Strategy::ppce_on_edges ? extract_edge_map(mask, config.void_label) : EdgeMap{};
      loss = total_loss(tape, out.probs, mask, one_hot(mask, params.classes, config.void_label), frozen, config,
                        edges);
      break;
    }
  }
  tape.backward(loss);
  return {tape.scalar(loss), collect_grads(tape, nodes, params.layers)};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, streams::shuffle, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Runs `compute` for each sample of a batch and averages the results.
template <typename Compute>
SampleGradient batch_mean(std::span<const std::size_t> batch, std::size_t threads, Compute&& compute) {
  std::vector<SampleGradient> parts(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) { parts[i] = compute(batch[i]); });
  SampleGradient mean{0.0, std::move(parts[0].grads)};
  mean.loss = parts[0].loss;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    mean.loss += parts[i].loss;
    for (std::size_t l = 0; l < mean.grads.size(); ++l) {
      auto k = mean.grads[l].kernel.data();
      auto b = mean.grads[l].bias.data();
      const auto pk = parts[i].grads[l].kernel.data();
      const auto pb = parts[i].grads[l].bias.data();
      for (std::size_t j = 0; j < k.size(); ++j) k[j] += pk[j];
      for (std::size_t j = 0; j < b.size(); ++j) b[j] += pb[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : mean.grads) {
    for (auto& v : g.kernel.data()) v *= inv;
    for (auto& v : g.bias.data()) v *= inv;
  }
  mean.loss *= inv;
  if (!std::isfinite(mean.loss)) throw NumericError("training loss became non-finite");
  return mean;
}

}  // namespace

double edge_net_accuracy(const EdgeNetParams& params, const std::vector<LabelMask>& masks, double sigma,
                         std::uint64_t seed, std::uint8_t void_label) {
  if (masks.empty()) throw std::invalid_argument("edge_net_accuracy: no masks");
  double correct = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& m = masks[i];
    // Epoch index ~0 keeps this stream apart from every training epoch.
    const auto noise = derive_seed(seed, streams::perturb, ~std::uint64_t{0}, i);
    const auto out = edge_net_forward(params, perturb_mask(one_hot(m, params.classes, void_label), sigma, noise));
    correct += edge_accuracy(out.edges, extract_edge_map(m, void_label)) * static_cast<double>(m.size());
    total += m.size();
  }
  return correct / static_cast<double>(total);
}

EdgeTrainResult train_edge_net(const std::vector<LabelMask>& masks, std::size_t classes, const TrainConfig& config,
                               const std::vector<LabelMask>& holdout, const EpochCallback& on_epoch) {
  validate(config);
  if (masks.empty()) throw std::invalid_argument("train_edge_net: empty dataset");
  for (const auto& m : masks) {
    for (auto l : m.labels) {
      if (l != config.loss.void_label && l >= classes) {
        throw std::invalid_argument("train_edge_net: label " + std::to_string(l) + " not below class count " +
                                    std::to_string(classes));
      }
    }
  }
  EdgeTrainResult result{init_edge_net(classes, derive_seed(config.seed, streams::init)), {}};
  LayerStack velocity = zeros_like(result.params.layers);
  const auto start = Clock::now();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(masks.size(), config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch) {
      const std::span<const std::size_t> batch(order.data() + first, std::min(config.batch, order.size() - first));
      const auto step = batch_mean(batch, config.threads, [&](std::size_t idx) {
        const auto noise = derive_seed(config.seed, streams::perturb, static_cast<std::uint64_t>(epoch), idx);
        return edge_sample_gradient(result.params, masks[idx], config.sigma, noise, config.loss.void_label);
      });
      sgd_step(result.params.layers, step.grads, velocity, config.lr, config.momentum);
      loss_sum += step.loss;
      ++batches;
    }
    EpochLog log{epoch + 1, loss_sum / static_cast<double>(batches), std::nullopt, seconds_since(start)};
    if (!holdout.empty()) {
      log.val_metric = edge_net_accuracy(result.params, holdout, config.sigma, config.seed, config.loss.void_label);
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

std::vector<LabelMask> predict(const SegNetParams& params, const std::vector<Sample>& samples, std::size_t threads) {
  std::vector<LabelMask> preds(samples.size());
  parallel_for(samples.size(), threads,
               [&](std::size_t i) { preds[i] = argmax_labels(seg_net_forward(params, samples[i].image).probs); });
  return preds;
}

SegTrainResult train_seg_net(const std::vector<Sample>& train, const std::vector<Sample>& val, std::size_t classes,
                             const EdgeNetParams* edge_net, const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  if (train.empty()) throw std::invalid_argument("train_seg_net: empty dataset");
  if (config.loss.needs_edge_net()) {
    if (edge_net == nullptr) {
      throw std::invalid_argument("strategy " + std::string(to_string(config.loss.strategy)) +
                                  " requires a frozen edge net");
    }
    validate(*edge_net);
    if (edge_net->classes != classes) throw std::invalid_argument("edge net was trained for a different class count");
  }
  SegTrainResult result{init_seg_net(classes, config.loss.needs_edge_head(), derive_seed(config.seed, streams::init)),
                        {}};
  LayerStack velocity = zeros_like(result.params.layers);
  std::vector<double> layer_scale(result.params.layers.size(), 1.0);
  for (std::size_t l = kSegNetClassifier; l < layer_scale.size(); ++l) layer_scale[l] = config.classifier_lr_scale;

  std::vector<LabelMask> val_gts;
  for (const auto& s : val) val_gts.push_back(s.mask);
  const auto start = Clock::now();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch) {
      const std::span<const std::size_t> batch(order.data() + first, std::min(config.batch, order.size() - first));
      const auto step = batch_mean(batch, config.threads, [&](std::size_t idx) {
        std::mt19937_64 rng(derive_seed(config.seed, streams::augment, static_cast<std::uint64_t>(epoch), idx));
        const auto a = augment(train[idx].image, train[idx].mask, config.augment, rng);
        return seg_sample_gradient(result.params, a.image, a.mask, edge_net, config.loss);
      });
      sgd_step(result.params.layers, step.grads, velocity, config.lr, config.momentum, layer_scale);
      loss_sum += step.loss;
      ++batches;
    }
    EpochLog log{epoch + 1, loss_sum / static_cast<double>(batches), std::nullopt, 0.0};
    if (!val.empty()) {
      const auto preds = predict(result.params, val, config.threads);
      ConfusionMatrix cm(classes);
      for (std::size_t i = 0; i < val.size(); ++i) {
        cm += confusion_matrix(preds[i], val_gts[i], classes, std::nullopt, config.loss.void_label);
      }
      log.val_metric = miou(cm).mean;
    }
    log.wall_seconds = seconds_since(start);
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

}  // namespace semeda
