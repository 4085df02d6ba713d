#include <array>
#include <cmath>
#include <random>

#include "semeda/data.hpp"
#include "semeda/gradcheck.hpp"
#include "semeda/losses.hpp"
#include "semeda/mask.hpp"
#include "semeda/nets.hpp"
#include "semeda/rng.hpp"

namespace semeda {

namespace {

using Rng = std::mt19937_64;

constexpr double kEps = 1e-5;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Grid random_grid(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Grid g(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : g.data()) v = normal(rng);
  return g;
}

/// Random values kept at least 0.05 away from zero, where abs and relu
/// have kinks the central difference would straddle.
Grid off_kink_grid(std::vector<std::size_t> shape, Rng& rng) {
  Grid g(std::move(shape));
  std::uniform_real_distribution<double> mag(0.05, 1.5);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : g.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return g;
}

LabelMask random_mask(std::size_t h, std::size_t w, std::size_t classes, Rng& rng, double void_rate = 0.0) {
  LabelMask m(h, w);
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  std::bernoulli_distribution is_void(void_rate);
  for (auto& v : m.labels) v = is_void(rng) ? kVoidLabel : static_cast<std::uint8_t>(label(rng));
  // Keep at least one scored pixel so the mean reduction is defined.
  if (m.labels[0] == kVoidLabel) m.labels[0] = 0;
  return m;
}

/// A scalar that depends on every element of `y` with distinct weights.
NodeId probe(Tape& tape, NodeId y, Rng& rng) {
  const NodeId r = tape.constant(random_grid(tape.value(y).shape(), rng));
  return tape.sum(tape.square(tape.sub(y, r)));
}

struct Instance {
  Grid point;
  TapeFunction f;
};

using CaseBuilder = std::function<Instance(Rng&)>;

struct ConvShape {
  std::size_t cin, cout, k, h, w;
  int stride;
};

ConvShape random_conv(Rng& rng) {
  return {pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 0, 1) == 0 ? 1u : 3u, pick(rng, 3, 8), pick(rng, 3, 8),
          static_cast<int>(pick(rng, 1, 2))};
}

LossConfig random_semeda_config(Rng& rng) {
  LossConfig c;
  std::uniform_real_distribution<double> weight(0.1, 2.0);
  for (auto& l : c.lambda) l = weight(rng);
  c.match_point = pick(rng, 0, 1) ? MatchPoint::after_relu : MatchPoint::before_relu;
  c.norm = pick(rng, 0, 1) ? MatchNorm::l2 : MatchNorm::l1;
  c.final_embedding = pick(rng, 0, 1) ? FinalEmbedding::softmax : FinalEmbedding::logits;
  c.reduction = std::array{Reduction::element_mean, Reduction::mean, Reduction::sum}[pick(rng, 0, 2)];
  return c;
}

/// Shared fixture for the mask-level losses: C <= 4 classes on <= 8x8,
/// a random He-initialised edge net and a ground truth with some void.
struct MaskProblem {
  std::size_t classes, h, w;
  EdgeNetParams edge_net;
  LabelMask target;
  Grid gt_one_hot;
  EdgeMap gt_edges;
  Grid logits;

  explicit MaskProblem(Rng& rng)
      : classes(pick(rng, 2, 4)),
        h(pick(rng, 4, 8)),
        w(pick(rng, 4, 8)),
        edge_net(init_edge_net(classes, rng())),
        target(random_mask(h, w, classes, rng, 0.1)),
        gt_one_hot(one_hot(target, classes)),
        gt_edges(extract_edge_map(target)),
        logits(random_grid({classes, h, w}, rng)) {}
};

std::vector<std::pair<std::string, CaseBuilder>> cases() {
  std::vector<std::pair<std::string, CaseBuilder>> out;

  out.emplace_back("conv2d/input", [](Rng& rng) {
    const auto s = random_conv(rng);
    const Grid kernel = random_grid({s.cout, s.cin, s.k, s.k}, rng);
    const Grid bias = random_grid({s.cout}, rng);
    const auto seed = rng();
    return Instance{random_grid({s.cin, s.h, s.w}, rng), [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.conv2d(x, t.constant(kernel), t.constant(bias), s.stride), r);
                    }};
  });
  out.emplace_back("conv2d/kernel", [](Rng& rng) {
    const auto s = random_conv(rng);
    const Grid input = random_grid({s.cin, s.h, s.w}, rng);
    const Grid bias = random_grid({s.cout}, rng);
    const auto seed = rng();
    return Instance{random_grid({s.cout, s.cin, s.k, s.k}, rng), [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.conv2d(t.constant(input), x, t.constant(bias), s.stride), r);
                    }};
  });
  out.emplace_back("conv2d/bias", [](Rng& rng) {
    const auto s = random_conv(rng);
    const Grid input = random_grid({s.cin, s.h, s.w}, rng);
    const Grid kernel = random_grid({s.cout, s.cin, s.k, s.k}, rng);
    const auto seed = rng();
    return Instance{random_grid({s.cout}, rng), [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.conv2d(t.constant(input), t.constant(kernel), x, s.stride), r);
                    }};
  });
  out.emplace_back("relu", [](Rng& rng) {
    const auto seed = rng();
    return Instance{off_kink_grid({pick(rng, 1, 4), pick(rng, 1, 8), pick(rng, 1, 8)}, rng),
                    [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.relu(x), r);
                    }};
  });
  out.emplace_back("channel_softmax", [](Rng& rng) {
    const auto seed = rng();
    return Instance{random_grid({pick(rng, 1, 4), pick(rng, 1, 8), pick(rng, 1, 8)}, rng, 2.0),
                    [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.channel_softmax(x), r);
                    }};
  });
  out.emplace_back("bilinear_upsample", [](Rng& rng) {
    const int factor = static_cast<int>(pick(rng, 1, 3));
    const std::size_t limit = 8 / static_cast<std::size_t>(factor);
    const auto seed = rng();
    return Instance{random_grid({pick(rng, 1, 4), pick(rng, 1, limit), pick(rng, 1, limit)}, rng),
                    [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.bilinear_upsample(x, factor), r);
                    }};
  });
  out.emplace_back("add", [](Rng& rng) {
    const std::vector<std::size_t> shape{pick(rng, 1, 4), pick(rng, 1, 8), pick(rng, 1, 8)};
    const Grid other = random_grid(shape, rng);
    const auto seed = rng();
    return Instance{random_grid(shape, rng), [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      // x feeds the sum twice, so gradients must accumulate.
                      return probe(t, t.add(t.add(x, t.constant(other)), x), r);
                    }};
  });
  out.emplace_back("sub", [](Rng& rng) {
    const std::vector<std::size_t> shape{pick(rng, 1, 4), pick(rng, 1, 8), pick(rng, 1, 8)};
    const Grid other = random_grid(shape, rng);
    const auto seed = rng();
    return Instance{random_grid(shape, rng), [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.sub(t.constant(other), x), r);
                    }};
  });
  out.emplace_back("scale", [](Rng& rng) {
    const double factor = std::normal_distribution<double>(0.0, 2.0)(rng);
    const auto seed = rng();
    return Instance{random_grid({pick(rng, 1, 4), pick(rng, 1, 8), pick(rng, 1, 8)}, rng),
                    [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.scale(x, factor), r);
                    }};
  });
  out.emplace_back("abs", [](Rng& rng) {
    const auto seed = rng();
    return Instance{off_kink_grid({pick(rng, 1, 4), pick(rng, 1, 8), pick(rng, 1, 8)}, rng),
                    [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.abs(x), r);
                    }};
  });
  out.emplace_back("square", [](Rng& rng) {
    const auto seed = rng();
    return Instance{random_grid({pick(rng, 1, 4), pick(rng, 1, 8), pick(rng, 1, 8)}, rng),
                    [=](Tape& t, NodeId x) {
                      Rng r(seed);
                      return probe(t, t.square(x), r);
                    }};
  });
  out.emplace_back("sum", [](Rng& rng) {
    return Instance{random_grid({pick(rng, 1, 4), pick(rng, 1, 8), pick(rng, 1, 8)}, rng),
                    [](Tape& t, NodeId x) { return t.sum(x); }};
  });
  out.emplace_back("cross_entropy", [](Rng& rng) {
    const std::size_t c = pick(rng, 2, 4), h = pick(rng, 1, 8), w = pick(rng, 1, 8);
    Grid probs({c, h, w});
    std::uniform_real_distribution<double> p(0.05, 1.0);
    for (auto& v : probs.data()) v = p(rng);
    const auto mask = random_mask(h, w, c, rng, 0.2);
    const double weight = p(rng);
    return Instance{probs, [=](Tape& t, NodeId x) { return t.cross_entropy(x, class_targets(mask), weight); }};
  });

  out.emplace_back("ppce", [](Rng& rng) {
    const MaskProblem m(rng);
    const auto reduction = pick(rng, 0, 1) ? Reduction::sum : Reduction::mean;
    return Instance{m.logits, [=](Tape& t, NodeId x) {
                      return ppce(t, t.channel_softmax(x), m.target, reduction);
                    }};
  });
  out.emplace_back("semeda_loss", [](Rng& rng) {
    const MaskProblem m(rng);
    const auto config = random_semeda_config(rng);
    return Instance{m.logits, [=](Tape& t, NodeId x) {
                      const auto frozen = bind_frozen(t, m.edge_net);
                      return semeda_loss(t, t.channel_softmax(x), m.gt_one_hot, frozen, config);
                    }};
  });
  out.emplace_back("edge_ppce_loss", [](Rng& rng) {
    const MaskProblem m(rng);
    return Instance{m.logits, [=](Tape& t, NodeId x) {
                      const auto frozen = bind_frozen(t, m.edge_net);
                      return edge_ppce_loss(t, t.channel_softmax(x), frozen, m.gt_edges);
                    }};
  });
  out.emplace_back("multitask_loss/segmentation", [](Rng& rng) {
    const MaskProblem m(rng);
    const Grid head = channel_softmax(random_grid({2, m.h, m.w}, rng));
    const double weight = std::uniform_real_distribution<double>(0.5, 5.0)(rng);
    return Instance{m.logits, [=](Tape& t, NodeId x) {
                      return multitask_loss(t, t.channel_softmax(x), t.constant(head), m.target, m.gt_edges, weight);
                    }};
  });
  out.emplace_back("multitask_loss/edge_head", [](Rng& rng) {
    const MaskProblem m(rng);
    const Grid seg = channel_softmax(m.logits);
    const double weight = std::uniform_real_distribution<double>(0.5, 5.0)(rng);
    return Instance{random_grid({2, m.h, m.w}, rng), [=](Tape& t, NodeId x) {
                      return multitask_loss(t, t.constant(seg), t.channel_softmax(x), m.target, m.gt_edges, weight);
                    }};
  });
  out.emplace_back("total_loss/semeda", [](Rng& rng) {
    const MaskProblem m(rng);
    const auto config = random_semeda_config(rng);
    return Instance{m.logits, [=](Tape& t, NodeId x) {
                      const auto frozen = bind_frozen(t, m.edge_net);
                      return total_loss(t, t.channel_softmax(x), m.target, m.gt_one_hot, frozen, config, m.gt_edges);
                    }};
  });
  out.emplace_back("total_loss/ppce_on_edges", [](Rng& rng) {
    const MaskProblem m(rng);
    LossConfig config;
    config.strategy = Strategy::ppce_on_edges;
    config.lambda = {std::uniform_real_distribution<double>(0.5, 5.0)(rng), 0.0, 0.0};
    return Instance{m.logits, [=](Tape& t, NodeId x) {
                      const auto frozen = bind_frozen(t, m.edge_net);
                      return total_loss(t, t.channel_softmax(x), m.target, m.gt_one_hot, frozen, config, m.gt_edges);
                    }};
  });

  out.emplace_back("edge_net/parameters", [](Rng& rng) {
    const MaskProblem m(rng);
    const std::size_t layer = pick(rng, 0, kEdgeNetDepth - 1);
    const Grid input = perturb_mask(m.gt_one_hot, 0.5, rng());
    return Instance{m.edge_net.layers[layer].kernel, [=](Tape& t, NodeId x) {
                      auto nodes = bind_params(t, m.edge_net.layers, false);
                      nodes[layer].kernel = x;
                      const auto e = edge_net_forward(t, nodes, m.classes, t.constant(input));
                      return ppce(t, e.edges, m.gt_edges);
                    }};
  });
  out.emplace_back("seg_net/parameters", [](Rng& rng) {
    const bool head = pick(rng, 0, 1) == 1;
    const auto params = init_seg_net(2, head, rng());
    const std::size_t layer = pick(rng, 0, params.layers.size() - 1);
    const Grid image = random_grid({3, 8, 8}, rng, 0.5);
    const auto target = random_mask(8, 8, 2, rng, 0.1);
    const auto edges = extract_edge_map(target);
    return Instance{params.layers[layer].kernel, [=](Tape& t, NodeId x) {
                      auto nodes = bind_params(t, params.layers, false);
                      nodes[layer].kernel = x;
                      const auto out = seg_net_forward(t, params, nodes, t.constant(image));
                      if (out.edge_probs) return multitask_loss(t, out.probs, *out.edge_probs, target, edges, 1.0);
                      return ppce(t, out.probs, target);
                    }};
  });
  return out;
}

}  // namespace

std::vector<SuiteCase> run_gradient_suite(std::size_t instances, std::uint64_t seed) {
  std::vector<SuiteCase> results;
  const auto all = cases();
  for (std::size_t c = 0; c < all.size(); ++c) {
    SuiteCase sc{all[c].first, instances, {}};
    for (std::size_t i = 0; i < instances; ++i) {
      Rng rng(derive_seed(seed, streams::gradcheck, c, i));
      const auto inst = all[c].second(rng);
      const auto r = finite_diff_check(inst.f, inst.point, kEps);
      if (i == 0 || r.max_relative_error > sc.worst.max_relative_error) sc.worst = r;
    }
    results.push_back(std::move(sc));
  }
  return results;
}

}  // namespace semeda
