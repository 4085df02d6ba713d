#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "semeda/grid.hpp"

namespace semeda {

inline constexpr std::uint8_t kVoidLabel = 255;

/// Per-pixel class ids, row-major. `void_label` marks unlabeled pixels.
struct LabelMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  LabelMask() = default;
  LabelMask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), labels(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::size_t size() const { return labels.size(); }

  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

/// Binary boundary image: 1 marks a semantic edge pixel.
struct EdgeMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> flags;

  EdgeMap() = default;
  EdgeMap(std::size_t h, std::size_t w) : height(h), width(w), flags(h * w, 0) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return flags[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return flags[y * width + x]; }
  std::size_t count() const;

  friend bool operator==(const EdgeMap&, const EdgeMap&) = default;
};

/// Trimap band membership: 1 = boundary band, 0 = interior.
struct BandMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> boundary;

  std::uint8_t at(std::size_t y, std::size_t x) const { return boundary[y * width + x]; }

  friend bool operator==(const BandMap&, const BandMap&) = default;
};

/// A pixel is an edge iff some in-bounds, non-void 8-neighbour carries a
/// different label. Void pixels are never edges and are invisible as
/// neighbours.
EdgeMap extract_edge_map(const LabelMask& mask, std::uint8_t void_label = kVoidLabel);

/// channel_softmax(one_hot + N(0, sigma^2)), noise drawn i.i.d. in data
/// order from a generator seeded with `seed`.
Grid perturb_mask(const Grid& one_hot, double sigma, std::uint64_t seed);

/// Pixels within Chebyshev distance `width - 1` of an edge pixel.
BandMap build_trimap_band(const EdgeMap& edges, int width);

LabelMask mirror_horizontal(const LabelMask& mask);
EdgeMap mirror_horizontal(const EdgeMap& edges);

}  // namespace semeda
