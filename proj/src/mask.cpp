#include "semeda/mask.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace semeda {

std::size_t EdgeMap::count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

EdgeMap extract_edge_map(const LabelMask& mask, std::uint8_t void_label) {
  const std::size_t h = mask.height, w = mask.width;
  EdgeMap edges(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t y0 = y > 0 ? y - 1 : 0, y1 = std::min(y + 1, h - 1);
    for (std::size_t x = 0; x < w; ++x) {
      const std::uint8_t label = mask.at(y, x);
      if (label == void_label) continue;
      const std::size_t x0 = x > 0 ? x - 1 : 0, x1 = std::min(x + 1, w - 1);
      bool edge = false;
      for (std::size_t ny = y0; ny <= y1 && !edge; ++ny) {
        for (std::size_t nx = x0; nx <= x1; ++nx) {
          const std::uint8_t other = mask.at(ny, nx);
          if (other != void_label && other != label) {
            edge = true;
            break;
          }
        }
      }
      edges.at(y, x) = edge ? 1 : 0;
    }
  }
  return edges;
}

Grid perturb_mask(const Grid& one_hot, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("perturb_mask: sigma must be non-negative");
  Grid noisy = one_hot;
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& v : noisy.data()) v += noise(rng);
  }
  return channel_softmax(noisy);
}

BandMap build_trimap_band(const EdgeMap& edges, int width) {
  if (width < 1) throw std::invalid_argument("build_trimap_band: width must be >= 1");
  const std::size_t h = edges.height, w = edges.width;
  const auto r = static_cast<std::size_t>(width - 1);
  // Chebyshev dilation is separable: a square max filter, rows then columns.
  std::vector<std::uint8_t> rows(h * w, 0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!edges.at(y, x)) continue;
      const std::size_t lo = x > r ? x - r : 0, hi = std::min(x + r, w - 1);
      std::fill(rows.begin() + static_cast<std::ptrdiff_t>(y * w + lo),
                rows.begin() + static_cast<std::ptrdiff_t>(y * w + hi + 1), std::uint8_t{1});
    }
  }
  BandMap band{h, w, std::vector<std::uint8_t>(h * w, 0)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!rows[y * w + x]) continue;
      const std::size_t lo = y > r ? y - r : 0, hi = std::min(y + r, h - 1);
      for (std::size_t ny = lo; ny <= hi; ++ny) band.boundary[ny * w + x] = 1;
    }
  }
  return band;
}

LabelMask mirror_horizontal(const LabelMask& mask) {
  LabelMask out(mask.height, mask.width);
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x) out.at(y, x) = mask.at(y, mask.width - 1 - x);
  return out;
}

EdgeMap mirror_horizontal(const EdgeMap& edges) {
  EdgeMap out(edges.height, edges.width);
  for (std::size_t y = 0; y < edges.height; ++y)
    for (std::size_t x = 0; x < edges.width; ++x) out.at(y, x) = edges.at(y, edges.width - 1 - x);
  return out;
}

}  // namespace semeda
