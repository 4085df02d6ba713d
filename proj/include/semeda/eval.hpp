#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "semeda/grid.hpp"
#include "semeda/mask.hpp"

namespace semeda {

/// counts[g * C + p] = scored pixels with ground truth g predicted as p.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}

  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts[gt * classes + pred]; }
  std::uint64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

enum class Region { boundary, interior };

/// Restricts scoring to one side of a trimap band.
struct RegionFilter {
  const BandMap* band;
  Region region;
};

ConfusionMatrix confusion_matrix(const LabelMask& pred, const LabelMask& gt, std::size_t classes,
                                 std::optional<RegionFilter> filter = std::nullopt,
                                 std::uint8_t void_label = kVoidLabel);

struct MiouResult {
  double mean = 0.0;
  /// nullopt for classes with empty union (absent from gt and prediction).
  std::vector<std::optional<double>> per_class;
};

/// IoU_c = TP / (TP + FP + FN), averaged over classes with nonzero union.
/// Throws std::invalid_argument when every class is absent.
MiouResult miou(const ConfusionMatrix& cm);

struct TrimapRow {
  int width;
  ConfusionMatrix boundary;
  ConfusionMatrix interior;
};

/// Dataset-wide boundary/interior confusion per band width. Bands come
/// from the ground-truth edge maps.
std::vector<TrimapRow> trimap_confusion(const std::vector<LabelMask>& preds, const std::vector<LabelMask>& gts,
                                        const std::vector<int>& widths, std::size_t classes,
                                        std::uint8_t void_label = kVoidLabel);

struct TrimapMiou {
  int width;
  MiouResult boundary;
  MiouResult interior;
};

std::vector<TrimapMiou> trimap_miou(const std::vector<LabelMask>& preds, const std::vector<LabelMask>& gts,
                                    const std::vector<int>& widths, std::size_t classes,
                                    std::uint8_t void_label = kVoidLabel);

/// Fraction of pixels whose argmax channel (ties to channel 0) matches
/// the edge flag.
double edge_accuracy(const Grid& edge_pred, const EdgeMap& gt);

}  // namespace semeda
