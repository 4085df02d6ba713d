#include "semeda/eval.hpp"

#include <stdexcept>
#include <string>

namespace semeda {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes != classes) throw std::invalid_argument("ConfusionMatrix: class count mismatch");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

ConfusionMatrix confusion_matrix(const LabelMask& pred, const LabelMask& gt, std::size_t classes,
                                 std::optional<RegionFilter> filter, std::uint8_t void_label) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw std::invalid_argument("confusion_matrix: prediction " + std::to_string(pred.height) + "x" +
                                std::to_string(pred.width) + " vs ground truth " + std::to_string(gt.height) +
                                "x" + std::to_string(gt.width));
  }
  if (filter && (filter->band->height != gt.height || filter->band->width != gt.width)) {
    throw std::invalid_argument("confusion_matrix: band dimensions differ from the masks");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto g = gt.labels[i];
    if (g == void_label) continue;
    if (filter) {
      const bool in_band = filter->band->boundary[i] != 0;
      if (in_band != (filter->region == Region::boundary)) continue;
    }
    const auto p = pred.labels[i];
    if (g >= classes || p >= classes) {
      throw std::invalid_argument("confusion_matrix: label out of range at pixel " + std::to_string(i));
    }
    ++cm.counts[g * classes + p];
  }
  return cm;
}

MiouResult miou(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes;
  MiouResult r;
  r.per_class.resize(c);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    const std::uint64_t tp = cm.at(k, k);
    const std::uint64_t uni = row + col - tp;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    r.per_class[k] = iou;
    sum += iou;
    ++present;
  }
  if (present == 0) throw std::invalid_argument("miou: no class present in the scored region");
  r.mean = sum / static_cast<double>(present);
  return r;
}

std::vector<TrimapRow> trimap_confusion(const std::vector<LabelMask>& preds, const std::vector<LabelMask>& gts,
                                        const std::vector<int>& widths, std::size_t classes,
                                        std::uint8_t void_label) {
  if (preds.size() != gts.size()) throw std::invalid_argument("trimap: prediction and ground-truth counts differ");
  std::vector<TrimapRow> rows;
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("trimap: widths must be >= 1");
    rows.push_back({w, ConfusionMatrix(classes), ConfusionMatrix(classes)});
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto edges = extract_edge_map(gts[i], void_label);
    for (auto& row : rows) {
      const auto band = build_trimap_band(edges, row.width);
      row.boundary += confusion_matrix(preds[i], gts[i], classes, RegionFilter{&band, Region::boundary}, void_label);
      row.interior += confusion_matrix(preds[i], gts[i], classes, RegionFilter{&band, Region::interior}, void_label);
    }
  }
  return rows;
}

std::vector<TrimapMiou> trimap_miou(const std::vector<LabelMask>& preds, const std::vector<LabelMask>& gts,
                                    const std::vector<int>& widths, std::size_t classes, std::uint8_t void_label) {
  std::vector<TrimapMiou> out;
  for (const auto& row : trimap_confusion(preds, gts, widths, classes, void_label)) {
    out.push_back({row.width, miou(row.boundary), miou(row.interior)});
  }
  return out;
}

double edge_accuracy(const Grid& edge_pred, const EdgeMap& gt) {
  require_chw(edge_pred, "edge_accuracy");
  if (edge_pred.dim(0) != 2 || edge_pred.dim(1) != gt.height || edge_pred.dim(2) != gt.width) {
    throw std::invalid_argument("edge_accuracy: prediction " + shape_string(edge_pred.shape()) +
                                " does not match edge map");
  }
  const std::size_t plane = gt.height * gt.width;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    const std::uint8_t predicted = edge_pred[plane + i] > edge_pred[i] ? 1 : 0;
    hits += predicted == gt.flags[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(plane);
}

}  // namespace semeda
