#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "semeda/eval.hpp"
#include "semeda/losses.hpp"
#include "semeda/train.hpp"

namespace semeda {

/// Fixed six-decimal rendering shared by every CSV and plot, so identical
/// runs produce identical bytes.
std::string format_fixed(double value, int decimals = 6);

/// Per-epoch training log. Columns: epoch, phase, loss, val_miou,
/// wall_seconds, val_edge_accuracy. The seg phase fills val_miou, the edge
/// phase val_edge_accuracy. Wall time is left blank unless `wall_time`.
std::string metrics_csv(const std::vector<EpochLog>& logs, std::string_view phase, bool wall_time);

/// One row per (width, region) plus a whole-image row with an empty width.
/// Per-class IoUs of classes absent from a region print as NA.
std::string evaluation_csv(std::size_t classes, const MiouResult& overall, const std::vector<TrimapMiou>& trimap);

/// Line plot of boundary and interior mIoU against trimap width, with the
/// whole-image mIoU as a dashed reference line.
std::string trimap_svg(const MiouResult& overall, const std::vector<TrimapMiou>& trimap);

struct AblationRow {
  std::string name;
  LossConfig loss;
  double val_miou = 0.0;
  std::vector<TrimapMiou> trimap;
};

std::string ablation_csv(const std::vector<AblationRow>& rows);

/// The loss configurations of the comparison table, in table order.
std::vector<std::pair<std::string, LossConfig>> ablation_grid();

}  // namespace semeda
