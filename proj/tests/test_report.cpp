#include <gtest/gtest.h>

#include <fstream>

#include "semeda/report.hpp"

using namespace semeda;

namespace {

MiouResult result(double mean, std::vector<std::optional<double>> per_class) {
  MiouResult r;
  r.mean = mean;
  r.per_class = std::move(per_class);
  return r;
}

std::vector<TrimapMiou> fixture_trimap() {
  return {{1, result(0.5, {0.25, 0.75}), result(0.9, {0.95, 0.85})},
          {2, result(0.625, {0.5, 0.75}), result(0.925, {0.9, 0.95})},
          {5, result(0.8, {0.7, 0.9}), result(0.95, {0.9, std::nullopt})}};
}

}  // namespace

TEST(Format, FixedSixDecimalsWithoutNegativeZero) {
  EXPECT_EQ(format_fixed(0.5), "0.500000");
  EXPECT_EQ(format_fixed(-1e-12), "0.000000");
  EXPECT_EQ(format_fixed(2.0 / 3.0, 3), "0.667");
  EXPECT_EQ(format_fixed(-0.25, 2), "-0.25");
}

TEST(MetricsCsv, EdgeAndSegColumns) {
  std::vector<EpochLog> logs{{1, 0.5, 0.75, 12.3456}, {2, 0.25, std::nullopt, 20.0}};
  EXPECT_EQ(metrics_csv(logs, "seg", false),
            "epoch,phase,loss,val_miou,wall_seconds,val_edge_accuracy\n"
            "1,seg,0.500000,0.750000,,\n"
            "2,seg,0.250000,,,\n");
  EXPECT_EQ(metrics_csv(logs, "edge", true),
            "epoch,phase,loss,val_miou,wall_seconds,val_edge_accuracy\n"
            "1,edge,0.500000,,12.346,0.750000\n"
            "2,edge,0.250000,,20.000,\n");
}

TEST(EvaluationCsv, RowsAndAbsentClasses) {
  const auto csv = evaluation_csv(2, result(0.7, {0.6, 0.8}), fixture_trimap());
  EXPECT_EQ(csv,
            "width,region,iou_0,iou_1,miou\n"
            ",all,0.600000,0.800000,0.700000\n"
            "1,boundary,0.250000,0.750000,0.500000\n"
            "1,interior,0.950000,0.850000,0.900000\n"
            "2,boundary,0.500000,0.750000,0.625000\n"
            "2,interior,0.900000,0.950000,0.925000\n"
            "5,boundary,0.700000,0.900000,0.800000\n"
            "5,interior,0.900000,NA,0.950000\n");
}

TEST(TrimapSvg, MatchesGoldenFile) {
  const auto svg = trimap_svg(result(0.7, {0.6, 0.8}), fixture_trimap());
  std::ifstream in(std::string(SEMEDA_GOLDEN_DIR) + "/trimap.svg", std::ios::binary);
  ASSERT_TRUE(in) << "golden file missing";
  const std::string golden{std::istreambuf_iterator<char>(in), {}};
  EXPECT_EQ(svg, golden);
}

TEST(TrimapSvg, PointsFollowTheData) {
  const auto svg = trimap_svg(result(0.7, {0.6, 0.8}), fixture_trimap());
  // Width 1 sits on the left axis (x = 60) and mIoU 0.5 halfway down the
  // 240-pixel plot that starts at y = 30.
  EXPECT_NE(svg.find("<circle cx=\"60.00\" cy=\"150.00\""), std::string::npos);
  // Width 5 is the right end: 60 + 400.
  EXPECT_NE(svg.find("<circle cx=\"460.00\""), std::string::npos);
  EXPECT_THROW(trimap_svg(result(0.7, {}), {}), std::invalid_argument);
}

TEST(Ablation, GridMirrorsTheComparisonTable) {
  const auto grid = ablation_grid();
  ASSERT_EQ(grid.size(), 14u);
  EXPECT_EQ(grid[0].second.strategy, Strategy::ppce);
  int multitask = 0, on_edges = 0, after = 0, before = 0;
  for (const auto& [name, c] : grid) {
    EXPECT_NO_THROW(validate(c));
    if (c.strategy == Strategy::multitask) ++multitask;
    if (c.strategy == Strategy::ppce_on_edges) ++on_edges;
    if (c.strategy == Strategy::semeda) (c.match_point == MatchPoint::after_relu ? after : before)++;
  }
  EXPECT_EQ(multitask, 3);
  EXPECT_EQ(on_edges, 2);
  EXPECT_EQ(after, 2);
  EXPECT_EQ(before, 6);
  EXPECT_EQ(grid[10].second.lambda, (std::array<double, 3>{0, 1, 0}));
}

TEST(Ablation, CsvHasOneRowPerConfiguration) {
  std::vector<AblationRow> rows;
  for (const auto& [name, c] : ablation_grid()) rows.push_back({name, c, 0.5, fixture_trimap()});
  const auto csv = ablation_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 15);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "name,strategy,lambda1,lambda2,lambda3,match_point,val_miou,boundary_w1,interior_w1,boundary_w2,"
            "interior_w2,boundary_w5,interior_w5");
  EXPECT_NE(csv.find("semeda_before,semeda,0.00,1.00,0.00,before_relu,0.500000,0.500000,0.900000"),
            std::string::npos);
}
