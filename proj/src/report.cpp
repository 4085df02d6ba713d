#include "semeda/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace semeda {

std::string format_fixed(double value, int decimals) {
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);  // no "-0.000000"
  return s;
}

std::string metrics_csv(const std::vector<EpochLog>& logs, std::string_view phase, bool wall_time) {
  const bool seg = phase == "seg";
  std::string out = "epoch,phase,loss,val_miou,wall_seconds,val_edge_accuracy\n";
  for (const auto& l : logs) {
    const std::string metric = l.val_metric ? format_fixed(*l.val_metric) : "";
    out += std::to_string(l.epoch) + "," + std::string(phase) + "," + format_fixed(l.loss) + ",";
    out += (seg ? metric : "") + ",";
    out += (wall_time ? format_fixed(l.wall_seconds, 3) : "") + ",";
    out += (seg ? "" : metric) + "\n";
  }
  return out;
}

namespace {

void append_region(std::string& out, const std::string& width, std::string_view region, std::size_t classes,
                   const MiouResult& r) {
  out += width + "," + std::string(region);
  for (std::size_t c = 0; c < classes; ++c) out += "," + (r.per_class[c] ? format_fixed(*r.per_class[c]) : "NA");
  out += "," + format_fixed(r.mean) + "\n";
}

}  // namespace

std::string evaluation_csv(std::size_t classes, const MiouResult& overall, const std::vector<TrimapMiou>& trimap) {
  std::string out = "width,region";
  for (std::size_t c = 0; c < classes; ++c) out += ",iou_" + std::to_string(c);
  out += ",miou\n";
  append_region(out, "", "all", classes, overall);
  for (const auto& t : trimap) {
    append_region(out, std::to_string(t.width), "boundary", classes, t.boundary);
    append_region(out, std::to_string(t.width), "interior", classes, t.interior);
  }
  return out;
}

std::string trimap_svg(const MiouResult& overall, const std::vector<TrimapMiou>& trimap) {
  if (trimap.empty()) throw std::invalid_argument("trimap_svg: no widths to plot");
  constexpr double kW = 480, kH = 320, kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;
  const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  const int w_min = trimap.front().width, w_max = trimap.back().width;
  auto x_of = [&](int width) {
    return w_max == w_min ? kLeft + plot_w / 2 : kLeft + plot_w * (width - w_min) / double(w_max - w_min);
  };
  auto y_of = [&](double miou) { return kTop + plot_h * (1.0 - std::clamp(miou, 0.0, 1.0)); };
  auto f = [](double v) { return format_fixed(v, 2); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f(kW) + "\" height=\"" + f(kH) +
                  "\" viewBox=\"0 0 " + f(kW) + " " + f(kH) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes and ticks.
  s += "<line x1=\"" + f(kLeft) + "\" y1=\"" + f(kTop + plot_h) + "\" x2=\"" + f(kLeft + plot_w) + "\" y2=\"" +
       f(kTop + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + f(kLeft) + "\" y1=\"" + f(kTop) + "\" x2=\"" + f(kLeft) + "\" y2=\"" + f(kTop + plot_h) +
       "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0, y = y_of(v);
    s += "<line x1=\"" + f(kLeft - 4) + "\" y1=\"" + f(y) + "\" x2=\"" + f(kLeft) + "\" y2=\"" + f(y) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + f(kLeft - 8) + "\" y=\"" + f(y + 4) + "\" text-anchor=\"end\">" + format_fixed(v, 1) +
         "</text>\n";
  }
  for (const auto& t : trimap) {
    const double x = x_of(t.width);
    s += "<line x1=\"" + f(x) + "\" y1=\"" + f(kTop + plot_h) + "\" x2=\"" + f(x) + "\" y2=\"" +
         f(kTop + plot_h + 4) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + f(x) + "\" y=\"" + f(kTop + plot_h + 16) + "\" text-anchor=\"middle\">" +
         std::to_string(t.width) + "</text>\n";
  }
  s += "<text x=\"" + f(kLeft + plot_w / 2) + "\" y=\"" + f(kH - 10) +
       "\" text-anchor=\"middle\">trimap width (px)</text>\n";
  s += "<text x=\"14\" y=\"" + f(kTop + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
       f(kTop + plot_h / 2) + ")\">mIoU</text>\n";

  const double y_all = y_of(overall.mean);
  s += "<line x1=\"" + f(kLeft) + "\" y1=\"" + f(y_all) + "\" x2=\"" + f(kLeft + plot_w) + "\" y2=\"" + f(y_all) +
       "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";

  struct Series {
    const char* name;
    const char* color;
    bool boundary;
  };
  const Series series[] = {{"boundary", "#c0392b", true}, {"interior", "#2471a3", false}};
  int legend = 0;
  for (const auto& ser : series) {
    std::string points;
    for (const auto& t : trimap) {
      const double v = ser.boundary ? t.boundary.mean : t.interior.mean;
      if (!points.empty()) points += " ";
      points += f(x_of(t.width)) + "," + f(y_of(v));
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(ser.color) + "\" stroke-width=\"2\" points=\"" + points +
         "\"/>\n";
    for (const auto& t : trimap) {
      const double v = ser.boundary ? t.boundary.mean : t.interior.mean;
      s += "<circle cx=\"" + f(x_of(t.width)) + "\" cy=\"" + f(y_of(v)) + "\" r=\"3\" fill=\"" +
           std::string(ser.color) + "\"/>\n";
    }
    const double ly = kTop + 12 + 14 * legend++;
    s += "<line x1=\"" + f(kLeft + plot_w - 110) + "\" y1=\"" + f(ly - 4) + "\" x2=\"" + f(kLeft + plot_w - 92) +
         "\" y2=\"" + f(ly - 4) + "\" stroke=\"" + ser.color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + f(kLeft + plot_w - 88) + "\" y=\"" + f(ly) + "\">" + ser.name + "</text>\n";
  }
  const double ly = kTop + 12 + 14 * legend;
  s += "<line x1=\"" + f(kLeft + plot_w - 110) + "\" y1=\"" + f(ly - 4) + "\" x2=\"" + f(kLeft + plot_w - 92) +
       "\" y2=\"" + f(ly - 4) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  s += "<text x=\"" + f(kLeft + plot_w - 88) + "\" y=\"" + f(ly) + "\">whole image</text>\n";
  s += "</svg>\n";
  return s;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "name,strategy,lambda1,lambda2,lambda3,match_point,val_miou";
  if (!rows.empty()) {
    for (const auto& t : rows.front().trimap) {
      out += ",boundary_w" + std::to_string(t.width) + ",interior_w" + std::to_string(t.width);
    }
  }
  out += "\n";
  for (const auto& r : rows) {
    out += r.name + "," + std::string(to_string(r.loss.strategy));
    for (double l : r.loss.lambda) out += "," + format_fixed(l, 2);
    out += "," + std::string(to_string(r.loss.match_point)) + "," + format_fixed(r.val_miou);
    for (const auto& t : r.trimap) out += "," + format_fixed(t.boundary.mean) + "," + format_fixed(t.interior.mean);
    out += "\n";
  }
  return out;
}

std::vector<std::pair<std::string, LossConfig>> ablation_grid() {
  std::vector<std::pair<std::string, LossConfig>> grid;
  auto add = [&](std::string name, Strategy s, std::array<double, 3> lambda, MatchPoint mp) {
    LossConfig c;
    c.strategy = s;
    c.lambda = lambda;
    c.match_point = mp;
    grid.emplace_back(std::move(name), c);
  };
  add("ppce", Strategy::ppce, {0, 0, 0}, MatchPoint::before_relu);
  for (double l : {1.0, 0.5, 5.0}) add("multitask", Strategy::multitask, {l, 0, 0}, MatchPoint::before_relu);
  for (double l : {1.0, 5.0}) add("ppce_on_edges", Strategy::ppce_on_edges, {l, 0, 0}, MatchPoint::before_relu);
  add("semeda_after", Strategy::semeda, {1, 0, 0}, MatchPoint::after_relu);
  add("semeda_after", Strategy::semeda, {0, 0.5, 0}, MatchPoint::after_relu);
  for (const auto& l : {std::array<double, 3>{1, 0, 0}, {0.5, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0.5, 0.25},
                        {0.25, 0.5, 1}}) {
    add("semeda_before", Strategy::semeda, l, MatchPoint::before_relu);
  }
  return grid;
}

}  // namespace semeda
