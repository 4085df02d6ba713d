// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Exit status is nonzero when any run
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "semeda/cli.hpp"
#include "semeda/data.hpp"
#include "semeda/eval.hpp"
#include "semeda/gradcheck.hpp"
#include "semeda/losses.hpp"
#include "semeda/mask.hpp"
#include "semeda/nets.hpp"
#include "semeda/parallel.hpp"
#include "semeda/report.hpp"
#include "semeda/train.hpp"

using namespace semeda;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int decimals = 4) { return format_fixed(v, decimals); }

LabelMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t classes, bool with_void) {
  LabelMask m(h, w);
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  std::bernoulli_distribution is_void(0.1);
  for (auto& l : m.labels) l = with_void && is_void(rng) ? kVoidLabel : static_cast<std::uint8_t>(label(rng));
  return m;
}

std::vector<LabelMask> masks_of(const std::vector<Sample>& samples) {
  std::vector<LabelMask> out;
  for (const auto& s : samples) out.push_back(s.mask);
  return out;
}

// 1 -------------------------------------------------------------------------

Verdict full_scale_statement() {
  return {true,
          "full-scale Cityscapes numbers need pretrained DeepLab backbones and are out of scope; "
          "criteria 2-9 are the desk-scale substitutes"};
}

// 2 -------------------------------------------------------------------------

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  const auto cases = run_gradient_suite(20, 1);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name, failures;
  for (const auto& c : cases) {
    if (c.worst.max_relative_error > worst) worst = c.worst.max_relative_error, worst_name = c.name;
    if (c.instances < 20 || !(c.worst.max_relative_error < kGradTolerance)) failures += " " + c.name;
  }
  const bool pass = failures.empty() && elapsed < 60.0;
  std::string detail = std::to_string(cases.size()) + " cases x 20 instances, worst relative error " +
                       format_fixed(worst, 8) + " (" + worst_name + "), " + fmt(elapsed, 1) + " s";
  if (!failures.empty()) detail += ", failing:" + failures;
  return {pass, detail};
}

// 3 -------------------------------------------------------------------------

EdgeMap scan_edges(const LabelMask& m) {
  EdgeMap e(m.height, m.width);
  const long h = static_cast<long>(m.height), w = static_cast<long>(m.width);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      const auto me = m.labels[static_cast<std::size_t>(y * w + x)];
      if (me == kVoidLabel) continue;
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long ny = y + dy, nx = x + dx;
          if ((dy == 0 && dx == 0) || ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          const auto other = m.labels[static_cast<std::size_t>(ny * w + nx)];
          if (other != kVoidLabel && other != me) e.flags[static_cast<std::size_t>(y * w + x)] = 1;
        }
    }
  return e;
}

Verdict edge_map_oracle() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> side(1, 16), classes(1, 5);
  std::size_t mismatches = 0, edge_pixels = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = random_mask(rng, side(rng), side(rng), classes(rng), i % 2 == 1);
    const auto want = scan_edges(m);
    edge_pixels += want.count();
    if (!(extract_edge_map(m) == want)) ++mismatches;
  }
  return {mismatches == 0, "1000 masks up to 16x16 with C <= 5, " + std::to_string(mismatches) + " mismatches, " +
                               std::to_string(edge_pixels) + " edge pixels checked"};
}

// 4 -------------------------------------------------------------------------

Verdict loss_identities() {
  std::mt19937_64 rng(4);
  bool ok = true;
  std::string notes;
  for (int i = 0; i < 20; ++i) {
    const std::size_t c = 2 + i % 4;
    const auto mask = random_mask(rng, 12, 10, c, true);
    const auto edge_net = init_edge_net(c, 40 + static_cast<std::uint64_t>(i));
    Grid logits({c, 12, 10});
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : logits.data()) v = n(rng);
    const Grid pred = channel_softmax(logits);
    LossConfig semeda_cfg;
    semeda_cfg.lambda = {0.5, 1.0, 0.25};
    if (semeda_loss(pred, pred, edge_net, semeda_cfg) != 0.0) ok = false, notes = " semeda(S,S) != 0";
    for (Strategy s : {Strategy::semeda, Strategy::ppce_on_edges}) {
      LossConfig zero;
      zero.strategy = s;
      zero.lambda = {0, 0, 0};
      if (total_loss(pred, mask, one_hot(mask, c), edge_net, zero) != ppce(pred, mask)) {
        ok = false, notes += " total_loss(lambda=0) != ppce";
      }
    }
  }
  // One pixel, two classes: p = (0.5, 0.5) gives ln 2; p = (0.25, 0.75)
  // with label 1 gives -ln 0.75.
  LabelMask one(1, 1, 1);
  Grid half({2, 1, 1}, 0.5), skew({2, 1, 1});
  skew[0] = 0.25, skew[1] = 0.75;
  const double e1 = std::fabs(ppce(half, one) - std::log(2.0));
  const double e2 = std::fabs(ppce(skew, one) + std::log(0.75));
  if (!(e1 <= 1e-12 && e2 <= 1e-12)) ok = false, notes += " closed form off";
  return {ok, "semeda(S,S) = 0 and total_loss(lambda=0) == ppce bitwise on 20 random cases, "
              "single-pixel errors " + format_fixed(e1, 17) + " / " + format_fixed(e2, 17) + notes};
}

// 5 -------------------------------------------------------------------------

Verdict miou_oracle() {
  std::mt19937_64 rng(5);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t c = 2 + i % 4;
    const auto gt = random_mask(rng, 9, 11, c, true), pred = random_mask(rng, 9, 11, c, false);
    std::vector<std::uint64_t> tp(c, 0), fp(c, 0), fn(c, 0);
    for (std::size_t p = 0; p < gt.size(); ++p) {
      const auto g = gt.labels[p], q = pred.labels[p];
      if (g == kVoidLabel) continue;
      if (g == q) ++tp[g];
      else ++fp[q], ++fn[g];
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const auto uni = tp[k] + fp[k] + fn[k];
      if (uni == 0) continue;
      sum += static_cast<double>(tp[k]) / static_cast<double>(uni);
      ++present;
    }
    if (miou(confusion_matrix(pred, gt, c)).mean != sum / static_cast<double>(present)) ++mismatches;
  }
  LabelMask gt(1, 4), pred(1, 4);
  gt.labels = {0, 0, 1, 1};
  pred.labels = {0, 1, 1, 1};
  const double hand = miou(confusion_matrix(pred, gt, 2)).mean;
  // (1/2 + 2/3) / 2 and 7.0 / 12 round differently in the last bit.
  const double off = std::fabs(hand - 7.0 / 12.0);
  char off_text[32];
  std::snprintf(off_text, sizeof off_text, "%.1e", off);
  return {mismatches == 0 && off <= 2e-16,
          "100 random pairs, " + std::to_string(mismatches) + " mismatches against per-pixel counting; hand case " +
              format_fixed(hand, 15) + " vs 7/12, difference " + off_text};
}

// 6 -------------------------------------------------------------------------

Verdict edge_convergence() {
  const auto t0 = Clock::now();
  const auto data = gen_synthetic(300, 64, 5, 1);
  const std::vector<Sample> train(data.begin(), data.begin() + 200), held(data.begin() + 200, data.end());
  TrainConfig c = TrainConfig::edge_defaults();
  c.seed = 1;
  c.threads = default_threads();
  const auto r = train_edge_net(masks_of(train), 5, c);
  const double acc = edge_net_accuracy(r.params, masks_of(held), c.sigma, c.seed);
  const double elapsed = seconds_since(t0);
  return {acc >= 0.98 && elapsed < 300.0, "200 masks 64x64 C=5, " + std::to_string(c.epochs) +
                                               " epochs, held-out edge accuracy " + fmt(acc) + " on 100 masks, " +
                                               fmt(elapsed, 1) + " s"};
}

// 7 -------------------------------------------------------------------------

constexpr int kComparisonEpochs = 30;

struct Scores {
  double miou = 0.0;
  std::vector<double> boundary;  // widths 1 and 2
};

Scores score(const SegNetParams& params, const std::vector<Sample>& val) {
  const auto preds = predict(params, val, default_threads());
  const auto gts = masks_of(val);
  ConfusionMatrix cm(params.classes);
  for (std::size_t i = 0; i < val.size(); ++i) cm += confusion_matrix(preds[i], gts[i], params.classes);
  Scores s{miou(cm).mean, {}};
  for (const auto& t : trimap_miou(preds, gts, {1, 2}, params.classes)) s.boundary.push_back(t.boundary.mean);
  return s;
}

Verdict boundary_comparison() {
  const auto t0 = Clock::now();
  double ppce_miou = 0.0, semeda_miou = 0.0, boundary_gain = 0.0;
  int seeds_not_worse = 0;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  for (auto seed : seeds) {
    const auto data = gen_synthetic(600, 64, 5, seed);
    const std::vector<Sample> train(data.begin(), data.begin() + 500), val(data.begin() + 500, data.end());

    TrainConfig edge_cfg = TrainConfig::edge_defaults();
    edge_cfg.seed = seed;
    edge_cfg.threads = default_threads();
    const auto edge_masks = masks_of(std::vector<Sample>(train.begin(), train.begin() + 200));
    const auto edge = train_edge_net(edge_masks, 5, edge_cfg).params;

    TrainConfig cfg = TrainConfig::seg_defaults();
    cfg.seed = seed;
    cfg.epochs = kComparisonEpochs;
    cfg.threads = default_threads();
    cfg.loss.strategy = Strategy::ppce;
    const auto base = score(train_seg_net(train, {}, 5, nullptr, cfg).params, val);
    cfg.loss.strategy = Strategy::semeda;
    cfg.loss.lambda = {0, 1, 0};
    cfg.loss.match_point = MatchPoint::before_relu;
    const auto ours = score(train_seg_net(train, {}, 5, &edge, cfg).params, val);

    double gain = 0.0;
    for (std::size_t w = 0; w < 2; ++w) gain += (ours.boundary[w] - base.boundary[w]) / 2.0;
    std::cout << "    seed " << seed << ": ppce mIoU " << fmt(base.miou) << " boundary w1/w2 " << fmt(base.boundary[0])
              << "/" << fmt(base.boundary[1]) << " | semeda mIoU " << fmt(ours.miou) << " boundary w1/w2 "
              << fmt(ours.boundary[0]) << "/" << fmt(ours.boundary[1]) << " | " << fmt(seconds_since(t0), 0)
              << " s elapsed" << std::endl;
    ppce_miou += base.miou / static_cast<double>(seeds.size());
    semeda_miou += ours.miou / static_cast<double>(seeds.size());
    boundary_gain += gain / static_cast<double>(seeds.size());
    if (ours.miou >= base.miou) ++seeds_not_worse;
  }
  const double elapsed = seconds_since(t0);
  const bool pass = semeda_miou >= ppce_miou && boundary_gain * 100.0 >= 1.0 && elapsed < 1800.0;
  return {pass, "3 seeds, " + std::to_string(kComparisonEpochs) + " epochs: mean mIoU semeda " + fmt(semeda_miou) +
                    " vs ppce " + fmt(ppce_miou) + " (not worse on " + std::to_string(seeds_not_worse) +
                    "/3 seeds), boundary w1/w2 gain " + fmt(boundary_gain * 100.0, 2) + " points, " +
                    fmt(elapsed, 0) + " s"};
}

// 8 -------------------------------------------------------------------------

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "semeda");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cout << "    semeda " << args[1] << " exited " << code << ": " << err.str() << std::endl;
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict cli_determinism(const fs::path& scratch) {
  int failures = 0;
  for (const char* run : {"a", "b"}) {
    const std::string d = (scratch / run).string();
    failures += cli({"gen-data", "--out", d + "/data", "--count", "12", "--val-count", "4", "--size", "32",
                     "--classes", "3", "--seed", "8"}) != 0;
    failures += cli({"train-edge", "--data", d + "/data", "--classes", "3", "--epochs", "2", "--out", d + "/edge"}) != 0;
    for (const char* strategy : {"ppce", "semeda", "ppce_on_edges", "multitask"}) {
      failures += cli({"train-seg", "--data", d + "/data", "--classes", "3", "--epochs", "2", "--batch", "4",
                       "--strategy", strategy, "--edge-checkpoint", d + "/edge/edge.ckpt", "--out",
                       d + "/seg_" + strategy}) != 0;
      failures += cli({"eval", "--data", d + "/data", "--checkpoint", d + "/seg_" + strategy + "/seg.ckpt", "--out",
                       d + "/eval_" + strategy}) != 0;
    }
    failures += cli({"ablate", "--data", d + "/data", "--classes", "3", "--epochs", "1", "--batch", "4",
                     "--train-limit", "4", "--edge-checkpoint", d + "/edge/edge.ckpt", "--out", d + "/ablate"}) != 0;
    failures += cli({"gradcheck", "--instances", "2", "--out", d + "/grad"}) != 0;
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(scratch / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    // Run manifests record their own output paths and are excluded.
    if (ext == ".manifest") continue;
    const auto rel = fs::relative(entry.path(), scratch / "a");
    ++compared;
    if (slurp(entry.path()) != slurp(scratch / "b" / rel)) {
      ++differing;
      std::cout << "    differs: " << rel.string() << std::endl;
    }
  }
  const bool pass = failures == 0 && differing == 0 && compared > 0;
  return {pass, "gen-data, train-edge, train-seg x4 strategies, eval, ablate, gradcheck run twice: " +
                    std::to_string(compared) + " output files compared, " + std::to_string(differing) +
                    " differ, " + std::to_string(failures) + " nonzero exits"};
}

// 9 -------------------------------------------------------------------------

Verdict format_round_trips(const fs::path& scratch) {
  bool ok = true;
  std::string notes;
  LabelMask m(2, 2);
  m.labels = {0, 1, 2, 255};
  const std::string golden = std::string("P5\n2 2\n255\n") + std::string("\x00\x01\x02\xff", 4);
  if (encode_pgm(m) != golden) ok = false, notes += " pgm encode";
  if (!(decode_pgm(golden) == m)) ok = false, notes += " pgm decode";
  Grid img({3, 1, 2});
  const double px[] = {0.0, 1.0, 128.0 / 255.0, 1.0 / 255.0, 254.0 / 255.0, 0.5};
  std::copy(std::begin(px), std::end(px), img.data().begin());
  const std::string ppm = std::string("P6\n2 1\n255\n") + std::string("\x00\x80\xfe\xff\x01\x80", 6);
  if (encode_ppm(img) != ppm) ok = false, notes += " ppm encode";

  std::size_t samples = 0, checkpoints = 0;
  fs::create_directories(scratch);
  for (const auto& s : gen_synthetic(25, 48, 5, 9)) {
    encode_pnm(s, scratch);
    if (!(decode_pnm(scratch, s.id).mask == s.mask)) ok = false, notes += " sample " + s.id;
    ++samples;
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto edge = init_edge_net(5, seed);
    const auto seg = init_seg_net(5, seed % 2 == 1, seed);
    const auto e_bytes = encode_checkpoint(edge), s_bytes = encode_checkpoint(seg);
    if (!(decode_edge_checkpoint(e_bytes) == edge) || encode_checkpoint(decode_edge_checkpoint(e_bytes)) != e_bytes)
      ok = false, notes += " edge checkpoint";
    if (!(decode_seg_checkpoint(s_bytes) == seg) || encode_checkpoint(decode_seg_checkpoint(s_bytes)) != s_bytes)
      ok = false, notes += " seg checkpoint";
    const auto path = (scratch / "seg.ckpt").string();
    save_checkpoint(path, seg);
    if (!(load_seg_checkpoint(path) == seg)) ok = false, notes += " checkpoint file";
    checkpoints += 2;
  }
  return {ok, "PGM/PPM golden bytes, " + std::to_string(samples) + " sample encode/decode round trips, " +
                  std::to_string(checkpoints) + " checkpoint byte round trips" + notes};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const fs::path scratch = fs::temp_directory_path() / "semeda_acceptance";
  fs::remove_all(scratch);

  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, full_scale_statement},
      {2, gradient_suite},
      {3, edge_map_oracle},
      {4, loss_identities},
      {5, miou_oracle},
      {9, [&] { return format_round_trips(scratch / "formats"); }},
      {8, [&] { return cli_determinism(scratch / "cli"); }},
      {6, edge_convergence},
      {7, boundary_comparison},
  };
  std::vector<std::pair<int, Verdict>> results;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    std::cout << "criterion " << id << " running" << std::endl;
    Verdict v{false, ""};
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << v.detail << std::endl;
    results.emplace_back(id, v);
  }
  fs::remove_all(scratch);

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::cout << "\nsummary\n";
  int failed = 0;
  for (const auto& [id, v] : results) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << v.detail << "\n";
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
