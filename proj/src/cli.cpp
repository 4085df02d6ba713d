#include "semeda/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "semeda/data.hpp"
#include "semeda/error.hpp"
#include "semeda/eval.hpp"
#include "semeda/gradcheck.hpp"
#include "semeda/parallel.hpp"
#include "semeda/report.hpp"
#include "semeda/train.hpp"

namespace semeda::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum Command : unsigned { kGenData = 1, kTrainEdge = 2, kTrainSeg = 4, kEval = 8, kAblate = 16, kGradcheck = 32 };
constexpr unsigned kTrain = kTrainEdge | kTrainSeg | kAblate;
constexpr unsigned kAll = 63;

struct Key {
  const char* name;
  const char* help;
  unsigned commands;
  bool is_flag = false;
};

// Config keys. CLI flags are the same names with '_' spelled '-'.
const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      {"seed", "run seed", kAll},
      {"out", "output directory", kAll},
      {"data", "dataset directory", kTrain | kEval},
      {"count", "number of training samples", kGenData},
      {"val_count", "number of validation samples", kGenData},
      {"size", "image side in pixels", kGenData},
      {"classes", "class count including background", kGenData | kTrain | kEval},
      {"epochs", "training epochs", kTrain},
      {"batch", "minibatch size", kTrain},
      {"lr", "learning rate", kTrain},
      {"momentum", "SGD momentum", kTrain},
      {"sigma", "mask perturbation noise for edge training", kTrainEdge},
      {"strategy", "ppce | multitask | ppce_on_edges | semeda", kTrainSeg},
      {"lambda1", "layer-1 weight (edge-term weight for multitask and ppce_on_edges)", kTrainSeg},
      {"lambda2", "layer-2 weight", kTrainSeg},
      {"lambda3", "layer-3 weight", kTrainSeg},
      {"match_point", "before | after (ReLU)", kTrainSeg},
      {"reduction", "element_mean | mean | sum", kTrainSeg | kAblate},
      {"norm", "l1 | l2", kTrainSeg | kAblate},
      {"final_embedding", "logits | softmax", kTrainSeg | kAblate},
      {"classifier_lr_scale", "learning-rate multiplier of the classifier layers", kTrainSeg | kAblate},
      {"mirror", "random horizontal mirroring (true | false)", kTrain},
      {"crop", "random square crop side, 0 = off", kTrain},
      {"train_limit", "use only the first N training samples, 0 = all", kTrain},
      {"edge_checkpoint", "frozen edge-net checkpoint", kTrainSeg | kAblate},
      {"checkpoint", "segmentation checkpoint to evaluate", kEval},
      {"pred_dir", "directory of predicted masks to evaluate instead of a checkpoint", kEval},
      {"trimap_widths", "comma-separated band widths", kEval | kAblate},
      {"instances", "random problems per gradient-check case", kGradcheck},
      {"wall_time", "record wall-clock seconds in metric CSVs", kTrain, true},
  };
  return table;
}

std::string flag_of(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

/// Resolved key/value settings with typed accessors.
class Settings {
 public:
  explicit Settings(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  bool has(const std::string& k) const { return values_.count(k) != 0; }
  std::string str(const std::string& k, const std::string& fallback) const {
    auto it = values_.find(k);
    return it == values_.end() ? fallback : it->second;
  }
  std::string required(const std::string& k) const {
    if (!has(k)) throw UsageError("missing required setting '" + k + "' (flag " + flag_of(k) + ")");
    return values_.at(k);
  }
  double real(const std::string& k, double fallback) const {
    return has(k) ? parse<double>(k, [](const std::string& s, std::size_t* p) { return std::stod(s, p); }) : fallback;
  }
  std::uint64_t u64(const std::string& k, std::uint64_t fallback) const {
    if (!has(k)) return fallback;
    if (values_.at(k).find('-') != std::string::npos) throw UsageError("setting '" + k + "' must be non-negative");
    return parse<std::uint64_t>(k, [](const std::string& s, std::size_t* p) { return std::stoull(s, p); });
  }
  int integer(const std::string& k, int fallback) const {
    return has(k) ? parse<int>(k, [](const std::string& s, std::size_t* p) { return std::stoi(s, p); }) : fallback;
  }
  bool boolean(const std::string& k, bool fallback) const {
    if (!has(k)) return fallback;
    const auto& v = values_.at(k);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw UsageError("setting '" + k + "' expects true or false, got '" + v + "'");
  }
  std::vector<int> int_list(const std::string& k, std::vector<int> fallback) const {
    if (!has(k)) return fallback;
    std::vector<int> out;
    std::stringstream ss(values_.at(k));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t pos = 0;
        out.push_back(std::stoi(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw UsageError("setting '" + k + "' expects comma-separated integers, got '" + values_.at(k) + "'");
      }
    }
    if (out.empty()) throw UsageError("setting '" + k + "' is empty");
    return out;
  }

  void set(const std::string& k, std::string v) { values_[k] = std::move(v); }
  void erase(const std::string& k) { values_.erase(k); }
  const std::map<std::string, std::string>& all() const { return values_; }

 private:
  template <typename T, typename Fn>
  T parse(const std::string& k, Fn&& fn) const {
    const auto& v = values_.at(k);
    try {
      std::size_t pos = 0;
      T r = fn(v, &pos);
      if (pos == v.size()) return r;
    } catch (const std::exception&) {
    }
    throw UsageError("setting '" + k + "' has invalid value '" + v + "'");
  }

  std::map<std::string, std::string> values_;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Writes through a temporary and renames, so readers never see a partial
/// file.
void write_text(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    if (!o) throw DataError("cannot write " + tmp.string());
    o << text;
    if (!o) throw DataError("short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// The run manifest doubles as a config file: `--config <manifest>`
/// replays the run.
class RunManifest {
 public:
  RunManifest(std::string command, const Settings& settings, fs::path out, std::vector<std::string> outputs)
      : command_(std::move(command)), settings_(settings), out_(std::move(out)), outputs_(std::move(outputs)),
        started_(utc_now()) {}

  void write_started() const { write(""); }
  void write_finished() const { write(utc_now()); }

 private:
  void write(const std::string& finished) const {
    std::string s = "# semeda run manifest\n# command: " + command_ + "\n# started: " + started_ + "\n";
    s += "# finished: " + (finished.empty() ? std::string("(running)") : finished) + "\n# outputs:";
    for (const auto& o : outputs_) s += " " + (out_ / o).string();
    s += "\n";
    for (const auto& [k, v] : settings_.all()) s += k + " = " + v + "\n";
    write_text(out_ / (command_ + ".manifest"), s);
  }

  std::string command_;
  Settings settings_;
  fs::path out_;
  std::vector<std::string> outputs_;
  std::string started_;
};

fs::path prepare_out(const Settings& s) {
  const fs::path out = s.str("out", ".");
  fs::create_directories(out);
  return out;
}

std::vector<Sample> limited(std::vector<Sample> samples, const Settings& s) {
  const auto limit = s.u64("train_limit", 0);
  if (limit > 0 && limit < samples.size()) samples.resize(limit);
  return samples;
}

void check_labels(const std::vector<Sample>& samples, std::size_t classes, const std::string& split) {
  for (const auto& smp : samples)
    for (auto l : smp.mask.labels)
      if (l != kVoidLabel && l >= classes) {
        throw DataError(split + " sample '" + smp.id + "' has label " + std::to_string(l) + " but classes = " +
                        std::to_string(classes));
      }
}

/// Fills a TrainConfig from the phase defaults overlaid with settings.
TrainConfig train_config(const Settings& s, bool edge_phase) {
  TrainConfig c = edge_phase ? TrainConfig::edge_defaults() : TrainConfig::seg_defaults();
  c.seed = s.u64("seed", c.seed);
  c.epochs = s.integer("epochs", c.epochs);
  c.batch = s.u64("batch", c.batch);
  c.lr = s.real("lr", c.lr);
  c.momentum = s.real("momentum", c.momentum);
  c.sigma = s.real("sigma", c.sigma);
  c.augment.mirror = s.boolean("mirror", c.augment.mirror);
  c.augment.crop = s.u64("crop", c.augment.crop);
  c.classifier_lr_scale = s.real("classifier_lr_scale", c.classifier_lr_scale);
  c.threads = default_threads();
  LossConfig& l = c.loss;
  l.strategy = parse_strategy(s.str("strategy", std::string(to_string(l.strategy))));
  l.lambda = {s.real("lambda1", l.lambda[0]), s.real("lambda2", l.lambda[1]), s.real("lambda3", l.lambda[2])};
  l.match_point = parse_match_point(s.str("match_point", std::string(to_string(l.match_point))));
  l.reduction = parse_reduction(s.str("reduction", std::string(to_string(l.reduction))));
  l.norm = parse_match_norm(s.str("norm", std::string(to_string(l.norm))));
  l.final_embedding = parse_final_embedding(s.str("final_embedding", std::string(to_string(l.final_embedding))));
  validate(c);
  return c;
}

/// Records every effective setting so the manifest is a complete replay.
void resolve_training(Settings& s, const TrainConfig& c, bool edge_phase) {
  s.set("seed", std::to_string(c.seed));
  s.set("epochs", std::to_string(c.epochs));
  s.set("batch", std::to_string(c.batch));
  s.set("lr", format_fixed(c.lr, 10));
  s.set("momentum", format_fixed(c.momentum, 10));
  s.set("mirror", c.augment.mirror ? "true" : "false");
  s.set("crop", std::to_string(c.augment.crop));
  if (edge_phase) {
    s.set("sigma", format_fixed(c.sigma, 10));
    return;
  }
  s.set("classifier_lr_scale", format_fixed(c.classifier_lr_scale, 10));
  s.set("strategy", std::string(to_string(c.loss.strategy)));
  s.set("lambda1", format_fixed(c.loss.lambda[0], 10));
  s.set("lambda2", format_fixed(c.loss.lambda[1], 10));
  s.set("lambda3", format_fixed(c.loss.lambda[2], 10));
  s.set("match_point", std::string(to_string(c.loss.match_point)));
  s.set("reduction", std::string(to_string(c.loss.reduction)));
  s.set("norm", std::string(to_string(c.loss.norm)));
  s.set("final_embedding", std::string(to_string(c.loss.final_embedding)));
}

EpochCallback progress(std::ostream& out, const char* phase, const char* metric) {
  return [&out, phase, metric](const EpochLog& l) {
    out << phase << " epoch " << l.epoch << " loss " << format_fixed(l.loss);
    if (l.val_metric) out << " " << metric << " " << format_fixed(*l.val_metric);
    out << "\n" << std::flush;
  };
}

std::vector<LabelMask> masks_of(const std::vector<Sample>& samples) {
  std::vector<LabelMask> m;
  m.reserve(samples.size());
  for (const auto& s : samples) m.push_back(s.mask);
  return m;
}

EdgeNetParams load_edge_for(const Settings& s, std::size_t classes) {
  const auto path = s.str("edge_checkpoint", "");
  if (path.empty()) throw UsageError("this strategy needs a frozen edge net: pass --edge-checkpoint");
  auto edge = load_edge_checkpoint(path);
  if (edge.classes != classes) {
    throw DataError("edge checkpoint " + path + " was trained for " + std::to_string(edge.classes) +
                    " classes, expected " + std::to_string(classes));
  }
  return edge;
}

int cmd_gen_data(Settings& s, std::ostream& out) {
  const auto count = s.u64("count", 500), val = s.u64("val_count", 100), size = s.u64("size", 64);
  const auto classes = s.u64("classes", 5), seed = s.u64("seed", 1);
  for (const auto& [k, v] : std::map<std::string, std::uint64_t>{
           {"count", count}, {"val_count", val}, {"size", size}, {"classes", classes}, {"seed", seed}}) {
    s.set(k, std::to_string(v));
  }
  const fs::path dir = prepare_out(s);
  RunManifest manifest("gen-data", s, dir, {"train.txt", "val.txt"});
  manifest.write_started();
  const auto samples = gen_synthetic(count + val, size, classes, seed);
  std::vector<std::string> train_ids, val_ids;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    encode_pnm(samples[i], dir);
    (i < count ? train_ids : val_ids).push_back(samples[i].id);
  }
  write_manifest(dir / "train.txt", train_ids);
  write_manifest(dir / "val.txt", val_ids);
  manifest.write_finished();
  out << "wrote " << train_ids.size() << " training and " << val_ids.size() << " validation samples to "
      << dir.string() << "\n";
  return kExitOk;
}

int cmd_train_edge(Settings& s, std::ostream& out) {
  const fs::path data = s.required("data");
  const auto classes = s.u64("classes", 5);
  s.set("classes", std::to_string(classes));
  const TrainConfig config = train_config(s, true);
  resolve_training(s, config, true);
  const fs::path dir = prepare_out(s);
  RunManifest manifest("train-edge", s, dir, {"edge.ckpt", "edge_metrics.csv"});
  manifest.write_started();

  const auto train = limited(load_dataset(data, "train.txt"), s);
  const auto val = load_dataset(data, "val.txt");
  check_labels(train, classes, "training");
  check_labels(val, classes, "validation");
  const auto result = train_edge_net(masks_of(train), classes, config, masks_of(val),
                                     progress(out, "edge", "val_edge_accuracy"));
  save_checkpoint((dir / "edge.ckpt").string(), result.params);
  write_text(dir / "edge_metrics.csv", metrics_csv(result.epochs, "edge", s.boolean("wall_time", false)));
  manifest.write_finished();
  return kExitOk;
}

int cmd_train_seg(Settings& s, std::ostream& out) {
  const fs::path data = s.required("data");
  const auto classes = s.u64("classes", 5);
  s.set("classes", std::to_string(classes));
  const TrainConfig config = train_config(s, false);
  resolve_training(s, config, false);
  std::optional<EdgeNetParams> edge;
  if (config.loss.needs_edge_net()) edge = load_edge_for(s, classes);
  const fs::path dir = prepare_out(s);
  RunManifest manifest("train-seg", s, dir, {"seg.ckpt", "seg_metrics.csv"});
  manifest.write_started();

  const auto train = limited(load_dataset(data, "train.txt"), s);
  const auto val = load_dataset(data, "val.txt");
  check_labels(train, classes, "training");
  check_labels(val, classes, "validation");
  const auto result =
      train_seg_net(train, val, classes, edge ? &*edge : nullptr, config, progress(out, "seg", "val_miou"));
  save_checkpoint((dir / "seg.ckpt").string(), result.params);
  write_text(dir / "seg_metrics.csv", metrics_csv(result.epochs, "seg", s.boolean("wall_time", false)));
  manifest.write_finished();
  return kExitOk;
}

std::size_t infer_classes(const std::vector<LabelMask>& a, const std::vector<LabelMask>& b) {
  std::size_t top = 0;
  for (const auto* set : {&a, &b})
    for (const auto& m : *set)
      for (auto l : m.labels)
        if (l != kVoidLabel) top = std::max<std::size_t>(top, l);
  return top + 1;
}

int cmd_eval(Settings& s, std::ostream& out) {
  const fs::path data = s.required("data");
  const auto widths = s.int_list("trimap_widths", {1, 2, 5, 10});
  const bool from_preds = s.has("pred_dir");
  if (from_preds == s.has("checkpoint")) throw UsageError("eval needs exactly one of --checkpoint and --pred-dir");
  const fs::path dir = prepare_out(s);
  RunManifest manifest("eval", s, dir, {"eval.csv", "eval.svg"});
  manifest.write_started();

  const auto ids = read_manifest(data / "val.txt");
  std::vector<LabelMask> gts, preds;
  std::size_t classes = 0;
  if (from_preds) {
    for (const auto& id : ids) {
      gts.push_back(read_mask(data, id));
      preds.push_back(read_mask(s.str("pred_dir", ""), id));
    }
    classes = s.has("classes") ? s.u64("classes", 0) : infer_classes(gts, preds);
  } else {
    const auto params = load_seg_checkpoint(s.str("checkpoint", ""));
    const auto val = load_dataset(data, "val.txt");
    classes = params.classes;
    gts = masks_of(val);
    preds = predict(params, val, default_threads());
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (preds[i].height != gts[i].height || preds[i].width != gts[i].width) {
      throw DataError("prediction for '" + ids[i] + "' has a different size than its ground truth");
    }
    for (std::size_t p = 0; p < gts[i].size(); ++p) {
      const auto g = gts[i].labels[p], q = preds[i].labels[p];
      if ((g != kVoidLabel && g >= classes) || q >= classes) {
        throw DataError("sample '" + ids[i] + "' has a label outside 0.." + std::to_string(classes - 1));
      }
    }
    cm += confusion_matrix(preds[i], gts[i], classes);
  }
  const auto overall = miou(cm);
  const auto trimap = trimap_miou(preds, gts, widths, classes);
  write_text(dir / "eval.csv", evaluation_csv(classes, overall, trimap));
  write_text(dir / "eval.svg", trimap_svg(overall, trimap));
  manifest.write_finished();
  out << "mIoU " << format_fixed(overall.mean) << "\n";
  for (const auto& t : trimap) {
    out << "width " << t.width << " boundary " << format_fixed(t.boundary.mean) << " interior "
        << format_fixed(t.interior.mean) << "\n";
  }
  return kExitOk;
}

int cmd_ablate(Settings& s, std::ostream& out) {
  const fs::path data = s.required("data");
  const auto classes = s.u64("classes", 5);
  s.set("classes", std::to_string(classes));
  const auto widths = s.int_list("trimap_widths", {1, 2, 5, 10});
  TrainConfig base = train_config(s, false);
  resolve_training(s, base, false);
  // The grid supplies these per row.
  for (const char* k : {"strategy", "lambda1", "lambda2", "lambda3", "match_point"}) s.erase(k);
  const auto edge = load_edge_for(s, classes);
  const fs::path dir = prepare_out(s);
  RunManifest manifest("ablate", s, dir, {"ablation.csv"});
  manifest.write_started();

  const auto train = limited(load_dataset(data, "train.txt"), s);
  const auto val = load_dataset(data, "val.txt");
  check_labels(train, classes, "training");
  check_labels(val, classes, "validation");
  const auto gts = masks_of(val);
  std::vector<AblationRow> rows;
  for (const auto& [name, loss] : ablation_grid()) {
    TrainConfig c = base;
    const LossConfig keep = c.loss;
    c.loss = loss;
    c.loss.reduction = keep.reduction;
    c.loss.norm = keep.norm;
    c.loss.final_embedding = keep.final_embedding;
    out << "ablate " << name << " lambda (" << format_fixed(loss.lambda[0], 2) << ", "
        << format_fixed(loss.lambda[1], 2) << ", " << format_fixed(loss.lambda[2], 2) << ")\n";
    const auto result = train_seg_net(train, {}, classes, &edge, c);
    const auto preds = predict(result.params, val, c.threads);
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < val.size(); ++i) cm += confusion_matrix(preds[i], gts[i], classes);
    rows.push_back({name, c.loss, miou(cm).mean, trimap_miou(preds, gts, widths, classes)});
    out << "  val_miou " << format_fixed(rows.back().val_miou) << "\n" << std::flush;
    // Rewritten after every row so an interrupted sweep keeps its results.
    write_text(dir / "ablation.csv", ablation_csv(rows));
  }
  manifest.write_finished();
  return kExitOk;
}

int cmd_gradcheck(Settings& s, std::ostream& out) {
  const auto instances = s.u64("instances", 20), seed = s.u64("seed", 1);
  const bool to_file = s.has("out");
  std::optional<RunManifest> manifest;
  fs::path dir;
  if (to_file) {
    dir = prepare_out(s);
    manifest.emplace("gradcheck", s, dir, std::vector<std::string>{"gradcheck.csv"});
    manifest->write_started();
  }
  const auto cases = run_gradient_suite(instances, seed);
  std::string csv = "case,instances,max_relative_error\n";
  bool ok = true;
  for (const auto& c : cases) {
    const bool pass = c.worst.max_relative_error < kGradTolerance;
    ok = ok && pass;
    out << (pass ? "ok   " : "FAIL ") << c.name << " max_rel_err " << c.worst.max_relative_error << "\n";
    csv += c.name + "," + std::to_string(c.instances) + "," + format_fixed(c.worst.max_relative_error, 12) + "\n";
  }
  if (to_file) {
    write_text(dir / "gradcheck.csv", csv);
    manifest->write_finished();
  }
  if (!ok) throw NumericError("gradient check tolerance " + format_fixed(kGradTolerance, 4) + " exceeded");
  return kExitOk;
}

}  // namespace

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(number) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic-edge-aware segmentation training and evaluation", "semeda"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  struct Sub {
    const char* name;
    const char* help;
    unsigned bit;
    CLI::App* app = nullptr;
  };
  std::vector<Sub> subs{{"gen-data", "write a synthetic dataset", kGenData},
                        {"train-edge", "train the edge network on perturbed masks", kTrainEdge},
                        {"train-seg", "train a segmentation network", kTrainSeg},
                        {"eval", "score a checkpoint or prediction masks on the validation split", kEval},
                        {"ablate", "train and score the full loss-configuration grid", kAblate},
                        {"gradcheck", "finite-difference check of every operation and loss", kGradcheck}};
  std::map<std::string, std::string> flag_values;
  std::map<std::string, std::string> config_path;
  for (auto& sub : subs) {
    sub.app = app.add_subcommand(sub.name, sub.help);
    sub.app->add_option("--config", config_path[sub.name], "key = value settings file (flags win)");
    for (const auto& k : keys()) {
      if (!(k.commands & sub.bit)) continue;
      const std::string name = k.name;
      if (k.is_flag) {
        sub.app->add_flag_callback(flag_of(name), [&flag_values, name] { flag_values[name] = "true"; }, k.help);
      } else {
        sub.app->add_option(flag_of(name), flag_values[name], k.help);
      }
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Sub* chosen = nullptr;
  for (const auto& sub : subs)
    if (sub.app->parsed()) chosen = &sub;

  try {
    std::map<std::string, std::string> values;
    if (const auto& path = config_path[chosen->name]; !path.empty()) {
      for (auto& [k, v] : parse_config(read_text(path))) {
        const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& key) { return key.name == k; });
        if (it == keys().end()) throw UsageError("config " + path + ": unknown key '" + k + "'");
        if (it->commands & chosen->bit) values[k] = v;
      }
    }
    for (const auto& k : keys()) {
      if (!(k.commands & chosen->bit)) continue;
      auto* opt = chosen->app->get_option_no_throw(flag_of(k.name));
      if (opt != nullptr && opt->count() > 0) values[k.name] = flag_values[k.name];
    }
    Settings settings(std::move(values));
    switch (chosen->bit) {
      case kGenData:
        return cmd_gen_data(settings, out);
      case kTrainEdge:
        return cmd_train_edge(settings, out);
      case kTrainSeg:
        return cmd_train_seg(settings, out);
      case kEval:
        return cmd_eval(settings, out);
      case kAblate:
        return cmd_ablate(settings, out);
      default:
        return cmd_gradcheck(settings, out);
    }
  } catch (const NumericError& e) {
    err << "semeda " << chosen->name << ": " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "semeda " << chosen->name << ": " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "semeda " << chosen->name << ": " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "semeda " << chosen->name << ": " << e.what() << "\n\n" << chosen->app->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "semeda " << chosen->name << ": " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace semeda::cli
