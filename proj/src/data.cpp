#include "semeda/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include "semeda/error.hpp"
#include "semeda/rng.hpp"

namespace semeda {

namespace {

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, 8> kPalette{{
    {0.45, 0.45, 0.45},  // background base
    {0.80, 0.25, 0.20},
    {0.25, 0.70, 0.30},
    {0.20, 0.35, 0.80},
    {0.80, 0.75, 0.20},
    {0.70, 0.25, 0.70},
    {0.20, 0.70, 0.75},
    {0.90, 0.55, 0.15},
}};

enum class ShapeKind { rectangle, disk, triangle };
constexpr std::size_t kShapeKinds = 3;

Rgb class_color(std::size_t cls) {
  if (cls < kPalette.size()) return kPalette[cls];
  // Past the palette: reuse a hue in a darker band.
  const std::size_t band = (cls - 1) / (kPalette.size() - 1);
  Rgb c = kPalette[1 + (cls - 1) % (kPalette.size() - 1)];
  for (auto& v : c) v = std::max(0.05, v - 0.2 * static_cast<double>(band));
  return c;
}

struct Point {
  double x, y;
};

double cross(Point a, Point b, Point p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

std::string format_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

Sample make_sample(std::size_t index, std::size_t size, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, streams::dataset, index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const auto s = static_cast<double>(size);
  Sample sample{format_id(index), Grid({3, size, size}), LabelMask(size, size, 0)};
  std::vector<Rgb> colors(size * size);

  Rgb background = class_color(0);
  for (auto& v : background) v += uniform(-0.15, 0.15);
  std::fill(colors.begin(), colors.end(), background);

  const int shapes = std::uniform_int_distribution<int>(1, 4)(rng);
  for (int n = 0; n < shapes; ++n) {
    const auto cls = std::uniform_int_distribution<std::size_t>(1, classes - 1)(rng);
    ShapeKind kind;
    if (classes - 1 >= kShapeKinds) {
      kind = static_cast<ShapeKind>((cls - 1) % kShapeKinds);
    } else {
      kind = static_cast<ShapeKind>(std::uniform_int_distribution<int>(0, kShapeKinds - 1)(rng));
    }
    Rgb color = class_color(cls);
    for (auto& v : color) v += uniform(-0.12, 0.12);

    const double r = uniform(s / 10.0, s / 4.0);
    const double cx = uniform(r, s - 1.0 - r);
    const double cy = uniform(r, s - 1.0 - r);
    const double hw = uniform(0.5 * r, r), hh = uniform(0.5 * r, r);
    std::array<Point, 3> tri{};
    const double phase = uniform(0.0, 2.0 * std::numbers::pi);
    for (int k = 0; k < 3; ++k) {
      const double a = phase + k * 2.0 * std::numbers::pi / 3.0 + uniform(-0.3, 0.3);
      const double rr = r * uniform(0.75, 1.0);
      tri[static_cast<std::size_t>(k)] = {cx + rr * std::cos(a), cy + rr * std::sin(a)};
    }
    const double orient = cross(tri[0], tri[1], tri[2]) >= 0.0 ? 1.0 : -1.0;

    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const Point p{static_cast<double>(x), static_cast<double>(y)};
        bool inside = false;
        switch (kind) {
          case ShapeKind::rectangle:
            inside = std::fabs(p.x - cx) <= hw && std::fabs(p.y - cy) <= hh;
            break;
          case ShapeKind::disk:
            inside = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy) <= r * r;
            break;
          case ShapeKind::triangle:
            inside = orient * cross(tri[0], tri[1], p) >= 0.0 && orient * cross(tri[1], tri[2], p) >= 0.0 &&
                     orient * cross(tri[2], tri[0], p) >= 0.0;
            break;
        }
        if (inside) {
          sample.mask.at(y, x) = static_cast<std::uint8_t>(cls);
          colors[y * size + x] = color;
        }
      }
    }
  }

  std::normal_distribution<double> texture(0.0, kTextureNoise);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x)
        sample.image.at(c, y, x) = std::clamp(colors[y * size + x][c] + texture(rng), 0.0, 1.0);
  return sample;
}

// Netpbm header parsing.
struct Header {
  std::size_t width, height, payload_offset;
};

Header parse_header(const std::string& bytes, const char* magic) {
  std::size_t pos = 0;
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) {
    throw DataError(std::string("netpbm: expected magic ") + magic + " at byte 0");
  }
  pos = 2;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  auto next_number = [&](const char* what) -> std::size_t {
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (value > 1u << 20) throw DataError(std::string("netpbm: ") + what + " too large at byte " + std::to_string(start));
      ++pos;
    }
    if (pos == start) throw DataError(std::string("netpbm: malformed ") + what + " at byte " + std::to_string(start));
    return value;
  };
  Header h{};
  h.width = next_number("width");
  h.height = next_number("height");
  const std::size_t maxval_at = pos;
  const std::size_t maxval = next_number("maxval");
  if (maxval != 255) {
    throw DataError("netpbm: maxval " + std::to_string(maxval) + " is not 255 (near byte " + std::to_string(maxval_at) + ")");
  }
  if (h.width == 0 || h.height == 0) throw DataError("netpbm: zero image dimension");
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw DataError("netpbm: missing whitespace after header at byte " + std::to_string(pos));
  }
  h.payload_offset = pos + 1;
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace

std::vector<Sample> gen_synthetic(std::size_t count, std::size_t size, std::size_t classes, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("gen_synthetic: need at least 2 classes (background + 1 shape)");
  if (classes > 255) throw std::invalid_argument("gen_synthetic: at most 255 classes fit a PGM mask");
  if (size < 32) throw std::invalid_argument("gen_synthetic: size must be >= 32");
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_sample(i, size, classes, seed));
  return out;
}

Grid one_hot(const LabelMask& mask, std::size_t classes, std::uint8_t void_label) {
  Grid out({classes, mask.height, mask.width});
  const std::size_t plane = mask.size();
  for (std::size_t i = 0; i < plane; ++i) {
    const std::uint8_t l = mask.labels[i];
    if (l == void_label) continue;
    if (l >= classes) {
      throw std::invalid_argument("one_hot: label " + std::to_string(l) + " at pixel (" +
                                  std::to_string(i / mask.width) + ", " + std::to_string(i % mask.width) +
                                  ") is not below class count " + std::to_string(classes));
    }
    out[l * plane + i] = 1.0;
  }
  return out;
}

LabelMask argmax_labels(const Grid& probs) {
  require_chw(probs, "argmax_labels");
  const std::size_t c = probs.dim(0), h = probs.dim(1), w = probs.dim(2), plane = h * w;
  if (c > 255) throw std::invalid_argument("argmax_labels: too many channels for a label mask");
  LabelMask out(h, w);
  for (std::size_t i = 0; i < plane; ++i) {
    std::size_t best = 0;
    for (std::size_t ch = 1; ch < c; ++ch)
      if (probs[ch * plane + i] > probs[best * plane + i]) best = ch;
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

std::string encode_ppm(const Grid& image) {
  require_chw(image, "encode_ppm");
  if (image.dim(0) != 3) throw std::invalid_argument("encode_ppm: image must have 3 channels");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + 3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = image.at(c, y, x);
        if (!(v >= 0.0 && v <= 1.0)) {
          throw std::invalid_argument("encode_ppm: value " + std::to_string(v) + " outside [0, 1]");
        }
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
  return out;
}

std::string encode_pgm(const LabelMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  out.append(mask.labels.begin(), mask.labels.end());
  return out;
}

Grid decode_ppm(const std::string& bytes) {
  const auto h = parse_header(bytes, "P6");
  const std::size_t need = 3 * h.width * h.height;
  if (bytes.size() - h.payload_offset < need) {
    throw DataError("netpbm: truncated P6 payload, expected " + std::to_string(need) + " bytes from byte " +
                    std::to_string(h.payload_offset) + ", file ends at byte " + std::to_string(bytes.size()));
  }
  Grid image({3, h.height, h.width});
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + h.payload_offset;
  for (std::size_t y = 0; y < h.height; ++y)
    for (std::size_t x = 0; x < h.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) image.at(c, y, x) = *p++ / 255.0;
  return image;
}

LabelMask decode_pgm(const std::string& bytes) {
  const auto h = parse_header(bytes, "P5");
  const std::size_t need = h.width * h.height;
  if (bytes.size() - h.payload_offset < need) {
    throw DataError("netpbm: truncated P5 payload, expected " + std::to_string(need) + " bytes from byte " +
                    std::to_string(h.payload_offset) + ", file ends at byte " + std::to_string(bytes.size()));
  }
  LabelMask mask(h.height, h.width);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + h.payload_offset;
  std::copy(p, p + need, mask.labels.begin());
  return mask;
}

std::filesystem::path image_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / ("img_" + id + ".ppm");
}

std::filesystem::path mask_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / ("mask_" + id + ".pgm");
}

void encode_pnm(const Sample& sample, const std::filesystem::path& dir) {
  write_file(image_path(dir, sample.id), encode_ppm(sample.image));
  write_file(mask_path(dir, sample.id), encode_pgm(sample.mask));
}

LabelMask read_mask(const std::filesystem::path& dir, const std::string& id) {
  const auto path = mask_path(dir, id);
  if (!std::filesystem::exists(path)) throw DataError("sample '" + id + "': missing " + path.string());
  try {
    return decode_pgm(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Sample decode_pnm(const std::filesystem::path& dir, const std::string& id) {
  const auto ipath = image_path(dir, id);
  if (!std::filesystem::exists(ipath)) throw DataError("sample '" + id + "': missing " + ipath.string());
  Sample s{id, Grid{}, read_mask(dir, id)};
  try {
    s.image = decode_ppm(read_file(ipath));
  } catch (const DataError& e) {
    throw DataError(ipath.string() + ": " + e.what());
  }
  if (s.image.dim(1) != s.mask.height || s.image.dim(2) != s.mask.width) {
    throw DataError("sample '" + id + "': image and mask dimensions differ");
  }
  return s;
}

std::vector<std::string> read_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string> ids;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(std::move(line));
    start = end + 1;
  }
  return ids;
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  std::string text;
  for (const auto& id : ids) text += id + "\n";
  write_file(path, text);
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir, const std::string& manifest) {
  const auto ids = read_manifest(dir / manifest);
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DataError("manifest " + manifest + ": duplicate id '" + id + "'");
  }
  std::vector<Sample> samples;
  samples.reserve(ids.size());
  for (const auto& id : ids) samples.push_back(decode_pnm(dir, id));
  return samples;
}

}  // namespace semeda
