#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "semeda/error.hpp"
#include "semeda/nets.hpp"

namespace semeda {

namespace {

constexpr char kMagic[] = "SEMEDA1";
constexpr std::size_t kMagicSize = 7;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw DataError(std::string("checkpoint: truncated while reading ") + what + " at byte " +
                      std::to_string(pos_));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8, "payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) { pos_ += n; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode(NetworkKind kind, std::size_t classes, const LayerStack& layers) {
  Writer w;
  w.bytes.assign(kMagic, kMagic + kMagicSize);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u32(static_cast<std::uint32_t>(classes));
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    w.u32(static_cast<std::uint32_t>(l.out_channels()));
    w.u32(static_cast<std::uint32_t>(l.in_channels()));
    w.u32(static_cast<std::uint32_t>(l.kernel_size()));
    w.u32(static_cast<std::uint32_t>(l.stride));
  }
  for (const auto& l : layers) {
    for (double v : l.kernel.data()) w.f64(v);
    for (double v : l.bias.data()) w.f64(v);
  }
  return std::move(w.bytes);
}

struct Decoded {
  NetworkKind kind;
  std::size_t classes;
  LayerStack layers;
};

Decoded decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagicSize || std::memcmp(bytes.data(), kMagic, kMagicSize) != 0) {
    throw DataError("checkpoint: missing SEMEDA1 magic at byte 0");
  }
  Reader r(bytes);
  r.skip(kMagicSize);
  const std::size_t kind_at = r.pos();
  const auto kind = r.u32("network kind");
  if (kind < 1 || kind > 3) {
    throw DataError("checkpoint: unknown network kind " + std::to_string(kind) + " at byte " +
                    std::to_string(kind_at));
  }
  const auto classes = r.u32("class count");
  const auto count = r.u32("layer count");
  if (count > 64) throw DataError("checkpoint: implausible layer count " + std::to_string(count));
  std::vector<std::array<std::uint32_t, 4>> plan(count);
  for (auto& p : plan) {
    for (auto& v : p) v = r.u32("layer plan");
    if (p[0] == 0 || p[1] == 0 || p[2] == 0 || p[3] == 0 || p[0] > 4096 || p[1] > 4096 || p[2] > 15) {
      throw DataError("checkpoint: invalid layer plan ending at byte " + std::to_string(r.pos()));
    }
  }
  Decoded d{static_cast<NetworkKind>(kind), classes, {}};
  for (const auto& p : plan) {
    ConvLayer l{Grid({p[0], p[1], p[2], p[2]}), Grid({p[0]}), static_cast<int>(p[3])};
    r.need(8 * (l.kernel.size() + l.bias.size()), "payload");
    for (auto& v : l.kernel.data()) v = r.f64();
    for (auto& v : l.bias.data()) v = r.f64();
    d.layers.push_back(std::move(l));
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes after offset " + std::to_string(r.pos()));
  return d;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to checkpoint " + path);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const EdgeNetParams& params) {
  validate(params);
  return encode(NetworkKind::edge, params.classes, params.layers);
}

std::vector<std::uint8_t> encode_checkpoint(const SegNetParams& params) {
  validate(params);
  return encode(params.edge_head ? NetworkKind::segmentation_with_edge_head : NetworkKind::segmentation,
                params.classes, params.layers);
}

NetworkKind checkpoint_kind(const std::vector<std::uint8_t>& bytes) { return decode(bytes).kind; }

EdgeNetParams decode_edge_checkpoint(const std::vector<std::uint8_t>& bytes) {
  auto d = decode(bytes);
  if (d.kind != NetworkKind::edge) throw DataError("checkpoint: not an edge-net checkpoint");
  EdgeNetParams p{d.classes, std::move(d.layers)};
  try {
    validate(p);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return p;
}

SegNetParams decode_seg_checkpoint(const std::vector<std::uint8_t>& bytes) {
  auto d = decode(bytes);
  if (d.kind == NetworkKind::edge) throw DataError("checkpoint: not a segmentation-net checkpoint");
  SegNetParams p{d.classes, std::move(d.layers), d.kind == NetworkKind::segmentation_with_edge_head};
  try {
    validate(p);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return p;
}

void save_checkpoint(const std::string& path, const EdgeNetParams& params) {
  write_file(path, encode_checkpoint(params));
}

void save_checkpoint(const std::string& path, const SegNetParams& params) {
  write_file(path, encode_checkpoint(params));
}

EdgeNetParams load_edge_checkpoint(const std::string& path) { return decode_edge_checkpoint(read_file(path)); }

SegNetParams load_seg_checkpoint(const std::string& path) { return decode_seg_checkpoint(read_file(path)); }

}  // namespace semeda
