#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semeda/grid.hpp"
#include "semeda/mask.hpp"

namespace semeda {

struct Sample {
  std::string id;
  Grid image;  // 3 x H x W, values in [0, 1]
  LabelMask mask;
};

/// Synthetic shapes: class-0 background with 1-4 occluding rectangles,
/// disks and triangles. Each class has its own colour band; per-pixel
/// Gaussian texture noise keeps colour alone from being decisive.
/// Deterministic in `seed`; ids are zero-padded indices.
std::vector<Sample> gen_synthetic(std::size_t count, std::size_t size, std::size_t classes, std::uint64_t seed);

inline constexpr double kTextureNoise = 0.05;

/// Channel c is 1 where the label is c. Void pixels are zero everywhere.
Grid one_hot(const LabelMask& mask, std::size_t classes, std::uint8_t void_label = kVoidLabel);

/// Per-pixel argmax over channels; ties go to the lowest channel.
LabelMask argmax_labels(const Grid& probs);

// Netpbm codecs. Images are binary PPM (P6), masks binary PGM (P5); both
// use maxval 255 and a "P?\n<w> <h>\n255\n" header on output.

std::string encode_ppm(const Grid& image);
std::string encode_pgm(const LabelMask& mask);
Grid decode_ppm(const std::string& bytes);
LabelMask decode_pgm(const std::string& bytes);

std::filesystem::path image_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path mask_path(const std::filesystem::path& dir, const std::string& id);

void encode_pnm(const Sample& sample, const std::filesystem::path& dir);
Sample decode_pnm(const std::filesystem::path& dir, const std::string& id);
/// Mask-only variant for prediction directories.
LabelMask read_mask(const std::filesystem::path& dir, const std::string& id);

/// One id per line, LF-terminated.
std::vector<std::string> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& ids);

/// Samples in manifest order. Duplicate ids and missing files are DataErrors.
std::vector<Sample> load_dataset(const std::filesystem::path& dir, const std::string& manifest);

}  // namespace semeda
