#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "strokeforge/action.hpp"
#include "strokeforge/image.hpp"
#include "strokeforge/oracle.hpp"

namespace strokeforge {

/// On-disk layout, all little-endian:
///   "NPDS" | version u32 | count u64 | action_dim u32 | height u32 | width u32 | flags u32
/// followed by `count` records of action_dim float32 and height*width*3 uint8.
inline constexpr char kDatasetMagic[4] = {'N', 'P', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 4 + 8 + 4 + 4 + 4 + 4;
inline constexpr std::uint32_t kDatasetFlagDiscrete = 1U;

struct DatasetHeader {
  std::uint32_t version = kDatasetVersion;
  std::uint64_t count = 0;
  std::uint32_t action_dim = kActionDim;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t flags = 0;

  bool discrete() const { return (flags & kDatasetFlagDiscrete) != 0; }
  std::size_t image_bytes() const { return static_cast<std::size_t>(height) * width * 3; }
  std::size_t record_bytes() const { return action_dim * sizeof(float) + image_bytes(); }
};

/// A fully loaded dataset. Records are stored contiguously.
struct StrokeDataset {
  DatasetHeader header;
  std::vector<float> actions;        // count * action_dim
  std::vector<std::uint8_t> images;  // count * height * width * 3, HWC

  std::size_t size() const { return header.count; }
  std::span<const float> action(std::size_t i) const;
  std::span<const std::uint8_t> image_bytes(std::size_t i) const;
  Image image(std::size_t i) const;
};

/// Record i is derived solely from (cfg.seed, i), so any sharding across
/// `workers` threads produces the same bytes.
StrokeDataset generate_dataset(std::uint64_t n, const OracleConfig& cfg, bool discrete,
                               int workers = 1);

void write_dataset(const StrokeDataset& dataset, const std::filesystem::path& path);
StrokeDataset read_dataset(const std::filesystem::path& path);
DatasetHeader read_dataset_header(const std::filesystem::path& path);

/// generate_dataset followed by write_dataset.
void generate_dataset_file(std::uint64_t n, const OracleConfig& cfg, bool discrete,
                           const std::filesystem::path& path, int workers = 1);

/// FNV-1a 64 of the file contents, as 16 hex digits.
std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace strokeforge
