#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <span>
#include <vector>

namespace strokeforge {

/// Row-major RGB image with float channels in [0,1].
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int height, int width, float fill = 1.0F);

  static Image white(int height, int width) { return Image(height, width, 1.0F); }

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return pixels_.empty(); }

  float& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }

  std::span<float> data() { return pixels_; }
  std::span<const float> data() const { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

/// Float to 8-bit with round-half-up; values are clamped to [0,1] first.
std::uint8_t to_byte(float value);
inline float from_byte(std::uint8_t value) { return static_cast<float>(value) / 255.0F; }

std::vector<std::uint8_t> to_bytes(const Image& image);
Image from_bytes(std::span<const std::uint8_t> bytes, int height, int width);

/// Sum over pixels of (1 - min channel); how much the image darkens white.
double ink_mass(const Image& image);

double mse(const Image& a, const Image& b);

/// Mean absolute discrete Laplacian (4-neighbour stencil, interior pixels).
double laplacian_energy(const Image& image);

Image resize_bilinear(const Image& image, int height, int width);

/// Tiles images left to right with a gap of white pixels.
Image hconcat(std::span<const Image> images, int gap = 0);
Image vconcat(std::span<const Image> images, int gap = 0);

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

/// Version string of the linked libpng.
std::string png_library_version();

}  // namespace strokeforge
