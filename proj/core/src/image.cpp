#include "strokeforge/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "strokeforge/error.hpp"

namespace strokeforge {

Image::Image(int height, int width, float fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw InvalidArgument("negative image dimensions");
  pixels_.assign(static_cast<std::size_t>(height) * width * kChannels, fill);
}

std::uint8_t to_byte(float value) {
  const double v = std::clamp(static_cast<double>(value), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

std::vector<std::uint8_t> to_bytes(const Image& image) {
  std::vector<std::uint8_t> out(image.data().size());
  std::ranges::transform(image.data(), out.begin(), to_byte);
  return out;
}

Image from_bytes(std::span<const std::uint8_t> bytes, int height, int width) {
  Image image(height, width);
  if (bytes.size() != image.data().size()) throw InvalidArgument("byte buffer size mismatch");
  std::ranges::transform(bytes, image.data().begin(), from_byte);
  return image;
}

double ink_mass(const Image& image) {
  double total = 0.0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const float m = std::min({image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2)});
      total += 1.0 - m;
    }
  }
  return total;
}

double mse(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidArgument("mse: image shape mismatch");
  }
  double total = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - db[i];
    total += d * d;
  }
  return da.empty() ? 0.0 : total / static_cast<double>(da.size());
}

double laplacian_energy(const Image& image) {
  if (image.height() < 3 || image.width() < 3) return 0.0;
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 1; y + 1 < image.height(); ++y) {
    for (int x = 1; x + 1 < image.width(); ++x) {
      for (int c = 0; c < Image::kChannels; ++c) {
        const double lap = image.at(y - 1, x, c) + image.at(y + 1, x, c) + image.at(y, x - 1, c) +
                           image.at(y, x + 1, c) - 4.0 * image.at(y, x, c);
        total += std::abs(lap);
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (image.height() == height && image.width() == width) return image;
  Image out(height, width);
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < Image::kChannels; ++c) {
        const double top = (1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const double bottom = (1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

Image hconcat(std::span<const Image> images, int gap) {
  if (images.empty()) return {};
  int height = 0;
  int width = 0;
  for (const auto& im : images) {
    height = std::max(height, im.height());
    width += im.width();
  }
  width += gap * static_cast<int>(images.size() - 1);
  Image out(height, width);
  int offset = 0;
  for (const auto& im : images) {
    for (int y = 0; y < im.height(); ++y)
      for (int x = 0; x < im.width(); ++x)
        for (int c = 0; c < Image::kChannels; ++c) out.at(y, offset + x, c) = im.at(y, x, c);
    offset += im.width() + gap;
  }
  return out;
}

Image vconcat(std::span<const Image> images, int gap) {
  if (images.empty()) return {};
  int height = 0;
  int width = 0;
  for (const auto& im : images) {
    width = std::max(width, im.width());
    height += im.height();
  }
  height += gap * static_cast<int>(images.size() - 1);
  Image out(height, width);
  int offset = 0;
  for (const auto& im : images) {
    for (int y = 0; y < im.height(); ++y)
      for (int x = 0; x < im.width(); ++x)
        for (int c = 0; c < Image::kChannels; ++c) out.at(offset + y, x, c) = im.at(y, x, c);
    offset += im.height() + gap;
  }
  return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  if (image.empty()) throw InvalidArgument("cannot write an empty image");
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGB;
  const auto bytes = to_bytes(image);
  if (png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
    throw IoError("failed to write PNG " + path.string() + ": " + png.message);
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
    throw IoError("failed to open PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
  // Transparent pixels are composited over white.
  png_color white{255, 255, 255};
  if (png_image_finish_read(&png, &white, bytes.data(), 0, nullptr) == 0) {
    throw IoError("failed to decode PNG " + path.string() + ": " + png.message);
  }
  return from_bytes(bytes, static_cast<int>(png.height), static_cast<int>(png.width));
}

std::string png_library_version() { return PNG_LIBPNG_VER_STRING; }

}  // namespace strokeforge
