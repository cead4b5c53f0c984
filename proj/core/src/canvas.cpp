#include "strokeforge/canvas.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "strokeforge/error.hpp"
#include "strokeforge/tensor_image.hpp"

namespace strokeforge {

Matte alpha_from_white(const torch::Tensor& stroke) {
  if (stroke.dim() < 3 || stroke.size(-3) != 3) {
    throw InvalidArgument("stroke must have shape [..., 3, H, W]");
  }
  const auto deviation = 1.0 - stroke;
  auto alpha = std::get<0>(deviation.max(-3, /*keepdim=*/true));
  const auto defined = alpha > kMatteEpsilon;
  // Division uses a clamped alpha so masked-out entries keep finite gradients.
  const auto ink_defined = 1.0 - deviation / alpha.clamp_min(kMatteEpsilon);
  auto ink = torch::where(defined, ink_defined, torch::ones_like(ink_defined));
  return {alpha, ink};
}

torch::Tensor composite(const torch::Tensor& canvas, const torch::Tensor& stroke) {
  if (canvas.sizes() != stroke.sizes()) {
    throw InvalidArgument("composite: canvas and stroke shapes differ");
  }
  const Matte m = alpha_from_white(stroke);
  return (1.0 - m.alpha) * canvas + m.alpha * m.ink;
}

torch::Tensor composite_sequence(torch::Tensor canvas, const torch::Tensor& strokes) {
  for (std::int64_t t = 0; t < strokes.size(0); ++t) canvas = composite(canvas, strokes[t]);
  return canvas;
}

torch::Tensor white_canvas(std::int64_t batch, std::int64_t height, std::int64_t width,
                           torch::TensorOptions options) {
  return torch::ones({batch, 3, height, width}, options);
}

Image composite(const Image& canvas, const Image& stroke) {
  if (canvas.height() != stroke.height() || canvas.width() != stroke.width()) {
    throw InvalidArgument("composite: canvas and stroke shapes differ");
  }
  torch::NoGradGuard no_grad;
  return to_image(composite(to_tensor(canvas), to_tensor(stroke)));
}

int GridSpec::stride() const {
  const double s = tile_size * (1.0 - overlap_fraction);
  return static_cast<int>(std::lround(s));
}

void GridSpec::validate() const {
  if (tile_size < 1) throw InvalidArgument("grid tile_size must be >= 1");
  if (rows < 1 || cols < 1) throw InvalidArgument("grid rows and cols must be >= 1");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw InvalidArgument("grid overlap_fraction must lie in [0,1)");
  }
  const double s = tile_size * (1.0 - overlap_fraction);
  if (std::abs(s - std::round(s)) > 1e-9 || std::lround(s) < 1) {
    throw InvalidArgument("grid stride tile_size*(1-overlap) must be a positive integer, got " +
                          std::to_string(s));
  }
}

namespace {

// Unnormalized 1-D weight along one tile axis; ramps only on sides that touch
// a neighbouring tile.
std::vector<double> axis_ramp(int tile, int band, bool ramp_low, bool ramp_high) {
  std::vector<double> w(static_cast<std::size_t>(tile), 1.0);
  if (band <= 0) return w;
  for (int i = 0; i < tile; ++i) {
    if (ramp_low && i < band) w[i] *= (i + 0.5) / band;
    if (ramp_high && i >= tile - band) w[i] *= (tile - i - 0.5) / band;
  }
  return w;
}

torch::Tensor place(const torch::Tensor& tile, const GridSpec& layout, int row, int col) {
  const auto stride = layout.stride();
  const std::int64_t top = static_cast<std::int64_t>(row) * stride;
  const std::int64_t left = static_cast<std::int64_t>(col) * stride;
  const std::int64_t bottom = layout.output_height() - top - layout.tile_size;
  const std::int64_t right = layout.output_width() - left - layout.tile_size;
  return torch::constant_pad_nd(tile, {left, right, top, bottom}, 0.0);
}

torch::Tensor raw_weights(const GridSpec& layout) {
  const int band = layout.tile_size - layout.stride();
  std::vector<torch::Tensor> tiles;
  for (int r = 0; r < layout.rows; ++r) {
    const auto wy = axis_ramp(layout.tile_size, band, r > 0, r + 1 < layout.rows);
    for (int c = 0; c < layout.cols; ++c) {
      const auto wx = axis_ramp(layout.tile_size, band, c > 0, c + 1 < layout.cols);
      auto ty = torch::tensor(wy, torch::kFloat64).view({-1, 1});
      auto tx = torch::tensor(wx, torch::kFloat64).view({1, -1});
      tiles.push_back((ty * tx).unsqueeze(0));
    }
  }
  return torch::stack(tiles);  // [R*C, 1, T, T]
}

}  // namespace

torch::Tensor stitch_weights(const GridSpec& layout) {
  layout.validate();
  const auto raw = raw_weights(layout);
  auto total = torch::zeros({1, layout.output_height(), layout.output_width()}, torch::kFloat64);
  for (int r = 0; r < layout.rows; ++r)
    for (int c = 0; c < layout.cols; ++c) total = total + place(raw[r * layout.cols + c], layout, r, c);

  std::vector<torch::Tensor> normalized;
  const auto stride = layout.stride();
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      const auto window = total.narrow(1, static_cast<std::int64_t>(r) * stride, layout.tile_size)
                              .narrow(2, static_cast<std::int64_t>(c) * stride, layout.tile_size);
      normalized.push_back(raw[r * layout.cols + c] / window);
    }
  }
  return torch::stack(normalized).to(torch::kFloat32);
}

torch::Tensor stitch_weight_sum(const GridSpec& layout) {
  const auto w = stitch_weights(layout).to(torch::kFloat64);
  auto total = torch::zeros({1, layout.output_height(), layout.output_width()}, torch::kFloat64);
  for (int r = 0; r < layout.rows; ++r)
    for (int c = 0; c < layout.cols; ++c) total = total + place(w[r * layout.cols + c], layout, r, c);
  return total;
}

torch::Tensor stitch(const torch::Tensor& tiles, const GridSpec& layout) {
  layout.validate();
  if (tiles.dim() < 3 || tiles.size(0) != layout.tile_count() || tiles.size(-1) != layout.tile_size ||
      tiles.size(-2) != layout.tile_size) {
    throw InvalidArgument("stitch: expected " + std::to_string(layout.tile_count()) + " tiles of " +
                          std::to_string(layout.tile_size) + "x" + std::to_string(layout.tile_size));
  }
  const auto weights = stitch_weights(layout).to(tiles.options());
  torch::Tensor out;
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      const int k = r * layout.cols + c;
      auto w = weights[k][0];  // [T, T], broadcasts over leading dims
      auto placed = place(tiles[k] * w, layout, r, c);
      out = out.defined() ? out + placed : placed;
    }
  }
  return out;
}

Image stitch(std::span<const Image> tiles, const GridSpec& layout) {
  layout.validate();
  if (static_cast<int>(tiles.size()) != layout.tile_count()) {
    throw InvalidArgument("stitch: tile count does not match grid");
  }
  for (const auto& t : tiles) {
    if (t.height() != layout.tile_size || t.width() != layout.tile_size) {
      throw InvalidArgument("stitch: tile dimension mismatch");
    }
  }
  torch::NoGradGuard no_grad;
  return to_image(stitch(stack_images(tiles), layout));
}

}  // namespace strokeforge
