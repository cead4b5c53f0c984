#pragma once

#include <torch/torch.h>

#include <span>

#include "strokeforge/image.hpp"

namespace strokeforge {

/// Below this alpha the ink color is undefined and treated as white.
inline constexpr double kMatteEpsilon = 1e-6;

/// Decomposition of a stroke rendered on white into coverage and ink color.
/// For a stroke of shape [..., 3, H, W], alpha is [..., 1, H, W] and ink
/// matches the stroke shape.
struct Matte {
  torch::Tensor alpha;
  torch::Tensor ink;
};

/// alpha = max_c (1 - stroke_c); ink = 1 - (1 - stroke) / alpha where alpha
/// exceeds kMatteEpsilon, white elsewhere.
Matte alpha_from_white(const torch::Tensor& stroke);

/// Source-over of the stroke's matte onto the canvas:
/// (1 - alpha) * canvas + alpha * ink. Differentiable in both arguments.
torch::Tensor composite(const torch::Tensor& canvas, const torch::Tensor& stroke);

/// Composites strokes [T, ..., 3, H, W] in order onto `canvas`.
torch::Tensor composite_sequence(torch::Tensor canvas, const torch::Tensor& strokes);

torch::Tensor white_canvas(std::int64_t batch, std::int64_t height, std::int64_t width,
                           torch::TensorOptions options = torch::kFloat32);

Image composite(const Image& canvas, const Image& stroke);

/// Layout of overlapping square tiles stitched into one large image.
struct GridSpec {
  int tile_size = 64;
  double overlap_fraction = 0.5;
  int rows = 1;
  int cols = 1;

  /// tile_size * (1 - overlap_fraction); must be a positive integer.
  int stride() const;
  int output_height() const { return tile_size + (rows - 1) * stride(); }
  int output_width() const { return tile_size + (cols - 1) * stride(); }
  int tile_count() const { return rows * cols; }
  void validate() const;
};

/// Per-tile blending weights [rows*cols, 1, tile, tile] (row-major tile order).
/// Weights ramp linearly across every band shared with a neighbour and are
/// normalized so that the placed weights sum to one at every output pixel.
torch::Tensor stitch_weights(const GridSpec& layout);

/// Sum of the placed stitch weights: [1, output_height, output_width].
torch::Tensor stitch_weight_sum(const GridSpec& layout);

/// Blends tiles [rows*cols, ..., tile, tile] into [..., out_h, out_w].
torch::Tensor stitch(const torch::Tensor& tiles, const GridSpec& layout);

Image stitch(std::span<const Image> tiles, const GridSpec& layout);

}  // namespace strokeforge
