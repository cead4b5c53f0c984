#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "strokeforge/agent.hpp"
#include "strokeforge/canvas.hpp"
#include "strokeforge/image.hpp"
#include "strokeforge/painter.hpp"
#include "strokeforge/vision.hpp"

namespace strokeforge {

enum class DipObjective { kMaximizeClass, kContentLoss };
enum class ColorConstraint { kNone, kGrayscale };

/// Optimization of raw stroke parameters through a frozen painter against
/// frozen classifiers.
struct DipConfig {
  int n_strokes = 16;
  int steps = 500;
  double step_size = 0.05;
  DipObjective objective = DipObjective::kMaximizeClass;
  int class_id = 0;
  /// Empty selects each classifier's default tap.
  std::string tap_id;
  std::optional<Image> content_image;
  std::vector<ClassifierCheckpoint> ensemble;
  /// Rows/cols/overlap of a multi-canvas run; tile_size is taken from the painter.
  std::optional<GridSpec> grid;
  /// Random translation before the classifier (class objective only); 0 disables.
  int jitter_px = 2;
  std::uint64_t seed = 0;
  ColorConstraint color_constraint = ColorConstraint::kNone;

  void validate() const;
};

std::string to_string(DipObjective objective);
std::string to_string(ColorConstraint constraint);
ColorConstraint parse_color_constraint(const std::string& text);

struct DipResult {
  /// One sequence per tile (a single entry without a grid).
  std::vector<StrokeSequence> actions;
  Image canvas;
  /// Objective value at every step, as optimized (with jitter if enabled).
  std::vector<double> trace;
  /// Objective of the initial and final canvas evaluated without jitter.
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

DipResult visualize_class(const PainterCheckpoint& painter, const DipConfig& cfg);
DipResult intrinsic_style_transfer(const PainterCheckpoint& painter, const DipConfig& cfg);

/// Objective values of random stroke sequences (uniform actions; grayscale
/// colors under the grayscale constraint), evaluated without jitter.
struct RandomBaseline {
  std::vector<double> values;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;

  /// Linear-interpolated percentile, p in [0, 100].
  double percentile(double p) const;
};

RandomBaseline random_baseline(const PainterCheckpoint& painter, const DipConfig& cfg, int n_samples);

/// Canvas painted from per-tile sequences; stitched when a grid is given.
torch::Tensor render_tiles(const PainterCheckpoint& painter, const torch::Tensor& actions,
                           const std::optional<GridSpec>& grid);

/// Objective of canvases [N, 3, H, W] without jitter (one value per canvas).
torch::Tensor dip_objective(const DipConfig& cfg, const torch::Tensor& canvases);

/// Writes `step,objective` lines.
void write_dip_trace(const DipResult& result, const std::filesystem::path& path);

}  // namespace strokeforge
