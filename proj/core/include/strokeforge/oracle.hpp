#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "strokeforge/action.hpp"
#include "strokeforge/image.hpp"

namespace strokeforge {

/// Parameters of the reference dab rasterizer.
struct OracleConfig {
  int canvas_size = 64;
  /// Distance between consecutive dab centers as a fraction of the dab radius.
  double dab_spacing_factor = 0.5;
  double max_radius_px = 8.0;
  double min_radius_px = 0.5;
  /// Std-dev of per-dab center jitter (px) and relative radius jitter; 0 disables.
  double noise_scale = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const OracleConfig&) const = default;
};

/// Defaults with max_radius_px scaled from the 64 px reference to canvas_size.
OracleConfig scaled_oracle_config(int canvas_size);

/// Number of uniform Bezier parameter samples used to approximate arc length.
inline constexpr int kArcLengthSamples = 512;

/// Area of the intersection of a disc with an axis-aligned rectangle.
double disc_rect_coverage(double cx, double cy, double radius, double x0, double y0,
                          double x1, double y1);

/// Renders one stroke on a white canvas: antialiased dabs stamped along the
/// quadratic Bezier, radius and opacity driven by the interpolated pressure,
/// composited source-over. Color is quantized to 8 bits.
Image render_stroke(const Action& action, const OracleConfig& cfg);

/// Renders with brush size and pressures snapped to their levels; a lifted
/// brush yields a blank canvas.
Image render_stroke_discrete(const DiscreteAction& dv, const OracleConfig& cfg);

/// Anything that maps an action to a stroke image. The built-in rasterizer and
/// external painting programs both implement this.
class StrokeRenderer {
 public:
  virtual ~StrokeRenderer() = default;
  virtual Image render(const Action& action) = 0;
  virtual int canvas_size() const = 0;
};

class DabOracle final : public StrokeRenderer {
 public:
  explicit DabOracle(OracleConfig cfg);
  Image render(const Action& action) override { return render_stroke(action, cfg_); }
  int canvas_size() const override { return cfg_.canvas_size; }
  const OracleConfig& config() const { return cfg_; }

 private:
  OracleConfig cfg_;
};

/// Adapter for an external painting program. Per stroke the program receives
/// 12 little-endian float32 values on stdin and must answer with exactly
/// canvas_size*canvas_size*3 bytes of row-major RGB on stdout. The process is
/// started once and kept alive for the adapter's lifetime.
class ExternalOracle final : public StrokeRenderer {
 public:
  ExternalOracle(std::vector<std::string> argv, int canvas_size);
  ~ExternalOracle() override;
  ExternalOracle(const ExternalOracle&) = delete;
  ExternalOracle& operator=(const ExternalOracle&) = delete;

  Image render(const Action& action) override;
  int canvas_size() const override { return canvas_size_; }

 private:
  int canvas_size_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

}  // namespace strokeforge
