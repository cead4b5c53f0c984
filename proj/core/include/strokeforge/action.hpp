#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "strokeforge/error.hpp"
#include "strokeforge/rng.hpp"

namespace strokeforge {

inline constexpr std::size_t kActionDim = 12;
/// Continuous action plus the brush-lift flag.
inline constexpr std::size_t kDiscreteActionDim = 13;
inline constexpr int kDiscreteLevels = 10;

/// Index of each component inside the serialized 12-float layout.
enum class ActionField : std::size_t {
  kStartPressure = 0,
  kEndPressure = 1,
  kBrushSize = 2,
  kColorR = 3,
  kColorG = 4,
  kColorB = 5,
  kX0 = 6,
  kY0 = 7,
  kX1 = 8,
  kY1 = 9,
  kX2 = 10,
  kY2 = 11,
};

/// One brushstroke: pressures, brush size, RGB color and the three points of
/// a quadratic Bezier, all in [0,1]. Coordinates are normalized to the canvas.
struct Action {
  std::array<float, kActionDim> values{};

  float& operator[](ActionField f) { return values[static_cast<std::size_t>(f)]; }
  float operator[](ActionField f) const { return values[static_cast<std::size_t>(f)]; }
  float& operator[](std::size_t i) { return values[i]; }
  float operator[](std::size_t i) const { return values[i]; }

  float start_pressure() const { return (*this)[ActionField::kStartPressure]; }
  float end_pressure() const { return (*this)[ActionField::kEndPressure]; }
  float brush_size() const { return (*this)[ActionField::kBrushSize]; }

  bool operator==(const Action&) const = default;
};

/// Clamps every component to [0,1]. Throws on NaN or infinity.
Action clip_action(std::span<const float> raw);
Action clip_action(std::span<const double> raw);

/// Each component i.i.d. uniform in [0,1].
Action sample_action(Rng& rng);

/// Returns true when every component lies in [0,1].
bool is_valid(const Action& action);

/// Action with brush size and pressures restricted to a 10-level grid, plus a
/// lift flag that suppresses the stroke entirely.
struct DiscreteAction {
  Action base;
  int brush_size_level = 0;
  int start_pressure_level = 0;
  int end_pressure_level = 0;
  bool lift = false;

  bool operator==(const DiscreteAction&) const = default;
};

/// level k maps to k/9.
float level_value(int level);

/// Nearest grid level for a continuous value in [0,1].
int nearest_level(float value);

/// Continuous action with the discrete fields substituted by their grid values.
Action snap(const DiscreteAction& dv);

DiscreteAction sample_discrete_action(Rng& rng, double lift_probability = 0.5);

/// 13 floats: the snapped continuous action followed by the lift flag (0 or 1).
std::array<float, kDiscreteActionDim> encode_discrete(const DiscreteAction& dv);
DiscreteAction decode_discrete(std::span<const float> encoded);

}  // namespace strokeforge
