#include "strokeforge/action.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace strokeforge {
namespace {

template <typename T>
Action clip_impl(std::span<const T> raw) {
  if (raw.size() != kActionDim) {
    throw InvalidArgument("action must have " + std::to_string(kActionDim) +
                          " components, got " + std::to_string(raw.size()));
  }
  Action out;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    if (!std::isfinite(static_cast<double>(raw[i]))) {
      throw InvalidArgument("non-finite action component");
    }
    out[i] = static_cast<float>(std::clamp(static_cast<double>(raw[i]), 0.0, 1.0));
  }
  return out;
}

}  // namespace

Action clip_action(std::span<const float> raw) { return clip_impl(raw); }
Action clip_action(std::span<const double> raw) { return clip_impl(raw); }

Action sample_action(Rng& rng) {
  Action a;
  for (auto& v : a.values) v = static_cast<float>(rng.uniform());
  return a;
}

bool is_valid(const Action& action) {
  return std::ranges::all_of(action.values,
                             [](float v) { return std::isfinite(v) && v >= 0.0F && v <= 1.0F; });
}

float level_value(int level) {
  if (level < 0 || level >= kDiscreteLevels) {
    throw InvalidArgument("discrete level " + std::to_string(level) + " outside 0..9");
  }
  return static_cast<float>(level) / static_cast<float>(kDiscreteLevels - 1);
}

int nearest_level(float value) {
  const auto scaled = std::lround(std::clamp(value, 0.0F, 1.0F) * (kDiscreteLevels - 1));
  return static_cast<int>(scaled);
}

Action snap(const DiscreteAction& dv) {
  Action a = dv.base;
  a[ActionField::kBrushSize] = level_value(dv.brush_size_level);
  a[ActionField::kStartPressure] = level_value(dv.start_pressure_level);
  a[ActionField::kEndPressure] = level_value(dv.end_pressure_level);
  return a;
}

DiscreteAction sample_discrete_action(Rng& rng, double lift_probability) {
  DiscreteAction dv;
  dv.base = sample_action(rng);
  dv.brush_size_level = static_cast<int>(rng.uniform_int(0, kDiscreteLevels - 1));
  dv.start_pressure_level = static_cast<int>(rng.uniform_int(0, kDiscreteLevels - 1));
  dv.end_pressure_level = static_cast<int>(rng.uniform_int(0, kDiscreteLevels - 1));
  dv.lift = rng.uniform() < lift_probability;
  dv.base = snap(dv);
  return dv;
}

std::array<float, kDiscreteActionDim> encode_discrete(const DiscreteAction& dv) {
  std::array<float, kDiscreteActionDim> out{};
  const Action snapped = snap(dv);
  std::ranges::copy(snapped.values, out.begin());
  out[kActionDim] = dv.lift ? 1.0F : 0.0F;
  return out;
}

DiscreteAction decode_discrete(std::span<const float> encoded) {
  if (encoded.size() != kDiscreteActionDim) {
    throw InvalidArgument("discrete action must have 13 components");
  }
  DiscreteAction dv;
  dv.base = clip_action(encoded.first(kActionDim));
  dv.brush_size_level = nearest_level(dv.base.brush_size());
  dv.start_pressure_level = nearest_level(dv.base.start_pressure());
  dv.end_pressure_level = nearest_level(dv.base.end_pressure());
  dv.lift = encoded[kActionDim] >= 0.5F;
  return dv;
}

}  // namespace strokeforge
