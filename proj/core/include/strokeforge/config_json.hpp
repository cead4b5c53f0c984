#pragma once

// JSON (de)serialization for configuration structs. Missing keys keep their
// defaults, so partial config files are valid.

#include <json.hpp>

#include "strokeforge/agent.hpp"
#include "strokeforge/canvas.hpp"
#include "strokeforge/dip.hpp"
#include "strokeforge/oracle.hpp"
#include "strokeforge/painter.hpp"
#include "strokeforge/vision.hpp"

namespace strokeforge {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OracleConfig, canvas_size, dab_spacing_factor, max_radius_px,
                                                min_radius_px, noise_scale, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(VaePainterConfig, latent_dim, kl_weight, vae_epochs,
                                                mapper_epochs, learning_rate, batch_size, seed, allow_discrete)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GanPainterConfig, critic_iters_per_gen, gradient_penalty_weight,
                                                epochs, learning_rate, batch_size, aux_pixel_weight, warmup_epochs,
                                                warmup_learning_rate, seed,
                                                allow_discrete)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GridSpec, tile_size, overlap_fraction, rows, cols)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AgentConfig, n_strokes, recurrent_state_dim, encoder_channels,
                                                embedding_dim, canvas_feedback, adversarial_loss_weight,
                                                feature_match_weight, gradient_penalty_weight, critic_iters,
                                                critic_channels, learning_rate, critic_learning_rate, batch_size,
                                                epochs, augment_shift_px, augment_brightness, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PreconditionConfig, learning_rate, batch_size, max_epochs,
                                                target_mse, seed)
NLOHMANN_JSON_SERIALIZE_ENUM(StrokeLossSchedule::Kind, {{StrokeLossSchedule::Kind::kLinearDecay, "linear_decay"},
                                                        {StrokeLossSchedule::Kind::kConstant, "constant"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(StrokeLossSchedule, kind, start, end, decay_fraction, constant)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ClassifierConfig, arch, input_size, epochs, learning_rate, batch_size,
                                                heldout_fraction, seed)

/// Scalar DIP settings; the ensemble and content image are not serialized.
inline nlohmann::json dip_settings_json(const DipConfig& cfg) {
  nlohmann::json j;
  j["n_strokes"] = cfg.n_strokes;
  j["steps"] = cfg.steps;
  j["step_size"] = cfg.step_size;
  j["objective"] = to_string(cfg.objective);
  j["class_id"] = cfg.class_id;
  j["tap_id"] = cfg.tap_id;
  j["jitter_px"] = cfg.jitter_px;
  j["seed"] = cfg.seed;
  j["color_constraint"] = to_string(cfg.color_constraint);
  j["grid"] = cfg.grid ? nlohmann::json(*cfg.grid) : nlohmann::json();
  return j;
}

inline void apply_dip_settings(const nlohmann::json& j, DipConfig& cfg) {
  cfg.n_strokes = j.value("n_strokes", cfg.n_strokes);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.step_size = j.value("step_size", cfg.step_size);
  cfg.class_id = j.value("class_id", cfg.class_id);
  cfg.tap_id = j.value("tap_id", cfg.tap_id);
  cfg.jitter_px = j.value("jitter_px", cfg.jitter_px);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("color_constraint")) cfg.color_constraint = parse_color_constraint(j.at("color_constraint").get<std::string>());
  if (j.contains("grid")) {
    if (j.at("grid").is_null()) {
      cfg.grid.reset();
    } else {
      cfg.grid = j.at("grid").get<GridSpec>();
    }
  }
}

}  // namespace strokeforge
