#include "strokeforge/dip.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "strokeforge/error.hpp"
#include "strokeforge/rng.hpp"
#include "strokeforge/tensor_image.hpp"

namespace strokeforge {

std::string to_string(DipObjective objective) {
  return objective == DipObjective::kMaximizeClass ? "maximize_class" : "content_loss";
}

std::string to_string(ColorConstraint constraint) {
  return constraint == ColorConstraint::kNone ? "none" : "grayscale";
}

ColorConstraint parse_color_constraint(const std::string& text) {
  if (text == "none") return ColorConstraint::kNone;
  if (text == "grayscale") return ColorConstraint::kGrayscale;
  throw InvalidArgument("unknown color constraint '" + text + "' (expected none or grayscale)");
}

void DipConfig::validate() const {
  if (n_strokes < 1) throw InvalidArgument("n_strokes must be >= 1");
  if (steps < 1) throw InvalidArgument("steps must be >= 1");
  if (!(step_size > 0.0)) throw InvalidArgument("step_size must be > 0");
  if (jitter_px < 0) throw InvalidArgument("jitter_px must be >= 0");
  if (ensemble.empty()) throw InvalidArgument("DIP needs at least one classifier");
  if (objective == DipObjective::kMaximizeClass) {
    for (const auto& member : ensemble) {
      if (class_id < 0 || class_id >= member.num_classes()) {
        throw InvalidArgument("class id " + std::to_string(class_id) + " is invalid for classifier '" +
                              member.info().arch_id + "' with " + std::to_string(member.num_classes()) + " classes");
      }
    }
  } else {
    if (!content_image) throw InvalidArgument("content objective needs a content image");
    for (const auto& member : ensemble) {
      const auto& tap = tap_id.empty() ? member.info().default_tap : tap_id;
      if (std::ranges::find(member.info().taps, tap) == member.info().taps.end()) {
        throw InvalidArgument("unknown feature tap '" + tap + "'");
      }
    }
  }
}

namespace {

constexpr std::int64_t kGrayParams = 10;

std::int64_t param_width(const DipConfig& cfg) {
  return cfg.color_constraint == ColorConstraint::kGrayscale ? kGrayParams : static_cast<std::int64_t>(kActionDim);
}

/// Sigmoid squashing; under the grayscale constraint one intensity feeds all three color channels.
torch::Tensor params_to_actions(const torch::Tensor& params, ColorConstraint constraint) {
  const auto s = torch::sigmoid(params);
  if (constraint == ColorConstraint::kNone) return s;
  using torch::indexing::Slice;
  const auto intensity = s.index({"...", Slice(3, 4)});
  return torch::cat({s.index({"...", Slice(0, 3)}), intensity, intensity, intensity, s.index({"...", Slice(4, kGrayParams)})},
                    -1);
}

/// Random values in [0,1] in parameter space (before the sigmoid is inverted).
torch::Tensor random_unit(std::int64_t count, std::int64_t width, Rng& rng) {
  auto out = torch::empty({count, width});
  auto* p = out.data_ptr<float>();
  for (std::int64_t i = 0; i < count * width; ++i) p[i] = static_cast<float>(rng.uniform());
  return out;
}

int tile_count(const DipConfig& cfg) { return cfg.grid ? cfg.grid->tile_count() : 1; }

std::optional<GridSpec> effective_grid(const DipConfig& cfg, int tile_size) {
  if (!cfg.grid) return std::nullopt;
  GridSpec g = *cfg.grid;
  g.tile_size = tile_size;
  g.validate();
  return g;
}

torch::Tensor jitter(const torch::Tensor& canvas, int px, Rng& rng) {
  if (px == 0) return canvas;
  const auto dx = rng.uniform_int(0, 2 * px);
  const auto dy = rng.uniform_int(0, 2 * px);
  const auto padded = torch::constant_pad_nd(canvas, {px, px, px, px}, 1.0);
  return padded.slice(2, dy, dy + canvas.size(2)).slice(3, dx, dx + canvas.size(3));
}

struct ContentTargets {
  std::vector<torch::Tensor> features;
  std::vector<std::string> taps;
};

ContentTargets content_targets(const DipConfig& cfg) {
  ContentTargets t;
  if (cfg.objective != DipObjective::kContentLoss) return t;
  torch::NoGradGuard no_grad;
  const auto content = to_tensor(*cfg.content_image).unsqueeze(0);
  for (const auto& member : cfg.ensemble) {
    const auto tap = cfg.tap_id.empty() ? member.info().default_tap : cfg.tap_id;
    t.taps.push_back(tap);
    t.features.push_back(extract_features(member, content, tap));
  }
  return t;
}

torch::Tensor objective_with(const DipConfig& cfg, const ContentTargets& targets, const torch::Tensor& canvases) {
  torch::Tensor total;
  for (std::size_t m = 0; m < cfg.ensemble.size(); ++m) {
    torch::Tensor value;
    if (cfg.objective == DipObjective::kMaximizeClass) {
      value = class_logit(cfg.ensemble[m], canvases, cfg.class_id);
    } else {
      const auto f = extract_features(cfg.ensemble[m], canvases, targets.taps[m]);
      value = (f - targets.features[m]).pow(2).flatten(1).mean(1);
    }
    total = m == 0 ? value : total + value;
  }
  return total / static_cast<double>(cfg.ensemble.size());
}

void check_content_size(const DipConfig& cfg, int height, int width) {
  if (cfg.objective != DipObjective::kContentLoss) return;
  if (cfg.content_image->height() != height || cfg.content_image->width() != width) {
    throw InvalidArgument("content image is " + std::to_string(cfg.content_image->width()) + "x" +
                          std::to_string(cfg.content_image->height()) + " but the canvas is " + std::to_string(width) +
                          "x" + std::to_string(height));
  }
}

DipResult optimize(const PainterCheckpoint& painter, const DipConfig& cfg) {
  cfg.validate();
  if (painter.action_dim() != static_cast<int>(kActionDim)) throw InvalidArgument("DIP needs a continuous-action painter");
  const auto grid = effective_grid(cfg, painter.canvas_size());
  const int out_h = grid ? grid->output_height() : painter.canvas_size();
  const int out_w = grid ? grid->output_width() : painter.canvas_size();
  check_content_size(cfg, out_h, out_w);

  PainterCheckpoint frozen = painter.clone();
  nn::set_requires_grad(*frozen.net(), false);
  const auto targets = content_targets(cfg);
  const bool maximize = cfg.objective == DipObjective::kMaximizeClass;

  Rng init_rng(mix_seed(cfg.seed, 1));
  Rng jitter_rng(mix_seed(cfg.seed, 2));
  const int tiles = tile_count(cfg);
  const auto width = param_width(cfg);
  const auto unit = random_unit(static_cast<std::int64_t>(tiles) * cfg.n_strokes, width, init_rng)
                        .clamp(0.02, 0.98)
                        .view({tiles, cfg.n_strokes, width});
  auto params = torch::logit(unit).detach().requires_grad_(true);
  torch::optim::Adam opt({params}, torch::optim::AdamOptions(cfg.step_size));

  const auto evaluate = [&](const torch::Tensor& p) {
    torch::NoGradGuard no_grad;
    return objective_with(cfg, targets, render_tiles(frozen, params_to_actions(p, cfg.color_constraint), grid))
        .item<double>();
  };

  DipResult result;
  result.initial_objective = evaluate(params);
  const int jitter_px = maximize ? cfg.jitter_px : 0;
  for (int step = 0; step < cfg.steps; ++step) {
    const auto canvas = render_tiles(frozen, params_to_actions(params, cfg.color_constraint), grid);
    const auto value = objective_with(cfg, targets, jitter(canvas, jitter_px, jitter_rng)).mean();
    nn::check_finite(value, "DIP objective", step);
    const auto loss = maximize ? -value : value;
    opt.zero_grad();
    loss.backward();
    opt.step();
    result.trace.push_back(value.item<double>());
  }

  torch::NoGradGuard no_grad;
  const auto actions = params_to_actions(params, cfg.color_constraint);
  for (int t = 0; t < tiles; ++t) result.actions.push_back(to_sequence(actions[t]));
  result.canvas = to_image(render_tiles(frozen, actions, grid)[0]);
  result.final_objective = evaluate(params);
  return result;
}

}  // namespace

torch::Tensor render_tiles(const PainterCheckpoint& painter, const torch::Tensor& actions,
                           const std::optional<GridSpec>& grid) {
  const auto canvases = paint_sequence(painter, actions);
  if (!grid) {
    if (actions.size(0) != 1) throw InvalidArgument("several tiles need a grid");
    return canvases;
  }
  if (actions.size(0) != grid->tile_count()) throw InvalidArgument("tile count does not match the grid");
  return stitch(canvases, *grid).unsqueeze(0);
}

torch::Tensor dip_objective(const DipConfig& cfg, const torch::Tensor& canvases) {
  cfg.validate();
  if (cfg.objective == DipObjective::kContentLoss) {
    check_content_size(cfg, static_cast<int>(canvases.size(2)), static_cast<int>(canvases.size(3)));
  }
  torch::NoGradGuard no_grad;
  return objective_with(cfg, content_targets(cfg), canvases);
}

DipResult visualize_class(const PainterCheckpoint& painter, const DipConfig& cfg) {
  if (cfg.objective != DipObjective::kMaximizeClass) throw InvalidArgument("visualize_class needs the maximize_class objective");
  return optimize(painter, cfg);
}

DipResult intrinsic_style_transfer(const PainterCheckpoint& painter, const DipConfig& cfg) {
  if (cfg.objective != DipObjective::kContentLoss) throw InvalidArgument("intrinsic_style_transfer needs the content_loss objective");
  return optimize(painter, cfg);
}

double RandomBaseline::percentile(double p) const {
  if (values.empty()) throw InvalidArgument("empty baseline");
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidArgument("percentile must lie in [0, 100]");
  std::vector<double> sorted = values;
  std::ranges::sort(sorted);
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

RandomBaseline random_baseline(const PainterCheckpoint& painter, const DipConfig& cfg, int n_samples) {
  cfg.validate();
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  const auto grid = effective_grid(cfg, painter.canvas_size());
  const auto targets = content_targets(cfg);
  if (cfg.objective == DipObjective::kContentLoss) {
    check_content_size(cfg, grid ? grid->output_height() : painter.canvas_size(),
                       grid ? grid->output_width() : painter.canvas_size());
  }
  torch::NoGradGuard no_grad;
  Rng rng(mix_seed(cfg.seed, 3));
  const int tiles = tile_count(cfg);
  const auto width = param_width(cfg);
  RandomBaseline out;
  constexpr int kChunk = 64;
  for (int start = 0; start < n_samples; start += kChunk) {
    const int count = std::min(kChunk, n_samples - start);
    std::vector<torch::Tensor> canvases;
    for (int i = 0; i < count; ++i) {
      const auto unit = random_unit(static_cast<std::int64_t>(tiles) * cfg.n_strokes, width, rng)
                            .view({tiles, cfg.n_strokes, width});
      canvases.push_back(render_tiles(painter, params_to_actions(torch::logit(unit.clamp(1e-6, 1.0 - 1e-6)),
                                                                 cfg.color_constraint),
                                      grid));
    }
    const auto values = objective_with(cfg, targets, torch::cat(canvases)).to(torch::kFloat64).contiguous();
    const auto* p = values.data_ptr<double>();
    out.values.insert(out.values.end(), p, p + values.numel());
  }
  out.mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) / static_cast<double>(out.values.size());
  out.min = *std::ranges::min_element(out.values);
  out.max = *std::ranges::max_element(out.values);
  return out;
}

void write_dip_trace(const DipResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,objective\n";
  out.precision(10);
  for (std::size_t i = 0; i < result.trace.size(); ++i) out << i << ',' << result.trace[i] << '\n';
}

}  // namespace strokeforge
