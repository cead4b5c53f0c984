#include "strokeforge/cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "strokeforge/agent.hpp"
#include "strokeforge/cli/manifest.hpp"
#include "strokeforge/cli/report.hpp"
#include "strokeforge/config_json.hpp"
#include "strokeforge/dataset.hpp"
#include "strokeforge/dip.hpp"
#include "strokeforge/error.hpp"
#include "strokeforge/image_set.hpp"
#include "strokeforge/oracle.hpp"
#include "strokeforge/painter.hpp"
#include "strokeforge/tensor_image.hpp"
#include "strokeforge/vision.hpp"

namespace strokeforge::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
void override_with(T& field, const std::optional<T>& value) {
  if (value) field = *value;
}

/// Config file contents; a run manifest contributes its recorded config.
json load_config(const std::optional<std::string>& path) {
  if (!path) return json::object();
  std::ifstream in(*path);
  if (!in) throw UsageError("cannot open config file " + *path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file " + *path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  if (j.value("format", "") == "strokeforge-manifest") return j.value("config", json::object());
  return j;
}

template <typename T>
T section(const json& config, const std::string& key, T fallback) {
  if (!config.contains(key)) return fallback;
  try {
    return config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

void check_output(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw Error("refusing to overwrite existing output " + path.string() + " (pass --force)");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw Error(what + " " + path.string() + " does not exist");
}

std::pair<int, int> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    const int rows = std::stoi(text.substr(0, x));
    const int cols = std::stoi(text.substr(x + 1));
    if (rows < 1 || cols < 1) throw std::invalid_argument(text);
    return {rows, cols};
  } catch (const std::exception&) {
    throw UsageError("grid must look like RxC, got '" + text + "'");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<float> parse_floats(const std::string& text) {
  std::vector<float> out;
  for (const auto& item : split_list(text)) {
    try {
      out.push_back(std::stof(item));
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
  }
  return out;
}

/// Run directory plus manifest bookkeeping for one command.
class Run {
 public:
  Run(std::string command, const std::vector<std::string>& argv, json config)
      : start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.argv = argv;
    manifest_.config = std::move(config);
    manifest_.started_at = utc_timestamp(std::chrono::system_clock::now(), false);
    manifest_.versions = library_versions();
    dir_ = create_run_dir(manifest_.command, manifest_.config, runs_root());
    log_info("run directory " + dir_.string());
  }

  const fs::path& dir() const { return dir_; }
  RunManifest& manifest() { return manifest_; }

  fs::path artifact(const std::string& role, const std::string& file) {
    manifest_.artifacts[role] = file;
    return dir_ / file;
  }

  void output(const std::string& role, const fs::path& path) { manifest_.outputs[role] = path.string(); }

  void finish(const std::string& status = "ok", const std::string& error = {}) {
    manifest_.status = status;
    manifest_.error = error;
    manifest_.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_.write(dir_);
  }

 private:
  RunManifest manifest_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
};

/// Runs body inside a run directory, recording failures in the manifest.
int with_run(Run& run, const std::function<void(Run&)>& body) {
  try {
    body(run);
  } catch (const std::exception& e) {
    run.finish("failed", e.what());
    throw;
  }
  run.finish();
  return kExitOk;
}

json painter_metrics_json(const PainterMetrics& m) {
  return {{"n", m.n},
          {"mse", m.mse},
          {"blank_baseline_mse", m.blank_baseline_mse},
          {"mse_over_baseline", m.blank_baseline_mse > 0 ? m.mse / m.blank_baseline_mse : 0.0},
          {"high_texture_count", m.high_texture_count},
          {"mse_high_texture", m.mse_high_texture},
          {"blank_baseline_mse_high_texture", m.blank_baseline_mse_high_texture},
          {"laplacian_painter_high_texture", m.laplacian_painter_high_texture},
          {"laplacian_oracle_high_texture", m.laplacian_oracle_high_texture}};
}

/// Rows of (target | neural canvas | oracle canvas).
Image triplet_grid(const torch::Tensor& targets, const torch::Tensor& neural, const torch::Tensor& oracle) {
  std::vector<Image> rows;
  for (std::int64_t i = 0; i < targets.size(0); ++i) {
    std::array<Image, 3> cells{to_image(targets[i]), to_image(neural[i]), to_image(oracle[i])};
    rows.push_back(hconcat(cells, 2));
  }
  return vconcat(rows, 4);
}

struct OracleFlags {
  std::optional<double> max_radius;
  std::optional<double> min_radius;
  std::optional<double> spacing;

  void add(CLI::App* app) {
    app->add_option("--max-radius", max_radius, "Oracle dab radius at full size and pressure (px)");
    app->add_option("--min-radius", min_radius, "Oracle minimum dab radius (px)");
    app->add_option("--spacing", spacing, "Oracle dab spacing as a fraction of the radius");
  }

  OracleConfig resolve(const json& config, int canvas_size) const {
    OracleConfig cfg = section(config, "oracle", scaled_oracle_config(canvas_size));
    cfg.canvas_size = canvas_size;
    override_with(cfg.max_radius_px, max_radius);
    override_with(cfg.min_radius_px, min_radius);
    override_with(cfg.dab_spacing_factor, spacing);
    cfg.validate();
    return cfg;
  }
};

// ---------------------------------------------------------------- gen-dataset

struct GenDataset {
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_scale;
  bool discrete = false;
  std::optional<int> canvas_size;
  std::optional<int> workers;
  OracleFlags oracle;
  std::string out;
  std::optional<std::string> config;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("gen-dataset", "Render (action, stroke) pairs with the stroke oracle");
    app->add_option("--n", n, "Number of records");
    app->add_option("--seed", seed, "Oracle seed");
    app->add_option("--noise-scale", noise_scale, "Per-dab jitter scale (0 = deterministic)");
    app->add_flag("--discrete", discrete, "Sample discrete-level actions with a lift flag");
    app->add_option("--canvas-size", canvas_size, "Canvas size in pixels");
    app->add_option("--workers", workers, "Rendering threads");
    oracle.add(app);
    app->add_option("--out", out, "Output dataset file")->required();
    app->add_option("--config", config, "JSON config file or run manifest");
    app->add_flag("--force", force, "Overwrite an existing output");
  }

  int run(const std::vector<std::string>& argv) {
    const json file = load_config(config);
    const int size = canvas_size.value_or(section(file, "oracle", json::object()).value("canvas_size", 64));
    OracleConfig cfg = oracle.resolve(file, size);
    if (!file.contains("oracle") && canvas_size && !oracle.max_radius) cfg.max_radius_px = 8.0 * size / 64.0;
    override_with(cfg.seed, seed);
    override_with(cfg.noise_scale, noise_scale);
    cfg.validate();
    const auto count = n ? *n : section<std::uint64_t>(file, "n", 0);
    if (count == 0) throw UsageError("--n must be given and >= 1");
    const bool disc = discrete || section(file, "discrete", false);
    const int threads = workers.value_or(section(file, "workers", 1));
    if (threads < 1) throw UsageError("--workers must be >= 1");
    check_output(out, force);

    const json resolved{{"n", count}, {"discrete", disc}, {"workers", threads}, {"oracle", cfg}};
    Run r("gen-dataset", argv, resolved);
    return with_run(r, [&](Run& run) {
      run.manifest().seeds["oracle"] = cfg.seed;
      generate_dataset_file(count, cfg, disc, out, threads);
      run.output("dataset", out);
      run.manifest().metrics = {{"records", count}, {"fingerprint", file_fingerprint(out)},
                                {"bytes", fs::file_size(out)}};
      std::vector<Image> preview;
      const auto ds = read_dataset(out);
      for (std::size_t i = 0; i < std::min<std::size_t>(ds.size(), 16); ++i) preview.push_back(ds.image(i));
      write_png(hconcat(preview, 2), run.artifact("preview", "preview.png"));
    });
  }

};

// -------------------------------------------------------------- train-painter

struct TrainPainter {
  std::string kind;
  std::string dataset;
  std::string out;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> mapper_epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> aux_pixel_weight;
  std::optional<int> warmup_epochs;
  std::optional<int> latent_dim;
  std::optional<double> kl_weight;
  std::optional<int> critic_iters;
  std::optional<double> gp_weight;
  bool allow_discrete = false;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train-painter", "Train a VAE or GAN neural painter on a dataset file");
    app->add_option("--kind", kind, "vae or gan")->required()->check(CLI::IsMember({"vae", "gan"}));
    app->add_option("--dataset", dataset, "Dataset file")->required();
    app->add_option("--out", out, "Output checkpoint")->required();
    app->add_option("--config", config, "JSON config file or run manifest");
    app->add_option("--seed", seed, "Training seed");
    app->add_option("--epochs", epochs, "GAN epochs, or VAE stage-one epochs");
    app->add_option("--mapper-epochs", mapper_epochs, "VAE stage-two epochs");
    app->add_option("--batch-size", batch_size);
    app->add_option("--lr", learning_rate, "Learning rate");
    app->add_option("--aux-pixel-weight", aux_pixel_weight, "GAN auxiliary pixel loss weight");
    app->add_option("--warmup-epochs", warmup_epochs, "GAN pixel-regression epochs before adversarial training");
    app->add_option("--latent-dim", latent_dim, "VAE latent size");
    app->add_option("--kl-weight", kl_weight, "VAE KL weight");
    app->add_option("--critic-iters", critic_iters, "GAN critic iterations per generator step");
    app->add_option("--gp-weight", gp_weight, "GAN gradient penalty weight");
    app->add_flag("--allow-discrete", allow_discrete, "Accept discrete-variant datasets");
    app->add_flag("--force", force, "Overwrite an existing output");
  }

  int run(const std::vector<std::string>& argv) {
    const json file = load_config(config);
    const auto painter_kind = parse_painter_kind(kind);
    json resolved{{"kind", kind}};
    VaePainterConfig vae = section(file, "vae", VaePainterConfig{});
    GanPainterConfig gan = section(file, "gan", GanPainterConfig{});
    if (painter_kind == PainterKind::kVae) {
      override_with(vae.seed, seed);
      override_with(vae.vae_epochs, epochs);
      override_with(vae.mapper_epochs, mapper_epochs);
      override_with(vae.batch_size, batch_size);
      override_with(vae.learning_rate, learning_rate);
      override_with(vae.latent_dim, latent_dim);
      override_with(vae.kl_weight, kl_weight);
      vae.allow_discrete = vae.allow_discrete || allow_discrete;
      vae.validate();
      resolved["vae"] = vae;
    } else {
      override_with(gan.seed, seed);
      override_with(gan.epochs, epochs);
      override_with(gan.batch_size, batch_size);
      override_with(gan.learning_rate, learning_rate);
      override_with(gan.aux_pixel_weight, aux_pixel_weight);
      override_with(gan.warmup_epochs, warmup_epochs);
      override_with(gan.critic_iters_per_gen, critic_iters);
      override_with(gan.gradient_penalty_weight, gp_weight);
      gan.allow_discrete = gan.allow_discrete || allow_discrete;
      gan.validate();
      resolved["gan"] = gan;
    }
    require_file(dataset, "dataset");
    check_output(out, force);

    Run r("train-painter", argv, resolved);
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("dataset", dataset);
      const auto fingerprint = run.manifest().inputs["dataset"]["fingerprint"].get<std::string>();
      const auto ds = read_dataset(dataset);
      auto result = painter_kind == PainterKind::kVae ? train_vae_painter(ds, vae, fingerprint)
                                                      : train_gan_painter(ds, gan, fingerprint);
      run.manifest().seeds["training"] = painter_kind == PainterKind::kVae ? vae.seed : gan.seed;
      result.painter.save(out);
      run.output("checkpoint", out);
      result.trace.write_csv(run.artifact("trace", "trace.csv"));
      run.manifest().metrics = {{"heldout_mse", result.painter.metadata().heldout_mse},
                                {"records", ds.size()}};
    });
  }
};

// --------------------------------------------------------------- eval-painter

struct EvalPainter {
  std::string ckpt;
  int n = 400;
  std::optional<std::string> report;
  std::uint64_t seed = 1234;
  OracleFlags oracle;
  std::optional<std::string> config;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("eval-painter", "Compare a painter with the noise-free oracle");
    app->add_option("--ckpt", ckpt, "Painter checkpoint")->required();
    app->add_option("--n", n, "Number of sampled actions");
    app->add_option("--report", report, "Directory for an HTML report bundle");
    app->add_option("--seed", seed, "Action sampling seed");
    oracle.add(app);
    app->add_option("--config", config, "JSON config file or run manifest");
    app->add_flag("--force", force, "Overwrite an existing report directory");
  }

  int run(const std::vector<std::string>& argv) {
    const json file = load_config(config);
    require_file(ckpt, "checkpoint");
    const auto painter = PainterCheckpoint::load(ckpt);
    const OracleConfig cfg = oracle.resolve(file, painter.canvas_size());
    if (n < 1) throw UsageError("--n must be >= 1");
    if (report && fs::exists(*report) && !force) throw Error("report directory " + *report + " already exists");
    const json resolved{{"n", n}, {"seed", seed}, {"oracle", cfg}};
    Run r("eval-painter", argv, resolved);
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("painter", ckpt);
      run.manifest().seeds["actions"] = seed;
      const auto m = evaluate_painter(painter, cfg, n, seed);
      write_png(m.comparison_grid, run.artifact("comparison_grid", "comparison_grid.png"));
      run.manifest().metrics = painter_metrics_json(m);
      log_info("painter mse=" + std::to_string(m.mse) + " blank baseline=" + std::to_string(m.blank_baseline_mse));
      if (report) {
        run.manifest().write(run.dir());
        run.output("report", *report);
        build_report(run.dir(), *report);
      }
    });
  }
};

// ---------------------------------------------------------------------- sweep

struct Sweep {
  std::string ckpt;
  int dim = 0;
  int steps = 10;
  std::string out;
  std::optional<std::string> base;
  OracleFlags oracle;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("sweep", "Sweep one action component through a painter");
    app->add_option("--ckpt", ckpt, "Painter checkpoint")->required();
    app->add_option("--dim", dim, "Action component index")->required();
    app->add_option("--steps", steps, "Number of sweep steps");
    app->add_option("--out", out, "Output strip PNG")->required();
    app->add_option("--base", base, "Comma-separated base action (12 or 13 values)");
    oracle.add(app);
    app->add_flag("--force", force, "Overwrite an existing output");
  }

  int run(const std::vector<std::string>& argv) {
    require_file(ckpt, "checkpoint");
    const auto painter = PainterCheckpoint::load(ckpt);
    std::vector<float> b = base ? parse_floats(*base)
                                : std::vector<float>{1.0F, 1.0F, 0.6F, 0.0F, 0.0F, 0.0F, 0.2F, 0.5F, 0.5F, 0.2F, 0.8F, 0.5F};
    if (!base && painter.discrete()) b.push_back(0.0F);
    if (static_cast<int>(b.size()) != painter.action_dim()) {
      throw UsageError("--base needs " + std::to_string(painter.action_dim()) + " values");
    }
    const OracleConfig cfg = oracle.resolve(json::object(), painter.canvas_size());
    check_output(out, force);
    const json resolved{{"dim", dim}, {"steps", steps}, {"base", b}, {"oracle", cfg}};
    Run r("sweep", argv, resolved);
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("painter", ckpt);
      const auto result = action_sweep(painter, b, dim, steps);
      write_png(result.strip, out);
      run.output("strip", out);
      write_png(result.strip, run.artifact("sweep_strip", "sweep_strip.png"));
      std::ofstream csv(run.artifact("ink_mass", "ink_mass.csv"));
      csv << "step,value,ink_mass\n";
      for (std::size_t i = 0; i < result.values.size(); ++i) {
        csv << i << ',' << result.values[i] << ',' << result.ink_mass[i] << '\n';
      }
      json metrics{{"values", result.values}, {"ink_mass", result.ink_mass}};
      // Endpoint agreement with the oracle for the lift flag of discrete painters.
      if (painter.discrete() && dim == static_cast<int>(kDiscreteActionDim) - 1) {
        auto down = decode_discrete(b);
        down.lift = false;
        const Image reference = render_stroke_discrete(down, cfg);
        const double pixels = static_cast<double>(cfg.canvas_size) * cfg.canvas_size;
        metrics["lift0_mse_vs_oracle"] = mse(result.frames.front(), reference);
        metrics["lift1_ink_per_pixel"] = result.ink_mass.back() / pixels;
      }
      run.manifest().metrics = metrics;
    });
  }
};

// ---------------------------------------------------------------- train-agent

AgentConfig agent_config_from(const json& file, AgentConfig fallback) { return section(file, "agent", fallback); }

LabeledImageSet load_images(const std::string& path, int size) {
  require_file(path, "image dataset");
  auto set = load_image_dataset(path, size);
  if (set.size() == 0) throw Error("no images found in " + path);
  return set;
}

json reconstruction_json(const ReconstructionMetrics& m) {
  return {{"mean_l2", m.mean_l2},
          {"mean_l2_white", m.mean_l2_white},
          {"l2_ratio", m.mean_l2_white > 0 ? m.mean_l2 / m.mean_l2_white : 0.0},
          {"transfer_mse", m.transfer_mse}};
}

void write_triplets(Run& run, const AgentCheckpoint& agent, const PainterCheckpoint& painter,
                    const LabeledImageSet& images, const OracleConfig& cfg) {
  torch::NoGradGuard no_grad;
  const auto shown = images.subset(0, 8);
  const auto x = shown.tensor();
  const auto out = rollout(agent, painter, x);
  write_png(triplet_grid(x, out.canvas, oracle_canvas(out.actions, cfg)), run.artifact("triplets", "triplets.png"));
}

struct TrainAgent {
  std::string dataset;
  std::string painter_path;
  std::optional<int> n_strokes;
  std::string out;
  std::optional<std::string> config;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> feature_match_weight;
  std::optional<double> adversarial_weight;
  bool canvas_feedback = false;
  double heldout_fraction = 0.1;
  OracleFlags oracle;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train-agent", "Train a reconstruction agent through a frozen painter");
    app->add_option("--dataset", dataset, "Directory of PNGs or IDX archives")->required();
    app->add_option("--painter", painter_path, "Painter checkpoint")->required();
    app->add_option("--n-strokes", n_strokes, "Strokes per image");
    app->add_option("--out", out, "Output agent checkpoint")->required();
    app->add_option("--config", config, "JSON config file or run manifest");
    app->add_option("--epochs", epochs);
    app->add_option("--seed", seed);
    app->add_option("--batch-size", batch_size);
    app->add_option("--lr", learning_rate);
    app->add_option("--feature-match-weight", feature_match_weight);
    app->add_option("--adversarial-weight", adversarial_weight);
    app->add_flag("--canvas-feedback", canvas_feedback, "Show the agent its partial canvas at every step");
    app->add_option("--heldout-fraction", heldout_fraction, "Trailing fraction held out for evaluation");
    oracle.add(app);
    app->add_flag("--force", force, "Overwrite an existing output");
  }

  int run(const std::vector<std::string>& argv) {
    const json file = load_config(config);
    AgentConfig cfg = agent_config_from(file, AgentConfig{});
    override_with(cfg.n_strokes, n_strokes);
    override_with(cfg.epochs, epochs);
    override_with(cfg.seed, seed);
    override_with(cfg.batch_size, batch_size);
    override_with(cfg.learning_rate, learning_rate);
    override_with(cfg.feature_match_weight, feature_match_weight);
    override_with(cfg.adversarial_loss_weight, adversarial_weight);
    cfg.canvas_feedback = cfg.canvas_feedback || canvas_feedback;
    cfg.validate();
    const double heldout = section(file, "heldout_fraction", heldout_fraction);
    require_file(painter_path, "painter");
    const auto painter = PainterCheckpoint::load(painter_path);
    const OracleConfig ocfg = oracle.resolve(file, painter.canvas_size());
    check_output(out, force);
    const json resolved{{"agent", cfg}, {"heldout_fraction", heldout}, {"oracle", ocfg}};
    Run r("train-agent", argv, resolved);
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("dataset", dataset);
      run.manifest().add_input("painter", painter_path);
      run.manifest().seeds["agent"] = cfg.seed;
      const auto images = load_images(dataset, painter.canvas_size());
      const auto split = split_images(images, heldout);
      auto result = train_agent(split.train, painter, cfg);
      result.agent.painter_fingerprint = run.manifest().inputs["painter"]["fingerprint"].get<std::string>();
      result.agent.save(out);
      run.output("agent", out);
      result.trace.write_csv(run.artifact("trace", "trace.csv"));
      const auto& eval_set = split.heldout.size() > 0 ? split.heldout : split.train;
      run.manifest().metrics = reconstruction_json(evaluate_reconstruction(result.agent, painter, eval_set, &ocfg));
      auto stability = stroke_order_stability(result.agent, eval_set, &painter);
      run.manifest().metrics["first_stroke_start_variance"] = stability.first_start_variance;
      run.manifest().metrics["target_centroid_variance"] = stability.centroid_variance;
      write_triplets(run, result.agent, painter, eval_set, ocfg);
    });
  }
};

// --------------------------------------------------------------- precondition

json chirality_json(const AgentCheckpoint& agent, const std::vector<StrokeTemplate>& templates,
                    const LabeledImageSet& set, int label) {
  const auto it = std::ranges::find_if(templates, [&](const StrokeTemplate& t) { return t.class_label == label; });
  if (it == templates.end() || !set.labeled()) return json();
  const auto subset = set.filter_label(label);
  if (subset.size() == 0) return json();
  const auto actions = agent_forward(agent, subset.tensor());
  const int want = chirality(it->strokes);
  std::int64_t match = 0;
  for (std::int64_t i = 0; i < actions.size(0); ++i) match += chirality(to_sequence(actions[i])) == want ? 1 : 0;
  return {{"class", label},
          {"template_chirality", want},
          {"inputs", subset.size()},
          {"matching_fraction", static_cast<double>(match) / static_cast<double>(subset.size())}};
}

struct Precondition {
  std::string templates_path;
  std::string labels;
  std::string painter_path;
  std::string out;
  std::optional<std::string> agent_path;
  std::optional<int> n_strokes;
  std::optional<int> max_epochs;
  std::optional<double> target_mse;
  std::optional<int> resume_epochs;
  std::optional<std::uint64_t> seed;
  double heldout_fraction = 0.1;
  std::optional<std::string> config;
  OracleFlags oracle;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("precondition", "Imitate one stroke template per class, then optionally resume adversarial training");
    app->add_option("--templates", templates_path, "Template JSON file")->required();
    app->add_option("--labels", labels, "Labeled image dataset (IDX archives or class sub-directories)")->required();
    app->add_option("--painter", painter_path, "Painter checkpoint")->required();
    app->add_option("--out", out, "Output agent checkpoint")->required();
    app->add_option("--agent", agent_path, "Start from this agent instead of a fresh one");
    app->add_option("--n-strokes", n_strokes);
    app->add_option("--max-epochs", max_epochs, "Preconditioning epoch limit");
    app->add_option("--target-mse", target_mse, "Action MSE at which preconditioning stops");
    app->add_option("--resume-epochs", resume_epochs, "Adversarial epochs after preconditioning (0 = none)");
    app->add_option("--seed", seed);
    app->add_option("--heldout-fraction", heldout_fraction);
    app->add_option("--config", config, "JSON config file or run manifest");
    oracle.add(app);
    app->add_flag("--force", force, "Overwrite an existing output");
  }

  int run(const std::vector<std::string>& argv) {
    const json file = load_config(config);
    AgentConfig acfg = agent_config_from(file, AgentConfig{});
    override_with(acfg.n_strokes, n_strokes);
    override_with(acfg.seed, seed);
    PreconditionConfig pcfg = section(file, "precondition", PreconditionConfig{});
    override_with(pcfg.max_epochs, max_epochs);
    override_with(pcfg.target_mse, target_mse);
    override_with(pcfg.seed, seed);
    StrokeLossSchedule schedule = section(file, "schedule", StrokeLossSchedule{});
    schedule.validate();
    int resume = section(file, "resume_epochs", 0);
    override_with(resume, resume_epochs);
    if (resume < 0) throw UsageError("--resume-epochs must be >= 0");
    if (resume > 0) acfg.epochs = resume;
    acfg.validate();
    const double heldout = section(file, "heldout_fraction", heldout_fraction);
    require_file(templates_path, "templates");
    require_file(painter_path, "painter");
    const auto painter = PainterCheckpoint::load(painter_path);
    const OracleConfig ocfg = oracle.resolve(file, painter.canvas_size());
    check_output(out, force);
    const json resolved{{"agent", acfg},       {"precondition", pcfg},          {"schedule", schedule},
                        {"resume_epochs", resume}, {"heldout_fraction", heldout}, {"oracle", ocfg}};
    Run r("precondition", argv, resolved);
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("templates", templates_path);
      run.manifest().add_input("labels", labels);
      run.manifest().add_input("painter", painter_path);
      run.manifest().seeds["precondition"] = pcfg.seed;
      run.manifest().seeds["agent"] = acfg.seed;
      const auto templates = load_templates(templates_path);
      const auto images = load_images(labels, painter.canvas_size());
      if (!images.labeled()) throw Error("preconditioning needs labels; " + labels + " has none");
      const auto split = split_images(images, heldout);
      std::optional<AgentCheckpoint> start;
      if (agent_path) {
        run.manifest().add_input("agent", *agent_path);
        start = AgentCheckpoint::load(*agent_path);
      } else {
        torch::manual_seed(acfg.seed);
        start.emplace(acfg, painter.canvas_size());
      }
      auto pre = precondition_agent(*start, templates, split.train, pcfg);
      pre.trace.write_csv(run.artifact("precondition_trace", "precondition_trace.csv"));
      json metrics{{"preconditioned", pre.agent.preconditioned},
                   {"template_mse", template_mse(pre.agent, templates, split.train)}};
      const auto& eval_set = split.heldout.size() > 0 ? split.heldout : split.train;
      metrics["chirality_after_precondition"] = chirality_json(pre.agent, templates, eval_set, 0);
      AgentCheckpoint final_agent = pre.agent.clone();
      if (resume > 0) {
        auto adv = resume_adversarial(pre.agent, split.train, painter, acfg, schedule, templates);
        adv.trace.write_csv(run.artifact("trace", "trace.csv"));
        final_agent = adv.agent.clone();
        metrics["chirality_after_resume"] = chirality_json(final_agent, templates, eval_set, 0);
      }
      metrics["reconstruction"] = reconstruction_json(evaluate_reconstruction(final_agent, painter, eval_set, &ocfg));
      final_agent.painter_fingerprint = run.manifest().inputs["painter"]["fingerprint"].get<std::string>();
      final_agent.save(out);
      run.output("agent", out);
      run.manifest().metrics = metrics;
      write_triplets(run, final_agent, painter, eval_set, ocfg);
    });
  }
};

// ---------------------------------------------------------------- paint-image

struct PaintImage {
  std::string agent_path;
  std::string painter_path;
  std::string input;
  std::string out;
  std::optional<std::string> export_strokes;
  bool render_oracle = false;
  OracleFlags oracle;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("paint-image", "Reconstruct one image with a trained agent");
    app->add_option("--agent", agent_path, "Agent checkpoint")->required();
    app->add_option("--painter", painter_path, "Painter checkpoint")->required();
    app->add_option("--input", input, "Target PNG (resized to the painter resolution)")->required();
    app->add_option("--out", out, "Output canvas PNG")->required();
    app->add_option("--export-strokes", export_strokes, "Write the stroke sequence as JSON");
    app->add_flag("--render-oracle", render_oracle, "Also re-render the strokes with the oracle (<out>-oracle.png)");
    oracle.add(app);
    app->add_flag("--force", force, "Overwrite existing outputs");
  }

  int run(const std::vector<std::string>& argv) {
    require_file(agent_path, "agent");
    require_file(painter_path, "painter");
    require_file(input, "input image");
    const auto agent = AgentCheckpoint::load(agent_path);
    const auto painter = PainterCheckpoint::load(painter_path);
    const OracleConfig cfg = oracle.resolve(json::object(), painter.canvas_size());
    const fs::path oracle_out = fs::path(out).parent_path() / (fs::path(out).stem().string() + "-oracle.png");
    check_output(out, force);
    if (export_strokes) check_output(*export_strokes, force);
    if (render_oracle) check_output(oracle_out, force);
    const json resolved{{"render_oracle", render_oracle}, {"oracle", cfg}};
    Run r("paint-image", argv, resolved);
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("agent", agent_path);
      run.manifest().add_input("painter", painter_path);
      run.manifest().add_input("input", input);
      Image target = read_png(input);
      if (target.height() != agent.image_size() || target.width() != agent.image_size()) {
        target = resize_bilinear(target, agent.image_size(), agent.image_size());
      }
      torch::NoGradGuard no_grad;
      const auto x = to_tensor(target).unsqueeze(0);
      const auto result = rollout(agent, painter, x);
      const auto canvas = to_image(result.canvas[0]);
      write_png(canvas, out);
      run.output("canvas", out);
      write_png(canvas, run.artifact("canvas", "canvas.png"));
      const auto seq = to_sequence(result.actions[0]);
      if (export_strokes) {
        export_strokes_to(seq, *export_strokes);
        run.output("strokes", *export_strokes);
      }
      json metrics{{"l2", std::sqrt((result.canvas - x).pow(2).sum().item<double>())},
                   {"l2_white", std::sqrt((1.0 - x).pow(2).sum().item<double>())},
                   {"chirality", chirality(seq)}};
      if (render_oracle) {
        const auto reference = oracle_canvas(result.actions, cfg);
        write_png(to_image(reference[0]), oracle_out);
        run.output("oracle_canvas", oracle_out);
        write_png(triplet_grid(x, result.canvas, reference), run.artifact("triplets", "triplets.png"));
        metrics["transfer_mse"] = (result.canvas - reference).pow(2).mean().item<double>();
      }
      run.manifest().metrics = metrics;
    });
  }

  static void export_strokes_to(const StrokeSequence& seq, const fs::path& path) { strokeforge::export_strokes(seq, path); }
};

// ----------------------------------------------------------- train-classifier

struct TrainClassifier {
  std::string arch;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> epochs;
  std::optional<int> size;
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
  std::optional<std::string> config;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train-classifier", "Train a classifier for DIP objectives");
    app->add_option("--arch", arch, "a or b")->required()->check(CLI::IsMember(classifier_arch_ids()));
    app->add_option("--dataset", dataset, "Labeled image dataset")->required();
    app->add_option("--seed", seed);
    app->add_option("--out", out, "Output checkpoint")->required();
    app->add_option("--epochs", epochs);
    app->add_option("--size", size, "Input size in pixels");
    app->add_option("--lr", learning_rate);
    app->add_option("--batch-size", batch_size);
    app->add_option("--config", config, "JSON config file or run manifest");
    app->add_flag("--force", force, "Overwrite an existing output");
  }

  int run(const std::vector<std::string>& argv) {
    const json file = load_config(config);
    ClassifierConfig cfg = section(file, "classifier", ClassifierConfig{});
    cfg.arch = arch;
    override_with(cfg.seed, seed);
    override_with(cfg.epochs, epochs);
    override_with(cfg.input_size, size);
    override_with(cfg.learning_rate, learning_rate);
    override_with(cfg.batch_size, batch_size);
    cfg.validate();
    check_output(out, force);
    Run r("train-classifier", argv, json{{"classifier", cfg}});
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("dataset", dataset);
      run.manifest().seeds["classifier"] = cfg.seed;
      const auto images = load_images(dataset, cfg.input_size);
      if (!images.labeled()) throw Error("classifier training needs labels; " + dataset + " has none");
      auto result = train_classifier(images, cfg);
      result.classifier.save(out);
      run.output("classifier", out);
      result.trace.write_csv(run.artifact("trace", "trace.csv"));
      run.manifest().metrics = {{"heldout_accuracy", result.classifier.info().heldout_accuracy},
                                {"usable", result.classifier.info().usable},
                                {"default_tap", result.classifier.info().default_tap}};
    });
  }
};

// -------------------------------------------------------------------- DIP

struct DipFlags {
  std::optional<int> n_strokes;
  std::optional<int> steps;
  std::optional<double> step_size;
  std::optional<int> jitter;
  std::optional<std::uint64_t> seed;
  bool grayscale = false;
  std::optional<std::string> grid;
  std::optional<double> overlap;
  int baseline_samples = 0;
  std::optional<std::string> trace;
  std::optional<std::string> export_strokes;
  bool allow_unusable = false;

  void add(CLI::App* app) {
    app->add_option("--n-strokes", n_strokes, "Strokes per canvas (per tile when gridded)");
    app->add_option("--steps", steps, "Optimization steps");
    app->add_option("--step-size", step_size, "Adam step size");
    app->add_option("--jitter", jitter, "Translation jitter in pixels (0 disables)");
    app->add_option("--seed", seed);
    app->add_flag("--grayscale", grayscale, "Tie the three color channels to one intensity");
    app->add_option("--grid", grid, "Stitch RxC overlapping canvases");
    app->add_option("--overlap", overlap, "Grid overlap fraction");
    app->add_option("--baseline-samples", baseline_samples, "Also evaluate this many random stroke sequences");
    app->add_option("--trace", trace, "Write the objective trace CSV here");
    app->add_option("--export-strokes", export_strokes, "Write the optimized strokes as JSON");
    app->add_flag("--allow-unusable", allow_unusable, "Accept classifiers below the accuracy gate");
  }

  void apply(DipConfig& cfg) const {
    override_with(cfg.n_strokes, n_strokes);
    override_with(cfg.steps, steps);
    override_with(cfg.step_size, step_size);
    override_with(cfg.jitter_px, jitter);
    override_with(cfg.seed, seed);
    if (grayscale) cfg.color_constraint = ColorConstraint::kGrayscale;
    if (grid) {
      const auto [rows, cols] = parse_grid(*grid);
      GridSpec g = cfg.grid.value_or(GridSpec{});
      g.rows = rows;
      g.cols = cols;
      cfg.grid = g;
    }
    if (overlap) {
      if (!cfg.grid) throw UsageError("--overlap needs --grid");
      cfg.grid->overlap_fraction = *overlap;
    }
    if (baseline_samples < 0) throw UsageError("--baseline-samples must be >= 0");
  }

  void check_outputs(bool force) const {
    if (trace) check_output(*trace, force);
    if (export_strokes) check_output(*export_strokes, force);
  }
};

std::vector<ClassifierCheckpoint> load_ensemble(const std::string& list, bool allow_unusable, Run* run) {
  std::vector<ClassifierCheckpoint> out;
  int k = 0;
  for (const auto& path : split_list(list)) {
    require_file(path, "classifier");
    auto ckpt = ClassifierCheckpoint::load(path);
    if (!ckpt.info().usable && !allow_unusable) {
      throw Error("classifier " + path + " is below the accuracy gate (" + std::to_string(ckpt.info().heldout_accuracy) +
                  "); pass --allow-unusable to use it anyway");
    }
    if (run != nullptr) run->manifest().add_input("classifier_" + std::to_string(k++), path);
    out.push_back(std::move(ckpt));
  }
  if (out.empty()) throw UsageError("at least one classifier is required");
  return out;
}

void finish_dip(Run& run, const DipResult& result, const DipFlags& flags, const fs::path& out,
                const PainterCheckpoint& painter, const DipConfig& cfg) {
  write_png(result.canvas, out);
  run.output("canvas", out);
  write_png(result.canvas, run.artifact("canvas", "canvas.png"));
  write_dip_trace(result, run.artifact("dip_trace", "objective.csv"));
  if (flags.trace) {
    write_dip_trace(result, *flags.trace);
    run.output("trace", *flags.trace);
  }
  if (flags.export_strokes) {
    json tiles = json::array();
    for (const auto& seq : result.actions) {
      json arr = json::array();
      for (const auto& a : seq.actions) arr.push_back(a.values);
      tiles.push_back(arr);
    }
    std::ofstream s(*flags.export_strokes);
    if (!s) throw IoError("cannot write " + *flags.export_strokes);
    s << (tiles.size() == 1 ? tiles[0] : tiles).dump() << '\n';
    run.output("strokes", *flags.export_strokes);
  }
  json metrics{{"initial_objective", result.initial_objective},
               {"final_objective", result.final_objective},
               {"trace_first", result.trace.front()},
               {"trace_last", result.trace.back()},
               {"canvas_height", result.canvas.height()},
               {"canvas_width", result.canvas.width()}};
  if (flags.baseline_samples > 0) {
    const auto baseline = random_baseline(painter, cfg, flags.baseline_samples);
    metrics["baseline"] = {{"samples", baseline.values.size()}, {"mean", baseline.mean},   {"min", baseline.min},
                           {"max", baseline.max},               {"p95", baseline.percentile(95.0)}};
  }
  run.manifest().metrics = metrics;
}

struct VisualizeClass {
  std::string painter_path;
  std::string classifiers;
  std::string class_name;
  std::string out;
  DipFlags flags;
  std::optional<std::string> config;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("visualize-class", "Optimize strokes to maximize a class logit");
    app->add_option("--painter", painter_path, "Painter checkpoint")->required();
    app->add_option("--classifiers", classifiers, "Comma-separated classifier checkpoints")->required();
    app->add_option("--class", class_name, "Class name or index")->required();
    app->add_option("--out", out, "Output canvas PNG")->required();
    flags.add(app);
    app->add_option("--config", config, "JSON config file or run manifest");
    app->add_flag("--force", force, "Overwrite existing outputs");
  }

  int run(const std::vector<std::string>& argv) {
    const json file = load_config(config);
    DipConfig cfg;
    if (file.contains("dip")) apply_dip_settings(file.at("dip"), cfg);
    flags.apply(cfg);
    cfg.objective = DipObjective::kMaximizeClass;
    require_file(painter_path, "painter");
    const auto painter = PainterCheckpoint::load(painter_path);
    cfg.ensemble = load_ensemble(classifiers, flags.allow_unusable, nullptr);
    cfg.class_id = cfg.ensemble.front().class_index(class_name);
    cfg.validate();
    check_output(out, force);
    flags.check_outputs(force);
    Run r("visualize-class", argv, json{{"dip", dip_settings_json(cfg)}, {"baseline_samples", flags.baseline_samples}});
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("painter", painter_path);
      load_ensemble(classifiers, true, &run);
      run.manifest().seeds["dip"] = cfg.seed;
      const auto result = visualize_class(painter, cfg);
      finish_dip(run, result, flags, out, painter, cfg);
    });
  }
};

struct IntrinsicStyle {
  std::string painter_path;
  std::string classifiers;
  std::optional<std::string> tap;
  std::string content;
  std::string out;
  bool fit_content = false;
  DipFlags flags;
  std::optional<std::string> config;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("intrinsic-style", "Optimize strokes against a content loss only");
    app->add_option("--painter", painter_path, "Painter checkpoint")->required();
    app->add_option("--classifier", classifiers, "Classifier checkpoint(s), comma-separated")->required();
    app->add_option("--tap", tap, "Feature tap (default: each classifier's content tap)");
    app->add_option("--content", content, "Content PNG")->required();
    app->add_option("--out", out, "Output canvas PNG")->required();
    app->add_flag("--fit-content", fit_content, "Resize the content image to the canvas size");
    flags.add(app);
    app->add_option("--config", config, "JSON config file or run manifest");
    app->add_flag("--force", force, "Overwrite existing outputs");
  }

  int run(const std::vector<std::string>& argv) {
    const json file = load_config(config);
    DipConfig cfg;
    cfg.jitter_px = 0;
    if (file.contains("dip")) apply_dip_settings(file.at("dip"), cfg);
    flags.apply(cfg);
    cfg.objective = DipObjective::kContentLoss;
    if (tap) cfg.tap_id = *tap;
    require_file(painter_path, "painter");
    require_file(content, "content image");
    const auto painter = PainterCheckpoint::load(painter_path);
    cfg.ensemble = load_ensemble(classifiers, flags.allow_unusable, nullptr);
    Image content_image = read_png(content);
    GridSpec g = cfg.grid.value_or(GridSpec{});
    g.tile_size = painter.canvas_size();
    const int h = cfg.grid ? g.output_height() : painter.canvas_size();
    const int w = cfg.grid ? g.output_width() : painter.canvas_size();
    if (fit_content && (content_image.height() != h || content_image.width() != w)) {
      content_image = resize_bilinear(content_image, h, w);
    }
    cfg.content_image = content_image;
    cfg.validate();
    check_output(out, force);
    flags.check_outputs(force);
    Run r("intrinsic-style", argv,
          json{{"dip", dip_settings_json(cfg)}, {"fit_content", fit_content}, {"baseline_samples", flags.baseline_samples}});
    return with_run(r, [&](Run& run) {
      run.manifest().add_input("painter", painter_path);
      run.manifest().add_input("content", content);
      load_ensemble(classifiers, true, &run);
      run.manifest().seeds["dip"] = cfg.seed;
      const auto result = intrinsic_style_transfer(painter, cfg);
      finish_dip(run, result, flags, out, painter, cfg);
      write_png(content_image, run.artifact("content", "content.png"));
    });
  }
};

// --------------------------------------------------------------------- report

struct Report {
  std::string run_dir;
  std::optional<std::string> out;
  bool force = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("report", "Build an HTML/PNG bundle from a finished run directory");
    app->add_option("run_dir", run_dir, "Run directory")->required();
    app->add_option("--out", out, "Bundle directory (default <run_dir>/report)");
    app->add_flag("--force", force, "Reuse an existing bundle directory");
  }

  int run(const std::vector<std::string>&) {
    const fs::path target = out ? fs::path(*out) : fs::path(run_dir) / "report";
    if (fs::exists(target) && !force) throw Error("report directory " + target.string() + " already exists");
    const auto index = build_report(run_dir, target);
    RunManifest m;
    m.command = "report";
    m.config = {{"run_dir", run_dir}};
    m.started_at = utc_timestamp(std::chrono::system_clock::now(), false);
    m.versions = library_versions();
    m.add_input("run_manifest", fs::path(run_dir) / kManifestFile);
    m.outputs["index"] = index.string();
    m.write(target);
    std::cout << index.string() << '\n';
    return kExitOk;
  }
};

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"strokeforge: neural painters, stroke agents and stroke-based image parameterizations", "strokeforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(library_versions().at("strokeforge")));

  GenDataset gen;
  TrainPainter train_painter;
  EvalPainter eval_painter;
  Sweep sweep;
  TrainAgent train_agent_cmd;
  Precondition precondition;
  PaintImage paint_image;
  TrainClassifier train_classifier_cmd;
  VisualizeClass visualize;
  IntrinsicStyle intrinsic;
  Report report;
  gen.add(app);
  train_painter.add(app);
  eval_painter.add(app);
  sweep.add(app);
  train_agent_cmd.add(app);
  precondition.add(app);
  paint_image.add(app);
  train_classifier_cmd.add(app);
  visualize.add(app);
  intrinsic.add(app);
  report.add(app);

  const std::map<std::string, std::function<int(const std::vector<std::string>&)>> handlers{
      {"gen-dataset", [&](const auto& a) { return gen.run(a); }},
      {"train-painter", [&](const auto& a) { return train_painter.run(a); }},
      {"eval-painter", [&](const auto& a) { return eval_painter.run(a); }},
      {"sweep", [&](const auto& a) { return sweep.run(a); }},
      {"train-agent", [&](const auto& a) { return train_agent_cmd.run(a); }},
      {"precondition", [&](const auto& a) { return precondition.run(a); }},
      {"paint-image", [&](const auto& a) { return paint_image.run(a); }},
      {"train-classifier", [&](const auto& a) { return train_classifier_cmd.run(a); }},
      {"visualize-class", [&](const auto& a) { return visualize.run(a); }},
      {"intrinsic-style", [&](const auto& a) { return intrinsic.run(a); }},
      {"report", [&](const auto& a) { return report.run(a); }},
  };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  std::vector<std::string> argv{"strokeforge"};
  argv.insert(argv.end(), args.begin(), args.end());
  const auto* sub = app.get_subcommands().front();
  try {
    return handlers.at(sub->get_name())(argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << sub->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace strokeforge::cli
