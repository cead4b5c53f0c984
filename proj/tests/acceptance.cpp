// Acceptance run: one PASS/FAIL line per criterion.
//
// Environment:
//   STROKEFORGE_ACCEPTANCE_DIR    working directory for datasets, checkpoints and runs
//                                 (default: a fresh directory under the system temp dir)
//   STROKEFORGE_ACCEPTANCE_REUSE  when set to 1, checkpoints already present in the
//                                 working directory are loaded instead of retrained
#include <torch/torch.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include "strokeforge/agent.hpp"
#include "strokeforge/cli/cli.hpp"
#include "strokeforge/cli/manifest.hpp"
#include "strokeforge/dataset.hpp"
#include "strokeforge/dip.hpp"
#include "strokeforge/error.hpp"
#include "strokeforge/image_set.hpp"
#include "strokeforge/oracle.hpp"
#include "strokeforge/painter.hpp"
#include "strokeforge/rng.hpp"
#include "strokeforge/tensor_image.hpp"
#include "strokeforge/vision.hpp"

#ifndef STROKEFORGE_TEST_DATA_DIR
#define STROKEFORGE_TEST_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace strokeforge;

namespace {

constexpr int kCanvas = 32;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

class Workspace {
 public:
  Workspace() {
    if (const char* env = std::getenv("STROKEFORGE_ACCEPTANCE_DIR"); env != nullptr && *env != '\0') {
      root_ = env;
    } else {
      root_ = fs::temp_directory_path() /
              ("strokeforge-acceptance-" + std::to_string(std::chrono::system_clock::now().time_since_epoch().count()));
    }
    fs::create_directories(root_);
    const char* reuse = std::getenv("STROKEFORGE_ACCEPTANCE_REUSE");
    reuse_ = reuse != nullptr && std::string(reuse) == "1";
  }

  fs::path operator/(const std::string& name) const { return root_ / name; }
  const fs::path& root() const { return root_; }
  bool reuse(const fs::path& p) const { return reuse_ && fs::exists(p); }

 private:
  fs::path root_;
  bool reuse_ = false;
};

OracleConfig desk_oracle() { return scaled_oracle_config(kCanvas); }

// ------------------------------------------------------------------ shared models

GanPainterConfig desk_gan_config() {
  GanPainterConfig cfg;
  cfg.warmup_epochs = 30;
  cfg.epochs = 3;
  cfg.critic_iters_per_gen = 2;
  cfg.aux_pixel_weight = 2000.0;
  return cfg;
}

struct Models {
  Workspace& ws;
  std::optional<StrokeDataset> dataset;
  std::optional<PainterCheckpoint> vae;
  std::optional<PainterCheckpoint> gan;
  std::optional<PainterCheckpoint> discrete;
  std::optional<LabeledImageSet> digits;
  std::optional<ImageSplit> digit_split;
  std::optional<ClassifierCheckpoint> classifier;

  const StrokeDataset& stroke_dataset() {
    if (!dataset) {
      const auto path = ws / "strokes.npds";
      if (!ws.reuse(path)) {
        OracleConfig cfg = desk_oracle();
        cfg.seed = 1;
        generate_dataset_file(20000, cfg, false, path);
      }
      dataset = read_dataset(path);
    }
    return *dataset;
  }

  PainterCheckpoint& painter(PainterKind kind) {
    auto& slot = kind == PainterKind::kVae ? vae : gan;
    if (slot) return *slot;
    const auto path = ws / (kind == PainterKind::kVae ? "vae.pt" : "gan.pt");
    if (ws.reuse(path)) {
      slot = PainterCheckpoint::load(path);
      return *slot;
    }
    const auto t0 = std::chrono::steady_clock::now();
    if (kind == PainterKind::kVae) {
      VaePainterConfig cfg;
      cfg.vae_epochs = 15;
      cfg.mapper_epochs = 30;
      slot = train_vae_painter(stroke_dataset(), cfg).painter;
    } else {
      slot = train_gan_painter(stroke_dataset(), desk_gan_config()).painter;
    }
    slot->save(path);
    log_info(to_string(kind) + " painter trained in " + fmt(elapsed(t0)) + " s");
    return *slot;
  }

  PainterCheckpoint& discrete_painter() {
    if (discrete) return *discrete;
    const auto path = ws / "discrete.pt";
    if (ws.reuse(path)) {
      discrete = PainterCheckpoint::load(path);
      return *discrete;
    }
    OracleConfig cfg = desk_oracle();
    cfg.seed = 2;
    const auto ds = generate_dataset(20000, cfg, true);
    auto gc = desk_gan_config();
    gc.allow_discrete = true;
    discrete = train_gan_painter(ds, gc).painter;
    discrete->save(path);
    return *discrete;
  }

  const ImageSplit& digit_sets() {
    if (!digit_split) {
      digits = load_image_dataset(fs::path(STROKEFORGE_TEST_DATA_DIR) / "digits", kCanvas);
      digit_split = split_images(*digits, 0.1);
    }
    return *digit_split;
  }

  ClassifierCheckpoint& desk_classifier() {
    if (classifier) return *classifier;
    const auto path = ws / "classifier_a.pt";
    if (ws.reuse(path)) {
      classifier = ClassifierCheckpoint::load(path);
      return *classifier;
    }
    digit_sets();
    ClassifierConfig cfg;
    cfg.arch = "a";
    cfg.input_size = kCanvas;
    classifier = train_classifier(*digits, cfg).classifier;
    classifier->save(path);
    return *classifier;
  }
};

// ------------------------------------------------------------------ criterion 1

double numeric_coverage(double cx, double cy, double r, int px, int py) {
  constexpr int kSteps = 4000;
  double area = 0.0;
  for (int i = 0; i < kSteps; ++i) {
    const double dx = px + (i + 0.5) / kSteps - cx;
    if (std::abs(dx) >= r) continue;
    const double h = std::sqrt(r * r - dx * dx);
    const double lo = std::max<double>(py, cy - h);
    const double hi = std::min<double>(py + 1, cy + h);
    if (hi > lo) area += (hi - lo) / kSteps;
  }
  return area;
}

Outcome criterion1() {
  OracleConfig cfg = scaled_oracle_config(64);
  Rng rng(101);
  double worst_dab = 0.0;
  for (int k = 0; k < 5; ++k) {
    Action a;
    a[ActionField::kStartPressure] = 1.0F;
    a[ActionField::kEndPressure] = 1.0F;
    a[ActionField::kBrushSize] = static_cast<float>(rng.uniform(0.2, 1.0));
    const auto x = static_cast<float>(rng.uniform(0.2, 0.8));
    const auto y = static_cast<float>(rng.uniform(0.2, 0.8));
    for (auto f : {ActionField::kX0, ActionField::kX1, ActionField::kX2}) a[f] = x;
    for (auto f : {ActionField::kY0, ActionField::kY1, ActionField::kY2}) a[f] = y;
    const Image im = render_stroke(a, cfg);
    const double r = cfg.min_radius_px + (cfg.max_radius_px - cfg.min_radius_px) * a.brush_size();
    for (int py = 0; py < 64; ++py) {
      for (int px = 0; px < 64; ++px) {
        const double expected = 1.0 - numeric_coverage(x * 64.0, y * 64.0, r, px, py);
        worst_dab = std::max(worst_dab, static_cast<double>(std::abs(im.at(py, px, 0) - expected)));
      }
    }
  }
  double worst_mirror = 0.0;
  for (int k = 0; k < 20; ++k) {
    Action a = sample_action(rng);
    Action m = a;
    for (auto f : {ActionField::kX0, ActionField::kX1, ActionField::kX2}) m[f] = 1.0F - a[f];
    const Image l = render_stroke(a, cfg);
    const Image r = render_stroke(m, cfg);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        for (int c = 0; c < 3; ++c) {
          worst_mirror = std::max(worst_mirror, static_cast<double>(std::abs(l.at(y, x, c) - r.at(y, 63 - x, c))));
        }
      }
    }
  }
  bool white = true;
  for (int k = 0; k < 20; ++k) {
    Action a = sample_action(rng);
    a[ActionField::kStartPressure] = 0.0F;
    a[ActionField::kEndPressure] = 0.0F;
    const Image im = render_stroke(a, cfg);
    white = white && std::ranges::all_of(im.data(), [](float v) { return v == 1.0F; });
  }
  const bool pass = worst_dab <= 1.0 / 255.0 && worst_mirror <= 1.0 / 255.0 && white;
  return {pass, "max dab error " + fmt(worst_dab) + " (<= " + fmt(1.0 / 255.0) + "), mirror error " + fmt(worst_mirror) +
                    ", zero pressure white " + (white ? "yes" : "no")};
}

// ------------------------------------------------------------------ criterion 2

Outcome criterion2(Models& models) {
  const auto oracle = desk_oracle();
  const auto g = evaluate_painter(models.painter(PainterKind::kGan), oracle, 1000, 777);
  const auto v = evaluate_painter(models.painter(PainterKind::kVae), oracle, 1000, 777);
  write_png(g.comparison_grid, models.ws / "gan_comparison.png");
  write_png(v.comparison_grid, models.ws / "vae_comparison.png");
  const bool gan_ok = g.mse < 0.5 * g.blank_baseline_mse;
  const bool vae_ok = v.mse < v.blank_baseline_mse;
  const double gan_gap = std::abs(g.laplacian_painter_high_texture - g.laplacian_oracle_high_texture);
  const double vae_gap = std::abs(v.laplacian_painter_high_texture - v.laplacian_oracle_high_texture);
  const bool texture_ok = gan_gap < vae_gap;
  return {gan_ok && vae_ok && texture_ok,
          "GAN mse " + fmt(g.mse) + " vs 0.5*baseline " + fmt(0.5 * g.blank_baseline_mse) + "; VAE mse " + fmt(v.mse) +
              " vs baseline " + fmt(v.blank_baseline_mse) + "; Laplacian oracle " + fmt(g.laplacian_oracle_high_texture) +
              " GAN " + fmt(g.laplacian_painter_high_texture) + " VAE " + fmt(v.laplacian_painter_high_texture) + " (n=" +
              std::to_string(g.high_texture_count) + ")"};
}

// ------------------------------------------------------------------ criterion 3

double painter_fd_error(const PainterCheckpoint& painter, Rng& rng) {
  const auto p = painter.to_double();
  const auto s = p.canvas_size();
  std::vector<double> a0(12);
  for (auto& v : a0) v = rng.uniform(0.1, 0.9);
  const auto weights = torch::rand({1, 3, s, s}, torch::kFloat64);
  auto a = torch::tensor(a0, torch::kFloat64).view({1, 12}).requires_grad_(true);
  (p.paint(a) * weights).sum().backward();
  const auto analytic = a.grad().view(-1);
  torch::NoGradGuard no_grad;
  const double h = 1e-3;
  const auto numeric = torch::empty({12}, torch::kFloat64);
  for (int i = 0; i < 12; ++i) {
    auto plus = a.detach().clone();
    auto minus = a.detach().clone();
    plus[0][i] += h;
    minus[0][i] -= h;
    numeric[i] = ((p.paint(plus) * weights).sum() - (p.paint(minus) * weights).sum()) / (2 * h);
  }
  return ((numeric - analytic).norm() / std::max(1e-12, numeric.norm().item<double>())).item<double>();
}

Outcome criterion3(Models& models) {
  Rng rng(303);
  torch::manual_seed(303);
  double worst = 0.0;
  for (auto kind : {PainterKind::kVae, PainterKind::kGan}) {
    for (int k = 0; k < 10; ++k) worst = std::max(worst, painter_fd_error(models.painter(kind), rng));
  }
  // End to end: composite + rollout on a tiny agent, gradient of the pixel loss w.r.t. the output bias.
  AgentConfig cfg;
  cfg.n_strokes = 2;
  cfg.recurrent_state_dim = 16;
  cfg.embedding_dim = 16;
  cfg.encoder_channels = {8, 8};
  AgentCheckpoint agent(cfg, kCanvas);
  agent.net()->to(torch::kFloat64);
  const auto painter = models.painter(PainterKind::kGan).to_double();
  const auto x = models.digit_sets().heldout.subset(0, 2).tensor().to(torch::kFloat64);
  const auto loss = [&] { return (rollout(agent, painter, x).canvas - x).pow(2).sum(); };
  auto params = agent.net()->parameters();
  auto& bias = params.back();
  loss().backward();
  const auto analytic = bias.grad().clone().view(-1);
  torch::NoGradGuard no_grad;
  auto numeric = torch::empty_like(analytic);
  const double h = 1e-3;
  for (std::int64_t i = 0; i < bias.numel(); ++i) {
    const double saved = bias.view(-1)[i].item<double>();
    bias.view(-1)[i] = saved + h;
    const double up = loss().item<double>();
    bias.view(-1)[i] = saved - h;
    const double down = loss().item<double>();
    bias.view(-1)[i] = saved;
    numeric[i] = (up - down) / (2 * h);
  }
  const double e2e = ((numeric - analytic).norm() / std::max(1e-12, numeric.norm().item<double>())).item<double>();
  return {worst < 1e-2 && e2e < 1e-2,
          "worst painter rel. error " + fmt(worst) + " over 20 actions, end-to-end rel. error " + fmt(e2e) + " (< 0.01)"};
}

// ------------------------------------------------------------------ criterion 4

Outcome criterion4(Models& models) {
  const auto& painter = models.discrete_painter();
  const auto oracle = desk_oracle();
  Rng rng(404);
  double worst_mse = 0.0;
  double worst_ink = 0.0;
  double blank_mse = 0.0;
  const double pixels = static_cast<double>(kCanvas) * kCanvas;
  std::vector<Image> strips;
  for (int k = 0; k < 20; ++k) {
    DiscreteAction dv = sample_discrete_action(rng, 0.0);
    dv.lift = false;
    const auto enc = encode_discrete(dv);
    const auto sweep = action_sweep(painter, enc, static_cast<int>(kDiscreteActionDim) - 1, 9);
    const Image reference = render_stroke_discrete(dv, oracle);
    worst_mse = std::max(worst_mse, mse(sweep.frames.front(), reference));
    blank_mse = std::max(blank_mse, mse(Image::white(kCanvas, kCanvas), reference));
    worst_ink = std::max(worst_ink, sweep.ink_mass.back() / pixels);
    if (k < 6) strips.push_back(sweep.strip);
  }
  const auto artifact = models.ws / "lift_sweep.png";
  write_png(vconcat(strips, 2), artifact);
  return {worst_mse < 0.02 && worst_ink < 0.01 && fs::exists(artifact),
          "lift=0 worst mse " + fmt(worst_mse) + " (< 0.02; blank canvas would score up to " + fmt(blank_mse) +
              "), lift=1 worst ink per pixel " + fmt(worst_ink) + " (< 0.01), strip " + artifact.filename().string()};
}

// ------------------------------------------------------------------ criteria 5 and 6

AgentConfig desk_agent_config() {
  AgentConfig cfg;
  cfg.n_strokes = 4;
  cfg.epochs = 30;
  cfg.seed = 5;
  return cfg;
}

struct AgentEval {
  ReconstructionMetrics m;
  bool pass = false;
  std::string detail;
};

AgentEval reconstruction_check(const AgentCheckpoint& agent, Models& models) {
  const auto oracle = desk_oracle();
  AgentEval e;
  e.m = evaluate_reconstruction(agent, models.painter(PainterKind::kGan), models.digit_sets().heldout, &oracle);
  e.pass = e.m.mean_l2 < 0.5 * e.m.mean_l2_white && e.m.transfer_mse < 0.03;
  e.detail = "held-out L2 " + fmt(e.m.mean_l2) + " vs 0.5*white " + fmt(0.5 * e.m.mean_l2_white) + ", transfer mse " +
             fmt(e.m.transfer_mse) + " (< 0.03)";
  return e;
}

Outcome criterion5(Models& models) {
  const auto path = models.ws / "agent.pt";
  std::optional<AgentCheckpoint> agent;
  if (models.ws.reuse(path)) {
    agent = AgentCheckpoint::load(path);
  } else {
    agent = train_agent(models.digit_sets().train, models.painter(PainterKind::kGan), desk_agent_config()).agent;
    agent->save(path);
  }
  const auto e = reconstruction_check(*agent, models);
  return {e.pass, e.detail};
}

Outcome criterion6(Models& models) {
  const auto templates = load_templates(fs::path(STROKEFORGE_TEST_DATA_DIR) / "templates" / "digits.json");
  const auto& painter = models.painter(PainterKind::kGan);
  const auto& sets = models.digit_sets();
  const auto path = models.ws / "agent_preconditioned.pt";
  std::optional<AgentCheckpoint> agent;
  if (models.ws.reuse(path)) {
    agent = AgentCheckpoint::load(path);
  } else {
    const auto cfg = desk_agent_config();
    torch::manual_seed(cfg.seed);
    AgentCheckpoint fresh(cfg, kCanvas);
    PreconditionConfig pc;
    pc.seed = 6;
    const auto pre = precondition_agent(fresh, templates, sets.train, pc);
    agent = resume_adversarial(pre.agent, sets.train, painter, cfg, StrokeLossSchedule{}, templates).agent;
    agent->save(path);
  }
  const auto zeros = sets.heldout.filter_label(0);
  const auto actions = agent_forward(*agent, zeros.tensor());
  int want = 0;
  for (const auto& t : templates) {
    if (t.class_label == 0) want = chirality(t.strokes);
  }
  int match = 0;
  for (std::int64_t i = 0; i < actions.size(0); ++i) match += chirality(to_sequence(actions[i])) == want ? 1 : 0;
  const double fraction = actions.size(0) > 0 ? static_cast<double>(match) / static_cast<double>(actions.size(0)) : 0.0;
  const auto e = reconstruction_check(*agent, models);
  return {fraction >= 0.8 && e.pass, "class-0 chirality match " + std::to_string(match) + "/" +
                                         std::to_string(actions.size(0)) + " = " + fmt(fraction) + " (>= 0.8); " + e.detail};
}

// ------------------------------------------------------------------ criterion 7

Outcome criterion7(Models& models) {
  const auto& painter = models.painter(PainterKind::kGan);
  const auto& clf = models.desk_classifier();
  int classes_ok = 0;
  int runs = 0;
  int runs_up = 0;
  std::string worst;
  double worst_margin = 1e9;
  for (int c = 0; c < clf.num_classes(); ++c) {
    DipConfig cfg;
    cfg.n_strokes = 8;
    cfg.steps = 150;
    cfg.step_size = 0.05;
    cfg.class_id = c;
    cfg.ensemble = {clf};
    cfg.seed = 7000 + static_cast<std::uint64_t>(c);
    const auto baseline = random_baseline(painter, cfg, 1000);
    const double p95 = baseline.percentile(95.0);
    for (int r = 0; r < 2; ++r) {
      cfg.seed = 7000 + static_cast<std::uint64_t>(100 * c + r);
      const auto result = visualize_class(painter, cfg);
      ++runs;
      runs_up += result.final_objective >= result.initial_objective ? 1 : 0;
      if (r == 0) {
        const double margin = result.final_objective - p95;
        classes_ok += margin > 0 ? 1 : 0;
        if (margin < worst_margin) {
          worst_margin = margin;
          worst = "class " + clf.info().class_names[static_cast<std::size_t>(c)] + " logit " + fmt(result.final_objective) +
                  " vs p95 " + fmt(p95);
        }
        write_png(result.canvas, models.ws / ("class_" + std::to_string(c) + ".png"));
      }
    }
  }
  const double up_fraction = static_cast<double>(runs_up) / runs;
  return {classes_ok == clf.num_classes() && up_fraction >= 0.95,
          std::to_string(classes_ok) + "/" + std::to_string(clf.num_classes()) + " classes above the random p95 (tightest: " +
              worst + "); final >= initial in " + std::to_string(runs_up) + "/" + std::to_string(runs) + " runs" +
              " (classifier accuracy " + fmt(clf.info().heldout_accuracy) + ")"};
}

// ------------------------------------------------------------------ criterion 8

Outcome criterion8(Models& models) {
  const auto& painter = models.painter(PainterKind::kGan);
  const auto& clf = models.desk_classifier();
  DipConfig cfg;
  cfg.objective = DipObjective::kContentLoss;
  cfg.n_strokes = 16;
  cfg.steps = 300;
  cfg.step_size = 0.05;
  cfg.jitter_px = 0;
  cfg.ensemble = {clf};
  cfg.seed = 808;
  cfg.content_image = models.digit_sets().heldout.images.at(3);
  const auto baseline = random_baseline(painter, cfg, 1000);
  const auto styled = intrinsic_style_transfer(painter, cfg);
  write_png(styled.canvas, models.ws / "intrinsic_style.png");
  const bool beat_random = styled.final_objective < 0.3 * baseline.min;

  // Realizable target: a canvas the painter itself produced.
  torch::manual_seed(809);
  {
    torch::NoGradGuard no_grad;
    cfg.content_image = to_image(paint_sequence(painter, torch::rand({1, 16, 12}))[0]);
  }
  cfg.seed = 810;
  const auto realizable = intrinsic_style_transfer(painter, cfg);
  const bool realizable_ok = realizable.final_objective < 0.1 * realizable.initial_objective;

  // 2x2 grid of 64 px tiles at half overlap.
  PainterMetadata meta;
  meta.arch.canvas_size = 64;
  torch::manual_seed(811);
  const PainterCheckpoint tile_painter(meta);
  DipConfig grid_cfg;
  grid_cfg.objective = DipObjective::kContentLoss;
  grid_cfg.n_strokes = 4;
  grid_cfg.steps = 3;
  grid_cfg.jitter_px = 0;
  grid_cfg.ensemble = {clf};
  GridSpec g;
  g.rows = 2;
  g.cols = 2;
  g.overlap_fraction = 0.5;
  g.tile_size = 64;
  grid_cfg.grid = g;
  grid_cfg.content_image = resize_bilinear(models.digit_sets().heldout.images.at(5), 96, 96);
  const auto gridded = intrinsic_style_transfer(tile_painter, grid_cfg);
  const double weight_error = (stitch_weight_sum(g) - 1.0).abs().max().item<double>();
  const bool grid_ok = gridded.canvas.height() == 96 && gridded.canvas.width() == 96 && weight_error <= 1e-6;

  return {beat_random && realizable_ok && grid_ok,
          "content loss " + fmt(styled.final_objective) + " vs 0.3*best random " + fmt(0.3 * baseline.min) +
              "; realizable " + fmt(realizable.final_objective) + " vs 0.1*initial " +
              fmt(0.1 * realizable.initial_objective) + "; grid " + std::to_string(gridded.canvas.height()) + "x" +
              std::to_string(gridded.canvas.width()) + ", weight error " + fmt(weight_error)};
}

// ------------------------------------------------------------------ criterion 9

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome criterion9(Models& models) {
  const auto dir = models.ws / "repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  setenv("STROKEFORGE_RUNS", (dir / "runs").c_str(), 1);
  const auto a = (dir / "a.npds").string();
  const auto b = (dir / "b.npds").string();
  bool ok = cli::dispatch({"gen-dataset", "--n", "200", "--seed", "9", "--noise-scale", "0.4", "--canvas-size", "32",
                           "--workers", "2", "--out", a}) == cli::kExitOk;
  ok = ok && cli::dispatch({"gen-dataset", "--n", "200", "--seed", "9", "--noise-scale", "0.4", "--canvas-size", "32",
                            "--out", b}) == cli::kExitOk;
  const bool datasets_equal = ok && slurp(a) == slurp(b);

  // Replay from the recorded manifest alone.
  fs::path manifest;
  for (const auto& e : fs::directory_iterator(dir / "runs")) {
    if (!fs::exists(e.path() / cli::kManifestFile)) continue;
    const auto m = cli::RunManifest::read(e.path());
    if (m.outputs.contains("dataset") && m.outputs.at("dataset") == a) manifest = e.path() / cli::kManifestFile;
  }
  const auto c = (dir / "c.npds").string();
  const bool replay = !manifest.empty() &&
                      cli::dispatch({"gen-dataset", "--config", manifest.string(), "--out", c}) == cli::kExitOk &&
                      slurp(a) == slurp(c);

  // DIP with jitter disabled, through the CLI so the run manifest is exercised too.
  const auto painter_path = models.ws / "gan.pt";
  if (!fs::exists(painter_path)) models.painter(PainterKind::kGan).save(painter_path);
  const auto clf_path = models.ws / "classifier_a.pt";
  if (!fs::exists(clf_path)) models.desk_classifier().save(clf_path);
  const auto dip_args = [&](const std::string& out) {
    return std::vector<std::string>{"visualize-class", "--painter", painter_path.string(), "--classifiers",
                                    clf_path.string(),  "--class",   "3",                  "--steps",
                                    "40",               "--jitter",  "0",                  "--seed",
                                    "12",               "--out",     (dir / out).string(), "--trace",
                                    (dir / (out + ".csv")).string()};
  };
  bool dip_ok = cli::dispatch(dip_args("d1.png")) == cli::kExitOk && cli::dispatch(dip_args("d2.png")) == cli::kExitOk;
  dip_ok = dip_ok && slurp(dir / "d1.png") == slurp(dir / "d2.png") && slurp(dir / "d1.png.csv") == slurp(dir / "d2.png.csv");

  // Every run directory must hold a complete manifest.
  int complete = 0;
  int total = 0;
  for (const auto& e : fs::directory_iterator(dir / "runs")) {
    ++total;
    try {
      const auto m = cli::RunManifest::read(e.path());
      const bool has = !m.argv.empty() && !m.config.empty() && !m.versions.empty() && m.status == "ok" &&
                       !m.started_at.empty() && !m.seeds.empty();
      complete += has ? 1 : 0;
    } catch (const std::exception&) {
    }
  }
  unsetenv("STROKEFORGE_RUNS");
  return {datasets_equal && replay && dip_ok && complete == total && total > 0,
          std::string("datasets identical ") + (datasets_equal ? "yes" : "no") + ", manifest replay identical " +
              (replay ? "yes" : "no") + ", DIP runs bit-identical " + (dip_ok ? "yes" : "no") + ", complete manifests " +
              std::to_string(complete) + "/" + std::to_string(total)};
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  Workspace ws;
  Models models{ws};
  std::cout << "acceptance workspace " << ws.root().string() << std::endl;

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, [] { return criterion1(); }},
      {2, [&] { return criterion2(models); }},
      {3, [&] { return criterion3(models); }},
      {4, [&] { return criterion4(models); }},
      {5, [&] { return criterion5(models); }},
      {6, [&] { return criterion6(models); }},
      {7, [&] { return criterion7(models); }},
      {8, [&] { return criterion8(models); }},
      {9, [&] { return criterion9(models); }},
  };

  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::ranges::find(only, id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << " [" << fmt(elapsed(t0))
              << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
