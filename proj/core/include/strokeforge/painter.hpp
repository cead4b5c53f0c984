#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strokeforge/action.hpp"
#include "strokeforge/dataset.hpp"
#include "strokeforge/image.hpp"
#include "strokeforge/nn.hpp"
#include "strokeforge/oracle.hpp"
#include "strokeforge/trace.hpp"

namespace strokeforge {

enum class PainterKind { kVae, kGan };

std::string to_string(PainterKind kind);
PainterKind parse_painter_kind(std::string_view text);

/// Two-stage painter: a convolutional VAE over stroke images, then a
/// feed-forward mapper from actions to the encoder's posterior mean.
struct VaePainterConfig {
  int latent_dim = 64;
  double kl_weight = 1.0;
  int vae_epochs = 20;
  int mapper_epochs = 40;
  double learning_rate = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
  /// Accept datasets with the lift flag.
  bool allow_discrete = false;

  void validate() const;
};

/// Conditional Wasserstein painter: the generator maps an action straight to
/// a stroke (no noise input); the critic scores (action, stroke) pairs.
struct GanPainterConfig {
  int critic_iters_per_gen = 5;
  double gradient_penalty_weight = 10.0;
  int epochs = 20;
  double learning_rate = 1e-4;
  int batch_size = 64;
  /// Weight of an optional pixel MSE term added to the generator loss.
  double aux_pixel_weight = 0.0;
  /// Generator-only epochs of pixel regression (BCE) before the adversarial phase.
  int warmup_epochs = 0;
  double warmup_learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool allow_discrete = false;

  void validate() const;
};

/// Shapes of the painter network.
struct PainterArch {
  int action_dim = static_cast<int>(kActionDim);
  int canvas_size = 64;
  /// Width of the mapper output feeding the decoder (latent size for VAE painters).
  int code_dim = 64;
  int hidden = 512;
  std::vector<std::int64_t> decoder_channels{128, 64, 32, 16};
};

/// mapper (3 fully connected layers) followed by a transposed-conv decoder and
/// a sigmoid, mapping [N, action_dim] actions to [N, 3, S, S] strokes on white.
class PainterNetImpl : public torch::nn::Module {
 public:
  explicit PainterNetImpl(const PainterArch& arch);

  torch::Tensor forward(const torch::Tensor& actions);
  torch::Tensor logits(const torch::Tensor& actions);

  torch::nn::Sequential mapper{nullptr};
  nn::ConvDecoder decoder{nullptr};
};
TORCH_MODULE(PainterNet);

struct PainterMetadata {
  PainterKind kind = PainterKind::kGan;
  PainterArch arch;
  /// JSON text of the training configuration.
  std::string training_config = "{}";
  std::string dataset_fingerprint;
  double heldout_mse = -1.0;
};

/// Trained painter weights plus metadata. Saved as a torch archive at `path`
/// with a JSON sidecar at `path + ".json"`.
class PainterCheckpoint {
 public:
  explicit PainterCheckpoint(PainterMetadata metadata);

  const PainterMetadata& metadata() const { return metadata_; }
  PainterKind kind() const { return metadata_.kind; }
  int action_dim() const { return metadata_.arch.action_dim; }
  int canvas_size() const { return metadata_.arch.canvas_size; }
  bool discrete() const { return action_dim() == static_cast<int>(kDiscreteActionDim); }

  PainterNet& net() { return net_; }
  const PainterNet& net() const { return net_; }

  /// Differentiable rendering of [N, action_dim] actions (any floating dtype
  /// matching the network) into [N, 3, S, S] strokes in [0,1].
  torch::Tensor paint(const torch::Tensor& actions) const;
  std::vector<Image> paint(std::span<const Action> actions) const;
  Image paint_one(std::span<const float> action) const;

  /// Copy with float64 weights; used for finite-difference checks.
  PainterCheckpoint to_double() const;
  /// Copy sharing no storage with this checkpoint.
  PainterCheckpoint clone() const;

  void save(const std::filesystem::path& path) const;
  static PainterCheckpoint load(const std::filesystem::path& path);

 private:
  PainterMetadata metadata_;
  PainterNet net_;
};

struct PainterTrainingResult {
  PainterCheckpoint painter;
  TrainingTrace trace;
};

/// Held-out split is the final 5% of records by index.
struct DatasetSplit {
  std::size_t train_end = 0;
  std::size_t size = 0;
};
DatasetSplit split_dataset(std::size_t size);

PainterTrainingResult train_vae_painter(const StrokeDataset& dataset, const VaePainterConfig& cfg,
                                        const std::string& dataset_fingerprint = {});
PainterTrainingResult train_gan_painter(const StrokeDataset& dataset, const GanPainterConfig& cfg,
                                        const std::string& dataset_fingerprint = {});

/// Pixel MSE between painter outputs and the stored strokes of records [begin, end).
double dataset_mse(const PainterCheckpoint& painter, const StrokeDataset& dataset, std::size_t begin,
                   std::size_t end);

/// Brush sizes above this value form the high-texture subset.
inline constexpr float kHighTextureBrushSize = 0.7F;

struct PainterMetrics {
  int n = 0;
  int high_texture_count = 0;
  double mse = 0.0;
  double blank_baseline_mse = 0.0;
  double mse_high_texture = 0.0;
  double blank_baseline_mse_high_texture = 0.0;
  /// Mean absolute Laplacian over the high-texture subset.
  double laplacian_painter_high_texture = 0.0;
  double laplacian_oracle_high_texture = 0.0;
  /// Rows of (oracle | painter) pairs.
  Image comparison_grid;
};

/// Compares the painter against the noise-free oracle on n freshly sampled
/// actions (discrete-variant actions for 13-dim painters).
PainterMetrics evaluate_painter(const PainterCheckpoint& painter, const OracleConfig& cfg, int n,
                                std::uint64_t seed = 1234);

struct SweepResult {
  std::vector<double> values;
  std::vector<Image> frames;
  /// Ink mass of each frame.
  std::vector<double> ink_mass;
  Image strip;
};

/// Sweeps action component `dim` over `steps` equally spaced values in [0,1].
/// With steps == 1 the single value is 0.
SweepResult action_sweep(const PainterCheckpoint& painter, std::span<const float> base, int dim,
                         int steps);

torch::Tensor actions_to_tensor(std::span<const Action> actions);

}  // namespace strokeforge
