#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "strokeforge/action.hpp"
#include "strokeforge/image.hpp"
#include "strokeforge/image_set.hpp"
#include "strokeforge/nn.hpp"
#include "strokeforge/painter.hpp"
#include "strokeforge/trace.hpp"

namespace strokeforge {

/// Ordered actions produced by an agent for one target.
struct StrokeSequence {
  std::vector<Action> actions;

  std::size_t size() const { return actions.size(); }
  bool operator==(const StrokeSequence&) const = default;
};

/// Human-authored stroke sequence for one class.
struct StrokeTemplate {
  int class_label = 0;
  StrokeSequence strokes;
};

struct AgentConfig {
  int n_strokes = 4;
  int recurrent_state_dim = 128;
  /// Target encoder: stride-2 conv channel widths, then a projection to embedding_dim.
  std::vector<std::int64_t> encoder_channels{32, 64, 64};
  int embedding_dim = 128;
  /// Feed an encoding of the partially painted canvas to every step.
  bool canvas_feedback = false;

  double adversarial_loss_weight = 1.0;
  double feature_match_weight = 10.0;
  double gradient_penalty_weight = 10.0;
  int critic_iters = 2;
  std::vector<std::int64_t> critic_channels{32, 64, 128};
  double learning_rate = 3e-4;
  double critic_learning_rate = 3e-4;
  int batch_size = 32;
  int epochs = 20;

  /// Augmentation of the critic's real pairs.
  int augment_shift_px = 2;
  double augment_brightness = 0.05;

  std::uint64_t seed = 0;

  void validate() const;
};

/// LSTM agent: encodes the target once, then emits one squashed action per
/// step from the recurrent state, the target encoding and the previous action.
class AgentNetImpl : public torch::nn::Module {
 public:
  AgentNetImpl(const AgentConfig& cfg, int image_size);

  /// [N, 3, S, S] targets -> [N, n_strokes, 12] actions in (0,1). Requires a
  /// painter when canvas feedback is enabled.
  torch::Tensor forward(const torch::Tensor& targets, const PainterCheckpoint* painter = nullptr);

  int n_strokes() const { return n_strokes_; }
  int image_size() const { return image_size_; }

 private:
  torch::Tensor encode(const torch::Tensor& images);

  int n_strokes_;
  int image_size_;
  bool canvas_feedback_;
  int state_dim_;
  nn::ConvEncoder encoder_{nullptr};
  torch::nn::Linear embed_{nullptr};
  torch::nn::LSTMCell cell_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(AgentNet);

/// Agent weights plus the configuration used to build them. Saved as a torch
/// archive with a JSON sidecar at `path + ".json"`.
class AgentCheckpoint {
 public:
  AgentCheckpoint(AgentConfig cfg, int image_size);

  const AgentConfig& config() const { return cfg_; }
  int image_size() const { return image_size_; }
  int n_strokes() const { return cfg_.n_strokes; }
  AgentNet& net() { return net_; }
  const AgentNet& net() const { return net_; }

  /// Whether preconditioning reached its stopping criterion.
  bool preconditioned = false;
  std::string painter_fingerprint;

  AgentCheckpoint clone() const;
  void save(const std::filesystem::path& path) const;
  static AgentCheckpoint load(const std::filesystem::path& path);

 private:
  AgentConfig cfg_;
  int image_size_;
  AgentNet net_;
};

/// Deterministic stroke sequences for a batch of targets [N, 3, S, S];
/// returns [N, n_strokes, 12].
torch::Tensor agent_forward(const AgentCheckpoint& agent, const torch::Tensor& targets,
                            const PainterCheckpoint* painter = nullptr);
StrokeSequence agent_forward(const AgentCheckpoint& agent, const Image& target,
                             const PainterCheckpoint* painter = nullptr);

/// Paints actions [N, T, 12] stroke by stroke onto white canvases; returns [N, 3, S, S].
torch::Tensor paint_sequence(const PainterCheckpoint& painter, const torch::Tensor& actions);

struct Rollout {
  torch::Tensor canvas;   // [N, 3, S, S]
  torch::Tensor actions;  // [N, T, 12]
};

/// Agent then painter then compositing, end-to-end differentiable.
Rollout rollout(const AgentCheckpoint& agent, const PainterCheckpoint& painter, const torch::Tensor& targets);

/// Re-renders actions [N, T, 12] with the oracle and composites them; [N, 3, S, S].
torch::Tensor oracle_canvas(const torch::Tensor& actions, const OracleConfig& cfg);

/// Signed area (shoelace) of the polygon traced by every control point of
/// the sequence in order: (x0,y0), (x1,y1), (x2,y2) of stroke 1, then stroke 2, ...
double signed_area(const StrokeSequence& seq);
/// Sign of signed_area: +1, -1 or 0.
int chirality(const StrokeSequence& seq);

/// Schedule for the weight of the stroke-imitation term when adversarial
/// training resumes after preconditioning.
struct StrokeLossSchedule {
  enum class Kind { kLinearDecay, kConstant };
  Kind kind = Kind::kLinearDecay;
  double start = 1.0;
  double end = 0.0;
  /// Fraction of total steps over which a linear decay runs.
  double decay_fraction = 0.3;
  double constant = 0.0;

  void validate() const;
  double weight(std::int64_t step, std::int64_t total_steps) const;

  static StrokeLossSchedule zero() {
    StrokeLossSchedule s;
    s.kind = Kind::kConstant;
    s.constant = 0.0;
    return s;
  }
};

struct AgentTrainingResult {
  AgentCheckpoint agent;
  TrainingTrace trace;
};

/// Adversarial reconstruction training through a frozen painter. The critic
/// sees channel-concatenated (target, canvas) pairs; real pairs use lightly
/// augmented copies of the target.
AgentTrainingResult train_agent(const LabeledImageSet& images, const PainterCheckpoint& painter,
                                const AgentConfig& cfg);

struct PreconditionConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 200;
  /// Training stops once the mean action MSE over the set falls below this.
  double target_mse = 0.01;
  std::uint64_t seed = 0;
};

/// Imitation pre-training: regress each image's actions onto the template of
/// its class. No critic is involved.
AgentTrainingResult precondition_agent(const AgentCheckpoint& agent, const std::vector<StrokeTemplate>& templates,
                                       const LabeledImageSet& labeled, const PreconditionConfig& cfg);

/// Mean squared difference between agent actions and class templates.
double template_mse(const AgentCheckpoint& agent, const std::vector<StrokeTemplate>& templates,
                    const LabeledImageSet& labeled);

/// Continues adversarial training from `agent` with an added
/// weight(step) * ||action - template action||^2 term, averaged over strokes.
AgentTrainingResult resume_adversarial(const AgentCheckpoint& agent, const LabeledImageSet& images,
                                       const PainterCheckpoint& painter, const AgentConfig& cfg,
                                       const StrokeLossSchedule& schedule,
                                       const std::vector<StrokeTemplate>& templates);

struct ReconstructionMetrics {
  /// Mean per-image Euclidean distance between canvas and target.
  double mean_l2 = 0.0;
  double mean_l2_white = 0.0;
  /// Mean pixel MSE between painter canvases and oracle re-renders of the same actions.
  double transfer_mse = 0.0;
};

ReconstructionMetrics evaluate_reconstruction(const AgentCheckpoint& agent, const PainterCheckpoint& painter,
                                              const LabeledImageSet& images, const OracleConfig* oracle = nullptr);

/// Stroke-order diagnostic: variance of the first stroke's start point across
/// inputs against the variance of the targets' ink centroids.
struct StrokeOrderStability {
  double first_start_variance = 0.0;
  double centroid_variance = 0.0;
};
StrokeOrderStability stroke_order_stability(const AgentCheckpoint& agent, const LabeledImageSet& images,
                                            const PainterCheckpoint* painter = nullptr);

/// JSON array of 12-float arrays.
void export_strokes(const StrokeSequence& seq, const std::filesystem::path& path);
StrokeSequence import_strokes(const std::filesystem::path& path);

/// {"templates": [{"class": c, "actions": [[12 floats], ...]}, ...]}
std::vector<StrokeTemplate> load_templates(const std::filesystem::path& path);
void save_templates(const std::vector<StrokeTemplate>& templates, const std::filesystem::path& path);

StrokeSequence to_sequence(const torch::Tensor& actions);  // [T, 12]
torch::Tensor to_tensor(const StrokeSequence& seq);        // [T, 12]

}  // namespace strokeforge
