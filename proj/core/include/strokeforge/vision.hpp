#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "strokeforge/image_set.hpp"
#include "strokeforge/trace.hpp"

namespace strokeforge {

/// Frozen network contract used by the DIP driver. Inputs are normalized
/// [N, 3, H, W] batches; the result maps "logits" and every tap id to its
/// activation.
class FeatureNetwork {
 public:
  virtual ~FeatureNetwork() = default;
  virtual std::map<std::string, torch::Tensor> run(const torch::Tensor& normalized) = 0;
  virtual std::vector<std::string> taps() const = 0;
  virtual torch::nn::Module* module() { return nullptr; }
};

/// Two in-repo classifier families.
///  "a": 3x3 conv + max-pool stages, global average pooling, linear head.
///  "b": strided 4x4 convs, flatten, two linear layers.
std::vector<std::string> classifier_arch_ids();

struct ClassifierConfig {
  std::string arch = "a";
  int input_size = 32;
  int epochs = 12;
  double learning_rate = 1e-3;
  int batch_size = 64;
  double heldout_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Accuracy required before a classifier is used for DIP.
inline constexpr double kUsableAccuracy = 0.6;

struct ClassifierInfo {
  std::string arch_id;
  std::vector<std::string> class_names;
  int input_size = 32;
  std::array<float, 3> mean{0.5F, 0.5F, 0.5F};
  std::array<float, 3> stddev{0.5F, 0.5F, 0.5F};
  std::vector<std::string> taps;
  /// Activation shapes (without the batch dimension) at input_size, per tap.
  std::map<std::string, std::vector<std::int64_t>> tap_shapes;
  std::string default_tap;
  double heldout_accuracy = -1.0;
  bool usable = false;
};

class ClassifierCheckpoint {
 public:
  ClassifierCheckpoint(ClassifierInfo info, std::shared_ptr<FeatureNetwork> network);

  /// Fresh untrained in-repo network; fills taps, shapes and default tap.
  static ClassifierCheckpoint create(const std::string& arch_id, int input_size, std::vector<std::string> class_names);

  const ClassifierInfo& info() const { return info_; }
  ClassifierInfo& info() { return info_; }
  int num_classes() const { return static_cast<int>(info_.class_names.size()); }
  int class_index(const std::string& name_or_index) const;
  FeatureNetwork& network() const { return *network_; }

  /// Resizes to input_size when needed, normalizes and runs the network.
  std::map<std::string, torch::Tensor> run(const torch::Tensor& images) const;
  torch::Tensor logits(const torch::Tensor& images) const;

  void save(const std::filesystem::path& path) const;
  /// In-repo checkpoints carry format "strokeforge-classifier"; sidecars with
  /// format "strokeforge-external" load a TorchScript module (see README).
  static ClassifierCheckpoint load(const std::filesystem::path& path);

 private:
  ClassifierInfo info_;
  std::shared_ptr<FeatureNetwork> network_;
};

struct ClassifierTrainingResult {
  ClassifierCheckpoint classifier;
  TrainingTrace trace;
};

ClassifierTrainingResult train_classifier(const LabeledImageSet& set, const ClassifierConfig& cfg);

/// Pre-softmax logit of class_id for every image in [N, 3, H, W]; differentiable.
torch::Tensor class_logit(const ClassifierCheckpoint& ckpt, const torch::Tensor& images, int class_id);

/// Activation at a named tap; images are normalized but not resized.
torch::Tensor extract_features(const ClassifierCheckpoint& ckpt, const torch::Tensor& images, const std::string& tap);

/// MSE between tap activations of two image batches.
torch::Tensor content_loss(const ClassifierCheckpoint& ckpt, const torch::Tensor& a, const torch::Tensor& b,
                           const std::string& tap);

/// Fraction of images whose argmax logit equals the label.
double classifier_accuracy(const ClassifierCheckpoint& ckpt, const LabeledImageSet& set);

}  // namespace strokeforge
