#include "strokeforge/vision.hpp"

#include <torch/script.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "strokeforge/error.hpp"
#include "strokeforge/nn.hpp"
#include "strokeforge/rng.hpp"

#include <json.hpp>

namespace strokeforge {

std::vector<std::string> classifier_arch_ids() { return {"a", "b"}; }

void ClassifierConfig::validate() const {
  const auto ids = classifier_arch_ids();
  if (std::ranges::find(ids, arch) == ids.end()) throw InvalidArgument("unknown classifier arch '" + arch + "'");
  if (input_size < 8 || input_size % 8 != 0) throw InvalidArgument("classifier input_size must be a multiple of 8");
  if (epochs < 1 || batch_size < 1) throw InvalidArgument("epochs and batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) throw InvalidArgument("heldout_fraction must lie in (0,1)");
}

namespace {

namespace F = torch::nn::functional;

class ArchAImpl : public torch::nn::Module {
 public:
  explicit ArchAImpl(std::int64_t classes)
      : conv1(register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 16, 3).padding(1)))),
        conv2(register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(16, 32, 3).padding(1)))),
        conv3(register_module("conv3", torch::nn::Conv2d(torch::nn::Conv2dOptions(32, 64, 3).padding(1)))),
        fc(register_module("fc", torch::nn::Linear(64, classes))) {}

  std::map<std::string, torch::Tensor> forward(const torch::Tensor& x) {
    std::map<std::string, torch::Tensor> out;
    auto h = torch::relu(conv1(x));
    out["conv1"] = h;
    h = torch::relu(conv2(F::max_pool2d(h, F::MaxPool2dFuncOptions(2))));
    out["conv2"] = h;
    h = torch::relu(conv3(F::max_pool2d(h, F::MaxPool2dFuncOptions(2))));
    out["conv3"] = h;
    out["logits"] = fc(h.mean({2, 3}));
    return out;
  }

  torch::nn::Conv2d conv1, conv2, conv3;
  torch::nn::Linear fc;
};
TORCH_MODULE(ArchA);

class ArchBImpl : public torch::nn::Module {
 public:
  ArchBImpl(std::int64_t classes, std::int64_t size)
      : block1(register_module("block1", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 24, 4).stride(2).padding(1)))),
        block2(register_module("block2", torch::nn::Conv2d(torch::nn::Conv2dOptions(24, 48, 4).stride(2).padding(1)))),
        block3(register_module("block3", torch::nn::Conv2d(torch::nn::Conv2dOptions(48, 96, 3).padding(1)))),
        fc(register_module("fc", torch::nn::Linear(96 * (size / 4) * (size / 4), 128))),
        out_layer(register_module("out", torch::nn::Linear(128, classes))) {}

  std::map<std::string, torch::Tensor> forward(const torch::Tensor& x) {
    std::map<std::string, torch::Tensor> out;
    auto h = torch::leaky_relu(block1(x), 0.2);
    out["block1"] = h;
    h = torch::leaky_relu(block2(h), 0.2);
    out["block2"] = h;
    h = torch::leaky_relu(block3(h), 0.2);
    out["block3"] = h;
    if (h.size(2) * h.size(3) * h.size(1) == fc->options.in_features()) {
      h = torch::leaky_relu(fc(h.flatten(1)), 0.2);
      out["fc"] = h;
      out["logits"] = out_layer(h);
    }
    return out;
  }

  torch::nn::Conv2d block1, block2, block3;
  torch::nn::Linear fc, out_layer;
};
TORCH_MODULE(ArchB);

class InRepoNetwork : public FeatureNetwork {
 public:
  InRepoNetwork(const std::string& arch, std::int64_t classes, std::int64_t size) : arch_(arch) {
    if (arch == "a") {
      a_ = ArchA(classes);
    } else if (arch == "b") {
      b_ = ArchB(classes, size);
    } else {
      throw InvalidArgument("unknown classifier arch '" + arch + "'");
    }
  }

  std::map<std::string, torch::Tensor> run(const torch::Tensor& x) override {
    return a_ ? a_->forward(x) : b_->forward(x);
  }

  std::vector<std::string> taps() const override {
    if (arch_ == "a") return {"conv1", "conv2", "conv3"};
    return {"block1", "block2", "block3", "fc"};
  }

  torch::nn::Module* module() override { return a_ ? static_cast<torch::nn::Module*>(a_.get()) : b_.get(); }

 private:
  std::string arch_;
  ArchA a_{nullptr};
  ArchB b_{nullptr};
};

/// TorchScript module whose forward(x) returns Dict[str, Tensor] holding
/// "logits" and every declared tap.
class ScriptedNetwork : public FeatureNetwork {
 public:
  ScriptedNetwork(torch::jit::Module module, std::vector<std::string> taps)
      : module_(std::move(module)), taps_(std::move(taps)) {
    module_.eval();
    for (auto p : module_.parameters()) p.set_requires_grad(false);
  }

  std::map<std::string, torch::Tensor> run(const torch::Tensor& x) override {
    const auto result = module_.forward({x});
    if (!result.isGenericDict()) throw Error("external network must return a Dict[str, Tensor]");
    std::map<std::string, torch::Tensor> out;
    for (const auto& item : result.toGenericDict()) out[item.key().toStringRef()] = item.value().toTensor();
    return out;
  }

  std::vector<std::string> taps() const override { return taps_; }

 private:
  torch::jit::Module module_;
  std::vector<std::string> taps_;
};

void freeze(FeatureNetwork& net) {
  if (auto* m = net.module()) {
    nn::set_requires_grad(*m, false);
    m->eval();
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

/// Deepest conv tap whose spatial extent is at least 8x8.
std::string pick_default_tap(const std::vector<std::string>& taps,
                             const std::map<std::string, std::vector<std::int64_t>>& shapes) {
  std::string best;
  for (const auto& tap : taps) {
    const auto& s = shapes.at(tap);
    if (s.size() == 3 && s[1] >= 8 && s[2] >= 8) best = tap;
  }
  return best.empty() ? taps.back() : best;
}

}  // namespace

ClassifierCheckpoint::ClassifierCheckpoint(ClassifierInfo info, std::shared_ptr<FeatureNetwork> network)
    : info_(std::move(info)), network_(std::move(network)) {
  if (!network_) throw InvalidArgument("classifier checkpoint needs a network");
  if (info_.class_names.empty()) throw InvalidArgument("classifier needs at least one class");
  if (info_.taps.empty()) throw InvalidArgument("classifier needs at least one feature tap");
}

ClassifierCheckpoint ClassifierCheckpoint::create(const std::string& arch_id, int input_size,
                                                  std::vector<std::string> class_names) {
  ClassifierInfo info;
  info.arch_id = arch_id;
  info.input_size = input_size;
  info.class_names = std::move(class_names);
  auto net = std::make_shared<InRepoNetwork>(arch_id, static_cast<std::int64_t>(info.class_names.size()), input_size);
  info.taps = net->taps();
  {
    torch::NoGradGuard no_grad;
    const auto acts = net->run(torch::zeros({1, 3, input_size, input_size}));
    for (const auto& tap : info.taps) {
      const auto sizes = acts.at(tap).sizes();
      info.tap_shapes[tap] = std::vector<std::int64_t>(sizes.begin() + 1, sizes.end());
    }
  }
  info.default_tap = pick_default_tap(info.taps, info.tap_shapes);
  return ClassifierCheckpoint(std::move(info), std::move(net));
}

int ClassifierCheckpoint::class_index(const std::string& name_or_index) const {
  const auto it = std::ranges::find(info_.class_names, name_or_index);
  if (it != info_.class_names.end()) return static_cast<int>(it - info_.class_names.begin());
  try {
    std::size_t used = 0;
    const int idx = std::stoi(name_or_index, &used);
    if (used == name_or_index.size() && idx >= 0 && idx < num_classes()) return idx;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("unknown class '" + name_or_index + "'");
}

std::map<std::string, torch::Tensor> ClassifierCheckpoint::run(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) throw InvalidArgument("classifier expects [N, 3, H, W] images");
  auto x = images;
  if (x.size(2) != info_.input_size || x.size(3) != info_.input_size) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .size(std::vector<std::int64_t>{info_.input_size, info_.input_size})
                              .mode(torch::kBilinear)
                              .align_corners(false));
  }
  const auto mean = torch::tensor(std::vector<float>(info_.mean.begin(), info_.mean.end()), x.options()).view({1, 3, 1, 1});
  const auto sd = torch::tensor(std::vector<float>(info_.stddev.begin(), info_.stddev.end()), x.options()).view({1, 3, 1, 1});
  return network_->run((x - mean) / sd);
}

torch::Tensor ClassifierCheckpoint::logits(const torch::Tensor& images) const { return run(images).at("logits"); }

torch::Tensor class_logit(const ClassifierCheckpoint& ckpt, const torch::Tensor& images, int class_id) {
  if (class_id < 0 || class_id >= ckpt.num_classes()) {
    throw InvalidArgument("class id " + std::to_string(class_id) + " outside 0.." + std::to_string(ckpt.num_classes() - 1));
  }
  return ckpt.logits(images).select(1, class_id);
}

torch::Tensor extract_features(const ClassifierCheckpoint& ckpt, const torch::Tensor& images, const std::string& tap) {
  const auto& taps = ckpt.info().taps;
  if (std::ranges::find(taps, tap) == taps.end()) throw InvalidArgument("unknown feature tap '" + tap + "'");
  if (images.dim() != 4 || images.size(1) != 3) throw InvalidArgument("classifier expects [N, 3, H, W] images");
  const auto& info = ckpt.info();
  const auto mean = torch::tensor(std::vector<float>(info.mean.begin(), info.mean.end()), images.options()).view({1, 3, 1, 1});
  const auto sd = torch::tensor(std::vector<float>(info.stddev.begin(), info.stddev.end()), images.options()).view({1, 3, 1, 1});
  auto acts = ckpt.network().run((images - mean) / sd);
  const auto it = acts.find(tap);
  if (it == acts.end()) throw InvalidArgument("tap '" + tap + "' is not available at this input size");
  return it->second;
}

torch::Tensor content_loss(const ClassifierCheckpoint& ckpt, const torch::Tensor& a, const torch::Tensor& b,
                           const std::string& tap) {
  return torch::mse_loss(extract_features(ckpt, a, tap), extract_features(ckpt, b, tap));
}

double classifier_accuracy(const ClassifierCheckpoint& ckpt, const LabeledImageSet& set) {
  if (!set.labeled() || set.size() == 0) throw InvalidArgument("accuracy needs a non-empty labeled set");
  torch::NoGradGuard no_grad;
  std::int64_t correct = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t b = 0; b < set.size(); b += kChunk) {
    const auto part = set.subset(b, b + kChunk);
    correct += ckpt.logits(part.tensor()).argmax(1).eq(part.label_tensor()).sum().item<std::int64_t>();
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

ClassifierTrainingResult train_classifier(const LabeledImageSet& set, const ClassifierConfig& cfg) {
  cfg.validate();
  if (!set.labeled()) throw InvalidArgument("classifier training needs labels");
  if (set.size() < 2) throw InvalidArgument("classifier training needs at least two images");
  torch::manual_seed(cfg.seed);
  Rng rng(cfg.seed);
  const auto split = split_images(set, cfg.heldout_fraction);
  if (split.train.size() == 0 || split.heldout.size() == 0) throw InvalidArgument("dataset too small to split");

  std::vector<std::string> names;
  for (int c = 0; c < set.num_classes(); ++c) names.push_back(std::to_string(c));
  auto ckpt = ClassifierCheckpoint::create(cfg.arch, cfg.input_size, names);

  auto train_x = split.train.tensor();
  if (train_x.size(2) != cfg.input_size || train_x.size(3) != cfg.input_size) {
    train_x = F::interpolate(train_x, F::InterpolateFuncOptions()
                                          .size(std::vector<std::int64_t>{cfg.input_size, cfg.input_size})
                                          .mode(torch::kBilinear)
                                          .align_corners(false));
  }
  const auto train_y = split.train.label_tensor();
  const auto mean = train_x.mean({0, 2, 3});
  const auto sd = train_x.std({0, 2, 3}).clamp_min(1e-3);
  for (int c = 0; c < 3; ++c) {
    ckpt.info().mean[static_cast<std::size_t>(c)] = mean[c].item<float>();
    ckpt.info().stddev[static_cast<std::size_t>(c)] = sd[c].item<float>();
  }

  auto* module = ckpt.network().module();
  torch::optim::Adam opt(module->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
  TrainingTrace trace;
  const auto n = static_cast<std::size_t>(train_x.size(0));
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double loss_sum = 0.0;
    int batches = 0;
    module->train();
    for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(cfg.batch_size)) {
      const auto e = std::min(n, b + static_cast<std::size_t>(cfg.batch_size));
      const auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + static_cast<std::ptrdiff_t>(b),
                                                               order.begin() + static_cast<std::ptrdiff_t>(e)),
                                     torch::kInt64);
      const auto loss = torch::cross_entropy_loss(ckpt.logits(train_x.index_select(0, idx)), train_y.index_select(0, idx));
      nn::check_finite(loss, "classifier loss", step);
      opt.zero_grad();
      loss.backward();
      opt.step();
      loss_sum += loss.item<double>();
      ++batches;
      ++step;
    }
    module->eval();
    const double acc = classifier_accuracy(ckpt, split.heldout);
    trace.add("classifier", epoch, "loss", loss_sum / batches);
    trace.add("classifier", epoch, "heldout_accuracy", acc);
    log_info("classifier " + cfg.arch + " epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
             " loss=" + std::to_string(loss_sum / batches) + " heldout_acc=" + std::to_string(acc));
  }
  freeze(ckpt.network());
  ckpt.info().heldout_accuracy = classifier_accuracy(ckpt, split.heldout);
  ckpt.info().usable = ckpt.info().heldout_accuracy > kUsableAccuracy;
  if (!ckpt.info().usable) {
    log_info("classifier accuracy " + std::to_string(ckpt.info().heldout_accuracy) + " is below the DIP gate");
  }
  return {std::move(ckpt), std::move(trace)};
}

void ClassifierCheckpoint::save(const std::filesystem::path& path) const {
  auto* module = network_->module();
  if (module == nullptr) throw InvalidArgument("external classifiers are loaded read-only and cannot be re-saved");
  torch::serialize::OutputArchive archive;
  module->save(archive);
  archive.save_to(path.string());
  nlohmann::json meta;
  meta["format"] = "strokeforge-classifier";
  meta["version"] = 1;
  meta["arch_id"] = info_.arch_id;
  meta["class_names"] = info_.class_names;
  meta["input_size"] = info_.input_size;
  meta["mean"] = info_.mean;
  meta["stddev"] = info_.stddev;
  meta["taps"] = info_.taps;
  meta["tap_shapes"] = info_.tap_shapes;
  meta["default_tap"] = info_.default_tap;
  meta["heldout_accuracy"] = info_.heldout_accuracy;
  meta["usable"] = info_.usable;
  std::ofstream out(sidecar_path(path));
  if (!out) throw IoError("cannot write " + sidecar_path(path).string());
  out << meta.dump(2) << '\n';
}

ClassifierCheckpoint ClassifierCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw IoError("missing classifier metadata " + sidecar_path(path).string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed classifier metadata: " + std::string(e.what()));
  }
  const auto format = meta.value("format", "");
  ClassifierInfo info;
  try {
    info.class_names = meta.at("class_names").get<std::vector<std::string>>();
    info.input_size = meta.at("input_size").get<int>();
    info.mean = meta.value("mean", info.mean);
    info.stddev = meta.value("stddev", info.stddev);
    info.taps = meta.at("taps").get<std::vector<std::string>>();
    info.tap_shapes = meta.value("tap_shapes", info.tap_shapes);
    info.default_tap = meta.value("default_tap", info.taps.empty() ? std::string() : info.taps.back());
    info.heldout_accuracy = meta.value("heldout_accuracy", -1.0);
    info.usable = meta.value("usable", false);
    info.arch_id = meta.value("arch_id", "external");
  } catch (const nlohmann::json::exception& e) {
    throw IoError("incomplete classifier metadata: " + std::string(e.what()));
  }
  if (format == "strokeforge-classifier") {
    auto ckpt = create(info.arch_id, info.input_size, info.class_names);
    try {
      torch::serialize::InputArchive archive;
      archive.load_from(path.string());
      ckpt.network().module()->load(archive);
    } catch (const c10::Error& e) {
      throw IoError("failed to load classifier weights from " + path.string() + ": " + e.what_without_backtrace());
    }
    freeze(ckpt.network());
    info.tap_shapes = ckpt.info().tap_shapes;
    return ClassifierCheckpoint(std::move(info), ckpt.network_);
  }
  if (format == "strokeforge-external") {
    torch::jit::Module module;
    try {
      module = torch::jit::load(path.string());
    } catch (const c10::Error& e) {
      throw IoError("failed to load TorchScript module " + path.string() + ": " + e.what_without_backtrace());
    }
    auto net = std::make_shared<ScriptedNetwork>(std::move(module), info.taps);
    if (info.default_tap.empty()) info.default_tap = info.taps.back();
    return ClassifierCheckpoint(std::move(info), std::move(net));
  }
  throw IoError(path.string() + " is not a classifier checkpoint");
}

}  // namespace strokeforge
