#include "strokeforge/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "strokeforge/canvas.hpp"
#include "strokeforge/config_json.hpp"
#include "strokeforge/error.hpp"
#include "strokeforge/oracle.hpp"
#include "strokeforge/rng.hpp"
#include "strokeforge/tensor_image.hpp"

namespace strokeforge {

void AgentConfig::validate() const {
  if (n_strokes < 1) throw InvalidArgument("n_strokes must be >= 1");
  if (recurrent_state_dim < 1) throw InvalidArgument("recurrent_state_dim must be >= 1");
  if (embedding_dim < 1) throw InvalidArgument("embedding_dim must be >= 1");
  if (encoder_channels.empty() || critic_channels.empty()) throw InvalidArgument("encoder channel lists must be non-empty");
  if (!(adversarial_loss_weight >= 0.0) || !(feature_match_weight >= 0.0) || !(gradient_penalty_weight >= 0.0)) {
    throw InvalidArgument("loss weights must be >= 0");
  }
  if (critic_iters < 1) throw InvalidArgument("critic_iters must be >= 1");
  if (!(learning_rate > 0.0) || !(critic_learning_rate > 0.0)) throw InvalidArgument("learning rates must be > 0");
  if (batch_size < 1 || epochs < 1) throw InvalidArgument("batch_size and epochs must be >= 1");
  if (augment_shift_px < 0 || !(augment_brightness >= 0.0)) throw InvalidArgument("augmentation must be >= 0");
}

AgentNetImpl::AgentNetImpl(const AgentConfig& cfg, int image_size)
    : n_strokes_(cfg.n_strokes),
      image_size_(image_size),
      canvas_feedback_(cfg.canvas_feedback),
      state_dim_(cfg.recurrent_state_dim) {
  cfg.validate();
  encoder_ = register_module("encoder", nn::ConvEncoder(canvas_feedback_ ? 6 : 3, image_size, cfg.encoder_channels));
  embed_ = register_module("embed", torch::nn::Linear(encoder_->output_features(), cfg.embedding_dim));
  cell_ = register_module("cell", torch::nn::LSTMCell(cfg.embedding_dim + static_cast<std::int64_t>(kActionDim),
                                                      cfg.recurrent_state_dim));
  head_ = register_module("head", torch::nn::Linear(cfg.recurrent_state_dim, static_cast<std::int64_t>(kActionDim)));
}

torch::Tensor AgentNetImpl::encode(const torch::Tensor& images) {
  return torch::leaky_relu(embed_->forward(encoder_->forward(images)), 0.2);
}

torch::Tensor AgentNetImpl::forward(const torch::Tensor& targets, const PainterCheckpoint* painter) {
  if (targets.dim() != 4 || targets.size(1) != 3 || targets.size(2) != image_size_ || targets.size(3) != image_size_) {
    throw InvalidArgument("agent expects targets of shape [N, 3, " + std::to_string(image_size_) + ", " +
                          std::to_string(image_size_) + "]");
  }
  if (canvas_feedback_ && painter == nullptr) throw InvalidArgument("canvas feedback requires a painter");
  const auto n = targets.size(0);
  const auto opts = targets.options();
  auto h = torch::zeros({n, state_dim_}, opts);
  auto c = torch::zeros({n, state_dim_}, opts);
  auto prev = torch::zeros({n, static_cast<std::int64_t>(kActionDim)}, opts);
  torch::Tensor canvas;
  torch::Tensor embedding;
  if (canvas_feedback_) {
    canvas = white_canvas(n, image_size_, image_size_, opts);
  } else {
    embedding = encode(targets);
  }
  std::vector<torch::Tensor> actions;
  for (int t = 0; t < n_strokes_; ++t) {
    if (canvas_feedback_) embedding = encode(torch::cat({targets, canvas}, 1));
    std::tie(h, c) = cell_->forward(torch::cat({embedding, prev}, 1), std::make_tuple(h, c));
    prev = torch::sigmoid(head_->forward(h));
    actions.push_back(prev);
    if (canvas_feedback_) canvas = composite(canvas, painter->paint(prev));
  }
  if (actions.empty()) return torch::zeros({n, 0, static_cast<std::int64_t>(kActionDim)}, opts);
  return torch::stack(actions, 1);
}

AgentCheckpoint::AgentCheckpoint(AgentConfig cfg, int image_size)
    : cfg_(std::move(cfg)), image_size_(image_size), net_(nullptr) {
  net_ = AgentNet(cfg_, image_size_);
}

AgentCheckpoint AgentCheckpoint::clone() const {
  AgentCheckpoint copy(cfg_, image_size_);
  nn::copy_state(*net_, *copy.net_);
  copy.preconditioned = preconditioned;
  copy.painter_fingerprint = painter_fingerprint;
  return copy;
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void AgentCheckpoint::save(const std::filesystem::path& path) const {
  torch::save(net_, path.string());
  nlohmann::json meta;
  meta["format"] = "strokeforge-agent";
  meta["version"] = 1;
  meta["image_size"] = image_size_;
  meta["config"] = cfg_;
  meta["preconditioned"] = preconditioned;
  meta["painter_fingerprint"] = painter_fingerprint;
  std::ofstream out(sidecar_path(path));
  if (!out) throw IoError("cannot write " + sidecar_path(path).string());
  out << meta.dump(2) << '\n';
}

AgentCheckpoint AgentCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw IoError("missing agent metadata " + sidecar_path(path).string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed agent metadata: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "strokeforge-agent") throw IoError(path.string() + " is not an agent checkpoint");
  AgentCheckpoint ckpt(meta.at("config").get<AgentConfig>(), meta.at("image_size").get<int>());
  ckpt.preconditioned = meta.value("preconditioned", false);
  ckpt.painter_fingerprint = meta.value("painter_fingerprint", "");
  try {
    torch::load(ckpt.net_, path.string());
  } catch (const c10::Error& e) {
    throw IoError("failed to load agent weights from " + path.string() + ": " + e.what_without_backtrace());
  }
  return ckpt;
}

torch::Tensor agent_forward(const AgentCheckpoint& agent, const torch::Tensor& targets, const PainterCheckpoint* painter) {
  torch::NoGradGuard no_grad;
  return const_cast<AgentNetImpl&>(*agent.net()).forward(targets, painter);
}

StrokeSequence agent_forward(const AgentCheckpoint& agent, const Image& target, const PainterCheckpoint* painter) {
  if (target.height() != agent.image_size() || target.width() != agent.image_size()) {
    throw InvalidArgument("target is " + std::to_string(target.width()) + "x" + std::to_string(target.height()) +
                          ", agent expects " + std::to_string(agent.image_size()) + "x" +
                          std::to_string(agent.image_size()));
  }
  return to_sequence(agent_forward(agent, to_tensor(target).unsqueeze(0), painter)[0]);
}

torch::Tensor paint_sequence(const PainterCheckpoint& painter, const torch::Tensor& actions) {
  if (actions.dim() != 3 || actions.size(2) != static_cast<std::int64_t>(kActionDim)) {
    throw InvalidArgument("paint_sequence: expected actions of shape [N, T, 12]");
  }
  if (painter.action_dim() != static_cast<int>(kActionDim)) {
    throw InvalidArgument("paint_sequence needs a continuous-action painter");
  }
  const auto n = actions.size(0);
  const auto steps = actions.size(1);
  const auto s = painter.canvas_size();
  auto canvas = white_canvas(n, s, s, actions.options());
  if (steps == 0) return canvas;
  const auto strokes = painter.paint(actions.reshape({n * steps, -1})).view({n, steps, 3, s, s});
  for (std::int64_t t = 0; t < steps; ++t) canvas = composite(canvas, strokes.select(1, t));
  return canvas;
}

Rollout rollout(const AgentCheckpoint& agent, const PainterCheckpoint& painter, const torch::Tensor& targets) {
  if (painter.canvas_size() != agent.image_size()) throw InvalidArgument("painter canvas size differs from agent input size");
  const auto actions = const_cast<AgentNetImpl&>(*agent.net()).forward(targets, &painter);
  return {paint_sequence(painter, actions), actions};
}

torch::Tensor oracle_canvas(const torch::Tensor& actions, const OracleConfig& cfg) {
  if (actions.dim() != 3 || actions.size(2) != static_cast<std::int64_t>(kActionDim)) {
    throw InvalidArgument("oracle_canvas: expected actions of shape [N, T, 12]");
  }
  const auto a = actions.detach().to(torch::kFloat32).contiguous();
  const auto n = a.size(0);
  const auto steps = a.size(1);
  auto canvas = white_canvas(n, cfg.canvas_size, cfg.canvas_size);
  const auto acc = a.accessor<float, 3>();
  for (std::int64_t t = 0; t < steps; ++t) {
    std::vector<Image> strokes;
    for (std::int64_t i = 0; i < n; ++i) {
      std::array<float, kActionDim> raw{};
      for (std::size_t k = 0; k < kActionDim; ++k) raw[k] = acc[i][t][static_cast<std::int64_t>(k)];
      strokes.push_back(render_stroke(clip_action(raw), cfg));
    }
    canvas = composite(canvas, stack_images(strokes));
  }
  return canvas;
}

double signed_area(const StrokeSequence& seq) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& a : seq.actions) {
    // Flip y so that positive area means counter-clockwise as seen on the canvas.
    pts.emplace_back(a[ActionField::kX0], -a[ActionField::kY0]);
    pts.emplace_back(a[ActionField::kX1], -a[ActionField::kY1]);
    pts.emplace_back(a[ActionField::kX2], -a[ActionField::kY2]);
  }
  double twice = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % pts.size()];
    twice += p.first * q.second - q.first * p.second;
  }
  return 0.5 * twice;
}

int chirality(const StrokeSequence& seq) {
  const double a = signed_area(seq);
  return a > 0.0 ? 1 : (a < 0.0 ? -1 : 0);
}

void StrokeLossSchedule::validate() const {
  if (kind == Kind::kConstant) {
    if (!std::isfinite(constant) || constant < 0.0) throw InvalidArgument("schedule constant must be finite and >= 0");
    return;
  }
  if (!std::isfinite(start) || !std::isfinite(end) || start < 0.0 || end < 0.0) {
    throw InvalidArgument("schedule endpoints must be finite and >= 0");
  }
  if (!(decay_fraction > 0.0 && decay_fraction <= 1.0)) throw InvalidArgument("decay_fraction must lie in (0, 1]");
}

double StrokeLossSchedule::weight(std::int64_t step, std::int64_t total_steps) const {
  if (kind == Kind::kConstant) return constant;
  const double span = decay_fraction * static_cast<double>(std::max<std::int64_t>(total_steps, 1));
  const double frac = static_cast<double>(step) / span;
  if (frac >= 1.0) return end;
  return start + (end - start) * frac;
}

namespace {

/// Conditional critic over channel-concatenated (target, canvas) pairs.
class PairImageCriticImpl : public torch::nn::Module {
 public:
  PairImageCriticImpl(int size, const std::vector<std::int64_t>& channels)
      : trunk_(register_module("trunk", nn::ConvEncoder(6, size, channels))) {
    head_ = register_module("head", torch::nn::Linear(trunk_->output_features(), 1));
  }

  torch::Tensor forward(const torch::Tensor& target, const torch::Tensor& canvas) {
    return head_->forward(trunk_->forward(torch::cat({target, canvas}, 1))).squeeze(1);
  }

  /// Intermediate activations followed by the score.
  std::pair<std::vector<torch::Tensor>, torch::Tensor> features(const torch::Tensor& target,
                                                                const torch::Tensor& canvas) {
    auto feats = trunk_->forward_features(torch::cat({target, canvas}, 1));
    auto score = head_->forward(feats.back().flatten(1)).squeeze(1);
    return {std::move(feats), std::move(score)};
  }

 private:
  nn::ConvEncoder trunk_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(PairImageCritic);

/// Random integer shift (white fill) and brightness offset per image.
torch::Tensor augment(const torch::Tensor& x, int shift, double brightness) {
  auto out = x;
  if (shift > 0) {
    const auto n = x.size(0);
    const auto s = x.size(2);
    const auto padded = torch::constant_pad_nd(x, {shift, shift, shift, shift}, 1.0);
    const auto offsets = torch::randint(0, 2 * shift + 1, {n, 2}, torch::kInt64);
    const auto acc = offsets.accessor<std::int64_t, 2>();
    std::vector<torch::Tensor> parts;
    for (std::int64_t i = 0; i < n; ++i) {
      parts.push_back(padded[i].slice(1, acc[i][0], acc[i][0] + s).slice(2, acc[i][1], acc[i][1] + s));
    }
    out = torch::stack(parts);
  }
  if (brightness > 0.0) {
    const auto delta = (torch::rand({x.size(0), 1, 1, 1}, x.options()) * 2.0 - 1.0) * brightness;
    out = (out + delta).clamp(0.0, 1.0);
  }
  return out;
}

std::vector<std::vector<std::size_t>> shuffled_index_batches(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
    const auto e = std::min(n, b + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b), order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return batches;
}

PainterCheckpoint frozen_copy(const PainterCheckpoint& painter) {
  PainterCheckpoint frozen = painter.clone();
  nn::set_requires_grad(*frozen.net(), false);
  frozen.net()->eval();
  return frozen;
}

void check_images(const LabeledImageSet& images, int size) {
  if (images.size() == 0) throw InvalidArgument("agent training needs a non-empty image set");
  if (images.height() != size || images.width() != size) {
    throw InvalidArgument("images are " + std::to_string(images.width()) + "x" + std::to_string(images.height()) +
                          ", painter expects " + std::to_string(size) + "x" + std::to_string(size));
  }
}

/// [num_classes, T, 12] template table; throws when a present label has no template.
torch::Tensor template_table(const std::vector<StrokeTemplate>& templates, const LabeledImageSet& labeled,
                             int n_strokes) {
  if (!labeled.labeled()) throw InvalidArgument("template loss needs a labeled image set");
  std::map<int, const StrokeTemplate*> by_class;
  for (const auto& t : templates) {
    if (by_class.contains(t.class_label)) {
      throw InvalidArgument("duplicate template for class " + std::to_string(t.class_label));
    }
    if (static_cast<int>(t.strokes.size()) != n_strokes) {
      throw InvalidArgument("template for class " + std::to_string(t.class_label) + " has " +
                            std::to_string(t.strokes.size()) + " strokes, agent emits " + std::to_string(n_strokes));
    }
    by_class[t.class_label] = &t;
  }
  const int classes = labeled.num_classes();
  for (int label : labeled.labels) {
    if (!by_class.contains(label)) throw InvalidArgument("missing template for class " + std::to_string(label));
  }
  auto table = torch::zeros({classes, n_strokes, static_cast<std::int64_t>(kActionDim)});
  for (const auto& [label, t] : by_class) {
    if (label >= 0 && label < classes) table[label] = to_tensor(t->strokes);
  }
  return table;
}

AgentTrainingResult adversarial_loop(AgentCheckpoint agent, const LabeledImageSet& images,
                                     const PainterCheckpoint& painter, const AgentConfig& cfg,
                                     const StrokeLossSchedule& schedule, const std::vector<StrokeTemplate>* templates) {
  cfg.validate();
  schedule.validate();
  if (painter.canvas_size() != agent.image_size()) throw InvalidArgument("painter canvas size differs from agent input size");
  check_images(images, painter.canvas_size());
  torch::Tensor table;
  const bool stroke_term = templates != nullptr;
  if (stroke_term) table = template_table(*templates, images, agent.n_strokes());

  torch::manual_seed(mix_seed(cfg.seed, 1));
  Rng rng(mix_seed(cfg.seed, 2));
  const PainterCheckpoint frozen = frozen_copy(painter);
  PairImageCritic critic(painter.canvas_size(), cfg.critic_channels);
  auto& net = agent.net();
  torch::optim::Adam agent_opt(net->parameters(), torch::optim::AdamOptions(cfg.learning_rate).betas({0.5, 0.9}));
  torch::optim::Adam critic_opt(critic->parameters(),
                                torch::optim::AdamOptions(cfg.critic_learning_rate).betas({0.5, 0.9}));

  const auto all = images.tensor();
  const auto labels = images.labeled() ? images.label_tensor() : torch::Tensor();
  const auto n = static_cast<std::size_t>(all.size(0));
  const auto batches_per_epoch = static_cast<std::int64_t>((n + cfg.batch_size - 1) / cfg.batch_size);
  const auto total_steps = batches_per_epoch * cfg.epochs;

  TrainingTrace trace;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double w_sum = 0.0;
    double fm_sum = 0.0;
    double l2_sum = 0.0;
    int batches = 0;
    for (const auto& idx_vec : shuffled_index_batches(n, cfg.batch_size, rng)) {
      const auto idx = torch::tensor(std::vector<std::int64_t>(idx_vec.begin(), idx_vec.end()), torch::kInt64);
      const auto x = all.index_select(0, idx);

      nn::set_requires_grad(*critic, true);
      double wasserstein = 0.0;
      for (int k = 0; k < cfg.critic_iters; ++k) {
        torch::Tensor canvas;
        {
          torch::NoGradGuard no_grad;
          canvas = rollout(agent, frozen, x).canvas;
        }
        const auto real = augment(x, cfg.augment_shift_px, cfg.augment_brightness);
        const auto d_real = critic->forward(x, real).mean();
        const auto d_fake = critic->forward(x, canvas).mean();
        const auto gp = nn::gradient_penalty([&](const torch::Tensor& c) { return critic->forward(x, c); }, real, canvas);
        const auto loss = d_fake - d_real + cfg.gradient_penalty_weight * gp;
        nn::check_finite(loss, "agent critic loss", step);
        critic_opt.zero_grad();
        loss.backward();
        critic_opt.step();
        wasserstein = (d_real - d_fake).item<double>();
      }

      nn::set_requires_grad(*critic, false);
      const auto out = rollout(agent, frozen, x);
      const auto real = augment(x, cfg.augment_shift_px, cfg.augment_brightness);
      const auto [fake_feats, fake_score] = critic->features(x, out.canvas);
      torch::Tensor fm = torch::zeros({}, x.options());
      {
        std::vector<torch::Tensor> real_feats;
        {
          torch::NoGradGuard no_grad;
          real_feats = critic->features(x, real).first;
        }
        for (std::size_t l = 0; l < real_feats.size(); ++l) fm = fm + torch::mse_loss(fake_feats[l], real_feats[l]);
      }
      auto loss = -cfg.adversarial_loss_weight * fake_score.mean() + cfg.feature_match_weight * fm;
      double lambda = 0.0;
      if (stroke_term) {
        lambda = schedule.weight(step, total_steps);
        if (lambda > 0.0) {
          const auto target = table.index_select(0, labels.index_select(0, idx));
          // squared distance per stroke vector, averaged over strokes
          loss = loss + lambda * (out.actions - target).pow(2).sum(-1).mean();
        }
      }
      nn::check_finite(loss, "agent loss", step);
      agent_opt.zero_grad();
      loss.backward();
      agent_opt.step();

      const double l2 = (out.canvas.detach() - x).pow(2).sum({1, 2, 3}).sqrt().mean().item<double>();
      if (step % 10 == 0) {
        trace.add("agent", step, "wasserstein", wasserstein);
        trace.add("agent", step, "feature_match", fm.item<double>());
        trace.add("agent", step, "l2", l2);
        if (stroke_term) trace.add("agent", step, "stroke_weight", lambda);
      }
      w_sum += wasserstein;
      fm_sum += fm.item<double>();
      l2_sum += l2;
      ++batches;
      ++step;
    }
    log_info("agent epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
             " wasserstein=" + std::to_string(w_sum / batches) + " feature_match=" + std::to_string(fm_sum / batches) +
             " l2=" + std::to_string(l2_sum / batches));
  }
  return {std::move(agent), std::move(trace)};
}

}  // namespace

AgentTrainingResult train_agent(const LabeledImageSet& images, const PainterCheckpoint& painter, const AgentConfig& cfg) {
  cfg.validate();
  torch::manual_seed(cfg.seed);
  AgentCheckpoint agent(cfg, painter.canvas_size());
  return adversarial_loop(std::move(agent), images, painter, cfg, StrokeLossSchedule::zero(), nullptr);
}

AgentTrainingResult resume_adversarial(const AgentCheckpoint& agent, const LabeledImageSet& images,
                                       const PainterCheckpoint& painter, const AgentConfig& cfg,
                                       const StrokeLossSchedule& schedule,
                                       const std::vector<StrokeTemplate>& templates) {
  if (cfg.n_strokes != agent.n_strokes()) throw InvalidArgument("config n_strokes differs from the agent's");
  return adversarial_loop(agent.clone(), images, painter, cfg, schedule, templates.empty() ? nullptr : &templates);
}

double template_mse(const AgentCheckpoint& agent, const std::vector<StrokeTemplate>& templates,
                    const LabeledImageSet& labeled) {
  if (labeled.size() == 0) throw InvalidArgument("template_mse: empty image set");
  const auto table = template_table(templates, labeled, agent.n_strokes());
  torch::NoGradGuard no_grad;
  const auto actions = agent_forward(agent, labeled.tensor());
  return torch::mse_loss(actions, table.index_select(0, labeled.label_tensor())).item<double>();
}

AgentTrainingResult precondition_agent(const AgentCheckpoint& agent, const std::vector<StrokeTemplate>& templates,
                                       const LabeledImageSet& labeled, const PreconditionConfig& cfg) {
  if (!labeled.labeled()) throw InvalidArgument("preconditioning needs labeled images");
  if (labeled.size() == 0) throw InvalidArgument("preconditioning needs a non-empty image set");
  if (agent.config().canvas_feedback) throw InvalidArgument("preconditioning supports agents without canvas feedback");
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.max_epochs < 1 || !(cfg.target_mse > 0.0)) {
    throw InvalidArgument("invalid preconditioning configuration");
  }
  if (labeled.height() != agent.image_size() || labeled.width() != agent.image_size()) {
    throw InvalidArgument("labeled images do not match the agent's input size");
  }
  const auto table = template_table(templates, labeled, agent.n_strokes());
  AgentCheckpoint out = agent.clone();
  auto& net = out.net();
  torch::manual_seed(cfg.seed);
  Rng rng(cfg.seed);
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
  const auto all = labeled.tensor();
  const auto targets = table.index_select(0, labeled.label_tensor());

  TrainingTrace trace;
  out.preconditioned = false;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (const auto& idx_vec : shuffled_index_batches(labeled.size(), cfg.batch_size, rng)) {
      const auto idx = torch::tensor(std::vector<std::int64_t>(idx_vec.begin(), idx_vec.end()), torch::kInt64);
      const auto loss = torch::mse_loss(net->forward(all.index_select(0, idx)), targets.index_select(0, idx));
      nn::check_finite(loss, "precondition loss", step);
      opt.zero_grad();
      loss.backward();
      opt.step();
      ++step;
    }
    double mse;
    {
      torch::NoGradGuard no_grad;
      mse = torch::mse_loss(net->forward(all), targets).item<double>();
    }
    trace.add("precondition", epoch, "action_mse", mse);
    if ((epoch + 1) % 10 == 0) log_info("precondition epoch " + std::to_string(epoch + 1) + " action_mse=" + std::to_string(mse));
    if (mse < cfg.target_mse) {
      out.preconditioned = true;
      log_info("precondition reached action_mse=" + std::to_string(mse) + " after " + std::to_string(epoch + 1) +
               " epochs");
      break;
    }
  }
  if (!out.preconditioned) log_info("precondition stopped at max_epochs without reaching the target");
  return {std::move(out), std::move(trace)};
}

ReconstructionMetrics evaluate_reconstruction(const AgentCheckpoint& agent, const PainterCheckpoint& painter,
                                              const LabeledImageSet& images, const OracleConfig* oracle) {
  check_images(images, painter.canvas_size());
  torch::NoGradGuard no_grad;
  ReconstructionMetrics m;
  double l2 = 0.0;
  double l2_white = 0.0;
  double transfer = 0.0;
  constexpr std::size_t kChunk = 128;
  for (std::size_t b = 0; b < images.size(); b += kChunk) {
    const auto part = images.subset(b, b + kChunk);
    const auto x = part.tensor();
    const auto out = rollout(agent, painter, x);
    l2 += (out.canvas - x).pow(2).sum({1, 2, 3}).sqrt().sum().item<double>();
    l2_white += (1.0 - x).pow(2).sum({1, 2, 3}).sqrt().sum().item<double>();
    if (oracle != nullptr) {
      const auto reference = oracle_canvas(out.actions, *oracle);
      transfer += (out.canvas - reference).pow(2).mean({1, 2, 3}).sum().item<double>();
    }
  }
  const auto count = static_cast<double>(images.size());
  m.mean_l2 = l2 / count;
  m.mean_l2_white = l2_white / count;
  m.transfer_mse = oracle != nullptr ? transfer / count : 0.0;
  return m;
}

StrokeOrderStability stroke_order_stability(const AgentCheckpoint& agent, const LabeledImageSet& images,
                                            const PainterCheckpoint* painter) {
  if (images.size() < 2) throw InvalidArgument("stroke_order_stability needs at least two images");
  const auto x = images.tensor();
  const auto actions = agent_forward(agent, x, painter);
  const auto start = actions.select(1, 0).index({torch::indexing::Slice(), torch::indexing::Slice(6, 8)}).to(torch::kFloat64);
  const auto s = x.size(2);
  const auto ink = (1.0 - std::get<0>(x.min(1))).to(torch::kFloat64);  // [N, H, W]
  const auto coords = (torch::arange(s, torch::kFloat64) + 0.5) / static_cast<double>(s);
  const auto mass = ink.sum({1, 2}).clamp_min(1e-12);
  const auto cx = (ink * coords.view({1, 1, s})).sum({1, 2}) / mass;
  const auto cy = (ink * coords.view({1, s, 1})).sum({1, 2}) / mass;
  const auto centroid = torch::stack({cx, cy}, 1);
  StrokeOrderStability out;
  out.first_start_variance = start.var(0, false).sum().item<double>();
  out.centroid_variance = centroid.var(0, false).sum().item<double>();
  return out;
}

StrokeSequence to_sequence(const torch::Tensor& actions) {
  if (actions.dim() != 2 || actions.size(1) != static_cast<std::int64_t>(kActionDim)) {
    throw InvalidArgument("expected actions of shape [T, 12]");
  }
  const auto a = actions.detach().to(torch::kFloat32).contiguous();
  const auto acc = a.accessor<float, 2>();
  StrokeSequence seq;
  for (std::int64_t t = 0; t < a.size(0); ++t) {
    std::array<float, kActionDim> raw{};
    for (std::size_t k = 0; k < kActionDim; ++k) raw[k] = acc[t][static_cast<std::int64_t>(k)];
    seq.actions.push_back(clip_action(raw));
  }
  return seq;
}

torch::Tensor to_tensor(const StrokeSequence& seq) {
  auto out = torch::zeros({static_cast<std::int64_t>(seq.size()), static_cast<std::int64_t>(kActionDim)});
  auto acc = out.accessor<float, 2>();
  for (std::size_t t = 0; t < seq.size(); ++t)
    for (std::size_t k = 0; k < kActionDim; ++k) acc[static_cast<std::int64_t>(t)][static_cast<std::int64_t>(k)] = seq.actions[t][k];
  return out;
}

namespace {

nlohmann::json sequence_json(const StrokeSequence& seq) {
  auto arr = nlohmann::json::array();
  for (const auto& a : seq.actions) arr.push_back(a.values);
  return arr;
}

StrokeSequence sequence_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw IoError("stroke list must be a JSON array");
  StrokeSequence seq;
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != kActionDim) throw IoError("each stroke must be an array of 12 numbers");
    const auto raw = item.get<std::vector<float>>();
    Action a;
    std::ranges::copy(raw, a.values.begin());
    if (!is_valid(a)) throw IoError("stroke component outside [0,1]");
    seq.actions.push_back(a);
  }
  return seq;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void export_strokes(const StrokeSequence& seq, const std::filesystem::path& path) {
  write_json(sequence_json(seq), path);
}

StrokeSequence import_strokes(const std::filesystem::path& path) { return sequence_from_json(read_json(path)); }

std::vector<StrokeTemplate> load_templates(const std::filesystem::path& path) {
  const auto j = read_json(path);
  if (!j.contains("templates")) throw IoError(path.string() + " has no \"templates\" list");
  std::vector<StrokeTemplate> out;
  for (const auto& item : j.at("templates")) {
    StrokeTemplate t;
    t.class_label = item.at("class").get<int>();
    t.strokes = sequence_from_json(item.at("actions"));
    out.push_back(std::move(t));
  }
  return out;
}

void save_templates(const std::vector<StrokeTemplate>& templates, const std::filesystem::path& path) {
  nlohmann::json j;
  j["templates"] = nlohmann::json::array();
  for (const auto& t : templates) j["templates"].push_back({{"class", t.class_label}, {"actions", sequence_json(t.strokes)}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace strokeforge
