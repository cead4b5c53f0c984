#include "strokeforge/painter.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "strokeforge/config_json.hpp"
#include "strokeforge/error.hpp"
#include "strokeforge/rng.hpp"
#include "strokeforge/tensor_image.hpp"

namespace strokeforge {

std::string to_string(PainterKind kind) { return kind == PainterKind::kVae ? "vae" : "gan"; }

PainterKind parse_painter_kind(std::string_view text) {
  if (text == "vae") return PainterKind::kVae;
  if (text == "gan") return PainterKind::kGan;
  throw InvalidArgument("unknown painter kind '" + std::string(text) + "' (expected vae or gan)");
}

void VaePainterConfig::validate() const {
  if (latent_dim < 2) throw InvalidArgument("latent_dim must be >= 2");
  if (!(kl_weight >= 0.0)) throw InvalidArgument("kl_weight must be >= 0");
  if (vae_epochs < 1 || mapper_epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
}

void GanPainterConfig::validate() const {
  if (critic_iters_per_gen < 1) throw InvalidArgument("critic_iters_per_gen must be >= 1");
  if (!(gradient_penalty_weight >= 0.0)) throw InvalidArgument("gradient_penalty_weight must be >= 0");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(aux_pixel_weight >= 0.0)) throw InvalidArgument("aux_pixel_weight must be >= 0");
  if (warmup_epochs < 0) throw InvalidArgument("warmup_epochs must be >= 0");
  if (!(warmup_learning_rate > 0.0)) throw InvalidArgument("warmup_learning_rate must be > 0");
}

PainterNetImpl::PainterNetImpl(const PainterArch& arch) {
  mapper = register_module("mapper", nn::make_mlp({arch.action_dim, arch.hidden, arch.hidden, arch.code_dim}));
  decoder = register_module("decoder", nn::ConvDecoder(arch.code_dim, arch.canvas_size, arch.decoder_channels));
}

torch::Tensor PainterNetImpl::logits(const torch::Tensor& actions) {
  return decoder->forward(mapper->forward(actions));
}

torch::Tensor PainterNetImpl::forward(const torch::Tensor& actions) { return torch::sigmoid(logits(actions)); }

namespace {

void check_arch(const PainterArch& arch) {
  if (arch.action_dim != static_cast<int>(kActionDim) && arch.action_dim != static_cast<int>(kDiscreteActionDim)) {
    throw InvalidArgument("painter action_dim must be 12 or 13");
  }
  if (arch.canvas_size < 16 || arch.canvas_size % 16 != 0) {
    throw InvalidArgument("painter canvas_size must be a multiple of 16");
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

PainterCheckpoint::PainterCheckpoint(PainterMetadata metadata)
    : metadata_(std::move(metadata)), net_(nullptr) {
  check_arch(metadata_.arch);
  net_ = PainterNet(metadata_.arch);
}

torch::Tensor PainterCheckpoint::paint(const torch::Tensor& actions) const {
  if (actions.dim() != 2 || actions.size(1) != action_dim()) {
    throw InvalidArgument("paint: expected actions of shape [N, " + std::to_string(action_dim()) + "]");
  }
  return const_cast<PainterNetImpl&>(*net_).forward(actions);
}

std::vector<Image> PainterCheckpoint::paint(std::span<const Action> actions) const {
  if (action_dim() != static_cast<int>(kActionDim)) {
    throw InvalidArgument("paint: painter expects " + std::to_string(action_dim()) + "-dim actions");
  }
  torch::NoGradGuard no_grad;
  return unstack_images(paint(actions_to_tensor(actions)));
}

Image PainterCheckpoint::paint_one(std::span<const float> action) const {
  if (static_cast<int>(action.size()) != action_dim()) {
    throw InvalidArgument("paint: action has " + std::to_string(action.size()) + " components, painter expects " +
                          std::to_string(action_dim()));
  }
  torch::NoGradGuard no_grad;
  auto t = torch::tensor(std::vector<float>(action.begin(), action.end())).view({1, -1});
  return to_image(paint(t)[0]);
}

PainterCheckpoint PainterCheckpoint::clone() const {
  PainterCheckpoint copy(metadata_);
  nn::copy_state(*net_, *copy.net_);
  return copy;
}

PainterCheckpoint PainterCheckpoint::to_double() const {
  PainterCheckpoint copy = clone();
  copy.net_->to(torch::kFloat64);
  return copy;
}

void PainterCheckpoint::save(const std::filesystem::path& path) const {
  torch::save(net_, path.string());
  nlohmann::json meta;
  meta["format"] = "strokeforge-painter";
  meta["version"] = 1;
  meta["kind"] = to_string(metadata_.kind);
  meta["action_dim"] = metadata_.arch.action_dim;
  meta["canvas_size"] = metadata_.arch.canvas_size;
  meta["arch"] = {{"code_dim", metadata_.arch.code_dim},
                  {"hidden", metadata_.arch.hidden},
                  {"decoder_channels", metadata_.arch.decoder_channels}};
  meta["training_config"] = nlohmann::json::parse(metadata_.training_config);
  meta["dataset_fingerprint"] = metadata_.dataset_fingerprint;
  meta["heldout_mse"] = metadata_.heldout_mse;
  std::ofstream out(sidecar_path(path));
  if (!out) throw IoError("cannot write " + sidecar_path(path).string());
  out << meta.dump(2) << '\n';
}

PainterCheckpoint PainterCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw IoError("missing painter metadata " + sidecar_path(path).string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed painter metadata: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "strokeforge-painter") {
    throw IoError(path.string() + " is not a painter checkpoint");
  }
  PainterMetadata md;
  md.kind = parse_painter_kind(meta.at("kind").get<std::string>());
  md.arch.action_dim = meta.at("action_dim").get<int>();
  md.arch.canvas_size = meta.at("canvas_size").get<int>();
  md.arch.code_dim = meta.at("arch").at("code_dim").get<int>();
  md.arch.hidden = meta.at("arch").at("hidden").get<int>();
  md.arch.decoder_channels = meta.at("arch").at("decoder_channels").get<std::vector<std::int64_t>>();
  md.training_config = meta.value("training_config", nlohmann::json::object()).dump();
  md.dataset_fingerprint = meta.value("dataset_fingerprint", "");
  md.heldout_mse = meta.value("heldout_mse", -1.0);
  PainterCheckpoint ckpt(md);
  try {
    torch::load(ckpt.net_, path.string());
  } catch (const c10::Error& e) {
    throw IoError("failed to load painter weights from " + path.string() + ": " + e.what_without_backtrace());
  }
  return ckpt;
}

torch::Tensor actions_to_tensor(std::span<const Action> actions) {
  auto out = torch::empty({static_cast<std::int64_t>(actions.size()), static_cast<std::int64_t>(kActionDim)});
  auto acc = out.accessor<float, 2>();
  for (std::size_t i = 0; i < actions.size(); ++i)
    for (std::size_t k = 0; k < kActionDim; ++k) acc[static_cast<std::int64_t>(i)][static_cast<std::int64_t>(k)] = actions[i][k];
  return out;
}

DatasetSplit split_dataset(std::size_t size) {
  DatasetSplit s;
  s.size = size;
  if (size < 2) {
    s.train_end = size;
    return s;
  }
  const std::size_t heldout = std::max<std::size_t>(1, size * 5 / 100);
  s.train_end = size - heldout;
  return s;
}

namespace {

/// Zero-copy views over a loaded dataset plus batch assembly.
class DatasetTensors {
 public:
  explicit DatasetTensors(const StrokeDataset& ds)
      : n_(static_cast<std::int64_t>(ds.size())),
        h_(ds.header.height),
        w_(ds.header.width),
        a_(ds.header.action_dim) {
    images_ = torch::from_blob(const_cast<std::uint8_t*>(ds.images.data()), {n_, h_, w_, 3}, torch::kUInt8);
    actions_ = torch::from_blob(const_cast<float*>(ds.actions.data()), {n_, a_}, torch::kFloat32);
  }

  torch::Tensor images(const torch::Tensor& idx) const {
    return images_.index_select(0, idx).permute({0, 3, 1, 2}).to(torch::kFloat32).div_(255.0F);
  }
  torch::Tensor actions(const torch::Tensor& idx) const { return actions_.index_select(0, idx); }
  torch::Tensor images_range(std::int64_t begin, std::int64_t end) const {
    return images_.slice(0, begin, end).permute({0, 3, 1, 2}).to(torch::kFloat32).div_(255.0F);
  }
  torch::Tensor actions_range(std::int64_t begin, std::int64_t end) const {
    return actions_.slice(0, begin, end);
  }

 private:
  std::int64_t n_, h_, w_, a_;
  torch::Tensor images_;
  torch::Tensor actions_;
};

std::vector<torch::Tensor> shuffled_batches(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<torch::Tensor> batches;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(n, start + static_cast<std::size_t>(batch_size));
    if (end - start < 2 && !batches.empty()) break;
    batches.push_back(torch::tensor(std::vector<std::int64_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                              order.begin() + static_cast<std::ptrdiff_t>(end)),
                                    torch::kInt64));
  }
  return batches;
}

torch::Tensor random_batch(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(batch_size));
  for (auto& i : idx) i = rng.uniform_int(0, static_cast<std::int64_t>(n) - 1);
  return torch::tensor(idx, torch::kInt64);
}

void check_dataset(const StrokeDataset& ds, bool allow_discrete) {
  if (ds.size() == 0) throw InvalidArgument("painter training needs a non-empty dataset");
  if (ds.header.discrete() && !allow_discrete) {
    throw InvalidArgument("dataset holds discrete actions; enable allow_discrete to train on it");
  }
  if (ds.header.height != ds.header.width) throw InvalidArgument("painter datasets must be square");
}

/// Critic over (action, stroke) pairs: the action is broadcast to constant
/// planes and concatenated with the image channels at the input.
class PairCriticImpl : public torch::nn::Module {
 public:
  PairCriticImpl(std::int64_t action_dim, std::int64_t size)
      : trunk_(register_module("trunk", nn::ConvEncoder(3 + action_dim, size, std::vector<std::int64_t>{16, 32, 64, 128}))) {
    head_ = register_module("head", torch::nn::Linear(trunk_->output_features(), 1));
  }

  torch::Tensor forward(const torch::Tensor& actions, const torch::Tensor& images) {
    const auto planes = actions.view({actions.size(0), actions.size(1), 1, 1})
                            .expand({actions.size(0), actions.size(1), images.size(2), images.size(3)});
    return head_->forward(trunk_->forward(torch::cat({images, planes}, 1))).squeeze(1);
  }

 private:
  nn::ConvEncoder trunk_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(PairCritic);

double heldout_mse(const PainterCheckpoint& painter, const StrokeDataset& ds) {
  const auto split = split_dataset(ds.size());
  if (split.train_end >= split.size) return -1.0;
  return dataset_mse(painter, ds, split.train_end, split.size);
}

}  // namespace

double dataset_mse(const PainterCheckpoint& painter, const StrokeDataset& dataset, std::size_t begin,
                   std::size_t end) {
  if (begin >= end || end > dataset.size()) throw InvalidArgument("dataset_mse: empty or invalid range");
  if (static_cast<int>(dataset.header.action_dim) != painter.action_dim()) {
    throw InvalidArgument("dataset action_dim does not match painter");
  }
  torch::NoGradGuard no_grad;
  DatasetTensors data(dataset);
  double total = 0.0;
  constexpr std::int64_t kChunk = 256;
  for (auto b = static_cast<std::int64_t>(begin); b < static_cast<std::int64_t>(end); b += kChunk) {
    const auto e = std::min<std::int64_t>(static_cast<std::int64_t>(end), b + kChunk);
    const auto out = painter.paint(data.actions_range(b, e));
    total += (out - data.images_range(b, e)).pow(2).mean({1, 2, 3}).sum().item<double>();
  }
  return total / static_cast<double>(end - begin);
}

PainterTrainingResult train_vae_painter(const StrokeDataset& dataset, const VaePainterConfig& cfg,
                                        const std::string& dataset_fingerprint) {
  cfg.validate();
  check_dataset(dataset, cfg.allow_discrete);
  torch::manual_seed(cfg.seed);
  Rng rng(cfg.seed);

  PainterMetadata md;
  md.kind = PainterKind::kVae;
  md.arch.action_dim = static_cast<int>(dataset.header.action_dim);
  md.arch.canvas_size = static_cast<int>(dataset.header.height);
  md.arch.code_dim = cfg.latent_dim;
  md.training_config = nlohmann::json(cfg).dump();
  md.dataset_fingerprint = dataset_fingerprint;
  PainterCheckpoint painter(md);
  check_arch(md.arch);

  const auto size = md.arch.canvas_size;
  nn::ConvEncoder encoder(3, size, std::vector<std::int64_t>{32, 64, 128, 256});
  torch::nn::Linear fc_mu(encoder->output_features(), cfg.latent_dim);
  torch::nn::Linear fc_logvar(encoder->output_features(), cfg.latent_dim);
  auto& decoder = painter.net()->decoder;

  std::vector<torch::Tensor> vae_params;
  for (auto* m : std::initializer_list<torch::nn::Module*>{encoder.get(), fc_mu.get(), fc_logvar.get(), decoder.get()}) {
    const auto p = m->parameters();
    vae_params.insert(vae_params.end(), p.begin(), p.end());
  }
  torch::optim::Adam vae_opt(vae_params, torch::optim::AdamOptions(cfg.learning_rate));

  const DatasetTensors data(dataset);
  const auto split = split_dataset(dataset.size());
  TrainingTrace trace;
  std::int64_t step = 0;

  const auto encode_mean = [&](const torch::Tensor& x) { return fc_mu->forward(encoder->forward(x)); };

  for (int epoch = 0; epoch < cfg.vae_epochs; ++epoch) {
    double recon_sum = 0.0;
    double kl_sum = 0.0;
    int batches = 0;
    for (const auto& idx : shuffled_batches(split.train_end, cfg.batch_size, rng)) {
      const auto x = data.images(idx);
      const auto h = encoder->forward(x);
      const auto mu = fc_mu->forward(h);
      const auto logvar = fc_logvar->forward(h).clamp(-10.0, 10.0);
      const auto z = mu + torch::exp(0.5 * logvar) * torch::randn_like(mu);
      const auto logits = decoder->forward(z);
      const auto n = static_cast<double>(x.size(0));
      const auto recon =
          torch::binary_cross_entropy_with_logits(logits, x, {}, {}, at::Reduction::Sum) / n;
      const auto kl = -0.5 * torch::sum(1.0 + logvar - mu.pow(2) - logvar.exp()) / n;
      const auto loss = recon + cfg.kl_weight * kl;
      nn::check_finite(loss, "VAE loss", step);
      vae_opt.zero_grad();
      loss.backward();
      vae_opt.step();
      recon_sum += recon.item<double>();
      kl_sum += kl.item<double>();
      ++batches;
      ++step;
    }
    trace.add("vae", epoch, "recon", recon_sum / batches);
    trace.add("vae", epoch, "kl", kl_sum / batches);
    log_info("vae epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.vae_epochs) +
             " recon=" + std::to_string(recon_sum / batches) + " kl=" + std::to_string(kl_sum / batches));
  }

  // Stage two regresses the posterior mean, so the painter is deterministic.
  torch::Tensor targets;
  {
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> parts;
    constexpr std::int64_t kChunk = 256;
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(split.train_end); b += kChunk) {
      const auto e = std::min<std::int64_t>(static_cast<std::int64_t>(split.train_end), b + kChunk);
      parts.push_back(encode_mean(data.images_range(b, e)));
    }
    targets = torch::cat(parts);
  }
  auto& mapper = painter.net()->mapper;
  torch::optim::Adam mapper_opt(mapper->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
  for (int epoch = 0; epoch < cfg.mapper_epochs; ++epoch) {
    double loss_sum = 0.0;
    int batches = 0;
    for (const auto& idx : shuffled_batches(split.train_end, cfg.batch_size, rng)) {
      const auto pred = mapper->forward(data.actions(idx));
      const auto loss = torch::mse_loss(pred, targets.index_select(0, idx));
      nn::check_finite(loss, "mapper loss", step);
      mapper_opt.zero_grad();
      loss.backward();
      mapper_opt.step();
      loss_sum += loss.item<double>();
      ++batches;
      ++step;
    }
    trace.add("mapper", epoch, "latent_mse", loss_sum / batches);
    if ((epoch + 1) % 5 == 0 || epoch + 1 == cfg.mapper_epochs) {
      log_info("mapper epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.mapper_epochs) +
               " latent_mse=" + std::to_string(loss_sum / batches));
    }
  }

  const double mse = heldout_mse(painter, dataset);
  trace.add("eval", 0, "heldout_mse", mse);
  PainterMetadata final_md = painter.metadata();
  final_md.heldout_mse = mse;
  PainterCheckpoint result(final_md);
  nn::copy_state(*painter.net(), *result.net());
  return {std::move(result), std::move(trace)};
}

PainterTrainingResult train_gan_painter(const StrokeDataset& dataset, const GanPainterConfig& cfg,
                                        const std::string& dataset_fingerprint) {
  cfg.validate();
  check_dataset(dataset, cfg.allow_discrete);
  torch::manual_seed(cfg.seed);
  Rng rng(cfg.seed);

  PainterMetadata md;
  md.kind = PainterKind::kGan;
  md.arch.action_dim = static_cast<int>(dataset.header.action_dim);
  md.arch.canvas_size = static_cast<int>(dataset.header.height);
  md.arch.code_dim = md.arch.hidden;
  md.training_config = nlohmann::json(cfg).dump();
  md.dataset_fingerprint = dataset_fingerprint;
  PainterCheckpoint painter(md);
  auto& generator = painter.net();
  PairCritic critic(md.arch.action_dim, md.arch.canvas_size);

  const auto adam = torch::optim::AdamOptions(cfg.learning_rate).betas({0.5, 0.9});
  torch::optim::Adam gen_opt(generator->parameters(), adam);
  torch::optim::Adam critic_opt(critic->parameters(), adam);

  const DatasetTensors data(dataset);
  const auto split = split_dataset(dataset.size());
  TrainingTrace trace;
  std::int64_t step = 0;

  if (cfg.warmup_epochs > 0) {
    torch::optim::Adam warm_opt(generator->parameters(),
                                torch::optim::AdamOptions(cfg.warmup_learning_rate).betas({0.5, 0.9}));
    for (int epoch = 0; epoch < cfg.warmup_epochs; ++epoch) {
      double loss_sum = 0.0;
      int batches = 0;
      for (const auto& idx : shuffled_batches(split.train_end, cfg.batch_size, rng)) {
        const auto loss = torch::binary_cross_entropy_with_logits(generator->logits(data.actions(idx)), data.images(idx));
        nn::check_finite(loss, "warmup loss", step);
        warm_opt.zero_grad();
        loss.backward();
        warm_opt.step();
        loss_sum += loss.item<double>();
        ++batches;
      }
      trace.add("warmup", epoch, "pixel_bce", loss_sum / batches);
      log_info("gan warmup epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.warmup_epochs) +
               " pixel_bce=" + std::to_string(loss_sum / batches));
    }
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double w_sum = 0.0;
    double g_sum = 0.0;
    int batches = 0;
    for (const auto& gen_idx : shuffled_batches(split.train_end, cfg.batch_size, rng)) {
      double wasserstein = 0.0;
      for (int k = 0; k < cfg.critic_iters_per_gen; ++k) {
        const auto idx = k == 0 ? gen_idx : random_batch(split.train_end, static_cast<int>(gen_idx.size(0)), rng);
        const auto actions = data.actions(idx);
        const auto real = data.images(idx);
        torch::Tensor fake;
        {
          torch::NoGradGuard no_grad;
          fake = generator->forward(actions);
        }
        const auto d_real = critic->forward(actions, real).mean();
        const auto d_fake = critic->forward(actions, fake).mean();
        const auto gp = nn::gradient_penalty([&](const torch::Tensor& x) { return critic->forward(actions, x); },
                                             real, fake);
        const auto loss = d_fake - d_real + cfg.gradient_penalty_weight * gp;
        nn::check_finite(loss, "critic loss", step);
        critic_opt.zero_grad();
        loss.backward();
        critic_opt.step();
        wasserstein = (d_real - d_fake).item<double>();
      }

      const auto actions = data.actions(gen_idx);
      const auto fake = generator->forward(actions);
      auto gen_loss = -critic->forward(actions, fake).mean();
      if (cfg.aux_pixel_weight > 0.0) {
        gen_loss = gen_loss + cfg.aux_pixel_weight * torch::mse_loss(fake, data.images(gen_idx));
      }
      nn::check_finite(gen_loss, "generator loss", step);
      gen_opt.zero_grad();
      gen_loss.backward();
      gen_opt.step();

      if (step % 20 == 0) {
        trace.add("gan", step, "wasserstein", wasserstein);
        trace.add("gan", step, "generator_loss", gen_loss.item<double>());
      }
      w_sum += wasserstein;
      g_sum += gen_loss.item<double>();
      ++batches;
      ++step;
    }
    log_info("gan epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
             " wasserstein=" + std::to_string(w_sum / batches) + " gen=" + std::to_string(g_sum / batches));
  }

  const double mse = heldout_mse(painter, dataset);
  trace.add("eval", 0, "heldout_mse", mse);
  PainterMetadata final_md = painter.metadata();
  final_md.heldout_mse = mse;
  PainterCheckpoint result(final_md);
  nn::copy_state(*painter.net(), *result.net());
  return {std::move(result), std::move(trace)};
}

PainterMetrics evaluate_painter(const PainterCheckpoint& painter, const OracleConfig& cfg, int n,
                                std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("evaluate_painter: n must be >= 1");
  OracleConfig clean = cfg;
  clean.noise_scale = 0.0;
  clean.validate();
  if (clean.canvas_size != painter.canvas_size()) {
    throw InvalidArgument("oracle canvas size does not match painter");
  }
  Rng rng(seed);
  std::vector<Image> oracle_images;
  std::vector<std::vector<float>> inputs;
  std::vector<bool> high_texture;
  for (int i = 0; i < n; ++i) {
    if (painter.discrete()) {
      const auto dv = sample_discrete_action(rng, 0.25);
      oracle_images.push_back(render_stroke_discrete(dv, clean));
      const auto enc = encode_discrete(dv);
      inputs.emplace_back(enc.begin(), enc.end());
      high_texture.push_back(!dv.lift && snap(dv).brush_size() > kHighTextureBrushSize);
    } else {
      const auto a = sample_action(rng);
      oracle_images.push_back(render_stroke(a, clean));
      inputs.emplace_back(a.values.begin(), a.values.end());
      high_texture.push_back(a.brush_size() > kHighTextureBrushSize);
    }
  }
  std::vector<Image> painted;
  {
    torch::NoGradGuard no_grad;
    std::vector<float> flat;
    for (const auto& v : inputs) flat.insert(flat.end(), v.begin(), v.end());
    const auto t = torch::tensor(flat).view({n, painter.action_dim()});
    painted = unstack_images(painter.paint(t));
  }

  PainterMetrics m;
  m.n = n;
  const Image white = Image::white(clean.canvas_size, clean.canvas_size);
  for (int i = 0; i < n; ++i) {
    const double err = mse(painted[i], oracle_images[i]);
    const double base = mse(white, oracle_images[i]);
    m.mse += err;
    m.blank_baseline_mse += base;
    if (high_texture[i]) {
      ++m.high_texture_count;
      m.mse_high_texture += err;
      m.blank_baseline_mse_high_texture += base;
      m.laplacian_painter_high_texture += laplacian_energy(painted[i]);
      m.laplacian_oracle_high_texture += laplacian_energy(oracle_images[i]);
    }
  }
  m.mse /= n;
  m.blank_baseline_mse /= n;
  if (m.high_texture_count > 0) {
    const double k = m.high_texture_count;
    m.mse_high_texture /= k;
    m.blank_baseline_mse_high_texture /= k;
    m.laplacian_painter_high_texture /= k;
    m.laplacian_oracle_high_texture /= k;
  }

  constexpr int kPairsPerRow = 4;
  const int shown = std::min(n, 16);
  std::vector<Image> rows;
  for (int start = 0; start < shown; start += kPairsPerRow) {
    std::vector<Image> cells;
    for (int i = start; i < std::min(shown, start + kPairsPerRow); ++i) {
      std::array<Image, 2> pair{oracle_images[i], painted[i]};
      cells.push_back(hconcat(pair, 1));
    }
    rows.push_back(hconcat(cells, 6));
  }
  m.comparison_grid = vconcat(rows, 6);
  return m;
}

SweepResult action_sweep(const PainterCheckpoint& painter, std::span<const float> base, int dim, int steps) {
  if (static_cast<int>(base.size()) != painter.action_dim()) {
    throw InvalidArgument("sweep: base action has the wrong number of components");
  }
  if (dim < 0 || dim >= painter.action_dim()) {
    throw InvalidArgument("sweep: dim " + std::to_string(dim) + " outside 0.." + std::to_string(painter.action_dim() - 1));
  }
  if (steps < 1) throw InvalidArgument("sweep: steps must be >= 1");
  SweepResult out;
  std::vector<float> flat;
  for (int s = 0; s < steps; ++s) {
    const double v = steps == 1 ? 0.0 : static_cast<double>(s) / (steps - 1);
    out.values.push_back(v);
    std::vector<float> a(base.begin(), base.end());
    a[static_cast<std::size_t>(dim)] = static_cast<float>(v);
    flat.insert(flat.end(), a.begin(), a.end());
  }
  {
    torch::NoGradGuard no_grad;
    const auto t = torch::tensor(flat).view({steps, painter.action_dim()});
    out.frames = unstack_images(painter.paint(t));
  }
  for (const auto& f : out.frames) out.ink_mass.push_back(ink_mass(f));
  out.strip = hconcat(out.frames, 1);
  return out;
}

}  // namespace strokeforge
