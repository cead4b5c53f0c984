#include "doctest_torch.hpp"

#include "strokeforge/dataset.hpp"
#include "strokeforge/error.hpp"
#include "strokeforge/painter.hpp"
#include "strokeforge/rng.hpp"
#include "test_util.hpp"

using namespace strokeforge;

namespace {

PainterCheckpoint small_painter(PainterKind kind, int action_dim = 12) {
  PainterMetadata meta;
  meta.kind = kind;
  meta.arch.action_dim = action_dim;
  meta.arch.canvas_size = 32;
  meta.arch.hidden = 64;
  meta.arch.code_dim = 16;
  meta.arch.decoder_channels = {32, 16, 8};
  torch::manual_seed(3);
  return PainterCheckpoint(meta);
}

// Central differences of sum(w * paint(a)) against autograd.
double max_gradient_error(const PainterCheckpoint& painter, const torch::Tensor& action) {
  const auto p = painter.to_double();
  const auto w = torch::rand({1, 3, p.canvas_size(), p.canvas_size()}, torch::kFloat64);
  auto a = action.to(torch::kFloat64).clone().requires_grad_(true);
  (p.paint(a) * w).sum().backward();
  const auto analytic = a.grad().clone();
  torch::NoGradGuard no_grad;
  double worst = 0.0;
  const double h = 1e-3;
  for (int i = 0; i < p.action_dim(); ++i) {
    auto plus = a.detach().clone();
    auto minus = a.detach().clone();
    plus[0][i] += h;
    minus[0][i] -= h;
    const double numeric = ((p.paint(plus) * w).sum().item<double>() - (p.paint(minus) * w).sum().item<double>()) / (2 * h);
    const double g = analytic[0][i].item<double>();
    worst = std::max(worst, std::abs(numeric - g) / std::max(1e-3, std::max(std::abs(numeric), std::abs(g))));
  }
  return worst;
}

}  // namespace

TEST_SUITE("painter") {
  TEST_CASE("outputs stay in [0,1] for random actions") {
    const auto painter = small_painter(PainterKind::kGan);
    torch::manual_seed(5);
    torch::NoGradGuard no_grad;
    const auto out = painter.paint(torch::rand({64, 12}));
    CHECK(out.size(1) == 3);
    CHECK(out.size(2) == 32);
    CHECK(out.min().item<float>() >= 0.0F);
    CHECK(out.max().item<float>() <= 1.0F);
  }

  TEST_CASE("analytic gradients agree with finite differences") {
    for (auto kind : {PainterKind::kVae, PainterKind::kGan}) {
      const auto painter = small_painter(kind);
      torch::manual_seed(8);
      for (int k = 0; k < 3; ++k) {
        const auto a = torch::rand({1, 12}) * 0.8 + 0.1;
        CHECK(max_gradient_error(painter, a) < 1e-2);
      }
    }
  }

  TEST_CASE("save and load reproduce outputs and metadata") {
    TempDir dir;
    auto painter = small_painter(PainterKind::kVae);
    painter.save(dir / "p.pt");
    const auto back = PainterCheckpoint::load(dir / "p.pt");
    CHECK(back.kind() == PainterKind::kVae);
    CHECK(back.canvas_size() == 32);
    torch::NoGradGuard no_grad;
    const auto a = torch::rand({4, 12});
    CHECK(torch::equal(back.paint(a), painter.paint(a)));
    CHECK_THROWS_AS(PainterCheckpoint::load(dir / "missing.pt"), IoError);
  }

  TEST_CASE("painting does not mutate the painter") {
    const auto painter = small_painter(PainterKind::kGan);
    const auto before = painter.clone();
    auto a = torch::rand({2, 12}).requires_grad_(true);
    painter.paint(a).sum().backward();
    CHECK(nn::same_state(*before.net(), *painter.net()));
  }

  TEST_CASE("kind names round-trip") {
    CHECK(parse_painter_kind(to_string(PainterKind::kVae)) == PainterKind::kVae);
    CHECK(parse_painter_kind("gan") == PainterKind::kGan);
    CHECK_THROWS(parse_painter_kind("diffusion"));
  }

  TEST_CASE("sweep emits one frame per step and a strip") {
    const auto painter = small_painter(PainterKind::kGan, 13);
    std::vector<float> base(13, 0.5F);
    const auto sweep = action_sweep(painter, base, 12, 5);
    CHECK(sweep.frames.size() == 5);
    CHECK(sweep.values.front() == 0.0);
    CHECK(sweep.values.back() == 1.0);
    CHECK(sweep.ink_mass.size() == 5);
    CHECK(sweep.strip.height() == 32);
    CHECK_THROWS(action_sweep(painter, base, 13, 5));
  }

  TEST_CASE("short training runs on both kinds and rejects discrete data by default") {
    OracleConfig cfg = scaled_oracle_config(32);
    const auto ds = generate_dataset(96, cfg, false);
    VaePainterConfig vae;
    vae.vae_epochs = 1;
    vae.mapper_epochs = 1;
    vae.batch_size = 32;
    auto v = train_vae_painter(ds, vae, "abc");
    CHECK(v.painter.metadata().heldout_mse >= 0.0);
    CHECK(v.painter.metadata().dataset_fingerprint == "abc");
    CHECK_FALSE(v.trace.rows().empty());

    GanPainterConfig gan;
    gan.epochs = 1;
    gan.batch_size = 32;
    gan.critic_iters_per_gen = 1;
    auto g = train_gan_painter(ds, gan);
    CHECK(g.painter.kind() == PainterKind::kGan);

    gan.warmup_epochs = 2;
    auto warmed = train_gan_painter(ds, gan);
    int warm_rows = 0;
    for (const auto& row : warmed.trace.rows()) warm_rows += row.phase == "warmup";
    CHECK(warm_rows == 2);
    gan.warmup_epochs = -1;
    CHECK_THROWS_AS(train_gan_painter(ds, gan), InvalidArgument);

    const auto discrete = generate_dataset(32, cfg, true);
    CHECK_THROWS_AS(train_vae_painter(discrete, vae), InvalidArgument);
  }

  TEST_CASE("evaluation reports the blank baseline and a comparison grid") {
    const auto painter = small_painter(PainterKind::kGan);
    const auto m = evaluate_painter(painter, scaled_oracle_config(32), 20, 1);
    CHECK(m.n == 20);
    CHECK(m.blank_baseline_mse > 0.0);
    CHECK_FALSE(m.comparison_grid.empty());
    CHECK_THROWS(evaluate_painter(painter, scaled_oracle_config(64), 20, 1));
  }
}
