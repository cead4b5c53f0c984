#include "doctest_torch.hpp"

#include "strokeforge/agent.hpp"
#include "strokeforge/canvas.hpp"
#include "strokeforge/error.hpp"
#include "strokeforge/rng.hpp"
#include "strokeforge/tensor_image.hpp"
#include "test_util.hpp"

using namespace strokeforge;

#ifndef STROKEFORGE_TEST_DATA_DIR
#define STROKEFORGE_TEST_DATA_DIR "data"
#endif

namespace {

PainterCheckpoint tiny_painter() {
  PainterMetadata meta;
  meta.arch.canvas_size = 16;
  meta.arch.hidden = 32;
  meta.arch.code_dim = 8;
  meta.arch.decoder_channels = {16, 8};
  torch::manual_seed(1);
  return PainterCheckpoint(meta);
}

AgentConfig tiny_config() {
  AgentConfig cfg;
  cfg.n_strokes = 2;
  cfg.recurrent_state_dim = 16;
  cfg.encoder_channels = {8, 8};
  cfg.embedding_dim = 16;
  cfg.critic_channels = {8, 8};
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.seed = 9;
  return cfg;
}

LabeledImageSet stroke_images(int n) {
  OracleConfig cfg = scaled_oracle_config(16);
  Rng rng(4);
  LabeledImageSet set;
  for (int i = 0; i < n; ++i) {
    set.images.push_back(render_stroke(sample_action(rng), cfg));
    set.labels.push_back(i % 2);
  }
  return set;
}

Action stroke(float x0, float y0, float x1, float y1, float x2, float y2) {
  Action a;
  a.values = {1, 1, 0.5F, 0, 0, 0, x0, y0, x1, y1, x2, y2};
  return a;
}

// Orientation on screen (y down) from the raw shoelace: negative raw area is counter-clockwise.
int screen_orientation(const StrokeSequence& seq) {
  std::vector<std::pair<double, double>> p;
  for (const auto& a : seq.actions) {
    for (int k = 0; k < 3; ++k) p.emplace_back(a[6 + 2 * k], a[7 + 2 * k]);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& [x0, y0] = p[i];
    const auto& [x1, y1] = p[(i + 1) % p.size()];
    s += x0 * y1 - x1 * y0;
  }
  return s < 0 ? 1 : (s > 0 ? -1 : 0);
}

std::vector<StrokeTemplate> two_templates() {
  return {{0, {{stroke(0.5F, 0.2F, 0.2F, 0.2F, 0.2F, 0.5F), stroke(0.2F, 0.5F, 0.5F, 0.8F, 0.8F, 0.5F)}}},
          {1, {{stroke(0.5F, 0.1F, 0.5F, 0.5F, 0.5F, 0.9F), stroke(0.4F, 0.9F, 0.5F, 0.9F, 0.6F, 0.9F)}}}};
}

}  // namespace

TEST_SUITE("agent") {
  TEST_CASE("forward emits [N, T, 12] actions in [0,1]") {
    torch::manual_seed(0);
    AgentCheckpoint agent(tiny_config(), 16);
    const auto x = torch::rand({3, 3, 16, 16});
    const auto a = agent_forward(agent, x);
    CHECK(a.sizes() == torch::IntArrayRef({3, 2, 12}));
    CHECK(a.min().item<float>() >= 0.0F);
    CHECK(a.max().item<float>() <= 1.0F);
  }

  TEST_CASE("canvas feedback needs a painter and still emits actions") {
    auto cfg = tiny_config();
    cfg.canvas_feedback = true;
    AgentCheckpoint agent(cfg, 16);
    const auto painter = tiny_painter();
    const auto x = torch::rand({2, 3, 16, 16});
    CHECK(agent_forward(agent, x, &painter).size(1) == 2);
    CHECK_THROWS(agent_forward(agent, x));
  }

  TEST_CASE("paint_sequence composites strokes in order onto white") {
    const auto painter = tiny_painter();
    torch::NoGradGuard no_grad;
    CHECK(torch::equal(paint_sequence(painter, torch::zeros({2, 0, 12})), white_canvas(2, 16, 16)));
    const auto actions = torch::rand({2, 3, 12});
    auto expected = white_canvas(2, 16, 16);
    for (int t = 0; t < 3; ++t) expected = composite(expected, painter.paint(actions.select(1, t)));
    CHECK(torch::allclose(paint_sequence(painter, actions), expected));
  }

  TEST_CASE("chirality agrees with on-screen orientation") {
    // top -> left -> bottom -> right is counter-clockwise on screen.
    StrokeSequence ccw{{stroke(0.5F, 0.1F, 0.3F, 0.2F, 0.1F, 0.5F), stroke(0.1F, 0.5F, 0.3F, 0.8F, 0.5F, 0.9F),
                        stroke(0.5F, 0.9F, 0.8F, 0.8F, 0.9F, 0.5F)}};
    CHECK(chirality(ccw) == 1);
    CHECK(screen_orientation(ccw) == 1);
    StrokeSequence cw = ccw;
    std::ranges::reverse(cw.actions);
    for (auto& a : cw.actions) {
      std::swap(a[6], a[10]);
      std::swap(a[7], a[11]);
    }
    CHECK(chirality(cw) == -1);
    Rng rng(3);
    for (int k = 0; k < 50; ++k) {
      StrokeSequence s;
      for (int i = 0; i < 3; ++i) s.actions.push_back(sample_action(rng));
      CHECK(chirality(s) == screen_orientation(s));
      CHECK(std::abs(signed_area(s)) <= 1.0);
    }
  }

  TEST_CASE("bundled class-0 template is counter-clockwise") {
    const auto templates = load_templates(std::string(STROKEFORGE_TEST_DATA_DIR) + "/templates/digits.json");
    CHECK(templates.size() == 10);
    for (const auto& t : templates) {
      CHECK(t.strokes.size() == 4);
      if (t.class_label == 0) CHECK(chirality(t.strokes) == 1);
    }
  }

  TEST_CASE("linear decay schedule") {
    StrokeLossSchedule s;
    CHECK(s.weight(0, 100) == doctest::Approx(1.0));
    CHECK(s.weight(15, 100) == doctest::Approx(0.5));
    CHECK(s.weight(30, 100) == doctest::Approx(0.0));
    CHECK(s.weight(99, 100) == doctest::Approx(0.0));
    CHECK(StrokeLossSchedule::zero().weight(0, 10) == 0.0);
    s.decay_fraction = 0.0;
    CHECK_THROWS(s.validate());
  }

  TEST_CASE("resuming with a zero schedule reproduces train_agent and keeps the painter frozen") {
    const auto painter = tiny_painter();
    const auto before = painter.clone();
    const auto images = stroke_images(8);
    const auto cfg = tiny_config();
    const auto trained = train_agent(images, painter, cfg);
    torch::manual_seed(cfg.seed);
    AgentCheckpoint fresh(cfg, 16);
    const auto resumed = resume_adversarial(fresh, images, painter, cfg, StrokeLossSchedule::zero(), {});
    CHECK(nn::same_state(*trained.agent.net(), *resumed.agent.net()));
    CHECK(nn::same_state(*before.net(), *painter.net()));
    CHECK_FALSE(trained.trace.rows().empty());
  }

  TEST_CASE("preconditioning pulls actions toward the templates") {
    const auto images = stroke_images(8);
    const auto templates = two_templates();
    torch::manual_seed(2);
    AgentCheckpoint agent(tiny_config(), 16);
    const double before = template_mse(agent, templates, images);
    PreconditionConfig pc;
    pc.max_epochs = 60;
    pc.batch_size = 8;
    pc.learning_rate = 3e-3;
    pc.target_mse = 0.01;
    const auto out = precondition_agent(agent, templates, images, pc);
    const double after = template_mse(out.agent, templates, images);
    CHECK(after < before);
    CHECK(out.agent.preconditioned == (after < 0.01));

    auto missing = templates;
    missing.pop_back();
    CHECK_THROWS_WITH_AS(template_mse(agent, missing, images), "missing template for class 1", InvalidArgument);
    auto unlabeled = images;
    unlabeled.labels.clear();
    CHECK_THROWS(precondition_agent(agent, templates, unlabeled, pc));
  }

  TEST_CASE("gradients flow end to end through rollout and compositing") {
    auto painter = tiny_painter().to_double();
    torch::manual_seed(4);
    AgentCheckpoint agent(tiny_config(), 16);
    agent.net()->to(torch::kFloat64);
    const auto x = torch::rand({2, 3, 16, 16}, torch::kFloat64);
    const auto loss_of = [&] { return (rollout(agent, painter, x).canvas - x).pow(2).sum(); };
    auto params = agent.net()->parameters();
    for (auto& p : params) p.mutable_grad() = torch::Tensor();
    loss_of().backward();
    auto& bias = params.back();
    const auto analytic = bias.grad().clone();
    torch::NoGradGuard no_grad;
    const double h = 1e-3;
    for (std::int64_t i = 0; i < bias.numel(); i += 3) {
      const double saved = bias.view(-1)[i].item<double>();
      bias.view(-1)[i] = saved + h;
      const double up = loss_of().item<double>();
      bias.view(-1)[i] = saved - h;
      const double down = loss_of().item<double>();
      bias.view(-1)[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double g = analytic.view(-1)[i].item<double>();
      CHECK(std::abs(numeric - g) / std::max(1e-4, std::max(std::abs(numeric), std::abs(g))) < 1e-2);
    }
  }

  TEST_CASE("checkpoints, strokes and templates round-trip through files") {
    TempDir dir;
    torch::manual_seed(6);
    AgentCheckpoint agent(tiny_config(), 16);
    agent.painter_fingerprint = "feed";
    agent.save(dir / "a.pt");
    const auto back = AgentCheckpoint::load(dir / "a.pt");
    CHECK(back.painter_fingerprint == "feed");
    CHECK(nn::same_state(*agent.net(), *back.net()));

    const auto templates = two_templates();
    save_templates(templates, dir / "t.json");
    const auto t2 = load_templates(dir / "t.json");
    REQUIRE(t2.size() == 2);
    CHECK(t2[1].strokes == templates[1].strokes);

    export_strokes(templates[0].strokes, dir / "s.json");
    CHECK(import_strokes(dir / "s.json") == templates[0].strokes);
    CHECK(to_sequence(to_tensor(templates[0].strokes)) == templates[0].strokes);
  }

  TEST_CASE("reconstruction metrics and stability diagnostics are computable") {
    const auto painter = tiny_painter();
    torch::manual_seed(7);
    AgentCheckpoint agent(tiny_config(), 16);
    const auto images = stroke_images(6);
    const OracleConfig oracle = scaled_oracle_config(16);
    const auto m = evaluate_reconstruction(agent, painter, images, &oracle);
    CHECK(m.mean_l2 > 0.0);
    CHECK(m.mean_l2_white > 0.0);
    CHECK(m.transfer_mse >= 0.0);
    const auto s = stroke_order_stability(agent, images, &painter);
    CHECK(std::isfinite(s.first_start_variance));
    CHECK(s.centroid_variance >= 0.0);
  }
}
