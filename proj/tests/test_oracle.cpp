#include "doctest_torch.hpp"

#include <cmath>

#include "strokeforge/action.hpp"
#include "strokeforge/oracle.hpp"
#include "strokeforge/rng.hpp"

using namespace strokeforge;

namespace {

Action point_action(double x, double y, float size, float pressure) {
  Action a;
  a[ActionField::kStartPressure] = pressure;
  a[ActionField::kEndPressure] = pressure;
  a[ActionField::kBrushSize] = size;
  for (auto f : {ActionField::kX0, ActionField::kX1, ActionField::kX2}) a[f] = static_cast<float>(x);
  for (auto f : {ActionField::kY0, ActionField::kY1, ActionField::kY2}) a[f] = static_cast<float>(y);
  return a;
}

// Midpoint-rule integration of the disc chord length clipped to a pixel.
double numeric_coverage(double cx, double cy, double r, int px, int py) {
  constexpr int kSteps = 4000;
  double area = 0.0;
  for (int i = 0; i < kSteps; ++i) {
    const double x = px + (i + 0.5) / kSteps;
    const double dx = x - cx;
    if (std::abs(dx) >= r) continue;
    const double h = std::sqrt(r * r - dx * dx);
    const double lo = std::max<double>(py, cy - h);
    const double hi = std::min<double>(py + 1, cy + h);
    if (hi > lo) area += (hi - lo) / kSteps;
  }
  return area;
}

Action mirror(Action a) {
  for (auto f : {ActionField::kX0, ActionField::kX1, ActionField::kX2}) a[f] = 1.0F - a[f];
  return a;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("single dab matches an independent disc rasterization") {
    OracleConfig cfg;
    cfg.canvas_size = 32;
    cfg.max_radius_px = 6.0;
    const Action a = point_action(0.41, 0.57, 0.8F, 1.0F);
    const Image im = render_stroke(a, cfg);
    const double cx = a[ActionField::kX0] * 32.0;
    const double cy = a[ActionField::kY0] * 32.0;
    const double r = cfg.min_radius_px + (cfg.max_radius_px - cfg.min_radius_px) * 0.8F;
    double worst = 0.0;
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const double expected = 1.0 - numeric_coverage(cx, cy, r, x, y);
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(im.at(y, x, c) - expected));
      }
    }
    CHECK(worst <= 1.0 / 255.0);
  }

  TEST_CASE("coverage of a fully enclosed pixel is one") {
    CHECK(disc_rect_coverage(5.0, 5.0, 3.0, 4.0, 4.0, 5.0, 5.0) == doctest::Approx(1.0));
    CHECK(disc_rect_coverage(5.0, 5.0, 0.5, 10.0, 10.0, 11.0, 11.0) == 0.0);
    CHECK(disc_rect_coverage(0.0, 0.0, 1.0, -2.0, -2.0, 2.0, 2.0) == doctest::Approx(M_PI));
  }

  TEST_CASE("horizontal mirror symmetry") {
    OracleConfig cfg;
    cfg.canvas_size = 48;
    cfg.max_radius_px = 5.0;
    Rng rng(7);
    for (int k = 0; k < 10; ++k) {
      const Action a = sample_action(rng);
      const Image left = render_stroke(a, cfg);
      const Image right = render_stroke(mirror(a), cfg);
      double worst = 0.0;
      for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
          for (int c = 0; c < 3; ++c) worst = std::max(worst, static_cast<double>(std::abs(left.at(y, x, c) - right.at(y, 47 - x, c))));
        }
      }
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("zero pressure renders exactly white") {
    OracleConfig cfg;
    Rng rng(3);
    Action a = sample_action(rng);
    a[ActionField::kStartPressure] = 0.0F;
    a[ActionField::kEndPressure] = 0.0F;
    const Image im = render_stroke(a, cfg);
    for (float v : im.data()) REQUIRE(v == 1.0F);
  }

  TEST_CASE("ink mass is monotone in brush size") {
    OracleConfig cfg;
    cfg.canvas_size = 32;
    Rng rng(11);
    for (int k = 0; k < 5; ++k) {
      Action a = sample_action(rng);
      a[ActionField::kStartPressure] = 1.0F;
      a[ActionField::kEndPressure] = 1.0F;
      for (auto f : {ActionField::kColorR, ActionField::kColorG, ActionField::kColorB}) a[f] = 0.0F;
      double previous = -1.0;
      for (int s = 0; s <= 10; ++s) {
        a[ActionField::kBrushSize] = s / 10.0F;
        const double mass = ink_mass(render_stroke(a, cfg));
        CHECK(mass >= previous - 1e-6);
        previous = mass;
      }
    }
  }

  TEST_CASE("seeded noise is reproducible and changes the stroke") {
    OracleConfig cfg;
    cfg.canvas_size = 32;
    cfg.noise_scale = 0.5;
    cfg.seed = 5;
    Rng rng(1);
    const Action a = sample_action(rng);
    CHECK(render_stroke(a, cfg) == render_stroke(a, cfg));
    OracleConfig clean = cfg;
    clean.noise_scale = 0.0;
    CHECK_FALSE(render_stroke(a, cfg) == render_stroke(a, clean));
  }

  TEST_CASE("invalid inputs are rejected") {
    OracleConfig cfg;
    Action a;
    a[ActionField::kBrushSize] = 1.5F;
    CHECK_THROWS(render_stroke(a, cfg));
    cfg.canvas_size = 4;
    CHECK_THROWS(cfg.validate());
  }

  TEST_CASE("lifted discrete strokes are blank") {
    OracleConfig cfg;
    cfg.canvas_size = 16;
    Rng rng(2);
    DiscreteAction dv = sample_discrete_action(rng, 0.0);
    dv.lift = true;
    const Image im = render_stroke_discrete(dv, cfg);
    CHECK(ink_mass(im) == 0.0);
  }
}

TEST_SUITE("action") {
  TEST_CASE("clip_action clamps and rejects non-finite input") {
    std::array<float, 12> raw{-1.0F, 2.0F, 0.5F, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    const Action a = clip_action(std::span<const float>(raw));
    CHECK(a[0] == 0.0F);
    CHECK(a[1] == 1.0F);
    CHECK(a[2] == 0.5F);
    CHECK(is_valid(a));
    raw[3] = NAN;
    CHECK_THROWS_AS(clip_action(std::span<const float>(raw)), InvalidArgument);
    CHECK_THROWS(clip_action(std::span<const float>(raw).first(5)));
  }

  TEST_CASE("discrete encoding round-trips") {
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
      const DiscreteAction dv = sample_discrete_action(rng, 0.5);
      const auto enc = encode_discrete(dv);
      const DiscreteAction back = decode_discrete(enc);
      CHECK(back.lift == dv.lift);
      CHECK(back.brush_size_level == dv.brush_size_level);
      CHECK(snap(back) == snap(dv));
    }
  }

  TEST_CASE("levels are evenly spaced on [0,1]") {
    CHECK(level_value(0) == 0.0F);
    CHECK(level_value(kDiscreteLevels - 1) == 1.0F);
    CHECK(nearest_level(level_value(4)) == 4);
    CHECK_THROWS(level_value(kDiscreteLevels));
  }
}
