#include "doctest_torch.hpp"

#include "strokeforge/error.hpp"
#include "strokeforge/rng.hpp"
#include "strokeforge/vision.hpp"
#include "test_util.hpp"

using namespace strokeforge;

namespace {

std::vector<std::string> digit_names() {
  std::vector<std::string> names;
  for (int i = 0; i < 10; ++i) names.push_back(std::to_string(i));
  return names;
}

// Two trivially separable classes: dark left half versus dark right half.
LabeledImageSet halves(int n, int size) {
  LabeledImageSet set;
  Rng rng(1);
  for (int i = 0; i < n; ++i) {
    Image im = Image::white(size, size);
    const int label = i % 2;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const bool ink = label == 0 ? x < size / 2 : x >= size / 2;
        const float v = ink ? static_cast<float>(0.2 * rng.uniform()) : 1.0F;
        for (int c = 0; c < 3; ++c) im.at(y, x, c) = v;
      }
    }
    set.images.push_back(im);
    set.labels.push_back(label);
  }
  return set;
}

}  // namespace

TEST_SUITE("vision") {
  TEST_CASE("every listed tap produces its documented shape") {
    for (const auto& arch : classifier_arch_ids()) {
      const auto ckpt = ClassifierCheckpoint::create(arch, 32, digit_names());
      const auto& info = ckpt.info();
      REQUIRE_FALSE(info.taps.empty());
      CHECK(std::ranges::find(info.taps, info.default_tap) != info.taps.end());
      const auto x = torch::rand({2, 3, 32, 32});
      for (const auto& tap : info.taps) {
        const auto f = extract_features(ckpt, x, tap);
        std::vector<std::int64_t> shape(f.sizes().begin() + 1, f.sizes().end());
        CHECK(shape == info.tap_shapes.at(tap));
      }
      CHECK(ckpt.logits(x).sizes() == torch::IntArrayRef({2, 10}));
      CHECK_THROWS_WITH(extract_features(ckpt, x, "nope"), doctest::Contains("unknown feature tap"));
    }
  }

  TEST_CASE("class lookup by name or index") {
    const auto ckpt = ClassifierCheckpoint::create("a", 32, {"cat", "dog"});
    CHECK(ckpt.class_index("dog") == 1);
    CHECK(ckpt.class_index("0") == 0);
    CHECK_THROWS(ckpt.class_index("horse"));
    CHECK_THROWS(ckpt.class_index("7"));
    CHECK_THROWS(class_logit(ckpt, torch::rand({1, 3, 32, 32}), 2));
  }

  TEST_CASE("class logit is differentiable with respect to the image") {
    const auto ckpt = ClassifierCheckpoint::create("b", 32, digit_names());
    auto x = torch::rand({1, 3, 32, 32}).requires_grad_(true);
    class_logit(ckpt, x, 3).sum().backward();
    CHECK(x.grad().abs().sum().item<double>() > 0.0);
  }

  TEST_CASE("inputs of another size are resized before the network") {
    const auto ckpt = ClassifierCheckpoint::create("a", 32, digit_names());
    CHECK(ckpt.logits(torch::rand({1, 3, 48, 48})).size(1) == 10);
  }

  TEST_CASE("content loss is zero for identical images and positive otherwise") {
    const auto ckpt = ClassifierCheckpoint::create("a", 32, digit_names());
    const auto a = torch::rand({2, 3, 32, 32});
    CHECK(content_loss(ckpt, a, a, ckpt.info().default_tap).item<double>() == doctest::Approx(0.0));
    CHECK(content_loss(ckpt, a, torch::rand({2, 3, 32, 32}), ckpt.info().default_tap).item<double>() > 0.0);
  }

  TEST_CASE("training separates an easy set and marks it usable") {
    ClassifierConfig cfg;
    cfg.arch = "a";
    cfg.input_size = 16;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    const auto result = train_classifier(halves(80, 16), cfg);
    CHECK(result.classifier.info().heldout_accuracy > 0.9);
    CHECK(result.classifier.info().usable);
    CHECK(classifier_accuracy(result.classifier, halves(20, 16)) > 0.9);
  }

  TEST_CASE("save and load preserve logits and metadata") {
    TempDir dir;
    auto ckpt = ClassifierCheckpoint::create("b", 32, digit_names());
    ckpt.info().heldout_accuracy = 0.75;
    ckpt.save(dir / "c.pt");
    const auto back = ClassifierCheckpoint::load(dir / "c.pt");
    CHECK(back.info().heldout_accuracy == 0.75);
    CHECK(back.info().taps == ckpt.info().taps);
    const auto x = torch::rand({2, 3, 32, 32});
    torch::NoGradGuard no_grad;
    CHECK(torch::allclose(back.logits(x), ckpt.logits(x)));
    CHECK_THROWS_AS(ClassifierCheckpoint::load(dir / "none.pt"), IoError);
  }

  TEST_CASE("unknown architectures are rejected") {
    CHECK_THROWS(ClassifierCheckpoint::create("vgg", 32, digit_names()));
    ClassifierConfig cfg;
    cfg.arch = "z";
    CHECK_THROWS(cfg.validate());
  }
}
