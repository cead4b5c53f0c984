#include "doctest_torch.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

#include "strokeforge/dataset.hpp"
#include "strokeforge/error.hpp"
#include "strokeforge/oracle.hpp"
#include "test_util.hpp"

using namespace strokeforge;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("records hold the oracle rendering of their action") {
    OracleConfig cfg;
    cfg.canvas_size = 16;
    cfg.max_radius_px = 2.0;
    cfg.seed = 4;
    const auto ds = generate_dataset(20, cfg, false);
    REQUIRE(ds.size() == 20);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const Action a = clip_action(ds.action(i));
      const auto expected = to_bytes(render_stroke(a, cfg));
      const auto got = ds.image_bytes(i);
      CHECK(std::equal(got.begin(), got.end(), expected.begin(), expected.end()));
    }
  }

  TEST_CASE("identical seeds give byte-identical files regardless of workers") {
    TempDir dir;
    OracleConfig cfg;
    cfg.canvas_size = 16;
    cfg.seed = 21;
    cfg.noise_scale = 0.3;
    generate_dataset_file(40, cfg, false, dir / "a.npds", 1);
    generate_dataset_file(40, cfg, false, dir / "b.npds", 3);
    CHECK(slurp(dir / "a.npds") == slurp(dir / "b.npds"));
    CHECK(file_fingerprint(dir / "a.npds") == file_fingerprint(dir / "b.npds"));
    cfg.seed = 22;
    generate_dataset_file(40, cfg, false, dir / "c.npds", 1);
    CHECK(slurp(dir / "a.npds") != slurp(dir / "c.npds"));
  }

  TEST_CASE("write and read round-trip, header is validated") {
    TempDir dir;
    OracleConfig cfg;
    cfg.canvas_size = 12;
    const auto ds = generate_dataset(7, cfg, true);
    CHECK(ds.header.discrete());
    CHECK(ds.header.action_dim == kDiscreteActionDim);
    write_dataset(ds, dir / "d.npds");
    const auto back = read_dataset(dir / "d.npds");
    CHECK(back.actions == ds.actions);
    CHECK(back.images == ds.images);
    CHECK(read_dataset_header(dir / "d.npds").count == 7);

    auto bytes = slurp(dir / "d.npds");
    bytes[0] = 'X';
    std::ofstream(dir / "bad.npds", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(read_dataset(dir / "bad.npds"), IoError);
    auto truncated = slurp(dir / "d.npds");
    truncated.resize(truncated.size() - 5);
    std::ofstream(dir / "short.npds", std::ios::binary)
        .write(truncated.data(), static_cast<std::streamsize>(truncated.size()));
    CHECK_THROWS_AS(read_dataset(dir / "short.npds"), IoError);
  }

  TEST_CASE("lift records in the discrete variant are blank") {
    OracleConfig cfg;
    cfg.canvas_size = 16;
    const auto ds = generate_dataset(60, cfg, true);
    int lifted = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.action(i)[kActionDim] < 0.5F) continue;
      ++lifted;
      CHECK(ink_mass(ds.image(i)) == 0.0);
    }
    CHECK(lifted > 0);
  }
}
