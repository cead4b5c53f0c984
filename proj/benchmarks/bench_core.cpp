#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "strokeforge/agent.hpp"
#include "strokeforge/canvas.hpp"
#include "strokeforge/oracle.hpp"
#include "strokeforge/painter.hpp"
#include "strokeforge/rng.hpp"

using namespace strokeforge;

namespace {

PainterCheckpoint bench_painter(int size) {
  PainterMetadata meta;
  meta.arch.canvas_size = size;
  torch::manual_seed(0);
  return PainterCheckpoint(meta);
}

}  // namespace

static void BM_RenderStroke(benchmark::State& state) {
  const auto cfg = scaled_oracle_config(static_cast<int>(state.range(0)));
  Rng rng(1);
  std::vector<Action> actions;
  for (int i = 0; i < 64; ++i) actions.push_back(sample_action(rng));
  std::size_t i = 0;
  for (auto _ : state) {
    auto im = render_stroke(actions[i++ % actions.size()], cfg);
    benchmark::DoNotOptimize(im);
  }
}
BENCHMARK(BM_RenderStroke)->Arg(32)->Arg(64);

static void BM_Composite(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto n = state.range(0);
  const auto canvas = torch::rand({n, 3, 64, 64});
  const auto stroke = torch::rand({n, 3, 64, 64});
  for (auto _ : state) {
    auto out = composite(canvas, stroke);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Composite)->Arg(1)->Arg(32);

static void BM_PainterForward(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto painter = bench_painter(64);
  const auto actions = torch::rand({state.range(0), 12});
  torch::NoGradGuard no_grad;
  for (auto _ : state) {
    auto out = painter.paint(actions);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PainterForward)->Arg(1)->Arg(32);

static void BM_PaintSequence(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto painter = bench_painter(32);
  const auto actions = torch::rand({8, state.range(0), 12});
  torch::NoGradGuard no_grad;
  for (auto _ : state) {
    auto canvas = paint_sequence(painter, actions);
    benchmark::DoNotOptimize(canvas);
  }
}
BENCHMARK(BM_PaintSequence)->Arg(4)->Arg(16);

BENCHMARK_MAIN();
