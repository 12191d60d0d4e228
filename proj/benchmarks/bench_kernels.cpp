#include <benchmark/benchmark.h>

#include "hwf/hwformer.hpp"

// Microbenchmarks for the kernels that dominate training and inference time.
// Run with --benchmark_filter=... to narrow down; sizes follow the toy preset
// plus one paper-scale window for the attention path.

namespace {

using namespace hwf;

Tensor<float> random_tensor(Shape shape, uint64_t seed) {
    RngStream rng(seed);
    Tensor<float> t(std::move(shape));
    for (auto& v : t.mutable_data()) v = static_cast<float>(rng.next_double() - 0.5);
    return t;
}

void BM_Conv2d(benchmark::State& state) {
    const int64_t c = state.range(0), hw = state.range(1);
    Tensor<float> x = random_tensor({1, c, hw, hw}, 1);
    Tensor<float> w = random_tensor({c, c, 3, 3}, 2);
    Tensor<float> b = random_tensor({c}, 3);
    for (auto _ : state) {
        Tensor<float> y = conv2d(x, w, b, 1);
        benchmark::DoNotOptimize(y.data().data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * hw * hw * c * c * 9);
}
BENCHMARK(BM_Conv2d)->Args({8, 32})->Args({8, 96})->Args({64, 96});

void BM_Matmul(benchmark::State& state) {
    const int64_t n = state.range(0);
    Tensor<float> a = random_tensor({n, n}, 4);
    Tensor<float> b = random_tensor({n, n}, 5);
    for (auto _ : state) {
        Tensor<float> y = matmul(a, b);
        benchmark::DoNotOptimize(y.data().data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

void BM_WindowRoundTrip(benchmark::State& state) {
    Tensor<float> x = random_tensor({1, 8, 96, 96}, 6);
    for (auto _ : state) {
        auto [win, layout] = partition_windows(x, 48);
        Tensor<float> back = merge_windows(win, layout);
        benchmark::DoNotOptimize(back.data().data());
    }
}
BENCHMARK(BM_WindowRoundTrip);

void BM_DilatedGather(benchmark::State& state) {
    Tensor<float> tokens = random_tensor({4, 64, 288}, 7);
    for (auto _ : state) {
        Tensor<float> g = dilated_gather(tokens, 8, 8, 3);
        benchmark::DoNotOptimize(g.data().data());
    }
}
BENCHMARK(BM_DilatedGather);

void BM_Mhsa(benchmark::State& state) {
    const int64_t tokens = state.range(0), d = state.range(1);
    RngStream rng(8);
    AttentionWeights<float> w;
    w.kind = ProjectionKind::fully_connected;
    w.heads = 4;
    for (Tensor<float>* m : {&w.wq, &w.wk, &w.wv, &w.wo}) {
        *m = Tensor<float>({d, d});
        for (auto& v : m->mutable_data()) v = static_cast<float>(0.02 * rng.next_gaussian());
    }
    for (Tensor<float>* b : {&w.bq, &w.bk, &w.bv, &w.bo}) *b = Tensor<float>({d});
    Tensor<float> x = random_tensor({1, tokens, d}, 9);
    for (auto _ : state) {
        Tensor<float> y = mhsa(x, x, x, w);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_Mhsa)->Args({16, 32})->Args({64, 128})->Args({64, 288});

void BM_ToyModelForward(benchmark::State& state) {
    ModelConfig cfg = ModelConfig::preset("toy");
    ModelWeights<float> w = make_initialized_weights<float>(cfg, 10);
    Tensor<float> x = random_tensor({1, 1, 32, 32}, 11);
    for (auto _ : state) {
        Tensor<float> y = model_forward(x, w, cfg);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_ToyModelForward);

void BM_ToyTrainStep(benchmark::State& state) {
    ModelConfig cfg = ModelConfig::preset("toy");
    ModelWeights<float> w = make_initialized_weights<float>(cfg, 12);
    w.set_requires_grad(true);
    OptimState<float> st = make_optim_state(w);
    TrainConfig tcfg;
    Tensor<float> noisy = random_tensor({8, 1, 32, 32}, 13);
    Tensor<float> clean = random_tensor({8, 1, 32, 32}, 14);
    for (auto _ : state) {
        Tape<float> tape;
        {
            TapeScope<float> scope(tape);
            Tensor<float> loss = mse_loss(model_forward(noisy, w, cfg), clean);
            w.zero_grads();
            tape.backward(loss);
        }
        adam_step(w, st, 1e-4, tcfg);
    }
}
BENCHMARK(BM_ToyTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
