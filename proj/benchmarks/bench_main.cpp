// Microbenchmarks for the training-cost hot spots: the group V-statistic, the
// batched network forward/backward passes, and a full optimizer step.

#include <benchmark/benchmark.h>

#include "imm/head.hpp"
#include "imm/kernel.hpp"
#include "imm/net.hpp"
#include "imm/train.hpp"

#include <vector>

using namespace imm;

namespace {

Mat randn(Rng& rng, int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

Mlp bench_net(int n_classes) {
    MlpConfig cfg;
    cfg.n_classes = n_classes;
    Rng rng(42);
    return make_mlp(cfg, rng);
}

std::vector<int> cycled_labels(int n, int n_classes) {
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = i % n_classes;
    return labels;
}

void BM_MmdVstat(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    Rng rng(1);
    const Mat X = randn(rng, m, 2);
    const Mat Y = randn(rng, m, 2);
    KernelSpec spec;  // Laplace, time-weighted
    double acc = 0.0;
    for (auto _ : state) {
        acc += mmd_vstat(spec, X, Y, 2.0, 1.7);
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(BM_MmdVstat)->Arg(4)->Arg(16)->Arg(64);

void BM_MmdVstatGrad(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    Rng rng(2);
    const Mat X = randn(rng, m, 2);
    const Mat Y = randn(rng, m, 2);
    KernelSpec spec;
    for (auto _ : state) {
        Mat g = mmd_vstat_grad_x(spec, X, Y, 2.0);
        benchmark::DoNotOptimize(g.data());
    }
}
BENCHMARK(BM_MmdVstatGrad)->Arg(4)->Arg(16)->Arg(64);

void BM_ForwardBatch(benchmark::State& state) {
    const int b = static_cast<int>(state.range(0));
    const Mlp net = bench_net(8);
    Rng rng(3);
    const Mat X = randn(rng, b, 2);
    const std::vector<int> labels = cycled_labels(b, 8);
    HeadConfig head;
    FlowSchedule sched;
    for (auto _ : state) {
        Mat y = f_st(head, sched, net, X, 0.1, 0.8, labels);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_ForwardBatch)->Arg(64)->Arg(256);

void BM_Backward(benchmark::State& state) {
    const int b = static_cast<int>(state.range(0));
    const Mlp net = bench_net(8);
    Rng rng(4);
    const Mat X = randn(rng, b, 2 + net.cfg.time_embed_dim);
    const Mat Xin = X.leftCols(2);
    const Mat es = time_embedding(Vec::Constant(b, 0.1), 1000.0, net.cfg.time_embed_dim);
    const Mat et = time_embedding(Vec::Constant(b, 0.8), 1000.0, net.cfg.time_embed_dim);
    const std::vector<int> labels = cycled_labels(b, 8);
    Tape tape;
    mlp_forward(net, Xin, es, et, labels, &tape);
    const Mat dY = randn(rng, b, 2);
    MlpParams grads = make_zero_like(net);
    for (auto _ : state) {
        for_each_tensor(grads, [](const std::string&, Mat& m) { m.setZero(); });
        mlp_backward(net, tape, dY, grads);
        benchmark::DoNotOptimize(grads.label_emb.data());
    }
}
BENCHMARK(BM_Backward)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
    LossConfig cfg;
    cfg.head.kind = HeadKind::EulerFM;
    TrainConfig tcfg;
    tcfg.batch_size = static_cast<int>(state.range(0));
    tcfg.particles = 4;
    tcfg.steps = 1;
    tcfg.p_drop = 0.1;
    MlpConfig mcfg;
    mcfg.n_classes = 8;
    DataFn data = [](Rng& rng, int n, Mat& X, std::vector<int>& labels) {
        X = randn(rng, n, 2);
        labels.assign(static_cast<size_t>(n), 0);
        for (int i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = rng.uniform_int(8);
    };
    std::uint64_t seed = 100;
    for (auto _ : state) {
        TrainState st = make_train_state(mcfg, tcfg, 7);
        TrainResult res = train_loop(cfg, tcfg, MappingFn{}, data, seed++, st, nullptr, nullptr);
        benchmark::DoNotOptimize(res.steps_done);
    }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
