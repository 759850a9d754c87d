#include <benchmark/benchmark.h>

#include "envcf/baselines.hpp"
#include "envcf/nn.hpp"
#include "envcf/sampler.hpp"
#include "envcf/synth.hpp"

using namespace envcf;

namespace {

Tensor random_tensor(int c, int h, int w, uint64_t seed) {
    Rng rng(seed);
    Tensor t(c, h, w);
    for (double& v : t.data) v = rng.normal();
    return t;
}

EnvCF random_lr(int res, uint64_t seed) {
    Rng rng(seed);
    EnvCF f;
    f.grid = make_grid(4.0 * res, res);
    f.role_tag = Role::LR;
    f.pixels = Raster(res, res);
    for (double& v : f.pixels.data) v = rng.uniform();
    return f;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
    int c = static_cast<int>(state.range(0));
    nn::ConvSpec cs{c, c, 3};
    Tensor x = random_tensor(c, 64, 64, 1);
    Rng rng(2);
    std::vector<double> w(cs.weight_count()), b(cs.cout);
    for (double& v : w) v = 0.1 * rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_fwd(x, w.data(), b.data(), cs));
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

static void BM_DenoiserForward(benchmark::State& state) {
    DenoiserDescriptor desc{16, 2, 32};
    UNetDenoiser net(desc);
    DenoiserParams p = net.init_params(1);
    Tensor cond = random_tensor(1, 64, 64, 3);
    Tensor ft = random_tensor(1, 64, 64, 4);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(p.values, cond, ft, 50));
}
BENCHMARK(BM_DenoiserForward);

static void BM_QSample(benchmark::State& state) {
    Schedule s = linear_schedule(200, 1e-4, 0.09);
    Tensor f0 = random_tensor(1, 64, 64, 5);
    Tensor eps = random_tensor(1, 64, 64, 6);
    for (auto _ : state) benchmark::DoNotOptimize(q_sample(f0, 100, eps, s));
}
BENCHMARK(BM_QSample);

static void BM_DdpmStep(benchmark::State& state) {
    Schedule s = linear_schedule(200, 1e-4, 0.09);
    Tensor ft = random_tensor(1, 64, 64, 7);
    Tensor eps = random_tensor(1, 64, 64, 8);
    Rng rng(9);
    for (auto _ : state) benchmark::DoNotOptimize(ddpm_step_from_eps(ft, 100, eps, s, &rng));
}
BENCHMARK(BM_DdpmStep);

static void BM_KrigingUpsample(benchmark::State& state) {
    EnvCF lr = random_lr(static_cast<int>(state.range(0)), 10);
    for (auto _ : state)
        benchmark::DoNotOptimize(kriging_upsample(lr, 4, VariogramConfig{}));
}
BENCHMARK(BM_KrigingUpsample)->Arg(8)->Arg(16);

static void BM_RbfUpsample(benchmark::State& state) {
    EnvCF lr = random_lr(static_cast<int>(state.range(0)), 11);
    for (auto _ : state) benchmark::DoNotOptimize(rbf_upsample(lr, 4, RbfConfig{}));
}
BENCHMARK(BM_RbfUpsample)->Arg(8)->Arg(16);

static void BM_SimulateGain(benchmark::State& state) {
    GridSpec grid = make_grid(256.0, 64);
    CityParams p;
    p.seed = 12;
    EnvironmentMap env = gen_city(grid, p);
    SimulatorConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(simulate_gain(env, cfg));
}
BENCHMARK(BM_SimulateGain);

BENCHMARK_MAIN();
