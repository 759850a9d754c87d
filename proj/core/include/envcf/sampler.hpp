#pragma once

#include "envcf/denoiser.hpp"
#include "envcf/grid.hpp"
#include "envcf/schedule.hpp"

namespace envcf {

struct SamplingFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// F0_hat = (F_t - sqrt(1-abar_t) eps_hat) / sqrt(abar_t). No clamping here.
Tensor predict_x0(const Tensor& f_t, const Tensor& eps_hat, int t, const Schedule& s);

// Posterior std of the reverse step: sqrt((1-abar_{t-1})/(1-abar_t) * beta_t).
// Zero at t=1 by the abar_0 = 1 convention.
double reverse_noise_coeff(const Schedule& s, int t);

// One reverse refinement step given a precomputed noise estimate. rng may be
// null only when t == 1.
Tensor ddpm_step_from_eps(const Tensor& f_t, int t, const Tensor& eps_hat, const Schedule& s,
                          Rng* rng, bool clamp_x0 = false);

// One reverse refinement step driven by the network.
Tensor ddpm_step(const Tensor& f_t, int t, const Tensor& f_lr_up, const UNetDenoiser& net,
                 const std::vector<double>& params, const Schedule& s, Rng* rng);

struct SamplerOptions {
    bool clamp_x0_each_step = false;  // off by default
    int snapshot_every = 0;           // >0: record intermediate chains
};

struct SampleResult {
    EnvCF output;
    std::vector<std::pair<int, Raster>> snapshots;  // (t, raster) when requested
};

// Full T-step conditional generation from Gaussian noise; output clamped to
// [0,1] and tagged HR.
SampleResult sample(const UNetDenoiser& net, const std::vector<double>& params, const EnvCF& f_lr,
                    int factor, const Schedule& s, uint64_t seed, const SamplerOptions& opts = {});

// Per-item derived seeds; serial loop matches any parallel execution bitwise.
std::vector<EnvCF> sample_batch(const UNetDenoiser& net, const std::vector<double>& params,
                                const std::vector<EnvCF>& f_lrs, int factor, const Schedule& s,
                                uint64_t seed, const SamplerOptions& opts = {});

}  // namespace envcf
