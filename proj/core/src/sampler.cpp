#include "envcf/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace envcf {

Tensor predict_x0(const Tensor& f_t, const Tensor& eps_hat, int t, const Schedule& s) {
    s.check_t(t);
    if (!f_t.same_shape(eps_hat)) throw std::invalid_argument("predict_x0: shape mismatch");
    double abar = s.alpha_bar_t(t);
    double a = 1.0 / std::sqrt(abar), b = std::sqrt(1.0 - abar);
    Tensor out(f_t.c, f_t.h, f_t.w);
    for (size_t i = 0; i < f_t.size(); ++i) out.data[i] = a * (f_t.data[i] - b * eps_hat.data[i]);
    return out;
}

double reverse_noise_coeff(const Schedule& s, int t) {
    s.check_t(t);
    return std::sqrt((1.0 - s.alpha_bar_t(t - 1)) / (1.0 - s.alpha_bar_t(t)) * s.beta_t(t));
}

Tensor ddpm_step_from_eps(const Tensor& f_t, int t, const Tensor& eps_hat, const Schedule& s,
                          Rng* rng, bool clamp_x0) {
    s.check_t(t);
    double at = s.alpha_t(t);
    double abar = s.alpha_bar_t(t);
    double mean_scale = 1.0 / std::sqrt(at);
    double eps_scale = (1.0 - at) / std::sqrt(1.0 - abar);
    double sigma = reverse_noise_coeff(s, t);
    Tensor out(f_t.c, f_t.h, f_t.w);
    if (clamp_x0) {
        // clamp the implicit x0 estimate, then rebuild the mean from it
        Tensor x0 = predict_x0(f_t, eps_hat, t, s);
        for (double& v : x0.data) v = std::clamp(v, 0.0, 1.0);
        double abar_prev = s.alpha_bar_t(t - 1);
        double c0 = std::sqrt(abar_prev) * s.beta_t(t) / (1.0 - abar);
        double ct = std::sqrt(at) * (1.0 - abar_prev) / (1.0 - abar);
        for (size_t i = 0; i < f_t.size(); ++i)
            out.data[i] = c0 * x0.data[i] + ct * f_t.data[i];
    } else {
        for (size_t i = 0; i < f_t.size(); ++i)
            out.data[i] = mean_scale * (f_t.data[i] - eps_scale * eps_hat.data[i]);
    }
    if (t > 1) {
        if (!rng) throw std::invalid_argument("ddpm_step: rng required for t > 1");
        for (double& v : out.data) v += sigma * rng->normal();
    }
    if (!all_finite(out.data)) throw SamplingFault("ddpm_step: non-finite intermediate at t=" + std::to_string(t));
    return out;
}

Tensor ddpm_step(const Tensor& f_t, int t, const Tensor& f_lr_up, const UNetDenoiser& net,
                 const std::vector<double>& params, const Schedule& s, Rng* rng) {
    s.check_t(t);
    Tensor eps_hat = net.forward(params, f_lr_up, f_t, t);
    return ddpm_step_from_eps(f_t, t, eps_hat, s, rng, false);
}

SampleResult sample(const UNetDenoiser& net, const std::vector<double>& params, const EnvCF& f_lr,
                    int factor, const Schedule& s, uint64_t seed, const SamplerOptions& opts) {
    int hr = f_lr.grid.resolution * factor;
    if (hr % net.descriptor().spatial_divisor() != 0)
        throw std::invalid_argument("sample: HR size not divisible by the model's 2^levels");
    Tensor cond = nn::bicubic_upsample(to_tensor(f_lr.pixels), factor);
    Rng rng(seed);
    Tensor f_t(1, hr, hr);
    for (double& v : f_t.data) v = rng.normal();
    SampleResult res;
    for (int t = s.T; t >= 1; --t) {
        Tensor eps_hat = net.forward(params, cond, f_t, t);
        f_t = ddpm_step_from_eps(f_t, t, eps_hat, s, t > 1 ? &rng : nullptr,
                                 opts.clamp_x0_each_step);
        if (opts.snapshot_every > 0 && ((t - 1) % opts.snapshot_every == 0 || t == 1)) {
            Raster snap(hr, hr);
            for (size_t i = 0; i < f_t.size(); ++i) snap.data[i] = std::clamp(f_t.data[i], 0.0, 1.0);
            res.snapshots.emplace_back(t - 1, std::move(snap));
        }
    }
    for (double& v : f_t.data) v = std::clamp(v, 0.0, 1.0);
    res.output.grid = make_grid(f_lr.grid.area_side_m, hr);
    res.output.role_tag = Role::HR;
    res.output.pixels = to_raster(f_t);
    res.output.validate();
    return res;
}

std::vector<EnvCF> sample_batch(const UNetDenoiser& net, const std::vector<double>& params,
                                const std::vector<EnvCF>& f_lrs, int factor, const Schedule& s,
                                uint64_t seed, const SamplerOptions& opts) {
    std::vector<EnvCF> out(f_lrs.size());
    for (size_t i = 0; i < f_lrs.size(); ++i) {
        uint64_t sub = Rng::derive(seed, i);
        out[i] = sample(net, params, f_lrs[i], factor, s, sub, opts).output;
    }
    return out;
}

}  // namespace envcf
