#pragma once

#include <filesystem>
#include <functional>

#include "envcf/nn.hpp"
#include "envcf/schedule.hpp"

namespace envcf {

struct TrainingFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DenoiserDescriptor {
    int base_channels = 16;
    int levels = 2;
    int time_dim = 32;

    bool operator==(const DenoiserDescriptor& o) const {
        return base_channels == o.base_channels && levels == o.levels && time_dim == o.time_dim;
    }
    void validate() const;
    // inputs must have H, W divisible by this
    int spatial_divisor() const { return 1 << levels; }
};

struct DenoiserParams {
    DenoiserDescriptor desc;
    std::vector<double> values;
};

// Encoder-decoder noise predictor with skip connections, group norm, SiLU and
// per-block time-embedding injection. Conditioning enters as a second input
// channel (the bicubically upsampled LR raster). Final conv is zero-initialized.
class UNetDenoiser {
public:
    explicit UNetDenoiser(const DenoiserDescriptor& desc);

    const DenoiserDescriptor& descriptor() const { return desc_; }
    const nn::ParamLayout& layout() const { return layout_; }
    size_t param_count() const { return layout_.total; }

    DenoiserParams init_params(uint64_t seed) const;

    struct Cache;  // opaque activation record

    // f_lr_up: conditioning already at HR size; f_t: current noised tensor.
    Tensor forward(const std::vector<double>& params, const Tensor& f_lr_up, const Tensor& f_t,
                   int t, Cache* cache = nullptr) const;

    // Accumulates parameter gradients for the given upstream grad_out.
    void backward(const std::vector<double>& params, const Cache& cache, const Tensor& grad_out,
                  std::vector<double>& grad_params) const;

    ~UNetDenoiser();

private:
    DenoiserDescriptor desc_;
    nn::ParamLayout layout_;
    int channels_at(int level) const { return desc_.base_channels << level; }
};

struct Batch {
    std::vector<Tensor> f0;    // 1 x H x W each
    std::vector<Tensor> f_lr;  // 1 x H/r x W/r each
    int factor = 1;

    void validate() const;
};

// Per-item (t, eps) draws so loss and grad see the same randomness.
struct LossDraws {
    std::vector<int> ts;
    std::vector<Tensor> eps;
};

LossDraws sample_draws(const Batch& batch, const Schedule& s, Rng& rng);

double denoiser_loss(const UNetDenoiser& net, const DenoiserParams& params, const Batch& batch,
                     const Schedule& s, const LossDraws& draws);

// Exact reverse-mode gradients of denoiser_loss for the same draws.
double denoiser_loss_grad(const UNetDenoiser& net, const DenoiserParams& params, const Batch& batch,
                          const Schedule& s, const LossDraws& draws, std::vector<double>& grads);

struct OptimizerConfig {
    double lr = 5e-5;
    int64_t steps = 0;
    int batch_size = 16;
    double ema_decay = 0.9999;
    int64_t ema_start = 5000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct TrainState {
    DenoiserParams params;
    std::vector<double> ema;  // mirrors params before ema_start
    std::vector<double> m, v;
    int64_t step = 0;
    OptimizerConfig opt;
};

TrainState make_train_state(const DenoiserParams& init, const OptimizerConfig& opt);
void adam_step(TrainState& state, const std::vector<double>& grads);
void ema_update(TrainState& state);

struct TrainItem {
    Tensor f0;
    Tensor f_lr;
};

struct LossRecord {
    int64_t step;
    double loss;
    double wall_s;  // 0 in serial-deterministic mode
};

struct TrainConfig {
    OptimizerConfig opt;
    int factor = 4;
    uint64_t seed = 0;
    bool serial_deterministic = true;  // zero wall-times in the loss log
    int64_t checkpoint_every = 0;      // 0 = only final
    std::filesystem::path checkpoint_dir;
    std::function<void(const LossRecord&)> on_step;  // optional
};

struct TrainResult {
    TrainState state;
    std::vector<LossRecord> loss_curve;
};

TrainResult train(const UNetDenoiser& net, const DenoiserParams& init,
                  const std::vector<TrainItem>& train_items, const Schedule& s,
                  const TrainConfig& cfg);

// Versioned binary checkpoint: JSON header (descriptor, schedule, step,
// config hash) + raw little-endian doubles. Loading with a mismatched
// descriptor or schedule fails.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const Schedule& s,
                     uint64_t config_hash);

struct Checkpoint {
    TrainState state;
    int schedule_T;
    double beta_start, beta_end;
    uint64_t config_hash;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint_checked(const std::filesystem::path& path,
                                   const DenoiserDescriptor& expect_desc, const Schedule& expect_s);

}  // namespace envcf
