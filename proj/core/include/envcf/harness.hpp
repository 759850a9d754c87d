#pragma once

#include <filesystem>

#include "envcf/baselines.hpp"
#include "envcf/denoiser.hpp"
#include "envcf/metrics.hpp"
#include "envcf/sampler.hpp"
#include "envcf/synth.hpp"

namespace envcf {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // grid / task
    double area_side_m = 256.0;
    int hr_resolution = 64;
    int factor = 4;
    // data
    int n_pairs = 1000;
    SimulatorConfig sim;
    CityParams city;
    // diffusion
    int T = 200;
    double beta_start = 1e-4;
    double beta_end = 0.09;
    // model
    DenoiserDescriptor desc{16, 2, 32};
    // optimizer
    OptimizerConfig opt;
    // seeds
    uint64_t dataset_seed = 1;
    uint64_t train_seed = 2;
    uint64_t sample_seed = 3;
    // evaluation
    int eval_max_items = 20;  // cap on validation items scored per run
    bool serial = true;

    void validate() const;
};

RunConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

// FNV-1a over the canonical (key-sorted) JSON dump; key order in the source
// file does not matter.
uint64_t config_hash(const RunConfig& cfg);

// Every artifact directory gets a manifest with the config, its hash and the
// command, enough to re-run exactly.
void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                    const std::string& command);

Schedule make_schedule(const RunConfig& cfg);

// gen-data -> train -> sample -> eval across all methods; the acceptance
// analogue of the full-scale experiment.
struct SmokeResult {
    std::vector<MetricRow> rows;
    std::filesystem::path report_path;
    double initial_smoothed_loss = 0.0;
    double final_smoothed_loss = 0.0;
};

SmokeResult pipeline_smoke(const RunConfig& cfg, const std::filesystem::path& run_dir,
                           bool verbose = false);

// Reference full-scale results quoted for context in reports; not produced by
// this codebase.
MetricRow cdiff_fullscale_reference_row();

}  // namespace envcf
