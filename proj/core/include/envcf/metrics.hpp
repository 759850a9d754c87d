#pragma once

#include <string>

#include "envcf/tensor.hpp"

namespace envcf {

inline constexpr double kPsnrCapDb = 100.0;  // reported when MSE == 0

double mse(const Raster& a, const Raster& b);
double psnr(const Raster& x_hat, const Raster& x, double peak = 1.0);

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01, k2 = 0.03;
    double peak = 1.0;
};

// Mean local SSIM over the valid region of a Gaussian-windowed scan.
double ssim(const Raster& x_hat, const Raster& x, const SsimConfig& cfg = {});

double nmse(const Raster& x_hat, const Raster& x);

struct MetricRow {
    std::string method;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double nmse = 0.0;
    int n_items = 0;
    std::string note;  // e.g. reference rows not produced by this run
};

struct MethodOutputs {
    std::string method;
    std::vector<Raster> outputs;
};

// Per-method means over aligned output/reference lists.
std::vector<MetricRow> evaluate(const std::vector<MethodOutputs>& methods,
                                const std::vector<Raster>& references);

// Delimited report with header: method, psnr_db, ssim, nmse, n_items, config_hash.
std::string format_report(const std::vector<MetricRow>& rows, uint64_t config_hash);

}  // namespace envcf
