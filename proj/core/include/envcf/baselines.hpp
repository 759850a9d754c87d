#pragma once

#include <string>

#include "envcf/grid.hpp"

namespace envcf {

// LR sample (i,j) sits at HR coordinate (i*factor, j*factor), matching the
// decimation downsampler. Bilinear alone uses the standard half-pixel image
// convention instead.
EnvCF nearest_upsample(const EnvCF& f_lr, int factor);
EnvCF bilinear_upsample(const EnvCF& f_lr, int factor);

struct VariogramConfig {
    bool fit = true;           // fit (sill, range) to binned empirical semivariances
    double sill = 0.05;        // used when fit == false
    double range_m = 32.0;
    double nugget = 0.0;
    int n_bins = 12;
};

struct KrigingDiagnostics {
    double sill = 0.0, range_m = 0.0, nugget = 0.0;
    int retries = 0;  // nugget bumps applied to rescue a singular system
};

// Ordinary kriging with an exponential variogram; one factorization of the
// sample system reused for all HR targets.
EnvCF kriging_upsample(const EnvCF& f_lr, int factor, const VariogramConfig& cfg,
                       KrigingDiagnostics* diag = nullptr);

enum class RbfKernel { Multiquadric, Gaussian, ThinPlate };

struct RbfConfig {
    RbfKernel kernel = RbfKernel::Multiquadric;
    double shape_m = 4.0;       // kernel length scale c
    double regularization = 0.0;  // lambda on the diagonal
};

struct RbfDiagnostics {
    double regularization_used = 0.0;
    int ladder_steps = 0;
};

EnvCF rbf_upsample(const EnvCF& f_lr, int factor, const RbfConfig& cfg,
                   RbfDiagnostics* diag = nullptr);

}  // namespace envcf
