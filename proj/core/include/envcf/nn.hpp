#pragma once

#include <string>

#include "envcf/tensor.hpp"

namespace envcf {
namespace nn {

// Flat parameter vector with named views. Keeps optimizer, EMA, serialization
// and finite-difference checks shape-agnostic.
struct ParamLayout {
    struct Entry {
        std::string name;
        std::vector<int> shape;
        size_t offset = 0;
        size_t count = 0;
    };
    std::vector<Entry> entries;
    size_t total = 0;

    size_t add(const std::string& name, std::vector<int> shape);
    const Entry& find(const std::string& name) const;
};

// -- conv2d, stride 1, zero padding (k-1)/2, im2col + GEMM --
struct ConvSpec {
    int cin = 0, cout = 0, k = 3;
    size_t weight_count() const { return static_cast<size_t>(cout) * cin * k * k; }
};

Tensor conv2d_fwd(const Tensor& x, const double* w, const double* b, const ConvSpec& cs);
void conv2d_bwd(const Tensor& x, const double* w, const ConvSpec& cs, const Tensor& gy,
                Tensor& gx, double* gw, double* gb);

// -- group normalization --
struct GroupNormCache {
    std::vector<double> mean, invstd;  // per group
    Tensor xhat;
};

Tensor groupnorm_fwd(const Tensor& x, const double* gamma, const double* beta, int groups,
                     GroupNormCache& cache);
void groupnorm_bwd(const GroupNormCache& cache, const double* gamma, int groups, const Tensor& gy,
                   Tensor& gx, double* ggamma, double* gbeta);

// largest of {4,2,1} dividing c
int norm_groups(int c);

// -- SiLU x*sigmoid(x) --
Tensor silu_fwd(const Tensor& x);
void silu_bwd(const Tensor& x, const Tensor& gy, Tensor& gx);

// -- 2x average pool / nearest upsample --
Tensor avgpool2_fwd(const Tensor& x);
void avgpool2_bwd(const Tensor& gy, Tensor& gx);  // gx pre-sized to input shape

Tensor upsample2_fwd(const Tensor& x);
void upsample2_bwd(const Tensor& gy, Tensor& gx);

// -- dense layer on vectors --
std::vector<double> linear_fwd(const std::vector<double>& x, const double* w, const double* b,
                               int in_dim, int out_dim);
void linear_bwd(const std::vector<double>& x, const double* w, int in_dim, int out_dim,
                const std::vector<double>& gy, std::vector<double>& gx, double* gw, double* gb);

// Sinusoidal step embedding: [sin(t*w_0..), cos(t*w_0..)], w geometrically
// spaced from 1 down to 1e-4. dim must be even.
std::vector<double> time_embed(int t, int dim);

// Catmull-Rom bicubic upsample by an integer factor, half-pixel centers,
// edge-clamped. Used to bring the LR conditioning raster to HR size.
Tensor bicubic_upsample(const Tensor& x, int factor);

}  // namespace nn
}  // namespace envcf
