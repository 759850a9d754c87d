#pragma once

#include "envcf/tensor.hpp"

namespace envcf {

// Linear variance schedule with precomputed alpha and running products.
// 1-based step index t in {1..T}; alpha_bar(0) == 1 by convention.
struct Schedule {
    int T = 0;
    double beta_start = 0.0, beta_end = 0.0;
    std::vector<double> beta;       // beta[t-1] = beta_t
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // prod_{i<=t} alpha_i

    double beta_t(int t) const { return beta.at(t - 1); }
    double alpha_t(int t) const { return alpha.at(t - 1); }
    double alpha_bar_t(int t) const { return t == 0 ? 1.0 : alpha_bar.at(t - 1); }
    void check_t(int t) const {
        if (t < 1 || t > T) throw std::invalid_argument("schedule: step index out of range");
    }
};

Schedule linear_schedule(int T, double beta_start, double beta_end);

// F_t = sqrt(abar_t) F_0 + sqrt(1-abar_t) eps. No clamping.
Tensor q_sample(const Tensor& f0, int t, const Tensor& eps, const Schedule& s);

// One forward chain step: F_t = sqrt(1-beta_t) F_{t-1} + sqrt(beta_t) eps.
Tensor chain_step(const Tensor& f_prev, int t, const Tensor& eps, const Schedule& s);

}  // namespace envcf
