#include "envcf/schedule.hpp"

#include <cmath>

namespace envcf {

Schedule linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 2) throw std::invalid_argument("linear_schedule: T must be >= 2");
    if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
        throw std::invalid_argument("linear_schedule: need 0 < beta_start < beta_end < 1");
    Schedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    double abar = 1.0;
    for (int t = 1; t <= T; ++t) {
        double b = beta_start + (static_cast<double>(t - 1) / (T - 1)) * (beta_end - beta_start);
        s.beta[t - 1] = b;
        s.alpha[t - 1] = 1.0 - b;
        abar *= s.alpha[t - 1];
        s.alpha_bar[t - 1] = abar;
    }
    return s;
}

Tensor q_sample(const Tensor& f0, int t, const Tensor& eps, const Schedule& s) {
    s.check_t(t);
    if (!f0.same_shape(eps)) throw std::invalid_argument("q_sample: shape mismatch");
    double abar = s.alpha_bar_t(t);
    double a = std::sqrt(abar), b = std::sqrt(1.0 - abar);
    Tensor out(f0.c, f0.h, f0.w);
    for (size_t i = 0; i < f0.size(); ++i) out.data[i] = a * f0.data[i] + b * eps.data[i];
    return out;
}

Tensor chain_step(const Tensor& f_prev, int t, const Tensor& eps, const Schedule& s) {
    s.check_t(t);
    if (!f_prev.same_shape(eps)) throw std::invalid_argument("chain_step: shape mismatch");
    double b = s.beta_t(t);
    double ca = std::sqrt(1.0 - b), cb = std::sqrt(b);
    Tensor out(f_prev.c, f_prev.h, f_prev.w);
    for (size_t i = 0; i < f_prev.size(); ++i) out.data[i] = ca * f_prev.data[i] + cb * eps.data[i];
    return out;
}

}  // namespace envcf
