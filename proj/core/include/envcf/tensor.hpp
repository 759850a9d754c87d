#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace envcf {

// 2-D raster, row-major, doubles.
struct Raster {
    int h = 0, w = 0;
    std::vector<double> data;

    Raster() = default;
    Raster(int h_, int w_, double fill = 0.0) : h(h_), w(w_), data(static_cast<size_t>(h_) * w_, fill) {
        if (h_ < 0 || w_ < 0) throw std::invalid_argument("Raster: negative dimensions");
    }
    double& at(int y, int x) { return data[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return data.size(); }
    bool same_shape(const Raster& o) const { return h == o.h && w == o.w; }
};

// c x h x w tensor for the network path.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), data(static_cast<size_t>(c_) * h_ * w_, fill) {}
    double& at(int ch, int y, int x) { return data[(static_cast<size_t>(ch) * h + y) * w + x]; }
    double at(int ch, int y, int x) const { return data[(static_cast<size_t>(ch) * h + y) * w + x]; }
    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

inline Tensor to_tensor(const Raster& r) {
    Tensor t(1, r.h, r.w);
    t.data = r.data;
    return t;
}

inline Raster to_raster(const Tensor& t) {
    if (t.c != 1) throw std::invalid_argument("to_raster: tensor must have one channel");
    Raster r(t.h, t.w);
    r.data = t.data;
    return r;
}

bool all_finite(const std::vector<double>& v);

// Deterministic RNG. Gaussian draws use Box-Muller on top of mt19937_64 so the
// byte stream does not depend on the standard library's distribution
// implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // inclusive bounds
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(gen_() % span);
    }

    double normal();

    // Sub-seed derivation (splitmix64); parallel streams per item match
    // serial generation exactly.
    static uint64_t derive(uint64_t seed, uint64_t stream);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace envcf
