#include "envcf/grid.hpp"

#include <algorithm>
#include <cmath>

namespace envcf {

GridSpec make_grid(double area_side_m, int resolution) {
    if (!(area_side_m > 0.0)) throw std::invalid_argument("make_grid: area_side_m must be positive");
    if (resolution < 1) throw std::invalid_argument("make_grid: resolution must be >= 1");
    GridSpec g;
    g.area_side_m = area_side_m;
    g.resolution = resolution;
    g.cell_size_m = area_side_m / resolution;
    return g;
}

double GrayMap::to_gray(double gain_db) const {
    if (gain_db == kNoCoverageDb) return 0.0;
    double g = (gain_db - min_db) / (max_db - min_db);
    return std::clamp(g, 0.0, 1.0);
}

void EnvironmentMap::validate() const {
    if (cells.h != grid.resolution || cells.w != grid.resolution)
        throw ShapeError("EnvironmentMap: raster does not match grid resolution");
    for (double v : cells.data)
        if (v != 0.0 && v != 1.0) throw ValidationError("EnvironmentMap: cells must be binary");
    auto [bi, bj] = bs_cell;
    if (bi < 0 || bj < 0 || bi >= cells.h || bj >= cells.w)
        throw ValidationError("EnvironmentMap: BS cell out of bounds");
    if (cells.at(bi, bj) != 0.0)
        throw ValidationError("EnvironmentMap: BS cell is inside a building");
}

void ChannelGainMap::validate() const {
    if (gain_db.h != grid.resolution || gain_db.w != grid.resolution ||
        gain_gray.h != grid.resolution || gain_gray.w != grid.resolution)
        throw ShapeError("ChannelGainMap: raster does not match grid resolution");
    for (double v : gain_gray.data)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("ChannelGainMap: gray value outside [0,1]");
}

void EnvCF::validate() const {
    if (pixels.h != grid.resolution || pixels.w != grid.resolution)
        throw ShapeError("EnvCF: raster does not match grid resolution");
    for (double v : pixels.data)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("EnvCF: pixel outside [0,1] or non-finite");
}

EnvCF compose_envcf(const EnvironmentMap& env, const ChannelGainMap& gain) {
    if (!(env.grid == gain.grid)) throw ShapeError("compose_envcf: grid mismatch");
    if (!env.cells.same_shape(gain.gain_gray)) throw ShapeError("compose_envcf: raster shape mismatch");
    for (size_t i = 0; i < env.cells.size(); ++i)
        if (env.cells.data[i] == 1.0 && gain.gain_gray.data[i] != 0.0)
            throw ValidationError("compose_envcf: nonzero gain inside a building");

    EnvCF f;
    f.grid = env.grid;
    f.role_tag = Role::HR;
    f.pixels = Raster(env.cells.h, env.cells.w);
    for (size_t i = 0; i < f.pixels.size(); ++i)
        f.pixels.data[i] = std::clamp(gain.gain_gray.data[i] + env.cells.data[i], 0.0, 1.0);
    return f;
}

std::pair<EnvironmentMap, ChannelGainMap> decompose_envcf(const EnvCF& f, double building_threshold) {
    if (!(building_threshold > 0.0 && building_threshold <= 1.0))
        throw std::invalid_argument("decompose_envcf: threshold must be in (0,1]");
    EnvironmentMap env;
    env.grid = f.grid;
    env.cells = Raster(f.pixels.h, f.pixels.w);
    ChannelGainMap gain;
    gain.grid = f.grid;
    gain.gain_gray = Raster(f.pixels.h, f.pixels.w);
    gain.gain_db = Raster(f.pixels.h, f.pixels.w);
    for (size_t i = 0; i < f.pixels.size(); ++i) {
        double p = f.pixels.data[i];
        if (p >= building_threshold) {
            env.cells.data[i] = 1.0;
            gain.gain_gray.data[i] = 0.0;
            gain.gain_db.data[i] = kNoCoverageDb;
        } else {
            env.cells.data[i] = 0.0;
            gain.gain_gray.data[i] = p;
            gain.gain_db.data[i] = gain.gray_map.to_db(p);
        }
    }
    return {std::move(env), std::move(gain)};
}

EnvCF downsample(const EnvCF& f, int factor) {
    if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
    if (f.grid.resolution % factor != 0)
        throw std::invalid_argument("downsample: factor does not divide resolution");
    int lr = f.grid.resolution / factor;
    EnvCF out;
    out.grid = make_grid(f.grid.area_side_m, lr);
    out.role_tag = Role::LR;
    out.pixels = Raster(lr, lr);
    for (int i = 0; i < lr; ++i)
        for (int j = 0; j < lr; ++j)
            out.pixels.at(i, j) = f.pixels.at(i * factor, j * factor);
    return out;
}

}  // namespace envcf
