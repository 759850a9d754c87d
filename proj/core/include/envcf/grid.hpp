#pragma once

#include <optional>
#include <utility>

#include "envcf/tensor.hpp"

namespace envcf {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    double area_side_m = 0.0;
    int resolution = 0;
    double cell_size_m = 0.0;

    bool operator==(const GridSpec& o) const {
        return area_side_m == o.area_side_m && resolution == o.resolution;
    }
};

GridSpec make_grid(double area_side_m, int resolution);

// Sentinel for cells the simulator marks as unreachable. Maps to gray 0.
inline constexpr double kNoCoverageDb = -std::numeric_limits<double>::infinity();

// dB -> gray affine map, clamped to [0,1]. No-coverage goes to 0.
struct GrayMap {
    double min_db = -147.0;
    double max_db = -47.0;

    double to_gray(double gain_db) const;
    double to_db(double gray) const { return min_db + gray * (max_db - min_db); }
};

struct EnvironmentMap {
    GridSpec grid;
    Raster cells;             // values in {0,1}; 1 = building
    std::pair<int, int> bs_cell{-1, -1};

    void validate() const;
};

struct ChannelGainMap {
    GridSpec grid;
    Raster gain_db;           // kNoCoverageDb marks no-coverage cells
    Raster gain_gray;         // in [0,1]
    GrayMap gray_map;

    void validate() const;
};

enum class Role { HR, LR };

struct EnvCF {
    GridSpec grid;
    Raster pixels;            // in [0,1]
    Role role_tag = Role::HR;

    void validate() const;
};

EnvCF compose_envcf(const EnvironmentMap& env, const ChannelGainMap& gain);

// Inverse of compose for gains below threshold. The returned EnvironmentMap
// has no BS cell; the gain map is gray-only (gain_db filled from the gray map).
std::pair<EnvironmentMap, ChannelGainMap> decompose_envcf(const EnvCF& f, double building_threshold);

// Point decimation at stride `factor` (sparse sensing, not averaging).
EnvCF downsample(const EnvCF& f, int factor);

}  // namespace envcf
