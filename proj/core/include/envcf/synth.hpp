#pragma once

#include <filesystem>

#include "envcf/grid.hpp"

namespace envcf {

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimulatorConfig {
    double carrier_freq_hz = 5.9e9;
    double bandwidth_hz = 10e6;
    double tx_power_dbm = 23.0;
    double noise_psd_dbm_hz = -174.0;
    double pathloss_exponent = 2.5;
    double wall_loss_db = 10.0;
    double min_db = -147.0;
    double max_db = -47.0;

    void validate() const;
};

struct CityParams {
    int n_buildings = 12;
    double min_size_m = 8.0;
    double max_size_m = 48.0;
    uint64_t seed = 0;

    void validate() const;
};

// Free-space path loss at distance d (meters), in dB.
double fspl_db(double freq_hz, double d_m);

// Number of building cells strictly between the BS cell and the target cell
// along the straight ray (integer grid traversal; endpoints excluded).
int count_wall_crossings(const Raster& cells, int bs_i, int bs_j, int ti, int tj);

EnvironmentMap gen_city(const GridSpec& grid, const CityParams& params);

ChannelGainMap simulate_gain(const EnvironmentMap& env, const SimulatorConfig& cfg);

struct DatasetPair {
    EnvCF hr;
    EnvCF lr;
    std::pair<int, int> bs_cell;
};

struct Dataset {
    GridSpec grid_hr;
    int factor = 1;
    std::vector<DatasetPair> pairs;
    std::vector<int> train_idx;
    std::vector<int> val_idx;
};

// n_pairs independent cities; split is the last fifth by index (4:1).
Dataset gen_dataset(int n_pairs, const GridSpec& grid_hr, int factor, const CityParams& params,
                    const SimulatorConfig& cfg, uint64_t seed);

// Directory layout: pairs/{index}_hr.pgm, pairs/{index}_lr.pgm, meta.json.
// A loader for the same layout populated from real radio-map exports.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds, const SimulatorConfig& cfg,
                  const CityParams& params, uint64_t seed);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace envcf
