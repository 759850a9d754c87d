#include "envcf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "envcf/io.hpp"

namespace envcf {

namespace fs = std::filesystem;
using nlohmann::json;

static constexpr double kSpeedOfLight = 299792458.0;
static constexpr double kRefDistM = 1.0;  // d0

void SimulatorConfig::validate() const {
    if (!(carrier_freq_hz > 0.0)) throw std::invalid_argument("SimulatorConfig: carrier_freq_hz must be positive");
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("SimulatorConfig: bandwidth_hz must be positive");
    if (!(pathloss_exponent > 0.0)) throw std::invalid_argument("SimulatorConfig: pathloss_exponent must be positive");
    if (wall_loss_db < 0.0) throw std::invalid_argument("SimulatorConfig: wall_loss_db must be nonnegative");
    if (!(min_db < max_db)) throw std::invalid_argument("SimulatorConfig: min_db must be below max_db");
}

void CityParams::validate() const {
    if (n_buildings < 0) throw std::invalid_argument("CityParams: n_buildings must be nonnegative");
    if (!(min_size_m > 0.0) || max_size_m < min_size_m)
        throw std::invalid_argument("CityParams: invalid size range");
}

double fspl_db(double freq_hz, double d_m) {
    return 20.0 * std::log10(4.0 * M_PI * d_m * freq_hz / kSpeedOfLight);
}

int count_wall_crossings(const Raster& cells, int bs_i, int bs_j, int ti, int tj) {
    // Amanatides-Woo traversal between cell centers; endpoints excluded.
    int i = bs_i, j = bs_j;
    int step_i = (ti > bs_i) - (ti < bs_i);
    int step_j = (tj > bs_j) - (tj < bs_j);
    double dy = ti - bs_i, dx = tj - bs_j;
    double inf = std::numeric_limits<double>::infinity();
    double t_max_x = step_j != 0 ? 0.5 / std::abs(dx) : inf;
    double t_delta_x = step_j != 0 ? 1.0 / std::abs(dx) : inf;
    double t_max_y = step_i != 0 ? 0.5 / std::abs(dy) : inf;
    double t_delta_y = step_i != 0 ? 1.0 / std::abs(dy) : inf;
    int count = 0;
    while (i != ti || j != tj) {
        if (t_max_x < t_max_y) {
            j += step_j;
            t_max_x += t_delta_x;
        } else {
            i += step_i;
            t_max_y += t_delta_y;
        }
        if ((i != ti || j != tj) && cells.at(i, j) == 1.0) ++count;
    }
    return count;
}

EnvironmentMap gen_city(const GridSpec& grid, const CityParams& params) {
    params.validate();
    Rng rng(params.seed);
    int res = grid.resolution;
    EnvironmentMap env;
    env.grid = grid;
    env.cells = Raster(res, res);
    for (int b = 0; b < params.n_buildings; ++b) {
        double side_w = params.min_size_m + rng.uniform() * (params.max_size_m - params.min_size_m);
        double side_h = params.min_size_m + rng.uniform() * (params.max_size_m - params.min_size_m);
        int cw = std::max(1, std::min(res, static_cast<int>(std::lround(side_w / grid.cell_size_m))));
        int ch = std::max(1, std::min(res, static_cast<int>(std::lround(side_h / grid.cell_size_m))));
        int i0 = static_cast<int>(rng.uniform_int(0, res - ch));
        int j0 = static_cast<int>(rng.uniform_int(0, res - cw));
        for (int i = i0; i < i0 + ch; ++i)
            for (int j = j0; j < j0 + cw; ++j) env.cells.at(i, j) = 1.0;
    }
    std::vector<std::pair<int, int>> open;
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j)
            if (env.cells.at(i, j) == 0.0) open.emplace_back(i, j);
    if (open.empty()) throw GenerationError("gen_city: no open cell left for the BS");
    env.bs_cell = open[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(open.size()) - 1))];
    env.validate();
    return env;
}

ChannelGainMap simulate_gain(const EnvironmentMap& env, const SimulatorConfig& cfg) {
    env.validate();
    cfg.validate();
    int res = env.grid.resolution;
    double cell = env.grid.cell_size_m;
    auto [bi, bj] = env.bs_cell;
    double fspl_ref = fspl_db(cfg.carrier_freq_hz, kRefDistM);

    ChannelGainMap g;
    g.grid = env.grid;
    g.gray_map = GrayMap{cfg.min_db, cfg.max_db};
    g.gain_db = Raster(res, res);
    g.gain_gray = Raster(res, res);
    for (int i = 0; i < res; ++i) {
        for (int j = 0; j < res; ++j) {
            if (env.cells.at(i, j) == 1.0) {
                g.gain_db.at(i, j) = kNoCoverageDb;
                g.gain_gray.at(i, j) = 0.0;
                continue;
            }
            double d = std::hypot((i - bi) * cell, (j - bj) * cell);
            double eff = std::max(d, kRefDistM);
            int walls = count_wall_crossings(env.cells, bi, bj, i, j);
            double gain = -(fspl_ref + 10.0 * cfg.pathloss_exponent * std::log10(eff / kRefDistM)) -
                          cfg.wall_loss_db * walls;
            g.gain_db.at(i, j) = gain;
            g.gain_gray.at(i, j) = g.gray_map.to_gray(gain);
        }
    }
    g.validate();
    return g;
}

Dataset gen_dataset(int n_pairs, const GridSpec& grid_hr, int factor, const CityParams& params,
                    const SimulatorConfig& cfg, uint64_t seed) {
    if (n_pairs < 0) throw std::invalid_argument("gen_dataset: n_pairs must be nonnegative");
    if (factor < 1 || grid_hr.resolution % factor != 0)
        throw std::invalid_argument("gen_dataset: factor must divide the HR resolution");
    Dataset ds;
    ds.grid_hr = grid_hr;
    ds.factor = factor;
    ds.pairs.reserve(n_pairs);
    for (int n = 0; n < n_pairs; ++n) {
        CityParams p = params;
        p.seed = Rng::derive(seed, static_cast<uint64_t>(n));
        EnvironmentMap env = gen_city(grid_hr, p);
        ChannelGainMap gain = simulate_gain(env, cfg);
        DatasetPair pair;
        pair.hr = compose_envcf(env, gain);
        pair.hr.validate();
        pair.lr = downsample(pair.hr, factor);
        pair.lr.validate();
        pair.bs_cell = env.bs_cell;
        ds.pairs.push_back(std::move(pair));
    }
    // 4:1 split, validation = last fifth by generation index.
    int n_val = n_pairs / 5;
    for (int n = 0; n < n_pairs - n_val; ++n) ds.train_idx.push_back(n);
    for (int n = n_pairs - n_val; n < n_pairs; ++n) ds.val_idx.push_back(n);
    return ds;
}

void save_dataset(const fs::path& dir, const Dataset& ds, const SimulatorConfig& cfg,
                  const CityParams& params, uint64_t seed) {
    fs::create_directories(dir / "pairs");
    GrayMap gm{cfg.min_db, cfg.max_db};
    for (size_t n = 0; n < ds.pairs.size(); ++n) {
        const DatasetPair& p = ds.pairs[n];
        EnvcfMeta meta_hr{p.hr.grid, Role::HR, gm, p.bs_cell.first, p.bs_cell.second};
        EnvcfMeta meta_lr{p.lr.grid, Role::LR, gm, -1, -1};
        save_envcf(dir / "pairs" / (std::to_string(n) + "_hr.pgm"), p.hr, meta_hr);
        save_envcf(dir / "pairs" / (std::to_string(n) + "_lr.pgm"), p.lr, meta_lr);
    }
    json j;
    j["n_pairs"] = ds.pairs.size();
    j["hr_resolution"] = ds.grid_hr.resolution;
    j["area_side_m"] = ds.grid_hr.area_side_m;
    j["factor"] = ds.factor;
    j["seed"] = seed;
    j["train_idx"] = ds.train_idx;
    j["val_idx"] = ds.val_idx;
    j["simulator"] = {{"carrier_freq_hz", cfg.carrier_freq_hz},
                      {"bandwidth_hz", cfg.bandwidth_hz},
                      {"tx_power_dbm", cfg.tx_power_dbm},
                      {"noise_psd_dbm_hz", cfg.noise_psd_dbm_hz},
                      {"pathloss_exponent", cfg.pathloss_exponent},
                      {"wall_loss_db", cfg.wall_loss_db},
                      {"min_db", cfg.min_db},
                      {"max_db", cfg.max_db}};
    j["city"] = {{"n_buildings", params.n_buildings},
                 {"min_size_m", params.min_size_m},
                 {"max_size_m", params.max_size_m}};
    write_text_file(dir / "meta.json", j.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
    json j = json::parse(read_text_file(dir / "meta.json"));
    Dataset ds;
    ds.grid_hr = make_grid(j.at("area_side_m").get<double>(), j.at("hr_resolution").get<int>());
    ds.factor = j.at("factor").get<int>();
    size_t n_pairs = j.at("n_pairs").get<size_t>();
    ds.train_idx = j.at("train_idx").get<std::vector<int>>();
    ds.val_idx = j.at("val_idx").get<std::vector<int>>();
    ds.pairs.reserve(n_pairs);
    for (size_t n = 0; n < n_pairs; ++n) {
        DatasetPair p;
        auto [hr, meta_hr] = load_envcf(dir / "pairs" / (std::to_string(n) + "_hr.pgm"));
        auto [lr, meta_lr] = load_envcf(dir / "pairs" / (std::to_string(n) + "_lr.pgm"));
        p.hr = std::move(hr);
        p.lr = std::move(lr);
        p.bs_cell = {meta_hr.bs_i, meta_hr.bs_j};
        p.hr.validate();
        p.lr.validate();
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

}  // namespace envcf
