#include "envcf/harness.hpp"

#include <cmath>
#include <iostream>

#include <json.hpp>

#include "envcf/io.hpp"

namespace envcf {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    if (hr_resolution < 1 || factor < 1) throw ConfigError("config: bad grid sizes");
    if (hr_resolution % factor != 0) throw ConfigError("config: factor must divide hr_resolution");
    desc.validate();
    if (hr_resolution % desc.spatial_divisor() != 0)
        throw ConfigError("config: hr_resolution must be divisible by 2^levels");
    if (T < 2 || !(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
        throw ConfigError("config: invalid schedule parameters");
    if (n_pairs < 0) throw ConfigError("config: n_pairs must be nonnegative");
    if (opt.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    sim.validate();
    city.validate();
}

static json config_to_json(const RunConfig& c) {
    json j;
    j["area_side_m"] = c.area_side_m;
    j["hr_resolution"] = c.hr_resolution;
    j["factor"] = c.factor;
    j["n_pairs"] = c.n_pairs;
    j["simulator"] = {{"carrier_freq_hz", c.sim.carrier_freq_hz},
                      {"bandwidth_hz", c.sim.bandwidth_hz},
                      {"tx_power_dbm", c.sim.tx_power_dbm},
                      {"noise_psd_dbm_hz", c.sim.noise_psd_dbm_hz},
                      {"pathloss_exponent", c.sim.pathloss_exponent},
                      {"wall_loss_db", c.sim.wall_loss_db},
                      {"min_db", c.sim.min_db},
                      {"max_db", c.sim.max_db}};
    j["city"] = {{"n_buildings", c.city.n_buildings},
                 {"min_size_m", c.city.min_size_m},
                 {"max_size_m", c.city.max_size_m}};
    j["schedule"] = {{"T", c.T}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}};
    j["model"] = {{"base_channels", c.desc.base_channels},
                  {"levels", c.desc.levels},
                  {"time_dim", c.desc.time_dim}};
    j["optimizer"] = {{"lr", c.opt.lr},
                      {"steps", c.opt.steps},
                      {"batch_size", c.opt.batch_size},
                      {"ema_decay", c.opt.ema_decay},
                      {"ema_start", c.opt.ema_start}};
    j["seeds"] = {{"dataset", c.dataset_seed}, {"train", c.train_seed}, {"sample", c.sample_seed}};
    j["eval_max_items"] = c.eval_max_items;
    j["serial"] = c.serial;
    return j;
}

RunConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse failure: ") + e.what());
    }
    RunConfig c;
    try {
        if (j.contains("area_side_m")) c.area_side_m = j["area_side_m"].get<double>();
        if (j.contains("hr_resolution")) c.hr_resolution = j["hr_resolution"].get<int>();
        if (j.contains("factor")) c.factor = j["factor"].get<int>();
        if (j.contains("n_pairs")) c.n_pairs = j["n_pairs"].get<int>();
        if (j.contains("simulator")) {
            const json& s = j["simulator"];
            if (s.contains("carrier_freq_hz")) c.sim.carrier_freq_hz = s["carrier_freq_hz"].get<double>();
            if (s.contains("bandwidth_hz")) c.sim.bandwidth_hz = s["bandwidth_hz"].get<double>();
            if (s.contains("tx_power_dbm")) c.sim.tx_power_dbm = s["tx_power_dbm"].get<double>();
            if (s.contains("noise_psd_dbm_hz")) c.sim.noise_psd_dbm_hz = s["noise_psd_dbm_hz"].get<double>();
            if (s.contains("pathloss_exponent")) c.sim.pathloss_exponent = s["pathloss_exponent"].get<double>();
            if (s.contains("wall_loss_db")) c.sim.wall_loss_db = s["wall_loss_db"].get<double>();
            if (s.contains("min_db")) c.sim.min_db = s["min_db"].get<double>();
            if (s.contains("max_db")) c.sim.max_db = s["max_db"].get<double>();
        }
        if (j.contains("city")) {
            const json& s = j["city"];
            if (s.contains("n_buildings")) c.city.n_buildings = s["n_buildings"].get<int>();
            if (s.contains("min_size_m")) c.city.min_size_m = s["min_size_m"].get<double>();
            if (s.contains("max_size_m")) c.city.max_size_m = s["max_size_m"].get<double>();
        }
        if (j.contains("schedule")) {
            const json& s = j["schedule"];
            if (s.contains("T")) c.T = s["T"].get<int>();
            if (s.contains("beta_start")) c.beta_start = s["beta_start"].get<double>();
            if (s.contains("beta_end")) c.beta_end = s["beta_end"].get<double>();
        }
        if (j.contains("model")) {
            const json& s = j["model"];
            if (s.contains("base_channels")) c.desc.base_channels = s["base_channels"].get<int>();
            if (s.contains("levels")) c.desc.levels = s["levels"].get<int>();
            if (s.contains("time_dim")) c.desc.time_dim = s["time_dim"].get<int>();
        }
        if (j.contains("optimizer")) {
            const json& s = j["optimizer"];
            if (s.contains("lr")) c.opt.lr = s["lr"].get<double>();
            if (s.contains("steps")) c.opt.steps = s["steps"].get<int64_t>();
            if (s.contains("batch_size")) c.opt.batch_size = s["batch_size"].get<int>();
            if (s.contains("ema_decay")) c.opt.ema_decay = s["ema_decay"].get<double>();
            if (s.contains("ema_start")) c.opt.ema_start = s["ema_start"].get<int64_t>();
        }
        if (j.contains("seeds")) {
            const json& s = j["seeds"];
            if (s.contains("dataset")) c.dataset_seed = s["dataset"].get<uint64_t>();
            if (s.contains("train")) c.train_seed = s["train"].get<uint64_t>();
            if (s.contains("sample")) c.sample_seed = s["sample"].get<uint64_t>();
        }
        if (j.contains("eval_max_items")) c.eval_max_items = j["eval_max_items"].get<int>();
        if (j.contains("serial")) c.serial = j["serial"].get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field: ") + e.what());
    }
    c.validate();
    return c;
}

std::string config_to_json_text(const RunConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

RunConfig load_config(const fs::path& path) { return config_from_json_text(read_text_file(path)); }

uint64_t config_hash(const RunConfig& cfg) {
    // nlohmann objects are key-sorted, so dump() is canonical
    std::string canon = config_to_json(cfg).dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_manifest(const fs::path& dir, const RunConfig& cfg, const std::string& command) {
    fs::create_directories(dir);
    json m;
    m["config"] = config_to_json(cfg);
    m["config_hash"] = config_hash(cfg);
    m["command"] = command;
    m["format_version"] = 1;
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

Schedule make_schedule(const RunConfig& cfg) {
    return linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
}

MetricRow cdiff_fullscale_reference_row() {
    MetricRow row;
    row.method = "cdiff_fullscale_ref";
    row.psnr_db = 31.15;
    row.ssim = 0.9280;
    row.nmse = 0.0073;
    row.n_items = 0;
    row.note = "published full-scale reference, not reproduced by this run";
    return row;
}

static double smoothed_mean(const std::vector<LossRecord>& curve, size_t begin, size_t count) {
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = begin; i < curve.size() && n < count; ++i, ++n) acc += curve[i].loss;
    return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

SmokeResult pipeline_smoke(const RunConfig& cfg, const fs::path& run_dir, bool verbose) {
    cfg.validate();
    fs::create_directories(run_dir);
    write_manifest(run_dir, cfg, "pipeline_smoke");
    auto stage = [&](const char* name) {
        if (verbose) std::cerr << "[smoke] stage: " << name << "\n";
    };

    stage("gen-data");
    GridSpec grid_hr = make_grid(cfg.area_side_m, cfg.hr_resolution);
    Dataset ds;
    try {
        ds = gen_dataset(cfg.n_pairs, grid_hr, cfg.factor, cfg.city, cfg.sim, cfg.dataset_seed);
        save_dataset(run_dir / "dataset", ds, cfg.sim, cfg.city, cfg.dataset_seed);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("pipeline_smoke failed at stage gen-data: ") + e.what());
    }

    stage("train");
    Schedule sched = make_schedule(cfg);
    UNetDenoiser net(cfg.desc);
    SmokeResult result;
    TrainResult tr;
    try {
        std::vector<TrainItem> items;
        for (int idx : ds.train_idx)
            items.push_back({to_tensor(quantize8(ds.pairs[idx].hr.pixels)),
                             to_tensor(quantize8(ds.pairs[idx].lr.pixels))});
        TrainConfig tc;
        tc.opt = cfg.opt;
        tc.factor = cfg.factor;
        tc.seed = cfg.train_seed;
        tc.serial_deterministic = cfg.serial;
        tc.checkpoint_dir = run_dir / "checkpoints";
        if (verbose)
            tc.on_step = [](const LossRecord& r) {
                if (r.step % 25 == 0) std::cerr << "[smoke] step " << r.step << " loss " << r.loss << "\n";
            };
        DenoiserParams init = net.init_params(cfg.train_seed);
        tr = train(net, init, items, sched, tc);
        save_checkpoint(run_dir / "checkpoints" / "final.ckpt", tr.state, sched, config_hash(cfg));
        std::string log = "step\tloss\twall_s\n";
        char buf[96];
        for (const auto& r : tr.loss_curve) {
            std::snprintf(buf, sizeof(buf), "%lld\t%.8f\t%.3f\n", static_cast<long long>(r.step),
                          r.loss, r.wall_s);
            log += buf;
        }
        write_text_file(run_dir / "loss_log.tsv", log);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("pipeline_smoke failed at stage train: ") + e.what());
    }
    size_t window = std::min<size_t>(50, tr.loss_curve.size());
    result.initial_smoothed_loss = smoothed_mean(tr.loss_curve, 0, window);
    result.final_smoothed_loss =
        smoothed_mean(tr.loss_curve, tr.loss_curve.size() - window, window);

    stage("sample+baselines");
    std::vector<Raster> refs;
    std::vector<EnvCF> lr_inputs;
    int n_eval = std::min<int>(cfg.eval_max_items, static_cast<int>(ds.val_idx.size()));
    for (int k = 0; k < n_eval; ++k) {
        const DatasetPair& p = ds.pairs[ds.val_idx[k]];
        refs.push_back(quantize8(p.hr.pixels));
        EnvCF lr = p.lr;
        lr.pixels = quantize8(lr.pixels);
        lr_inputs.push_back(lr);
    }
    std::vector<MethodOutputs> methods;
    try {
        MethodOutputs nearest{"nearest", {}}, bilinear{"bilinear", {}}, kriging{"kriging", {}},
            rbf{"rbf", {}}, cdiff{"cdiff", {}};
        std::vector<EnvCF> gen =
            sample_batch(net, tr.state.ema, lr_inputs, cfg.factor, sched, cfg.sample_seed);
        fs::create_directories(run_dir / "samples");
        for (int k = 0; k < n_eval; ++k) {
            nearest.outputs.push_back(nearest_upsample(lr_inputs[k], cfg.factor).pixels);
            bilinear.outputs.push_back(bilinear_upsample(lr_inputs[k], cfg.factor).pixels);
            kriging.outputs.push_back(kriging_upsample(lr_inputs[k], cfg.factor, {}).pixels);
            rbf.outputs.push_back(rbf_upsample(lr_inputs[k], cfg.factor, {}).pixels);
            cdiff.outputs.push_back(gen[k].pixels);
            write_pgm(run_dir / "samples" / (std::to_string(k) + "_cdiff.pgm"), gen[k].pixels);
        }
        methods = {std::move(nearest), std::move(bilinear), std::move(kriging), std::move(rbf),
                   std::move(cdiff)};
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("pipeline_smoke failed at stage sample: ") + e.what());
    }

    stage("eval");
    try {
        result.rows = evaluate(methods, refs);
        std::string report = format_report(result.rows, config_hash(cfg));
        result.report_path = run_dir / "report.tsv";
        write_text_file(result.report_path, report);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("pipeline_smoke failed at stage eval: ") + e.what());
    }
    return result;
}

}  // namespace envcf
