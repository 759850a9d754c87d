// envcf command-line front end: dataset generation, training, sampling,
// baseline benchmarking and evaluation.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 training fault,
// 5 sampling fault.

#include <iostream>

#include <CLI11.hpp>

#include "envcf/harness.hpp"
#include "envcf/io.hpp"

namespace fs = std::filesystem;
using namespace envcf;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTrain = 4;
constexpr int kExitSample = 5;

RunConfig resolve_config(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    return load_config(config_path);
}

std::vector<TrainItem> train_items_from(const Dataset& ds) {
    std::vector<TrainItem> items;
    for (int idx : ds.train_idx)
        items.push_back({to_tensor(quantize8(ds.pairs[idx].hr.pixels)),
                         to_tensor(quantize8(ds.pairs[idx].lr.pixels))});
    return items;
}

int run(int argc, char** argv) {
    CLI::App app{"EnvCF super-resolution toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // allow global options like --config after the subcommand

    std::string config_path;
    app.add_option("--config", config_path, "JSON run config; flags override its fields");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic HR/LR dataset");
    std::string gen_out = "dataset";
    int gen_pairs = -1;
    int64_t gen_seed = -1;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--pairs", gen_pairs, "number of pairs (overrides config)");
    gen->add_option("--seed", gen_seed, "dataset seed (overrides config)");

    // degrade
    auto* deg = app.add_subcommand("degrade", "Decimate an HR raster to LR");
    std::string deg_in, deg_out;
    int deg_factor = 4;
    deg->add_option("--in", deg_in, "HR raster (PGM)")->required();
    deg->add_option("--out", deg_out, "LR raster output")->required();
    deg->add_option("--factor", deg_factor, "decimation factor");

    // train
    auto* tr = app.add_subcommand("train", "Train the conditional denoiser");
    std::string tr_data = "dataset", tr_out = "trainrun";
    int64_t tr_steps = -1;
    tr->add_option("--data", tr_data, "dataset directory");
    tr->add_option("--out", tr_out, "run output directory");
    tr->add_option("--steps", tr_steps, "step budget (overrides config)");

    // sample
    auto* sa = app.add_subcommand("sample", "Reconstruct an HR EnvCF from an LR raster");
    std::string sa_ckpt, sa_in, sa_out = "sample.pgm", sa_snap_dir;
    int64_t sa_seed = -1;
    int sa_snap_every = 0;
    int sa_factor = 0;
    bool sa_raw_weights = false;
    sa->add_option("--checkpoint", sa_ckpt, "trained checkpoint")->required();
    sa->add_option("--in", sa_in, "LR raster (PGM)")->required();
    sa->add_option("--out", sa_out, "HR raster output");
    sa->add_option("--factor", sa_factor, "upscale factor (defaults to config)");
    sa->add_option("--seed", sa_seed, "sampling seed (overrides config)");
    sa->add_option("--snapshot-every", sa_snap_every, "write every k-th intermediate step");
    sa->add_option("--snapshot-dir", sa_snap_dir, "directory for step snapshots");
    sa->add_flag("--raw-weights", sa_raw_weights, "sample with raw weights instead of EMA");

    // eval
    auto* ev = app.add_subcommand("eval", "Metrics between two rasters");
    std::string ev_a, ev_b;
    ev->add_option("--pred", ev_a, "prediction raster")->required();
    ev->add_option("--ref", ev_b, "reference raster")->required();

    // bench
    auto* be = app.add_subcommand("bench", "Score a method on the validation split");
    std::string be_method = "bilinear", be_data = "dataset", be_out = "report.tsv", be_ckpt;
    int be_max = -1;
    be->add_option("--method", be_method, "nearest|bilinear|kriging|rbf|cdiff")->required();
    be->add_option("--data", be_data, "dataset directory");
    be->add_option("--out", be_out, "report output path");
    be->add_option("--checkpoint", be_ckpt, "checkpoint (cdiff only)");
    be->add_option("--max-items", be_max, "cap on scored validation items");

    // smoke
    auto* sm = app.add_subcommand("smoke", "Full gen-data/train/sample/eval pipeline");
    std::string sm_out = "smokerun";
    bool sm_verbose = false;
    sm->add_option("--out", sm_out, "run directory");
    sm->add_flag("--verbose", sm_verbose, "progress to stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    RunConfig cfg;
    try {
        cfg = resolve_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (*gen) {
            if (gen_pairs >= 0) cfg.n_pairs = gen_pairs;
            if (gen_seed >= 0) cfg.dataset_seed = static_cast<uint64_t>(gen_seed);
            cfg.validate();
            GridSpec grid = make_grid(cfg.area_side_m, cfg.hr_resolution);
            Dataset ds = gen_dataset(cfg.n_pairs, grid, cfg.factor, cfg.city, cfg.sim, cfg.dataset_seed);
            save_dataset(gen_out, ds, cfg.sim, cfg.city, cfg.dataset_seed);
            write_manifest(gen_out, cfg, "gen-data");
            std::cout << "wrote " << ds.pairs.size() << " pairs to " << gen_out << "\n";
            return 0;
        }
        if (*deg) {
            auto [f, meta] = load_envcf(deg_in);
            EnvCF lr = downsample(f, deg_factor);
            EnvcfMeta lmeta = meta;
            lmeta.grid = lr.grid;
            lmeta.role = Role::LR;
            save_envcf(deg_out, lr, lmeta);
            return 0;
        }
        if (*tr) {
            if (tr_steps >= 0) cfg.opt.steps = tr_steps;
            cfg.validate();
            Dataset ds;
            try {
                ds = load_dataset(tr_data);
            } catch (const std::exception& e) {
                std::cerr << "data error: " << e.what() << "\n";
                return kExitData;
            }
            Schedule sched = make_schedule(cfg);
            UNetDenoiser net(cfg.desc);
            TrainConfig tc;
            tc.opt = cfg.opt;
            tc.factor = ds.factor;
            tc.seed = cfg.train_seed;
            tc.serial_deterministic = cfg.serial;
            tc.checkpoint_dir = fs::path(tr_out) / "checkpoints";
            DenoiserParams init = net.init_params(cfg.train_seed);
            TrainResult res;
            try {
                res = train(net, init, train_items_from(ds), sched, tc);
            } catch (const TrainingFault& e) {
                std::cerr << "training fault: " << e.what() << "\n";
                return kExitTrain;
            }
            fs::create_directories(tc.checkpoint_dir);
            save_checkpoint(tc.checkpoint_dir / "final.ckpt", res.state, sched, config_hash(cfg));
            std::string log = "step\tloss\twall_s\n";
            char buf[96];
            for (const auto& r : res.loss_curve) {
                std::snprintf(buf, sizeof(buf), "%lld\t%.8f\t%.3f\n",
                              static_cast<long long>(r.step), r.loss, r.wall_s);
                log += buf;
            }
            write_text_file(fs::path(tr_out) / "loss_log.tsv", log);
            write_manifest(tr_out, cfg, "train");
            std::cout << "trained " << res.state.step << " steps; checkpoint at "
                      << (tc.checkpoint_dir / "final.ckpt") << "\n";
            return 0;
        }
        if (*sa) {
            if (sa_seed >= 0) cfg.sample_seed = static_cast<uint64_t>(sa_seed);
            Checkpoint ck;
            try {
                ck = load_checkpoint(sa_ckpt);
            } catch (const std::exception& e) {
                std::cerr << "data error: " << e.what() << "\n";
                return kExitData;
            }
            Schedule sched = linear_schedule(ck.schedule_T, ck.beta_start, ck.beta_end);
            UNetDenoiser net(ck.state.params.desc);
            auto [lr, meta] = load_envcf(sa_in);
            SamplerOptions opts;
            opts.snapshot_every = sa_snap_every;
            const std::vector<double>& weights =
                sa_raw_weights ? ck.state.params.values : ck.state.ema;
            int factor = sa_factor > 0 ? sa_factor : cfg.factor;
            SampleResult res;
            try {
                res = sample(net, weights, lr, factor, sched, cfg.sample_seed, opts);
            } catch (const SamplingFault& e) {
                std::cerr << "sampling fault: " << e.what() << "\n";
                return kExitSample;
            }
            EnvcfMeta out_meta = meta;
            out_meta.grid = res.output.grid;
            out_meta.role = Role::HR;
            save_envcf(sa_out, res.output, out_meta);
            if (!sa_snap_dir.empty()) {
                fs::create_directories(sa_snap_dir);
                for (const auto& [t, snap] : res.snapshots)
                    write_pgm(fs::path(sa_snap_dir) / ("t" + std::to_string(t) + ".pgm"), snap);
            }
            return 0;
        }
        if (*ev) {
            Raster a = read_pgm(ev_a), b = read_pgm(ev_b);
            std::cout << "psnr_db\t" << psnr(a, b) << "\nssim\t" << ssim(a, b) << "\nnmse\t"
                      << nmse(a, b) << "\n";
            return 0;
        }
        if (*be) {
            Dataset ds;
            try {
                ds = load_dataset(be_data);
            } catch (const std::exception& e) {
                std::cerr << "data error: " << e.what() << "\n";
                return kExitData;
            }
            int n_eval = static_cast<int>(ds.val_idx.size());
            if (be_max >= 0) n_eval = std::min(n_eval, be_max);
            else n_eval = std::min(n_eval, cfg.eval_max_items);
            std::vector<Raster> refs;
            std::vector<EnvCF> lrs;
            for (int k = 0; k < n_eval; ++k) {
                const DatasetPair& p = ds.pairs[ds.val_idx[k]];
                refs.push_back(p.hr.pixels);
                lrs.push_back(p.lr);
            }
            MethodOutputs mo{be_method, {}};
            if (be_method == "nearest") {
                for (const auto& lr : lrs) mo.outputs.push_back(nearest_upsample(lr, ds.factor).pixels);
            } else if (be_method == "bilinear") {
                for (const auto& lr : lrs) mo.outputs.push_back(bilinear_upsample(lr, ds.factor).pixels);
            } else if (be_method == "kriging") {
                for (const auto& lr : lrs) mo.outputs.push_back(kriging_upsample(lr, ds.factor, {}).pixels);
            } else if (be_method == "rbf") {
                for (const auto& lr : lrs) mo.outputs.push_back(rbf_upsample(lr, ds.factor, {}).pixels);
            } else if (be_method == "cdiff") {
                if (be_ckpt.empty()) {
                    std::cerr << "config error: --checkpoint required for cdiff\n";
                    return kExitConfig;
                }
                Checkpoint ck = load_checkpoint(be_ckpt);
                Schedule sched = linear_schedule(ck.schedule_T, ck.beta_start, ck.beta_end);
                UNetDenoiser net(ck.state.params.desc);
                try {
                    std::vector<EnvCF> gen =
                        sample_batch(net, ck.state.ema, lrs, ds.factor, sched, cfg.sample_seed);
                    for (const auto& g : gen) mo.outputs.push_back(g.pixels);
                } catch (const SamplingFault& e) {
                    std::cerr << "sampling fault: " << e.what() << "\n";
                    return kExitSample;
                }
            } else {
                std::cerr << "config error: unknown method " << be_method << "\n";
                return kExitConfig;
            }
            auto rows = evaluate({mo}, refs);
            std::string report = format_report(rows, config_hash(cfg));
            write_text_file(be_out, report);
            std::cout << report;
            return 0;
        }
        if (*sm) {
            SmokeResult res = pipeline_smoke(cfg, sm_out, sm_verbose);
            std::cout << read_text_file(res.report_path);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TrainingFault& e) {
        std::cerr << "training fault: " << e.what() << "\n";
        return kExitTrain;
    } catch (const SamplingFault& e) {
        std::cerr << "sampling fault: " << e.what() << "\n";
        return kExitSample;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
