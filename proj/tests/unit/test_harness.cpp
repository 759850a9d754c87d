#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "envcf/harness.hpp"
#include "envcf/io.hpp"

using namespace envcf;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& leaf) {
    fs::path dir = fs::temp_directory_path() / ("envcf_test_" + leaf);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("pgm round trip and quantization") {
    fs::path dir = scratch_dir("pgm");
    Raster r(3, 5);
    Rng rng(1);
    for (double& v : r.data) v = rng.uniform();

    write_pgm(dir / "a.pgm", r);
    Raster back = read_pgm(dir / "a.pgm");
    CHECK(back.h == 3);
    CHECK(back.w == 5);
    Raster q = quantize8(r);
    CHECK(back.data == q.data);
    // quantization is idempotent
    CHECK(quantize8(q).data == q.data);
    for (size_t i = 0; i < r.size(); ++i) {
        CHECK(std::abs(q.data[i] - r.data[i]) <= 0.5 / 255.0 + 1e-12);
        CHECK(q.data[i] == std::round(r.data[i] * 255.0) / 255.0);
    }

    CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("envcf sidecar round trip") {
    fs::path dir = scratch_dir("sidecar");
    EnvCF f;
    f.grid = make_grid(32.0, 8);
    f.role_tag = Role::LR;
    f.pixels = Raster(8, 8);
    Rng rng(2);
    for (double& v : f.pixels.data) v = rng.uniform();

    EnvcfMeta meta;
    meta.grid = f.grid;
    meta.role = Role::LR;
    meta.bs_i = 3;
    meta.bs_j = 5;
    save_envcf(dir / "f.pgm", f, meta);
    auto [g, m2] = load_envcf(dir / "f.pgm");
    CHECK(g.grid == f.grid);
    CHECK(g.role_tag == Role::LR);
    CHECK(m2.bs_i == 3);
    CHECK(m2.bs_j == 5);
    CHECK(g.pixels.data == quantize8(f.pixels).data);
    fs::remove_all(dir);
}

TEST_CASE("config: defaults, round trip, rejection") {
    RunConfig def = config_from_json_text("{}");
    CHECK(def.hr_resolution == 64);
    CHECK(def.factor == 4);
    CHECK(def.T == 200);

    RunConfig c;
    c.hr_resolution = 32;
    c.factor = 2;
    c.n_pairs = 7;
    c.T = 50;
    c.desc = {8, 2, 16};
    c.opt.lr = 1e-3;
    c.dataset_seed = 42;
    RunConfig back = config_from_json_text(config_to_json_text(c));
    CHECK(back.hr_resolution == 32);
    CHECK(back.n_pairs == 7);
    CHECK(back.T == 50);
    CHECK(back.desc == c.desc);
    CHECK(back.opt.lr == c.opt.lr);
    CHECK(back.dataset_seed == 42);
    CHECK(config_hash(back) == config_hash(c));

    CHECK_THROWS_AS(config_from_json_text("not json"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"factor": 3})"), ConfigError);  // 3 does not divide 64
    CHECK_THROWS_AS(config_from_json_text(R"({"schedule": {"beta_start": 0.5, "beta_end": 0.1}})"),
                    ConfigError);
}

TEST_CASE("config hash ignores key order, tracks values") {
    RunConfig a = config_from_json_text(R"({"factor": 4, "hr_resolution": 64})");
    RunConfig b = config_from_json_text(R"({"hr_resolution": 64, "factor": 4})");
    CHECK(config_hash(a) == config_hash(b));

    RunConfig c = config_from_json_text(R"({"hr_resolution": 32, "factor": 4})");
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("manifest contents") {
    fs::path dir = scratch_dir("manifest");
    RunConfig c;
    write_manifest(dir, c, "unit-test");
    std::string text = read_text_file(dir / "manifest.json");
    CHECK(text.find("\"command\": \"unit-test\"") != std::string::npos);
    CHECK(text.find("config_hash") != std::string::npos);
    CHECK(text.find("hr_resolution") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("make_schedule honors the config") {
    RunConfig c;
    c.T = 10;
    c.beta_start = 1e-3;
    c.beta_end = 0.05;
    Schedule s = make_schedule(c);
    CHECK(s.T == 10);
    CHECK(s.beta.front() == doctest::Approx(1e-3));
    CHECK(s.beta.back() == doctest::Approx(0.05));
}

TEST_CASE("reference row is marked as not reproduced") {
    MetricRow row = cdiff_fullscale_reference_row();
    CHECK(row.psnr_db == doctest::Approx(31.15));
    CHECK(row.ssim == doctest::Approx(0.9280));
    CHECK(row.nmse == doctest::Approx(0.0073));
    CHECK(!row.note.empty());
    CHECK(row.n_items == 0);
}

TEST_CASE("dataset save/load is byte deterministic") {
    fs::path d1 = scratch_dir("ds1");
    fs::path d2 = scratch_dir("ds2");
    GridSpec grid = make_grid(32.0, 16);
    CityParams p;
    p.n_buildings = 3;
    p.min_size_m = 4.0;
    p.max_size_m = 10.0;
    SimulatorConfig sim;
    Dataset ds = gen_dataset(5, grid, 4, p, sim, 77);
    save_dataset(d1, ds, sim, p, 77);
    Dataset ds2 = gen_dataset(5, grid, 4, p, sim, 77);
    save_dataset(d2, ds2, sim, p, 77);

    for (const auto& entry : fs::recursive_directory_iterator(d1)) {
        if (!entry.is_regular_file()) continue;
        fs::path rel = fs::relative(entry.path(), d1);
        CHECK(fs::exists(d2 / rel));
        CHECK(slurp(entry.path()) == slurp(d2 / rel));
    }

    Dataset loaded = load_dataset(d1);
    CHECK(loaded.pairs.size() == 5);
    CHECK(loaded.factor == 4);
    CHECK(loaded.grid_hr == grid);
    CHECK(loaded.train_idx.size() == 4);
    CHECK(loaded.val_idx.size() == 1);
    for (size_t i = 0; i < loaded.pairs.size(); ++i) {
        CHECK(loaded.pairs[i].hr.pixels.data == quantize8(ds.pairs[i].hr.pixels).data);
        CHECK(loaded.pairs[i].lr.pixels.data == quantize8(ds.pairs[i].lr.pixels).data);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}
