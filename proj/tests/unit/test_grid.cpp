#include <doctest.h>

#include "envcf/grid.hpp"

using namespace envcf;

namespace {

EnvironmentMap flat_env(int res, double area = 256.0) {
    EnvironmentMap env;
    env.grid = make_grid(area, res);
    env.cells = Raster(res, res);
    env.bs_cell = {0, 0};
    return env;
}

ChannelGainMap const_gain(const GridSpec& g, double gray) {
    ChannelGainMap cg;
    cg.grid = g;
    cg.gain_gray = Raster(g.resolution, g.resolution, gray);
    cg.gain_db = Raster(g.resolution, g.resolution, cg.gray_map.to_db(gray));
    return cg;
}

}  // namespace

TEST_CASE("make_grid cell sizes") {
    CHECK(make_grid(256.0, 256).cell_size_m == doctest::Approx(1.0));
    CHECK(make_grid(256.0, 64).cell_size_m == doctest::Approx(4.0));
    GridSpec single = make_grid(100.0, 1);
    CHECK(single.cell_size_m == doctest::Approx(100.0));
    CHECK(single.resolution == 1);
    CHECK_THROWS_AS(make_grid(-1.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(10.0, 0), std::invalid_argument);
}

TEST_CASE("make_grid scale consistency") {
    for (int res : {8, 32, 100}) {
        GridSpec a = make_grid(256.0, res);
        GridSpec b = make_grid(512.0, 2 * res);
        CHECK(a.cell_size_m == doctest::Approx(b.cell_size_m));
    }
}

TEST_CASE("compose: pure gain, building pixel, full built-up") {
    auto env = flat_env(4);
    auto gain = const_gain(env.grid, 0.5);
    EnvCF f = compose_envcf(env, gain);
    for (double v : f.pixels.data) CHECK(v == doctest::Approx(0.5));

    env.cells.at(2, 2) = 1.0;
    gain.gain_gray.at(2, 2) = 0.0;
    f = compose_envcf(env, gain);
    CHECK(f.pixels.at(2, 2) == 1.0);

    EnvironmentMap walls = flat_env(4);
    for (double& v : walls.cells.data) v = 1.0;
    auto zero_gain = const_gain(walls.grid, 0.0);
    EnvCF full = compose_envcf(walls, zero_gain);
    for (double v : full.pixels.data) CHECK(v == 1.0);
}

TEST_CASE("compose errors") {
    auto env = flat_env(4);
    auto gain = const_gain(make_grid(256.0, 8), 0.1);
    CHECK_THROWS_AS(compose_envcf(env, gain), ShapeError);

    auto g2 = const_gain(env.grid, 0.3);
    env.cells.at(1, 1) = 1.0;
    CHECK_THROWS_AS(compose_envcf(env, g2), ValidationError);
}

TEST_CASE("decompose examples and round trip") {
    EnvCF f;
    f.grid = make_grid(4.0, 2);
    f.pixels = Raster(2, 2);
    f.pixels.at(0, 0) = 0.2;
    f.pixels.at(0, 1) = 1.0;
    auto [env, gain] = decompose_envcf(f, 1.0);
    CHECK(env.cells.at(0, 0) == 0.0);
    CHECK(env.cells.at(0, 1) == 1.0);
    CHECK(gain.gain_gray.at(0, 0) == doctest::Approx(0.2));
    CHECK(gain.gain_gray.at(0, 1) == 0.0);

    // all zero
    EnvCF z;
    z.grid = f.grid;
    z.pixels = Raster(2, 2, 0.0);
    auto [ez, gz] = decompose_envcf(z, 1.0);
    for (double v : ez.cells.data) CHECK(v == 0.0);
    for (double v : gz.gain_gray.data) CHECK(v == 0.0);

    CHECK_THROWS_AS(decompose_envcf(f, 0.0), std::invalid_argument);
}

TEST_CASE("compose/decompose round trip below threshold") {
    Rng rng(7);
    auto env = flat_env(8);
    env.cells.at(3, 3) = 1.0;
    env.cells.at(3, 4) = 1.0;
    ChannelGainMap gain = const_gain(env.grid, 0.0);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            if (env.cells.at(i, j) == 0.0) gain.gain_gray.at(i, j) = rng.uniform() * 0.9;
    EnvCF f = compose_envcf(env, gain);
    auto [env2, gain2] = decompose_envcf(f, 0.95);
    CHECK(env2.cells.data == env.cells.data);
    for (size_t i = 0; i < gain.gain_gray.size(); ++i)
        CHECK(gain2.gain_gray.data[i] == doctest::Approx(gain.gain_gray.data[i]).epsilon(1e-12));
}

TEST_CASE("downsample decimation") {
    EnvCF f;
    f.grid = make_grid(4.0, 4);
    f.pixels = Raster(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) f.pixels.at(i, j) = (i * 4 + j) / 16.0;
    EnvCF d = downsample(f, 2);
    CHECK(d.grid.resolution == 2);
    CHECK(d.role_tag == Role::LR);
    CHECK(d.pixels.at(0, 0) == f.pixels.at(0, 0));
    CHECK(d.pixels.at(0, 1) == f.pixels.at(0, 2));
    CHECK(d.pixels.at(1, 0) == f.pixels.at(2, 0));
    CHECK(d.pixels.at(1, 1) == f.pixels.at(2, 2));

    EnvCF same = downsample(f, 1);
    CHECK(same.pixels.data == f.pixels.data);

    CHECK_THROWS_AS(downsample(f, 3), std::invalid_argument);
}

TEST_CASE("downsample composes multiplicatively") {
    Rng rng(3);
    EnvCF f;
    f.grid = make_grid(16.0, 16);
    f.pixels = Raster(16, 16);
    for (double& v : f.pixels.data) v = rng.uniform();
    EnvCF a = downsample(f, 4);
    EnvCF b = downsample(downsample(f, 2), 2);
    CHECK(a.pixels.data == b.pixels.data);
}
