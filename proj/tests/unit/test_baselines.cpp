#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "envcf/baselines.hpp"
#include "envcf/grid.hpp"

using namespace envcf;

namespace {

EnvCF make_lr(int res, double area, std::vector<double> vals) {
    EnvCF f;
    f.grid = make_grid(area, res);
    f.role_tag = Role::LR;
    f.pixels = Raster(res, res);
    f.pixels.data = std::move(vals);
    return f;
}

EnvCF random_lr(int res, double area, uint64_t seed) {
    EnvCF f;
    f.grid = make_grid(area, res);
    f.role_tag = Role::LR;
    f.pixels = Raster(res, res);
    Rng rng(seed);
    for (double& v : f.pixels.data) v = rng.uniform();
    return f;
}

}  // namespace

TEST_CASE("nearest: factor 1 identity, block replication, decimation inverse") {
    EnvCF lr = make_lr(2, 8.0, {0.1, 0.2, 0.3, 0.4});
    EnvCF same = nearest_upsample(lr, 1);
    CHECK(same.pixels.data == lr.pixels.data);

    EnvCF up = nearest_upsample(lr, 2);
    CHECK(up.grid.resolution == 4);
    CHECK(up.role_tag == Role::HR);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(up.pixels.at(i, j) == lr.pixels.at(i / 2, j / 2));

    EnvCF back = downsample(up, 2);
    CHECK(back.pixels.data == lr.pixels.data);

    CHECK_THROWS_AS(nearest_upsample(lr, 0), std::invalid_argument);
}

TEST_CASE("bilinear: constants, 1D profile, convexity bounds") {
    EnvCF c = make_lr(3, 12.0, std::vector<double>(9, 0.6));
    EnvCF up = bilinear_upsample(c, 4);
    for (double v : up.pixels.data) CHECK(v == doctest::Approx(0.6));

    // rows [0 0; 1 1] with factor 2: each column follows [0, 0.25, 0.75, 1]
    EnvCF step = make_lr(2, 8.0, {0.0, 0.0, 1.0, 1.0});
    EnvCF s2 = bilinear_upsample(step, 2);
    std::vector<double> expect = {0.0, 0.25, 0.75, 1.0};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(s2.pixels.at(i, j) == doctest::Approx(expect[i]));

    EnvCF r = random_lr(5, 20.0, 17);
    double lo = *std::min_element(r.pixels.data.begin(), r.pixels.data.end());
    double hi = *std::max_element(r.pixels.data.begin(), r.pixels.data.end());
    EnvCF ru = bilinear_upsample(r, 3);
    for (double v : ru.pixels.data) {
        CHECK(v >= lo - 1e-12);
        CHECK(v <= hi + 1e-12);
    }
}

TEST_CASE("kriging: constant field, exactness at sample sites") {
    EnvCF c = make_lr(3, 12.0, std::vector<double>(9, 0.4));
    KrigingDiagnostics diag;
    EnvCF up = kriging_upsample(c, 2, VariogramConfig{}, &diag);
    for (double v : up.pixels.data) CHECK(v == doctest::Approx(0.4).epsilon(1e-9));

    EnvCF r = random_lr(4, 16.0, 23);
    VariogramConfig vc;
    vc.nugget = 0.0;
    EnvCF ru = kriging_upsample(r, 2, vc, &diag);
    CHECK(diag.retries == 0);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(ru.pixels.at(2 * i, 2 * j) == doctest::Approx(r.pixels.at(i, j)).epsilon(1e-8));
}

TEST_CASE("kriging matches a hand-built ordinary kriging system") {
    // 2x2 LR over a 4m area, factor 2: samples at (0,0),(2,0),(0,2),(2,2) m.
    EnvCF lr = make_lr(2, 4.0, {0.1, 0.9, 0.4, 0.6});
    VariogramConfig vc;
    vc.fit = false;
    vc.sill = 0.05;
    vc.range_m = 2.0;
    vc.nugget = 0.0;
    EnvCF up = kriging_upsample(lr, 2, vc);

    auto gamma = [&](double h) { return h == 0.0 ? 0.0 : vc.sill * (1.0 - std::exp(-h / vc.range_m)); };
    std::vector<std::pair<double, double>> sites = {{0, 0}, {2, 0}, {0, 2}, {2, 2}};  // (x, y)
    std::vector<double> vals = {0.1, 0.9, 0.4, 0.6};
    Eigen::MatrixXd K(5, 5);
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b)
            K(a, b) = gamma(std::hypot(sites[a].first - sites[b].first,
                                       sites[a].second - sites[b].second));
        K(a, 4) = 1.0;
        K(4, a) = 1.0;
    }
    K(4, 4) = 0.0;
    for (auto [pi, pj] : {std::pair{1, 1}, std::pair{3, 2}, std::pair{0, 3}}) {
        double py = pi * 1.0, px = pj * 1.0;  // HR cell is 1 m
        Eigen::VectorXd rhs(5);
        for (int a = 0; a < 4; ++a)
            rhs(a) = gamma(std::hypot(sites[a].first - px, sites[a].second - py));
        rhs(4) = 1.0;
        Eigen::VectorXd w = K.fullPivLu().solve(rhs);
        double pred = 0.0;
        for (int a = 0; a < 4; ++a) pred += w(a) * vals[a];
        CHECK(up.pixels.at(pi, pj) == doctest::Approx(pred).epsilon(1e-9));
    }
}

TEST_CASE("rbf: exactness at sites, single sample, oracle solve") {
    EnvCF r = random_lr(3, 12.0, 29);
    RbfConfig rc;
    RbfDiagnostics diag;
    EnvCF ru = rbf_upsample(r, 2, rc, &diag);
    CHECK(diag.ladder_steps == 0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(ru.pixels.at(2 * i, 2 * j) == doctest::Approx(r.pixels.at(i, j)).epsilon(1e-8));

    EnvCF one = make_lr(1, 4.0, {0.7});
    EnvCF cu = rbf_upsample(one, 4, rc);
    for (double v : cu.pixels.data) CHECK(v == 0.7);

    // independent multiquadric solve for a 2x2 layout
    EnvCF lr = make_lr(2, 4.0, {0.2, 0.8, 0.5, 0.3});
    EnvCF up = rbf_upsample(lr, 2, rc);
    std::vector<std::pair<double, double>> sites = {{0, 0}, {2, 0}, {0, 2}, {2, 2}};
    auto phi = [&](double d) { return std::sqrt(d * d + rc.shape_m * rc.shape_m); };
    Eigen::MatrixXd A(4, 4);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            A(a, b) = phi(std::hypot(sites[a].first - sites[b].first,
                                     sites[a].second - sites[b].second));
    Eigen::VectorXd y(4);
    y << 0.2, 0.8, 0.5, 0.3;
    Eigen::VectorXd w = A.fullPivLu().solve(y);
    for (auto [pi, pj] : {std::pair{1, 3}, std::pair{2, 1}}) {
        double py = pi * 1.0, px = pj * 1.0;
        double pred = 0.0;
        for (int a = 0; a < 4; ++a)
            pred += w(a) * phi(std::hypot(sites[a].first - px, sites[a].second - py));
        CHECK(up.pixels.at(pi, pj) == doctest::Approx(pred).epsilon(1e-9));
    }
}

TEST_CASE("all baselines agree with the LR input under decimation") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        EnvCF lr = random_lr(4, 16.0, seed);
        EnvCF n = nearest_upsample(lr, 2);
        EnvCF k = kriging_upsample(lr, 2, VariogramConfig{});
        EnvCF rb = rbf_upsample(lr, 2, RbfConfig{});
        CHECK(downsample(n, 2).pixels.data == lr.pixels.data);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                CHECK(k.pixels.at(2 * i, 2 * j) == doctest::Approx(lr.pixels.at(i, j)).epsilon(1e-7));
                CHECK(rb.pixels.at(2 * i, 2 * j) == doctest::Approx(lr.pixels.at(i, j)).epsilon(1e-7));
            }
        for (double v : k.pixels.data) CHECK(std::isfinite(v));
        for (double v : rb.pixels.data) CHECK(std::isfinite(v));
    }
}
