#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "envcf/denoiser.hpp"

using namespace envcf;

namespace {

Tensor random_field(int h, int w, Rng& rng) {
    Tensor t(1, h, w);
    for (double& v : t.data) v = rng.uniform();
    return t;
}

Batch tiny_batch(int n, int hr, int factor, uint64_t seed) {
    Rng rng(seed);
    Batch b;
    b.factor = factor;
    for (int i = 0; i < n; ++i) {
        b.f0.push_back(random_field(hr, hr, rng));
        b.f_lr.push_back(random_field(hr / factor, hr / factor, rng));
    }
    return b;
}

}  // namespace

TEST_CASE("descriptor validation") {
    DenoiserDescriptor bad{16, 0, 32};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {16, 5, 32};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {0, 2, 32};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {16, 2, 7};  // odd time embedding
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    DenoiserDescriptor ok{16, 2, 32};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.spatial_divisor() == 4);
}

TEST_CASE("init_params: deterministic, seed-sensitive, layout-consistent") {
    UNetDenoiser net(DenoiserDescriptor{4, 1, 8});
    DenoiserParams a = net.init_params(7);
    DenoiserParams b = net.init_params(7);
    DenoiserParams c = net.init_params(8);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    CHECK(a.values.size() == net.param_count());

    size_t counted = 0;
    for (const auto& e : net.layout().entries) counted += e.count;
    CHECK(counted == net.param_count());

    // zero-initialized output head
    const auto& out_w = net.layout().find("out.w");
    const auto& out_b = net.layout().find("out.b");
    for (size_t i = 0; i < out_w.count; ++i) CHECK(a.values[out_w.offset + i] == 0.0);
    for (size_t i = 0; i < out_b.count; ++i) CHECK(a.values[out_b.offset + i] == 0.0);
    // groupnorm gains start at identity
    const auto& gn = net.layout().find("enc0.gn1.g");
    for (size_t i = 0; i < gn.count; ++i) CHECK(a.values[gn.offset + i] == 1.0);
}

TEST_CASE("forward: shape contract and zero-init output") {
    DenoiserDescriptor desc{4, 2, 8};
    UNetDenoiser net(desc);
    DenoiserParams p = net.init_params(1);
    Rng rng(2);
    Tensor cond = random_field(8, 8, rng);
    Tensor f_t = random_field(8, 8, rng);

    Tensor eps = net.forward(p.values, cond, f_t, 3);
    CHECK(eps.c == 1);
    CHECK(eps.h == 8);
    CHECK(eps.w == 8);
    for (double v : eps.data) CHECK(v == 0.0);

    Tensor eps2 = net.forward(p.values, cond, f_t, 3);
    CHECK(eps.data == eps2.data);

    // non-divisible input
    Tensor odd = random_field(6, 6, rng);
    CHECK_THROWS(net.forward(p.values, odd, odd, 3));
    // mismatched shapes
    CHECK_THROWS(net.forward(p.values, cond, random_field(4, 4, rng), 3));
}

TEST_CASE("forward depends on t and on the conditioning") {
    DenoiserDescriptor desc{4, 1, 8};
    UNetDenoiser net(desc);
    DenoiserParams p = net.init_params(3);
    // perturb the zero output head so differences become visible
    const auto& out_w = net.layout().find("out.w");
    Rng prng(4);
    for (size_t i = 0; i < out_w.count; ++i) p.values[out_w.offset + i] = 0.1 * prng.normal();

    Rng rng(5);
    Tensor cond = random_field(4, 4, rng);
    Tensor f_t = random_field(4, 4, rng);
    Tensor a = net.forward(p.values, cond, f_t, 1);
    Tensor b = net.forward(p.values, cond, f_t, 9);
    CHECK(a.data != b.data);

    Tensor cond2 = cond;
    cond2.data[5] += 0.5;
    Tensor c = net.forward(p.values, cond2, f_t, 1);
    CHECK(a.data != c.data);
}

TEST_CASE("loss at zero init equals the mean squared noise") {
    DenoiserDescriptor desc{4, 1, 8};
    UNetDenoiser net(desc);
    DenoiserParams p = net.init_params(11);
    Schedule s = linear_schedule(10, 1e-3, 0.1);
    Batch b = tiny_batch(3, 8, 2, 21);
    Rng rng(22);
    LossDraws draws = sample_draws(b, s, rng);

    double loss = denoiser_loss(net, p, b, s, draws);
    double expected = 0.0;
    size_t npix = 64;
    for (const Tensor& e : draws.eps)
        for (double v : e.data) expected += v * v;
    expected /= static_cast<double>(b.f0.size()) * npix;
    CHECK(loss == doctest::Approx(expected).epsilon(1e-12));

    // eps forced to zero: perfect prediction, zero loss
    LossDraws zero = draws;
    for (Tensor& e : zero.eps)
        for (double& v : e.data) v = 0.0;
    // with eps = 0 the zero net still predicts 0, so the loss vanishes
    CHECK(denoiser_loss(net, p, b, s, zero) == doctest::Approx(0.0));
}

TEST_CASE("loss gradient matches finite differences on a subset") {
    DenoiserDescriptor desc{2, 1, 4};
    UNetDenoiser net(desc);
    DenoiserParams p = net.init_params(31);
    Rng jitter(32);
    for (double& v : p.values) v += 0.02 * jitter.normal();  // move off the zero head
    Schedule s = linear_schedule(8, 1e-3, 0.2);
    Batch b = tiny_batch(2, 4, 2, 33);
    Rng rng(34);
    LossDraws draws = sample_draws(b, s, rng);

    std::vector<double> grads;
    denoiser_loss_grad(net, p, b, s, draws, grads);
    CHECK(grads.size() == p.values.size());

    const double h = 1e-5;
    size_t stride = std::max<size_t>(1, p.values.size() / 40);
    for (size_t i = 0; i < p.values.size(); i += stride) {
        double keep = p.values[i];
        p.values[i] = keep + h;
        double fp = denoiser_loss(net, p, b, s, draws);
        p.values[i] = keep - h;
        double fm = denoiser_loss(net, p, b, s, draws);
        p.values[i] = keep;
        double fd = (fp - fm) / (2 * h);
        CHECK(grads[i] == doctest::Approx(fd).epsilon(2e-5));
    }
}

TEST_CASE("loss_grad agrees with loss for identical draws") {
    DenoiserDescriptor desc{2, 1, 4};
    UNetDenoiser net(desc);
    DenoiserParams p = net.init_params(41);
    Schedule s = linear_schedule(5, 1e-3, 0.1);
    Batch b = tiny_batch(2, 4, 2, 42);
    Rng rng(43);
    LossDraws draws = sample_draws(b, s, rng);
    std::vector<double> grads;
    CHECK(denoiser_loss_grad(net, p, b, s, draws, grads) ==
          doctest::Approx(denoiser_loss(net, p, b, s, draws)).epsilon(1e-14));
}

TEST_CASE("adam: zero grad is a fixed point, first step is scaled sign") {
    DenoiserParams p;
    p.desc = {2, 1, 4};
    p.values = {1.0, -2.0, 0.5};
    OptimizerConfig opt;
    opt.lr = 0.1;
    TrainState st = make_train_state(p, opt);

    std::vector<double> zero(3, 0.0);
    adam_step(st, zero);
    CHECK(st.params.values == p.values);
    CHECK(st.step == 1);

    TrainState st2 = make_train_state(p, opt);
    std::vector<double> g = {0.3, -0.7, 0.0};
    adam_step(st2, g);
    for (int i = 0; i < 3; ++i) {
        double mhat = g[i];  // bias correction cancels the (1-beta) factors at step 1
        double vhat = g[i] * g[i];
        double expect = p.values[i] - opt.lr * mhat / (std::sqrt(vhat) + opt.adam_eps);
        CHECK(st2.params.values[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("ema: mirrors before start, fixed point, geometric pull") {
    DenoiserParams p;
    p.desc = {2, 1, 4};
    p.values = {1.0, 2.0};
    OptimizerConfig opt;
    opt.ema_decay = 0.9;
    opt.ema_start = 3;
    TrainState st = make_train_state(p, opt);
    CHECK(st.ema == p.values);

    st.step = 2;
    st.params.values = {5.0, 6.0};
    ema_update(st);
    CHECK(st.ema == st.params.values);  // still mirroring

    st.step = 3;
    st.params.values = {7.0, 8.0};
    ema_update(st);
    CHECK(st.ema[0] == doctest::Approx(0.9 * 5.0 + 0.1 * 7.0));
    CHECK(st.ema[1] == doctest::Approx(0.9 * 6.0 + 0.1 * 8.0));

    // decay 0 tracks the raw params exactly
    TrainState tr = make_train_state(p, opt);
    tr.opt.ema_decay = 0.0;
    tr.opt.ema_start = 0;
    tr.step = 1;
    tr.params.values = {-1.0, -2.0};
    ema_update(tr);
    CHECK(tr.ema == tr.params.values);
}

TEST_CASE("train: zero steps, determinism, loss log shape") {
    DenoiserDescriptor desc{2, 1, 4};
    UNetDenoiser net(desc);
    DenoiserParams init = net.init_params(51);
    Schedule s = linear_schedule(6, 1e-3, 0.1);
    std::vector<TrainItem> items;
    Rng rng(52);
    for (int i = 0; i < 4; ++i)
        items.push_back({random_field(4, 4, rng), random_field(2, 2, rng)});

    TrainConfig cfg;
    cfg.factor = 2;
    cfg.seed = 9;
    cfg.opt.steps = 0;
    cfg.opt.batch_size = 2;
    cfg.opt.lr = 1e-3;
    TrainResult r0 = train(net, init, items, s, cfg);
    CHECK(r0.state.params.values == init.values);
    CHECK(r0.loss_curve.empty());

    cfg.opt.steps = 5;
    TrainResult a = train(net, init, items, s, cfg);
    TrainResult b = train(net, init, items, s, cfg);
    CHECK(a.state.params.values == b.state.params.values);
    CHECK(a.state.ema == b.state.ema);
    CHECK(a.loss_curve.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(a.loss_curve[i].step == static_cast<int64_t>(i + 1));
        CHECK(a.loss_curve[i].loss == b.loss_curve[i].loss);
        CHECK(a.loss_curve[i].wall_s == 0.0);
        CHECK(std::isfinite(a.loss_curve[i].loss));
    }
    CHECK(a.state.params.values != init.values);
}

TEST_CASE("checkpoint round trip and mismatch rejection") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "envcf_ckpt_test";
    fs::create_directories(dir);
    fs::path path = dir / "a.ckpt";

    DenoiserDescriptor desc{2, 1, 4};
    UNetDenoiser net(desc);
    DenoiserParams p = net.init_params(61);
    OptimizerConfig opt;
    TrainState st = make_train_state(p, opt);
    st.step = 17;
    Rng rng(62);
    for (double& v : st.m) v = rng.normal();
    for (double& v : st.v) v = rng.uniform();
    Schedule s = linear_schedule(6, 1e-3, 0.1);

    save_checkpoint(path, st, s, 0xabcdefull);
    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.state.params.desc == desc);
    CHECK(ck.state.params.values == st.params.values);
    CHECK(ck.state.ema == st.ema);
    CHECK(ck.state.m == st.m);
    CHECK(ck.state.v == st.v);
    CHECK(ck.state.step == 17);
    CHECK(ck.schedule_T == 6);
    CHECK(ck.config_hash == 0xabcdefull);

    CHECK_NOTHROW(load_checkpoint_checked(path, desc, s));
    DenoiserDescriptor other{4, 1, 4};
    CHECK_THROWS(load_checkpoint_checked(path, other, s));
    Schedule s2 = linear_schedule(7, 1e-3, 0.1);
    CHECK_THROWS(load_checkpoint_checked(path, desc, s2));

    fs::remove_all(dir);
}
