#include "envcf/denoiser.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace envcf {

using nn::ParamLayout;
using nlohmann::json;

void DenoiserDescriptor::validate() const {
    if (base_channels < 1) throw std::invalid_argument("descriptor: base_channels must be >= 1");
    if (levels < 1 || levels > 4) throw std::invalid_argument("descriptor: levels must be in 1..4");
    if (time_dim < 2 || time_dim % 2 != 0)
        throw std::invalid_argument("descriptor: time_dim must be even and >= 2");
}

namespace {

struct ResBlockSpec {
    std::string prefix;
    int cin, cout, time_dim;
    bool has_skip_conv() const { return cin != cout; }
};

void add_resblock(ParamLayout& L, const ResBlockSpec& rb) {
    L.add(rb.prefix + "conv1.w", {rb.cout, rb.cin, 3, 3});
    L.add(rb.prefix + "conv1.b", {rb.cout});
    L.add(rb.prefix + "gn1.g", {rb.cout});
    L.add(rb.prefix + "gn1.b", {rb.cout});
    L.add(rb.prefix + "tproj.w", {rb.cout, rb.time_dim});
    L.add(rb.prefix + "tproj.b", {rb.cout});
    L.add(rb.prefix + "conv2.w", {rb.cout, rb.cout, 3, 3});
    L.add(rb.prefix + "conv2.b", {rb.cout});
    L.add(rb.prefix + "gn2.g", {rb.cout});
    L.add(rb.prefix + "gn2.b", {rb.cout});
    if (rb.has_skip_conv()) {
        L.add(rb.prefix + "skip.w", {rb.cout, rb.cin, 1, 1});
        L.add(rb.prefix + "skip.b", {rb.cout});
    }
}

struct ResBlockCache {
    Tensor x, g1b, a1, gn2out;
    nn::GroupNormCache gn1, gn2;
};

std::vector<double> silu_vec(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] / (1.0 + std::exp(-x[i]));
    return y;
}

std::vector<double> silu_vec_bwd(const std::vector<double>& x, const std::vector<double>& gy) {
    std::vector<double> gx(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x[i]));
        gx[i] = gy[i] * s * (1.0 + x[i] * (1.0 - s));
    }
    return gx;
}

}  // namespace

struct UNetDenoiser::Cache {
    Tensor input;
    std::vector<double> temb0, pre1, temb_act1, temb;
    std::vector<ResBlockCache> enc;
    ResBlockCache mid;
    std::vector<ResBlockCache> dec;
    std::vector<Tensor> down_in;  // pooled tensor feeding each down projection
    std::vector<Tensor> up_in;    // upsampled tensor feeding each up projection
    Tensor out_in;
};

UNetDenoiser::UNetDenoiser(const DenoiserDescriptor& desc) : desc_(desc) {
    desc_.validate();
    int td = desc_.time_dim;
    layout_.add("time_mlp.w1", {td, td});
    layout_.add("time_mlp.b1", {td});
    layout_.add("time_mlp.w2", {td, td});
    layout_.add("time_mlp.b2", {td});
    layout_.add("stem.w", {channels_at(0), 2, 3, 3});
    layout_.add("stem.b", {channels_at(0)});
    for (int l = 0; l < desc_.levels; ++l) {
        add_resblock(layout_, {"enc" + std::to_string(l) + ".", channels_at(l), channels_at(l), td});
        layout_.add("down" + std::to_string(l) + ".w", {channels_at(l + 1), channels_at(l), 1, 1});
        layout_.add("down" + std::to_string(l) + ".b", {channels_at(l + 1)});
    }
    add_resblock(layout_, {"mid.", channels_at(desc_.levels), channels_at(desc_.levels), td});
    for (int l = desc_.levels - 1; l >= 0; --l) {
        layout_.add("up" + std::to_string(l) + ".w", {channels_at(l), channels_at(l + 1), 1, 1});
        layout_.add("up" + std::to_string(l) + ".b", {channels_at(l)});
        add_resblock(layout_, {"dec" + std::to_string(l) + ".", 2 * channels_at(l), channels_at(l), td});
    }
    layout_.add("out.w", {1, channels_at(0), 3, 3});
    layout_.add("out.b", {1});
    if (layout_.total == 0) throw std::invalid_argument("UNetDenoiser: empty parameter layout");
}

UNetDenoiser::~UNetDenoiser() = default;

DenoiserParams UNetDenoiser::init_params(uint64_t seed) const {
    Rng rng(seed);
    DenoiserParams p;
    p.desc = desc_;
    p.values.assign(layout_.total, 0.0);
    auto ends_with = [](const std::string& s, const std::string& suf) {
        return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
    };
    for (const auto& e : layout_.entries) {
        double* v = p.values.data() + e.offset;
        if (e.name == "out.w" || e.name == "out.b") {
            continue;  // zero-init head: eps_hat == 0 at init
        } else if (ends_with(e.name, ".w") || ends_with(e.name, ".w1") || ends_with(e.name, ".w2")) {
            size_t fan_in = e.count / static_cast<size_t>(e.shape[0]);
            double scale = std::sqrt(1.0 / static_cast<double>(fan_in));
            for (size_t i = 0; i < e.count; ++i) v[i] = scale * rng.normal();
        } else if (ends_with(e.name, ".g")) {
            for (size_t i = 0; i < e.count; ++i) v[i] = 1.0;
        }
        // biases and gn offsets stay 0
    }
    return p;
}

namespace {

Tensor resblock_fwd(const ParamLayout& L, const std::vector<double>& P, const ResBlockSpec& rb,
                    const Tensor& x, const std::vector<double>& temb, ResBlockCache& c) {
    const double* p = P.data();
    auto at = [&](const std::string& n) { return p + L.find(rb.prefix + n).offset; };
    c.x = x;
    Tensor h1 = nn::conv2d_fwd(x, at("conv1.w"), at("conv1.b"), {rb.cin, rb.cout, 3});
    int g1 = nn::norm_groups(rb.cout);
    Tensor n1 = nn::groupnorm_fwd(h1, at("gn1.g"), at("gn1.b"), g1, c.gn1);
    std::vector<double> tb = nn::linear_fwd(temb, at("tproj.w"), at("tproj.b"), rb.time_dim, rb.cout);
    c.g1b = n1;
    size_t hw = static_cast<size_t>(n1.h) * n1.w;
    for (int ch = 0; ch < rb.cout; ++ch)
        for (size_t i = 0; i < hw; ++i) c.g1b.data[ch * hw + i] += tb[ch];
    c.a1 = nn::silu_fwd(c.g1b);
    Tensor h2 = nn::conv2d_fwd(c.a1, at("conv2.w"), at("conv2.b"), {rb.cout, rb.cout, 3});
    c.gn2out = nn::groupnorm_fwd(h2, at("gn2.g"), at("gn2.b"), g1, c.gn2);
    Tensor a2 = nn::silu_fwd(c.gn2out);
    if (rb.has_skip_conv()) {
        Tensor sk = nn::conv2d_fwd(x, at("skip.w"), at("skip.b"), {rb.cin, rb.cout, 1});
        for (size_t i = 0; i < a2.size(); ++i) a2.data[i] += sk.data[i];
    } else {
        for (size_t i = 0; i < a2.size(); ++i) a2.data[i] += x.data[i];
    }
    return a2;
}

Tensor resblock_bwd(const ParamLayout& L, const std::vector<double>& P, const ResBlockSpec& rb,
                    const ResBlockCache& c, const Tensor& gy, std::vector<double>& G,
                    std::vector<double>& g_temb) {
    const double* p = P.data();
    auto at = [&](const std::string& n) { return p + L.find(rb.prefix + n).offset; };
    auto gat = [&](const std::string& n) { return G.data() + L.find(rb.prefix + n).offset; };
    int groups = nn::norm_groups(rb.cout);

    Tensor g_gn2out;
    nn::silu_bwd(c.gn2out, gy, g_gn2out);
    Tensor g_h2;
    nn::groupnorm_bwd(c.gn2, at("gn2.g"), groups, g_gn2out, g_h2, gat("gn2.g"), gat("gn2.b"));
    Tensor g_a1;
    nn::conv2d_bwd(c.a1, at("conv2.w"), {rb.cout, rb.cout, 3}, g_h2, g_a1, gat("conv2.w"),
                   gat("conv2.b"));
    Tensor g_g1b;
    nn::silu_bwd(c.g1b, g_a1, g_g1b);

    // time-projection grad: reduce over space, then through the dense layer
    size_t hw = static_cast<size_t>(g_g1b.h) * g_g1b.w;
    std::vector<double> g_tb(rb.cout, 0.0);
    for (int ch = 0; ch < rb.cout; ++ch)
        for (size_t i = 0; i < hw; ++i) g_tb[ch] += g_g1b.data[ch * hw + i];

    Tensor g_h1;
    nn::groupnorm_bwd(c.gn1, at("gn1.g"), groups, g_g1b, g_h1, gat("gn1.g"), gat("gn1.b"));
    Tensor g_x;
    nn::conv2d_bwd(c.x, at("conv1.w"), {rb.cin, rb.cout, 3}, g_h1, g_x, gat("conv1.w"),
                   gat("conv1.b"));
    if (rb.has_skip_conv()) {
        Tensor g_x2;
        nn::conv2d_bwd(c.x, at("skip.w"), {rb.cin, rb.cout, 1}, gy, g_x2, gat("skip.w"),
                       gat("skip.b"));
        for (size_t i = 0; i < g_x.size(); ++i) g_x.data[i] += g_x2.data[i];
    } else {
        for (size_t i = 0; i < g_x.size(); ++i) g_x.data[i] += gy.data[i];
    }
    // spatial-reduced time grad; the caller pushes it through the dense layer
    g_temb = std::move(g_tb);
    return g_x;
}

}  // namespace

Tensor UNetDenoiser::forward(const std::vector<double>& params, const Tensor& f_lr_up,
                             const Tensor& f_t, int t, Cache* cache) const {
    if (params.size() != layout_.total) throw std::invalid_argument("forward: parameter size mismatch");
    if (f_t.c != 1 || f_lr_up.c != 1) throw std::invalid_argument("forward: inputs must be 1-channel");
    if (!f_lr_up.same_shape(f_t))
        throw std::invalid_argument("forward: conditioning shape does not match f_t");
    int div = desc_.spatial_divisor();
    if (f_t.h % div != 0 || f_t.w % div != 0)
        throw std::invalid_argument("forward: spatial size must be divisible by 2^levels");
    if (!all_finite(f_t.data) || !all_finite(f_lr_up.data))
        throw std::invalid_argument("forward: non-finite input");
    if (t < 1) throw std::invalid_argument("forward: t must be >= 1");

    Cache local;
    Cache& c = cache ? *cache : local;
    int td = desc_.time_dim;
    const double* p = params.data();
    auto at = [&](const std::string& n) { return p + layout_.find(n).offset; };

    c.input = Tensor(2, f_t.h, f_t.w);
    std::copy(f_t.data.begin(), f_t.data.end(), c.input.data.begin());
    std::copy(f_lr_up.data.begin(), f_lr_up.data.end(), c.input.data.begin() + f_t.size());

    c.temb0 = nn::time_embed(t, td);
    c.pre1 = nn::linear_fwd(c.temb0, at("time_mlp.w1"), at("time_mlp.b1"), td, td);
    c.temb_act1 = silu_vec(c.pre1);
    c.temb = nn::linear_fwd(c.temb_act1, at("time_mlp.w2"), at("time_mlp.b2"), td, td);

    Tensor h = nn::conv2d_fwd(c.input, at("stem.w"), at("stem.b"), {2, channels_at(0), 3});

    c.enc.resize(desc_.levels);
    c.down_in.resize(desc_.levels);
    c.up_in.resize(desc_.levels);
    c.dec.resize(desc_.levels);
    std::vector<Tensor> skips(desc_.levels);
    for (int l = 0; l < desc_.levels; ++l) {
        ResBlockSpec rb{"enc" + std::to_string(l) + ".", channels_at(l), channels_at(l), td};
        h = resblock_fwd(layout_, params, rb, h, c.temb, c.enc[l]);
        skips[l] = h;
        c.down_in[l] = nn::avgpool2_fwd(h);
        h = nn::conv2d_fwd(c.down_in[l], at("down" + std::to_string(l) + ".w"),
                           at("down" + std::to_string(l) + ".b"),
                           {channels_at(l), channels_at(l + 1), 1});
    }
    {
        ResBlockSpec rb{"mid.", channels_at(desc_.levels), channels_at(desc_.levels), td};
        h = resblock_fwd(layout_, params, rb, h, c.temb, c.mid);
    }
    for (int l = desc_.levels - 1; l >= 0; --l) {
        c.up_in[l] = nn::upsample2_fwd(h);
        Tensor v = nn::conv2d_fwd(c.up_in[l], at("up" + std::to_string(l) + ".w"),
                                  at("up" + std::to_string(l) + ".b"),
                                  {channels_at(l + 1), channels_at(l), 1});
        Tensor cat(2 * channels_at(l), v.h, v.w);
        std::copy(v.data.begin(), v.data.end(), cat.data.begin());
        std::copy(skips[l].data.begin(), skips[l].data.end(), cat.data.begin() + v.size());
        ResBlockSpec rb{"dec" + std::to_string(l) + ".", 2 * channels_at(l), channels_at(l), td};
        h = resblock_fwd(layout_, params, rb, cat, c.temb, c.dec[l]);
    }
    c.out_in = h;
    Tensor out = nn::conv2d_fwd(h, at("out.w"), at("out.b"), {channels_at(0), 1, 3});
    if (!all_finite(out.data)) throw TrainingFault("forward: non-finite activations");
    return out;
}

void UNetDenoiser::backward(const std::vector<double>& params, const Cache& c,
                            const Tensor& grad_out, std::vector<double>& grads) const {
    if (grads.size() != layout_.total) grads.assign(layout_.total, 0.0);
    int td = desc_.time_dim;
    const double* p = params.data();
    auto at = [&](const std::string& n) { return p + layout_.find(n).offset; };
    auto gat = [&](const std::string& n) { return grads.data() + layout_.find(n).offset; };

    std::vector<double> g_temb_total(td, 0.0);
    auto finish_tproj = [&](const std::string& prefix, int cout, const std::vector<double>& g_tb) {
        // dense layer temb -> per-channel bias
        std::vector<double> g_in;
        nn::linear_bwd(c.temb, at(prefix + "tproj.w"), td, cout, g_tb, g_in,
                       gat(prefix + "tproj.w"), gat(prefix + "tproj.b"));
        for (int i = 0; i < td; ++i) g_temb_total[i] += g_in[i];
    };

    Tensor g_h;
    nn::conv2d_bwd(c.out_in, at("out.w"), {channels_at(0), 1, 3}, grad_out, g_h, gat("out.w"),
                   gat("out.b"));

    std::vector<Tensor> g_skips(desc_.levels);
    for (int l = 0; l < desc_.levels; ++l) {
        ResBlockSpec rb{"dec" + std::to_string(l) + ".", 2 * channels_at(l), channels_at(l), td};
        std::vector<double> g_tb;
        Tensor g_cat = resblock_bwd(layout_, params, rb, c.dec[l], g_h, grads, g_tb);
        finish_tproj(rb.prefix, rb.cout, g_tb);
        int cl = channels_at(l);
        Tensor g_v(cl, g_cat.h, g_cat.w);
        g_skips[l] = Tensor(cl, g_cat.h, g_cat.w);
        std::copy(g_cat.data.begin(), g_cat.data.begin() + g_v.size(), g_v.data.begin());
        std::copy(g_cat.data.begin() + g_v.size(), g_cat.data.end(), g_skips[l].data.begin());
        Tensor g_u;
        nn::conv2d_bwd(c.up_in[l], at("up" + std::to_string(l) + ".w"),
                       {channels_at(l + 1), cl, 1}, g_v, g_u, gat("up" + std::to_string(l) + ".w"),
                       gat("up" + std::to_string(l) + ".b"));
        nn::upsample2_bwd(g_u, g_h);
    }
    {
        ResBlockSpec rb{"mid.", channels_at(desc_.levels), channels_at(desc_.levels), td};
        std::vector<double> g_tb;
        g_h = resblock_bwd(layout_, params, rb, c.mid, g_h, grads, g_tb);
        finish_tproj(rb.prefix, rb.cout, g_tb);
    }
    for (int l = desc_.levels - 1; l >= 0; --l) {
        Tensor g_p;
        nn::conv2d_bwd(c.down_in[l], at("down" + std::to_string(l) + ".w"),
                       {channels_at(l), channels_at(l + 1), 1}, g_h, g_p,
                       gat("down" + std::to_string(l) + ".w"), gat("down" + std::to_string(l) + ".b"));
        Tensor g_e;
        nn::avgpool2_bwd(g_p, g_e);
        for (size_t i = 0; i < g_e.size(); ++i) g_e.data[i] += g_skips[l].data[i];
        ResBlockSpec rb{"enc" + std::to_string(l) + ".", channels_at(l), channels_at(l), td};
        std::vector<double> g_tb;
        g_h = resblock_bwd(layout_, params, rb, c.enc[l], g_e, grads, g_tb);
        finish_tproj(rb.prefix, rb.cout, g_tb);
    }
    {
        Tensor g_in;
        nn::conv2d_bwd(c.input, at("stem.w"), {2, channels_at(0), 3}, g_h, g_in, gat("stem.w"),
                       gat("stem.b"));
    }
    // time MLP
    {
        std::vector<double> g_act1;
        nn::linear_bwd(c.temb_act1, at("time_mlp.w2"), td, td, g_temb_total, g_act1,
                       gat("time_mlp.w2"), gat("time_mlp.b2"));
        std::vector<double> g_pre1 = silu_vec_bwd(c.pre1, g_act1);
        std::vector<double> g_temb0;
        nn::linear_bwd(c.temb0, at("time_mlp.w1"), td, td, g_pre1, g_temb0, gat("time_mlp.w1"),
                       gat("time_mlp.b1"));
    }
}

void Batch::validate() const {
    if (f0.size() != f_lr.size()) throw std::invalid_argument("Batch: unpaired items");
    if (factor < 1) throw std::invalid_argument("Batch: factor must be >= 1");
    for (size_t i = 0; i < f0.size(); ++i) {
        if (f0[i].c != 1 || f_lr[i].c != 1) throw std::invalid_argument("Batch: tensors must be 1-channel");
        if (f_lr[i].h * factor != f0[i].h || f_lr[i].w * factor != f0[i].w)
            throw std::invalid_argument("Batch: LR/HR sizes inconsistent with factor");
        for (double v : f0[i].data)
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("Batch: values outside [0,1]");
    }
}

LossDraws sample_draws(const Batch& batch, const Schedule& s, Rng& rng) {
    LossDraws d;
    for (const Tensor& f0 : batch.f0) {
        d.ts.push_back(static_cast<int>(rng.uniform_int(1, s.T)));
        Tensor eps(1, f0.h, f0.w);
        for (double& v : eps.data) v = rng.normal();
        d.eps.push_back(std::move(eps));
    }
    return d;
}

static double loss_impl(const UNetDenoiser& net, const DenoiserParams& params, const Batch& batch,
                        const Schedule& s, const LossDraws& draws, std::vector<double>* grads) {
    batch.validate();
    if (draws.ts.size() != batch.f0.size()) throw std::invalid_argument("loss: draws/batch size mismatch");
    if (grads) grads->assign(params.values.size(), 0.0);
    size_t B = batch.f0.size();
    if (B == 0) throw std::invalid_argument("loss: empty batch");
    double total = 0.0;
    size_t npix = batch.f0[0].size();
    double denom = static_cast<double>(B) * static_cast<double>(npix);
    for (size_t i = 0; i < B; ++i) {
        Tensor cond = nn::bicubic_upsample(batch.f_lr[i], batch.factor);
        Tensor f_t = q_sample(batch.f0[i], draws.ts[i], draws.eps[i], s);
        UNetDenoiser::Cache cache;
        Tensor eps_hat = net.forward(params.values, cond, f_t, draws.ts[i], grads ? &cache : nullptr);
        Tensor g(1, eps_hat.h, eps_hat.w);
        for (size_t k = 0; k < eps_hat.size(); ++k) {
            double r = draws.eps[i].data[k] - eps_hat.data[k];
            total += r * r;
            g.data[k] = -2.0 * r / denom;
        }
        if (grads) net.backward(params.values, cache, g, *grads);
    }
    return total / denom;
}

double denoiser_loss(const UNetDenoiser& net, const DenoiserParams& params, const Batch& batch,
                     const Schedule& s, const LossDraws& draws) {
    return loss_impl(net, params, batch, s, draws, nullptr);
}

double denoiser_loss_grad(const UNetDenoiser& net, const DenoiserParams& params, const Batch& batch,
                          const Schedule& s, const LossDraws& draws, std::vector<double>& grads) {
    double l = loss_impl(net, params, batch, s, draws, &grads);
    if (!all_finite(grads)) throw TrainingFault("denoiser_loss_grad: non-finite gradient");
    return l;
}

TrainState make_train_state(const DenoiserParams& init, const OptimizerConfig& opt) {
    TrainState st;
    st.params = init;
    st.ema = init.values;
    st.m.assign(init.values.size(), 0.0);
    st.v.assign(init.values.size(), 0.0);
    st.step = 0;
    st.opt = opt;
    return st;
}

void adam_step(TrainState& state, const std::vector<double>& grads) {
    if (grads.size() != state.params.values.size())
        throw std::invalid_argument("adam_step: gradient size mismatch");
    const OptimizerConfig& o = state.opt;
    state.step += 1;
    double b1t = 1.0 - std::pow(o.adam_beta1, static_cast<double>(state.step));
    double b2t = 1.0 - std::pow(o.adam_beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < grads.size(); ++i) {
        state.m[i] = o.adam_beta1 * state.m[i] + (1.0 - o.adam_beta1) * grads[i];
        state.v[i] = o.adam_beta2 * state.v[i] + (1.0 - o.adam_beta2) * grads[i] * grads[i];
        double mhat = state.m[i] / b1t;
        double vhat = state.v[i] / b2t;
        state.params.values[i] -= o.lr * mhat / (std::sqrt(vhat) + o.adam_eps);
    }
}

void ema_update(TrainState& state) {
    if (state.step < state.opt.ema_start) {
        state.ema = state.params.values;
        return;
    }
    double d = state.opt.ema_decay;
    for (size_t i = 0; i < state.ema.size(); ++i)
        state.ema[i] = d * state.ema[i] + (1.0 - d) * state.params.values[i];
}

TrainResult train(const UNetDenoiser& net, const DenoiserParams& init,
                  const std::vector<TrainItem>& train_items, const Schedule& s,
                  const TrainConfig& cfg) {
    if (train_items.empty()) throw std::invalid_argument("train: empty training split");
    TrainResult res;
    res.state = make_train_state(init, cfg.opt);
    Rng rng(cfg.seed);
    namespace fs = std::filesystem;
    if (!cfg.checkpoint_dir.empty()) fs::create_directories(cfg.checkpoint_dir);
    auto t_start = std::chrono::steady_clock::now();
    for (int64_t step = 1; step <= cfg.opt.steps; ++step) {
        Batch batch;
        batch.factor = cfg.factor;
        int bs = std::min<int64_t>(cfg.opt.batch_size, static_cast<int64_t>(train_items.size()));
        for (int b = 0; b < bs; ++b) {
            size_t idx = static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(train_items.size()) - 1));
            batch.f0.push_back(train_items[idx].f0);
            batch.f_lr.push_back(train_items[idx].f_lr);
        }
        LossDraws draws = sample_draws(batch, s, rng);
        std::vector<double> grads;
        double loss;
        try {
            loss = denoiser_loss_grad(net, res.state.params, batch, s, draws, grads);
            if (!std::isfinite(loss)) throw TrainingFault("non-finite loss");
        } catch (const TrainingFault&) {
            if (!cfg.checkpoint_dir.empty())
                save_checkpoint(cfg.checkpoint_dir / "last_good.ckpt", res.state, s, 0);
            throw TrainingFault("train: non-finite loss at step " + std::to_string(step));
        }
        adam_step(res.state, grads);
        ema_update(res.state);
        double wall = cfg.serial_deterministic
                          ? 0.0
                          : std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                                .count();
        LossRecord rec{step, loss, wall};
        res.loss_curve.push_back(rec);
        if (cfg.on_step) cfg.on_step(rec);
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && !cfg.checkpoint_dir.empty())
            save_checkpoint(cfg.checkpoint_dir / ("step_" + std::to_string(step) + ".ckpt"),
                            res.state, s, 0);
    }
    return res;
}

static constexpr char kCkptMagic[8] = {'E', 'C', 'F', 'C', 'K', 'P', 'T', '1'};

static void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

static std::vector<double> read_doubles(std::ifstream& in, size_t n) {
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
    return v;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const Schedule& s,
                     uint64_t config_hash) {
    json hdr;
    hdr["base_channels"] = state.params.desc.base_channels;
    hdr["levels"] = state.params.desc.levels;
    hdr["time_dim"] = state.params.desc.time_dim;
    hdr["T"] = s.T;
    hdr["beta_start"] = s.beta_start;
    hdr["beta_end"] = s.beta_end;
    hdr["step"] = state.step;
    hdr["param_count"] = state.params.values.size();
    hdr["config_hash"] = config_hash;
    hdr["lr"] = state.opt.lr;
    hdr["steps"] = state.opt.steps;
    hdr["batch_size"] = state.opt.batch_size;
    hdr["ema_decay"] = state.opt.ema_decay;
    hdr["ema_start"] = state.opt.ema_start;
    std::string htxt = hdr.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    out.write(kCkptMagic, 8);
    uint64_t len = htxt.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(htxt.data(), static_cast<std::streamsize>(len));
    write_doubles(out, state.params.values);
    write_doubles(out, state.ema);
    write_doubles(out, state.m);
    write_doubles(out, state.v);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    std::string htxt(len, '\0');
    in.read(htxt.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path.string());
    json hdr = json::parse(htxt);
    Checkpoint ck;
    ck.state.params.desc.base_channels = hdr.at("base_channels").get<int>();
    ck.state.params.desc.levels = hdr.at("levels").get<int>();
    ck.state.params.desc.time_dim = hdr.at("time_dim").get<int>();
    ck.schedule_T = hdr.at("T").get<int>();
    ck.beta_start = hdr.at("beta_start").get<double>();
    ck.beta_end = hdr.at("beta_end").get<double>();
    ck.state.step = hdr.at("step").get<int64_t>();
    ck.config_hash = hdr.at("config_hash").get<uint64_t>();
    ck.state.opt.lr = hdr.at("lr").get<double>();
    ck.state.opt.steps = hdr.at("steps").get<int64_t>();
    ck.state.opt.batch_size = hdr.at("batch_size").get<int>();
    ck.state.opt.ema_decay = hdr.at("ema_decay").get<double>();
    ck.state.opt.ema_start = hdr.at("ema_start").get<int64_t>();
    size_t n = hdr.at("param_count").get<size_t>();
    UNetDenoiser net(ck.state.params.desc);
    if (net.param_count() != n)
        throw std::runtime_error("load_checkpoint: parameter count disagrees with descriptor");
    try {
        ck.state.params.values = read_doubles(in, n);
        ck.state.ema = read_doubles(in, n);
        ck.state.m = read_doubles(in, n);
        ck.state.v = read_doubles(in, n);
    } catch (...) {
        throw std::runtime_error("load_checkpoint: truncated tensor data in " + path.string());
    }
    return ck;
}

Checkpoint load_checkpoint_checked(const std::filesystem::path& path,
                                   const DenoiserDescriptor& expect_desc,
                                   const Schedule& expect_s) {
    Checkpoint ck = load_checkpoint(path);
    if (!(ck.state.params.desc == expect_desc))
        throw std::runtime_error("load_checkpoint: descriptor mismatch for " + path.string());
    if (ck.schedule_T != expect_s.T || ck.beta_start != expect_s.beta_start ||
        ck.beta_end != expect_s.beta_end)
        throw std::runtime_error("load_checkpoint: schedule mismatch for " + path.string());
    return ck;
}

}  // namespace envcf
