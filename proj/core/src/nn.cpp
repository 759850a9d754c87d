#include "envcf/nn.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace envcf {
namespace nn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

size_t ParamLayout::add(const std::string& name, std::vector<int> shape) {
    Entry e;
    e.name = name;
    e.shape = std::move(shape);
    e.offset = total;
    e.count = 1;
    for (int d : e.shape) e.count *= static_cast<size_t>(d);
    total += e.count;
    entries.push_back(std::move(e));
    return entries.back().offset;
}

const ParamLayout::Entry& ParamLayout::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw std::invalid_argument("ParamLayout: no entry named " + name);
}

// im2col: (cin*k*k) x (h*w), row-major
static std::vector<double> im2col(const Tensor& x, int k) {
    int pad = (k - 1) / 2;
    int hw = x.h * x.w;
    std::vector<double> col(static_cast<size_t>(x.c) * k * k * hw, 0.0);
    size_t r = 0;
    for (int c = 0; c < x.c; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++r) {
                double* dst = col.data() + r * hw;
                int dy = ky - pad, dx = kx - pad;
                for (int y = 0; y < x.h; ++y) {
                    int sy = y + dy;
                    if (sy < 0 || sy >= x.h) continue;
                    int x0 = std::max(0, -dx), x1 = std::min(x.w, x.w - dx);
                    const double* src = &x.data[(static_cast<size_t>(c) * x.h + sy) * x.w];
                    for (int xx = x0; xx < x1; ++xx) dst[y * x.w + xx] = src[xx + dx];
                }
            }
        }
    }
    return col;
}

static void col2im_accum(const std::vector<double>& col, int cin, int k, Tensor& gx) {
    int pad = (k - 1) / 2;
    int hw = gx.h * gx.w;
    size_t r = 0;
    for (int c = 0; c < cin; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++r) {
                const double* src = col.data() + r * hw;
                int dy = ky - pad, dx = kx - pad;
                for (int y = 0; y < gx.h; ++y) {
                    int sy = y + dy;
                    if (sy < 0 || sy >= gx.h) continue;
                    int x0 = std::max(0, -dx), x1 = std::min(gx.w, gx.w - dx);
                    double* dst = &gx.data[(static_cast<size_t>(c) * gx.h + sy) * gx.w];
                    for (int xx = x0; xx < x1; ++xx) dst[xx + dx] += src[y * gx.w + xx];
                }
            }
        }
    }
}

Tensor conv2d_fwd(const Tensor& x, const double* w, const double* b, const ConvSpec& cs) {
    if (x.c != cs.cin) throw std::invalid_argument("conv2d: channel mismatch");
    int hw = x.h * x.w;
    int kk = cs.cin * cs.k * cs.k;
    std::vector<double> col = im2col(x, cs.k);
    Tensor y(cs.cout, x.h, x.w);
    MapRM ym(y.data.data(), cs.cout, hw);
    CMapRM wm(w, cs.cout, kk);
    CMapRM cm(col.data(), kk, hw);
    ym.noalias() = wm * cm;
    for (int c = 0; c < cs.cout; ++c) ym.row(c).array() += b[c];
    return y;
}

void conv2d_bwd(const Tensor& x, const double* w, const ConvSpec& cs, const Tensor& gy,
                Tensor& gx, double* gw, double* gb) {
    int hw = x.h * x.w;
    int kk = cs.cin * cs.k * cs.k;
    std::vector<double> col = im2col(x, cs.k);
    CMapRM gym(gy.data.data(), cs.cout, hw);
    CMapRM cm(col.data(), kk, hw);
    MapRM gwm(gw, cs.cout, kk);
    gwm.noalias() += gym * cm.transpose();
    for (int c = 0; c < cs.cout; ++c) gb[c] += gym.row(c).sum();

    std::vector<double> gcol(static_cast<size_t>(kk) * hw);
    MapRM gcm(gcol.data(), kk, hw);
    CMapRM wm(w, cs.cout, kk);
    gcm.noalias() = wm.transpose() * gym;
    gx = Tensor(cs.cin, x.h, x.w);
    col2im_accum(gcol, cs.cin, cs.k, gx);
}

int norm_groups(int c) {
    if (c % 4 == 0) return 4;
    if (c % 2 == 0) return 2;
    return 1;
}

static constexpr double kGnEps = 1e-5;

Tensor groupnorm_fwd(const Tensor& x, const double* gamma, const double* beta, int groups,
                     GroupNormCache& cache) {
    if (x.c % groups != 0) throw std::invalid_argument("groupnorm: groups must divide channels");
    int cpg = x.c / groups;
    size_t m = static_cast<size_t>(cpg) * x.h * x.w;
    cache.mean.assign(groups, 0.0);
    cache.invstd.assign(groups, 0.0);
    cache.xhat = Tensor(x.c, x.h, x.w);
    Tensor y(x.c, x.h, x.w);
    for (int g = 0; g < groups; ++g) {
        const double* xs = &x.data[static_cast<size_t>(g) * m];
        double mean = 0.0;
        for (size_t i = 0; i < m; ++i) mean += xs[i];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (size_t i = 0; i < m; ++i) {
            double d = xs[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(m);
        double invstd = 1.0 / std::sqrt(var + kGnEps);
        cache.mean[g] = mean;
        cache.invstd[g] = invstd;
        double* xh = &cache.xhat.data[static_cast<size_t>(g) * m];
        double* ys = &y.data[static_cast<size_t>(g) * m];
        size_t hw = static_cast<size_t>(x.h) * x.w;
        for (int cc = 0; cc < cpg; ++cc) {
            int ch = g * cpg + cc;
            for (size_t i = 0; i < hw; ++i) {
                double v = (xs[cc * hw + i] - mean) * invstd;
                xh[cc * hw + i] = v;
                ys[cc * hw + i] = gamma[ch] * v + beta[ch];
            }
        }
    }
    return y;
}

void groupnorm_bwd(const GroupNormCache& cache, const double* gamma, int groups, const Tensor& gy,
                   Tensor& gx, double* ggamma, double* gbeta) {
    const Tensor& xhat = cache.xhat;
    int cpg = xhat.c / groups;
    size_t hw = static_cast<size_t>(xhat.h) * xhat.w;
    size_t m = static_cast<size_t>(cpg) * hw;
    gx = Tensor(xhat.c, xhat.h, xhat.w);
    for (int g = 0; g < groups; ++g) {
        const double* xh = &xhat.data[static_cast<size_t>(g) * m];
        const double* gys = &gy.data[static_cast<size_t>(g) * m];
        double* gxs = &gx.data[static_cast<size_t>(g) * m];
        // gxhat = gy * gamma (per channel); reduce for the group terms
        double sum_gxh = 0.0, sum_gxh_xh = 0.0;
        for (int cc = 0; cc < cpg; ++cc) {
            int ch = g * cpg + cc;
            double gsum = 0.0, bsum = 0.0;
            for (size_t i = 0; i < hw; ++i) {
                double gyv = gys[cc * hw + i];
                double xhv = xh[cc * hw + i];
                gsum += gyv * xhv;
                bsum += gyv;
                double gxh = gyv * gamma[ch];
                sum_gxh += gxh;
                sum_gxh_xh += gxh * xhv;
            }
            ggamma[ch] += gsum;
            gbeta[ch] += bsum;
        }
        double invstd = cache.invstd[g];
        double md = static_cast<double>(m);
        for (int cc = 0; cc < cpg; ++cc) {
            int ch = g * cpg + cc;
            for (size_t i = 0; i < hw; ++i) {
                double gxh = gys[cc * hw + i] * gamma[ch];
                gxs[cc * hw + i] =
                    invstd * (gxh - sum_gxh / md - xh[cc * hw + i] * sum_gxh_xh / md);
            }
        }
    }
}

Tensor silu_fwd(const Tensor& x) {
    Tensor y(x.c, x.h, x.w);
    for (size_t i = 0; i < x.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x.data[i]));
        y.data[i] = x.data[i] * s;
    }
    return y;
}

void silu_bwd(const Tensor& x, const Tensor& gy, Tensor& gx) {
    gx = Tensor(x.c, x.h, x.w);
    for (size_t i = 0; i < x.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x.data[i]));
        gx.data[i] = gy.data[i] * s * (1.0 + x.data[i] * (1.0 - s));
    }
}

Tensor avgpool2_fwd(const Tensor& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0) throw std::invalid_argument("avgpool2: odd spatial size");
    Tensor y(x.c, x.h / 2, x.w / 2);
    for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < y.h; ++yy)
            for (int xx = 0; xx < y.w; ++xx)
                y.at(c, yy, xx) = 0.25 * (x.at(c, 2 * yy, 2 * xx) + x.at(c, 2 * yy, 2 * xx + 1) +
                                          x.at(c, 2 * yy + 1, 2 * xx) + x.at(c, 2 * yy + 1, 2 * xx + 1));
    return y;
}

void avgpool2_bwd(const Tensor& gy, Tensor& gx) {
    gx = Tensor(gy.c, gy.h * 2, gy.w * 2);
    for (int c = 0; c < gy.c; ++c)
        for (int yy = 0; yy < gy.h; ++yy)
            for (int xx = 0; xx < gy.w; ++xx) {
                double g = 0.25 * gy.at(c, yy, xx);
                gx.at(c, 2 * yy, 2 * xx) = g;
                gx.at(c, 2 * yy, 2 * xx + 1) = g;
                gx.at(c, 2 * yy + 1, 2 * xx) = g;
                gx.at(c, 2 * yy + 1, 2 * xx + 1) = g;
            }
}

Tensor upsample2_fwd(const Tensor& x) {
    Tensor y(x.c, x.h * 2, x.w * 2);
    for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < y.h; ++yy)
            for (int xx = 0; xx < y.w; ++xx) y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
    return y;
}

void upsample2_bwd(const Tensor& gy, Tensor& gx) {
    gx = Tensor(gy.c, gy.h / 2, gy.w / 2);
    for (int c = 0; c < gy.c; ++c)
        for (int yy = 0; yy < gy.h; ++yy)
            for (int xx = 0; xx < gy.w; ++xx) gx.at(c, yy / 2, xx / 2) += gy.at(c, yy, xx);
}

std::vector<double> linear_fwd(const std::vector<double>& x, const double* w, const double* b,
                               int in_dim, int out_dim) {
    std::vector<double> y(out_dim);
    for (int o = 0; o < out_dim; ++o) {
        double acc = b[o];
        const double* wr = w + static_cast<size_t>(o) * in_dim;
        for (int i = 0; i < in_dim; ++i) acc += wr[i] * x[i];
        y[o] = acc;
    }
    return y;
}

void linear_bwd(const std::vector<double>& x, const double* w, int in_dim, int out_dim,
                const std::vector<double>& gy, std::vector<double>& gx, double* gw, double* gb) {
    gx.assign(in_dim, 0.0);
    for (int o = 0; o < out_dim; ++o) {
        double g = gy[o];
        gb[o] += g;
        const double* wr = w + static_cast<size_t>(o) * in_dim;
        double* gwr = gw + static_cast<size_t>(o) * in_dim;
        for (int i = 0; i < in_dim; ++i) {
            gwr[i] += g * x[i];
            gx[i] += g * wr[i];
        }
    }
}

std::vector<double> time_embed(int t, int dim) {
    if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("time_embed: dim must be even and positive");
    int half = dim / 2;
    std::vector<double> e(dim);
    for (int k = 0; k < half; ++k) {
        double omega = half > 1 ? std::pow(10.0, -4.0 * k / (half - 1)) : 1.0;
        e[k] = std::sin(t * omega);
        e[half + k] = std::cos(t * omega);
    }
    return e;
}

static double catmull_rom(double p0, double p1, double p2, double p3, double u) {
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
}

Tensor bicubic_upsample(const Tensor& x, int factor) {
    if (factor < 1) throw std::invalid_argument("bicubic_upsample: factor must be >= 1");
    if (factor == 1) return x;
    Tensor y(x.c, x.h * factor, x.w * factor);
    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    for (int c = 0; c < x.c; ++c) {
        for (int oy = 0; oy < y.h; ++oy) {
            double sy = (oy + 0.5) / factor - 0.5;
            int iy = static_cast<int>(std::floor(sy));
            double uy = sy - iy;
            for (int ox = 0; ox < y.w; ++ox) {
                double sx = (ox + 0.5) / factor - 0.5;
                int ix = static_cast<int>(std::floor(sx));
                double ux = sx - ix;
                double rows[4];
                for (int r = 0; r < 4; ++r) {
                    int yy = clampi(iy - 1 + r, x.h);
                    rows[r] = catmull_rom(x.at(c, yy, clampi(ix - 1, x.w)),
                                          x.at(c, yy, clampi(ix, x.w)),
                                          x.at(c, yy, clampi(ix + 1, x.w)),
                                          x.at(c, yy, clampi(ix + 2, x.w)), ux);
                }
                y.at(c, oy, ox) = catmull_rom(rows[0], rows[1], rows[2], rows[3], uy);
            }
        }
    }
    return y;
}

}  // namespace nn
}  // namespace envcf
