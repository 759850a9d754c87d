#include "envcf/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace envcf {

static EnvCF make_hr_shell(const EnvCF& f_lr, int factor) {
    if (factor < 1) throw std::invalid_argument("upsample: factor must be >= 1");
    EnvCF out;
    out.grid = make_grid(f_lr.grid.area_side_m, f_lr.grid.resolution * factor);
    out.role_tag = Role::HR;
    out.pixels = Raster(out.grid.resolution, out.grid.resolution);
    return out;
}

EnvCF nearest_upsample(const EnvCF& f_lr, int factor) {
    EnvCF out = make_hr_shell(f_lr, factor);
    int hr = out.grid.resolution;
    for (int i = 0; i < hr; ++i)
        for (int j = 0; j < hr; ++j) out.pixels.at(i, j) = f_lr.pixels.at(i / factor, j / factor);
    return out;
}

EnvCF bilinear_upsample(const EnvCF& f_lr, int factor) {
    EnvCF out = make_hr_shell(f_lr, factor);
    int hr = out.grid.resolution;
    int lr = f_lr.grid.resolution;
    auto clampi = [lr](int v) { return std::clamp(v, 0, lr - 1); };
    for (int i = 0; i < hr; ++i) {
        double sy = (i + 0.5) / factor - 0.5;
        int iy = static_cast<int>(std::floor(sy));
        double uy = std::clamp(sy - iy, 0.0, 1.0);
        for (int j = 0; j < hr; ++j) {
            double sx = (j + 0.5) / factor - 0.5;
            int ix = static_cast<int>(std::floor(sx));
            double ux = std::clamp(sx - ix, 0.0, 1.0);
            double v00 = f_lr.pixels.at(clampi(iy), clampi(ix));
            double v01 = f_lr.pixels.at(clampi(iy), clampi(ix + 1));
            double v10 = f_lr.pixels.at(clampi(iy + 1), clampi(ix));
            double v11 = f_lr.pixels.at(clampi(iy + 1), clampi(ix + 1));
            out.pixels.at(i, j) =
                (1 - uy) * ((1 - ux) * v00 + ux * v01) + uy * ((1 - ux) * v10 + ux * v11);
        }
    }
    return out;
}

namespace {

struct SampleSet {
    std::vector<double> x, y, v;  // meters, meters, value
};

SampleSet collect_samples(const EnvCF& f_lr, int factor) {
    double hr_cell = f_lr.grid.area_side_m / (f_lr.grid.resolution * factor);
    SampleSet s;
    int lr = f_lr.grid.resolution;
    s.x.reserve(static_cast<size_t>(lr) * lr);
    for (int i = 0; i < lr; ++i)
        for (int j = 0; j < lr; ++j) {
            s.y.push_back(i * factor * hr_cell);
            s.x.push_back(j * factor * hr_cell);
            s.v.push_back(f_lr.pixels.at(i, j));
        }
    return s;
}

double exp_variogram(double h, double sill, double range_m, double nugget) {
    if (h == 0.0) return 0.0;
    return nugget + sill * (1.0 - std::exp(-h / range_m));
}

// Binned least squares over empirical semivariances, grid search on range.
void fit_variogram(const SampleSet& s, VariogramConfig& cfg) {
    size_t n = s.v.size();
    size_t stride = n > 1024 ? n / 1024 + 1 : 1;
    std::vector<size_t> idx;
    for (size_t i = 0; i < n; i += stride) idx.push_back(i);
    double max_d = 0.0;
    for (size_t a = 0; a < idx.size(); ++a)
        for (size_t b = a + 1; b < idx.size(); ++b) {
            double d = std::hypot(s.x[idx[a]] - s.x[idx[b]], s.y[idx[a]] - s.y[idx[b]]);
            max_d = std::max(max_d, d);
        }
    if (max_d <= 0.0) {
        cfg.sill = 0.0;
        return;
    }
    int nb = std::max(2, cfg.n_bins);
    double cutoff = max_d * 0.6;
    std::vector<double> gsum(nb, 0.0), hsum(nb, 0.0);
    std::vector<int> cnt(nb, 0);
    for (size_t a = 0; a < idx.size(); ++a)
        for (size_t b = a + 1; b < idx.size(); ++b) {
            double d = std::hypot(s.x[idx[a]] - s.x[idx[b]], s.y[idx[a]] - s.y[idx[b]]);
            if (d > cutoff || d == 0.0) continue;
            int bin = std::min(nb - 1, static_cast<int>(d / cutoff * nb));
            double dv = s.v[idx[a]] - s.v[idx[b]];
            gsum[bin] += 0.5 * dv * dv;
            hsum[bin] += d;
            cnt[bin]++;
        }
    std::vector<double> gh, hh;
    for (int b = 0; b < nb; ++b)
        if (cnt[b] > 0) {
            gh.push_back(gsum[b] / cnt[b]);
            hh.push_back(hsum[b] / cnt[b]);
        }
    if (gh.empty()) return;
    double best_res = std::numeric_limits<double>::infinity();
    for (double frac : {0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0}) {
        double a = cutoff * frac;
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < gh.size(); ++i) {
            double basis = 1.0 - std::exp(-hh[i] / a);
            num += (gh[i] - cfg.nugget) * basis;
            den += basis * basis;
        }
        double c = den > 0.0 ? std::max(0.0, num / den) : 0.0;
        double res = 0.0;
        for (size_t i = 0; i < gh.size(); ++i) {
            double r = gh[i] - exp_variogram(hh[i], c, a, cfg.nugget);
            res += r * r;
        }
        if (res < best_res) {
            best_res = res;
            cfg.sill = c;
            cfg.range_m = a;
        }
    }
}

}  // namespace

EnvCF kriging_upsample(const EnvCF& f_lr, int factor, const VariogramConfig& cfg_in,
                       KrigingDiagnostics* diag) {
    SampleSet s = collect_samples(f_lr, factor);
    size_t n = s.v.size();
    if (n < 2) throw std::invalid_argument("kriging_upsample: need at least 2 samples");
    VariogramConfig cfg = cfg_in;
    if (cfg.fit) fit_variogram(s, cfg);
    if (cfg.sill <= 0.0) cfg.sill = 1e-12;  // constant field degenerates the fit

    EnvCF out = make_hr_shell(f_lr, factor);
    int hr = out.grid.resolution;
    double hr_cell = out.grid.cell_size_m;

    double nugget = cfg.nugget;
    int retries = 0;
    Eigen::MatrixXd kinv;
    while (true) {
        Eigen::MatrixXd K(n + 1, n + 1);
        for (size_t a = 0; a < n; ++a) {
            K(a, a) = 0.0;
            for (size_t b = a + 1; b < n; ++b) {
                double d = std::hypot(s.x[a] - s.x[b], s.y[a] - s.y[b]);
                double g = exp_variogram(d, cfg.sill, cfg.range_m, nugget);
                K(a, b) = g;
                K(b, a) = g;
            }
            K(a, n) = 1.0;
            K(n, a) = 1.0;
        }
        K(n, n) = 0.0;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
        kinv = lu.inverse();
        if (kinv.allFinite()) break;
        // singular system: bump the nugget and retry
        nugget = nugget > 0.0 ? nugget * 10.0 : 1e-8;
        if (++retries > 6) throw std::runtime_error("kriging_upsample: system remained singular");
    }
    if (diag) {
        diag->sill = cfg.sill;
        diag->range_m = cfg.range_m;
        diag->nugget = nugget;
        diag->retries = retries;
    }

    Eigen::VectorXd rhs(n + 1), w(n + 1);
    for (int i = 0; i < hr; ++i) {
        for (int j = 0; j < hr; ++j) {
            double px = j * hr_cell, py = i * hr_cell;
            for (size_t a = 0; a < n; ++a) {
                double d = std::hypot(s.x[a] - px, s.y[a] - py);
                rhs(static_cast<Eigen::Index>(a)) = exp_variogram(d, cfg.sill, cfg.range_m, nugget);
            }
            rhs(static_cast<Eigen::Index>(n)) = 1.0;
            w.noalias() = kinv * rhs;
            double pred = 0.0;
            for (size_t a = 0; a < n; ++a) pred += w(static_cast<Eigen::Index>(a)) * s.v[a];
            out.pixels.at(i, j) = pred;
        }
    }
    return out;
}

static double rbf_phi(RbfKernel k, double r, double c) {
    switch (k) {
        case RbfKernel::Multiquadric:
            return std::sqrt(r * r + c * c);
        case RbfKernel::Gaussian:
            return std::exp(-(r * r) / (c * c));
        case RbfKernel::ThinPlate:
            return r > 0.0 ? r * r * std::log(r) : 0.0;
    }
    return 0.0;
}

EnvCF rbf_upsample(const EnvCF& f_lr, int factor, const RbfConfig& cfg, RbfDiagnostics* diag) {
    SampleSet s = collect_samples(f_lr, factor);
    size_t n = s.v.size();
    if (n == 0) throw std::invalid_argument("rbf_upsample: no samples");
    EnvCF out = make_hr_shell(f_lr, factor);
    int hr = out.grid.resolution;
    double hr_cell = out.grid.cell_size_m;

    if (n == 1) {
        for (double& v : out.pixels.data) v = s.v[0];
        return out;
    }

    Eigen::MatrixXd phi(n, n);
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b) {
            double r = std::hypot(s.x[a] - s.x[b], s.y[a] - s.y[b]);
            phi(a, b) = rbf_phi(cfg.kernel, r, cfg.shape_m);
        }
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(s.v.data(), static_cast<Eigen::Index>(n));

    double lambda = cfg.regularization;
    int steps = 0;
    Eigen::VectorXd w;
    while (true) {
        Eigen::MatrixXd A = phi;
        if (lambda > 0.0) A.diagonal().array() += lambda;
        w = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(yv);
        double resid = (A * w - yv).cwiseAbs().maxCoeff();
        if (w.allFinite() && resid < 1e-6 * std::max(1.0, yv.cwiseAbs().maxCoeff())) break;
        lambda = lambda > 0.0 ? lambda * 100.0 : 1e-12;
        if (++steps > 8) throw std::runtime_error("rbf_upsample: system remained ill-conditioned");
    }
    if (diag) {
        diag->regularization_used = lambda;
        diag->ladder_steps = steps;
    }

    for (int i = 0; i < hr; ++i)
        for (int j = 0; j < hr; ++j) {
            double px = j * hr_cell, py = i * hr_cell;
            double acc = 0.0;
            for (size_t a = 0; a < n; ++a) {
                double r = std::hypot(s.x[a] - px, s.y[a] - py);
                acc += w(static_cast<Eigen::Index>(a)) * rbf_phi(cfg.kernel, r, cfg.shape_m);
            }
            out.pixels.at(i, j) = acc;
        }
    return out;
}

}  // namespace envcf
