#include "envcf/metrics.hpp"

#include <cmath>
#include <sstream>

#include "envcf/grid.hpp"

namespace envcf {

double mse(const Raster& a, const Raster& b) {
    if (!a.same_shape(b)) throw ShapeError("mse: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double psnr(const Raster& x_hat, const Raster& x, double peak) {
    double m = mse(x_hat, x);
    if (m == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / m));
}

double ssim(const Raster& x_hat, const Raster& x, const SsimConfig& cfg) {
    if (!x_hat.same_shape(x)) throw ShapeError("ssim: shape mismatch");
    int win = cfg.window;
    if (x.h < win || x.w < win) throw std::invalid_argument("ssim: image smaller than window");
    std::vector<double> kernel(win);
    int half = win / 2;
    double ksum = 0.0;
    for (int i = 0; i < win; ++i) {
        double d = i - half;
        kernel[i] = std::exp(-d * d / (2.0 * cfg.sigma * cfg.sigma));
        ksum += kernel[i];
    }
    for (double& k : kernel) k /= ksum;

    double c1 = (cfg.k1 * cfg.peak) * (cfg.k1 * cfg.peak);
    double c2 = (cfg.k2 * cfg.peak) * (cfg.k2 * cfg.peak);

    // separable Gaussian filtering of the five moment images, valid region only
    auto filter = [&](auto&& value_at) {
        // returns filtered image over valid region (h-win+1, w-win+1)
        int vh = x.h - win + 1, vw = x.w - win + 1;
        Raster tmp(x.h, vw), out(vh, vw);
        for (int i = 0; i < x.h; ++i)
            for (int j = 0; j < vw; ++j) {
                double acc = 0.0;
                for (int k = 0; k < win; ++k) acc += kernel[k] * value_at(i, j + k);
                tmp.at(i, j) = acc;
            }
        for (int i = 0; i < vh; ++i)
            for (int j = 0; j < vw; ++j) {
                double acc = 0.0;
                for (int k = 0; k < win; ++k) acc += kernel[k] * tmp.at(i + k, j);
                out.at(i, j) = acc;
            }
        return out;
    };

    Raster mu1 = filter([&](int i, int j) { return x_hat.at(i, j); });
    Raster mu2 = filter([&](int i, int j) { return x.at(i, j); });
    Raster m11 = filter([&](int i, int j) { return x_hat.at(i, j) * x_hat.at(i, j); });
    Raster m22 = filter([&](int i, int j) { return x.at(i, j) * x.at(i, j); });
    Raster m12 = filter([&](int i, int j) { return x_hat.at(i, j) * x.at(i, j); });

    double total = 0.0;
    for (size_t i = 0; i < mu1.size(); ++i) {
        double u1 = mu1.data[i], u2 = mu2.data[i];
        double s11 = m11.data[i] - u1 * u1;
        double s22 = m22.data[i] - u2 * u2;
        double s12 = m12.data[i] - u1 * u2;
        total += ((2.0 * u1 * u2 + c1) * (2.0 * s12 + c2)) /
                 ((u1 * u1 + u2 * u2 + c1) * (s11 + s22 + c2));
    }
    return total / static_cast<double>(mu1.size());
}

double nmse(const Raster& x_hat, const Raster& x) {
    if (!x_hat.same_shape(x)) throw ShapeError("nmse: shape mismatch");
    double err = 0.0, ref = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double d = x_hat.data[i] - x.data[i];
        err += d * d;
        ref += x.data[i] * x.data[i];
    }
    if (ref == 0.0) throw std::invalid_argument("nmse: all-zero reference");
    return err / ref;
}

std::vector<MetricRow> evaluate(const std::vector<MethodOutputs>& methods,
                                const std::vector<Raster>& references) {
    std::vector<MetricRow> rows;
    for (const auto& m : methods) {
        if (m.outputs.size() != references.size())
            throw std::invalid_argument("evaluate: output/reference lists misaligned for " + m.method);
        MetricRow row;
        row.method = m.method;
        row.n_items = static_cast<int>(m.outputs.size());
        for (size_t i = 0; i < m.outputs.size(); ++i) {
            row.psnr_db += psnr(m.outputs[i], references[i]);
            row.ssim += ssim(m.outputs[i], references[i]);
            row.nmse += nmse(m.outputs[i], references[i]);
        }
        if (row.n_items > 0) {
            row.psnr_db /= row.n_items;
            row.ssim /= row.n_items;
            row.nmse /= row.n_items;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_report(const std::vector<MetricRow>& rows, uint64_t config_hash) {
    std::ostringstream out;
    out << "method\tpsnr_db\tssim\tnmse\tn_items\tconfig_hash\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.4f\t%.4f\t%.6f", r.psnr_db, r.ssim, r.nmse);
        out << r.method << "\t" << buf << "\t" << r.n_items << "\t" << std::hex << config_hash
            << std::dec;
        if (!r.note.empty()) out << "\t# " << r.note;
        out << "\n";
    }
    return out.str();
}

}  // namespace envcf
