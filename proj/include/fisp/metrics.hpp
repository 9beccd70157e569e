#pragma once

#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>

#include "fisp/losses.hpp"
#include "fisp/tensor.hpp"

namespace fisp::metric {

inline Tensor quantize8(const Tensor& t) {
    Tensor out = t;
    for (auto& v : out.v) v = std::round(clamp01(v) * 255.0) / 255.0;
    return out;
}

inline double mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v[i] - b.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.v.size());
}

inline double psnr(const Tensor& a, const Tensor& b, double peak = 1.0) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

namespace detail {

// Separable circular filtering on a plane, matching the loss-side filter.
inline void filter_plane_circular(const double* src, double* dst, std::int64_t h, std::int64_t w,
                                  const std::vector<double>& taps) {
    const int r = static_cast<int>(taps.size() / 2);
    std::vector<double> tmp(static_cast<std::size_t>(h * w));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                std::int64_t xi = (x + k) % w;
                if (xi < 0) xi += w;
                acc += taps[static_cast<std::size_t>(k + r)] * src[y * w + xi];
            }
            tmp[static_cast<std::size_t>(y * w + x)] = acc;
        }
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                std::int64_t yi = (y + k) % h;
                if (yi < 0) yi += h;
                acc += taps[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(yi * w + x)];
            }
            dst[y * w + x] = acc;
        }
}

struct SsimSums {
    double ssim = 0.0;  // mean SSIM map value
    double cs = 0.0;    // mean contrast-structure term
};

inline SsimSums ssim_sums(const Tensor& a, const Tensor& b) {
    static const std::vector<double> taps = loss::gaussian_taps(5, 1.5);
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const std::int64_t m = a.h * a.w;
    std::vector<double> mu_a(static_cast<std::size_t>(m)), mu_b(mu_a.size()), saa(mu_a.size()),
        sbb(mu_a.size()), sab(mu_a.size()), prod(mu_a.size());
    SsimSums out;
    std::int64_t planes = 0;
    for (std::int64_t n = 0; n < a.n; ++n)
        for (std::int64_t c = 0; c < a.c; ++c) {
            const double* pa = a.plane(n, c);
            const double* pb = b.plane(n, c);
            filter_plane_circular(pa, mu_a.data(), a.h, a.w, taps);
            filter_plane_circular(pb, mu_b.data(), a.h, a.w, taps);
            for (std::int64_t i = 0; i < m; ++i) prod[static_cast<std::size_t>(i)] = pa[i] * pa[i];
            filter_plane_circular(prod.data(), saa.data(), a.h, a.w, taps);
            for (std::int64_t i = 0; i < m; ++i) prod[static_cast<std::size_t>(i)] = pb[i] * pb[i];
            filter_plane_circular(prod.data(), sbb.data(), a.h, a.w, taps);
            for (std::int64_t i = 0; i < m; ++i) prod[static_cast<std::size_t>(i)] = pa[i] * pb[i];
            filter_plane_circular(prod.data(), sab.data(), a.h, a.w, taps);
            double ssum = 0.0, csum = 0.0;
            for (std::int64_t i = 0; i < m; ++i) {
                const std::size_t k = static_cast<std::size_t>(i);
                const double va = saa[k] - mu_a[k] * mu_a[k];
                const double vb = sbb[k] - mu_b[k] * mu_b[k];
                const double cov = sab[k] - mu_a[k] * mu_b[k];
                const double cs = (2.0 * cov + c2) / (va + vb + c2);
                const double lum = (2.0 * mu_a[k] * mu_b[k] + c1) / (mu_a[k] * mu_a[k] + mu_b[k] * mu_b[k] + c1);
                ssum += lum * cs;
                csum += cs;
            }
            out.ssim += ssum / static_cast<double>(m);
            out.cs += csum / static_cast<double>(m);
            ++planes;
        }
    out.ssim /= static_cast<double>(planes);
    out.cs /= static_cast<double>(planes);
    return out;
}

inline Tensor avg_pool2(const Tensor& x) {
    Tensor out(x.n, x.c, x.h / 2, x.w / 2);
    for (std::int64_t n = 0; n < x.n; ++n)
        for (std::int64_t c = 0; c < x.c; ++c) {
            const double* src = x.plane(n, c);
            double* dst = out.plane(n, c);
            for (std::int64_t y = 0; y < out.h; ++y)
                for (std::int64_t xx = 0; xx < out.w; ++xx)
                    dst[y * out.w + xx] =
                        0.25 * (src[(2 * y) * x.w + 2 * xx] + src[(2 * y) * x.w + 2 * xx + 1] +
                                src[(2 * y + 1) * x.w + 2 * xx] + src[(2 * y + 1) * x.w + 2 * xx + 1]);
        }
    return out;
}

}  // namespace detail

inline double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "ssim");
    if (a.h < 11 || a.w < 11) throw DimensionError("ssim: image smaller than the 11x11 window");
    return detail::ssim_sums(a, b).ssim;
}

inline const std::array<double, 5>& ms_ssim_weights() {
    static const std::array<double, 5> w = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    return w;
}

inline double ms_ssim(const Tensor& a, const Tensor& b, int levels = 5) {
    require_same_shape(a, b, "ms_ssim");
    if (levels < 1 || levels > 5) throw ParameterError("ms_ssim: levels must be in [1,5]");
    const std::int64_t min_dim = (std::int64_t{1} << (levels - 1)) * 11;
    if (a.h < min_dim || a.w < min_dim)
        throw DimensionError("ms_ssim: input " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                             " smaller than required minimum " + std::to_string(min_dim) + "x" +
                             std::to_string(min_dim) + " for " + std::to_string(levels) +
                             " levels");
    const auto& w = ms_ssim_weights();
    Tensor xa = a, xb = b;
    double result = 1.0;
    for (int l = 0; l < levels; ++l) {
        const auto sums = detail::ssim_sums(xa, xb);
        const double factor = (l == levels - 1) ? sums.ssim : sums.cs;
        result *= std::pow(std::max(factor, 0.0), w[static_cast<std::size_t>(l)]);
        if (l + 1 < levels) {
            xa = detail::avg_pool2(xa);
            xb = detail::avg_pool2(xb);
        }
    }
    return result;
}

using LpipsScorer = std::function<double(const Tensor&, const Tensor&)>;

inline std::optional<double> lpips_hook(const Tensor& a, const Tensor& b,
                                        const LpipsScorer& scorer) {
    if (!scorer) return std::nullopt;
    return scorer(a, b);
}

struct MetricReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    std::optional<double> ms_ssim;  // absent when the image is too small
    std::optional<double> lpips;
};

// Metrics run on clamped 8-bit-quantized copies by default; float_mode
// evaluates the raw values instead.
inline MetricReport compute_metrics(const Tensor& out, const Tensor& ref, bool float_mode = false,
                                    const LpipsScorer& scorer = nullptr) {
    const Tensor a = float_mode ? out : quantize8(out);
    const Tensor b = float_mode ? ref : quantize8(ref);
    MetricReport r;
    r.psnr_db = psnr(a, b);
    r.ssim = ssim(a, b);
    const std::int64_t min_dim = 16 * 11;
    if (a.h >= min_dim && a.w >= min_dim) r.ms_ssim = ms_ssim(a, b);
    r.lpips = lpips_hook(a, b, scorer);
    return r;
}

struct DatasetMetrics {
    std::vector<std::pair<std::string, MetricReport>> rows;
    MetricReport mean;
    int skipped = 0;

    void finalize() {
        mean = MetricReport{};
        if (rows.empty()) return;
        double ps = 0, ss = 0, ms = 0, lp = 0;
        std::int64_t n_ms = 0, n_lp = 0;
        for (const auto& [_, r] : rows) {
            ps += r.psnr_db;
            ss += r.ssim;
            if (r.ms_ssim) {
                ms += *r.ms_ssim;
                ++n_ms;
            }
            if (r.lpips) {
                lp += *r.lpips;
                ++n_lp;
            }
        }
        mean.psnr_db = ps / static_cast<double>(rows.size());
        mean.ssim = ss / static_cast<double>(rows.size());
        if (n_ms > 0) mean.ms_ssim = ms / static_cast<double>(n_ms);
        if (n_lp > 0) mean.lpips = lp / static_cast<double>(n_lp);
    }
};

inline std::string format_value(double v, int prec = 4) {
    std::ostringstream os;
    if (std::isinf(v))
        os << "inf";
    else
        os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

inline std::string metrics_table(const DatasetMetrics& dm) {
    std::ostringstream os;
    os << std::left << std::setw(24) << "image" << std::right << std::setw(10) << "psnr_db"
       << std::setw(10) << "ssim" << std::setw(10) << "ms_ssim" << std::setw(10) << "lpips"
       << "\n";
    auto row = [&os](const std::string& name, const MetricReport& r) {
        os << std::left << std::setw(24) << name << std::right << std::setw(10)
           << format_value(r.psnr_db, 2) << std::setw(10) << format_value(r.ssim);
        os << std::setw(10) << (r.ms_ssim ? format_value(*r.ms_ssim) : std::string("-"));
        os << std::setw(10) << (r.lpips ? format_value(*r.lpips) : std::string("-")) << "\n";
    };
    for (const auto& [name, r] : dm.rows) row(name, r);
    row("mean", dm.mean);
    if (dm.skipped > 0) os << "skipped: " << dm.skipped << "\n";
    return os.str();
}

inline std::string metrics_keyvalues(const DatasetMetrics& dm) {
    std::ostringstream os;
    os << std::setprecision(17);
    auto emit = [&os](const std::string& key, const MetricReport& r) {
        os << key << ".psnr_db=" << r.psnr_db << "\n" << key << ".ssim=" << r.ssim << "\n";
        if (r.ms_ssim) os << key << ".ms_ssim=" << *r.ms_ssim << "\n";
        if (r.lpips) os << key << ".lpips=" << *r.lpips << "\n";
    };
    for (const auto& [name, r] : dm.rows) emit(name, r);
    emit("mean", dm.mean);
    os << "skipped=" << dm.skipped << "\n";
    return os.str();
}

}  // namespace fisp::metric
