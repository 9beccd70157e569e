#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include "fisp/tensor.hpp"

namespace fisp::fourier {

// All transforms in this library are unitary: a 1/sqrt(HW) factor on both
// the forward and the inverse pass. DC sits at index (0,0); nothing is
// shifted.
enum class Norm { kUnitary };

namespace detail {

// FFTW plans are cached per (h, w, sign). Plan creation is not thread-safe,
// execution on distinct buffers is, hence the lock around creation only.
// FFTW_ESTIMATE keeps plan selection deterministic run to run.
class PlanCache {
  public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int h, int w, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        const auto key = std::make_tuple(h, w, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<std::complex<double>> scratch(static_cast<std::size_t>(h) * w);
        fftw_plan p = fftw_plan_dft_2d(
            h, w, reinterpret_cast<fftw_complex*>(scratch.data()),
            reinterpret_cast<fftw_complex*>(scratch.data()), sign,
            FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

  private:
    PlanCache() = default;
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

}  // namespace detail

// In-place-capable 2D transform of one HxW complex plane, unitary scaling.
inline void fft2d(const std::complex<double>* in, std::complex<double>* out, int h, int w,
                  bool inverse) {
    fftw_plan p = detail::PlanCache::instance().get(h, w, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
    const double s = 1.0 / std::sqrt(static_cast<double>(h) * static_cast<double>(w));
    const std::int64_t m = static_cast<std::int64_t>(h) * w;
    for (std::int64_t i = 0; i < m; ++i) out[i] *= s;
}

// Amplitude/phase of a real multi-channel image. Amplitude is nonnegative,
// phase lies in (-pi, pi].
struct SpectralPair {
    Tensor amplitude;
    Tensor phase;
    Norm norm = Norm::kUnitary;
};

inline double wrap_phase(double p) {
    // atan2 yields [-pi, pi]; fold the closed lower end onto +pi.
    return p <= -M_PI ? M_PI : p;
}

inline SpectralPair decompose(const Tensor& x) {
    if (x.h < 1 || x.w < 1) throw DimensionError("decompose: empty image");
    if (!x.all_finite()) throw NumericError("decompose: non-finite input");
    SpectralPair sp;
    sp.amplitude = Tensor(x.n, x.c, x.h, x.w);
    sp.phase = Tensor(x.n, x.c, x.h, x.w);
    const std::int64_t m = x.h * x.w;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(m));
    for (std::int64_t in = 0; in < x.n; ++in) {
        for (std::int64_t ic = 0; ic < x.c; ++ic) {
            const double* src = x.plane(in, ic);
            for (std::int64_t i = 0; i < m; ++i) buf[i] = {src[i], 0.0};
            fft2d(buf.data(), buf.data(), static_cast<int>(x.h), static_cast<int>(x.w), false);
            double* a = sp.amplitude.plane(in, ic);
            double* p = sp.phase.plane(in, ic);
            for (std::int64_t i = 0; i < m; ++i) {
                a[i] = std::abs(buf[i]);
                p[i] = wrap_phase(std::atan2(buf[i].imag(), buf[i].real()));
            }
        }
    }
    return sp;
}

// Max |A(u,v) - A(-u,-v)| style asymmetry; cheap Hermitian test used to
// decide whether the imaginary-residue assertion in recompose applies.
inline bool is_hermitian(const SpectralPair& sp, double tol = 1e-6) {
    const Tensor& a = sp.amplitude;
    const Tensor& p = sp.phase;
    for (std::int64_t in = 0; in < a.n; ++in)
        for (std::int64_t ic = 0; ic < a.c; ++ic)
            for (std::int64_t y = 0; y < a.h; ++y)
                for (std::int64_t x = 0; x < a.w; ++x) {
                    const std::int64_t ym = (a.h - y) % a.h;
                    const std::int64_t xm = (a.w - x) % a.w;
                    if (std::abs(a.at(in, ic, y, x) - a.at(in, ic, ym, xm)) > tol) return false;
                    const double re = a.at(in, ic, y, x) * std::cos(p.at(in, ic, y, x)) -
                                      a.at(in, ic, ym, xm) * std::cos(p.at(in, ic, ym, xm));
                    const double im = a.at(in, ic, y, x) * std::sin(p.at(in, ic, y, x)) +
                                      a.at(in, ic, ym, xm) * std::sin(p.at(in, ic, ym, xm));
                    if (std::abs(re) > tol || std::abs(im) > tol) return false;
                }
    return true;
}

inline Tensor recompose(const SpectralPair& sp, double* imag_residue_out = nullptr) {
    const Tensor& a = sp.amplitude;
    const Tensor& p = sp.phase;
    require_same_shape(a, p, "recompose");
    Tensor out(a.n, a.c, a.h, a.w);
    const std::int64_t m = a.h * a.w;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(m));
    double residue = 0.0;
    for (std::int64_t in = 0; in < a.n; ++in) {
        for (std::int64_t ic = 0; ic < a.c; ++ic) {
            const double* ap = a.plane(in, ic);
            const double* pp = p.plane(in, ic);
            for (std::int64_t i = 0; i < m; ++i)
                buf[i] = {ap[i] * std::cos(pp[i]), ap[i] * std::sin(pp[i])};
            fft2d(buf.data(), buf.data(), static_cast<int>(a.h), static_cast<int>(a.w), true);
            double* dst = out.plane(in, ic);
            for (std::int64_t i = 0; i < m; ++i) {
                dst[i] = buf[i].real();
                residue = std::max(residue, std::abs(buf[i].imag()));
            }
        }
    }
    if (imag_residue_out) *imag_residue_out = residue;
    if (residue > 1e-4 && is_hermitian(sp)) {
        throw NumericError("recompose: imaginary residue " + std::to_string(residue) +
                           " exceeds 1e-4 for a Hermitian-symmetric spectrum");
    }
    return out;
}

// Cross the amplitudes of two equally shaped images, keeping each image's
// own phase. Returns {A(b) with P(a), A(a) with P(b)}.
inline std::pair<Tensor, Tensor> swap_amplitude(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "swap_amplitude");
    SpectralPair sa = decompose(a);
    SpectralPair sb = decompose(b);
    SpectralPair first{sb.amplitude, sa.phase};
    SpectralPair second{sa.amplitude, sb.phase};
    return {recompose(first), recompose(second)};
}

}  // namespace fisp::fourier
