#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fisp/common.hpp"

namespace fisp {

// Dense NCHW tensor of doubles. Everything in the library -- images,
// feature maps, network parameters, even scalars (1x1x1x1) -- uses this one
// container. Value semantics throughout.
struct Tensor {
    std::int64_t n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::int64_t n_, std::int64_t c_, std::int64_t h_, std::int64_t w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_ * c_ * h_ * w_), 0.0) {}

    static Tensor scalar(double x) {
        Tensor t(1, 1, 1, 1);
        t.v[0] = x;
        return t;
    }

    static Tensor full(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w, double x) {
        Tensor t(n, c, h, w);
        std::fill(t.v.begin(), t.v.end(), x);
        return t;
    }

    std::int64_t numel() const { return n * c * h * w; }

    double& at(std::int64_t in, std::int64_t ic, std::int64_t iy, std::int64_t ix) {
        return v[static_cast<std::size_t>(((in * c + ic) * h + iy) * w + ix)];
    }
    double at(std::int64_t in, std::int64_t ic, std::int64_t iy, std::int64_t ix) const {
        return v[static_cast<std::size_t>(((in * c + ic) * h + iy) * w + ix)];
    }

    // channel plane pointer for (n, c)
    double* plane(std::int64_t in, std::int64_t ic) {
        return v.data() + static_cast<std::size_t>((in * c + ic) * h * w);
    }
    const double* plane(std::int64_t in, std::int64_t ic) const {
        return v.data() + static_cast<std::size_t>((in * c + ic) * h * w);
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) +
               "," + std::to_string(w) + ")";
    }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
}

inline Tensor random_uniform(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                             Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor t(n, c, h, w);
    for (auto& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

}  // namespace fisp
