#include <catch2/catch_amalgamated.hpp>

#include "fisp/nn.hpp"
#include "grad_check.hpp"

using fisp::Rng;
using fisp::Tensor;
namespace ad = fisp::ad;
using testutil::check_grads;
using testutil::probe_weights;
using testutil::rand_away;
using testutil::rand_t;

TEST_CASE("elementwise arithmetic differentiates") {
    auto a = ad::leaf(rand_t(1, 2, 3, 3, 1), true);
    auto b = ad::leaf(rand_t(1, 2, 3, 3, 2, 0.5, 1.5), true);
    check_grads({a, b}, [&] {
        auto two = ad::constant(Tensor::full(1, 2, 3, 3, 2.0));
        return ad::mean_all(ad::div(ad::mul(a, b), ad::add(b, two)));
    });
}

TEST_CASE("sub, affine and activations differentiate") {
    auto a = ad::leaf(rand_away(1, 3, 4, 4, 3), true);
    auto b = ad::leaf(rand_away(1, 3, 4, 4, 4), true);
    check_grads({a, b}, [&] {
        auto z = ad::sub(ad::affine(a, 1.7, -0.2), ad::scale(b, 0.6));
        return ad::mean_all(ad::add(ad::leaky_relu(z), ad::softplus(b)));
    });
}

TEST_CASE("mean_abs_diff differentiates away from ties") {
    auto a = ad::leaf(rand_t(1, 2, 4, 4, 5), true);
    auto b = ad::leaf(rand_t(1, 2, 4, 4, 6), true);
    check_grads({a, b}, [&] { return ad::mean_abs_diff(a, b); });
}

TEST_CASE("weighted_sum gradient equals the weights") {
    Tensor w = rand_t(1, 2, 3, 5, 7);
    auto a = ad::leaf(rand_t(1, 2, 3, 5, 8), true);
    auto root = ad::weighted_sum(a, w);
    ad::backward(root);
    for (std::size_t i = 0; i < w.v.size(); ++i)
        REQUIRE(a->grad.v[i] == Catch::Approx(w.v[i]).margin(1e-14));
}

TEST_CASE("channel slice and concat route gradients") {
    auto a = ad::leaf(rand_t(1, 3, 4, 4, 9), true);
    auto b = ad::leaf(rand_t(1, 2, 4, 4, 10), true);
    const Tensor w = probe_weights(Tensor(1, 5, 4, 4), 11);
    check_grads({a, b}, [&] {
        auto cat = ad::concat_channels(a, b);
        auto ws = ad::weighted_sum(cat, w);
        auto sl = ad::slice_channels(cat, 1, 4);
        return ad::add(ws, ad::mean_all(sl));
    });
    REQUIRE_THROWS_AS(ad::slice_channels(a, 2, 2), fisp::DimensionError);
    REQUIRE_THROWS_AS(ad::slice_channels(a, 0, 7), fisp::DimensionError);
}

TEST_CASE("conv2d matches finite differences for x, w and b") {
    auto x = ad::leaf(rand_t(2, 3, 6, 6, 12), true);
    auto w = ad::leaf(rand_t(4, 3, 3, 3, 13, -0.5, 0.5), true);
    auto b = ad::leaf(rand_t(1, 4, 1, 1, 14, -0.2, 0.2), true);
    const Tensor probe = probe_weights(Tensor(2, 4, 6, 6), 15);
    check_grads({x, w, b}, [&] { return ad::weighted_sum(ad::conv2d(x, w, b), probe); }, 5e-5);
}

TEST_CASE("strided conv2d downsamples and differentiates") {
    auto x = ad::leaf(rand_t(1, 2, 6, 6, 16), true);
    auto w = ad::leaf(rand_t(3, 2, 3, 3, 17, -0.5, 0.5), true);
    auto b = ad::leaf(Tensor(1, 3, 1, 1), true);
    auto out = ad::conv2d(x, w, b, 2);
    REQUIRE(out->val.h == 3);
    REQUIRE(out->val.w == 3);
    const Tensor probe = probe_weights(out->val, 18);
    check_grads({x, w, b}, [&] { return ad::weighted_sum(ad::conv2d(x, w, b, 2), probe); }, 5e-5);
}

TEST_CASE("1x1 conv2d with no bias differentiates") {
    auto x = ad::leaf(rand_t(1, 4, 5, 5, 19), true);
    auto w = ad::leaf(rand_t(2, 4, 1, 1, 20), true);
    const Tensor probe = probe_weights(Tensor(1, 2, 5, 5), 21);
    check_grads({x, w}, [&] { return ad::weighted_sum(ad::conv2d(x, w, nullptr), probe); }, 5e-5);
}

TEST_CASE("conv2d with an identity kernel is a passthrough") {
    auto x = ad::leaf(rand_t(1, 1, 4, 4, 22), false);
    Tensor wk(1, 1, 3, 3);
    wk.at(0, 0, 1, 1) = 1.0;
    auto out = ad::conv2d(x, ad::constant(std::move(wk)), nullptr);
    for (std::size_t i = 0; i < x->val.v.size(); ++i) REQUIRE(out->val.v[i] == x->val.v[i]);
}

TEST_CASE("conv2d rejects channel mismatches") {
    auto x = ad::leaf(Tensor(1, 3, 4, 4));
    auto w = ad::leaf(Tensor(2, 4, 3, 3));
    REQUIRE_THROWS_AS(ad::conv2d(x, w, nullptr), fisp::DimensionError);
}

TEST_CASE("instance_norm normalizes and differentiates") {
    auto x = ad::leaf(rand_t(2, 3, 5, 5, 23), true);
    auto gamma = ad::leaf(rand_t(1, 3, 1, 1, 24, 0.5, 1.5), true);
    auto beta = ad::leaf(rand_t(1, 3, 1, 1, 25, -0.3, 0.3), true);

    auto out = ad::instance_norm(x, gamma, beta);
    for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t c = 0; c < 3; ++c) {
            double mu = 0, var = 0;
            const double* p = out->val.plane(n, c);
            for (int i = 0; i < 25; ++i) mu += p[i];
            mu /= 25.0;
            for (int i = 0; i < 25; ++i) var += (p[i] - mu) * (p[i] - mu);
            var /= 25.0;
            const double g = gamma->val.v[static_cast<std::size_t>(c)];
            const double b = beta->val.v[static_cast<std::size_t>(c)];
            REQUIRE(mu == Catch::Approx(b).margin(1e-10));
            REQUIRE(std::sqrt(var) == Catch::Approx(std::abs(g)).epsilon(1e-3));
        }

    const Tensor probe = probe_weights(Tensor(2, 3, 5, 5), 26);
    check_grads({x, gamma, beta},
                [&] { return ad::weighted_sum(ad::instance_norm(x, gamma, beta), probe); }, 1e-4);
}

TEST_CASE("pixel_shuffle2 lays out channels as 2x2 subpixels") {
    Tensor t(1, 4, 1, 1);
    t.v = {10, 20, 30, 40};
    auto out = ad::pixel_shuffle2(ad::leaf(std::move(t)));
    REQUIRE(out->val.h == 2);
    REQUIRE(out->val.at(0, 0, 0, 0) == 10);
    REQUIRE(out->val.at(0, 0, 0, 1) == 20);
    REQUIRE(out->val.at(0, 0, 1, 0) == 30);
    REQUIRE(out->val.at(0, 0, 1, 1) == 40);

    auto x = ad::leaf(rand_t(1, 8, 3, 3, 27), true);
    const Tensor probe = probe_weights(Tensor(1, 2, 6, 6), 28);
    check_grads({x}, [&] { return ad::weighted_sum(ad::pixel_shuffle2(x), probe); });
    REQUIRE_THROWS_AS(ad::pixel_shuffle2(ad::leaf(Tensor(1, 3, 2, 2))), fisp::DimensionError);
}

TEST_CASE("upsample_nearest2 repeats pixels and differentiates") {
    Tensor t(1, 1, 1, 2);
    t.v = {3, 7};
    auto out = ad::upsample_nearest2(ad::leaf(std::move(t)));
    REQUIRE(out->val.v == std::vector<double>{3, 3, 7, 7, 3, 3, 7, 7});

    auto x = ad::leaf(rand_t(1, 2, 3, 4, 29), true);
    const Tensor probe = probe_weights(Tensor(1, 2, 6, 8), 30);
    check_grads({x}, [&] { return ad::weighted_sum(ad::upsample_nearest2(x), probe); });
}

TEST_CASE("circular separable filtering is shift-equivariant and differentiable") {
    const std::vector<double> taps = {0.25, 0.5, 0.25};

    SECTION("constants are fixed points") {
        auto c = ad::leaf(Tensor::full(1, 1, 5, 5, 0.8));
        auto out = ad::sep_filter_circular(c, taps);
        for (double v : out->val.v) REQUIRE(v == Catch::Approx(0.8).margin(1e-12));
    }

    SECTION("circular shift commutes with the filter") {
        Tensor x = rand_t(1, 1, 6, 6, 31);
        Tensor xs(1, 1, 6, 6);
        for (std::int64_t y = 0; y < 6; ++y)
            for (std::int64_t xx = 0; xx < 6; ++xx)
                xs.at(0, 0, y, xx) = x.at(0, 0, (y + 2) % 6, (xx + 4) % 6);
        auto fx = ad::sep_filter_circular(ad::leaf(x), taps);
        auto fxs = ad::sep_filter_circular(ad::leaf(xs), taps);
        for (std::int64_t y = 0; y < 6; ++y)
            for (std::int64_t xx = 0; xx < 6; ++xx)
                REQUIRE(fxs->val.at(0, 0, y, xx) ==
                        Catch::Approx(fx->val.at(0, 0, (y + 2) % 6, (xx + 4) % 6)).margin(1e-12));
    }

    SECTION("gradients match finite differences") {
        auto x = ad::leaf(rand_t(1, 2, 5, 5, 32), true);
        const Tensor probe = probe_weights(Tensor(1, 2, 5, 5), 33);
        check_grads({x}, [&] { return ad::weighted_sum(ad::sep_filter_circular(x, taps), probe); });
    }
}

TEST_CASE("fft2_ri agrees with decompose and differentiates") {
    Tensor x = rand_t(1, 2, 6, 6, 34, 0.0, 1.0);
    auto xl = ad::leaf(x, true);
    auto ri = ad::fft2_ri(xl);
    const auto sp = fisp::fourier::decompose(x);
    for (std::int64_t c = 0; c < 2; ++c)
        for (std::int64_t i = 0; i < 36; ++i) {
            const double re = ri->val.plane(0, c)[i];
            const double im = ri->val.plane(0, 2 + c)[i];
            const double a = sp.amplitude.plane(0, c)[i];
            const double p = sp.phase.plane(0, c)[i];
            REQUIRE(re == Catch::Approx(a * std::cos(p)).margin(1e-9));
            REQUIRE(im == Catch::Approx(a * std::sin(p)).margin(1e-9));
        }
    const Tensor probe = probe_weights(Tensor(1, 4, 6, 6), 35);
    check_grads({xl}, [&] { return ad::weighted_sum(ad::fft2_ri(xl), probe); });
}

TEST_CASE("ifft2_real inverts fft2_ri and differentiates") {
    auto x = ad::leaf(rand_t(1, 2, 5, 7, 36), true);
    auto back = ad::ifft2_real(ad::fft2_ri(x));
    for (std::size_t i = 0; i < x->val.v.size(); ++i)
        REQUIRE(back->val.v[i] == Catch::Approx(x->val.v[i]).margin(1e-10));

    auto ri = ad::leaf(rand_t(1, 4, 5, 5, 37), true);
    const Tensor probe = probe_weights(Tensor(1, 2, 5, 5), 38);
    check_grads({ri}, [&] { return ad::weighted_sum(ad::ifft2_real(ri), probe); });
    REQUIRE_THROWS_AS(ad::ifft2_real(ad::leaf(Tensor(1, 3, 4, 4))), fisp::DimensionError);
}

TEST_CASE("amplitude_of and phase_of match atan2/hypot and differentiate") {
    Tensor riv = rand_away(1, 4, 4, 4, 39, 0.4, 1.2);
    auto ri = ad::leaf(riv, true);
    auto amp = ad::amplitude_of(ri);
    auto pha = ad::phase_of(ri);
    for (std::int64_t c = 0; c < 2; ++c)
        for (std::int64_t i = 0; i < 16; ++i) {
            const double re = riv.plane(0, c)[i];
            const double im = riv.plane(0, 2 + c)[i];
            REQUIRE(amp->val.plane(0, c)[i] == Catch::Approx(std::hypot(re, im)).margin(1e-12));
            REQUIRE(pha->val.plane(0, c)[i] ==
                    Catch::Approx(fisp::fourier::wrap_phase(std::atan2(im, re))).margin(1e-12));
        }
    const Tensor probe = probe_weights(Tensor(1, 2, 4, 4), 40);
    check_grads({ri}, [&] { return ad::weighted_sum(ad::amplitude_of(ri), probe); });
    check_grads({ri}, [&] { return ad::weighted_sum(ad::phase_of(ri), probe); });
}

TEST_CASE("polar_to_ri recombines and differentiates") {
    Tensor riv = rand_away(1, 4, 4, 4, 41, 0.4, 1.2);
    auto ri = ad::leaf(riv, false);
    auto back = ad::polar_to_ri(ad::amplitude_of(ri), ad::phase_of(ri));
    for (std::size_t i = 0; i < riv.v.size(); ++i)
        REQUIRE(back->val.v[i] == Catch::Approx(riv.v[i]).margin(1e-12));

    auto amp = ad::leaf(rand_t(1, 2, 4, 4, 42, 0.2, 1.5), true);
    auto pha = ad::leaf(rand_t(1, 2, 4, 4, 43, -2.5, 2.5), true);
    const Tensor probe = probe_weights(Tensor(1, 4, 4, 4), 44);
    check_grads({amp, pha}, [&] { return ad::weighted_sum(ad::polar_to_ri(amp, pha), probe); });
}

TEST_CASE("shared subgraphs accumulate gradients once per use") {
    Tensor t(1, 1, 1, 1);
    t.v[0] = 3.0;
    auto x = ad::leaf(t, true);
    auto y = ad::add(ad::mul(x, x), x);  // x^2 + x, dy/dx = 2x + 1
    ad::backward(y);
    REQUIRE(y->val.v[0] == 12.0);
    REQUIRE(x->grad.v[0] == Catch::Approx(7.0).margin(1e-14));
}

TEST_CASE("backward accumulates across calls until zero_grad") {
    auto x = ad::leaf(Tensor::scalar(2.0), true);
    auto build = [&] { return ad::scale(x, 5.0); };
    ad::backward(build());
    REQUIRE(x->grad.v[0] == 5.0);
    ad::backward(build());
    REQUIRE(x->grad.v[0] == 10.0);
    x->zero_grad();
    ad::backward(build());
    REQUIRE(x->grad.v[0] == 5.0);
}

TEST_CASE("backward rejects non-scalar roots") {
    auto x = ad::leaf(Tensor(1, 1, 2, 2), true);
    auto y = ad::scale(x, 2.0);
    REQUIRE_THROWS_AS(ad::backward(y), fisp::NumericError);
}

TEST_CASE("graphs of constants carry no gradient state") {
    auto a = ad::constant(Tensor::full(1, 1, 3, 3, 1.0));
    auto b = ad::constant(Tensor::full(1, 1, 3, 3, 2.0));
    auto y = ad::mean_all(ad::mul(a, b));
    REQUIRE_FALSE(y->needs);
    ad::backward(y);
    REQUIRE(a->grad.numel() == 0);
    REQUIRE(b->grad.numel() == 0);
}
