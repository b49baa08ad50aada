#include <doctest.h>

#include <cmath>

#include "mambaio/pyramid.hpp"

using namespace mambaio;
using namespace mambaio::pyramid;

namespace {

Tensor<double> random_window(Rng& rng, int ch, int len, double scale = 1.0) {
    Tensor<double> x({ch, len});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal(0, scale);
    return x;
}

}  // namespace

TEST_CASE("constant signal: low carries it all, high is zero") {
    Tensor<double> x({3, 20});
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 20; ++t) x.at(c, t) = 1.5 * (c + 1);
    const auto bands = decompose(x);
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 20; ++t) {
            CHECK(bands.low.at(c, t) == doctest::Approx(1.5 * (c + 1)).epsilon(1e-15));
            CHECK(bands.high.at(c, t) == 0.0);
        }
}

TEST_CASE("L=200 downsamples to length 100") {
    Rng rng(5);
    const auto bands = decompose(random_window(rng, 6, 200));
    CHECK(bands.low_downsampled.dim(1) == 100);
    CHECK(bands.low.dim(1) == 200);
    CHECK(bands.high.dim(1) == 200);
}

TEST_CASE("alternating signal matches a sliding-window mean oracle") {
    const int len = 16;
    Tensor<double> x({1, len});
    for (int t = 0; t < len; ++t) x.at(0, t) = (t % 2 == 0) ? 1.0 : -1.0;
    const auto bands = decompose(x, 5, 2);
    // brute-force oracle: mean of clamped 5-window around 2j
    for (int j = 0; j < len / 2; ++j) {
        double acc = 0;
        for (int m = -2; m <= 2; ++m) {
            int u = 2 * j + m;
            u = u < 0 ? 0 : (u >= len ? len - 1 : u);
            acc += x.at(0, u);
        }
        CHECK(bands.low_downsampled.at(0, j) == doctest::Approx(acc / 5).epsilon(1e-15));
    }
}

TEST_CASE("reconstruction: bitwise in the shared-binade regime, one ulp otherwise") {
    Rng rng(6);
    // same-sign single-binade inputs: x and low within a factor of two, the
    // subtraction is exact (Sterbenz) and the round trip is bitwise
    for (int trial = 0; trial < 20; ++trial) {
        Tensor<double> x({6, 200});
        for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(1.0, 2.0);
        const auto bands = decompose(x);
        for (int64_t i = 0; i < x.size(); ++i)
            CHECK(bands.low[i] + bands.high[i] == x[i]);
    }
    // arbitrary inputs: within one ulp of the larger band
    for (int trial = 0; trial < 20; ++trial) {
        const double scale = std::pow(10.0, rng.uniform(-3, 3));
        const auto x = random_window(rng, 6, 200, scale);
        const auto bands = decompose(x);
        for (int64_t i = 0; i < x.size(); ++i) {
            const double rec = bands.low[i] + bands.high[i];
            const double ulp_bound =
                std::abs(std::max(std::abs(bands.low[i]), std::abs(bands.high[i])) *
                         std::numeric_limits<double>::epsilon());
            CHECK(std::abs(rec - x[i]) <= ulp_bound);
        }
    }
}

TEST_CASE("decompose is linear in its input") {
    Rng rng(7);
    const auto x = random_window(rng, 4, 32);
    const auto y = random_window(rng, 4, 32);
    const double a = 1.7, b = -0.4;
    Tensor<double> mix({4, 32});
    for (int64_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
    const auto bm = decompose(mix);
    const auto bx = decompose(x);
    const auto by = decompose(y);
    for (int64_t i = 0; i < mix.size(); ++i)
        CHECK(bm.low[i] == doctest::Approx(a * bx.low[i] + b * by.low[i]).epsilon(1e-12));
}

TEST_CASE("low band smooths white noise") {
    int failures = 0;
    for (int seed = 0; seed < 100; ++seed) {
        Rng rng(9000 + static_cast<uint64_t>(seed));
        const auto x = random_window(rng, 1, 64);
        const auto bands = decompose(x);
        auto variance = [](const Tensor<double>& t) {
            double mu = 0;
            for (int i = 0; i < t.dim(1); ++i) mu += t.at(0, i);
            mu /= t.dim(1);
            double v = 0;
            for (int i = 0; i < t.dim(1); ++i) v += (t.at(0, i) - mu) * (t.at(0, i) - mu);
            return v / t.dim(1);
        };
        if (variance(bands.low) > variance(x)) ++failures;
    }
    CHECK(failures <= 5);
}

TEST_CASE("shifting by the stride shifts the downsampled band by one") {
    Rng rng(8);
    const int len = 64;
    const auto x = random_window(rng, 1, len + 2);
    Tensor<double> a({1, len}), b({1, len});
    for (int t = 0; t < len; ++t) {
        a.at(0, t) = x.at(0, t);
        b.at(0, t) = x.at(0, t + 2);  // shifted by s = 2
    }
    const auto ba = decompose(a);
    const auto bb = decompose(b);
    for (int j = 2; j + 2 < len / 2; ++j)
        CHECK(bb.low_downsampled.at(0, j) ==
              doctest::Approx(ba.low_downsampled.at(0, j + 1)).epsilon(1e-12));
}

TEST_CASE("input validation") {
    Rng rng(9);
    CHECK_THROWS_AS((void)decompose(random_window(rng, 2, 15)), ContractError);       // odd L
    CHECK_THROWS_AS((void)decompose(random_window(rng, 2, 4), 9, 2), ContractError);  // k > L
    CHECK_THROWS_AS((void)decompose(random_window(rng, 2, 16), 4, 2), ContractError); // even k
}

TEST_CASE("backward is the exact adjoint (finite differences)") {
    Rng rng(10);
    const int ch = 6, len = 16;
    const auto x = random_window(rng, ch, len);
    const auto wl = random_window(rng, ch, len);
    const auto wh = random_window(rng, ch, len);

    // loss = sum(wl . low(x)) + sum(wh . high(x))
    auto loss = [&](const Tensor<double>& in) {
        const auto bands = decompose(in);
        double acc = 0;
        for (int64_t i = 0; i < in.size(); ++i)
            acc += wl[i] * bands.low[i] + wh[i] * bands.high[i];
        return acc;
    };
    const auto analytic = decompose_backward(wl, wh);

    const double eps = 1e-5;
    double worst = 0;
    for (int64_t i = 0; i < x.size(); ++i) {
        Tensor<double> xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        const double numeric = (loss(xp) - loss(xm)) / (2 * eps);
        worst = std::max(worst, std::abs(numeric - analytic[i]) /
                                    std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8}));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("gradient through high only equals identity minus the lowpass adjoint") {
    Rng rng(11);
    const auto gh = random_window(rng, 3, 24);
    Tensor<double> zero({3, 24});
    const auto via_high = decompose_backward(zero, gh);
    const auto via_low = decompose_backward(gh, zero);
    for (int64_t i = 0; i < gh.size(); ++i)
        CHECK(via_high[i] == doctest::Approx(gh[i] - via_low[i]).epsilon(1e-12));
}

TEST_CASE("zero upstream gradients give zero input gradient") {
    Tensor<double> zero({2, 12});
    const auto gx = decompose_backward(zero, zero);
    for (int64_t i = 0; i < gx.size(); ++i) CHECK(gx[i] == 0.0);
}

TEST_CASE("multi-level decomposition recurses on the downsampled band") {
    Rng rng(12);
    const auto x = random_window(rng, 2, 32);
    const auto levels = decompose_multi(x, 5, 2, 3);
    REQUIRE(levels.size() == 3);
    CHECK(levels[0].low.dim(1) == 32);
    CHECK(levels[1].low.dim(1) == 16);
    CHECK(levels[2].low.dim(1) == 8);
    // level 1 decomposes level 0's downsampled band
    const auto direct = decompose(levels[0].low_downsampled, 5, 2);
    for (int64_t i = 0; i < direct.low.size(); ++i)
        CHECK(levels[1].low[i] == direct.low[i]);
}
