#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <doctest.h>

#include "stats.hpp"
#include "typedpp/random.hpp"

using namespace typedpp;
using typedpp::testing::ks_pvalue;
using typedpp::testing::sample_mean;

namespace {

constexpr std::size_t kDraws = 100000;

template <class F>
std::vector<double> draw(std::size_t n, F&& f)
{
    std::vector<double> out(n);
    for (double& x : out) x = f();
    return out;
}

}  // namespace

TEST_CASE("Philox4x32-10 known answers")
{
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    CHECK(RngStream::philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) ==
          A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(RngStream::philox4x32(A4{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                A2{0xffffffffu, 0xffffffffu}) ==
          A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(RngStream::philox4x32(A4{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                A2{0xa4093822u, 0x299f31d0u}) ==
          A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct")
{
    RngStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
    bool differs_stream = false, differs_seed = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a();
        CHECK(x == b());
        differs_stream |= x != c();
        differs_seed |= x != d();
    }
    CHECK(differs_stream);
    CHECK(differs_seed);

    RngStream u(1, 0), v(1, 1);
    double sxy = 0.0;
    for (std::size_t i = 0; i < kDraws; ++i) sxy += (u.uniform() - 0.5) * (v.uniform() - 0.5);
    CHECK(std::abs(sxy / kDraws * 12.0) < 0.02);
}

TEST_CASE("uniform stays inside the open unit interval")
{
    // Twenty streams: each p-value against a Bonferroni level, and the
    // p-values themselves against the uniform.
    constexpr int kStreams = 20;
    std::vector<double> pvalues;
    for (int s = 0; s < kStreams; ++s) {
        RngStream rng(5, s);
        const auto x = draw(kDraws, [&] { return rng.uniform(); });
        CHECK(*std::min_element(x.begin(), x.end()) > 0.0);
        CHECK(*std::max_element(x.begin(), x.end()) < 1.0);
        pvalues.push_back(ks_pvalue(x, [](double t) { return t; }));
    }
    CHECK(*std::min_element(pvalues.begin(), pvalues.end()) > 0.001 / kStreams);
    CHECK(ks_pvalue(pvalues, [](double t) { return t; }) > 0.001);
}

TEST_CASE("normal, gamma, beta and inverse-gamma pass KS")
{
    RngStream rng(7, 0);
    const boost::math::normal_distribution<> nd(1.5, 2.0);
    CHECK(ks_pvalue(draw(kDraws, [&] { return sample_normal(1.5, 4.0, rng); }),
                    [&](double x) { return cdf(nd, x); }) > 0.001);

    for (double shape : {0.3, 1.0, 2.5, 527.0}) {
        const boost::math::gamma_distribution<> gd(shape, 1.0 / 1.7);
        CHECK(ks_pvalue(draw(kDraws, [&] { return sample_gamma(shape, 1.7, rng); }),
                        [&](double x) { return cdf(gd, x); }) > 0.001);
    }
    const boost::math::beta_distribution<> bd(11.0, 1.0);
    CHECK(ks_pvalue(draw(kDraws, [&] { return sample_beta(11.0, 1.0, rng); }),
                    [&](double x) { return cdf(bd, x); }) > 0.001);
    const boost::math::beta_distribution<> bd2(0.4, 0.7);
    CHECK(ks_pvalue(draw(kDraws, [&] { return sample_beta(0.4, 0.7, rng); }),
                    [&](double x) { return cdf(bd2, x); }) > 0.001);
    const boost::math::inverse_gamma_distribution<> ig(3.5, 2.0);
    CHECK(ks_pvalue(draw(kDraws, [&] { return sample_inverse_gamma(3.5, 2.0, rng); }),
                    [&](double x) { return cdf(ig, x); }) > 0.001);
}

TEST_CASE("log gamma draws stay finite for tiny shapes")
{
    RngStream rng(9, 0);
    for (int i = 0; i < 1000; ++i) CHECK(std::isfinite(sample_log_gamma(1e-4, rng)));
    const boost::math::gamma_distribution<> gd(0.5, 1.0);
    CHECK(ks_pvalue(draw(kDraws, [&] { return std::exp(sample_log_gamma(0.5, rng)); }),
                    [&](double x) { return cdf(gd, x); }) > 0.001);
}

TEST_CASE("half-line truncated normal")
{
    RngStream rng(11, 0);
    const auto pos = draw(kDraws, [&] {
        return sample_half_line_truncated_normal(0.0, 1.0, HalfLine::Positive, rng);
    });
    CHECK(sample_mean(pos) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(0.0125));
    const auto neg = draw(kDraws, [&] {
        return sample_half_line_truncated_normal(0.0, 1.0, HalfLine::Negative, rng);
    });
    CHECK(sample_mean(neg) ==
          doctest::Approx(-std::sqrt(2.0 / std::numbers::pi)).epsilon(0.0125));
    for (int i = 0; i < 1000; ++i) {
        CHECK(sample_half_line_truncated_normal(5.0, 1e-6, HalfLine::Positive, rng) ==
              doctest::Approx(5.0).epsilon(1e-3));
    }

    // Closed-form truncated CDFs, including a location deep in the excluded side.
    const boost::math::normal_distribution<> sn;
    for (double mu : {0.7, -1.0, -6.0}) {
        const double sd = 1.3;
        const double tail = cdf(complement(sn, -mu / sd));
        const auto x = draw(kDraws, [&] {
            return sample_half_line_truncated_normal(mu, sd * sd, HalfLine::Positive, rng);
        });
        CHECK(*std::min_element(x.begin(), x.end()) > 0.0);
        CHECK(ks_pvalue(x, [&](double t) {
                  return 1.0 - cdf(complement(sn, (t - mu) / sd)) / tail;
              }) > 0.001);
    }
    CHECK_THROWS_AS(sample_half_line_truncated_normal(0.0, 0.0, HalfLine::Positive, rng),
                    DomainError);
}

TEST_CASE("inverse-Wishart")
{
    RngStream rng(13, 0);
    Mat2 mean = Mat2::Zero();
    for (std::size_t i = 0; i < kDraws; ++i) {
        const Mat2 x = sample_inverse_wishart(5.0, Mat2::Identity(), rng);
        CHECK_UNARY(is_spd(x));
        mean += x;
    }
    mean /= static_cast<double>(kDraws);
    CHECK(mean(0, 0) == doctest::Approx(0.5).epsilon(0.04));
    CHECK(mean(1, 1) == doctest::Approx(0.5).epsilon(0.04));
    CHECK(std::abs(mean(0, 1)) < 0.02);

    for (int i = 0; i < 1000; ++i) {
        CHECK_UNARY(is_spd(sample_inverse_wishart(3.0, Mat2::Identity() * 2.0, rng)));
    }

    // Diagonal entries of IW(dof, S) are inverse-gamma((dof - 1) / 2, S_jj / 2).
    Mat2 scale;
    scale << 6.0, 1.0, 1.0, 2.0;
    std::vector<double> d0(kDraws), d1(kDraws);
    for (std::size_t i = 0; i < kDraws; ++i) {
        const Mat2 x = sample_inverse_wishart(4.0, scale, rng);
        d0[i] = x(0, 0);
        d1[i] = x(1, 1);
    }
    const boost::math::inverse_gamma_distribution<> ig0(1.5, 3.0), ig1(1.5, 1.0);
    CHECK(ks_pvalue(d0, [&](double t) { return cdf(ig0, t); }) > 0.001);
    CHECK(ks_pvalue(d1, [&](double t) { return cdf(ig1, t); }) > 0.001);

    Mat2 bad;
    bad << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(sample_inverse_wishart(4.0, bad, rng), NumericError);
    CHECK_THROWS_AS(sample_inverse_wishart(1.0, Mat2::Identity(), rng), DomainError);
}

TEST_CASE("categorical draws from log weights")
{
    RngStream rng(17, 0);
    auto freq = [&](const std::vector<double>& lw) {
        std::vector<double> f(lw.size(), 0.0);
        for (std::size_t i = 0; i < kDraws; ++i) f[sample_categorical_from_log_weights(lw, rng)] += 1.0;
        for (double& x : f) x /= kDraws;
        return f;
    };
    const auto uniform = freq({0.0, 0.0, 0.0});
    for (double f : uniform) CHECK(f == doctest::Approx(1.0 / 3.0).epsilon(0.03));
    const auto dominant = freq({0.0, -1e6, -1e6});
    CHECK(dominant[0] == 1.0);
    const auto ratio = freq({std::log(1.0), std::log(2.0), std::log(3.0)});
    CHECK(std::abs(ratio[0] - 1.0 / 6.0) < 0.01);
    CHECK(std::abs(ratio[1] - 1.0 / 3.0) < 0.01);
    CHECK(std::abs(ratio[2] - 0.5) < 0.01);
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(sample_categorical_from_log_weights(std::vector<double>{ninf, ninf}, rng),
                    NumericError);
    CHECK_THROWS_AS(sample_categorical_from_log_weights(std::vector<double>{}, rng), NumericError);
}

TEST_CASE("Dirichlet and BVN moments")
{
    RngStream rng(19, 0);
    std::array<double, 3> m{};
    for (std::size_t i = 0; i < kDraws; ++i) {
        const auto p = sample_dirichlet({151.0, 101.0, 251.0}, rng);
        CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
        for (int k = 0; k < 3; ++k) m[k] += p[k];
    }
    CHECK(std::abs(m[2] / kDraws - 251.0 / 503.0) < 0.005);

    Mat2 cov;
    cov << 4.0, 1.5, 1.5, 2.0;
    Vec2 mean = Vec2::Zero();
    Mat2 second = Mat2::Zero();
    for (std::size_t i = 0; i < kDraws; ++i) {
        const Vec2 x = sample_bvn(Vec2(1.0, -2.0), cov, rng);
        mean += x;
        second += (x - Vec2(1.0, -2.0)) * (x - Vec2(1.0, -2.0)).transpose();
    }
    mean /= kDraws;
    second /= kDraws;
    CHECK(mean[0] == doctest::Approx(1.0).epsilon(0.02));
    CHECK(mean[1] == doctest::Approx(-2.0).epsilon(0.02));
    CHECK(second(0, 1) == doctest::Approx(1.5).epsilon(0.05));
}
