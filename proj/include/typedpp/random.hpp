#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

#include "typedpp/types.hpp"

namespace typedpp {

// Counter-based generator (Philox4x32-10). The 64-bit seed is the key and the
// stream id occupies the upper half of the 128-bit counter, so every
// (seed, stream_id) pair names an independent sequence without any serial
// coupling between streams. Satisfies UniformRandomBitGenerator.
//
// Not thread-safe: each concurrent task owns its own stream.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept;

    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept;

    double standard_normal() noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    // Raw block function, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                                   std::array<std::uint32_t, 2> key) noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    unsigned buffered_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

enum class HalfLine { Positive, Negative };

double sample_normal(double mean, double var, RngStream& rng);

// Gamma(shape, rate) via Marsaglia-Tsang.
double sample_gamma(double shape, double rate, RngStream& rng);

// log of a Gamma(shape, 1) draw; stays finite for tiny shapes.
double sample_log_gamma(double shape, RngStream& rng);

double sample_beta(double a, double b, RngStream& rng);

// Inverse-Gamma with density proportional to x^{-shape-1} exp(-scale / x).
double sample_inverse_gamma(double shape, double scale, RngStream& rng);

std::array<double, kNumTypes> sample_dirichlet(const std::array<double, kNumTypes>& conc,
                                               RngStream& rng);

Vec2 sample_bvn(const Vec2& mean, const Mat2& cov, RngStream& rng);

// N(mu, var) conditioned on one half-line. Uses plain rejection when the
// half-line holds at least half the mass and Robert's exponential proposal
// in the tail, so it stays exact however far mu lies outside the half-line.
double sample_half_line_truncated_normal(double mu, double var, HalfLine side, RngStream& rng);

// Inverse-Wishart on 2x2 SPD matrices via the Bartlett decomposition.
// E[X] = scale / (dof - 3) for dof > 3. Requires dof > 1.
Mat2 sample_inverse_wishart(double dof, const Mat2& scale, RngStream& rng);

// Index h with probability exp(log_w[h]) / sum exp(log_w). Throws NumericError
// when no entry is finite or an entry is NaN.
std::size_t sample_categorical_from_log_weights(std::span<const double> log_w, RngStream& rng);

}  // namespace typedpp
