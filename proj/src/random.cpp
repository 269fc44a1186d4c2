#include "typedpp/random.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace typedpp {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
    : seed_(seed), stream_id_(stream_id)
{
}

std::array<std::uint32_t, 4> RngStream::philox4x32(std::array<std::uint32_t, 4> ctr,
                                                   std::array<std::uint32_t, 2> key) noexcept
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

void RngStream::refill() noexcept
{
    const std::array<std::uint32_t, 4> ctr{
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                           static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = philox4x32(ctr, key);
    ++block_;
    buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buffered_ = 2;
}

RngStream::result_type RngStream::operator()() noexcept
{
    if (buffered_ == 0) refill();
    return buffer_[2 - buffered_--];
}

double RngStream::uniform() noexcept
{
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::standard_normal() noexcept
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    // Marsaglia polar method.
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_normal_ = v * f;
    has_spare_ = true;
    return u * f;
}

double sample_normal(double mean, double var, RngStream& rng)
{
    return mean + std::sqrt(var) * rng.standard_normal();
}

double sample_log_gamma(double shape, RngStream& rng)
{
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        throw DomainError(fmt::format("gamma shape must be positive, got {}", shape));
    }
    if (shape < 1.0) {
        // G(a) = G(a + 1) * U^{1/a}, kept in log space.
        return sample_log_gamma(shape + 1.0, rng) + std::log(rng.uniform()) / shape;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.standard_normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return std::log(d * v);
    }
}

double sample_gamma(double shape, double rate, RngStream& rng)
{
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw DomainError(fmt::format("gamma rate must be positive, got {}", rate));
    }
    return std::exp(sample_log_gamma(shape, rng)) / rate;
}

double sample_beta(double a, double b, RngStream& rng)
{
    const double lx = sample_log_gamma(a, rng);
    const double ly = sample_log_gamma(b, rng);
    // x / (x + y) = 1 / (1 + exp(ly - lx))
    return 1.0 / (1.0 + std::exp(ly - lx));
}

double sample_inverse_gamma(double shape, double scale, RngStream& rng)
{
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw DomainError(fmt::format("inverse-gamma scale must be positive, got {}", scale));
    }
    return scale * std::exp(-sample_log_gamma(shape, rng));
}

std::array<double, kNumTypes> sample_dirichlet(const std::array<double, kNumTypes>& conc,
                                               RngStream& rng)
{
    std::array<double, kNumTypes> logs{};
    for (std::size_t k = 0; k < kNumTypes; ++k) logs[k] = sample_log_gamma(conc[k], rng);
    const double m = *std::max_element(logs.begin(), logs.end());
    std::array<double, kNumTypes> out{};
    double total = 0.0;
    for (std::size_t k = 0; k < kNumTypes; ++k) {
        out[k] = std::exp(logs[k] - m);
        total += out[k];
    }
    for (double& p : out) p /= total;
    return out;
}

Vec2 sample_bvn(const Vec2& mean, const Mat2& cov, RngStream& rng)
{
    if (!is_spd(cov)) throw NumericError("BVN covariance is not positive definite");
    const double l00 = std::sqrt(cov(0, 0));
    const double l10 = cov(1, 0) / l00;
    const double l11 = std::sqrt(cov(1, 1) - l10 * l10);
    const double z0 = rng.standard_normal();
    const double z1 = rng.standard_normal();
    return Vec2(mean[0] + l00 * z0, mean[1] + l10 * z0 + l11 * z1);
}

double sample_half_line_truncated_normal(double mu, double var, HalfLine side, RngStream& rng)
{
    if (!(var > 0.0) || !std::isfinite(var) || !std::isfinite(mu)) {
        throw DomainError(fmt::format("truncated normal needs finite mu and var > 0 (mu={}, var={})",
                                      mu, var));
    }
    // Reduce to X > 0 with X ~ N(m, sd^2).
    const double m = side == HalfLine::Positive ? mu : -mu;
    const double sd = std::sqrt(var);
    const double a = -m / sd;  // standardised lower bound
    double x;
    if (a <= 0.0) {
        do {
            x = m + sd * rng.standard_normal();
        } while (!(x > 0.0));
    } else {
        // Robert (1995): translated exponential proposal with optimal rate.
        const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
        double excess;
        for (;;) {
            excess = -std::log(rng.uniform()) / lambda;
            const double zz = a + excess - lambda;
            if (std::log(rng.uniform()) <= -0.5 * zz * zz) break;
        }
        x = sd * excess;
    }
    return side == HalfLine::Positive ? x : -x;
}

Mat2 sample_inverse_wishart(double dof, const Mat2& scale, RngStream& rng)
{
    if (!(dof > 1.0)) {
        throw DomainError(fmt::format("inverse-Wishart dof must exceed 1, got {}", dof));
    }
    if (!is_spd(scale)) throw NumericError("inverse-Wishart scale is not positive definite");
    // Sigma^{-1} ~ Wishart(dof, scale^{-1}) = (L A)(L A)^T with L = chol(scale^{-1}).
    const Mat2 scale_inv = scale.inverse();
    const Eigen::LLT<Mat2> llt(0.5 * (scale_inv + scale_inv.transpose()));
    if (llt.info() != Eigen::Success) throw NumericError("Cholesky of inverse scale failed");
    // A draw that is singular in double precision (a chi-square near zero) is
    // unusable downstream and is redrawn; at dof 2 this happens about once in
    // 2e7 draws.
    constexpr int kMaxRedraws = 64;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        Mat2 A = Mat2::Zero();
        A(0, 0) = std::sqrt(sample_gamma(0.5 * dof, 0.5, rng));
        A(1, 1) = std::sqrt(sample_gamma(0.5 * (dof - 1.0), 0.5, rng));
        A(1, 0) = rng.standard_normal();
        const Mat2 LA = llt.matrixL() * A;
        const Mat2 LA_inv = LA.inverse();
        Mat2 out = LA_inv.transpose() * LA_inv;
        out(0, 1) = out(1, 0) = 0.5 * (out(0, 1) + out(1, 0));
        if (is_spd(out)) return out;
    }
    throw NumericError("inverse-Wishart draw is not positive definite");
}

std::size_t sample_categorical_from_log_weights(std::span<const double> log_w, RngStream& rng)
{
    if (log_w.empty()) throw NumericError("categorical draw over an empty support");
    double m = -std::numeric_limits<double>::infinity();
    for (double v : log_w) {
        if (std::isnan(v)) throw NumericError("NaN log-weight in categorical draw");
        m = std::max(m, v);
    }
    if (!std::isfinite(m)) {
        throw NumericError(m > 0 ? "infinite log-weight in categorical draw"
                                 : "all categorical log-weights are -inf");
    }
    double total = 0.0;
    for (double v : log_w) total += std::exp(v - m);
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t h = 0; h < log_w.size(); ++h) {
        const double w = std::exp(log_w[h] - m);
        if (w > 0.0) last_positive = h;
        acc += w;
        if (target < acc) return h;
    }
    return last_positive;
}

}  // namespace typedpp
