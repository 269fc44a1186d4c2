#include "typedpp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include <fmt/format.h>

namespace typedpp {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
}

double logit(double x)
{
    if (!(x > 0.0 && x < 1.0)) {
        throw DomainError(fmt::format("logit argument must lie in (0,1), got {}", x));
    }
    return std::log(x) - std::log1p(-x);
}

double expit(double y) noexcept
{
    if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
    const double e = std::exp(y);
    return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> v) noexcept
{
    if (v.empty()) return kNegInf;
    const double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

BvnKernel::BvnKernel(const BvnComponent& comp) : mean_(comp.mean)
{
    const Mat2& S = comp.cov;
    if (!is_spd(S)) {
        throw NumericError(fmt::format(
            "Cholesky failed: covariance [[{}, {}], [{}, {}]] is not positive definite", S(0, 0),
            S(0, 1), S(1, 0), S(1, 1)));
    }
    // 2x2 Cholesky S = L L^T.
    const double l00 = std::sqrt(S(0, 0));
    const double l10 = S(1, 0) / l00;
    const double r = S(1, 1) - l10 * l10;
    if (!(r > 0.0)) throw NumericError("Cholesky failed: covariance is numerically singular");
    const double l11 = std::sqrt(r);
    const double det = (l00 * l11) * (l00 * l11);
    prec00_ = S(1, 1) / det;
    prec11_ = S(0, 0) / det;
    prec01_ = -S(0, 1) / det;
    log_norm_ = -kLog2Pi - std::log(l00) - std::log(l11);
}

double bvn_log_density(const Vec2& s, const BvnComponent& comp)
{
    return BvnKernel(comp).log_density(s);
}

MixtureKernel::MixtureKernel(const TypedMixture& mix)
{
    kernels_.reserve(mix.truncation());
    log_weights_.reserve(mix.truncation());
    for (std::size_t h = 0; h < mix.truncation(); ++h) {
        kernels_.emplace_back(mix.component(h));
        const double w = mix.weights()[h];
        log_weights_.push_back(w > 0.0 ? std::log(w) : kNegInf);
    }
}

double MixtureKernel::log_terms(const Vec2& s, std::span<double> out) const noexcept
{
    double m = kNegInf;
    for (std::size_t h = 0; h < kernels_.size(); ++h) {
        const double lw = log_weights_[h];
        out[h] = lw == kNegInf ? kNegInf : lw + kernels_[h].log_density(s);
        m = std::max(m, out[h]);
    }
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (std::size_t h = 0; h < kernels_.size(); ++h) acc += std::exp(out[h] - m);
    return m + std::log(acc);
}

double MixtureKernel::log_density(const Vec2& s) const noexcept
{
    std::vector<double> terms(kernels_.size());
    return log_terms(s, terms);
}

double log_type_density(const Vec2& s, const TypedMixture& mix)
{
    return MixtureKernel(mix).log_density(s);
}

double type_density_eval(const Vec2& s, const TypedMixture& mix)
{
    return std::exp(log_type_density(s, mix));
}

double link_mean(TypeLabel k, const MarkParams& mp) noexcept
{
    return k == TypeLabel::None ? 0.0 : mp.mu_link;
}

double dir_mean(TypeLabel k, const MarkParams& mp) noexcept
{
    switch (k) {
    case TypeLabel::MaleToFemale: return mp.mu_dir_mf;
    case TypeLabel::FemaleToMale: return mp.mu_dir_fm;
    case TypeLabel::None: break;
    }
    return 0.0;
}

double normal_log_density(double x, double mean, double var) noexcept
{
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double mark_log_density(const Vec2& mark, TypeLabel k, const MarkParams& mp,
                        bool include_direction)
{
    double out = normal_log_density(logit(mark[0]), link_mean(k, mp), mp.var_link);
    if (include_direction) out += normal_log_density(logit(mark[1]), dir_mean(k, mp), mp.var_dir);
    return out;
}

double complete_data_log_likelihood(std::span<const DataPoint> data, const ModelState& state)
{
    if (data.empty()) throw DomainError("complete-data likelihood needs at least one point");
    if (state.c.size() != data.size()) {
        throw DomainError(fmt::format("{} labels for {} points", state.c.size(), data.size()));
    }
    const double n = static_cast<double>(data.size());
    double total = n * std::log(state.gamma) - state.gamma - std::lgamma(n + 1.0);

    std::array<std::optional<MixtureKernel>, kNumTypes> kernels;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const TypeLabel k = state.c[i];
        const double pk = state.prob(k);
        if (!(pk > 0.0)) return kNegInf;
        auto& kern = kernels[type_index(k)];
        if (!kern) kern.emplace(state.mixture(k));
        total += std::log(pk) + kern->log_density(data[i].location) +
                 mark_log_density(data[i].mark, k, state.marks, !data[i].extreme_direction);
    }
    return total;
}

}  // namespace typedpp
