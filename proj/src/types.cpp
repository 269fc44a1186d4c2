#include "typedpp/types.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace typedpp {

TypeLabel type_from_int(int v)
{
    if (v < -1 || v > 1) {
        throw DomainError(fmt::format("type label must be -1, 0 or 1, got {}", v));
    }
    return static_cast<TypeLabel>(v);
}

const char* type_name(TypeLabel k) noexcept
{
    switch (k) {
    case TypeLabel::FemaleToMale: return "fm";
    case TypeLabel::None: return "none";
    case TypeLabel::MaleToFemale: return "mf";
    }
    return "?";
}

bool is_spd(const Mat2& cov) noexcept
{
    if (!cov.allFinite()) return false;
    const double asym = std::abs(cov(0, 1) - cov(1, 0));
    const double scale = std::abs(cov(0, 1)) + std::abs(cov(1, 0));
    if (asym > 1e-12 * std::max(1.0, scale)) return false;
    return cov(0, 0) > 0.0 && cov.determinant() > 0.0;
}

TypedMixture TypedMixture::from_sticks(std::vector<double> sticks,
                                       std::vector<BvnComponent> components,
                                       double alpha)
{
    if (components.empty()) throw DomainError("mixture needs at least one component");
    if (sticks.size() != components.size()) {
        throw DomainError(fmt::format("{} sticks for {} components", sticks.size(),
                                      components.size()));
    }
    TypedMixture mix;
    mix.components_ = std::move(components);
    mix.set_alpha(alpha);
    mix.set_sticks(std::move(sticks));
    return mix;
}

TypedMixture TypedMixture::from_weights(std::span<const double> weights,
                                        std::vector<BvnComponent> components,
                                        double alpha)
{
    if (weights.size() != components.size()) {
        throw DomainError(fmt::format("{} weights for {} components", weights.size(),
                                      components.size()));
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(std::abs(total - 1.0) < 1e-9)) {
        throw DomainError(fmt::format("mixture weights sum to {}, expected 1", total));
    }
    std::vector<double> sticks(weights.size(), 1.0);
    double remaining = 1.0;
    for (std::size_t h = 0; h + 1 < weights.size(); ++h) {
        if (weights[h] < 0.0) throw DomainError("negative mixture weight");
        sticks[h] = remaining > 0.0 ? std::min(1.0, weights[h] / remaining) : 1.0;
        remaining -= weights[h];
    }
    return from_sticks(std::move(sticks), std::move(components), alpha);
}

void TypedMixture::set_sticks(std::vector<double> sticks)
{
    if (sticks.size() != components_.size()) {
        throw DomainError("stick count does not match truncation level");
    }
    for (double v : sticks) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError(fmt::format("stick {} outside [0,1]", v));
    }
    sticks.back() = 1.0;
    sticks_ = std::move(sticks);
    recompute_weights();
}

void TypedMixture::set_component(std::size_t h, BvnComponent comp)
{
    components_.at(h) = std::move(comp);
}

void TypedMixture::set_alpha(double alpha)
{
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw DomainError(fmt::format("DP precision must be positive, got {}", alpha));
    }
    alpha_ = alpha;
}

void TypedMixture::permute(std::span<const std::size_t> perm)
{
    if (perm.size() != components_.size()) throw DomainError("permutation size mismatch");
    std::vector<double> w(perm.size());
    std::vector<BvnComponent> comps(perm.size());
    for (std::size_t h = 0; h < perm.size(); ++h) {
        w[h] = weights_.at(perm[h]);
        comps[h] = components_.at(perm[h]);
    }
    *this = from_weights(w, std::move(comps), alpha_);
}

void TypedMixture::recompute_weights()
{
    weights_.assign(sticks_.size(), 0.0);
    double remaining = 1.0;
    for (std::size_t h = 0; h < sticks_.size(); ++h) {
        weights_[h] = sticks_[h] * remaining;
        remaining *= 1.0 - sticks_[h];
    }
}

void MarkParams::validate() const
{
    if (!(mu_link > 0.0)) throw DomainError(fmt::format("mu_link must be > 0, got {}", mu_link));
    if (!(mu_dir_mf > 0.0)) throw DomainError(fmt::format("mu_d must be > 0, got {}", mu_dir_mf));
    if (!(mu_dir_fm < 0.0)) throw DomainError(fmt::format("mu_-d must be < 0, got {}", mu_dir_fm));
    if (!(var_link > 0.0) || !std::isfinite(var_link)) throw DomainError("var_link must be > 0");
    if (!(var_dir > 0.0) || !std::isfinite(var_dir)) throw DomainError("var_dir must be > 0");
}

void Hyperparams::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw DomainError(fmt::format("hyperparameter {} must be positive, got {}", name, v));
        }
    };
    positive(a0, "a0");
    positive(b0, "b0");
    positive(nu0, "nu0");
    positive(sigma0_sq, "sigma0_sq");
    for (double qk : q) positive(qk, "q");
    positive(nu, "nu");
    positive(a, "a");
    positive(b, "b");
    if (nu <= 1.0) throw DomainError("inverse-Wishart degrees of freedom nu must exceed 1");
    if (!is_spd(Sigma0)) throw DomainError("Sigma0 must be symmetric positive definite");
    if (!is_spd(S0)) throw DomainError("S0 must be symmetric positive definite");
    if (!theta0.allFinite()) throw DomainError("theta0 must be finite");
    if (H < 2) throw DomainError("truncation level H must be at least 2");
    if (!(domain.lo < domain.hi)) throw DomainError("age domain must satisfy lo < hi");
}

void ModelState::validate() const
{
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw NumericError(fmt::format("gamma = {} is not positive", gamma));
    }
    double total = 0.0;
    for (double pk : type_probs) {
        if (!(pk >= 0.0 && pk <= 1.0)) throw NumericError("type probability outside [0,1]");
        total += pk;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw NumericError(fmt::format("type probabilities sum to {}", total));
    }
    for (const auto& mix : mixtures) {
        double wsum = 0.0;
        for (double w : mix.weights()) {
            if (!(w >= 0.0)) throw NumericError("negative component weight");
            wsum += w;
        }
        if (std::abs(wsum - 1.0) > 1e-12) {
            throw NumericError(fmt::format("component weights sum to {}", wsum));
        }
        for (const auto& comp : mix.components()) {
            if (!comp.mean.allFinite()) throw NumericError("non-finite component mean");
            if (!is_spd(comp.cov)) throw NumericError("component covariance is not SPD");
        }
    }
    try {
        marks.validate();
    } catch (const DomainError& e) {
        throw NumericError(e.what());
    }
    if (c.size() != z.size()) throw NumericError("label and component index counts differ");
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (z[i] >= mixture(c[i]).truncation()) {
            throw NumericError(fmt::format("point {} has component index {} beyond truncation", i,
                                           z[i]));
        }
    }
}

}  // namespace typedpp
