#pragma once

#include <limits>
#include <span>

#include "typedpp/types.hpp"

namespace typedpp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(x / (1 - x)); throws DomainError unless 0 < x < 1.
double logit(double x);
double expit(double y) noexcept;

// log(sum(exp(v))) without overflow; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> v) noexcept;

// Cached evaluation of one bivariate normal log-density. Construction does the
// Cholesky factorisation once and throws NumericError for a non-SPD covariance.
class BvnKernel {
public:
    explicit BvnKernel(const BvnComponent& comp);

    double log_density(const Vec2& s) const noexcept
    {
        const double dx = s[0] - mean_[0];
        const double dy = s[1] - mean_[1];
        const double quad = prec00_ * dx * dx + 2.0 * prec01_ * dx * dy + prec11_ * dy * dy;
        return log_norm_ - 0.5 * quad;
    }

private:
    Vec2 mean_;
    double prec00_, prec01_, prec11_;
    double log_norm_;
};

double bvn_log_density(const Vec2& s, const BvnComponent& comp);

// Per-component terms log w_h + log dBVN, precomputed for a whole mixture.
class MixtureKernel {
public:
    explicit MixtureKernel(const TypedMixture& mix);

    std::size_t size() const noexcept { return kernels_.size(); }

    // Fills out[h] = log w_h + log dBVN(s; h) and returns log f(s).
    double log_terms(const Vec2& s, std::span<double> out) const noexcept;
    double log_density(const Vec2& s) const noexcept;

private:
    std::vector<BvnKernel> kernels_;
    std::vector<double> log_weights_;
};

// log f_k(s); components with zero weight contribute exactly nothing.
double log_type_density(const Vec2& s, const TypedMixture& mix);
double type_density_eval(const Vec2& s, const TypedMixture& mix);

// Means of the logit-normal mark model for type k.
double link_mean(TypeLabel k, const MarkParams& mp) noexcept;
double dir_mean(TypeLabel k, const MarkParams& mp) noexcept;

double normal_log_density(double x, double mean, double var) noexcept;

// log phi_k(x). With include_direction = false only the linkage factor is
// returned, which is how points with an extreme direction score are scored.
double mark_log_density(const Vec2& mark, TypeLabel k, const MarkParams& mp,
                        bool include_direction = true);

// Complete-data log-likelihood of the typed marked Poisson process given the
// latent labels in state.c. Returns -inf when some assigned type has p_k = 0.
double complete_data_log_likelihood(std::span<const DataPoint> data, const ModelState& state);

}  // namespace typedpp
