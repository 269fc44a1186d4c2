#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "typedpp/random.hpp"
#include "typedpp/types.hpp"

namespace typedpp {

// How the per-type DP precision is refreshed.
enum class PrecisionUpdate {
    // Exact conditional under the truncated stick-breaking prior:
    // alpha | v ~ Gamma(a + H - 1, b - sum_{h<H} log(1 - v_h)).
    StickBreaking,
    // Escobar-West auxiliary-variable step, conditioned on the number of
    // occupied components. Not exact under truncation.
    EscobarWest,
};

// Which points inform the mark variances.
enum class VarianceResiduals {
    // Every point: unlinked pairs are centred at zero with the same variances,
    // so this is the exact full conditional of the mark model.
    AllPoints,
    // Only points with a nonzero type, about their type means.
    LinkedOnly,
};

struct McmcConfig {
    int iterations = 3000;
    int burn_in = 1000;
    int thin = 1;
    std::uint64_t seed = 1;
    // Chain randomness uses (seed, stream); the kept-sample gamma draws use
    // (seed, stream + 1). Replicates pick disjoint stream ranges.
    std::uint64_t stream = 0;
    bool fix_mark_means = false;
    double fixed_mu_d = 1.5;
    double fixed_mu_neg_d = -1.5;
    // Also hold mu_link fixed when set.
    std::optional<double> fixed_mu_l;
    PrecisionUpdate precision_update = PrecisionUpdate::StickBreaking;
    VarianceResiduals variance_residuals = VarianceResiduals::AllPoints;
    // Keep the initial labels for the whole run (subset analysis).
    bool freeze_types = false;
    std::vector<TypeLabel> initial_labels;

    void validate() const;
    std::size_t kept() const noexcept
    {
        return static_cast<std::size_t>((iterations - burn_in) / thin);
    }
};

struct PosteriorSamples {
    std::vector<ModelState> draws;
    // Per point, fraction of kept iterations assigned to each type
    // (indexed by type_index).
    std::vector<TypeProbs> assignment_freq;
    std::size_t n_points = 0;

    std::size_t size() const noexcept { return draws.size(); }
};

// ---- individual Gibbs steps -------------------------------------------------

// gamma | N ~ Gamma(a0 + N, b0 + 1), shape-rate.
double sample_gamma_scale(std::size_t n, const Hyperparams& hp, RngStream& rng);

// Mark means on their half-lines, then the two variances.
// Points with an extreme direction score contribute no direction residual.
MarkParams update_mark_params(std::span<const DataPoint> data, std::span<const TypeLabel> c,
                              const MarkParams& mp, const Hyperparams& hp, RngStream& rng,
                              VarianceResiduals residuals = VarianceResiduals::AllPoints);

// Type probabilities: p | c ~ Dirichlet(q + counts).
TypeProbs update_type_probs(std::span<const TypeLabel> c, const Hyperparams& hp, RngStream& rng);

struct LatentDraw {
    std::vector<TypeLabel> c;
    std::vector<std::uint32_t> z;
};

// Unnormalised log full-conditional weights of c_i over the three types,
// indexed by type_index. Extreme-direction points omit the direction factor.
std::array<double, kNumTypes> type_log_weights(const DataPoint& point, const ModelState& state);

// Draws every c_i from p_k f_k(s_i) phi_k(x_i), then z_i from the
// chosen type's component conditional so that (c_i, z_i) is a blocked draw.
// Extreme-direction points that draw a nonzero type are sent to +1 when d = 1
// and -1 when d = 0.
LatentDraw update_type_indicators(std::span<const DataPoint> data, const ModelState& state,
                                  RngStream& rng);

// Stick weights: v_h ~ Beta(1 + m_h, alpha + sum_{l>h} m_l), v_H = 1.
TypedMixture update_stick_breaking_weights(const TypedMixture& mix,
                                           std::span<const std::size_t> counts, RngStream& rng);

// pi / (1 - pi) of the Escobar-West two-Gamma mixture.
double escobar_west_odds(double eta, std::size_t occupied, std::size_t n, double a, double b);

// DP precision, Escobar-West form. With n = 0 redraws from the prior.
double update_dp_precision(double alpha, std::size_t occupied, std::size_t n,
                           const Hyperparams& hp, RngStream& rng);

// DP precision, exact truncated stick-breaking conditional given sticks.
double update_dp_precision_sticks(std::span<const double> sticks, const Hyperparams& hp,
                                  RngStream& rng);

// Component indicators: z_i proportional to w_h dBVN(s_i; theta_h, Sigma_h).
std::vector<std::uint32_t> update_component_indicators(std::span<const Vec2> points,
                                                       const TypedMixture& mix, RngStream& rng);

// Component parameters: theta | Sigma, then Sigma | theta, from the points assigned
// to one component. An empty set draws both from the prior.
BvnComponent update_component_params(std::span<const Vec2> points, const BvnComponent& comp,
                                     const Hyperparams& hp, RngStream& rng);

// ---- the chain ---------------------------------------------------------------

// Owns the chain state and performs full Gibbs sweeps. run_mcmc() is the
// usual entry point; the class is exposed for diagnostics that need to
// inspect or perturb the state between sweeps.
class GibbsSampler {
public:
    GibbsSampler(std::span<const DataPoint> data, Hyperparams hp, McmcConfig cfg);

    // Random start: mark means near the averages of the positive and negative
    // mark logits, labels drawn from the mark-only conditional with equal type
    // probabilities (or cfg.initial_labels), p drawn given those labels, other
    // parameters from the priors. Each type then anchors
    // its components at up to H random member points, allocates points to
    // the nearest anchor, and refreshes sticks and component parameters once.
    void initialize();

    // One iteration in the order marks, labels, type probabilities, then per
    // type precision, sticks, component indicators, component parameters.
    void sweep();

    const ModelState& state() const noexcept { return state_; }
    ModelState& mutable_state() noexcept { return state_; }
    RngStream& rng() noexcept { return rng_; }

    // Replaces the data (used by joint-distribution tests that regenerate it).
    void set_data(std::span<const DataPoint> data);

private:
    void update_mixture(TypeLabel k);

    std::span<const DataPoint> data_;
    Hyperparams hp_;
    McmcConfig cfg_;
    RngStream rng_;
    ModelState state_;
};

// Full run: initialise, burn in, keep every thin-th state, draw one gamma per
// kept state from an independent stream, accumulate assignment frequencies.
// Throws NumericError naming the iteration if a parameter becomes non-finite.
PosteriorSamples run_mcmc(std::span<const DataPoint> data, const Hyperparams& hp,
                          const McmcConfig& cfg);

}  // namespace typedpp
