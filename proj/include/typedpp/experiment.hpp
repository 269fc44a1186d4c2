#pragma once

#include <cstdint>
#include <vector>

#include "typedpp/posterior.hpp"
#include "typedpp/sampler.hpp"
#include "typedpp/simulate.hpp"

namespace typedpp {

// Posterior summary of one simulated replicate fit.
struct ReplicateResult {
    std::size_t replicate = 0;
    std::size_t n_points = 0;
    ScalarSummary male_fraction{};
    TypeProbs mean_type_probs{};
    // Attributed male-to-female weight of the younger-men and older-men
    // pool components.
    ScalarSummary younger_men{};
    ScalarSummary older_men{};
    double seconds = 0.0;
};

struct ReplicatePlan {
    ScenarioName scenario = ScenarioName::MF6040;
    std::size_t n = 400;
    std::size_t reps = 20;
    std::uint64_t seed = 1;
    Hyperparams hp{};
    // iterations, burn_in, thin and the precision update are taken from here;
    // seed and stream are set per replicate.
    McmcConfig mcmc{};
    unsigned threads = 1;
};

// Replicate r simulates its data on stream 4r and runs its chain on streams
// 4r + 1 and 4r + 2, so results do not depend on the thread count.
ReplicateResult run_replicate(const ReplicatePlan& plan, std::size_t r);

// Runs every replicate, in parallel when plan.threads > 1. Results are in
// replicate order.
std::vector<ReplicateResult> run_replicates(const ReplicatePlan& plan);

// Male-to-female mass of the pool component for each pool centre.
std::vector<ScalarSummary> pool_contributions(const PosteriorSamples& ps, const Scenario& truth);

}  // namespace typedpp
