#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "typedpp/random.hpp"
#include "typedpp/types.hpp"

namespace typedpp {

enum class ScenarioName { MF5050, MF6040, SameAge, DiscordantAge };

// Parses "mf5050", "mf6040", "same-age", "discordant-age" (case-insensitive,
// '_' accepted for '-'). Throws DomainError for anything else.
ScenarioName parse_scenario_name(std::string_view name);
std::string scenario_cli_name(ScenarioName name);

// One type's spatial density as weights over a shared component pool.
struct PooledMixture {
    std::vector<std::size_t> pool_index;
    std::vector<double> weights;
};

// Ground-truth parameter set for synthetic data. Spatial densities draw their
// components from a shared pool so that a component's identity is stable
// across types.
struct Scenario {
    std::string name;
    TypeProbs type_probs{};
    std::vector<BvnComponent> pool;
    std::array<PooledMixture, kNumTypes> densities{};
    MarkParams marks{};
    AgeDomain domain{};

    TypedMixture mixture(TypeLabel k) const;
    void validate() const;
};

// Index of the pool components centred at (25,20) and (35,20).
inline constexpr std::size_t kYoungerMenComponent = 0;
inline constexpr std::size_t kOlderMenComponent = 1;

Scenario make_scenario(ScenarioName name);

struct SimulatedData {
    std::vector<DataPoint> points;
    std::vector<TypeLabel> labels;
    // Pool index of the generating component of each point.
    std::vector<std::size_t> components;
};

// Draws type, component, location and logit-normal marks per point. Locations
// falling outside the age domain are redrawn from the same component, so the
// retained pattern is that component truncated to the window.
SimulatedData generate_from_params(const Scenario& truth, std::size_t n, RngStream& rng);

struct SimulatedScenario {
    Scenario scenario;
    SimulatedData data;
};

SimulatedScenario generate_scenario(ScenarioName name, std::size_t n, RngStream& rng);

}  // namespace typedpp
