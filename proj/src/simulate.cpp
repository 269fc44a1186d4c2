#include "typedpp/simulate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "typedpp/model.hpp"

namespace typedpp {

ScenarioName parse_scenario_name(std::string_view name)
{
    std::string key;
    for (char ch : name) {
        if (ch == '_') ch = '-';
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    if (key == "mf5050" || key == "mf-50-50") return ScenarioName::MF5050;
    if (key == "mf6040" || key == "mf-60-40") return ScenarioName::MF6040;
    if (key == "same-age") return ScenarioName::SameAge;
    if (key == "discordant-age") return ScenarioName::DiscordantAge;
    throw DomainError(fmt::format(
        "unknown scenario '{}' (expected mf5050, mf6040, same-age or discordant-age)", name));
}

std::string scenario_cli_name(ScenarioName name)
{
    switch (name) {
    case ScenarioName::MF5050: return "mf5050";
    case ScenarioName::MF6040: return "mf6040";
    case ScenarioName::SameAge: return "same-age";
    case ScenarioName::DiscordantAge: return "discordant-age";
    }
    return "?";
}

TypedMixture Scenario::mixture(TypeLabel k) const
{
    const PooledMixture& pm = densities[type_index(k)];
    std::vector<BvnComponent> comps;
    comps.reserve(pm.pool_index.size());
    for (std::size_t j : pm.pool_index) comps.push_back(pool.at(j));
    return TypedMixture::from_weights(pm.weights, std::move(comps), 1.0);
}

void Scenario::validate() const
{
    const double ptotal = std::accumulate(type_probs.begin(), type_probs.end(), 0.0);
    if (std::abs(ptotal - 1.0) > 1e-12) throw DomainError("scenario type probabilities");
    for (const auto& pm : densities) {
        if (pm.pool_index.empty() || pm.pool_index.size() != pm.weights.size()) {
            throw DomainError("scenario density is malformed");
        }
        const double w = std::accumulate(pm.weights.begin(), pm.weights.end(), 0.0);
        if (std::abs(w - 1.0) > 1e-12) throw DomainError("scenario weights do not sum to 1");
        for (std::size_t j : pm.pool_index) {
            if (j >= pool.size()) throw DomainError("scenario pool index out of range");
        }
    }
    for (const auto& comp : pool) {
        if (!is_spd(comp.cov)) throw DomainError("scenario covariance is not SPD");
    }
    marks.validate();
}

namespace {

BvnComponent bvn(double mx, double my, double vx, double cxy, double vy)
{
    BvnComponent c;
    c.mean = Vec2(mx, my);
    c.cov << vx, cxy, cxy, vy;
    return c;
}

}  // namespace

Scenario make_scenario(ScenarioName name)
{
    Scenario s;
    s.name = scenario_cli_name(name);
    // Six components build the three densities. The first two are the focal
    // younger-men and older-men sources for women aged 15-24.
    s.pool = {
        bvn(25.0, 20.0, 4.0, 0.0, 4.0),     // younger men -> young women
        bvn(35.0, 20.0, 4.0, 0.0, 4.0),     // older men -> young women
        bvn(42.0, 26.0, 25.0, 5.0, 16.0),   // remaining male sources
        bvn(24.0, 28.0, 9.0, 4.0, 9.0),     // women -> men of similar age
        bvn(34.0, 34.0, 16.0, 8.0, 16.0),   // women -> men in their thirties
        bvn(33.0, 30.0, 64.0, 24.0, 64.0),  // broad background of unlinked pairs
    };

    const bool discordant = name == ScenarioName::DiscordantAge;
    s.densities[type_index(TypeLabel::MaleToFemale)] = {
        {0, 1, 2}, {discordant ? 0.3 : 0.6, discordant ? 0.6 : 0.3, 0.1}};
    s.densities[type_index(TypeLabel::FemaleToMale)] = {{3, 4}, {0.6, 0.4}};
    s.densities[type_index(TypeLabel::None)] = {{5}, {1.0}};

    // Order (p_-1, p_0, p_1).
    if (name == ScenarioName::MF5050) {
        s.type_probs = {0.375, 0.25, 0.375};
    } else {
        s.type_probs = {0.3, 0.25, 0.45};
    }

    s.marks.mu_link = 2.0;
    s.marks.mu_dir_mf = 1.5;
    s.marks.mu_dir_fm = -1.5;
    s.marks.var_link = 1.0;
    s.marks.var_dir = 1.0;
    s.validate();
    return s;
}

SimulatedData generate_from_params(const Scenario& truth, std::size_t n, RngStream& rng)
{
    truth.validate();
    if (n == 0) throw DomainError("simulation needs at least one point");

    std::array<double, kNumTypes> log_p{};
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        log_p[t] = truth.type_probs[t] > 0.0 ? std::log(truth.type_probs[t]) : kNegInf;
    }
    std::array<std::vector<double>, kNumTypes> log_w;
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        for (double w : truth.densities[t].weights) {
            log_w[t].push_back(w > 0.0 ? std::log(w) : kNegInf);
        }
    }

    SimulatedData out;
    out.points.reserve(n);
    out.labels.reserve(n);
    out.components.reserve(n);
    constexpr int kMaxRedraws = 100000;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = sample_categorical_from_log_weights(log_p, rng);
        const TypeLabel k = type_from_index(t);
        const std::size_t j =
            truth.densities[t].pool_index[sample_categorical_from_log_weights(log_w[t], rng)];
        const BvnComponent& comp = truth.pool[j];

        DataPoint pt;
        int tries = 0;
        do {
            if (++tries > kMaxRedraws) {
                throw NumericError("simulation component has negligible mass in the age domain");
            }
            pt.location = sample_bvn(comp.mean, comp.cov, rng);
        } while (!truth.domain.contains(pt.location[0]) || !truth.domain.contains(pt.location[1]));

        const double link = sample_normal(link_mean(k, truth.marks), truth.marks.var_link, rng);
        const double dir = sample_normal(dir_mean(k, truth.marks), truth.marks.var_dir, rng);
        pt.mark = Vec2(expit(link), expit(dir));
        pt.extreme_direction = pt.mark[1] <= 0.0 || pt.mark[1] >= 1.0;

        out.points.push_back(pt);
        out.labels.push_back(k);
        out.components.push_back(j);
    }
    return out;
}

SimulatedScenario generate_scenario(ScenarioName name, std::size_t n, RngStream& rng)
{
    SimulatedScenario out{make_scenario(name), {}};
    out.data = generate_from_params(out.scenario, n, rng);
    return out;
}

}  // namespace typedpp
