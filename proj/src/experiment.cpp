#include "typedpp/experiment.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

namespace typedpp {

std::vector<ScalarSummary> pool_contributions(const PosteriorSamples& ps, const Scenario& truth)
{
    std::vector<Vec2> centers;
    for (const auto& c : truth.pool) centers.push_back(c.mean);
    return center_contributions(ps, TypeLabel::MaleToFemale, centers);
}

ReplicateResult run_replicate(const ReplicatePlan& plan, std::size_t r)
{
    const auto start = std::chrono::steady_clock::now();
    RngStream data_rng(plan.seed, 4 * r);
    const SimulatedScenario sim = generate_scenario(plan.scenario, plan.n, data_rng);

    McmcConfig cfg = plan.mcmc;
    cfg.seed = plan.seed;
    cfg.stream = 4 * r + 1;
    const PosteriorSamples ps = run_mcmc(sim.data.points, plan.hp, cfg);

    ReplicateResult out;
    out.replicate = r;
    out.n_points = plan.n;
    out.male_fraction = summarize_draws(male_source_fraction_trace(ps));
    for (const auto& d : ps.draws) {
        for (std::size_t t = 0; t < kNumTypes; ++t) {
            out.mean_type_probs[t] += d.type_probs[t] / static_cast<double>(ps.draws.size());
        }
    }
    const auto contrib = pool_contributions(ps, sim.scenario);
    out.younger_men = contrib[kYoungerMenComponent];
    out.older_men = contrib[kOlderMenComponent];
    out.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::vector<ReplicateResult> run_replicates(const ReplicatePlan& plan)
{
    std::vector<ReplicateResult> out(plan.reps);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t r = next++; r < plan.reps; r = next++) {
            try {
                out[r] = run_replicate(plan, r);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(plan.threads, plan.reps));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace typedpp
