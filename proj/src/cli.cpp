#include "typedpp/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "typedpp/experiment.hpp"
#include "typedpp/io.hpp"
#include "typedpp/simulate.hpp"

namespace typedpp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json component_json(const BvnComponent& c)
{
    return {{"mean", {c.mean[0], c.mean[1]}},
            {"cov", {{c.cov(0, 0), c.cov(0, 1)}, {c.cov(1, 0), c.cov(1, 1)}}}};
}

json scenario_json(const Scenario& s)
{
    json pool = json::array();
    for (const auto& c : s.pool) pool.push_back(component_json(c));
    json dens = json::object();
    for (TypeLabel k : kAllTypes) {
        const auto& pm = s.densities[type_index(k)];
        dens[type_name(k)] = {{"pool_index", pm.pool_index}, {"weights", pm.weights}};
    }
    return {{"name", s.name},
            {"type_probs",
             {{"fm", s.type_probs[type_index(TypeLabel::FemaleToMale)]}, {"none", s.type_probs[type_index(TypeLabel::None)]},
              {"mf", s.type_probs[type_index(TypeLabel::MaleToFemale)]}}},
            {"pool", pool},
            {"densities", dens},
            {"marks",
             {{"mu_link", s.marks.mu_link},
              {"mu_dir_mf", s.marks.mu_dir_mf},
              {"mu_dir_fm", s.marks.mu_dir_fm},
              {"var_link", s.marks.var_link},
              {"var_dir", s.marks.var_dir}}},
            {"domain", {s.domain.lo, s.domain.hi}}};
}

std::string joined(const std::vector<std::string>& args)
{
    std::string out;
    for (std::size_t i = 0; i < args.size(); ++i) out += (i ? " " : "") + args[i];
    return out;
}

struct SimulateArgs {
    std::string scenario;
    std::size_t n = 0;
    std::uint64_t seed = 1;
    std::string out;
};

void run_simulate(const SimulateArgs& a, std::ostream& out)
{
    const ScenarioName name = parse_scenario_name(a.scenario);
    RngStream rng(a.seed, 0);
    const SimulatedScenario sim = generate_scenario(name, a.n, rng);
    const fs::path path(a.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_dataset_csv(path, sim.data.points);

    json truth = scenario_json(sim.scenario);
    truth["seed"] = a.seed;
    truth["n"] = a.n;
    std::vector<int> labels;
    for (TypeLabel k : sim.data.labels) labels.push_back(to_int(k));
    truth["labels"] = labels;
    truth["components"] = sim.data.components;
    fs::path sidecar = path;
    sidecar.replace_extension(".truth.json");
    write_file_atomic(sidecar, truth.dump(2) + "\n");
    out << fmt::format("wrote {} points to {} (truth in {})\n", a.n, path.string(),
                       sidecar.string());
}

struct FitArgs {
    std::string data;
    std::string config;
    std::string mode;
    std::optional<int> iters;
    std::optional<int> burnin;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void run_fit(const FitArgs& a, const std::string& command, std::ostream& out)
{
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
    if (!a.mode.empty()) cfg.mode = a.mode == "subset" ? FitMode::Subset : FitMode::Full;
    if (a.iters) cfg.mcmc.iterations = *a.iters;
    if (a.burnin) cfg.mcmc.burn_in = *a.burnin;
    if (a.seed) cfg.mcmc.seed = *a.seed;
    cfg.validate();

    Dataset ds = load_dataset_csv(a.data, cfg.hp.domain, cfg.filter_threshold, cfg.clamp_eps);
    McmcConfig mcmc = cfg.mcmc;
    if (cfg.mode == FitMode::Subset) {
        ClassifiedSubset sub = apply_fixed_type_classification(ds, cfg.subset_rule);
        if (sub.data.points.empty()) throw IoError("no points pass the subset classification rule");
        ds = std::move(sub.data);
        mcmc.freeze_types = true;
        mcmc.initial_labels = std::move(sub.labels);
    }
    const PosteriorSamples ps = run_mcmc(ds.points, cfg.hp, mcmc);

    ManifestInfo info;
    info.command = command;
    info.seed = cfg.mcmc.seed;
    info.config_hash = cfg.hash();
    info.data_source = ds.provenance.source;
    info.n_points = ds.points.size();
    const fs::path dir(a.out);
    write_posterior_outputs(ps, dir, info);
    write_file_atomic(dir / "config.txt", cfg.canonical_text());
    out << fmt::format("fit {} points ({} of {} rows kept), {} draws written to {}\n",
                       ds.points.size(), ds.provenance.rows_kept, ds.provenance.rows_raw,
                       ps.draws.size(), dir.string());
    for (const auto& row : type_proportion_summary(ps, ds.points.size())) {
        out << fmt::format("  {:>4}  {}  {}\n", type_name(row.type), row.format_proportion(),
                           row.format_count());
    }
}

struct SummarizeArgs {
    std::string posterior;
    double hdi_mass = 0.5;
    double bands = 3.0;
    double grid_step = 0.1;
    double surface_step = 0.25;
    std::string out;
};

void run_summarize(const SummarizeArgs& a, std::ostream& out)
{
    const PosteriorSamples ps = read_posterior_outputs(a.posterior);
    SummaryOptions opts;
    opts.hdi_mass = a.hdi_mass;
    opts.band_width = a.bands;
    opts.grid_step = a.grid_step;
    opts.surface_step = a.surface_step;
    const fs::path cfg_path = fs::path(a.posterior) / "config.txt";
    if (fs::exists(cfg_path)) opts.domain = load_run_config(cfg_path).hp.domain;
    write_posterior_summaries(ps, a.out, opts);
    out << fmt::format("summarised {} draws into {}\n", ps.draws.size(), a.out);
}

struct ReplicateArgs {
    std::string scenario;
    std::size_t n = 0;
    std::size_t reps = 0;
    std::uint64_t seed = 1;
    int iters = 3000;
    int burnin = 1000;
    unsigned threads = 0;
    std::string precision = "stick-breaking";
    std::string out;
};

void run_replicate_cmd(const ReplicateArgs& a, const std::string& command, std::ostream& out)
{
    ReplicatePlan plan;
    plan.scenario = parse_scenario_name(a.scenario);
    plan.n = a.n;
    plan.reps = a.reps;
    plan.seed = a.seed;
    plan.mcmc.iterations = a.iters;
    plan.mcmc.burn_in = a.burnin;
    plan.mcmc.precision_update = a.precision == "escobar-west" ? PrecisionUpdate::EscobarWest
                                                               : PrecisionUpdate::StickBreaking;
    plan.mcmc.validate();
    plan.threads = a.threads > 0 ? a.threads : std::max(1u, std::thread::hardware_concurrency());
    const Scenario truth = make_scenario(plan.scenario);
    const double mf = truth.type_probs[type_index(TypeLabel::MaleToFemale)];
    const double target = mf / (mf + truth.type_probs[type_index(TypeLabel::FemaleToMale)]);

    const auto results = run_replicates(plan);

    std::string csv =
        "replicate,male_fraction_mean,male_fraction_lo,male_fraction_hi,p_fm,p_none,p_mf,"
        "younger_men_weight,older_men_weight\n";
    std::size_t within = 0;
    std::size_t covered = 0;
    for (const auto& r : results) {
        within += std::abs(r.male_fraction.mean - target) <= 0.05 ? 1 : 0;
        covered += r.male_fraction.ci95.contains(target) ? 1 : 0;
        csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.replicate, r.male_fraction.mean,
                           r.male_fraction.ci95.lo, r.male_fraction.ci95.hi, r.mean_type_probs[0],
                           r.mean_type_probs[1], r.mean_type_probs[2], r.younger_men.mean,
                           r.older_men.mean);
    }
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_file_atomic(dir / "replicates.csv", csv);
    json summary = {{"scenario", scenario_cli_name(plan.scenario)},
                    {"n", plan.n},
                    {"reps", plan.reps},
                    {"seed", plan.seed},
                    {"iterations", plan.mcmc.iterations},
                    {"burn_in", plan.mcmc.burn_in},
                    {"true_male_fraction", target},
                    {"within_0.05", within},
                    {"ci95_covers_truth", covered},
                    {"truth", scenario_json(truth)}};
    write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
    json manifest = {{"software", "typedpp"},
                     {"version", kSoftwareVersion},
                     {"command", command},
                     {"seed", plan.seed},
                     {"files", {"replicates.csv", "summary.json"}}};
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    out << fmt::format("{} of {} replicates within 0.05 of {}; 95% intervals cover it in {}\n",
                       within, plan.reps, target, covered);
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Typed marked point process fits for paired ages"};
    app.name(args.empty() ? "typedpp" : fs::path(args.front()).filename().string());
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Draw a synthetic dataset from a scenario");
    sim_cmd->add_option("--scenario", sim.scenario, "mf5050, mf6040, same-age or discordant-age")->required();
    sim_cmd->add_option("--n", sim.n, "Number of pairs")->required()->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", sim.seed, "Random seed");
    sim_cmd->add_option("--out", sim.out, "Output CSV path")->required();

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Run the Gibbs sampler on a dataset");
    fit_cmd->add_option("--data", fit.data, "Input CSV")->required();
    fit_cmd->add_option("--config", fit.config, "key = value configuration file");
    fit_cmd->add_option("--mode", fit.mode, "full or subset")->check(CLI::IsMember({"full", "subset"}));
    fit_cmd->add_option("--iters", fit.iters, "Total iterations")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--burnin", fit.burnin, "Burn-in iterations")->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--seed", fit.seed, "Random seed");
    fit_cmd->add_option("--out", fit.out, "Output directory")->required();

    SummarizeArgs summ;
    auto* summ_cmd = app.add_subcommand("summarize", "Compute posterior summaries from a fit");
    summ_cmd->add_option("--posterior", summ.posterior, "Directory written by fit")->required();
    summ_cmd->add_option("--hdi-mass", summ.hdi_mass, "HDI probability mass")->check(CLI::Range(0.0, 1.0));
    summ_cmd->add_option("--bands", summ.bands, "Recipient age band width in years")->check(CLI::PositiveNumber);
    summ_cmd->add_option("--grid-step", summ.grid_step, "1-D grid step in years")->check(CLI::PositiveNumber);
    summ_cmd->add_option("--surface-step", summ.surface_step, "2-D grid step in years")->check(CLI::PositiveNumber);
    summ_cmd->add_option("--out", summ.out, "Output directory")->required();

    ReplicateArgs rep;
    auto* rep_cmd = app.add_subcommand("replicate", "Simulate and refit a scenario repeatedly");
    rep_cmd->add_option("--scenario", rep.scenario, "Scenario name")->required();
    rep_cmd->add_option("--n", rep.n, "Pairs per replicate")->required()->check(CLI::PositiveNumber);
    rep_cmd->add_option("--reps", rep.reps, "Number of replicates")->required()->check(CLI::PositiveNumber);
    rep_cmd->add_option("--seed", rep.seed, "Random seed");
    rep_cmd->add_option("--iters", rep.iters, "Iterations per fit")->check(CLI::PositiveNumber);
    rep_cmd->add_option("--burnin", rep.burnin, "Burn-in per fit")->check(CLI::NonNegativeNumber);
    rep_cmd->add_option("--threads", rep.threads, "Worker threads (0 = all cores)");
    rep_cmd->add_option("--precision", rep.precision, "escobar-west or stick-breaking")
        ->check(CLI::IsMember({"escobar-west", "stick-breaking"}));
    rep_cmd->add_option("--out", rep.out, "Output directory")->required();

    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const std::string command = joined(args);
    try {
        if (*sim_cmd) run_simulate(sim, out);
        if (*fit_cmd) run_fit(fit, command, out);
        if (*summ_cmd) run_summarize(summ, out);
        if (*rep_cmd) run_replicate_cmd(rep, command, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cli_main(int argc, const char* const* argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace typedpp
