#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "typedpp/cli.hpp"
#include "typedpp/io.hpp"

using namespace typedpp;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "typedpp");
    std::ostringstream out, err;
    Run r;
    r.code = cli_main(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("typedpp_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> lines_of(const fs::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string fmt_hash(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

nlohmann::json read_json(const fs::path& p)
{
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("usage errors exit with code 2")
{
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"frobnicate"}).code == kExitUsage);
    CHECK(run({"simulate", "--scenario", "mf6040", "--n", "10"}).code == kExitUsage);
    CHECK(run({"simulate", "--scenario", "mf6040", "--n", "10", "--out", "x.csv", "--bogus"}).code ==
          kExitUsage);
    CHECK(run({"fit", "--data", "d.csv", "--out", "o", "--mode", "partial"}).code == kExitUsage);
    CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("runtime errors exit with code 1")
{
    const Run bad_scenario = run({"simulate", "--scenario", "mf7030", "--n", "10", "--out",
                                  (fresh_dir("bad") / "x.csv").string()});
    CHECK(bad_scenario.code == kExitRuntime);
    CHECK(bad_scenario.err.find("error:") != std::string::npos);
    CHECK(run({"fit", "--data", "/nonexistent/d.csv", "--out", (fresh_dir("bad2") / "o").string()}).code ==
          kExitRuntime);
}

TEST_CASE("simulate, fit and summarize")
{
    const fs::path dir = fresh_dir("pipeline");
    const std::string data = (dir / "d.csv").string();
    const Run sim = run({"simulate", "--scenario", "mf6040", "--n", "400", "--seed", "3", "--out", data});
    REQUIRE(sim.code == kExitOk);
    CHECK(lines_of(data).size() == 401);
    const auto truth = read_json(dir / "d.truth.json");
    CHECK(truth["labels"].size() == 400);
    CHECK(truth["seed"] == 3);

    const fs::path out = dir / "run";
    const Run fit = run({"fit", "--data", data, "--iters", "3000", "--burnin", "1000", "--seed", "1",
                         "--out", out.string()});
    REQUIRE(fit.code == kExitOk);
    CHECK(fit.out.find("mf") != std::string::npos);
    CHECK(lines_of(out / "traces.csv").size() == 2001);
    const auto manifest = read_json(out / "manifest.json");
    CHECK(manifest["seed"] == 1);
    CHECK(manifest["version"] == kSoftwareVersion);
    CHECK(manifest["n_draws"] == 2000);
    const RunConfig cfg = load_run_config(out / "config.txt");
    CHECK(manifest["config_hash"] == fmt_hash(cfg.hash()));

    const fs::path summ = dir / "summ";
    const Run s = run({"summarize", "--posterior", out.string(), "--surface-step", "1", "--out", summ.string()});
    REQUIRE(s.code == kExitOk);
    CHECK(fs::exists(summ / "summary.json"));
    CHECK(fs::exists(summ / "source_age_mf.csv"));
    CHECK(fs::exists(summ / "surface_fm.csv"));
}

TEST_CASE("fit re-run from the manifest seed is identical")
{
    const fs::path dir = fresh_dir("rerun");
    const std::string data = (dir / "d.csv").string();
    REQUIRE(run({"simulate", "--scenario", "mf5050", "--n", "80", "--seed", "5", "--out", data}).code == 0);
    const std::vector<std::string> common{"fit", "--data", data, "--iters", "200", "--burnin", "50"};
    auto with = [&](const std::string& seed, const fs::path& o) {
        auto a = common;
        a.insert(a.end(), {"--seed", seed, "--out", o.string()});
        return run(a);
    };
    REQUIRE(with("11", dir / "a").code == 0);
    const auto seed = read_json(dir / "a" / "manifest.json")["seed"].get<std::uint64_t>();
    REQUIRE(with(std::to_string(seed), dir / "b").code == 0);
    for (const char* f : {"traces.csv", "mixtures.csv", "assignments.csv", "summary.json"}) {
        CHECK(lines_of(dir / "a" / f) == lines_of(dir / "b" / f));
    }
}

TEST_CASE("full and subset fits share the configuration lineage")
{
    const fs::path dir = fresh_dir("lineage");
    const std::string data = (dir / "d.csv").string();
    REQUIRE(run({"simulate", "--scenario", "mf6040", "--n", "150", "--seed", "9", "--out", data}).code == 0);
    const std::vector<std::string> common{"fit", "--data", data, "--iters", "150", "--burnin", "50", "--seed", "2"};
    auto fit = [&](const std::string& mode) {
        auto a = common;
        a.insert(a.end(), {"--mode", mode, "--out", (dir / mode).string()});
        return run(a);
    };
    REQUIRE(fit("full").code == 0);
    REQUIRE(fit("subset").code == 0);

    const auto full = lines_of(dir / "full" / "config.txt");
    const auto subset = lines_of(dir / "subset" / "config.txt");
    REQUIRE(full.size() == subset.size());
    std::vector<std::string> differing;
    for (std::size_t i = 0; i < full.size(); ++i) {
        if (full[i] != subset[i]) differing.push_back(full[i]);
    }
    REQUIRE(differing.size() == 1);
    CHECK(differing[0] == "mode = full");

    const auto mf = read_json(dir / "full" / "manifest.json");
    const auto ms = read_json(dir / "subset" / "manifest.json");
    CHECK(mf["config_hash"] == fmt_hash(load_run_config(dir / "full" / "config.txt").hash()));
    CHECK(ms["config_hash"] == fmt_hash(load_run_config(dir / "subset" / "config.txt").hash()));
    CHECK(ms["n_points"].get<std::size_t>() < mf["n_points"].get<std::size_t>());

    // Frozen labels: every subset point keeps its direction-score type.
    std::ifstream in(dir / "subset" / "assignments.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        CHECK((line.find(",0,0,1,0,1") != std::string::npos || line.find(",1,0,0,0,-1") != std::string::npos));
    }
}

TEST_CASE("replicate writes a summary")
{
    const fs::path dir = fresh_dir("replicate");
    const Run r = run({"replicate", "--scenario", "mf6040", "--n", "60", "--reps", "2", "--iters", "120",
                       "--burnin", "20", "--threads", "1", "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(lines_of(dir / "replicates.csv").size() == 3);
    CHECK(read_json(dir / "summary.json")["reps"] == 2);
}
