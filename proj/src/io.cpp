#include "typedpp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <system_error>

#include <fmt/format.h>
#include <json.hpp>

#include "typedpp/model.hpp"

namespace typedpp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool parse_double(std::string_view s, double& out) noexcept
{
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

template <class Int>
bool parse_int(std::string_view s, Int& out) noexcept
{
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::string fmt_num(double v) { return fmt::format("{}", v); }

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    return in;
}

constexpr const char* kDataHeader[] = {"male_age", "female_age", "linkage_score",
                                       "direction_score"};

}  // namespace

// ---- datasets -----------------------------------------------------------------------

Dataset parse_dataset_csv(std::istream& in, const std::string& source, const AgeDomain& domain,
                          double filter_threshold, double clamp_eps)
{
    if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw DomainError("clamp epsilon must be in (0, 0.5)");
    Dataset ds;
    ds.provenance = {source, filter_threshold, clamp_eps, 0, 0};

    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (!have_header) {
            bool ok = cells.size() == 4;
            for (std::size_t j = 0; ok && j < 4; ++j) ok = cells[j] == kDataHeader[j];
            if (!ok) {
                throw IoError(fmt::format(
                    "{}:{}: header must be exactly male_age,female_age,linkage_score,direction_score",
                    source, line_no));
            }
            have_header = true;
            continue;
        }
        if (cells.size() != 4) {
            throw IoError(fmt::format("{}:{}: expected 4 columns, found {}", source, line_no,
                                      cells.size()));
        }
        std::array<double, 4> v{};
        for (std::size_t j = 0; j < 4; ++j) {
            if (!parse_double(cells[j], v[j])) {
                throw IoError(fmt::format("{}:{}: {} is not a finite number: '{}'", source, line_no,
                                          kDataHeader[j], cells[j]));
            }
        }
        ++ds.provenance.rows_raw;
        for (std::size_t j = 0; j < 2; ++j) {
            if (!domain.contains(v[j])) {
                throw IoError(fmt::format("{}:{}: {} {} outside [{}, {})", source, line_no,
                                          kDataHeader[j], v[j], domain.lo, domain.hi));
            }
        }
        for (std::size_t j = 2; j < 4; ++j) {
            if (!(v[j] >= 0.0 && v[j] <= 1.0)) {
                throw IoError(fmt::format("{}:{}: {} {} outside [0, 1]", source, line_no,
                                          kDataHeader[j], v[j]));
            }
        }
        if (v[2] < filter_threshold) continue;
        DataPoint pt;
        pt.location = Vec2(v[0], v[1]);
        pt.mark = Vec2(std::clamp(v[2], clamp_eps, 1.0 - clamp_eps), v[3]);
        pt.extreme_direction = v[3] == 0.0 || v[3] == 1.0;
        ds.points.push_back(pt);
    }
    if (!have_header) throw IoError(fmt::format("{}: file is empty", source));
    ds.provenance.rows_kept = ds.points.size();
    if (ds.points.empty()) {
        throw IoError(fmt::format("{}: no rows left after filtering linkage < {}", source,
                                  filter_threshold));
    }
    return ds;
}

Dataset load_dataset_csv(const fs::path& path, const AgeDomain& domain, double filter_threshold,
                         double clamp_eps)
{
    auto in = open_input(path);
    return parse_dataset_csv(in, path.string(), domain, filter_threshold, clamp_eps);
}

void write_dataset_csv(const fs::path& path, std::span<const DataPoint> points)
{
    std::string out = "male_age,female_age,linkage_score,direction_score\n";
    for (const auto& p : points) {
        out += fmt::format("{},{},{},{}\n", p.male_age(), p.female_age(), p.linkage(),
                           p.direction());
    }
    write_file_atomic(path, out);
}

ClassifiedSubset apply_fixed_type_classification(const Dataset& ds, SubsetRule rule)
{
    ClassifiedSubset out;
    out.data.provenance = ds.provenance;
    for (const auto& p : ds.points) {
        if (!(p.linkage() > 0.6)) continue;
        const double d = p.direction();
        TypeLabel k;
        if (rule == SubsetRule::Midpoint) {
            k = d > 0.5 ? TypeLabel::MaleToFemale : TypeLabel::FemaleToMale;
        } else if (d > 0.67) {
            k = TypeLabel::MaleToFemale;
        } else if (d < 0.33) {
            k = TypeLabel::FemaleToMale;
        } else {
            continue;
        }
        out.data.points.push_back(p);
        out.labels.push_back(k);
    }
    out.data.provenance.rows_kept = out.data.points.size();
    return out;
}

// ---- configuration ------------------------------------------------------------------

namespace {

struct ConfigField {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<bool(RunConfig&, std::string_view)> set;
};

ConfigField real_field(std::string key, std::function<double&(RunConfig&)> ref)
{
    return {key, [ref](const RunConfig& c) { return fmt_num(ref(const_cast<RunConfig&>(c))); },
            [ref](RunConfig& c, std::string_view v) { return parse_double(v, ref(c)); }};
}

template <class Int>
ConfigField int_field(std::string key, std::function<Int&(RunConfig&)> ref)
{
    return {key, [ref](const RunConfig& c) { return fmt::format("{}", ref(const_cast<RunConfig&>(c))); },
            [ref](RunConfig& c, std::string_view v) { return parse_int(v, ref(c)); }};
}

ConfigField bool_field(std::string key, std::function<bool&(RunConfig&)> ref)
{
    return {key,
            [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); },
            [ref](RunConfig& c, std::string_view v) {
                if (v == "true" || v == "1") {
                    ref(c) = true;
                } else if (v == "false" || v == "0") {
                    ref(c) = false;
                } else {
                    return false;
                }
                return true;
            }};
}

const std::vector<ConfigField>& config_schema()
{
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        f.push_back(real_field("a0", [](RunConfig& c) -> double& { return c.hp.a0; }));
        f.push_back(real_field("b0", [](RunConfig& c) -> double& { return c.hp.b0; }));
        f.push_back(real_field("nu0", [](RunConfig& c) -> double& { return c.hp.nu0; }));
        f.push_back(real_field("sigma0_sq", [](RunConfig& c) -> double& { return c.hp.sigma0_sq; }));
        f.push_back(real_field("q_fm", [](RunConfig& c) -> double& { return c.hp.q[0]; }));
        f.push_back(real_field("q_none", [](RunConfig& c) -> double& { return c.hp.q[1]; }));
        f.push_back(real_field("q_mf", [](RunConfig& c) -> double& { return c.hp.q[2]; }));
        f.push_back(real_field("theta0_male", [](RunConfig& c) -> double& { return c.hp.theta0[0]; }));
        f.push_back(real_field("theta0_female", [](RunConfig& c) -> double& { return c.hp.theta0[1]; }));
        f.push_back(real_field("Sigma0_11", [](RunConfig& c) -> double& { return c.hp.Sigma0(0, 0); }));
        f.push_back(real_field("Sigma0_12", [](RunConfig& c) -> double& { return c.hp.Sigma0(0, 1); }));
        f.push_back(real_field("Sigma0_22", [](RunConfig& c) -> double& { return c.hp.Sigma0(1, 1); }));
        f.push_back(real_field("nu", [](RunConfig& c) -> double& { return c.hp.nu; }));
        f.push_back(real_field("S0_11", [](RunConfig& c) -> double& { return c.hp.S0(0, 0); }));
        f.push_back(real_field("S0_12", [](RunConfig& c) -> double& { return c.hp.S0(0, 1); }));
        f.push_back(real_field("S0_22", [](RunConfig& c) -> double& { return c.hp.S0(1, 1); }));
        f.push_back(real_field("a", [](RunConfig& c) -> double& { return c.hp.a; }));
        f.push_back(real_field("b", [](RunConfig& c) -> double& { return c.hp.b; }));
        f.push_back(int_field<std::size_t>("H", [](RunConfig& c) -> std::size_t& { return c.hp.H; }));
        f.push_back(real_field("age_min", [](RunConfig& c) -> double& { return c.hp.domain.lo; }));
        f.push_back(real_field("age_max", [](RunConfig& c) -> double& { return c.hp.domain.hi; }));
        f.push_back(int_field<int>("iterations", [](RunConfig& c) -> int& { return c.mcmc.iterations; }));
        f.push_back(int_field<int>("burn_in", [](RunConfig& c) -> int& { return c.mcmc.burn_in; }));
        f.push_back(int_field<int>("thin", [](RunConfig& c) -> int& { return c.mcmc.thin; }));
        f.push_back(int_field<std::uint64_t>("seed", [](RunConfig& c) -> std::uint64_t& { return c.mcmc.seed; }));
        f.push_back(bool_field("fix_mark_means", [](RunConfig& c) -> bool& { return c.mcmc.fix_mark_means; }));
        f.push_back(real_field("fixed_mu_d", [](RunConfig& c) -> double& { return c.mcmc.fixed_mu_d; }));
        f.push_back(real_field("fixed_mu_neg_d", [](RunConfig& c) -> double& { return c.mcmc.fixed_mu_neg_d; }));
        f.push_back({"fixed_mu_l",
                     [](const RunConfig& c) {
                         return c.mcmc.fixed_mu_l ? fmt_num(*c.mcmc.fixed_mu_l) : std::string("none");
                     },
                     [](RunConfig& c, std::string_view v) {
                         if (v == "none") {
                             c.mcmc.fixed_mu_l.reset();
                             return true;
                         }
                         double x = 0.0;
                         if (!parse_double(v, x)) return false;
                         c.mcmc.fixed_mu_l = x;
                         return true;
                     }});
        f.push_back({"precision_update",
                     [](const RunConfig& c) {
                         return std::string(c.mcmc.precision_update == PrecisionUpdate::EscobarWest
                                                ? "escobar-west"
                                                : "stick-breaking");
                     },
                     [](RunConfig& c, std::string_view v) {
                         if (v == "escobar-west") {
                             c.mcmc.precision_update = PrecisionUpdate::EscobarWest;
                         } else if (v == "stick-breaking") {
                             c.mcmc.precision_update = PrecisionUpdate::StickBreaking;
                         } else {
                             return false;
                         }
                         return true;
                     }});
        f.push_back({"variance_residuals",
                     [](const RunConfig& c) {
                         return std::string(
                             c.mcmc.variance_residuals == VarianceResiduals::AllPoints ? "all"
                                                                                       : "linked");
                     },
                     [](RunConfig& c, std::string_view v) {
                         if (v == "all") {
                             c.mcmc.variance_residuals = VarianceResiduals::AllPoints;
                         } else if (v == "linked") {
                             c.mcmc.variance_residuals = VarianceResiduals::LinkedOnly;
                         } else {
                             return false;
                         }
                         return true;
                     }});
        f.push_back({"mode",
                     [](const RunConfig& c) {
                         return std::string(c.mode == FitMode::Full ? "full" : "subset");
                     },
                     [](RunConfig& c, std::string_view v) {
                         if (v == "full") {
                             c.mode = FitMode::Full;
                         } else if (v == "subset") {
                             c.mode = FitMode::Subset;
                         } else {
                             return false;
                         }
                         return true;
                     }});
        f.push_back({"subset_rule",
                     [](const RunConfig& c) {
                         return std::string(c.subset_rule == SubsetRule::Midpoint ? "midpoint" : "strict");
                     },
                     [](RunConfig& c, std::string_view v) {
                         if (v == "midpoint") {
                             c.subset_rule = SubsetRule::Midpoint;
                         } else if (v == "strict") {
                             c.subset_rule = SubsetRule::Strict;
                         } else {
                             return false;
                         }
                         return true;
                     }});
        f.push_back(real_field("filter_threshold", [](RunConfig& c) -> double& { return c.filter_threshold; }));
        f.push_back(real_field("clamp_eps", [](RunConfig& c) -> double& { return c.clamp_eps; }));
        return f;
    }();
    return fields;
}

}  // namespace

const std::vector<std::string>& run_config_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : config_schema()) k.push_back(f.key);
        return k;
    }();
    return keys;
}

void RunConfig::validate() const
{
    hp.validate();
    mcmc.validate();
    if (!(filter_threshold >= 0.0 && filter_threshold < 1.0)) {
        throw DomainError("filter_threshold must lie in [0, 1)");
    }
    if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw DomainError("clamp_eps must lie in (0, 0.5)");
}

std::string RunConfig::canonical_text() const
{
    std::string out;
    for (const auto& f : config_schema()) out += fmt::format("{} = {}\n", f.key, f.get(*this));
    return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical_text()); }

std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RunConfig parse_run_config(std::istream& in, const std::string& source)
{
    RunConfig cfg;
    std::map<std::string, std::size_t, std::less<>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) {
            body = body.substr(0, hash);
        }
        body = trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw IoError(fmt::format("{}:{}: expected 'key = value'", source, line_no));
        }
        const std::string_view key = trim(body.substr(0, eq));
        const std::string_view value = trim(body.substr(eq + 1));
        const auto& schema = config_schema();
        const auto it = std::find_if(schema.begin(), schema.end(),
                                     [&](const ConfigField& f) { return f.key == key; });
        if (it == schema.end()) {
            throw IoError(fmt::format("{}:{}: unknown key '{}'", source, line_no, key));
        }
        if (const auto prev = seen.find(key); prev != seen.end()) {
            throw IoError(fmt::format("{}:{}: key '{}' already set on line {}", source, line_no, key,
                                      prev->second));
        }
        seen.emplace(std::string(key), line_no);
        if (!it->set(cfg, value)) {
            throw IoError(fmt::format("{}:{}: invalid value '{}' for '{}'", source, line_no, value,
                                      key));
        }
    }
    cfg.hp.Sigma0(1, 0) = cfg.hp.Sigma0(0, 1);
    cfg.hp.S0(1, 0) = cfg.hp.S0(0, 1);
    try {
        cfg.validate();
    } catch (const DomainError& e) {
        throw IoError(fmt::format("{}: {}", source, e.what()));
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path)
{
    auto in = open_input(path);
    return parse_run_config(in, path.string());
}

// ---- outputs ------------------------------------------------------------------------

void write_file_atomic(const fs::path& path, std::string_view content)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError(fmt::format("write to '{}' failed", tmp.string()));
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError(fmt::format("cannot move output into '{}'", path.string()));
    }
}

namespace {

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError(fmt::format("cannot create output directory '{}'", dir.string()));
    }
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

const std::array<std::string, 13> kTraceColumns{
    "gamma",    "p_fm",     "p_none",    "p_mf",      "male_fraction", "mu_link",  "mu_dir_mf",
    "mu_dir_fm", "var_link", "var_dir",  "alpha_fm",  "alpha_none",    "alpha_mf"};

std::array<double, 13> trace_row(const ModelState& s)
{
    const double mf = s.prob(TypeLabel::MaleToFemale);
    const double fm = s.prob(TypeLabel::FemaleToMale);
    return {s.gamma,
            fm,
            s.prob(TypeLabel::None),
            mf,
            mf / (mf + fm),
            s.marks.mu_link,
            s.marks.mu_dir_mf,
            s.marks.mu_dir_fm,
            s.marks.var_link,
            s.marks.var_dir,
            s.mixture(TypeLabel::FemaleToMale).alpha(),
            s.mixture(TypeLabel::None).alpha(),
            s.mixture(TypeLabel::MaleToFemale).alpha()};
}

json interval_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

json scalar_json(const ScalarSummary& s)
{
    return {{"mean", s.mean}, {"ci95", interval_json(s.ci95)}};
}

}  // namespace

std::string write_posterior_outputs(const PosteriorSamples& ps, const fs::path& out_dir,
                                    const ManifestInfo& info)
{
    if (ps.draws.empty()) throw DomainError("no posterior draws to write");
    ensure_dir(out_dir);

    std::string traces = "draw";
    for (const auto& c : kTraceColumns) traces += "," + c;
    traces += "\n";
    std::array<std::vector<double>, kTraceColumns.size()> columns;
    for (std::size_t d = 0; d < ps.draws.size(); ++d) {
        const auto row = trace_row(ps.draws[d]);
        traces += fmt::format("{}", d);
        for (std::size_t j = 0; j < row.size(); ++j) {
            traces += "," + fmt_num(row[j]);
            columns[j].push_back(row[j]);
        }
        traces += "\n";
    }
    write_file_atomic(out_dir / "traces.csv", traces);

    for (TypeLabel k : kAllTypes) {
        const std::size_t H = ps.draws.front().mixture(k).truncation();
        std::string w = "draw";
        for (std::size_t h = 0; h < H; ++h) w += fmt::format(",w{}", h + 1);
        w += "\n";
        for (std::size_t d = 0; d < ps.draws.size(); ++d) {
            const auto ws = ps.draws[d].mixture(k).weights();
            std::vector<double> sorted(ws.begin(), ws.end());
            std::sort(sorted.begin(), sorted.end(), std::greater<>());
            w += fmt::format("{}", d);
            for (double v : sorted) w += "," + fmt_num(v);
            w += "\n";
        }
        write_file_atomic(out_dir / fmt::format("weights_{}.csv", type_name(k)), w);
    }

    std::string mixtures = "draw,type,component,weight,mean_male,mean_female,cov_mm,cov_mf,cov_ff\n";
    for (std::size_t d = 0; d < ps.draws.size(); ++d) {
        for (TypeLabel k : kAllTypes) {
            const TypedMixture& mix = ps.draws[d].mixture(k);
            for (std::size_t h = 0; h < mix.truncation(); ++h) {
                const BvnComponent& c = mix.component(h);
                mixtures += fmt::format("{},{},{},{},{},{},{},{},{}\n", d, to_int(k), h,
                                        mix.weights()[h], c.mean[0], c.mean[1], c.cov(0, 0),
                                        c.cov(0, 1), c.cov(1, 1));
            }
        }
    }
    write_file_atomic(out_dir / "mixtures.csv", mixtures);

    std::string assign = "point,p_fm,p_none,p_mf,entropy,modal\n";
    std::size_t high_entropy = 0;
    for (std::size_t i = 0; i < ps.assignment_freq.size(); ++i) {
        const TypeProbs& f = ps.assignment_freq[i];
        const EntropySummary e = classification_entropy(f);
        high_entropy += e.high ? 1 : 0;
        assign += fmt::format("{},{},{},{},{},{}\n", i, fmt_num(f[0]), fmt_num(f[1]), fmt_num(f[2]),
                              fmt_num(e.entropy), to_int(e.modal));
    }
    write_file_atomic(out_dir / "assignments.csv", assign);

    json summary;
    summary["n_points"] = ps.n_points;
    summary["n_draws"] = ps.draws.size();
    json table = json::array();
    for (const auto& row : type_proportion_summary(ps, ps.n_points)) {
        table.push_back({{"type", type_name(row.type)},
                         {"proportion", scalar_json(row.p)},
                         {"count", {{"mean", row.n_mean}, {"ci95", {row.n_lo, row.n_hi}}}},
                         {"proportion_text", row.format_proportion()},
                         {"count_text", row.format_count()}});
    }
    summary["type_proportions"] = table;
    summary["male_source_fraction"] = scalar_json(summarize_draws(male_source_fraction_trace(ps)));
    summary["high_entropy_points"] = high_entropy;
    json diag = json::object();
    if (ps.draws.size() >= 10) {
        for (std::size_t j = 0; j < kTraceColumns.size(); ++j) {
            const TraceSummary t = summarize_trace(columns[j]);
            diag[kTraceColumns[j]] = {
                {"mean", t.mean}, {"sd", t.sd}, {"ess", t.ess}, {"degenerate", t.degenerate}};
        }
    }
    summary["traces"] = diag;
    write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");

    json manifest = {{"software", "typedpp"},
                     {"version", kSoftwareVersion},
                     {"command", info.command},
                     {"seed", info.seed},
                     {"config_hash", hex64(info.config_hash)},
                     {"data", info.data_source},
                     {"n_points", info.n_points},
                     {"n_draws", ps.draws.size()},
                     {"files",
                      {"traces.csv", "weights_fm.csv", "weights_none.csv", "weights_mf.csv",
                       "mixtures.csv", "assignments.csv", "summary.json"}}};
    const std::string text = manifest.dump(2) + "\n";
    write_file_atomic(out_dir / "manifest.json", text);
    return text;
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, std::size_t columns)
{
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(fmt::format("{}: file is empty", path.string()));
    if (split_csv(line).size() != columns) {
        throw IoError(fmt::format("{}: expected {} columns in header", path.string(), columns));
    }
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != columns) {
            throw IoError(fmt::format("{}:{}: expected {} columns", path.string(), line_no, columns));
        }
        std::vector<double> row(columns);
        for (std::size_t j = 0; j < columns; ++j) {
            if (!parse_double(cells[j], row[j])) {
                throw IoError(fmt::format("{}:{}: bad number '{}'", path.string(), line_no, cells[j]));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

PosteriorSamples read_posterior_outputs(const fs::path& dir)
{
    const auto traces = read_numeric_csv(dir / "traces.csv", kTraceColumns.size() + 1);
    const auto mixtures = read_numeric_csv(dir / "mixtures.csv", 9);
    const auto assign = read_numeric_csv(dir / "assignments.csv", 6);
    if (traces.empty()) throw IoError(fmt::format("{}: no draws", dir.string()));

    PosteriorSamples ps;
    ps.n_points = assign.size();
    for (const auto& row : assign) ps.assignment_freq.push_back({row[1], row[2], row[3]});

    const std::size_t n_draws = traces.size();
    std::vector<std::array<std::vector<double>, kNumTypes>> weights(n_draws);
    std::vector<std::array<std::vector<BvnComponent>, kNumTypes>> comps(n_draws);
    for (const auto& row : mixtures) {
        const auto d = static_cast<std::size_t>(row[0]);
        if (d >= n_draws) throw IoError(fmt::format("{}: mixture draw out of range", dir.string()));
        const std::size_t t = type_index(type_from_int(static_cast<int>(row[1])));
        BvnComponent c;
        c.mean = Vec2(row[4], row[5]);
        c.cov << row[6], row[7], row[7], row[8];
        weights[d][t].push_back(row[3]);
        comps[d][t].push_back(c);
    }
    for (std::size_t d = 0; d < n_draws; ++d) {
        const auto& r = traces[d];
        ModelState s;
        s.gamma = r[1];
        s.type_probs = {r[2], r[3], r[4]};
        s.marks.mu_link = r[6];
        s.marks.mu_dir_mf = r[7];
        s.marks.mu_dir_fm = r[8];
        s.marks.var_link = r[9];
        s.marks.var_dir = r[10];
        for (std::size_t t = 0; t < kNumTypes; ++t) {
            if (comps[d][t].empty()) {
                throw IoError(fmt::format("{}: draw {} has no components for type {}", dir.string(),
                                          d, type_name(type_from_index(t))));
            }
            s.mixtures[t] = TypedMixture::from_weights(weights[d][t], std::move(comps[d][t]),
                                                       r[11 + t]);
        }
        ps.draws.push_back(std::move(s));
    }
    return ps;
}

void write_posterior_summaries(const PosteriorSamples& ps, const fs::path& out_dir,
                               const SummaryOptions& opts)
{
    if (ps.draws.empty()) throw DomainError("no posterior draws to summarise");
    ensure_dir(out_dir);
    const AgeGrid grid{opts.domain.lo, opts.domain.hi, opts.grid_step};

    json summary;
    summary["n_points"] = ps.n_points;
    summary["n_draws"] = ps.draws.size();
    summary["hdi_mass"] = opts.hdi_mass;
    summary["renormalized_in_window"] = {opts.domain.lo, opts.domain.hi};
    json table = json::array();
    for (const auto& row : type_proportion_summary(ps, ps.n_points)) {
        table.push_back({{"type", type_name(row.type)},
                         {"proportion", row.format_proportion()},
                         {"count", row.format_count()}});
    }
    summary["type_proportions"] = table;
    summary["male_source_fraction"] = scalar_json(summarize_draws(male_source_fraction_trace(ps)));

    for (TypeLabel k : {TypeLabel::MaleToFemale, TypeLabel::FemaleToMale}) {
        const std::string name = type_name(k);
        json entry;

        const SourceAgeSummary sa = source_age_summary(ps, k, grid, opts.hdi_mass, opts.max_curve_draws);
        std::string curve = "source_age,density\n";
        for (std::size_t i = 0; i < sa.mean_curve.values.size(); ++i) {
            curve += fmt::format("{},{}\n", fmt_num(grid.at(i)), fmt_num(sa.mean_curve.values[i]));
        }
        write_file_atomic(out_dir / fmt::format("source_age_{}.csv", name), curve);
        json hdi = json::array();
        for (const auto& iv : sa.mean_hdi) hdi.push_back(interval_json(iv));
        entry["source_age_hdi"] = hdi;
        json draw_hdis = json::array();
        for (const auto& set : sa.draw_hdis) {
            json one = json::array();
            for (const auto& iv : set) one.push_back(interval_json(iv));
            draw_hdis.push_back(one);
        }
        entry["source_age_hdi_per_draw"] = draw_hdis;

        const auto bands = band_conditional_table(ps, k, grid, opts.band_width, opts.max_curve_draws);
        std::string band_csv = "source_age";
        for (const auto& b : bands) band_csv += fmt::format(",band_{}_{}", fmt_num(b.band.lo), fmt_num(b.band.hi));
        band_csv += "\n";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            band_csv += fmt_num(grid.at(i));
            for (const auto& b : bands) band_csv += "," + fmt_num(b.curve.values[i]);
            band_csv += "\n";
        }
        write_file_atomic(out_dir / fmt::format("bands_{}.csv", name), band_csv);
        json band_info = json::array();
        for (const auto& b : bands) {
            band_info.push_back({{"band", interval_json(b.band)}, {"recipient_mass", b.band_mass}});
        }
        entry["bands"] = band_info;

        const SurfaceGrid2D surf =
            flow_surface_grid(ps, k, opts.domain, opts.surface_step, opts.max_surface_draws);
        std::string surf_csv = "male_age,female_age,density\n";
        for (std::size_t i = 0; i < surf.n; ++i) {
            for (std::size_t j = 0; j < surf.n; ++j) {
                surf_csv += fmt::format("{},{},{}\n", fmt_num(surf.centre(i)), fmt_num(surf.centre(j)),
                                        fmt_num(surf.value(i, j)));
            }
        }
        write_file_atomic(out_dir / fmt::format("surface_{}.csv", name), surf_csv);
        json hpr = json::array();
        for (std::size_t l = 0; l < surf.hpr_masses.size(); ++l) {
            hpr.push_back({{"mass", surf.hpr_masses[l]},
                           {"threshold", surf.hpr_thresholds[l]},
                           {"area", surf.region_area(l)}});
        }
        entry["surface_hpr"] = hpr;
        summary[name] = entry;
    }

    std::size_t high = 0;
    for (const auto& f : ps.assignment_freq) {
        const EntropySummary e = classification_entropy(f);
        high += e.high ? 1 : 0;
    }
    summary["high_entropy_points"] = high;
    write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace typedpp
