#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "typedpp/posterior.hpp"
#include "typedpp/sampler.hpp"
#include "typedpp/types.hpp"

namespace typedpp {

inline constexpr const char* kSoftwareVersion = "0.1.0";

struct Provenance {
    std::string source;
    double filter_threshold = 0.2;
    double clamp_eps = 1e-6;
    std::size_t rows_raw = 0;
    std::size_t rows_kept = 0;
};

struct Dataset {
    std::vector<DataPoint> points;
    Provenance provenance;
};

// Reads male_age,female_age,linkage_score,direction_score. Rows with
// linkage below filter_threshold are dropped, linkage is clamped to
// [clamp_eps, 1 - clamp_eps], direction scores of exactly 0 or 1 are flagged
// and left alone. Errors name the offending line and are IoError.
Dataset parse_dataset_csv(std::istream& in, const std::string& source, const AgeDomain& domain = {},
                          double filter_threshold = 0.2, double clamp_eps = 1e-6);
Dataset load_dataset_csv(const std::filesystem::path& path, const AgeDomain& domain = {},
                         double filter_threshold = 0.2, double clamp_eps = 1e-6);

// Writes points in the format load_dataset_csv reads. Values use the shortest
// representation that round-trips.
void write_dataset_csv(const std::filesystem::path& path, std::span<const DataPoint> points);

enum class SubsetRule {
    // d > 0.5 is male-to-female, otherwise female-to-male.
    Midpoint,
    // d > 0.67 is male-to-female, d < 0.33 female-to-male, others dropped.
    Strict,
};

struct ClassifiedSubset {
    Dataset data;
    std::vector<TypeLabel> labels;
};

// Keeps points with linkage > 0.6 and labels them by direction score.
ClassifiedSubset apply_fixed_type_classification(const Dataset& ds,
                                                 SubsetRule rule = SubsetRule::Midpoint);

// ---- configuration ------------------------------------------------------------

enum class FitMode { Full, Subset };

struct RunConfig {
    Hyperparams hp{};
    McmcConfig mcmc{};
    FitMode mode = FitMode::Full;
    SubsetRule subset_rule = SubsetRule::Midpoint;
    double filter_threshold = 0.2;
    double clamp_eps = 1e-6;

    void validate() const;
    // Every key in schema order, one "key = value" line each.
    std::string canonical_text() const;
    std::uint64_t hash() const;
};

// Flat "key = value" lines; '#' starts a comment. Unknown keys, repeated
// keys and unparsable values are IoError naming the line.
RunConfig parse_run_config(std::istream& in, const std::string& source);
RunConfig load_run_config(const std::filesystem::path& path);

// Keys accepted by parse_run_config, in canonical order.
const std::vector<std::string>& run_config_keys();

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// ---- outputs --------------------------------------------------------------------

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct ManifestInfo {
    std::string command;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string data_source;
    std::size_t n_points = 0;
};

// Writes traces.csv, weights_<type>.csv (weights sorted in decreasing order
// within each draw), assignments.csv, mixtures.csv, summary.json and
// manifest.json into out_dir, creating it if needed. Returns the manifest.
std::string write_posterior_outputs(const PosteriorSamples& ps, const std::filesystem::path& out_dir,
                                    const ManifestInfo& info);

// Reads back the draws written by write_posterior_outputs.
PosteriorSamples read_posterior_outputs(const std::filesystem::path& dir);

struct SummaryOptions {
    double hdi_mass = 0.5;
    double band_width = 3.0;
    double grid_step = 0.1;
    double surface_step = 0.25;
    std::size_t max_curve_draws = 100;
    std::size_t max_surface_draws = 200;
    AgeDomain domain{};
};

// Source-age curves with HDIs, band-conditional tables and flow surfaces for
// both transmission directions, plus summary.json.
void write_posterior_summaries(const PosteriorSamples& ps, const std::filesystem::path& out_dir,
                               const SummaryOptions& opts);

}  // namespace typedpp
