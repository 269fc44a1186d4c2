#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "typedpp/sampler.hpp"
#include "typedpp/types.hpp"

namespace typedpp {

// Equal-tailed quantile with linear interpolation between order statistics
// (the "type 7" rule). Throws DomainError for an empty sample.
double quantile(std::span<const double> sample, double prob);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

struct ScalarSummary {
    double mean = 0.0;
    Interval ci95{};
};

ScalarSummary summarize_draws(std::span<const double> draws);

struct TypeProportionRow {
    TypeLabel type = TypeLabel::None;
    ScalarSummary p{};
    // p rows scaled by N and rounded.
    long n_mean = 0;
    long n_lo = 0;
    long n_hi = 0;

    // "46.3% (39.4%, 53.1%)"
    std::string format_proportion() const;
    // "244 (207, 279)"
    std::string format_count() const;
};

// Rows ordered MaleToFemale, FemaleToMale, None.
std::vector<TypeProportionRow> type_proportion_summary(const PosteriorSamples& ps, std::size_t n);

// p_1 / (p_1 + p_-1) for every kept draw.
std::vector<double> male_source_fraction_trace(const PosteriorSamples& ps);

// ---- one-dimensional age densities --------------------------------------------

// Evenly spaced ages lo, lo + step, ..., hi (the endpoint is included so the
// trapezoid rule covers the whole window).
struct AgeGrid {
    double lo = 15.0;
    double hi = 50.0;
    double step = 0.1;

    std::size_t size() const;
    double at(std::size_t i) const noexcept { return lo + static_cast<double>(i) * step; }
};

struct DensityGrid1D {
    AgeGrid grid{};
    std::vector<double> values;

    double trapezoid_integral() const;
    // Rescales so the trapezoid integral over the window is one.
    void renormalize();
};

// Age axis of the source for a direction: male age for MaleToFemale, female
// age for FemaleToMale. Throws DomainError for None.
std::size_t source_axis(TypeLabel k);

// Closed-form source-age marginal of f_k on the grid, renormalised in window.
DensityGrid1D source_age_marginal_density(const TypedMixture& mix, TypeLabel k,
                                          const AgeGrid& grid);

// Grid-aligned union of intervals holding at least `mass` of the grid
// density, chosen by thresholding the density values. Ties go to the lower
// age. Each interval runs from its first to its last selected grid point.
std::vector<Interval> hdi_from_grid(const DensityGrid1D& dg, double mass);

// Source-age density for recipients whose age lies in [band_lo, band_hi).
// Per component, the joint density is integrated over the recipient band
// with composite 8-point Gauss-Legendre (panels no wider than the conditional
// recipient standard deviation); infinite band ends are allowed. The mixture
// sum is renormalised in window. Throws NumericError when the band carries
// no mass.
DensityGrid1D conditional_source_density(const TypedMixture& mix, TypeLabel k, double band_lo,
                                         double band_hi, const AgeGrid& grid);

// Mass of f_k with recipient age in [band_lo, band_hi).
double recipient_band_mass(const TypedMixture& mix, TypeLabel k, double band_lo, double band_hi);

// Posterior curves over the kept draws, using at most max_draws evenly
// spaced draws.
struct SourceAgeSummary {
    DensityGrid1D mean_curve;
    std::vector<Interval> mean_hdi;
    std::vector<std::vector<Interval>> draw_hdis;
};

SourceAgeSummary source_age_summary(const PosteriorSamples& ps, TypeLabel k, const AgeGrid& grid,
                                    double hdi_mass, std::size_t max_draws = 100);

struct BandCurve {
    Interval band{};
    // Posterior mean share of f_k falling in the recipient band; weighting
    // each band curve by it stacks the bands into the overall source profile.
    double band_mass = 0.0;
    DensityGrid1D curve;
};

std::vector<BandCurve> band_conditional_table(const PosteriorSamples& ps, TypeLabel k,
                                              const AgeGrid& grid, double band_width,
                                              std::size_t max_draws = 100);

// ---- flow surfaces ---------------------------------------------------------------

// Square grid of cell centres lo + (i + 1/2) step over the age window.
// values is row-major with the first (male) age as the row index.
struct SurfaceGrid2D {
    double lo = 15.0;
    double hi = 50.0;
    double step = 0.25;
    std::size_t n = 0;
    std::vector<double> values;
    // Target masses and their density thresholds, ascending in mass.
    std::vector<double> hpr_masses;
    std::vector<double> hpr_thresholds;

    double centre(std::size_t i) const noexcept
    {
        return lo + (static_cast<double>(i) + 0.5) * step;
    }
    double value(std::size_t i, std::size_t j) const { return values.at(i * n + j); }
    double total_mass() const;
    // Number of cells with density at or above the threshold for hpr_masses[level].
    std::size_t region_cells(std::size_t level) const;
    double region_area(std::size_t level) const
    {
        return static_cast<double>(region_cells(level)) * step * step;
    }
};

// Thresholds for highest-probability regions holding each target mass.
void compute_hpr(SurfaceGrid2D& grid, std::span<const double> masses);

// Pointwise posterior median of f_k over at most max_draws evenly spaced
// mixtures, renormalised in window, with 50/80/90% HPR thresholds.
SurfaceGrid2D flow_surface_grid(std::span<const TypedMixture> draws, const AgeDomain& domain,
                                double resolution, std::size_t max_draws = 200);

SurfaceGrid2D flow_surface_grid(const PosteriorSamples& ps, TypeLabel k, const AgeDomain& domain,
                                double resolution, std::size_t max_draws = 200);

// ---- classification ---------------------------------------------------------------

struct EntropySummary {
    double entropy = 0.0;
    TypeLabel modal = TypeLabel::None;
    bool high = false;  // entropy > 0.8
};

inline constexpr double kHighEntropyThreshold = 0.8;

// Natural-log Shannon entropy with 0 log 0 = 0; ties in the modal label go to
// the lower type index.
EntropySummary classification_entropy(const TypeProbs& phat);

// ---- traces -------------------------------------------------------------------------

struct TraceSummary {
    double mean = 0.0;
    double sd = 0.0;
    double ess = 0.0;
    bool degenerate = false;
    std::optional<double> split_rhat;
};

// Mean, sd and effective sample size (initial positive sequence). Throws
// DomainError for traces shorter than 10.
TraceSummary summarize_trace(std::span<const double> trace);

// Pools several chains: ESS is summed over chains, split R-hat is reported.
TraceSummary summarize_chains(std::span<const std::vector<double>> chains);

// ---- recovery scoring -------------------------------------------------------------

// Sums the weights of the mixture's components by the nearest of the given
// centres (Euclidean distance of the component mean).
std::vector<double> attribute_weights_to_centers(const TypedMixture& mix,
                                                 std::span<const Vec2> centers);

// Posterior mean and 95% interval of the attributed weight of each centre.
std::vector<ScalarSummary> center_contributions(const PosteriorSamples& ps, TypeLabel k,
                                                std::span<const Vec2> centers);

}  // namespace typedpp
