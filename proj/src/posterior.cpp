#include "typedpp/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "typedpp/model.hpp"

namespace typedpp {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_pdf(double x, double mean, double sd) noexcept
{
    const double z = (x - mean) / sd;
    return kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
}

double normal_cdf(double x, double mean, double sd) noexcept
{
    if (x == std::numeric_limits<double>::infinity()) return 1.0;
    if (x == -std::numeric_limits<double>::infinity()) return 0.0;
    return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

// Nodes and weights of 8-point Gauss-Legendre on [-1, 1] (positive half).
constexpr std::array<double, 4> kGlNodes{0.1834346424956498, 0.5255324099163290,
                                         0.7966664774136267, 0.9602898564975363};
constexpr std::array<double, 4> kGlWeights{0.3626837833783620, 0.3137066458778873,
                                           0.2223810344533745, 0.1012285362903763};

// Integral of N(y; mean, sd^2) over [lo, hi] by composite Gauss-Legendre.
double gauss_legendre_normal_mass(double mean, double sd, double lo, double hi)
{
    constexpr double kReach = 12.0;
    lo = std::max(lo, mean - kReach * sd);
    hi = std::min(hi, mean + kReach * sd);
    if (!(hi > lo)) return 0.0;
    const auto panels =
        static_cast<std::size_t>(std::clamp(std::ceil((hi - lo) / sd), 1.0, 64.0));
    const double width = (hi - lo) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double mid = lo + (static_cast<double>(p) + 0.5) * width;
        const double half = 0.5 * width;
        double acc = 0.0;
        for (std::size_t j = 0; j < kGlNodes.size(); ++j) {
            acc += kGlWeights[j] * (normal_pdf(mid - half * kGlNodes[j], mean, sd) +
                                    normal_pdf(mid + half * kGlNodes[j], mean, sd));
        }
        total += half * acc;
    }
    return total;
}

std::vector<std::size_t> spread_indices(std::size_t available, std::size_t max_count)
{
    const std::size_t m = std::min(available, std::max<std::size_t>(max_count, 1));
    std::vector<std::size_t> idx(m);
    for (std::size_t j = 0; j < m; ++j) idx[j] = j * available / m;
    return idx;
}

}  // namespace

double quantile(std::span<const double> sample, double prob)
{
    if (sample.empty()) throw DomainError("quantile of an empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile probability outside [0,1]");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ScalarSummary summarize_draws(std::span<const double> draws)
{
    if (draws.empty()) throw DomainError("cannot summarise an empty set of draws");
    ScalarSummary s;
    s.mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
    s.ci95 = {quantile(draws, 0.025), quantile(draws, 0.975)};
    return s;
}

std::string TypeProportionRow::format_proportion() const
{
    return fmt::format("{:.1f}% ({:.1f}%, {:.1f}%)", 100.0 * p.mean, 100.0 * p.ci95.lo,
                       100.0 * p.ci95.hi);
}

std::string TypeProportionRow::format_count() const
{
    return fmt::format("{} ({}, {})", n_mean, n_lo, n_hi);
}

std::vector<TypeProportionRow> type_proportion_summary(const PosteriorSamples& ps, std::size_t n)
{
    if (ps.draws.empty()) throw DomainError("type proportions need at least one posterior draw");
    std::vector<TypeProportionRow> rows;
    const double dn = static_cast<double>(n);
    for (TypeLabel k : {TypeLabel::MaleToFemale, TypeLabel::FemaleToMale, TypeLabel::None}) {
        std::vector<double> trace;
        trace.reserve(ps.draws.size());
        for (const auto& d : ps.draws) trace.push_back(d.prob(k));
        TypeProportionRow row;
        row.type = k;
        row.p = summarize_draws(trace);
        row.n_mean = std::lround(row.p.mean * dn);
        row.n_lo = std::lround(row.p.ci95.lo * dn);
        row.n_hi = std::lround(row.p.ci95.hi * dn);
        rows.push_back(row);
    }
    return rows;
}

std::vector<double> male_source_fraction_trace(const PosteriorSamples& ps)
{
    std::vector<double> out;
    out.reserve(ps.draws.size());
    for (const auto& d : ps.draws) {
        const double mf = d.prob(TypeLabel::MaleToFemale);
        const double fm = d.prob(TypeLabel::FemaleToMale);
        out.push_back(mf / (mf + fm));
    }
    return out;
}

// ---- 1-D grids ----------------------------------------------------------------

std::size_t AgeGrid::size() const
{
    if (!(step > 0.0) || !(hi > lo)) throw DomainError("age grid needs lo < hi and step > 0");
    return static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
}

double DensityGrid1D::trapezoid_integral() const
{
    if (values.size() < 2) return 0.0;
    double total = 0.0;
    for (std::size_t i = 1; i < values.size(); ++i) total += values[i - 1] + values[i];
    return 0.5 * grid.step * total;
}

void DensityGrid1D::renormalize()
{
    const double total = trapezoid_integral();
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw NumericError("density has no mass inside the age window");
    }
    for (double& v : values) v /= total;
}

std::size_t source_axis(TypeLabel k)
{
    switch (k) {
    case TypeLabel::MaleToFemale: return 0;
    case TypeLabel::FemaleToMale: return 1;
    case TypeLabel::None: break;
    }
    throw DomainError("source and recipient are undefined for non-transmission pairs");
}

DensityGrid1D source_age_marginal_density(const TypedMixture& mix, TypeLabel k,
                                          const AgeGrid& grid)
{
    const std::size_t axis = source_axis(k);
    DensityGrid1D out{grid, std::vector<double>(grid.size(), 0.0)};
    for (std::size_t h = 0; h < mix.truncation(); ++h) {
        const double w = mix.weights()[h];
        if (w <= 0.0) continue;
        const BvnComponent& comp = mix.component(h);
        const double mean = comp.mean[axis];
        const double sd = std::sqrt(comp.cov(axis, axis));
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] += w * normal_pdf(grid.at(i), mean, sd);
        }
    }
    out.renormalize();
    return out;
}

std::vector<Interval> hdi_from_grid(const DensityGrid1D& dg, double mass)
{
    if (!(mass > 0.0 && mass < 1.0)) {
        throw DomainError(fmt::format("HDI mass must lie in (0,1), got {}", mass));
    }
    const std::size_t n = dg.values.size();
    if (n == 0) throw DomainError("HDI of an empty grid");
    double total = 0.0;
    for (double v : dg.values) {
        if (!(v >= 0.0)) throw DomainError("density grid has negative or NaN values");
        total += v;
    }
    if (!(total > 0.0)) throw DomainError("density grid has no mass");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dg.values[a] > dg.values[b]; });
    std::vector<bool> chosen(n, false);
    double acc = 0.0;
    for (std::size_t idx : order) {
        chosen[idx] = true;
        acc += dg.values[idx] / total;
        if (acc >= mass - 1e-12) break;
    }

    std::vector<Interval> out;
    for (std::size_t i = 0; i < n;) {
        if (!chosen[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && chosen[j + 1]) ++j;
        out.push_back({dg.grid.at(i), dg.grid.at(j)});
        i = j + 1;
    }
    return out;
}

double recipient_band_mass(const TypedMixture& mix, TypeLabel k, double band_lo, double band_hi)
{
    const std::size_t r = 1 - source_axis(k);
    double total = 0.0;
    for (std::size_t h = 0; h < mix.truncation(); ++h) {
        const double w = mix.weights()[h];
        if (w <= 0.0) continue;
        const BvnComponent& comp = mix.component(h);
        const double sd = std::sqrt(comp.cov(r, r));
        total += w * (normal_cdf(band_hi, comp.mean[r], sd) - normal_cdf(band_lo, comp.mean[r], sd));
    }
    return total;
}

DensityGrid1D conditional_source_density(const TypedMixture& mix, TypeLabel k, double band_lo,
                                         double band_hi, const AgeGrid& grid)
{
    if (!(band_lo < band_hi)) throw DomainError("recipient band needs lo < hi");
    const std::size_t s = source_axis(k);
    const std::size_t r = 1 - s;
    DensityGrid1D out{grid, std::vector<double>(grid.size(), 0.0)};
    for (std::size_t h = 0; h < mix.truncation(); ++h) {
        const double w = mix.weights()[h];
        if (w <= 0.0) continue;
        const BvnComponent& comp = mix.component(h);
        const double var_s = comp.cov(s, s);
        const double sd_s = std::sqrt(var_s);
        const double cov_sr = comp.cov(s, r);
        const double cond_sd = std::sqrt(comp.cov(r, r) - cov_sr * cov_sr / var_s);
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            const double x = grid.at(i);
            const double cond_mean = comp.mean[r] + cov_sr / var_s * (x - comp.mean[s]);
            const double band = gauss_legendre_normal_mass(cond_mean, cond_sd, band_lo, band_hi);
            out.values[i] += w * normal_pdf(x, comp.mean[s], sd_s) * band;
        }
    }
    const double total = out.trapezoid_integral();
    if (!(total > 0.0)) {
        throw NumericError(fmt::format("recipient band [{}, {}) carries no mass", band_lo, band_hi));
    }
    for (double& v : out.values) v /= total;
    return out;
}

SourceAgeSummary source_age_summary(const PosteriorSamples& ps, TypeLabel k, const AgeGrid& grid,
                                    double hdi_mass, std::size_t max_draws)
{
    if (ps.draws.empty()) throw DomainError("source-age summary needs posterior draws");
    SourceAgeSummary out;
    out.mean_curve = {grid, std::vector<double>(grid.size(), 0.0)};
    const auto idx = spread_indices(ps.draws.size(), max_draws);
    for (std::size_t d : idx) {
        const DensityGrid1D curve = source_age_marginal_density(ps.draws[d].mixture(k), k, grid);
        for (std::size_t i = 0; i < curve.values.size(); ++i) {
            out.mean_curve.values[i] += curve.values[i] / static_cast<double>(idx.size());
        }
        out.draw_hdis.push_back(hdi_from_grid(curve, hdi_mass));
    }
    out.mean_hdi = hdi_from_grid(out.mean_curve, hdi_mass);
    return out;
}

std::vector<BandCurve> band_conditional_table(const PosteriorSamples& ps, TypeLabel k,
                                              const AgeGrid& grid, double band_width,
                                              std::size_t max_draws)
{
    if (!(band_width > 0.0)) throw DomainError("band width must be positive");
    if (ps.draws.empty()) throw DomainError("band table needs posterior draws");
    const auto idx = spread_indices(ps.draws.size(), max_draws);
    std::vector<BandCurve> out;
    for (double lo = grid.lo; lo < grid.hi - 1e-9; lo += band_width) {
        BandCurve bc;
        bc.band = {lo, std::min(lo + band_width, grid.hi)};
        bc.curve = {grid, std::vector<double>(grid.size(), 0.0)};
        std::size_t used = 0;
        for (std::size_t d : idx) {
            const TypedMixture& mix = ps.draws[d].mixture(k);
            try {
                const auto curve = conditional_source_density(mix, k, bc.band.lo, bc.band.hi, grid);
                for (std::size_t i = 0; i < curve.values.size(); ++i) {
                    bc.curve.values[i] += curve.values[i];
                }
                ++used;
            } catch (const NumericError&) {
                continue;  // this draw puts no mass in the band
            }
            bc.band_mass += recipient_band_mass(mix, k, bc.band.lo, bc.band.hi);
        }
        if (used > 0) {
            for (double& v : bc.curve.values) v /= static_cast<double>(used);
        }
        bc.band_mass /= static_cast<double>(idx.size());
        out.push_back(std::move(bc));
    }
    return out;
}

// ---- 2-D surfaces -----------------------------------------------------------------

double SurfaceGrid2D::total_mass() const
{
    return std::accumulate(values.begin(), values.end(), 0.0) * step * step;
}

std::size_t SurfaceGrid2D::region_cells(std::size_t level) const
{
    const double thr = hpr_thresholds.at(level);
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [thr](double v) { return v >= thr; }));
}

void compute_hpr(SurfaceGrid2D& grid, std::span<const double> masses)
{
    std::vector<double> sorted_masses(masses.begin(), masses.end());
    std::sort(sorted_masses.begin(), sorted_masses.end());
    for (double m : sorted_masses) {
        if (!(m > 0.0 && m < 1.0)) throw DomainError("HPR mass must lie in (0,1)");
    }
    std::vector<double> desc(grid.values);
    std::sort(desc.begin(), desc.end(), std::greater<>());
    const double total = std::accumulate(desc.begin(), desc.end(), 0.0);
    if (!(total > 0.0)) throw NumericError("surface has no mass");

    grid.hpr_masses = sorted_masses;
    grid.hpr_thresholds.clear();
    double acc = 0.0;
    std::size_t i = 0;
    for (double m : sorted_masses) {
        while (i < desc.size() && acc < m * total) acc += desc[i++];
        grid.hpr_thresholds.push_back(desc[i == 0 ? 0 : i - 1]);
    }
}

SurfaceGrid2D flow_surface_grid(std::span<const TypedMixture> draws, const AgeDomain& domain,
                                double resolution, std::size_t max_draws)
{
    if (draws.empty()) throw DomainError("flow surface needs at least one draw");
    if (!(resolution > 0.0)) throw DomainError("surface resolution must be positive");
    SurfaceGrid2D out;
    out.lo = domain.lo;
    out.hi = domain.hi;
    out.n = static_cast<std::size_t>(std::llround((domain.hi - domain.lo) / resolution));
    out.step = (domain.hi - domain.lo) / static_cast<double>(out.n);
    const std::size_t cells = out.n * out.n;

    const auto idx = spread_indices(draws.size(), max_draws);
    std::vector<double> stack(idx.size() * cells);
    for (std::size_t d = 0; d < idx.size(); ++d) {
        const MixtureKernel kernel(draws[idx[d]]);
        std::vector<double> terms(kernel.size());
        for (std::size_t i = 0; i < out.n; ++i) {
            for (std::size_t j = 0; j < out.n; ++j) {
                const double lf = kernel.log_terms(Vec2(out.centre(i), out.centre(j)), terms);
                stack[d * cells + i * out.n + j] = std::exp(lf);
            }
        }
    }

    out.values.resize(cells);
    std::vector<double> column(idx.size());
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t d = 0; d < idx.size(); ++d) column[d] = stack[d * cells + c];
        out.values[c] = quantile(column, 0.5);
    }
    const double mass = out.total_mass();
    if (!(mass > 0.0)) throw NumericError("median flow surface has no mass in the age window");
    for (double& v : out.values) v /= mass;

    constexpr std::array<double, 3> kLevels{0.5, 0.8, 0.9};
    compute_hpr(out, kLevels);
    return out;
}

SurfaceGrid2D flow_surface_grid(const PosteriorSamples& ps, TypeLabel k, const AgeDomain& domain,
                                double resolution, std::size_t max_draws)
{
    source_axis(k);
    std::vector<TypedMixture> mixes;
    mixes.reserve(ps.draws.size());
    for (const auto& d : ps.draws) mixes.push_back(d.mixture(k));
    return flow_surface_grid(mixes, domain, resolution, max_draws);
}

// ---- entropy ------------------------------------------------------------------------

EntropySummary classification_entropy(const TypeProbs& phat)
{
    EntropySummary out;
    std::size_t best = 0;
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        const double p = phat[t];
        if (!(p >= 0.0 && p <= 1.0 + 1e-12)) throw DomainError("entropy input is not a simplex");
        if (p > 0.0) out.entropy -= p * std::log(p);
        if (p > phat[best]) best = t;
    }
    out.entropy = std::max(0.0, out.entropy);
    out.modal = type_from_index(best);
    out.high = out.entropy > kHighEntropyThreshold;
    return out;
}

// ---- traces -------------------------------------------------------------------------

namespace {

double initial_positive_sequence_ess(std::span<const double> x, double mean, double var0)
{
    const std::size_t n = x.size();
    auto autocorr = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) acc += (x[t] - mean) * (x[t + lag] - mean);
        return acc / static_cast<double>(n) / var0;
    };
    double sum_pairs = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
        double pair = autocorr(2 * m) + autocorr(2 * m + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);  // initial monotone sequence
        sum_pairs += pair;
        prev_pair = pair;
    }
    const double tau = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / std::log10(static_cast<double>(n)));
    return static_cast<double>(n) / tau;
}

}  // namespace

TraceSummary summarize_trace(std::span<const double> trace)
{
    if (trace.size() < 10) throw DomainError("trace summaries need at least 10 values");
    TraceSummary out;
    const double n = static_cast<double>(trace.size());
    out.mean = std::accumulate(trace.begin(), trace.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : trace) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
    const double var0 = ss / n;
    if (!(var0 > 1e-300 * std::max(1.0, out.mean * out.mean))) {
        out.degenerate = true;
        out.ess = n;
        return out;
    }
    out.ess = initial_positive_sequence_ess(trace, out.mean, var0);
    return out;
}

TraceSummary summarize_chains(std::span<const std::vector<double>> chains)
{
    if (chains.empty()) throw DomainError("no chains to summarise");
    std::vector<double> pooled;
    double ess = 0.0;
    bool degenerate = true;
    for (const auto& ch : chains) {
        const TraceSummary s = summarize_trace(ch);
        ess += s.ess;
        degenerate = degenerate && s.degenerate;
        pooled.insert(pooled.end(), ch.begin(), ch.end());
    }
    TraceSummary out = summarize_trace(pooled);
    out.ess = ess;
    out.degenerate = degenerate;
    if (chains.size() < 2 || degenerate) return out;

    // Split each chain in half and compare between- and within-half variance.
    std::vector<std::span<const double>> halves;
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& ch : chains) len = std::min(len, ch.size() / 2);
    for (const auto& ch : chains) {
        halves.emplace_back(ch.data(), len);
        halves.emplace_back(ch.data() + ch.size() - len, len);
    }
    const double nl = static_cast<double>(len);
    std::vector<double> means, vars;
    for (auto h : halves) {
        const double m = std::accumulate(h.begin(), h.end(), 0.0) / nl;
        double ss = 0.0;
        for (double v : h) ss += (v - m) * (v - m);
        means.push_back(m);
        vars.push_back(ss / (nl - 1.0));
    }
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
    double b = 0.0;
    for (double m : means) b += (m - grand) * (m - grand);
    b *= nl / static_cast<double>(means.size() - 1);
    const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / vars.size();
    if (w > 0.0) out.split_rhat = std::sqrt(((nl - 1.0) / nl * w + b / nl) / w);
    return out;
}

// ---- recovery -----------------------------------------------------------------------

std::vector<double> attribute_weights_to_centers(const TypedMixture& mix,
                                                 std::span<const Vec2> centers)
{
    if (centers.empty()) throw DomainError("need at least one centre");
    std::vector<double> out(centers.size(), 0.0);
    for (std::size_t h = 0; h < mix.truncation(); ++h) {
        const Vec2& mean = mix.component(h).mean;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.size(); ++c) {
            const double d = (mean - centers[c]).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        out[best] += mix.weights()[h];
    }
    return out;
}

std::vector<ScalarSummary> center_contributions(const PosteriorSamples& ps, TypeLabel k,
                                                std::span<const Vec2> centers)
{
    std::vector<std::vector<double>> traces(centers.size());
    for (const auto& d : ps.draws) {
        const auto w = attribute_weights_to_centers(d.mixture(k), centers);
        for (std::size_t c = 0; c < centers.size(); ++c) traces[c].push_back(w[c]);
    }
    std::vector<ScalarSummary> out;
    for (const auto& t : traces) out.push_back(summarize_draws(t));
    return out;
}

}  // namespace typedpp
