#include "typedpp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "typedpp/model.hpp"

namespace typedpp {

void McmcConfig::validate() const
{
    if (iterations <= 0) throw DomainError("iterations must be positive");
    if (burn_in < 0) throw DomainError("burn_in must be nonnegative");
    if (burn_in >= iterations) {
        throw DomainError(fmt::format("burn_in ({}) must be below iterations ({})", burn_in,
                                      iterations));
    }
    if (thin <= 0) throw DomainError("thin must be positive");
    if (fix_mark_means && !(fixed_mu_d > 0.0 && fixed_mu_neg_d < 0.0)) {
        throw DomainError("fixed direction means must satisfy mu_d > 0 > mu_-d");
    }
    if (fixed_mu_l && !(*fixed_mu_l > 0.0)) throw DomainError("fixed mu_l must be positive");
    if (freeze_types && initial_labels.empty()) {
        throw DomainError("frozen types need initial labels");
    }
}

double sample_gamma_scale(std::size_t n, const Hyperparams& hp, RngStream& rng)
{
    return sample_gamma(hp.a0 + static_cast<double>(n), hp.b0 + 1.0, rng);
}

MarkParams update_mark_params(std::span<const DataPoint> data, std::span<const TypeLabel> c,
                              const MarkParams& mp, const Hyperparams& hp, RngStream& rng,
                              VarianceResiduals residuals)
{
    if (c.size() != data.size()) throw DomainError("label count does not match data");

    double sum_link = 0.0, sum_mf = 0.0, sum_fm = 0.0;
    std::size_t n_link = 0, n_mf = 0, n_fm = 0;
    std::vector<double> link_logit(data.size()), dir_logit(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (c[i] == TypeLabel::None) continue;
        link_logit[i] = logit(data[i].linkage());
        sum_link += link_logit[i];
        ++n_link;
        if (data[i].extreme_direction) continue;
        dir_logit[i] = logit(data[i].direction());
        if (c[i] == TypeLabel::MaleToFemale) {
            sum_mf += dir_logit[i];
            ++n_mf;
        } else {
            sum_fm += dir_logit[i];
            ++n_fm;
        }
    }

    // Flat half-line priors: the location is the group mean, variance var/n.
    // An empty group falls back to the half-line around zero with variance var.
    auto draw_mean = [&rng](double sum, std::size_t n, double var, HalfLine side) {
        if (n == 0) return sample_half_line_truncated_normal(0.0, var, side, rng);
        const double dn = static_cast<double>(n);
        return sample_half_line_truncated_normal(sum / dn, var / dn, side, rng);
    };

    MarkParams out = mp;
    if (!mp.fixed_link_mean) {
        out.mu_link = draw_mean(sum_link, n_link, mp.var_link, HalfLine::Positive);
    }
    if (!mp.fixed_means) {
        out.mu_dir_mf = draw_mean(sum_mf, n_mf, mp.var_dir, HalfLine::Positive);
        out.mu_dir_fm = draw_mean(sum_fm, n_fm, mp.var_dir, HalfLine::Negative);
    }

    const bool all_points = residuals == VarianceResiduals::AllPoints;
    double ss_link = 0.0, ss_dir = 0.0;
    std::size_t n_ss_link = 0, n_ss_dir = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (c[i] == TypeLabel::None && !all_points) continue;
        const double ll = c[i] == TypeLabel::None ? logit(data[i].linkage()) : link_logit[i];
        const double rl = ll - link_mean(c[i], out);
        ss_link += rl * rl;
        ++n_ss_link;
        if (data[i].extreme_direction) continue;
        const double dl = c[i] == TypeLabel::None ? logit(data[i].direction()) : dir_logit[i];
        const double rd = dl - dir_mean(c[i], out);
        ss_dir += rd * rd;
        ++n_ss_dir;
    }
    const double prior_ss = hp.nu0 * hp.sigma0_sq;
    out.var_link = sample_inverse_gamma(0.5 * (hp.nu0 + static_cast<double>(n_ss_link)),
                                        0.5 * (prior_ss + ss_link), rng);
    out.var_dir = sample_inverse_gamma(0.5 * (hp.nu0 + static_cast<double>(n_ss_dir)),
                                       0.5 * (prior_ss + ss_dir), rng);
    return out;
}

TypeProbs update_type_probs(std::span<const TypeLabel> c, const Hyperparams& hp, RngStream& rng)
{
    std::array<double, kNumTypes> conc = hp.q;
    for (TypeLabel k : c) conc[type_index(k)] += 1.0;
    return sample_dirichlet(conc, rng);
}

std::array<double, kNumTypes> type_log_weights(const DataPoint& point, const ModelState& state)
{
    std::array<double, kNumTypes> lw{};
    for (TypeLabel k : kAllTypes) {
        const double pk = state.prob(k);
        lw[type_index(k)] =
            pk > 0.0 ? std::log(pk) + log_type_density(point.location, state.mixture(k)) +
                           mark_log_density(point.mark, k, state.marks, !point.extreme_direction)
                     : kNegInf;
    }
    return lw;
}

namespace {

TypeLabel resolve_extreme(const DataPoint& point, TypeLabel drawn)
{
    if (!point.extreme_direction || drawn == TypeLabel::None) return drawn;
    return point.direction() >= 0.5 ? TypeLabel::MaleToFemale : TypeLabel::FemaleToMale;
}

}  // namespace

LatentDraw update_type_indicators(std::span<const DataPoint> data, const ModelState& state,
                                  RngStream& rng)
{
    std::array<std::optional<MixtureKernel>, kNumTypes> kernels;
    std::array<double, kNumTypes> log_p{};
    std::size_t hmax = 0;
    for (TypeLabel k : kAllTypes) {
        const std::size_t t = type_index(k);
        kernels[t].emplace(state.mixture(k));
        log_p[t] = state.prob(k) > 0.0 ? std::log(state.prob(k)) : kNegInf;
        hmax = std::max(hmax, kernels[t]->size());
    }

    LatentDraw out;
    out.c.resize(data.size());
    out.z.resize(data.size());
    std::array<std::vector<double>, kNumTypes> terms;
    for (auto& t : terms) t.resize(hmax);
    std::array<double, kNumTypes> lw{};

    for (std::size_t i = 0; i < data.size(); ++i) {
        const DataPoint& pt = data[i];
        const double ll = logit(pt.linkage());
        const double ld = pt.extreme_direction ? 0.0 : logit(pt.direction());
        for (TypeLabel k : kAllTypes) {
            const std::size_t t = type_index(k);
            const double log_f = kernels[t]->log_terms(pt.location, terms[t]);
            double mark = normal_log_density(ll, link_mean(k, state.marks), state.marks.var_link);
            if (!pt.extreme_direction) {
                mark += normal_log_density(ld, dir_mean(k, state.marks), state.marks.var_dir);
            }
            lw[t] = log_p[t] == kNegInf ? kNegInf : log_p[t] + log_f + mark;
        }
        TypeLabel k;
        try {
            k = type_from_index(sample_categorical_from_log_weights(lw, rng));
        } catch (const NumericError& e) {
            throw NumericError(fmt::format("type indicator of point {}: {}", i, e.what()));
        }
        k = resolve_extreme(pt, k);
        const std::size_t t = type_index(k);
        out.c[i] = k;
        out.z[i] = static_cast<std::uint32_t>(sample_categorical_from_log_weights(
            std::span<const double>(terms[t]).first(kernels[t]->size()), rng));
    }
    return out;
}

TypedMixture update_stick_breaking_weights(const TypedMixture& mix,
                                           std::span<const std::size_t> counts, RngStream& rng)
{
    const std::size_t H = mix.truncation();
    if (counts.size() != H) throw DomainError("component count vector has wrong length");
    std::vector<double> sticks(H, 1.0);
    double tail = 0.0;
    for (std::size_t h = 0; h < H; ++h) tail += static_cast<double>(counts[h]);
    constexpr double kMaxStick = 1.0 - 0x1.0p-53;
    for (std::size_t h = 0; h + 1 < H; ++h) {
        tail -= static_cast<double>(counts[h]);
        const double v =
            sample_beta(1.0 + static_cast<double>(counts[h]), mix.alpha() + tail, rng);
        sticks[h] = std::clamp(v, std::numeric_limits<double>::min(), kMaxStick);
    }
    TypedMixture out = mix;
    out.set_sticks(std::move(sticks));
    return out;
}

double escobar_west_odds(double eta, std::size_t occupied, std::size_t n, double a, double b)
{
    return (a + static_cast<double>(occupied) - 1.0) /
           (static_cast<double>(n) * (b - std::log(eta)));
}

double update_dp_precision(double alpha, std::size_t occupied, std::size_t n,
                           const Hyperparams& hp, RngStream& rng)
{
    if (n == 0) return sample_gamma(hp.a, hp.b, rng);
    const double eta = sample_beta(alpha + 1.0, static_cast<double>(n), rng);
    const double odds = escobar_west_odds(eta, occupied, n, hp.a, hp.b);
    const double pi = odds / (1.0 + odds);
    const double rate = hp.b - std::log(eta);
    const double k = static_cast<double>(occupied);
    const double shape = rng.uniform() < pi ? hp.a + k : hp.a + k - 1.0;
    return sample_gamma(shape, rate, rng);
}

double update_dp_precision_sticks(std::span<const double> sticks, const Hyperparams& hp,
                                  RngStream& rng)
{
    double log_rest = 0.0;
    for (std::size_t h = 0; h + 1 < sticks.size(); ++h) log_rest += std::log1p(-sticks[h]);
    return sample_gamma(hp.a + static_cast<double>(sticks.size()) - 1.0, hp.b - log_rest, rng);
}

std::vector<std::uint32_t> update_component_indicators(std::span<const Vec2> points,
                                                       const TypedMixture& mix, RngStream& rng)
{
    const MixtureKernel kernel(mix);
    std::vector<double> terms(kernel.size());
    std::vector<std::uint32_t> z(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        kernel.log_terms(points[i], terms);
        z[i] = static_cast<std::uint32_t>(sample_categorical_from_log_weights(terms, rng));
    }
    return z;
}

BvnComponent update_component_params(std::span<const Vec2> points, const BvnComponent& comp,
                                     const Hyperparams& hp, RngStream& rng)
{
    if (!is_spd(comp.cov)) throw NumericError("current component covariance is not SPD");
    const double m = static_cast<double>(points.size());
    Vec2 sum = Vec2::Zero();
    for (const Vec2& s : points) sum += s;

    const Mat2 cov_inv = comp.cov.inverse();
    const Mat2 prior_prec = hp.Sigma0.inverse();
    Mat2 prec = m * cov_inv + prior_prec;
    prec(0, 1) = prec(1, 0) = 0.5 * (prec(0, 1) + prec(1, 0));
    if (!is_spd(prec)) throw NumericError("singular precision in component mean update");
    Mat2 post_cov = prec.inverse();
    post_cov(0, 1) = post_cov(1, 0) = 0.5 * (post_cov(0, 1) + post_cov(1, 0));
    const Vec2 post_mean = post_cov * (cov_inv * sum + prior_prec * hp.theta0);

    BvnComponent out;
    out.mean = sample_bvn(post_mean, post_cov, rng);
    Mat2 scale = hp.S0;
    for (const Vec2& s : points) {
        const Vec2 d = s - out.mean;
        scale += d * d.transpose();
    }
    out.cov = sample_inverse_wishart(hp.nu + m, scale, rng);
    return out;
}

// ---- GibbsSampler ----------------------------------------------------------

GibbsSampler::GibbsSampler(std::span<const DataPoint> data, Hyperparams hp, McmcConfig cfg)
    : data_(data), hp_(std::move(hp)), cfg_(std::move(cfg)), rng_(cfg_.seed, cfg_.stream)
{
    hp_.validate();
    cfg_.validate();
    if (data_.empty()) throw DomainError("cannot run the sampler on an empty dataset");
    if (!cfg_.initial_labels.empty() && cfg_.initial_labels.size() != data_.size()) {
        throw DomainError("initial labels do not match the data size");
    }
}

void GibbsSampler::set_data(std::span<const DataPoint> data)
{
    if (data.size() != state_.c.size()) throw DomainError("replacement data changes N");
    data_ = data;
}

void GibbsSampler::initialize()
{
    const std::size_t n = data_.size();
    ModelState s;
    s.gamma = (hp_.a0 + static_cast<double>(n)) / (hp_.b0 + 1.0);

    for (auto& mix : s.mixtures) {
        const double alpha = sample_gamma(hp_.a, hp_.b, rng_);
        std::vector<double> sticks(hp_.H, 1.0);
        for (std::size_t h = 0; h + 1 < hp_.H; ++h) {
            sticks[h] = std::clamp(sample_beta(1.0, alpha, rng_),
                                   std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
        }
        std::vector<BvnComponent> comps(hp_.H);
        for (auto& comp : comps) {
            comp.mean = sample_bvn(hp_.theta0, hp_.Sigma0, rng_);
            comp.cov = sample_inverse_wishart(hp_.nu, hp_.S0, rng_);
        }
        mix = TypedMixture::from_sticks(std::move(sticks), std::move(comps), alpha);
    }

    // The flat half-line mean priors cannot be sampled. Each free mean starts
    // from a half-line normal located at the average of the mark logits on
    // its side of zero, which already separates the two directions.
    MarkParams& mp = s.marks;
    mp.var_link = hp_.sigma0_sq;
    mp.var_dir = hp_.sigma0_sq;
    mp.fixed_means = cfg_.fix_mark_means;
    mp.fixed_link_mean = cfg_.fix_mark_means && cfg_.fixed_mu_l.has_value();
    double sum_link = 0.0, sum_pos = 0.0, sum_neg = 0.0;
    std::size_t n_link = 0, n_pos = 0, n_neg = 0;
    for (const DataPoint& pt : data_) {
        const double l = logit(pt.linkage());
        if (l > 0.0) {
            sum_link += l;
            ++n_link;
        }
        if (pt.extreme_direction) continue;
        const double d = logit(pt.direction());
        if (d > 0.0) {
            sum_pos += d;
            ++n_pos;
        } else if (d < 0.0) {
            sum_neg += d;
            ++n_neg;
        }
    }
    auto start_mean = [&](double sum, std::size_t count, HalfLine side) {
        const double dn = static_cast<double>(std::max<std::size_t>(count, 1));
        return sample_half_line_truncated_normal(sum / dn, hp_.sigma0_sq / dn, side, rng_);
    };
    mp.mu_link = mp.fixed_link_mean ? *cfg_.fixed_mu_l
                                    : start_mean(sum_link, n_link, HalfLine::Positive);
    if (mp.fixed_means) {
        mp.mu_dir_mf = cfg_.fixed_mu_d;
        mp.mu_dir_fm = cfg_.fixed_mu_neg_d;
    } else {
        mp.mu_dir_mf = start_mean(sum_pos, n_pos, HalfLine::Positive);
        mp.mu_dir_fm = start_mean(sum_neg, n_neg, HalfLine::Negative);
    }

    s.c.resize(n);
    s.z.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!cfg_.initial_labels.empty()) {
            s.c[i] = cfg_.initial_labels[i];
            continue;
        }
        std::array<double, kNumTypes> lw{};
        for (TypeLabel k : kAllTypes) {
            lw[type_index(k)] = mark_log_density(data_[i].mark, k, mp, !data_[i].extreme_direction);
        }
        s.c[i] = type_from_index(sample_categorical_from_log_weights(lw, rng_));
    }
    // Labels use equal type probabilities; a prior draw of p with a near-empty
    // type would leave that type's mixture without data for a long time.
    s.type_probs = update_type_probs(s.c, hp_, rng_);

    // Prior draws for the component means scatter over +-100 years, far from
    // any data. Each type instead anchors its components at randomly chosen
    // member points, allocates points to the nearest anchor, and refreshes
    // the sticks and component parameters once from that allocation.
    for (TypeLabel k : kAllTypes) {
        TypedMixture& mix = s.mixture(k);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (s.c[i] == k) idx.push_back(i);
        }
        std::vector<std::size_t> anchors;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const std::size_t pick = j + static_cast<std::size_t>(rng_() % (idx.size() - j));
            std::swap(idx[j], idx[pick]);
            if (anchors.size() < hp_.H) anchors.push_back(idx[j]);
        }
        std::vector<std::vector<Vec2>> members(hp_.H);
        std::vector<std::size_t> counts(hp_.H, 0);
        for (std::size_t i : idx) {
            std::uint32_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t h = 0; h < anchors.size(); ++h) {
                const double d = (data_[i].location - data_[anchors[h]].location).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<std::uint32_t>(h);
                }
            }
            s.z[i] = best;
            members[best].push_back(data_[i].location);
            ++counts[best];
        }
        if (idx.empty()) continue;
        mix = update_stick_breaking_weights(mix, counts, rng_);
        for (std::size_t h = 0; h < hp_.H; ++h) {
            if (members[h].empty()) continue;
            mix.set_component(h, update_component_params(members[h], mix.component(h), hp_, rng_));
        }
    }
    state_ = std::move(s);
}

void GibbsSampler::update_mixture(TypeLabel k)
{
    TypedMixture& mix = state_.mixture(k);
    const std::size_t H = mix.truncation();

    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < state_.c.size(); ++i) {
        if (state_.c[i] == k) members.push_back(i);
    }
    std::vector<std::size_t> counts(H, 0);
    for (std::size_t i : members) ++counts[state_.z[i]];

    // Precision, then sticks.
    if (cfg_.precision_update == PrecisionUpdate::EscobarWest) {
        const auto occupied = static_cast<std::size_t>(
            std::count_if(counts.begin(), counts.end(), [](std::size_t m) { return m > 0; }));
        mix.set_alpha(update_dp_precision(mix.alpha(), occupied, members.size(), hp_, rng_));
    } else {
        mix.set_alpha(update_dp_precision_sticks(mix.sticks(), hp_, rng_));
    }
    mix = update_stick_breaking_weights(mix, counts, rng_);

    // Component indicators.
    std::vector<Vec2> points;
    points.reserve(members.size());
    for (std::size_t i : members) points.push_back(data_[i].location);
    const auto z = update_component_indicators(points, mix, rng_);

    // Component parameters.
    std::vector<std::vector<Vec2>> grouped(H);
    for (std::size_t j = 0; j < members.size(); ++j) {
        state_.z[members[j]] = z[j];
        grouped[z[j]].push_back(points[j]);
    }
    for (std::size_t h = 0; h < H; ++h) {
        mix.set_component(h, update_component_params(grouped[h], mix.component(h), hp_, rng_));
    }
}

void GibbsSampler::sweep()
{
    state_.marks = update_mark_params(data_, state_.c, state_.marks, hp_, rng_, cfg_.variance_residuals);
    if (!cfg_.freeze_types) {
        LatentDraw latent = update_type_indicators(data_, state_, rng_);
        state_.c = std::move(latent.c);
        state_.z = std::move(latent.z);
    }
    state_.type_probs = update_type_probs(state_.c, hp_, rng_);
    for (TypeLabel k : kAllTypes) update_mixture(k);
}

namespace {

void check_finite(const ModelState& s, int iteration)
{
    auto fail = [iteration](const char* what) {
        throw NumericError(fmt::format("non-finite {} at iteration {}", what, iteration));
    };
    for (double p : s.type_probs) {
        if (!std::isfinite(p)) fail("type probability");
    }
    const MarkParams& m = s.marks;
    if (!std::isfinite(m.mu_link) || !std::isfinite(m.mu_dir_mf) || !std::isfinite(m.mu_dir_fm)) {
        fail("mark mean");
    }
    if (!std::isfinite(m.var_link) || !std::isfinite(m.var_dir)) fail("mark variance");
    for (const auto& mix : s.mixtures) {
        if (!std::isfinite(mix.alpha())) fail("DP precision");
        for (const auto& comp : mix.components()) {
            if (!comp.mean.allFinite()) fail("component mean");
            if (!comp.cov.allFinite()) fail("component covariance");
        }
    }
}

}  // namespace

PosteriorSamples run_mcmc(std::span<const DataPoint> data, const Hyperparams& hp,
                          const McmcConfig& cfg)
{
    GibbsSampler sampler(data, hp, cfg);
    RngStream gamma_rng(cfg.seed, cfg.stream + 1);

    PosteriorSamples out;
    out.n_points = data.size();
    out.draws.reserve(cfg.kept());
    out.assignment_freq.assign(data.size(), TypeProbs{0.0, 0.0, 0.0});
    std::vector<std::array<std::size_t, kNumTypes>> counts(data.size(), {0, 0, 0});

    sampler.initialize();
    for (int it = 1; it <= cfg.iterations; ++it) {
        try {
            sampler.sweep();
        } catch (const NumericError& e) {
            throw NumericError(fmt::format("iteration {}: {}", it, e.what()));
        }
        check_finite(sampler.state(), it);
        if (it <= cfg.burn_in || (it - cfg.burn_in) % cfg.thin != 0) continue;
        ModelState kept = sampler.state();
        kept.gamma = sample_gamma_scale(data.size(), hp, gamma_rng);
        for (std::size_t i = 0; i < data.size(); ++i) ++counts[i][type_index(kept.c[i])];
        out.draws.push_back(std::move(kept));
    }

    const double n_kept = static_cast<double>(out.draws.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t t = 0; t < kNumTypes; ++t) {
            out.assignment_freq[i][t] = static_cast<double>(counts[i][t]) / n_kept;
        }
    }
    return out;
}

}  // namespace typedpp
