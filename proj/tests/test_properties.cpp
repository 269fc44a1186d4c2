#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <doctest.h>

#include "typedpp/model.hpp"
#include "typedpp/posterior.hpp"
#include "typedpp/random.hpp"
#include "typedpp/sampler.hpp"
#include "typedpp/simulate.hpp"

using namespace typedpp;

namespace {

// Random instances for property checks, driven by a fixed stream per case.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed, 7) {}

    double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
    std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(rng_.uniform() * n)); }

    BvnComponent component()
    {
        BvnComponent c;
        c.mean = Vec2(uniform(15.0, 50.0), uniform(15.0, 50.0));
        const double sx = uniform(1.0, 7.0), sy = uniform(1.0, 7.0), rho = uniform(-0.9, 0.9);
        c.cov << sx * sx, rho * sx * sy, rho * sx * sy, sy * sy;
        return c;
    }

    TypedMixture mixture(std::size_t h_max)
    {
        const std::size_t h = 1 + index(h_max);
        std::vector<double> w(h);
        for (double& x : w) x = uniform(0.05, 1.0);
        const double s = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& x : w) x /= s;
        std::vector<BvnComponent> comps;
        for (std::size_t j = 0; j < h; ++j) comps.push_back(component());
        return TypedMixture::from_weights(w, std::move(comps), uniform(0.2, 3.0));
    }

    MarkParams marks()
    {
        MarkParams mp;
        mp.mu_link = uniform(0.1, 3.0);
        mp.mu_dir_mf = uniform(0.1, 3.0);
        mp.mu_dir_fm = -uniform(0.1, 3.0);
        mp.var_link = uniform(0.2, 3.0);
        mp.var_dir = uniform(0.2, 3.0);
        return mp;
    }

    TypeProbs probs()
    {
        TypeProbs p{uniform(0.05, 1.0), uniform(0.05, 1.0), uniform(0.05, 1.0)};
        const double s = p[0] + p[1] + p[2];
        for (double& x : p) x /= s;
        return p;
    }

    std::vector<DataPoint> data(std::size_t n)
    {
        std::vector<DataPoint> out(n);
        for (auto& p : out) {
            p.location = Vec2(uniform(15.0, 50.0), uniform(15.0, 50.0));
            p.mark = Vec2(uniform(0.01, 0.99), uniform(0.01, 0.99));
            p.extreme_direction = index(10) == 0;
            if (p.extreme_direction) p.mark[1] = index(2) ? 1.0 : 0.0;
        }
        return out;
    }

    ModelState state(std::size_t n)
    {
        ModelState s;
        s.gamma = uniform(1.0, 500.0);
        s.type_probs = probs();
        for (auto& m : s.mixtures) m = mixture(5);
        s.marks = marks();
        for (std::size_t i = 0; i < n; ++i) {
            s.c.push_back(type_from_index(index(3)));
            s.z.push_back(0);
        }
        return s;
    }

    template <class T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    RngStream rng_;
};

constexpr int kCases = 25;

void check_state_invariants(const ModelState& s)
{
    CHECK(s.type_probs[0] + s.type_probs[1] + s.type_probs[2] == doctest::Approx(1.0).epsilon(1e-12));
    for (double p : s.type_probs) CHECK(p >= 0.0);
    for (const auto& mix : s.mixtures) {
        const auto w = mix.weights();
        CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        for (double x : w) CHECK(x >= 0.0);
        CHECK(mix.sticks().back() == 1.0);
        for (const auto& c : mix.components()) CHECK_UNARY(is_spd(c.cov));
        CHECK(mix.alpha() > 0.0);
    }
    CHECK(s.marks.mu_link > 0.0);
    CHECK(s.marks.mu_dir_mf > 0.0);
    CHECK(s.marks.mu_dir_fm < 0.0);
    CHECK(s.marks.var_link > 0.0);
    CHECK(s.marks.var_dir > 0.0);
    for (std::size_t i = 0; i < s.c.size(); ++i) CHECK(s.z[i] < s.mixture(s.c[i]).truncation());
}

}  // namespace

TEST_CASE("random mixtures integrate to one")
{
    for (int t = 0; t < kCases; ++t) {
        Gen g(100 + t);
        const TypedMixture mix = g.mixture(4);
        double lo = 1e9, hi = -1e9;
        for (const auto& c : mix.components()) {
            const double sd = std::sqrt(std::max(c.cov(0, 0), c.cov(1, 1)));
            lo = std::min(lo, std::min(c.mean[0], c.mean[1]) - 10.0 * sd);
            hi = std::max(hi, std::max(c.mean[0], c.mean[1]) + 10.0 * sd);
        }
        const double step = 0.2;
        double total = 0.0;
        for (double x = lo; x <= hi; x += step) {
            for (double y = lo; y <= hi; y += step) total += type_density_eval(Vec2(x, y), mix);
        }
        CHECK(total * step * step == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("likelihood is invariant under point permutation")
{
    for (int t = 0; t < kCases; ++t) {
        Gen g(200 + t);
        const std::size_t n = 5 + g.index(60);
        std::vector<DataPoint> data = g.data(n);
        ModelState s = g.state(n);
        const double before = complete_data_log_likelihood(data, s);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        g.shuffle(order);
        std::vector<DataPoint> shuffled;
        ModelState s2 = s;
        for (std::size_t i = 0; i < n; ++i) {
            shuffled.push_back(data[order[i]]);
            s2.c[i] = s.c[order[i]];
            s2.z[i] = s.z[order[i]];
        }
        const double after = complete_data_log_likelihood(shuffled, s2);
        CHECK(std::abs(after - before) <= 1e-12 * std::abs(before));
    }
}

TEST_CASE("mark contrast increases with the direction logit")
{
    for (int t = 0; t < kCases; ++t) {
        Gen g(300 + t);
        const MarkParams mp = g.marks();
        const double link = g.uniform(0.01, 0.99);
        double prev = -std::numeric_limits<double>::infinity();
        for (int j = 1; j < 200; ++j) {
            const Vec2 m(link, j / 200.0);
            const double diff = mark_log_density(m, TypeLabel::MaleToFemale, mp) -
                                mark_log_density(m, TypeLabel::FemaleToMale, mp);
            CHECK(diff > prev);
            prev = diff;
        }
    }
}

TEST_CASE("likelihood factorizes into spatial and mark terms")
{
    for (int t = 0; t < kCases; ++t) {
        Gen g(400 + t);
        const std::size_t n = 5 + g.index(40);
        const auto data = g.data(n);
        const ModelState s = g.state(n);
        const double nd = static_cast<double>(n);
        double spatial = nd * std::log(s.gamma) - s.gamma - std::lgamma(nd + 1.0);
        double marks = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const TypeLabel k = s.c[i];
            spatial += std::log(s.prob(k)) + log_type_density(data[i].location, s.mixture(k));
            marks += mark_log_density(data[i].mark, k, s.marks, !data[i].extreme_direction);
        }
        const double joint = complete_data_log_likelihood(data, s);
        CHECK(joint == doctest::Approx(spatial + marks).epsilon(1e-10));
    }
}

TEST_CASE("state invariants hold after every sweep")
{
    for (int t = 0; t < 6; ++t) {
        Gen g(500 + t);
        RngStream rng(500 + t, 0);
        const auto sim = generate_scenario(static_cast<ScenarioName>(g.index(4)), 40 + g.index(80), rng);
        Hyperparams hp;
        hp.H = 2 + g.index(12);
        McmcConfig cfg;
        cfg.seed = 500 + t;
        cfg.precision_update = g.index(2) ? PrecisionUpdate::EscobarWest : PrecisionUpdate::StickBreaking;
        GibbsSampler s(sim.data.points, hp, cfg);
        s.initialize();
        check_state_invariants(s.state());
        for (int it = 0; it < 30; ++it) {
            s.sweep();
            check_state_invariants(s.state());
        }
    }
}

TEST_CASE("relabelling the initial components leaves the posterior unchanged")
{
    RngStream data_rng(61, 0);
    const auto sim = generate_scenario(ScenarioName::MF6040, 120, data_rng);
    Hyperparams hp;
    hp.H = 10;
    McmcConfig cfg;
    cfg.seed = 61;

    auto run = [&](bool permute) {
        GibbsSampler s(sim.data.points, hp, cfg);
        s.initialize();
        if (permute) {
            ModelState& st = s.mutable_state();
            Gen g(62);
            for (TypeLabel k : kAllTypes) {
                std::vector<std::size_t> perm(hp.H);
                std::iota(perm.begin(), perm.end(), 0);
                g.shuffle(perm);
                st.mixture(k).permute(perm);
                std::vector<std::uint32_t> inv(hp.H);
                for (std::size_t h = 0; h < hp.H; ++h) inv[perm[h]] = static_cast<std::uint32_t>(h);
                for (std::size_t i = 0; i < st.c.size(); ++i) {
                    if (st.c[i] == k) st.z[i] = inv[st.z[i]];
                }
            }
        }
        std::vector<TypeProbs> phat(sim.data.points.size(), TypeProbs{});
        double top_weight = 0.0;
        constexpr int kBurn = 500, kKeep = 2000;
        for (int it = 0; it < kBurn + kKeep; ++it) {
            s.sweep();
            if (it < kBurn) continue;
            for (std::size_t i = 0; i < phat.size(); ++i) phat[i][type_index(s.state().c[i])] += 1.0 / kKeep;
            const auto w = s.state().mixture(TypeLabel::MaleToFemale).weights();
            top_weight += *std::max_element(w.begin(), w.end()) / kKeep;
        }
        TypeProbs mean{};
        for (const auto& p : phat) {
            for (std::size_t t = 0; t < 3; ++t) mean[t] += p[t] / static_cast<double>(phat.size());
        }
        return std::pair{mean, top_weight};
    };
    const auto [a, wa] = run(false);
    const auto [b, wb] = run(true);
    for (std::size_t t = 0; t < 3; ++t) CHECK(std::abs(a[t] - b[t]) <= 0.02);
    CHECK(std::abs(wa - wb) <= 0.05);
}

TEST_CASE("entropy bounds and symmetry")
{
    for (int t = 0; t < 200; ++t) {
        Gen g(700 + t);
        TypeProbs p = g.probs();
        if (t % 5 == 0) p = {0.0, g.uniform(0.0, 1.0), 0.0};
        if (t % 5 == 0) p[2] = 1.0 - p[1];
        const double h = classification_entropy(p).entropy;
        CHECK(h >= 0.0);
        CHECK(h <= std::log(3.0) + 1e-12);
        std::array<std::size_t, 3> idx{0, 1, 2};
        do {
            const TypeProbs q{p[idx[0]], p[idx[1]], p[idx[2]]};
            CHECK(classification_entropy(q).entropy == doctest::Approx(h).epsilon(1e-12));
        } while (std::next_permutation(idx.begin(), idx.end()));
    }
}

TEST_CASE("grid densities are nonnegative and normalized")
{
    const AgeGrid grid{15.0, 50.0, 0.1};
    for (int t = 0; t < kCases; ++t) {
        Gen g(800 + t);
        const TypedMixture mix = g.mixture(5);
        for (TypeLabel k : {TypeLabel::MaleToFemale, TypeLabel::FemaleToMale}) {
            const DensityGrid1D m = source_age_marginal_density(mix, k, grid);
            for (double v : m.values) CHECK(v >= 0.0);
            CHECK(m.trapezoid_integral() == doctest::Approx(1.0).epsilon(1e-9));

            const double band_lo = g.uniform(15.0, 40.0);
            const double mass = recipient_band_mass(mix, k, band_lo, band_lo + 10.0);
            if (mass < 1e-8) continue;
            const DensityGrid1D c = conditional_source_density(mix, k, band_lo, band_lo + 10.0, grid);
            for (double v : c.values) CHECK(v >= 0.0);
            CHECK(c.trapezoid_integral() == doctest::Approx(1.0).epsilon(1e-9));

            const DensityGrid1D full = conditional_source_density(mix, k, -1e3, 1e3, grid);
            double sup = 0.0;
            for (std::size_t i = 0; i < grid.size(); ++i) sup = std::max(sup, std::abs(full.values[i] - m.values[i]));
            CHECK(sup < 1e-6);
        }
    }
}

TEST_CASE("highest-probability regions nest")
{
    for (int t = 0; t < 8; ++t) {
        Gen g(900 + t);
        std::vector<TypedMixture> draws;
        for (int d = 0; d < 5; ++d) draws.push_back(g.mixture(3));
        const SurfaceGrid2D s = flow_surface_grid(draws, AgeDomain{}, 0.5);
        for (double v : s.values) CHECK(v >= 0.0);
        CHECK(s.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
        for (std::size_t l = 1; l < s.hpr_masses.size(); ++l) {
            CHECK(s.hpr_masses[l] > s.hpr_masses[l - 1]);
            CHECK(s.hpr_thresholds[l] <= s.hpr_thresholds[l - 1]);
            CHECK(s.region_cells(l) >= s.region_cells(l - 1));
        }
    }
}
