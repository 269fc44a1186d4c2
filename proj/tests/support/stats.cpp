#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace typedpp::testing {

GridCdf::GridCdf(const std::function<double(double)>& log_density, double lo, double hi,
                 std::size_t points)
    : lo_(lo), hi_(hi), step_((hi - lo) / static_cast<double>(points - 1))
{
    std::vector<double> logs(points);
    double m = -INFINITY;
    for (std::size_t i = 0; i < points; ++i) {
        logs[i] = log_density(lo + static_cast<double>(i) * step_);
        if (!std::isnan(logs[i])) m = std::max(m, logs[i]);
    }
    if (!std::isfinite(m)) throw std::runtime_error("grid density has no finite value");
    std::vector<double> dens(points);
    for (std::size_t i = 0; i < points; ++i) {
        dens[i] = std::isnan(logs[i]) ? 0.0 : std::exp(logs[i] - m);
    }
    accumulate(std::move(dens));
}

GridCdf::GridCdf(std::vector<double> density, double lo, double hi)
    : lo_(lo), hi_(hi), step_((hi - lo) / static_cast<double>(density.size() - 1))
{
    accumulate(std::move(density));
}

void GridCdf::accumulate(std::vector<double> density)
{
    const std::size_t n = density.size();
    xs_.resize(n);
    cdf_.assign(n, 0.0);
    double first = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xs_[i] = lo_ + static_cast<double>(i) * step_;
        if (i > 0) {
            cdf_[i] = cdf_[i - 1] + 0.5 * step_ * (density[i - 1] + density[i]);
            first += 0.5 * step_ * (density[i - 1] * xs_[i - 1] + density[i] * xs_[i]);
        }
    }
    const double total = cdf_.back();
    if (!(total > 0.0)) throw std::runtime_error("grid density has no mass");
    for (double& c : cdf_) c /= total;
    mean_ = first / total;
}

double GridCdf::operator()(double x) const
{
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const double pos = (x - lo_) / step_;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= cdf_.size()) return 1.0;
    const double t = pos - static_cast<double>(i);
    return cdf_[i] + t * (cdf_[i + 1] - cdf_[i]);
}

double GridCdf::quantile(double u) const
{
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.begin()) return lo_;
    if (it == cdf_.end()) return hi_;
    const auto i = static_cast<std::size_t>(it - cdf_.begin());
    const double span = cdf_[i] - cdf_[i - 1];
    const double t = span > 0.0 ? (u - cdf_[i - 1]) / span : 0.0;
    return xs_[i - 1] + t * step_;
}

double GridCdf::mean() const { return mean_; }

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf)
{
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

double kolmogorov_pvalue(double d, std::size_t n)
{
    const double rn = std::sqrt(static_cast<double>(n));
    const double lambda = (rn + 0.12 + 0.11 / rn) * d;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-12) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf)
{
    const std::size_t n = sample.size();
    return kolmogorov_pvalue(ks_statistic(std::move(sample), cdf), n);
}

double chi_square_pvalue(std::span<const std::size_t> counts, std::span<const double> probs)
{
    if (counts.size() != probs.size()) throw std::invalid_argument("chi-square sizes differ");
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(),
                                                             std::size_t{0}));
    double stat = 0.0;
    std::size_t cells = 0;
    double pooled_obs = 0.0, pooled_exp = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        const double e = probs[j] * total;
        const double o = static_cast<double>(counts[j]);
        if (probs[j] <= 0.0) {
            if (counts[j] > 0) return 0.0;
            continue;
        }
        if (e < 5.0) {
            pooled_obs += o;
            pooled_exp += e;
            continue;
        }
        stat += (o - e) * (o - e) / e;
        ++cells;
    }
    if (pooled_exp > 0.0) {
        stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++cells;
    }
    if (cells < 2) return 1.0;
    return boost::math::gamma_q(0.5 * static_cast<double>(cells - 1), 0.5 * stat);
}

double sample_mean(std::span<const double> x)
{
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x)
{
    const double m = sample_mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double batch_means_variance(std::span<const double> x, std::size_t batches)
{
    const std::size_t len = x.size() / batches;
    if (len < 2) throw std::invalid_argument("too few points for batch means");
    std::vector<double> means(batches);
    for (std::size_t b = 0; b < batches; ++b) means[b] = sample_mean(x.subspan(b * len, len));
    return sample_variance(means) / static_cast<double>(batches);
}

}  // namespace typedpp::testing
