#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace typedpp {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Error hierarchy. Everything the library throws derives from Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// A numerical failure: non-SPD matrix, non-finite parameter, empty support.
class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed input files or failed writes.
class IoError : public Error {
public:
    using Error::Error;
};

// Latent event type of a pair.
enum class TypeLabel : int {
    FemaleToMale = -1,
    None = 0,
    MaleToFemale = 1,
};

inline constexpr std::size_t kNumTypes = 3;

// Every per-type array in this library is indexed FemaleToMale, None, MaleToFemale.
inline constexpr std::array<TypeLabel, kNumTypes> kAllTypes{
    TypeLabel::FemaleToMale, TypeLabel::None, TypeLabel::MaleToFemale};

constexpr std::size_t type_index(TypeLabel k) noexcept
{
    return static_cast<std::size_t>(static_cast<int>(k) + 1);
}

constexpr TypeLabel type_from_index(std::size_t i) noexcept
{
    return static_cast<TypeLabel>(static_cast<int>(i) - 1);
}

constexpr int to_int(TypeLabel k) noexcept { return static_cast<int>(k); }

// Throws DomainError unless v is -1, 0 or +1.
TypeLabel type_from_int(int v);

// Short stable name used in file headers: "fm", "none", "mf".
const char* type_name(TypeLabel k) noexcept;

// One candidate pair. location = (male_age, female_age); mark = (linkage, direction).
struct DataPoint {
    Vec2 location = Vec2::Zero();
    Vec2 mark = Vec2::Constant(0.5);
    // Raw direction score was exactly 0 or 1; the direction factor is then
    // left out of the mark likelihood.
    bool extreme_direction = false;

    double male_age() const noexcept { return location[0]; }
    double female_age() const noexcept { return location[1]; }
    double linkage() const noexcept { return mark[0]; }
    double direction() const noexcept { return mark[1]; }
};

struct BvnComponent {
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
};

// True when cov is symmetric with positive leading principal minors.
bool is_spd(const Mat2& cov) noexcept;

// Truncated stick-breaking mixture of bivariate normals for one type.
// Weights are always derived from the sticks, so the simplex invariant
// holds by construction and the last stick is exactly 1.
class TypedMixture {
public:
    TypedMixture() = default;

    static TypedMixture from_sticks(std::vector<double> sticks,
                                    std::vector<BvnComponent> components,
                                    double alpha);

    // Inverse construction: sticks v_h = w_h / (1 - sum_{l<h} w_l).
    static TypedMixture from_weights(std::span<const double> weights,
                                     std::vector<BvnComponent> components,
                                     double alpha);

    std::size_t truncation() const noexcept { return components_.size(); }
    std::span<const double> sticks() const noexcept { return sticks_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const BvnComponent> components() const noexcept { return components_; }
    const BvnComponent& component(std::size_t h) const { return components_.at(h); }
    double alpha() const noexcept { return alpha_; }

    void set_sticks(std::vector<double> sticks);
    void set_component(std::size_t h, BvnComponent comp);
    void set_alpha(double alpha);

    // Reorders components (and their weights) by the given permutation:
    // new index h takes old index perm[h]. Sticks are recomputed.
    void permute(std::span<const std::size_t> perm);

private:
    void recompute_weights();

    std::vector<double> sticks_;
    std::vector<double> weights_;
    std::vector<BvnComponent> components_;
    double alpha_ = 1.0;
};

struct MarkParams {
    double mu_link = 2.0;
    double mu_dir_mf = 1.5;
    double mu_dir_fm = -1.5;
    double var_link = 1.0;
    double var_dir = 1.0;
    // mu_dir_mf and mu_dir_fm are held fixed rather than sampled.
    bool fixed_means = false;
    // mu_link is held fixed as well (only meaningful with fixed_means).
    bool fixed_link_mean = false;

    // Throws DomainError when mu_link <= 0, mu_dir_fm >= 0 >= mu_dir_mf or a
    // variance is not positive.
    void validate() const;
};

// Probability vector indexed by type_index().
using TypeProbs = std::array<double, kNumTypes>;

struct AgeDomain {
    double lo = 15.0;
    double hi = 50.0;
    bool contains(double a) const noexcept { return a >= lo && a < hi; }
};

struct Hyperparams {
    double a0 = 1.0;
    double b0 = 0.02;
    double nu0 = 2.0;
    double sigma0_sq = 1.0;
    std::array<double, kNumTypes> q{1.0, 1.0, 1.0};
    Vec2 theta0 = Vec2::Zero();
    Mat2 Sigma0 = Mat2::Identity() * 1e4;
    double nu = 2.0;
    Mat2 S0 = Mat2::Identity();
    double a = 2.0;
    double b = 3.0;
    std::size_t H = 30;
    AgeDomain domain{};

    void validate() const;
};

struct ModelState {
    double gamma = 1.0;
    TypeProbs type_probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::array<TypedMixture, kNumTypes> mixtures{};
    MarkParams marks{};
    std::vector<TypeLabel> c;
    // 0-based component index within mixtures[type_index(c[i])].
    std::vector<std::uint32_t> z;

    const TypedMixture& mixture(TypeLabel k) const { return mixtures[type_index(k)]; }
    TypedMixture& mixture(TypeLabel k) { return mixtures[type_index(k)]; }
    double prob(TypeLabel k) const { return type_probs[type_index(k)]; }

    // Throws NumericError describing the first violated invariant.
    void validate() const;
};

}  // namespace typedpp
