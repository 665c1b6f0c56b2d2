#pragma once

#include <string>

#include "hpfr/linalg.hpp"
#include "hpfr/rng.hpp"

namespace hpfr {

/// Law of the latent scale r with conditional covariance kappa(r) Sigma,
/// kappa(r) = 1 / r.
///
///   Gaussian            r = 1
///   StudentT(nu)        r ~ Gamma(nu/2, rate nu/2)
///   Slash(nu)           r ~ Beta(nu, 1)
///   ContaminatedNormal  P(r = gamma) = nu, P(r = 1) = 1 - nu
enum class FamilyKind { Gaussian, StudentT, Slash, ContaminatedNormal };

struct MixingFamily {
    FamilyKind kind = FamilyKind::Gaussian;
    double nu = 0.0;
    double gamma = 0.0;  // contaminated normal only
    bool nu_fixed = true;
    bool gamma_fixed = true;

    static MixingFamily gaussian();
    static MixingFamily student_t(double nu, bool fixed = true);
    static MixingFamily slash(double nu, bool fixed = true);
    static MixingFamily contaminated_normal(double nu, double gamma, bool fixed = true);

    /// Short label: N, T, SL, CN.
    std::string label() const;
    /// Number of estimated degree parameters (0, 1 or 2).
    int free_count() const;
    void validate() const;
};

/// Parse "N", "T", "SL", "CN" (case-insensitive, long names accepted).
FamilyKind parse_family_kind(const std::string& s);
std::string to_string(FamilyKind k);

/// Latent-scale posterior for a block of dimension n with Mahalanobis distance d.
/// n = 0 gives the prior.
struct ScalePosterior {
    MixingFamily family;
    int n = 1;
    double d = 0.0;
};

/// E[1/kappa(r) | y] = E[r | y]: the E-step weight.
double posterior_weight(const ScalePosterior& sp);

/// E[kappa(r) | y] = E[1/r | y]. Throws MomentError where it diverges.
double posterior_kappa_mean(const ScalePosterior& sp);

/// Marginal log density of a centered block under the scale mixture.
double log_marginal(const Vector& y_centered, const Matrix& sigma, const MixingFamily& fam);
/// Same, from sufficient statistics: block size, Mahalanobis distance, log|Sigma|.
double log_marginal_stats(const MixingFamily& fam, int n, double d, double log_det);

/// Draw r | y.
double sample_posterior_r(const ScalePosterior& sp, Rng& rng);
/// Draw r from the mixing law itself.
double sample_prior_r(const MixingFamily& fam, Rng& rng);

struct DegreeBounds {
    double nu_lo = 0.0, nu_hi = 0.0;
    double gamma_lo = 0.0, gamma_hi = 0.0;
};

/// Box constraints for the degree parameters: T nu in [0.5, 100];
/// SL nu in [0.1, 50]; CN nu, gamma in [0.01, 1].
DegreeBounds degree_bounds(const MixingFamily& fam);
MixingFamily clip_to_bounds(MixingFamily fam);

/// Fill unset (non-positive) degree values with the starting points
/// T nu = 4, SL nu = 2, CN (nu, gamma) = (0.1, 0.5).
MixingFamily with_default_start(MixingFamily fam);

namespace detail {
/// log of int_0^1 r^(b-1) exp(-x r) dr for b > 0, x >= 0.
double log_unit_gamma_integral(double b, double x);
} // namespace detail

} // namespace hpfr
