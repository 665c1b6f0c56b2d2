#include "hpfr/mixing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "hpfr/error.hpp"

namespace hpfr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Log posterior masses of the contaminated-normal two-point law, up to a
// common constant: (log w_gamma, log w_one).
std::pair<double, double> cn_log_masses(const MixingFamily& f, int n, double d) {
    const double lg = std::log(f.nu) + 0.5 * n * std::log(f.gamma) - 0.5 * f.gamma * d;
    const double l1 = f.nu < 1.0 ? std::log1p(-f.nu) - 0.5 * d : -std::numeric_limits<double>::infinity();
    return {lg, l1};
}

std::string describe(const MixingFamily& f) {
    std::ostringstream os;
    os << f.label() << "(nu=" << f.nu;
    if (f.kind == FamilyKind::ContaminatedNormal) os << ", gamma=" << f.gamma;
    os << ")";
    return os.str();
}

} // namespace

MixingFamily MixingFamily::gaussian() { return {}; }

MixingFamily MixingFamily::student_t(double nu, bool fixed) {
    MixingFamily f;
    f.kind = FamilyKind::StudentT;
    f.nu = nu;
    f.nu_fixed = fixed;
    return f;
}

MixingFamily MixingFamily::slash(double nu, bool fixed) {
    MixingFamily f;
    f.kind = FamilyKind::Slash;
    f.nu = nu;
    f.nu_fixed = fixed;
    return f;
}

MixingFamily MixingFamily::contaminated_normal(double nu, double gamma, bool fixed) {
    MixingFamily f;
    f.kind = FamilyKind::ContaminatedNormal;
    f.nu = nu;
    f.gamma = gamma;
    f.nu_fixed = fixed;
    f.gamma_fixed = fixed;
    return f;
}

std::string MixingFamily::label() const { return to_string(kind); }

int MixingFamily::free_count() const {
    switch (kind) {
    case FamilyKind::Gaussian: return 0;
    case FamilyKind::StudentT:
    case FamilyKind::Slash: return nu_fixed ? 0 : 1;
    case FamilyKind::ContaminatedNormal: return (nu_fixed ? 0 : 1) + (gamma_fixed ? 0 : 1);
    }
    return 0;
}

void MixingFamily::validate() const {
    switch (kind) {
    case FamilyKind::Gaussian: return;
    case FamilyKind::StudentT:
    case FamilyKind::Slash:
        if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError(label() + ": nu must be finite and > 0");
        return;
    case FamilyKind::ContaminatedNormal:
        if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("CN: nu must lie in (0, 1]");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("CN: gamma must lie in (0, 1]");
        return;
    }
}

FamilyKind parse_family_kind(const std::string& s) {
    std::string k;
    for (char c : s) k.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (k == "N" || k == "GAUSSIAN" || k == "GP") return FamilyKind::Gaussian;
    if (k == "T" || k == "STUDENT" || k == "STUDENTT" || k == "STUDENT-T") return FamilyKind::StudentT;
    if (k == "SL" || k == "SLASH") return FamilyKind::Slash;
    if (k == "CN" || k == "CONTAMINATED" || k == "CONTAMINATEDNORMAL") return FamilyKind::ContaminatedNormal;
    throw ConfigError("unknown process family '" + s + "' (expected N, T, SL or CN)");
}

std::string to_string(FamilyKind k) {
    switch (k) {
    case FamilyKind::Gaussian: return "N";
    case FamilyKind::StudentT: return "T";
    case FamilyKind::Slash: return "SL";
    case FamilyKind::ContaminatedNormal: return "CN";
    }
    return "?";
}

namespace detail {

double log_unit_gamma_integral(double b, double x) {
    if (!(b > 0.0) || !(x >= 0.0)) throw DomainError("log_unit_gamma_integral: need b > 0, x >= 0");
    if (x == 0.0) return -std::log(b);
    if (x < b + 1.0) {
        // e^{-x} / b * sum_k x^k / ((b+1)...(b+k)), all terms positive.
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 100000; ++k) {
            term *= x / (b + k);
            sum += term;
            if (term < sum * 1e-17) break;
        }
        return -x - std::log(b) + std::log(sum);
    }
    // P(b, x) is at least ~0.4 here, so the regularized form does not underflow.
    const double p = boost::math::gamma_p(b, x);
    return std::lgamma(b) + std::log(p) - b * std::log(x);
}

} // namespace detail

double posterior_weight(const ScalePosterior& sp) {
    const MixingFamily& f = sp.family;
    const double n = sp.n, d = sp.d;
    switch (f.kind) {
    case FamilyKind::Gaussian: return 1.0;
    case FamilyKind::StudentT: return (f.nu + n) / (f.nu + d);
    case FamilyKind::Slash: {
        const double a = f.nu + 0.5 * n;
        return std::exp(detail::log_unit_gamma_integral(a + 1.0, 0.5 * d) -
                        detail::log_unit_gamma_integral(a, 0.5 * d));
    }
    case FamilyKind::ContaminatedNormal: {
        auto [lg, l1] = cn_log_masses(f, sp.n, d);
        const double lz = log_sum_exp(lg, l1);
        return f.gamma * std::exp(lg - lz) + std::exp(l1 - lz);
    }
    }
    return 1.0;
}

double posterior_kappa_mean(const ScalePosterior& sp) {
    const MixingFamily& f = sp.family;
    const double n = sp.n, d = sp.d;
    switch (f.kind) {
    case FamilyKind::Gaussian: return 1.0;
    case FamilyKind::StudentT:
        if (!(f.nu + n > 2.0))
            throw MomentError("E[kappa(r)|y] diverges for " + describe(f) + " with block size " +
                              std::to_string(sp.n) + " (needs nu + n > 2)");
        return (f.nu + d) / (f.nu + n - 2.0);
    case FamilyKind::Slash: {
        const double a = f.nu + 0.5 * n;
        if (!(a > 1.0))
            throw MomentError("E[kappa(r)|y] diverges for " + describe(f) + " with block size " +
                              std::to_string(sp.n) + " (needs nu + n/2 > 1)");
        return std::exp(detail::log_unit_gamma_integral(a - 1.0, 0.5 * d) -
                        detail::log_unit_gamma_integral(a, 0.5 * d));
    }
    case FamilyKind::ContaminatedNormal: {
        auto [lg, l1] = cn_log_masses(f, sp.n, d);
        const double lz = log_sum_exp(lg, l1);
        return std::exp(lg - lz) / f.gamma + std::exp(l1 - lz);
    }
    }
    return 1.0;
}

double log_marginal_stats(const MixingFamily& f, int n_int, double d, double log_det) {
    const double n = n_int;
    const double gauss_const = -0.5 * (n * kLog2Pi + log_det);
    switch (f.kind) {
    case FamilyKind::Gaussian: return gauss_const - 0.5 * d;
    case FamilyKind::StudentT:
        return std::lgamma(0.5 * (f.nu + n)) - std::lgamma(0.5 * f.nu) - 0.5 * n * std::log(f.nu * std::numbers::pi) -
               0.5 * log_det - 0.5 * (f.nu + n) * std::log1p(d / f.nu);
    case FamilyKind::Slash:
        return std::log(f.nu) + gauss_const + detail::log_unit_gamma_integral(f.nu + 0.5 * n, 0.5 * d);
    case FamilyKind::ContaminatedNormal: {
        const double a = std::log(f.nu) + gauss_const + 0.5 * n * std::log(f.gamma) - 0.5 * f.gamma * d;
        const double b = f.nu < 1.0 ? std::log1p(-f.nu) + gauss_const - 0.5 * d
                                    : -std::numeric_limits<double>::infinity();
        return log_sum_exp(a, b);
    }
    }
    return 0.0;
}

double log_marginal(const Vector& y_centered, const Matrix& sigma, const MixingFamily& fam) {
    if (sigma.rows() != y_centered.size() || sigma.cols() != y_centered.size())
        throw DimensionError("log_marginal: covariance does not match the block size");
    SpdFactor f(sigma);
    return log_marginal_stats(fam, static_cast<int>(y_centered.size()), f.quad_form(y_centered), f.log_det());
}

double sample_posterior_r(const ScalePosterior& sp, Rng& rng) {
    const MixingFamily& f = sp.family;
    const double n = sp.n, d = sp.d;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    switch (f.kind) {
    case FamilyKind::Gaussian: return 1.0;
    case FamilyKind::StudentT: {
        std::gamma_distribution<double> g(0.5 * (f.nu + n), 2.0 / (f.nu + d));
        return g(rng);
    }
    case FamilyKind::Slash: {
        // Gamma(a, rate x) truncated to (0, 1], by inverse CDF.
        const double a = f.nu + 0.5 * n;
        const double x = 0.5 * d;
        double u = unif(rng);
        while (u <= 0.0) u = unif(rng);
        if (x == 0.0) return std::pow(u, 1.0 / a);
        const double total = boost::math::gamma_p(a, x);
        if (total > 1e-280) {
            const double r = boost::math::gamma_p_inv(a, u * total) / x;
            return std::min(r, 1.0);
        }
        // P(a, x) underflows only when x is tiny relative to a: Beta(a, 1)
        // proposals are then accepted with probability >= exp(-x) ~ 1.
        for (;;) {
            const double r = std::pow(u, 1.0 / a);
            if (unif(rng) <= std::exp(-x * r)) return r;
            u = unif(rng);
            while (u <= 0.0) u = unif(rng);
        }
    }
    case FamilyKind::ContaminatedNormal: {
        auto [lg, l1] = cn_log_masses(f, sp.n, d);
        const double p_gamma = std::exp(lg - log_sum_exp(lg, l1));
        return unif(rng) < p_gamma ? f.gamma : 1.0;
    }
    }
    return 1.0;
}

double sample_prior_r(const MixingFamily& f, Rng& rng) {
    return sample_posterior_r(ScalePosterior{f, 0, 0.0}, rng);
}

DegreeBounds degree_bounds(const MixingFamily& fam) {
    switch (fam.kind) {
    case FamilyKind::Gaussian: return {};
    case FamilyKind::StudentT: return {0.5, 100.0, 0.0, 0.0};
    case FamilyKind::Slash: return {0.1, 50.0, 0.0, 0.0};
    case FamilyKind::ContaminatedNormal: return {0.01, 1.0, 0.01, 1.0};
    }
    return {};
}

MixingFamily clip_to_bounds(MixingFamily fam) {
    if (fam.kind == FamilyKind::Gaussian) return fam;
    const DegreeBounds b = degree_bounds(fam);
    fam.nu = std::clamp(fam.nu, b.nu_lo, b.nu_hi);
    if (fam.kind == FamilyKind::ContaminatedNormal) fam.gamma = std::clamp(fam.gamma, b.gamma_lo, b.gamma_hi);
    return fam;
}

MixingFamily with_default_start(MixingFamily fam) {
    switch (fam.kind) {
    case FamilyKind::Gaussian: break;
    case FamilyKind::StudentT:
        if (!(fam.nu > 0.0)) fam.nu = 4.0;
        break;
    case FamilyKind::Slash:
        if (!(fam.nu > 0.0)) fam.nu = 2.0;
        break;
    case FamilyKind::ContaminatedNormal:
        if (!(fam.nu > 0.0)) fam.nu = 0.1;
        if (!(fam.gamma > 0.0)) fam.gamma = 0.5;
        break;
    }
    return fam;
}

} // namespace hpfr
