#include "hpfr/predict.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "hpfr/error.hpp"

namespace hpfr {

void PredictionTarget::validate(const Dataset& schema) const {
    validate_subject(observed, true);
    const Eigen::Index n = points.size();
    if (points.X.rows() != n || points.W.rows() != n)
        throw DimensionError("target covariate blocks must have one row per target point");
    if (points.X.cols() != schema.p_x() || points.W.cols() != schema.p_w())
        throw DimensionError("target x/w columns do not match the fitted model");
    if (observed.X.cols() != schema.p_x() || observed.W.cols() != schema.p_w() ||
        observed.V.cols() != schema.p_v() || observed.u.size() != schema.p_u())
        throw DimensionError("observed block covariates do not match the fitted model");
    if (kind == TargetKind::Response && (V.rows() != n || V.cols() != schema.p_v()))
        throw DimensionError("response targets need an n* x p_v block V");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(points.t(i))) throw DataError("non-finite target time");
}

PredictionTarget target_at_observed(const Subject& s, TargetKind kind, bool include_noise) {
    PredictionTarget tg;
    tg.observed = s;
    tg.points = {s.t, s.X, s.W};
    tg.V = s.V;
    tg.kind = kind;
    tg.include_noise = include_noise;
    return tg;
}

GaussianConditional gaussian_conditional(const PredictionTarget& target, const BSplineBasis& basis,
                                         const Vector& beta, const CovParams& cov) {
    const Subject& s = target.observed;
    const Eigen::Index ns = target.points.size();
    GaussianConditional gc;
    gc.n = static_cast<int>(s.size());
    gc.mean = target.kind == TargetKind::Response ? Vector(design_rows(basis, s.u, target.points.t, target.V) * beta)
                                                  : Vector(Vector::Zero(ns));
    const CrossCovariance cc = cross_cov(s.t, s.X, s.W, target.points, cov, target.include_noise);
    gc.cov = cc.target;
    if (s.size() == 0) return gc;

    const SpdFactor f(composite_sigma(s, cov));
    const Vector e = s.y - design_rows(basis, s.u, s.t, s.V) * beta;
    const Vector le = f.half_solve(e);
    const Matrix lc = f.half_solve(cc.obs_target);
    gc.d = le.squaredNorm();
    gc.mean.noalias() += lc.transpose() * le;
    gc.cov.noalias() -= lc.transpose() * lc;
    symmetrize_from_lower(gc.cov);
    return gc;
}

Vector conditional_mean(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& p) {
    return gaussian_conditional(target, basis, p.beta, p.cov).mean;
}

Vector conditional_variance(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& p) {
    const GaussianConditional gc = gaussian_conditional(target, basis, p.beta, p.cov);
    const double k = posterior_kappa_mean({p.family, gc.n, gc.d});
    return (k * gc.cov.diagonal()).cwiseMax(0.0);
}

const char* to_string(IntervalMethod m) {
    switch (m) {
    case IntervalMethod::PL0: return "PL0";
    case IntervalMethod::PL1: return "PL1";
    case IntervalMethod::BTS: return "BTS";
    }
    return "?";
}

IntervalMethod parse_interval_method(const std::string& s) {
    std::string u;
    for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (u == "PL0") return IntervalMethod::PL0;
    if (u == "PL1") return IntervalMethod::PL1;
    if (u == "BTS") return IntervalMethod::BTS;
    throw ConfigError("unknown interval method '" + s + "' (expected PL0, PL1 or BTS)");
}

void PredictOptions::validate() const {
    for (double c : ncl)
        if (!(c >= 0.0 && c < 1.0)) throw ConfigError("NCL values must lie in [0, 1)");
    if (pl1_draws < 1 || bts_J < 1 || bts_B < 1) throw ConfigError("draw counts must be >= 1");
}

const Interval* PredictionResult::find(IntervalMethod m, double ncl) const {
    for (const auto& iv : intervals)
        if (iv.method == m && std::abs(iv.ncl - ncl) < 1e-12) return &iv;
    return nullptr;
}

double quantile_type7(const std::vector<double>& sorted, double prob) {
    if (sorted.empty()) throw DataError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<Interval> empirical_intervals(const Matrix& draws, IntervalMethod method,
                                          const std::vector<double>& ncl) {
    std::vector<Interval> out;
    for (double c : ncl) out.push_back({method, c, Vector(draws.cols()), Vector(draws.cols())});
    std::vector<double> col(static_cast<std::size_t>(draws.rows()));
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
        for (Eigen::Index i = 0; i < draws.rows(); ++i) col[static_cast<std::size_t>(i)] = draws(i, j);
        std::sort(col.begin(), col.end());
        for (auto& iv : out) {
            iv.lower(j) = quantile_type7(col, 0.5 * (1.0 - iv.ncl));
            iv.upper(j) = quantile_type7(col, 0.5 * (1.0 + iv.ncl));
        }
    }
    return out;
}

std::vector<Interval> interval_pl0(const Vector& mean, const Vector& variance, const std::vector<double>& ncl) {
    const boost::math::normal_distribution<double> z;
    std::vector<Interval> out;
    for (double c : ncl) {
        const double q = c > 0.0 ? boost::math::quantile(z, 0.5 * (1.0 + c)) : 0.0;
        const Vector half = q * variance.cwiseMax(0.0).cwiseSqrt();
        out.push_back({IntervalMethod::PL0, c, mean - half, mean + half});
    }
    return out;
}

namespace {

// Symmetric square root factor R with R R^T = S (negative eigenvalues from
// round-off are clipped to 0).
Matrix psd_root(const Matrix& s) {
    if (s.size() == 0) return s;
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

Vector standard_normals(Eigen::Index n, Rng& rng) {
    std::normal_distribution<double> nd;
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = nd(rng);
    return z;
}

void fill_draws(const GaussianConditional& gc, const MixingFamily& fam, int count, Rng& rng, Matrix& out,
                Eigen::Index row0) {
    const Matrix R = psd_root(gc.cov);
    const ScalePosterior sp{fam, gc.n, gc.d};
    for (int k = 0; k < count; ++k) {
        const double r = sample_posterior_r(sp, rng);
        const Vector z = standard_normals(gc.mean.size(), rng);
        out.row(row0 + k) = (gc.mean + (R * z) / std::sqrt(r)).transpose();
    }
}

} // namespace

Matrix predictive_draws(const GaussianConditional& gc, const MixingFamily& fam, int count, Rng& rng) {
    Matrix out(count, gc.mean.size());
    fill_draws(gc, fam, count, rng, out, 0);
    return out;
}

Matrix pl1_draws(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& p, int count,
                 std::uint64_t seed) {
    Rng rng = substream(seed, {1});
    return predictive_draws(gaussian_conditional(target, basis, p.beta, p.cov), p.family, count, rng);
}

Matrix bts_draws(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& theta_hat,
                 const InformationMatrix& info, int J, int B, std::uint64_t seed, int* skipped) {
    const ParamLayout& layout = info.layout;
    const Vector centre = layout.pack(theta_hat);
    if (info.covariance.rows() == 0 && centre.size() > 0)
        throw DimensionError("BTS intervals need the observed information; refit with fit.information = true");
    if (info.covariance.rows() != centre.size())
        throw DimensionError("information matrix does not match the parameter layout");
    const Matrix R = psd_root(info.covariance);

    Matrix pooled(static_cast<Eigen::Index>(J) * B, target.points.size());
    Eigen::Index rows = 0;
    int skip = 0;
    for (int j = 0; j < J; ++j) {
        Rng rng = substream(seed, {2, static_cast<std::uint64_t>(j)});
        bool done = false;
        for (int attempt = 0; attempt < 2 && !done; ++attempt) {
            try {
                const Vector x = centre + R * standard_normals(centre.size(), rng);
                ModelParams th = layout.unpack(x, theta_hat);
                th.family = clip_to_bounds(th.family);
                const GaussianConditional gc = gaussian_conditional(target, basis, th.beta, th.cov);
                fill_draws(gc, th.family, B, rng, pooled, rows);
                rows += B;
                done = true;
            } catch (const Error&) {
            }
        }
        if (!done) ++skip;
    }
    if (skipped) *skipped = skip;
    if (rows == 0) throw NumericalError("every bootstrap parameter draw failed");
    return pooled.topRows(rows);
}

PredictionResult predict(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& theta_hat,
                         const InformationMatrix& info, const PredictOptions& opt) {
    opt.validate();
    PredictionResult res;
    const GaussianConditional gc = gaussian_conditional(target, basis, theta_hat.beta, theta_hat.cov);
    res.mean = gc.mean;
    const double k = posterior_kappa_mean({theta_hat.family, gc.n, gc.d});
    res.variance = (k * gc.cov.diagonal()).cwiseMax(0.0);

    for (IntervalMethod m : opt.methods) {
        std::vector<Interval> iv;
        if (m == IntervalMethod::PL0) {
            iv = interval_pl0(res.mean, res.variance, opt.ncl);
        } else if (m == IntervalMethod::PL1) {
            Rng rng = substream(opt.seed, {1});
            const Matrix draws = predictive_draws(gc, theta_hat.family, opt.pl1_draws, rng);
            iv = empirical_intervals(draws, m, opt.ncl);
            if (opt.keep_draws) res.pl1_draws = draws;
        } else {
            const Matrix draws =
                bts_draws(target, basis, theta_hat, info, opt.bts_J, opt.bts_B, opt.seed, &res.bts_skipped);
            iv = empirical_intervals(draws, m, opt.ncl);
            if (opt.keep_draws) res.bts_draws = draws;
        }
        res.intervals.insert(res.intervals.end(), iv.begin(), iv.end());
    }
    return res;
}

PredictionResult predict(const PredictionTarget& target, const BSplineBasis& basis, const FitResult& fit,
                         const PredictOptions& opt) {
    return predict(target, basis, fit.theta_hat, fit.info, opt);
}

PredictionResult predict_random_terms(const ModelData& md, const FitResult& fit, std::size_t m,
                                      const TargetCovariates& points, const PredictOptions& opt, bool include_noise) {
    if (m >= md.size()) throw DataError("subject index out of range");
    PredictionTarget tg;
    tg.observed = md.data()[m];
    tg.points = points;
    tg.kind = TargetKind::RandomTerm;
    tg.include_noise = include_noise;
    tg.validate(md.data());
    return predict(tg, md.basis(), fit, opt);
}

PredictionResult predict_new_subject(const Subject& observed, const TargetCovariates& points, const Matrix& V,
                                     const BSplineBasis& basis, const FitResult& fit, const PredictOptions& opt) {
    PredictionTarget tg;
    tg.observed = observed;
    tg.points = points;
    tg.V = V;
    tg.kind = TargetKind::Response;
    tg.include_noise = true;
    return predict(tg, basis, fit, opt);
}

} // namespace hpfr
