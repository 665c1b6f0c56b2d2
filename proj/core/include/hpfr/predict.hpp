#pragma once

#include <cstdint>
#include <vector>

#include "hpfr/fit.hpp"

namespace hpfr {

/// Response targets predict y*; random-term targets predict the zero-mean
/// term tau(t) = zeta(t) + w(t)^T b (or tau + eps with include_noise).
enum class TargetKind { Response, RandomTerm };

struct PredictionTarget {
    /// Observed block of the subject; n = 0 is allowed.
    Subject observed;
    TargetCovariates points;
    Matrix V;  // n* x p_v, response targets only
    TargetKind kind = TargetKind::Response;
    /// Noise variance enters the target covariance (and the cross covariance
    /// at bit-identical times).
    bool include_noise = true;

    void validate(const Dataset& schema) const;
};

/// Target built from the covariates of observed points (t, X, W, V, u).
PredictionTarget target_at_observed(const Subject& s, TargetKind kind, bool include_noise);

/// Gaussian conditional of the targets given the observed block and r = 1.
struct GaussianConditional {
    Vector mean;   // mu* + S*^T S^-1 (y - mu)
    Matrix cov;    // S** - S*^T S^-1 S*
    int n = 0;     // observed block size
    double d = 0.0;
};

GaussianConditional gaussian_conditional(const PredictionTarget& target, const BSplineBasis& basis,
                                         const Vector& beta, const CovParams& cov);

Vector conditional_mean(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& p);
/// E[kappa(r) | D] diag(conditional covariance).
Vector conditional_variance(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& p);

enum class IntervalMethod { PL0, PL1, BTS };
const char* to_string(IntervalMethod m);
IntervalMethod parse_interval_method(const std::string& s);

struct Interval {
    IntervalMethod method = IntervalMethod::PL0;
    double ncl = 0.95;
    Vector lower;
    Vector upper;
};

struct PredictOptions {
    std::vector<double> ncl{0.80, 0.90, 0.95};
    std::vector<IntervalMethod> methods{IntervalMethod::PL0, IntervalMethod::PL1, IntervalMethod::BTS};
    int pl1_draws = 10000;
    int bts_J = 50;
    int bts_B = 20;
    std::uint64_t seed = 1;
    bool keep_draws = false;

    void validate() const;
};

struct PredictionResult {
    Vector mean;
    Vector variance;
    std::vector<Interval> intervals;
    Matrix pl1_draws;  // draws x points, kept on request
    Matrix bts_draws;
    int bts_skipped = 0;

    const Interval* find(IntervalMethod m, double ncl) const;
};

/// Type-7 quantile (linear interpolation of order statistics) of sorted data.
double quantile_type7(const std::vector<double>& sorted, double prob);

/// Pointwise central intervals from a draws x points matrix.
std::vector<Interval> empirical_intervals(const Matrix& draws, IntervalMethod method,
                                          const std::vector<double>& ncl);

std::vector<Interval> interval_pl0(const Vector& mean, const Vector& variance, const std::vector<double>& ncl);

/// Draws from p(y* | D; theta): r from its posterior, then the Gaussian
/// conditional scaled by 1/r.
Matrix predictive_draws(const GaussianConditional& gc, const MixingFamily& fam, int count, Rng& rng);

Matrix pl1_draws(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& p, int count,
                 std::uint64_t seed);

/// Parametric bootstrap: J parameter draws from N(theta_hat, J^-1) on the
/// free scale, B predictive draws each. Failed parameter draws are retried
/// once, then skipped and counted in *skipped.
Matrix bts_draws(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& theta_hat,
                 const InformationMatrix& info, int J, int B, std::uint64_t seed, int* skipped = nullptr);

PredictionResult predict(const PredictionTarget& target, const BSplineBasis& basis, const ModelParams& theta_hat,
                         const InformationMatrix& info, const PredictOptions& opt = {});
PredictionResult predict(const PredictionTarget& target, const BSplineBasis& basis, const FitResult& fit,
                         const PredictOptions& opt = {});

/// Random terms of fitted subject m on the given points.
PredictionResult predict_random_terms(const ModelData& md, const FitResult& fit, std::size_t m,
                                      const TargetCovariates& points, const PredictOptions& opt = {},
                                      bool include_noise = false);

/// Responses of a (partially observed) new subject.
PredictionResult predict_new_subject(const Subject& observed, const TargetCovariates& points, const Matrix& V,
                                     const BSplineBasis& basis, const FitResult& fit, const PredictOptions& opt = {});

} // namespace hpfr
