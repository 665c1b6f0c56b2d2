#pragma once

#include <vector>

#include "hpfr/data.hpp"
#include "hpfr/linalg.hpp"

namespace hpfr {

/// Squared-exponential kernel v0 * exp(-0.5 * sum_k w_k (x_k - x'_k)^2).
struct SqExpParams {
    double v0 = 1.0;
    Vector w;  // one weight per kernel input (p_x)

    void validate() const;
};

/// Composite covariance parameters: kernel, diagonal random-effect
/// variances (one per W column) and the noise variance.
struct CovParams {
    SqExpParams theta;
    Vector phi_b;
    double phi_eps = 1.0;

    void validate() const;
    /// Number of scalar variance components: 1 + p_x + p_w + 1.
    Eigen::Index component_count() const { return 2 + theta.w.size() + phi_b.size(); }
    /// Components in layout order (v0, w_1..w_px, phi_1..phi_pw, phi_eps).
    Vector components() const;
    void set_components(const Vector& c);
};

double kernel_eval(const Vector& x, const Vector& x2, const SqExpParams& theta);

/// Kernel Gram matrix over the rows of X (symmetric by construction).
Matrix cov_matrix(const Matrix& X, const SqExpParams& theta);
/// Kernel between rows of X1 and rows of X2.
Matrix cross_kernel(const Matrix& X1, const Matrix& X2, const SqExpParams& theta);

/// Sigma = C + W diag(phi_b) W^T + phi_eps I.
Matrix composite_sigma(const Matrix& X, const Matrix& W, const CovParams& p);
Matrix composite_sigma(const Subject& s, const CovParams& p);

/// dSigma / d log(component) for every variance component, in layout order.
std::vector<Matrix> composite_sigma_log_derivatives(const Matrix& X, const Matrix& W, const CovParams& p);

/// Covariates at prediction points.
struct TargetCovariates {
    Vector t;
    Matrix X;
    Matrix W;

    Eigen::Index size() const { return t.size(); }
};

struct CrossCovariance {
    Matrix obs_target;  // n_obs x n_target
    Matrix target;      // n_target x n_target
};

/// Covariance between observed points and targets, and among targets.
///
/// With include_noise the targets are responses: the noise variance enters the
/// target block on exact time matches, and the cross block where an observed
/// time equals a target time bit-for-bit. Without it the targets are the
/// noise-free random terms.
CrossCovariance cross_cov(const Vector& t_obs, const Matrix& X_obs, const Matrix& W_obs,
                          const TargetCovariates& targets, const CovParams& p, bool include_noise);

} // namespace hpfr
