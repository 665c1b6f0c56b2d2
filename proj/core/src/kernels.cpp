#include "hpfr/kernels.hpp"

#include <cmath>

#include "hpfr/error.hpp"

namespace hpfr {

void SqExpParams::validate() const {
    if (!(v0 >= 0.0) || !std::isfinite(v0)) throw DomainError("kernel variance v0 must be finite and >= 0");
    for (Eigen::Index k = 0; k < w.size(); ++k)
        if (!(w(k) >= 0.0) || !std::isfinite(w(k))) throw DomainError("kernel weights must be finite and >= 0");
}

void CovParams::validate() const {
    theta.validate();
    for (Eigen::Index k = 0; k < phi_b.size(); ++k)
        if (!(phi_b(k) >= 0.0) || !std::isfinite(phi_b(k)))
            throw DomainError("random-effect variances must be finite and >= 0");
    if (!(phi_eps > 0.0) || !std::isfinite(phi_eps)) throw DomainError("noise variance must be finite and > 0");
}

Vector CovParams::components() const {
    Vector c(component_count());
    c(0) = theta.v0;
    c.segment(1, theta.w.size()) = theta.w;
    c.segment(1 + theta.w.size(), phi_b.size()) = phi_b;
    c(c.size() - 1) = phi_eps;
    return c;
}

void CovParams::set_components(const Vector& c) {
    if (c.size() != component_count()) throw DimensionError("CovParams::set_components: size mismatch");
    theta.v0 = c(0);
    theta.w = c.segment(1, theta.w.size());
    phi_b = c.segment(1 + theta.w.size(), phi_b.size());
    phi_eps = c(c.size() - 1);
}

double kernel_eval(const Vector& x, const Vector& x2, const SqExpParams& theta) {
    if (x.size() != theta.w.size() || x2.size() != theta.w.size())
        throw DimensionError("kernel_eval: input dimension differs from the number of kernel weights");
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double d = x(k) - x2(k);
        s += theta.w(k) * d * d;
    }
    return theta.v0 * std::exp(-0.5 * s);
}

Matrix cross_kernel(const Matrix& X1, const Matrix& X2, const SqExpParams& theta) {
    const Eigen::Index p = theta.w.size();
    if (X1.cols() != p || X2.cols() != p) throw DimensionError("cross_kernel: input dimension mismatch");
    Matrix K(X1.rows(), X2.rows());
    for (Eigen::Index j = 0; j < X2.rows(); ++j) {
        for (Eigen::Index i = 0; i < X1.rows(); ++i) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < p; ++k) {
                const double d = X1(i, k) - X2(j, k);
                s += theta.w(k) * d * d;
            }
            K(i, j) = theta.v0 * std::exp(-0.5 * s);
        }
    }
    return K;
}

Matrix cov_matrix(const Matrix& X, const SqExpParams& theta) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = theta.w.size();
    if (X.cols() != p) throw DimensionError("cov_matrix: input dimension mismatch");
    Matrix C(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        C(j, j) = theta.v0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < p; ++k) {
                const double d = X(i, k) - X(j, k);
                s += theta.w(k) * d * d;
            }
            C(i, j) = theta.v0 * std::exp(-0.5 * s);
        }
    }
    symmetrize_from_lower(C);
    return C;
}

namespace {

// W diag(phi) W2^T
Matrix linear_term(const Matrix& W, const Matrix& W2, const Vector& phi) {
    if (W.cols() != phi.size() || W2.cols() != phi.size())
        throw DimensionError("random-effect design has wrong number of columns");
    return W * phi.asDiagonal() * W2.transpose();
}

} // namespace

Matrix composite_sigma(const Matrix& X, const Matrix& W, const CovParams& p) {
    Matrix S = cov_matrix(X, p.theta);
    if (W.rows() != X.rows()) throw DimensionError("composite_sigma: W and X row counts differ");
    if (p.phi_b.size() > 0) {
        Matrix L = linear_term(W, W, p.phi_b);
        // Add lower triangle and mirror so the result is exactly symmetric.
        for (Eigen::Index j = 0; j < S.cols(); ++j)
            for (Eigen::Index i = j; i < S.rows(); ++i) S(i, j) += L(i, j);
        symmetrize_from_lower(S);
    } else if (W.cols() != 0) {
        throw DimensionError("composite_sigma: W has columns but phi_b is empty");
    }
    S.diagonal().array() += p.phi_eps;
    return S;
}

Matrix composite_sigma(const Subject& s, const CovParams& p) { return composite_sigma(s.X, s.W, p); }

std::vector<Matrix> composite_sigma_log_derivatives(const Matrix& X, const Matrix& W, const CovParams& p) {
    const Eigen::Index n = X.rows();
    const Eigen::Index px = p.theta.w.size();
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(p.component_count()));
    const Matrix C = cov_matrix(X, p.theta);
    out.push_back(C);
    for (Eigen::Index k = 0; k < px; ++k) {
        Matrix D(n, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = X(i, k) - X(j, k);
                D(i, j) = -0.5 * p.theta.w(k) * d * d * C(i, j);
            }
        out.push_back(std::move(D));
    }
    for (Eigen::Index k = 0; k < p.phi_b.size(); ++k) out.push_back(p.phi_b(k) * W.col(k) * W.col(k).transpose());
    out.push_back(p.phi_eps * Matrix::Identity(n, n));
    return out;
}

CrossCovariance cross_cov(const Vector& t_obs, const Matrix& X_obs, const Matrix& W_obs,
                          const TargetCovariates& targets, const CovParams& p, bool include_noise) {
    if (targets.X.rows() != targets.size() || targets.W.rows() != targets.size())
        throw DimensionError("cross_cov: target covariate rows differ from target count");
    if (targets.X.cols() != p.theta.w.size() || targets.W.cols() != p.phi_b.size())
        throw DimensionError("cross_cov: target covariate columns do not match the model");
    if (X_obs.rows() != t_obs.size() || W_obs.rows() != t_obs.size())
        throw DimensionError("cross_cov: observed covariate rows differ from observation count");

    CrossCovariance out;
    out.obs_target = cross_kernel(X_obs, targets.X, p.theta);
    if (p.phi_b.size() > 0) out.obs_target += linear_term(W_obs, targets.W, p.phi_b);

    out.target = cov_matrix(targets.X, p.theta);
    if (p.phi_b.size() > 0) {
        Matrix L = linear_term(targets.W, targets.W, p.phi_b);
        for (Eigen::Index j = 0; j < L.cols(); ++j)
            for (Eigen::Index i = j; i < L.rows(); ++i) out.target(i, j) += L(i, j);
        symmetrize_from_lower(out.target);
    }
    if (include_noise) {
        for (Eigen::Index j = 0; j < targets.size(); ++j) {
            for (Eigen::Index i = 0; i < targets.size(); ++i)
                if (targets.t(i) == targets.t(j)) out.target(i, j) += p.phi_eps;
            for (Eigen::Index i = 0; i < t_obs.size(); ++i)
                if (t_obs(i) == targets.t(j)) out.obs_target(i, j) += p.phi_eps;
        }
    }
    return out;
}

} // namespace hpfr
