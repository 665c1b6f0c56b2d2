#pragma once

#include <Eigen/Dense>

namespace hpfr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Cholesky factor of an SPD matrix together with the diagonal jitter that was
/// needed to obtain it.
///
/// Jitter policy: plain factorization first; on failure add
/// eps * mean(diag) * I for eps = 1e-10, 1e-9, ..., 1e-4 and throw
/// NumericalError if all attempts fail.
class SpdFactor {
public:
    SpdFactor() = default;
    explicit SpdFactor(const Matrix& a);

    Eigen::Index size() const { return lower_.rows(); }
    const Matrix& lower() const { return lower_; }
    double jitter() const { return jitter_; }
    double log_det() const { return log_det_; }

    /// A^{-1} b
    Vector solve(const Vector& b) const;
    Matrix solve(const Matrix& b) const;
    /// L^{-1} b
    Matrix half_solve(const Matrix& b) const;
    Vector half_solve(const Vector& b) const;
    /// b^T A^{-1} b
    double quad_form(const Vector& b) const;
    Matrix inverse() const;

private:
    Matrix lower_;
    double jitter_ = 0.0;
    double log_det_ = 0.0;
};

/// Mirror the lower triangle onto the upper triangle.
void symmetrize_from_lower(Matrix& a);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& a);

/// Nearest PD matrix by clipping eigenvalues below floor_rel * lambda_max.
/// Returns true when clipping was applied.
bool project_to_pd(Matrix& a, double floor_rel = 1e-8);

} // namespace hpfr
