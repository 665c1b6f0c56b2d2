#include "hpfr/linalg.hpp"

#include <cmath>

#include "hpfr/error.hpp"

namespace hpfr {

SpdFactor::SpdFactor(const Matrix& a) {
    const Eigen::Index n = a.rows();
    if (n != a.cols()) throw DimensionError("SpdFactor: matrix is not square");
    if (n == 0) return;

    const double mean_diag = a.diagonal().mean();
    double eps = 0.0;
    for (int attempt = 0; attempt <= 7; ++attempt) {
        Eigen::LLT<Matrix> llt;
        if (eps == 0.0) {
            llt.compute(a);
        } else {
            Matrix shifted = a;
            shifted.diagonal().array() += eps * mean_diag;
            llt.compute(shifted);
        }
        if (llt.info() == Eigen::Success) {
            lower_ = llt.matrixL();
            jitter_ = eps * mean_diag;
            log_det_ = 2.0 * lower_.diagonal().array().log().sum();
            if (std::isfinite(log_det_)) return;
        }
        eps = (eps == 0.0) ? 1e-10 : eps * 10.0;
    }
    throw NumericalError("Cholesky factorization failed after jitter escalation to 1e-4 * mean(diag)");
}

Vector SpdFactor::solve(const Vector& b) const {
    Vector z = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix SpdFactor::solve(const Matrix& b) const {
    Matrix z = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix SpdFactor::half_solve(const Matrix& b) const {
    return lower_.triangularView<Eigen::Lower>().solve(b);
}

Vector SpdFactor::half_solve(const Vector& b) const {
    return lower_.triangularView<Eigen::Lower>().solve(b);
}

double SpdFactor::quad_form(const Vector& b) const {
    if (b.size() == 0) return 0.0;
    return half_solve(b).squaredNorm();
}

Matrix SpdFactor::inverse() const {
    const Matrix li = half_solve(Matrix(Matrix::Identity(size(), size())));
    Matrix inv = li.transpose() * li;
    symmetrize_from_lower(inv);
    return inv;
}

void symmetrize_from_lower(Matrix& a) {
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < j; ++i) a(i, j) = a(j, i);
}

double min_eigenvalue(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool project_to_pd(Matrix& a, double floor_rel) {
    if (a.size() == 0) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    Vector ev = es.eigenvalues();
    const double lmax = ev.maxCoeff();
    const double floor = floor_rel * std::max(lmax, 0.0);
    if (ev.minCoeff() > floor && lmax > 0.0) return false;
    const double use_floor = floor > 0.0 ? floor : floor_rel;
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), use_floor);
    a = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    a = 0.5 * (a + a.transpose()).eval();
    return true;
}

} // namespace hpfr
