#include <gtest/gtest.h>

#include <cmath>

#include "hpfr/error.hpp"
#include "hpfr/linalg.hpp"

using namespace hpfr;

TEST(Linalg, FactorSolvesAndLogDet) {
    Matrix A(3, 3);
    A << 4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 2;
    SpdFactor f(A);
    EXPECT_EQ(f.jitter(), 0.0);
    EXPECT_NEAR(f.log_det(), std::log(A.determinant()), 1e-13);
    Vector b(3);
    b << 1, -2, 0.5;
    EXPECT_LT((A * f.solve(b) - b).norm(), 1e-13);
    EXPECT_NEAR(f.quad_form(b), b.dot(A.inverse() * b), 1e-13);
    EXPECT_LT((f.inverse() - A.inverse()).cwiseAbs().maxCoeff(), 1e-13);
    const Matrix inv = f.inverse();
    EXPECT_EQ((inv - inv.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Linalg, JitterRescuesSemidefinite) {
    Vector v(3);
    v << 1, 2, 3;
    const Matrix A = v * v.transpose();  // rank 1
    SpdFactor f(A);
    EXPECT_GT(f.jitter(), 0.0);
    EXPECT_LE(f.jitter(), 1e-4 * A.diagonal().mean() * (1 + 1e-12));
}

TEST(Linalg, IndefiniteThrows) {
    Matrix A(2, 2);
    A << 1, 0, 0, -1;
    EXPECT_THROW(SpdFactor{A}, NumericalError);
}

TEST(Linalg, ProjectToPd) {
    Matrix A(2, 2);
    A << 1, 2, 2, 1;  // eigenvalues 3, -1
    EXPECT_TRUE(project_to_pd(A));
    EXPECT_GT(min_eigenvalue(A), 0.0);
    Matrix B = Matrix::Identity(2, 2);
    EXPECT_FALSE(project_to_pd(B));
    EXPECT_EQ(B, Matrix::Identity(2, 2));
}
