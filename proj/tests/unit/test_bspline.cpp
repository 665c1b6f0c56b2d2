#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "hpfr/bspline.hpp"
#include "hpfr/error.hpp"

using namespace hpfr;

namespace {

// Cox-de Boor recursion straight from the definition, for comparison.
double naive_bspline(const std::vector<double>& knots, int i, int p, double t, double hi) {
    if (p == 0) {
        if (t == hi) return knots[i] < knots[i + 1] && knots[i + 1] == hi ? 1.0 : 0.0;
        return knots[i] <= t && t < knots[i + 1] ? 1.0 : 0.0;
    }
    double left = 0.0, right = 0.0;
    const double dl = knots[i + p] - knots[i];
    const double dr = knots[i + p + 1] - knots[i + 1];
    if (dl > 0) left = (t - knots[i]) / dl * naive_bspline(knots, i, p - 1, t, hi);
    if (dr > 0) right = (knots[i + p + 1] - t) / dr * naive_bspline(knots, i + 1, p - 1, t, hi);
    return left + right;
}

} // namespace

TEST(BSpline, SizeMatchesClampedConvention) {
    BasisConfig cfg{3, 18, -4.0, 4.0};
    EXPECT_EQ(cfg.size(), 22);
    BSplineBasis b(cfg);
    EXPECT_EQ(b.knots().size(), 26u);
    EXPECT_DOUBLE_EQ(b.knots().front(), -4.0);
    EXPECT_DOUBLE_EQ(b.knots().back(), 4.0);
}

TEST(BSpline, PartitionOfUnityAndRange) {
    BSplineBasis b({3, 18, -4.0, 4.0});
    for (int i = 0; i <= 200; ++i) {
        const double t = -4.0 + 8.0 * i / 200.0;
        const Vector row = b.evaluate(t);
        EXPECT_NEAR(row.sum(), 1.0, 1e-12) << "t=" << t;
        EXPECT_GE(row.minCoeff(), 0.0);
        EXPECT_LE(row.maxCoeff(), 1.0 + 1e-15);
    }
}

TEST(BSpline, MatchesNaiveRecursion) {
    BSplineBasis b({3, 5, 0.0, 2.0});
    for (double t : {0.0, 0.1, 0.333, 1.0, 1.5, 1.999, 2.0}) {
        const Vector row = b.evaluate(t);
        for (int i = 0; i < b.size(); ++i)
            EXPECT_NEAR(row(i), naive_bspline(b.knots(), i, 3, t, 2.0), 1e-13) << "t=" << t << " i=" << i;
    }
}

TEST(BSpline, SingleSpanIsBernstein) {
    // No interior knots: the cubic basis on [0, 1] is the Bernstein basis.
    BSplineBasis b({3, 0, 0.0, 1.0});
    ASSERT_EQ(b.size(), 4);
    const double t = 0.3;
    const Vector row = b.evaluate(t);
    EXPECT_NEAR(row(0), std::pow(1 - t, 3), 1e-14);
    EXPECT_NEAR(row(1), 3 * t * std::pow(1 - t, 2), 1e-14);
    EXPECT_NEAR(row(2), 3 * t * t * (1 - t), 1e-14);
    EXPECT_NEAR(row(3), t * t * t, 1e-14);
}

TEST(BSpline, EndpointsAreInterpolating) {
    BSplineBasis b({3, 18, -4.0, 4.0});
    const Vector lo = b.evaluate(-4.0), hi = b.evaluate(4.0);
    EXPECT_DOUBLE_EQ(lo(0), 1.0);
    EXPECT_DOUBLE_EQ(hi(b.size() - 1), 1.0);
}

TEST(BSpline, OutsideDomainThrows) {
    BSplineBasis b({3, 4, 0.0, 1.0});
    EXPECT_THROW(b.evaluate(-1e-9), DomainError);
    EXPECT_THROW(b.evaluate(1.0 + 1e-9), DomainError);
    EXPECT_THROW(b.evaluate(std::nan("")), DomainError);
}

TEST(BSpline, InvalidConfig) {
    EXPECT_THROW((BasisConfig{3, 4, 1.0, 1.0}.validate()), Error);
    EXPECT_THROW((BasisConfig{-1, 4, 0.0, 1.0}.validate()), Error);
    EXPECT_THROW((BasisConfig{3, -1, 0.0, 1.0}.validate()), Error);
}

TEST(BSpline, MatrixEvaluation) {
    Vector t = Vector::LinSpaced(61, -4.0, 4.0);
    const Matrix Phi = build_bspline_basis({3, 18, -4.0, 4.0}, t);
    ASSERT_EQ(Phi.rows(), 61);
    ASSERT_EQ(Phi.cols(), 22);
    Eigen::FullPivLU<Matrix> lu(Phi);
    EXPECT_EQ(lu.rank(), 22);
}
