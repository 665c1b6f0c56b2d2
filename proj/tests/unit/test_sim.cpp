#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hpfr/error.hpp"
#include "hpfr/sim.hpp"

using namespace hpfr;

namespace {

SchemeConfig small(Scheme s) {
    SchemeConfig c;
    c.scheme = s;
    c.M = 12;
    c.n = 21;
    c.reps = 2;
    c.families = {parse_fit_spec("N"), parse_fit_spec("T")};
    c.methods = {IntervalMethod::PL0, IntervalMethod::BTS};
    c.bts_J = 5;
    c.bts_B = 5;
    c.threads = 1;
    return c;
}

} // namespace

TEST(Sim, TrueMean) {
    EXPECT_NEAR(true_mean(2.0), 0.8 * std::sin(1.0), 1e-15);
    EXPECT_NEAR(true_mean(2.0), 0.6731767878, 1e-9);
    for (double t : {0.3, 1.7, 3.9}) EXPECT_DOUBLE_EQ(true_mean(-t), -true_mean(t));
    EXPECT_DOUBLE_EQ(true_mean(0.0), 0.0);
}

TEST(Sim, GridAndShapes) {
    const SchemeConfig c = small(Scheme::I);
    const SimData sd = generate_scheme(c, 0);
    ASSERT_EQ(sd.data.size(), 12u);
    EXPECT_DOUBLE_EQ(sd.grid(0), -4.0);
    EXPECT_DOUBLE_EQ(sd.grid(20), 4.0);
    EXPECT_DOUBLE_EQ(sd.data[0].X(3, 0), 2.5 * sd.grid(3));
    EXPECT_DOUBLE_EQ(sd.data[0].W(3, 0), 0.5 * sd.grid(3));
    EXPECT_EQ(sd.data.p_v(), 0);
    EXPECT_EQ(sd.data.p_u(), 1);
}

TEST(Sim, Deterministic) {
    const SchemeConfig c = small(Scheme::V);
    const SimData a = generate_scheme(c, 1);
    const SimData b = generate_scheme(c, 1);
    for (std::size_t m = 0; m < a.data.size(); ++m) EXPECT_EQ(a.data[m].y, b.data[m].y);
    const SimData other = generate_scheme(c, 0);
    EXPECT_NE(a.data[0].y, other.data[0].y);
}

TEST(Sim, OutlierShiftIsExact) {
    const SimData one = generate_scheme(small(Scheme::I), 0);
    const SimData four = generate_scheme(small(Scheme::IV), 0);
    for (std::size_t m = 0; m < one.data.size(); ++m) {
        const Vector diff = four.data[m].y - one.data[m].y;
        for (Eigen::Index i = 0; i < diff.size(); ++i) {
            const double t = one.grid(i);
            const double expected = m == 9 && t >= -1.0 && t <= 1.0 ? 2.0 : 0.0;
            EXPECT_NEAR(diff(i), expected, 1e-12) << "subject " << m << " t " << t;
        }
        EXPECT_EQ(four.perturbed[m], m == 9);
    }
}

TEST(Sim, CurveAmplitude) {
    const SimData one = generate_scheme(small(Scheme::I), 0);
    const SimData three = generate_scheme(small(Scheme::III), 0);
    for (Eigen::Index i = 0; i < one.grid.size(); ++i)
        EXPECT_NEAR(three.data[4].y(i) - one.data[4].y(i), 4.0 * true_mean(one.grid(i)), 1e-12);
    EXPECT_EQ(three.data[3].y, one.data[3].y);
}

TEST(Sim, HeavyTailSchemeScalesWholeSubject) {
    const SimData one = generate_scheme(small(Scheme::I), 0);
    const SimData two = generate_scheme(small(Scheme::II), 0);
    for (std::size_t m = 0; m < one.data.size(); ++m) {
        const Vector e1 = one.data[m].y - one.grid.unaryExpr(&true_mean);
        const Vector e2 = two.data[m].y - two.grid.unaryExpr(&true_mean);
        const double ratio = e2(0) / e1(0);
        EXPECT_LT((e2 - ratio * e1).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((two.tau[m] - ratio * one.tau[m]).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Sim, NewSubjectMode) {
    SchemeConfig c = small(Scheme::VI);
    EXPECT_TRUE(c.new_subject_mode());
    const SimData sd = generate_scheme(c, 0);
    EXPECT_EQ(sd.data.size(), 13u);
    // The training subjects are those of Scheme I.
    const SimData one = generate_scheme(small(Scheme::I), 0);
    EXPECT_EQ(sd.data[5].y, one.data[5].y);
}

TEST(Sim, SchemeOneCovarianceByMonteCarlo) {
    SchemeConfig c = small(Scheme::I);
    c.M = 50;
    const int reps = 60;
    const Eigen::Index i = 8, j = 10;
    double sii = 0, sij = 0;
    int count = 0;
    for (int r = 0; r < reps; ++r) {
        const SimData sd = generate_scheme(c, r);
        for (const Subject& s : sd.data.subjects()) {
            const double a = s.y(i) - true_mean(sd.grid(i));
            const double b = s.y(j) - true_mean(sd.grid(j));
            sii += a * a;
            sij += a * b;
            ++count;
        }
    }
    const SimData sd = generate_scheme(c, 0);
    const double xi = 2.5 * sd.grid(i), xj = 2.5 * sd.grid(j);
    const double wi = 0.5 * sd.grid(i), wj = 0.5 * sd.grid(j);
    const double vii = 0.04 + 0.01 * wi * wi + 0.01;
    const double vij = 0.04 * std::exp(-0.5 * (xi - xj) * (xi - xj)) + 0.01 * wi * wj;
    // 3000 draws: relative standard error of a variance estimate ~ 2.6%.
    EXPECT_NEAR(sii / count, vii, 0.1 * vii);
    EXPECT_NEAR(sij / count, vij, 0.15 * vii);
}

TEST(Sim, Scoring) {
    const BSplineBasis basis({3, 4, -4.0, 4.0});
    const Vector grid = Vector::LinSpaced(9, -4, 4);
    // Least-squares spline through the true mean has small error; zero beta
    // has the RMS of the truth itself.
    double rms = 0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) rms += true_mean(grid(i)) * true_mean(grid(i));
    rms = std::sqrt(rms / 9);
    EXPECT_NEAR(score_mean_rmse(basis, Vector::Zero(basis.size()), grid), rms, 1e-14);

    std::vector<Vector> pred{Vector::Constant(2, 1.0), Vector::Constant(2, 5.0)};
    std::vector<Vector> truth{Vector::Constant(2, 0.0), Vector::Constant(2, 0.0)};
    EXPECT_DOUBLE_EQ(score_tau_rmse(pred, truth, {true, false}), 1.0);

    Interval iv{IntervalMethod::PL0, 0.9, Vector::Constant(4, -1.0), Vector::Constant(4, 1.0)};
    Vector t(4);
    t << 0.0, 1.0, -1.5, 2.0;
    const IntervalScore s = score_intervals(iv, t);
    EXPECT_DOUBLE_EQ(s.cp(), 50.0);
    EXPECT_DOUBLE_EQ(s.mean_length(), 2.0);
    std::vector<IntervalScore> acc;
    accumulate(acc, {s});
    accumulate(acc, {s});
    ASSERT_EQ(acc.size(), 1u);
    EXPECT_DOUBLE_EQ(acc[0].points, 8.0);
    EXPECT_DOUBLE_EQ(acc[0].cp(), 50.0);
}

TEST(Sim, FitSpecs) {
    EXPECT_TRUE(parse_fit_spec("T").family.nu_fixed);
    EXPECT_FALSE(parse_fit_spec("t1").family.nu_fixed);
    EXPECT_DOUBLE_EQ(parse_fit_spec("SL").family.nu, 1.3);
    EXPECT_EQ(parse_fit_spec("CN1").family.free_count(), 2);
    EXPECT_THROW(parse_fit_spec("X"), ConfigError);
    EXPECT_EQ(parse_scheme("v"), Scheme::V);
    EXPECT_THROW(parse_scheme("VII"), ConfigError);
}

TEST(Sim, Validation) {
    SchemeConfig c = small(Scheme::V);
    c.M = 8;
    EXPECT_THROW(c.validate(), ConfigError);
    c = small(Scheme::I);
    c.families.clear();
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Sim, BenchmarkIsReproducibleAcrossThreadCounts) {
    SchemeConfig c = small(Scheme::V);
    const BenchReport a = run_benchmark(c);
    c.threads = 2;
    const BenchReport b = run_benchmark(c);
    std::ostringstream sa, sb;
    write_report_csv(sa, a);
    write_replications_csv(sa, a);
    write_report_csv(sb, b);
    write_replications_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    ASSERT_EQ(a.families.size(), 2u);
    EXPECT_EQ(a.families[0].reps, 2);
    EXPECT_EQ(a.outcomes.size(), 4u);
    EXPECT_TRUE(a.families[1].find(a.families[1].tau_intervals, IntervalMethod::BTS, 0.95));
}
