#include <gtest/gtest.h>

#include <cmath>

#include "hpfr/error.hpp"
#include "hpfr/fit.hpp"
#include "toy_data.hpp"

using namespace hpfr;

namespace {

struct Fixture {
    toy::Options o;
    Dataset ds;
    ModelData md;
    explicit Fixture(toy::Options opt) : o(opt), ds(toy::make(opt)), md(ds, toy::basis()) {}
};

toy::Options jittered() {
    toy::Options o;
    o.shared_grid = false;
    return o;
}

std::vector<double> some_weights(std::size_t M) {
    std::vector<double> pi(M);
    for (std::size_t m = 0; m < M; ++m) pi[m] = 0.4 + 0.25 * static_cast<double>(m % 4);
    return pi;
}

// Normal equations assembled on the stacked dense system.
Vector dense_gls(const ModelData& md, const std::vector<double>& pi, const CovParams& cov) {
    const Eigen::Index q = md.beta_size();
    Eigen::Index N = 0;
    for (const auto& s : md.data().subjects()) N += s.size();
    Matrix A(N, q), Sinv = Matrix::Zero(N, N);
    Vector y(N);
    Eigen::Index row = 0;
    for (std::size_t m = 0; m < md.size(); ++m) {
        const Subject& s = md.data()[m];
        const Eigen::Index n = s.size();
        A.middleRows(row, n) = md.design().A[m];
        y.segment(row, n) = s.y;
        Sinv.block(row, row, n, n) = pi[m] * composite_sigma(s, cov).inverse();
        row += n;
    }
    return (A.transpose() * Sinv * A).fullPivLu().solve(A.transpose() * Sinv * y);
}

} // namespace

TEST(Fit, UpdateBetaMatchesDenseSystem) {
    Fixture f(jittered());
    const auto pi = some_weights(f.md.size());
    const CovParams cov = toy::cov(f.o);
    const Vector b = update_beta(f.md, pi, cov);
    const Vector ref = dense_gls(f.md, pi, cov);
    EXPECT_LT((b - ref).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
}

TEST(Fit, UpdateBetaInvariantToWeightRescale) {
    Fixture f(jittered());
    auto pi = some_weights(f.md.size());
    const CovParams cov = toy::cov(f.o);
    const Vector b1 = update_beta(f.md, pi, cov);
    auto scaled = pi;
    for (double& p : scaled) p *= 37.5;
    EXPECT_LT((b1 - update_beta(f.md, scaled, cov)).cwiseAbs().maxCoeff(), 1e-12);
    for (std::size_t m = 0; m < pi.size(); ++m) scaled[m] = pi[m] * 1024.0;
    EXPECT_EQ(b1, update_beta(f.md, scaled, cov));
}

TEST(Fit, InitBetaIsOrdinaryLeastSquares) {
    Fixture f(jittered());
    const std::vector<double> unit(f.md.size(), 1.0);
    CovParams iid = toy::cov(f.o);
    iid.theta.v0 = 0.0;
    iid.phi_b.setZero();
    iid.phi_eps = 1.0;
    EXPECT_LT((init_beta(f.md) - dense_gls(f.md, unit, iid)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fit, RankDeficientDesignUsesRidge) {
    toy::Options o;
    o.with_v = false;
    Dataset ds = toy::make(o);
    // Duplicate the intercept as a fixed-effect column: exactly collinear.
    std::vector<Subject> subs = ds.subjects();
    for (auto& s : subs) s.V = Matrix::Ones(s.size(), 1);
    ColumnRoles r = ds.roles();
    r.v_intercept = true;
    const ModelData md(Dataset(subs, r), toy::basis());
    bool ridge = false;
    const Vector b = update_beta(md, std::vector<double>(md.size(), 1.0), toy::cov(o), &ridge);
    EXPECT_TRUE(ridge);
    EXPECT_TRUE(b.allFinite());
}

TEST(Fit, Q1GradientMatchesFiniteDifferences) {
    Fixture f(jittered());
    const auto pi = some_weights(f.md.size());
    const Vector beta = init_beta(f.md);
    const CovParams cov = toy::cov(f.o);
    const std::vector<bool> free(4, true);
    const Vector g = q1_log_gradient(f.md, pi, beta, cov, free);
    ASSERT_EQ(g.size(), 4);
    const Vector c0 = cov.components();
    for (int k = 0; k < 4; ++k) {
        const double h = 1e-5;
        CovParams up = cov, dn = cov;
        Vector cu = c0, cd = c0;
        cu(k) *= std::exp(h);
        cd(k) *= std::exp(-h);
        up.set_components(cu);
        dn.set_components(cd);
        const double fd = (q1_value(f.md, pi, beta, up) - q1_value(f.md, pi, beta, dn)) / (2 * h);
        EXPECT_NEAR(g(k), fd, 1e-5 * std::max(1.0, std::abs(fd))) << "component " << k;
    }
    // Only the free entries are reported.
    const Vector g2 = q1_log_gradient(f.md, pi, beta, cov, {false, true, false, true});
    ASSERT_EQ(g2.size(), 2);
    EXPECT_NEAR(g2(0), g(1), 1e-12 * std::abs(g(1)));
    EXPECT_NEAR(g2(1), g(3), 1e-12 * std::abs(g(3)));
}

TEST(Fit, NoiseOnlyUpdateHasClosedForm) {
    // Sigma = phi_eps I: the maximizer is sum pi ||e||^2 / N.
    Fixture f(jittered());
    const auto pi = some_weights(f.md.size());
    const Vector beta = init_beta(f.md);
    CovParams cov = toy::cov(f.o);
    cov.theta.v0 = 0.0;
    cov.phi_b.setZero();
    cov.phi_eps = 1.0;
    double num = 0.0, N = 0.0;
    for (std::size_t m = 0; m < f.md.size(); ++m) {
        num += pi[m] * f.md.residual(m, beta).squaredNorm();
        N += static_cast<double>(f.md.data()[m].size());
    }
    const PsiUpdate u = update_psi(f.md, pi, beta, cov, {false, false, false, true}, 200);
    EXPECT_NEAR(u.cov.phi_eps, num / N, 1e-6 * num / N);
    EXPECT_GE(u.q_exit, u.q_entry);
    EXPECT_TRUE(u.improved);
}

TEST(Fit, PsiUpdateNeverWorse) {
    Fixture f(jittered());
    const auto pi = some_weights(f.md.size());
    const Vector beta = init_beta(f.md);
    CovParams start = toy::cov(f.o);
    start.theta.w(0) = 1e3;
    const PsiUpdate u = update_psi(f.md, pi, beta, start, std::vector<bool>(4, true), 5);
    EXPECT_GE(u.q_exit, u.q_entry);
    EXPECT_GE(q1_value(f.md, pi, beta, u.cov), q1_value(f.md, pi, beta, start));
}

TEST(Fit, MonotoneTraceEveryFamily) {
    toy::Options o = jittered();
    o.family = MixingFamily::student_t(3.0);
    Fixture f(o);
    FitConfig cfg;
    cfg.compute_information = false;
    for (const auto& fam : {MixingFamily::gaussian(), MixingFamily::student_t(4.0, false),
                            MixingFamily::slash(2.0, false), MixingFamily::contaminated_normal(0.1, 0.5, false)}) {
        const FitResult r = fit(f.md, fam, cfg);
        ASSERT_GE(r.loglik_trace.size(), 2u) << fam.label();
        for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
            EXPECT_GE(r.loglik_trace[i], r.loglik_trace[i - 1] - 1e-8) << fam.label() << " cycle " << i;
        EXPECT_TRUE(r.converged) << fam.label();
        EXPECT_DOUBLE_EQ(r.loglik, r.loglik_trace.back());
    }
}

TEST(Fit, IterationBudgetReportsNonConvergence) {
    Fixture f(jittered());
    FitConfig cfg;
    cfg.max_outer_iters = 1;
    cfg.compute_information = false;
    const FitResult r = fit(f.md, MixingFamily::student_t(4.0, false), cfg);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Fit, LargeNuApproachesGaussian) {
    Fixture f(jittered());
    FitConfig cfg;
    cfg.compute_information = false;
    cfg.param_tol = 1e-9;
    const FitResult n = fit(f.md, MixingFamily::gaussian(), cfg);
    const FitResult t = fit(f.md, MixingFamily::student_t(1e6), cfg);
    EXPECT_LT((n.theta_hat.beta - t.theta_hat.beta).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_NEAR(n.loglik, t.loglik, 1e-2);
}

TEST(Fit, ResultBookkeeping) {
    Fixture f(jittered());
    const FitResult r = fit(f.md, MixingFamily::student_t(4.0));
    EXPECT_EQ(r.free_parameters, f.md.beta_size() + 4);
    EXPECT_NEAR(r.bic, -2 * r.loglik + r.free_parameters * std::log(f.o.M * f.o.n), 1e-9);
    ASSERT_EQ(r.weights.size(), f.md.size());
    for (std::size_t m = 0; m < f.md.size(); ++m)
        EXPECT_NEAR(r.weights[m], (4.0 + f.o.n) / (4.0 + r.mahalanobis[m]), 1e-12);
    EXPECT_EQ(r.info.J.rows(), r.free_parameters);
}

TEST(Fit, FixedComponentsAreRespected) {
    Fixture f(jittered());
    FitConfig cfg;
    cfg.compute_information = false;
    cfg.initial_cov = toy::cov(f.o);
    cfg.psi_free = {true, false, true, true};
    const FitResult r = fit(f.md, MixingFamily::gaussian(), cfg);
    EXPECT_DOUBLE_EQ(r.theta_hat.cov.theta.w(0), f.o.w);
}

TEST(Fit, ConfigValidation) {
    FitConfig cfg;
    cfg.max_outer_iters = 0;
    EXPECT_THROW(cfg.validate(), Error);
}
