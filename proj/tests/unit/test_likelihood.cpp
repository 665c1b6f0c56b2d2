#include <gtest/gtest.h>

#include <cmath>

#include "hpfr/likelihood.hpp"
#include "mixing_oracle.hpp"
#include "toy_data.hpp"

using namespace hpfr;

namespace {

// Dense reference: A_m = [u^T (x) Phi, V] built column by column, Sigma by
// explicit loops, log-density by quadrature over r.
double brute_loglik(const Dataset& ds, const BasisConfig& bc, const ModelParams& p) {
    const BSplineBasis basis(bc);
    double ll = 0.0;
    for (const Subject& s : ds.subjects()) {
        const Eigen::Index n = s.size();
        const int D = basis.size();
        const Eigen::Index pu = s.u.size();
        Matrix A(n, D * pu + s.V.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vector phi = basis.evaluate(s.t(i));
            for (Eigen::Index j = 0; j < pu; ++j)
                for (int k = 0; k < D; ++k) A(i, j * D + k) = s.u(j) * phi(k);
            for (Eigen::Index c = 0; c < s.V.cols(); ++c) A(i, D * pu + c) = s.V(i, c);
        }
        Matrix S(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < n; ++k) {
                double q = 0.0;
                for (Eigen::Index c = 0; c < s.X.cols(); ++c) {
                    const double diff = s.X(i, c) - s.X(k, c);
                    q += p.cov.theta.w(c) * diff * diff;
                }
                double v = p.cov.theta.v0 * std::exp(-0.5 * q);
                for (Eigen::Index c = 0; c < s.W.cols(); ++c) v += p.cov.phi_b(c) * s.W(i, c) * s.W(k, c);
                if (i == k) v += p.cov.phi_eps;
                S(i, k) = v;
            }
        const Vector e = s.y - A * p.beta;
        const double d = e.dot(S.ldlt().solve(e));
        const double logdet = std::log(S.determinant());
        ll += oracle::mixing_moments(p.family, static_cast<int>(n), d).log_marginal - 0.5 * logdet;
    }
    return ll;
}

ModelParams params_for(const ModelData& md, const toy::Options& o, const MixingFamily& fam) {
    ModelParams p;
    p.beta = Vector::LinSpaced(md.beta_size(), -0.4, 0.7);
    p.cov = toy::cov(o);
    p.family = fam;
    return p;
}

} // namespace

TEST(Likelihood, MatchesDenseBruteForce) {
    toy::Options o;
    o.shared_grid = false;
    const Dataset ds = toy::make(o);
    const ModelData md(ds, toy::basis());
    for (const auto& fam : {MixingFamily::gaussian(), MixingFamily::student_t(3.5), MixingFamily::slash(1.3),
                            MixingFamily::contaminated_normal(0.2, 0.3)}) {
        const ModelParams p = params_for(md, o, fam);
        const double ref = brute_loglik(ds, toy::basis(), p);
        EXPECT_NEAR(marginal_loglik(md, p), ref, 1e-7 * std::abs(ref)) << fam.label();
    }
}

TEST(Likelihood, CovarianceGroupsShareIdenticalBlocks) {
    toy::Options o;
    const Dataset shared = toy::make(o);
    EXPECT_EQ(CovarianceGroups(shared).count(), 1u);
    o.shared_grid = false;
    const Dataset jittered = toy::make(o);
    EXPECT_EQ(CovarianceGroups(jittered).count(), static_cast<std::size_t>(o.M));
    // Grouped evaluation matches the per-subject reference.
    const ModelData md(shared, toy::basis());
    const ModelParams p = params_for(md, o, MixingFamily::student_t(4.0));
    const double ref = brute_loglik(shared, toy::basis(), p);
    EXPECT_NEAR(marginal_loglik(md, p), ref, 1e-7 * std::abs(ref));
}

TEST(Likelihood, SubjectStatsAgreeWithMahalanobis) {
    toy::Options o;
    const Dataset ds = toy::make(o);
    const ModelData md(ds, toy::basis());
    const ModelParams p = params_for(md, o, MixingFamily::gaussian());
    const SubjectStats st = subject_stats(md, p);
    ASSERT_EQ(st.d.size(), ds.size());
    for (std::size_t m = 0; m < ds.size(); ++m) {
        EXPECT_NEAR(st.d[m], mahalanobis(ds[m], md.design().A[m], p), 1e-10 * st.d[m]);
        EXPECT_EQ(st.n[m], o.n);
    }
    EXPECT_NEAR(marginal_loglik(st, p.family), marginal_loglik(md, p), 1e-12);
}

TEST(Likelihood, Bic) {
    EXPECT_DOUBLE_EQ(bic(-100.0, 5, 200), 200.0 + 5 * std::log(200.0));
}

TEST(Likelihood, LayoutRoundTrip) {
    toy::Options o;
    const Dataset ds = toy::make(o);
    const ModelData md(ds, toy::basis());
    ModelParams p = params_for(md, o, MixingFamily::contaminated_normal(0.2, 0.4, false));
    std::vector<bool> free = default_psi_free(p.cov);
    ASSERT_EQ(free.size(), 4u);
    free[2] = false;  // phi_b fixed
    const ParamLayout lay(md.beta_size(), p.cov, free, p.family);
    EXPECT_EQ(lay.size(), md.beta_size() + 3 + 2);
    const Vector v = lay.pack(p);
    EXPECT_NEAR(v(lay.psi_offset()), std::log(o.v0), 1e-15);
    EXPECT_NEAR(v(lay.family_offset() + 1), std::log(0.4), 1e-15);
    Vector v2 = v;
    v2(lay.psi_offset() + 2) = std::log(0.5);  // phi_eps
    const ModelParams q = lay.unpack(v2, p);
    EXPECT_NEAR(q.cov.phi_eps, 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(q.cov.phi_b(0), o.phi_b);
    EXPECT_NEAR((lay.pack(q) - v2).cwiseAbs().maxCoeff(), 0.0, 1e-14);
    const auto names = lay.names(p.cov);
    ASSERT_EQ(static_cast<Eigen::Index>(names.size()), lay.size());
    EXPECT_EQ(names[lay.psi_offset()], "log_v0");
    EXPECT_EQ(names.back(), "log_gamma");
}

TEST(Likelihood, ZeroComponentsStayFrozen) {
    CovParams c;
    c.theta.w = Vector::Constant(1, 1.0);
    c.phi_b = Vector::Zero(2);
    const auto free = default_psi_free(c);
    EXPECT_EQ(free, (std::vector<bool>{true, true, false, false, true}));
}

TEST(Likelihood, FiniteDifferenceHessianOfQuadratic) {
    Matrix H(3, 3);
    H << 4, 1, 0.5, 1, 3, -0.2, 0.5, -0.2, 2;
    const Vector b = Vector::LinSpaced(3, -1, 1);
    auto f = [&](const Vector& x) { return 0.5 * x.dot(H * x) + b.dot(x); };
    const Vector x0 = Vector::LinSpaced(3, 0.3, 2.0);
    EXPECT_LT((finite_difference_hessian(f, x0) - H).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LT((finite_difference_gradient(f, x0) - (H * x0 + b)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Likelihood, ObservedInformationOfGaussianMeanBlock) {
    // With the covariance fixed, the beta block of the information is
    // sum_m A_m^T Sigma^-1 A_m exactly.
    toy::Options o;
    const Dataset ds = toy::make(o);
    const ModelData md(ds, toy::basis());
    const ModelParams p = params_for(md, o, MixingFamily::gaussian());
    const ParamLayout lay(md.beta_size(), p.cov, std::vector<bool>(4, false), p.family);
    const InformationMatrix info = observed_information(md, p, lay);
    Matrix ref = Matrix::Zero(md.beta_size(), md.beta_size());
    for (std::size_t m = 0; m < ds.size(); ++m) {
        const Matrix& A = md.design().A[m];
        ref += A.transpose() * composite_sigma(ds[m], p.cov).ldlt().solve(A);
    }
    EXPECT_LT((info.J - ref).cwiseAbs().maxCoeff(), 1e-4 * ref.cwiseAbs().maxCoeff());
    const Vector se = standard_errors(info, p);
    EXPECT_NEAR(se(0), std::sqrt(ref.inverse()(0, 0)), 1e-3 * se(0));
}
