#include "hpfr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpfr/error.hpp"
#include "hpfr/optim.hpp"

namespace hpfr {

void FitConfig::validate() const {
    if (max_outer_iters < 1 || psi_optimizer_budget < 1 || cm_sweeps < 1 || nu_grid_points < 2)
        throw ConfigError("fit budgets must be >= 1 (nu grid >= 2)");
    if (!(param_tol > 0.0) || !(loglik_tol > 0.0) || !(nu_search_tol > 0.0))
        throw ConfigError("fit tolerances must be > 0");
}

namespace {

Vector solve_normal(Matrix N, const Vector& rhs, bool* ridge) {
    if (N.size() == 0) return Vector(0);
    Eigen::LLT<Matrix> llt(N);
    const bool ok = llt.info() == Eigen::Success && llt.rcond() > 1e-13;
    if (ridge) *ridge = !ok;
    if (ok) return llt.solve(rhs);
    N.diagonal().array() += 1e-8;
    Eigen::LDLT<Matrix> ldlt(N);
    return ldlt.solve(rhs);
}

// Per-group sums S_g = sum_m pi_m e_m e_m^T and weights counts.
struct GroupMoments {
    std::vector<Matrix> S;
    std::vector<double> count;
};

GroupMoments group_moments(const ModelData& md, const std::vector<double>& pi, const Vector& beta) {
    GroupMoments gm;
    const auto& groups = md.groups();
    gm.S.resize(groups.count());
    gm.count.assign(groups.count(), 0.0);
    for (std::size_t g = 0; g < groups.count(); ++g) {
        const Eigen::Index n = md.data()[groups.representative(g)].size();
        gm.S[g] = Matrix::Zero(n, n);
        for (std::size_t m : groups.members(g)) {
            const Vector e = md.residual(m, beta);
            gm.S[g].noalias() += pi[m] * e * e.transpose();
            gm.count[g] += 1.0;
        }
    }
    return gm;
}

struct PsiBounds {
    Vector lower, upper;  // per component, log scale
};

PsiBounds psi_bounds(const ModelData& md, const CovParams& shape, double scale) {
    const Eigen::Index nc = shape.component_count();
    const Eigen::Index px = shape.theta.w.size();
    PsiBounds b;
    b.lower.resize(nc);
    b.upper.resize(nc);
    const double s2 = std::max(scale, 1e-300);
    for (Eigen::Index i = 0; i < nc; ++i) {
        b.lower(i) = std::log(1e-12 * s2);
        b.upper(i) = std::log(1e6 * s2);
    }
    for (Eigen::Index k = 0; k < px; ++k) {
        double sum = 0.0, sq = 0.0, cnt = 0.0;
        for (const auto& s : md.data().subjects()) {
            sum += s.X.col(k).sum();
            sq += s.X.col(k).squaredNorm();
            cnt += static_cast<double>(s.size());
        }
        double var = sq / cnt - (sum / cnt) * (sum / cnt);
        if (!(var > 0.0)) var = 1.0;
        b.lower(1 + k) = std::log(1e-10 / var);
        b.upper(1 + k) = std::log(1e8 / var);
    }
    return b;
}

double residual_scale(const ModelData& md, const Vector& beta) {
    double ss = 0.0;
    for (std::size_t m = 0; m < md.size(); ++m) ss += md.residual(m, beta).squaredNorm();
    const double s2 = ss / static_cast<double>(md.data().total_observations());
    return s2 > 0.0 ? s2 : 1.0;
}

CovParams covariance_shape(const Dataset& ds) {
    CovParams c;
    c.theta.v0 = 1.0;
    c.theta.w = Vector::Ones(ds.p_x());
    c.phi_b = Vector::Ones(ds.p_w());
    c.phi_eps = 1.0;
    return c;
}

double psi_objective(const ModelData& md, const GroupMoments& gm, const CovParams& base, const std::vector<int>& idx,
                     const Vector& logc, Vector* grad) {
    CovParams cov = base;
    Vector c = base.components();
    if (logc.size() > 0)
        for (std::size_t k = 0; k < idx.size(); ++k) c(idx[k]) = std::exp(logc(static_cast<Eigen::Index>(k)));
    cov.set_components(c);
    if (grad) grad->setZero(static_cast<Eigen::Index>(idx.size()));
    double q = 0.0;
    for (std::size_t g = 0; g < md.groups().count(); ++g) {
        const Subject& rep = md.data()[md.groups().representative(g)];
        SpdFactor f;
        try {
            f = SpdFactor(composite_sigma(rep, cov));
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        }
        const Matrix inv = f.inverse();
        q += -0.5 * gm.count[g] * f.log_det() - 0.5 * inv.cwiseProduct(gm.S[g]).sum();
        if (grad) {
            const Matrix G = gm.count[g] * inv - inv * gm.S[g] * inv;
            const auto derivs = composite_sigma_log_derivatives(rep.X, rep.W, cov);
            for (std::size_t k = 0; k < idx.size(); ++k)
                (*grad)(static_cast<Eigen::Index>(k)) += -0.5 * G.cwiseProduct(derivs[static_cast<std::size_t>(idx[k])]).sum();
        }
    }
    return q;
}

std::vector<int> free_indices(const std::vector<bool>& free) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < free.size(); ++i)
        if (free[i]) idx.push_back(static_cast<int>(i));
    return idx;
}

PsiUpdate optimize_psi(const ModelData& md, const GroupMoments& gm, const CovParams& start,
                       const std::vector<bool>& free, int budget, const PsiBounds& bounds) {
    const auto idx = free_indices(free);
    const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
    PsiUpdate out;
    out.cov = start;
    out.q_entry = psi_objective(md, gm, start, idx, Vector(), nullptr);
    out.q_exit = out.q_entry;
    if (k == 0) return out;

    const Vector c0 = start.components();
    Vector x0(k), lo(k), hi(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const int i = idx[static_cast<std::size_t>(j)];
        lo(j) = bounds.lower(i);
        hi(j) = bounds.upper(i);
        x0(j) = std::clamp(std::log(c0(i)), lo(j), hi(j));
    }
    auto neg_q = [&](const Vector& x, Vector& g) {
        const double v = psi_objective(md, gm, start, idx, x, &g);
        g = -g;
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    optim::BfgsOptions opt;
    opt.max_evaluations = budget;
    const optim::Result r = optim::minimize_bfgs(neg_q, x0, lo, hi, opt);
    out.evaluations = r.evaluations;
    if (std::isfinite(r.value) && -r.value >= out.q_entry) {
        Vector c = c0;
        for (Eigen::Index j = 0; j < k; ++j) c(idx[static_cast<std::size_t>(j)]) = std::exp(r.x(j));
        out.cov.set_components(c);
        out.q_exit = -r.value;
        out.improved = out.q_exit > out.q_entry;
    }
    return out;
}

} // namespace

Vector init_beta(const ModelData& md, bool* ridge) {
    const Eigen::Index q = md.beta_size();
    Matrix N = Matrix::Zero(q, q);
    Vector rhs = Vector::Zero(q);
    for (std::size_t m = 0; m < md.size(); ++m) {
        const Matrix& A = md.design().A[m];
        N.noalias() += A.transpose() * A;
        rhs.noalias() += A.transpose() * md.data()[m].y;
    }
    return solve_normal(std::move(N), rhs, ridge);
}

std::vector<double> e_step(const ModelData& md, const ModelParams& p) {
    const SubjectStats st = subject_stats(md, p);
    std::vector<double> pi(md.size());
    for (std::size_t m = 0; m < md.size(); ++m) pi[m] = posterior_weight({p.family, st.n[m], st.d[m]});
    return pi;
}

Vector update_beta(const ModelData& md, const std::vector<double>& pi, const CovParams& cov, bool* ridge) {
    const Eigen::Index q = md.beta_size();
    const auto factors = md.factorize(cov);
    // Weights enter relative to the largest one, so rescaling pi by a power
    // of two leaves the result bit-identical.
    double top = 0.0;
    for (double p : pi) top = std::max(top, p);
    if (!(top > 0.0) || !std::isfinite(top)) throw NumericalError("update_beta: weights must be finite, max > 0");
    const double unit = std::ldexp(1.0, -std::ilogb(top));
    Matrix N = Matrix::Zero(q, q);
    Vector rhs = Vector::Zero(q);
    for (std::size_t m = 0; m < md.size(); ++m) {
        const SpdFactor& f = factors[md.groups().group_of(m)];
        const Matrix Z = f.half_solve(md.design().A[m]);
        const Vector z = f.half_solve(Vector(md.data()[m].y));
        const double w = pi[m] * unit;
        N.noalias() += w * Z.transpose() * Z;
        rhs.noalias() += w * Z.transpose() * z;
    }
    return solve_normal(std::move(N), rhs, ridge);
}

double q1_value(const ModelData& md, const std::vector<double>& pi, const Vector& beta, const CovParams& cov) {
    const auto factors = md.factorize(cov);
    double q = 0.0;
    for (std::size_t m = 0; m < md.size(); ++m) {
        const SpdFactor& f = factors[md.groups().group_of(m)];
        q += -0.5 * f.log_det() - 0.5 * pi[m] * f.quad_form(md.residual(m, beta));
    }
    return q;
}

Vector q1_log_gradient(const ModelData& md, const std::vector<double>& pi, const Vector& beta, const CovParams& cov,
                       const std::vector<bool>& free) {
    const GroupMoments gm = group_moments(md, pi, beta);
    const auto idx = free_indices(free);
    Vector logc(static_cast<Eigen::Index>(idx.size()));
    const Vector c = cov.components();
    for (std::size_t k = 0; k < idx.size(); ++k) logc(static_cast<Eigen::Index>(k)) = std::log(c(idx[k]));
    Vector g;
    psi_objective(md, gm, cov, idx, logc, &g);
    return g;
}

PsiUpdate update_psi(const ModelData& md, const std::vector<double>& pi, const Vector& beta, const CovParams& start,
                     const std::vector<bool>& free, int budget) {
    const GroupMoments gm = group_moments(md, pi, beta);
    return optimize_psi(md, gm, start, free, budget, psi_bounds(md, start, residual_scale(md, beta)));
}

MixingFamily update_nu(const ModelData& md, const Vector& beta, const CovParams& cov, const MixingFamily& fam,
                       const FitConfig& cfg) {
    if (fam.free_count() == 0) return fam;
    const SubjectStats st = subject_stats(md, beta, md.factorize(cov));
    const DegreeBounds b = degree_bounds(fam);
    const double entry = marginal_loglik(st, fam);

    MixingFamily best = fam;
    double best_val = entry;
    auto consider = [&](const MixingFamily& f) {
        const double v = marginal_loglik(st, f);
        if (std::isfinite(v) && v > best_val) {
            best_val = v;
            best = f;
        }
    };

    // One free scalar: coarse log grid, then golden section between the
    // neighbours of the best grid point.
    auto search_1d = [&](double lo, double hi, auto&& make) {
        const int G = cfg.nu_grid_points;
        const double llo = std::log(lo), lhi = std::log(hi);
        std::vector<double> grid(static_cast<std::size_t>(G)), vals(static_cast<std::size_t>(G));
        std::size_t arg = 0;
        for (int i = 0; i < G; ++i) {
            grid[i] = llo + (lhi - llo) * i / (G - 1);
            vals[i] = marginal_loglik(st, make(std::exp(grid[i])));
            if (vals[i] > vals[arg]) arg = static_cast<std::size_t>(i);
        }
        const double a = grid[arg == 0 ? 0 : arg - 1];
        const double c = grid[std::min<std::size_t>(arg + 1, grid.size() - 1)];
        consider(make(std::exp(grid[arg])));
        const auto r = optim::maximize_golden([&](double x) { return marginal_loglik(st, make(std::exp(x))); }, a, c,
                                              cfg.nu_search_tol);
        consider(make(std::exp(r.x(0))));
    };

    if (fam.kind == FamilyKind::StudentT || fam.kind == FamilyKind::Slash ||
        (fam.kind == FamilyKind::ContaminatedNormal && fam.free_count() == 1)) {
        const bool on_nu = fam.kind != FamilyKind::ContaminatedNormal || !fam.nu_fixed;
        const double lo = on_nu ? b.nu_lo : b.gamma_lo;
        const double hi = on_nu ? b.nu_hi : b.gamma_hi;
        search_1d(lo, hi, [&](double v) {
            MixingFamily f = fam;
            (on_nu ? f.nu : f.gamma) = v;
            return f;
        });
    } else {
        auto make = [&](const Vector& x) {
            MixingFamily f = fam;
            f.nu = x(0);
            f.gamma = x(1);
            return f;
        };
        Vector lo(2), hi(2), start(2);
        lo << b.nu_lo, b.gamma_lo;
        hi << b.nu_hi, b.gamma_hi;
        start << fam.nu, fam.gamma;
        double start_val = entry;
        for (double nu : {0.05, 0.15, 0.3, 0.5, 0.8}) {
            for (double g : {0.05, 0.15, 0.3, 0.5, 0.8}) {
                Vector x(2);
                x << nu, g;
                const double v = marginal_loglik(st, make(x));
                if (v > start_val) {
                    start_val = v;
                    start = x;
                }
            }
        }
        consider(make(start));
        const auto r = optim::maximize_nelder_mead([&](const Vector& x) { return marginal_loglik(st, make(x)); },
                                                   start, lo, hi, 0.1, 1e-10, 400);
        consider(make(r.x));
    }
    return best;
}

FitResult fit(const ModelData& md, const MixingFamily& family, const FitConfig& cfg) {
    cfg.validate();
    FitResult res;
    res.basis = md.basis().config();

    MixingFamily fam = with_default_start(family);
    fam.validate();
    if (md.design().rank_deficient) res.warnings.push_back("stacked design is rank deficient; GLS uses a 1e-8 ridge");

    // Steps 1-3: OLS beta, psi from Q1 with unit weights, starting degrees.
    bool ridge = false;
    Vector beta = init_beta(md, &ridge);
    const std::vector<double> unit(md.size(), 1.0);
    const double s2 = residual_scale(md, beta);

    CovParams cov;
    std::vector<bool> free;
    if (cfg.initial_cov) {
        cov = *cfg.initial_cov;
        cov.validate();
        if (cov.theta.w.size() != md.data().p_x() || cov.phi_b.size() != md.data().p_w())
            throw DimensionError("initial covariance does not match the dataset's x/w columns");
        free = cfg.psi_free.empty() ? default_psi_free(cov) : cfg.psi_free;
        cov = update_psi(md, unit, beta, cov, free, cfg.psi_optimizer_budget).cov;
    } else {
        const CovParams shape = covariance_shape(md.data());
        const PsiBounds bounds = psi_bounds(md, shape, s2);
        const GroupMoments gm = group_moments(md, unit, beta);
        free = cfg.psi_free.empty() ? std::vector<bool>(static_cast<std::size_t>(shape.component_count()), true)
                                    : cfg.psi_free;
        double best_q = -std::numeric_limits<double>::infinity();
        for (double scale : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
            CovParams start = shape;
            start.theta.v0 = 0.4 * s2;
            for (Eigen::Index k = 0; k < start.theta.w.size(); ++k)
                start.theta.w(k) = std::exp(bounds.lower(1 + k)) * 1e10 * scale * 1e-2;
            for (Eigen::Index k = 0; k < start.phi_b.size(); ++k) {
                double mw = 0.0, cnt = 0.0;
                for (const auto& s : md.data().subjects()) {
                    mw += s.W.col(k).squaredNorm();
                    cnt += static_cast<double>(s.size());
                }
                start.phi_b(k) = mw > 0.0 ? 0.2 * s2 / (mw / cnt) : 0.2 * s2;
            }
            start.phi_eps = 0.4 * s2;
            const PsiUpdate u = optimize_psi(md, gm, start, free, cfg.psi_optimizer_budget, bounds);
            if (u.q_exit > best_q) {
                best_q = u.q_exit;
                cov = u.cov;
            }
            if (start.theta.w.size() == 0) break;
        }
    }

    ModelParams theta{beta, cov, fam};
    const ParamLayout layout(md.beta_size(), cov, free, fam);
    double ll = marginal_loglik(md, theta);
    res.loglik_trace.push_back(ll);

    int stalls = 0;
    try {
        for (int iter = 1; iter <= cfg.max_outer_iters; ++iter) {
            res.iterations = iter;
            const Vector before = layout.pack(theta);

            const std::vector<double> pi = e_step(md, theta);
            for (int sweep = 0; sweep < cfg.cm_sweeps; ++sweep) {
                theta.beta = update_beta(md, pi, theta.cov, &ridge);
                const PsiUpdate u = update_psi(md, pi, theta.beta, theta.cov, free, cfg.psi_optimizer_budget);
                theta.cov = u.cov;
            }
            theta.family = update_nu(md, theta.beta, theta.cov, theta.family, cfg);

            const double ll_new = marginal_loglik(md, theta);
            res.loglik_trace.push_back(ll_new);
            const double moved = (layout.pack(theta) - before).cwiseAbs().maxCoeff();
            const double gain = ll_new - ll;
            ll = ll_new;
            if (moved < cfg.param_tol) {
                res.converged = true;
                break;
            }
            stalls = gain < cfg.loglik_tol * std::max(1.0, std::abs(ll)) ? stalls + 1 : 0;
            if (stalls >= 3) {
                res.converged = true;
                break;
            }
        }
    } catch (const NumericalError& e) {
        res.converged = false;
        res.warnings.push_back(std::string("fit stopped: ") + e.what());
    }
    if (ridge) res.warnings.push_back("GLS normal matrix singular; 1e-8 ridge applied");
    if (!res.converged) res.warnings.push_back("ECME did not converge within the iteration budget");

    res.theta_hat = theta;
    res.loglik = ll;
    const SubjectStats st = subject_stats(md, theta);
    res.mahalanobis = st.d;
    res.weights.resize(md.size());
    for (std::size_t m = 0; m < md.size(); ++m) res.weights[m] = posterior_weight({theta.family, st.n[m], st.d[m]});
    res.free_parameters = static_cast<int>(layout.size());
    res.bic = bic(ll, res.free_parameters, md.data().total_observations());
    res.info.layout = layout;
    if (cfg.compute_information) {
        try {
            res.info = observed_information(md, theta, layout);
            if (res.info.pd_projected)
                res.warnings.push_back("observed information not positive definite; eigenvalues clipped");
        } catch (const NumericalError& e) {
            res.warnings.push_back(std::string("observed information failed: ") + e.what());
            res.info.covariance = Matrix::Zero(layout.size(), layout.size());
            res.info.J = Matrix::Zero(layout.size(), layout.size());
            res.info.pd_projected = true;
        }
    }
    return res;
}

FitResult fit(const Dataset& ds, const BasisConfig& basis, const MixingFamily& family, const FitConfig& cfg) {
    return fit(ModelData(ds, basis), family, cfg);
}

} // namespace hpfr
