#include "hpfr/likelihood.hpp"

#include <cmath>
#include <sstream>

#include "hpfr/error.hpp"

namespace hpfr {

void ModelParams::validate() const {
    cov.validate();
    family.validate();
    if (!beta.allFinite()) throw DomainError("beta has non-finite entries");
}

CovarianceGroups::CovarianceGroups(const Dataset& ds) {
    const auto& subs = ds.subjects();
    group_of_.assign(subs.size(), 0);
    for (std::size_t m = 0; m < subs.size(); ++m) {
        bool placed = false;
        for (std::size_t g = 0; g < members_.size() && !placed; ++g) {
            const Subject& r = subs[members_[g].front()];
            if (r.size() == subs[m].size() && r.X == subs[m].X && r.W == subs[m].W) {
                members_[g].push_back(m);
                group_of_[m] = g;
                placed = true;
            }
        }
        if (!placed) {
            group_of_[m] = members_.size();
            members_.push_back({m});
        }
    }
}

ModelData::ModelData(Dataset ds, const BasisConfig& basis)
    : data_(std::move(ds)), basis_(basis), design_(assemble_design(data_, basis_)), groups_(data_) {}

std::vector<SpdFactor> ModelData::factorize(const CovParams& cov) const {
    std::vector<SpdFactor> out;
    out.reserve(groups_.count());
    for (std::size_t g = 0; g < groups_.count(); ++g)
        out.emplace_back(composite_sigma(data_[groups_.representative(g)], cov));
    return out;
}

Vector ModelData::residual(std::size_t m, const Vector& beta) const {
    return data_[m].y - design_.A[m] * beta;
}

SubjectStats subject_stats(const ModelData& md, const Vector& beta, const std::vector<SpdFactor>& factors) {
    SubjectStats st;
    const std::size_t M = md.size();
    st.n.resize(M);
    st.d.resize(M);
    st.log_det.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        const SpdFactor& f = factors[md.groups().group_of(m)];
        st.n[m] = static_cast<int>(md.data()[m].size());
        st.d[m] = f.quad_form(md.residual(m, beta));
        st.log_det[m] = f.log_det();
    }
    return st;
}

SubjectStats subject_stats(const ModelData& md, const ModelParams& p) {
    return subject_stats(md, p.beta, md.factorize(p.cov));
}

double mahalanobis(const Subject& s, const Matrix& A, const ModelParams& p) {
    SpdFactor f(composite_sigma(s, p.cov));
    return f.quad_form(s.y - A * p.beta);
}

double marginal_loglik(const SubjectStats& st, const MixingFamily& fam) {
    double total = 0.0;
    for (std::size_t m = 0; m < st.n.size(); ++m) total += log_marginal_stats(fam, st.n[m], st.d[m], st.log_det[m]);
    return total;
}

double marginal_loglik(const ModelData& md, const ModelParams& p) {
    return marginal_loglik(subject_stats(md, p), p.family);
}

double bic(double loglik, int q, Eigen::Index n_obs) {
    return -2.0 * loglik + q * std::log(static_cast<double>(n_obs));
}

double bic(const ModelData& md, const ModelParams& p, int q) {
    return bic(marginal_loglik(md, p), q, md.data().total_observations());
}

std::vector<bool> default_psi_free(const CovParams& cov) {
    const Vector c = cov.components();
    std::vector<bool> free(static_cast<std::size_t>(c.size()));
    for (Eigen::Index i = 0; i < c.size(); ++i) free[static_cast<std::size_t>(i)] = c(i) > 0.0;
    return free;
}

ParamLayout::ParamLayout(Eigen::Index beta_size, const CovParams& shape, std::vector<bool> psi_free,
                         const MixingFamily& fam)
    : beta_size_(beta_size), psi_free_(std::move(psi_free)) {
    if (static_cast<Eigen::Index>(psi_free_.size()) != shape.component_count())
        throw DimensionError("ParamLayout: free mask does not match the covariance components");
    for (std::size_t i = 0; i < psi_free_.size(); ++i)
        if (psi_free_[i]) psi_index_.push_back(static_cast<int>(i));
    nu_free_ = fam.kind != FamilyKind::Gaussian && !fam.nu_fixed;
    gamma_free_ = fam.kind == FamilyKind::ContaminatedNormal && !fam.gamma_fixed;
}

Vector ParamLayout::pack(const ModelParams& p) const {
    Vector v(size());
    v.head(beta_size_) = p.beta;
    const Vector c = p.cov.components();
    Eigen::Index k = beta_size_;
    for (int i : psi_index_) v(k++) = std::log(c(i));
    if (nu_free_) v(k++) = std::log(p.family.nu);
    if (gamma_free_) v(k++) = std::log(p.family.gamma);
    return v;
}

ModelParams ParamLayout::unpack(const Vector& v, const ModelParams& base) const {
    if (v.size() != size()) throw DimensionError("ParamLayout::unpack: vector size mismatch");
    ModelParams p = base;
    p.beta = v.head(beta_size_);
    Vector c = base.cov.components();
    Eigen::Index k = beta_size_;
    for (int i : psi_index_) c(i) = std::exp(v(k++));
    p.cov.set_components(c);
    if (nu_free_) p.family.nu = std::exp(v(k++));
    if (gamma_free_) p.family.gamma = std::exp(v(k++));
    return p;
}

std::vector<std::string> ParamLayout::names(const CovParams& shape) const {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < beta_size_; ++i) out.push_back("beta[" + std::to_string(i) + "]");
    const Eigen::Index px = shape.theta.w.size();
    const Eigen::Index pw = shape.phi_b.size();
    for (int i : psi_index_) {
        if (i == 0) out.push_back("log_v0");
        else if (i <= px) out.push_back("log_w[" + std::to_string(i - 1) + "]");
        else if (i <= px + pw) out.push_back("log_phi_b[" + std::to_string(i - 1 - px) + "]");
        else out.push_back("log_phi_eps");
    }
    if (nu_free_) out.push_back("log_nu");
    if (gamma_free_) out.push_back("log_gamma");
    return out;
}

namespace {

double fd_step(double x, double rel, double min_step) { return std::max(min_step, rel * std::abs(x)); }

} // namespace

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double rel_step,
                                  double min_step) {
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step(x(i), rel_step, min_step);
        xp(i) = x(i) + h;
        const double fp = f(xp);
        xp(i) = x(i) - h;
        const double fm = f(xp);
        xp(i) = x(i);
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

Matrix finite_difference_hessian(const std::function<double(const Vector&)>& f, const Vector& x) {
    const Eigen::Index q = x.size();
    Matrix H(q, q);
    Vector h(q);
    for (Eigen::Index i = 0; i < q; ++i) h(i) = fd_step(x(i), 1e-4, 1e-5);
    const double f0 = f(x);
    Vector xp = x;
    for (Eigen::Index i = 0; i < q; ++i) {
        xp(i) = x(i) + h(i);
        const double fp = f(xp);
        xp(i) = x(i) - h(i);
        const double fm = f(xp);
        xp(i) = x(i);
        H(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            double acc = 0.0;
            for (int si : {1, -1}) {
                for (int sj : {1, -1}) {
                    xp(i) = x(i) + si * h(i);
                    xp(j) = x(j) + sj * h(j);
                    acc += si * sj * f(xp);
                }
            }
            xp(i) = x(i);
            xp(j) = x(j);
            H(i, j) = acc / (4.0 * h(i) * h(j));
            H(j, i) = H(i, j);
        }
    }
    return 0.5 * (H + H.transpose());
}

InformationMatrix observed_information(const ModelData& md, const ModelParams& theta_hat, const ParamLayout& layout) {
    // Perturbations of beta alone leave Sigma unchanged, so the factors of the
    // last covariance evaluated are reused.
    Vector cached_components;
    std::vector<SpdFactor> cached_factors;
    auto loglik = [&](const Vector& v) {
        const ModelParams p = layout.unpack(v, theta_hat);
        const Vector c = p.cov.components();
        if (cached_factors.empty() || c != cached_components) {
            cached_factors = md.factorize(p.cov);
            cached_components = c;
        }
        return marginal_loglik(subject_stats(md, p.beta, cached_factors), p.family);
    };
    const Vector x = layout.pack(theta_hat);

    InformationMatrix info;
    info.layout = layout;
    info.J = -finite_difference_hessian(loglik, x);
    info.gradient_norm = finite_difference_gradient(loglik, x).norm();

    Matrix Jp = info.J;
    info.pd_projected = project_to_pd(Jp, 1e-8);
    if (Jp.size() > 0) {
        SpdFactor f(Jp);
        info.covariance = f.inverse();
        info.covariance = 0.5 * (info.covariance + info.covariance.transpose()).eval();
    } else {
        info.covariance = Matrix(0, 0);
    }
    return info;
}

Vector standard_errors(const InformationMatrix& info, const ModelParams& theta_hat) {
    const Eigen::Index q = info.layout.size();
    Vector se(q);
    const Vector x = info.layout.pack(theta_hat);
    for (Eigen::Index i = 0; i < q; ++i) {
        const double s = std::sqrt(std::max(info.covariance(i, i), 0.0));
        se(i) = i < info.layout.beta_size() ? s : std::exp(x(i)) * s;
    }
    return se;
}

} // namespace hpfr
