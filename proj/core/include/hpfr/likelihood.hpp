#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hpfr/bspline.hpp"
#include "hpfr/data.hpp"
#include "hpfr/kernels.hpp"
#include "hpfr/mixing.hpp"

namespace hpfr {

/// Theta = {beta = (Vec(B), gamma), psi = (theta, phi_b, phi_eps), nu}.
struct ModelParams {
    Vector beta;
    CovParams cov;
    MixingFamily family;

    void validate() const;
};

/// Subjects whose (X, W) blocks are bit-identical share one Sigma, so one
/// factorization serves the whole group.
class CovarianceGroups {
public:
    CovarianceGroups() = default;
    explicit CovarianceGroups(const Dataset& ds);

    std::size_t count() const { return members_.size(); }
    const std::vector<std::size_t>& members(std::size_t g) const { return members_[g]; }
    std::size_t group_of(std::size_t m) const { return group_of_[m]; }
    std::size_t representative(std::size_t g) const { return members_[g].front(); }

private:
    std::vector<std::vector<std::size_t>> members_;
    std::vector<std::size_t> group_of_;
};

/// Dataset with its basis, design blocks and covariance groups. Immutable.
class ModelData {
public:
    ModelData(Dataset ds, const BasisConfig& basis);

    const Dataset& data() const { return data_; }
    const BSplineBasis& basis() const { return basis_; }
    const DesignMatrices& design() const { return design_; }
    const CovarianceGroups& groups() const { return groups_; }
    std::size_t size() const { return data_.size(); }
    Eigen::Index beta_size() const { return design_.columns(); }

    /// Factor Sigma_g(psi) once per covariance group.
    std::vector<SpdFactor> factorize(const CovParams& cov) const;
    /// Residual y_m - A_m beta.
    Vector residual(std::size_t m, const Vector& beta) const;

private:
    Dataset data_;
    BSplineBasis basis_;
    DesignMatrices design_;
    CovarianceGroups groups_;
};

/// Per-subject sufficient statistics of the marginal density.
struct SubjectStats {
    std::vector<int> n;
    std::vector<double> d;        // Mahalanobis distances
    std::vector<double> log_det;  // log|Sigma_m|
};

SubjectStats subject_stats(const ModelData& md, const ModelParams& p);
SubjectStats subject_stats(const ModelData& md, const Vector& beta, const std::vector<SpdFactor>& factors);

/// d_m = (y_m - mu_m)^T Sigma_m^{-1} (y_m - mu_m).
double mahalanobis(const Subject& s, const Matrix& A, const ModelParams& p);

double marginal_loglik(const ModelData& md, const ModelParams& p);
double marginal_loglik(const SubjectStats& stats, const MixingFamily& fam);

/// -2 loglik + q log(N_obs), N_obs the total observation count.
double bic(double loglik, int q, Eigen::Index n_obs);
double bic(const ModelData& md, const ModelParams& p, int q);

/// Which variance components and degree parameters are estimated, and the
/// mapping of Theta to the unconstrained free-parameter vector:
/// beta (natural scale), free variance components (log), free degrees (log).
class ParamLayout {
public:
    ParamLayout() = default;
    ParamLayout(Eigen::Index beta_size, const CovParams& shape, std::vector<bool> psi_free, const MixingFamily& fam);

    Eigen::Index size() const { return beta_size_ + static_cast<Eigen::Index>(psi_index_.size()) + family_count(); }
    Eigen::Index beta_size() const { return beta_size_; }
    const std::vector<int>& psi_index() const { return psi_index_; }
    const std::vector<bool>& psi_free() const { return psi_free_; }
    bool nu_free() const { return nu_free_; }
    bool gamma_free() const { return gamma_free_; }
    Eigen::Index family_count() const { return (nu_free_ ? 1 : 0) + (gamma_free_ ? 1 : 0); }
    Eigen::Index psi_offset() const { return beta_size_; }
    Eigen::Index family_offset() const { return beta_size_ + static_cast<Eigen::Index>(psi_index_.size()); }

    Vector pack(const ModelParams& p) const;
    ModelParams unpack(const Vector& v, const ModelParams& base) const;
    /// Names such as beta[3], log_v0, log_w[0], log_phi_b[0], log_phi_eps, log_nu.
    std::vector<std::string> names(const CovParams& shape) const;

private:
    Eigen::Index beta_size_ = 0;
    std::vector<bool> psi_free_;
    std::vector<int> psi_index_;
    bool nu_free_ = false;
    bool gamma_free_ = false;
};

/// Every component free except those that are exactly zero (they stay frozen
/// because the log scale cannot represent them).
std::vector<bool> default_psi_free(const CovParams& cov);

struct InformationMatrix {
    ParamLayout layout;
    Matrix J;            // observed information on the free-parameter vector
    Matrix covariance;   // J^{-1}, after PD projection when needed
    bool pd_projected = false;
    double gradient_norm = 0.0;
};

/// Central finite-difference Hessian, step h_i = max(1e-5, 1e-4 |x_i|),
/// symmetrized as (H + H^T) / 2.
Matrix finite_difference_hessian(const std::function<double(const Vector&)>& f, const Vector& x);
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double rel_step = 1e-4, double min_step = 1e-5);

/// J = -Hessian of the marginal log-likelihood at theta_hat.
InformationMatrix observed_information(const ModelData& md, const ModelParams& theta_hat, const ParamLayout& layout);

/// Natural-scale standard errors via the delta method (log components
/// scaled by their value). Ordered as the layout.
Vector standard_errors(const InformationMatrix& info, const ModelParams& theta_hat);

} // namespace hpfr
