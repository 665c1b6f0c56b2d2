#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hpfr/likelihood.hpp"

namespace hpfr {

struct FitConfig {
    int max_outer_iters = 500;
    /// Stop when the free-parameter vector moves less than this (sup norm;
    /// beta on its natural scale, variance components and degrees in logs).
    double param_tol = 1e-6;
    /// Relative log-likelihood improvement counted as a stall; three
    /// consecutive stalls end the run as converged.
    double loglik_tol = 1e-8;
    /// Objective evaluations per variance-component update.
    int psi_optimizer_budget = 200;
    /// Coarse log-spaced grid before the golden-section refinement of nu.
    int nu_grid_points = 25;
    double nu_search_tol = 1e-5;
    /// (beta, psi) conditional-maximization sweeps per E-step. 1 is the plain
    /// single-pass ECME cycle.
    int cm_sweeps = 1;
    std::uint64_t seed = 20170101;
    bool compute_information = true;
    /// Starting covariance; heuristic multi-start when absent.
    std::optional<CovParams> initial_cov;
    /// Which covariance components are estimated (layout order). Empty means
    /// every component that is nonzero at the start.
    std::vector<bool> psi_free;

    void validate() const;
};

struct FitResult {
    ModelParams theta_hat;
    BasisConfig basis;
    std::vector<double> weights;      // final E-step weights pi_m
    std::vector<double> mahalanobis;  // d_m at theta_hat
    std::vector<double> loglik_trace; // marginal log-likelihood after each cycle (entry 0: start)
    double loglik = 0.0;
    int free_parameters = 0;
    double bic = 0.0;
    InformationMatrix info;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// Ordinary least squares on the stacked design (Sigma_m = I, pi_m = 1).
Vector init_beta(const ModelData& md, bool* ridge = nullptr);

/// pi_m = E[r_m | y_m] at the current parameters.
std::vector<double> e_step(const ModelData& md, const ModelParams& p);

/// Weighted GLS: [sum pi A^T S^-1 A]^-1 [sum pi A^T S^-1 y]. Adds a 1e-8 ridge
/// and sets *ridge when the normal matrix is singular.
Vector update_beta(const ModelData& md, const std::vector<double>& pi, const CovParams& cov, bool* ridge = nullptr);

/// Q1(beta, psi) = -1/2 sum log|Sigma_m| - 1/2 sum pi_m e_m^T Sigma_m^-1 e_m.
double q1_value(const ModelData& md, const std::vector<double>& pi, const Vector& beta, const CovParams& cov);

/// Gradient of Q1 with respect to the log of each free variance component
/// (free components in layout order).
Vector q1_log_gradient(const ModelData& md, const std::vector<double>& pi, const Vector& beta, const CovParams& cov,
                       const std::vector<bool>& free);

struct PsiUpdate {
    CovParams cov;
    double q_entry = 0.0;
    double q_exit = 0.0;
    bool improved = false;
    int evaluations = 0;
};

/// Maximize Q1 over the free variance components on the log scale. The
/// returned point is never worse than the entry point.
PsiUpdate update_psi(const ModelData& md, const std::vector<double>& pi, const Vector& beta, const CovParams& start,
                     const std::vector<bool>& free, int budget);

/// Maximize the actual marginal likelihood over the free degree parameters
/// inside degree_bounds. Fixed degrees are returned unchanged.
MixingFamily update_nu(const ModelData& md, const Vector& beta, const CovParams& cov, const MixingFamily& fam,
                       const FitConfig& cfg = {});

FitResult fit(const ModelData& md, const MixingFamily& family, const FitConfig& cfg = {});
FitResult fit(const Dataset& ds, const BasisConfig& basis, const MixingFamily& family, const FitConfig& cfg = {});

} // namespace hpfr
