#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hpfr/bspline.hpp"
#include "hpfr/linalg.hpp"

namespace hpfr {

/// Maps CSV header names onto covariate roles.
///
/// u: time-constant scalar covariates multiplying the functional coefficients.
/// v: fixed-effect functional covariates. w: linear random-effect covariates.
/// x: inputs of the squared-exponential kernel. The intercept flags prepend a
/// constant-one column to the respective block.
struct ColumnRoles {
    std::vector<std::string> u;
    std::vector<std::string> v;
    std::vector<std::string> w;
    std::vector<std::string> x;
    bool u_intercept = true;
    bool v_intercept = false;
    bool w_intercept = false;

    int p_u() const { return static_cast<int>(u.size()) + (u_intercept ? 1 : 0); }
    int p_v() const { return static_cast<int>(v.size()) + (v_intercept ? 1 : 0); }
    int p_w() const { return static_cast<int>(w.size()) + (w_intercept ? 1 : 0); }
    int p_x() const { return static_cast<int>(x.size()); }
};

struct Subject {
    std::string id;
    Vector t;  // n
    Vector y;  // n
    Vector u;  // p_u
    Matrix V;  // n x p_v
    Matrix W;  // n x p_w
    Matrix X;  // n x p_x

    Eigen::Index size() const { return t.size(); }
};

/// Throws DataError unless all blocks agree in length, times are strictly
/// increasing and every value is finite. allow_empty admits n = 0, which only
/// prediction for an unobserved subject needs.
void validate_subject(const Subject& s, bool allow_empty = false);

class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<Subject> subjects, ColumnRoles roles);

    const std::vector<Subject>& subjects() const { return subjects_; }
    const Subject& operator[](std::size_t m) const { return subjects_[m]; }
    std::size_t size() const { return subjects_.size(); }
    const ColumnRoles& roles() const { return roles_; }

    int p_u() const { return p_u_; }
    int p_v() const { return p_v_; }
    int p_w() const { return p_w_; }
    int p_x() const { return p_x_; }
    Eigen::Index total_observations() const;
    double t_min() const;
    double t_max() const;

private:
    std::vector<Subject> subjects_;
    ColumnRoles roles_;
    int p_u_ = 0, p_v_ = 0, p_w_ = 0, p_x_ = 0;
};

/// Read a long-format CSV (header row; mandatory id, t, y columns). Rows are
/// grouped by id in order of first appearance and sorted by t. With
/// response_required = false a missing y column reads as zeros (target files).
Dataset load_dataset(const std::filesystem::path& path, const ColumnRoles& roles, bool response_required = true);
Dataset parse_dataset(std::istream& in, const ColumnRoles& roles, const std::string& source = "<stream>",
                      bool response_required = true);

/// Write id, t, y and every named covariate column with round-trip precision.
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
void write_dataset(std::ostream& out, const Dataset& ds);

/// Per-subject design blocks A_m = [u_m^T (x) Phi_m, V_m].
struct DesignMatrices {
    std::vector<Matrix> A;
    std::vector<Matrix> Phi;
    int basis_size = 0;
    int p_u = 0;
    int p_v = 0;
    /// Stacked design is rank deficient; the GLS solve falls back to a ridge.
    bool rank_deficient = false;

    Eigen::Index columns() const { return static_cast<Eigen::Index>(basis_size) * p_u + p_v; }
};

/// Design rows for arbitrary points: [u^T (x) Phi(t), V].
Matrix design_rows(const BSplineBasis& basis, const Vector& u, const Vector& t, const Matrix& V);

DesignMatrices assemble_design(const Dataset& ds, const BSplineBasis& basis);
DesignMatrices assemble_design(const Dataset& ds, const BasisConfig& cfg);

/// Unstack beta = (Vec(B), gamma) and evaluate Phi B u + V gamma directly.
Vector mean_from_blocks(const Matrix& Phi, const Matrix& B, const Vector& u, const Matrix& V, const Vector& gamma);

/// Basis over the observed time range of the dataset.
BasisConfig basis_for(const Dataset& ds, int degree = 3, int interior_knots = 18);

} // namespace hpfr
