#pragma once

#include <span>
#include <vector>

#include "hpfr/linalg.hpp"

namespace hpfr {

/// Clamped B-spline basis on [lo, hi] with equally spaced interior knots.
///
/// Boundary knots are repeated degree + 1 times, so the number of basis
/// functions is interior_knots + degree + 1 (22 for a cubic basis with 18
/// interior knots).
struct BasisConfig {
    int degree = 3;
    int interior_knots = 18;
    double lo = 0.0;
    double hi = 1.0;

    int size() const { return interior_knots + degree + 1; }
    void validate() const;
};

class BSplineBasis {
public:
    explicit BSplineBasis(const BasisConfig& cfg);

    const BasisConfig& config() const { return cfg_; }
    int size() const { return cfg_.size(); }
    const std::vector<double>& knots() const { return knots_; }

    /// Row of basis values at t. Throws DomainError outside [lo, hi].
    Vector evaluate(double t) const;
    /// |t| x D matrix of basis values.
    Matrix evaluate(std::span<const double> t) const;
    Matrix evaluate(const Vector& t) const;

private:
    int find_span(double t) const;

    BasisConfig cfg_;
    std::vector<double> knots_;
};

/// Convenience wrapper around BSplineBasis::evaluate.
Matrix build_bspline_basis(const BasisConfig& cfg, const Vector& t);

} // namespace hpfr
