#pragma once

#include <functional>

#include "hpfr/linalg.hpp"

namespace hpfr::optim {

struct Result {
    Vector x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Value and gradient at x; the gradient is written into the second argument.
using ValueGrad = std::function<double(const Vector&, Vector&)>;

struct BfgsOptions {
    int max_evaluations = 200;
    double gradient_tol = 1e-7;
    double value_tol = 1e-12;
};

/// Minimize over the box [lower, upper] by BFGS with projected backtracking
/// line search. Never returns a point worse than x0.
Result minimize_bfgs(const ValueGrad& f, const Vector& x0, const Vector& lower, const Vector& upper,
                     const BfgsOptions& opt = {});

/// Maximize a unimodal function on [lo, hi] by golden-section search.
Result maximize_golden(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-6,
                       int max_evaluations = 200);

/// Maximize inside a box by Nelder-Mead; vertices are clamped to the box.
Result maximize_nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0, const Vector& lower,
                            const Vector& upper, double initial_step = 0.1, double tol = 1e-8,
                            int max_evaluations = 400);

} // namespace hpfr::optim
