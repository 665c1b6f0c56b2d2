#pragma once

// Small synthetic datasets drawn from the model itself, for unit tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hpfr/data.hpp"
#include "hpfr/kernels.hpp"
#include "hpfr/linalg.hpp"
#include "hpfr/mixing.hpp"
#include "hpfr/rng.hpp"

namespace toy {

struct Options {
    int M = 6;
    int n = 12;
    std::uint64_t seed = 11;
    bool shared_grid = true;  // identical (X, W) for all subjects
    bool with_v = true;       // one fixed-effect covariate z
    hpfr::MixingFamily family = hpfr::MixingFamily::gaussian();
    double v0 = 0.3, w = 4.0, phi_b = 0.05, phi_eps = 0.02;
};

inline hpfr::ColumnRoles roles(const Options& o) {
    hpfr::ColumnRoles r;
    r.u_intercept = true;
    if (o.with_v) r.v = {"z"};
    r.w_intercept = true;
    r.x = {"t"};
    return r;
}

inline hpfr::CovParams cov(const Options& o) {
    hpfr::CovParams c;
    c.theta.v0 = o.v0;
    c.theta.w = hpfr::Vector::Constant(1, o.w);
    c.phi_b = hpfr::Vector::Constant(1, o.phi_b);
    c.phi_eps = o.phi_eps;
    return c;
}

inline hpfr::Dataset make(const Options& o) {
    using namespace hpfr;
    std::vector<Subject> subjects;
    const CovParams c = cov(o);
    for (int m = 0; m < o.M; ++m) {
        Rng rng = substream(o.seed, {static_cast<std::uint64_t>(m)});
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_real_distribution<double> u(-0.3, 0.3);
        Subject s;
        s.id = "s" + std::to_string(m);
        s.t.resize(o.n);
        for (int i = 0; i < o.n; ++i) {
            s.t(i) = static_cast<double>(i) / (o.n - 1);
            if (!o.shared_grid && i > 0 && i < o.n - 1) s.t(i) += u(rng) / (o.n - 1);
        }
        s.u = Vector::Ones(1);
        s.V.resize(o.n, o.with_v ? 1 : 0);
        if (o.with_v)
            for (int i = 0; i < o.n; ++i) s.V(i, 0) = z(rng);
        s.W = Matrix::Ones(o.n, 1);
        s.X = s.t;
        const Matrix S = composite_sigma(s.X, s.W, c);
        const SpdFactor f(S);
        Vector e(o.n);
        for (int i = 0; i < o.n; ++i) e(i) = z(rng);
        const double r = sample_prior_r(o.family, rng);
        s.y.resize(o.n);
        for (int i = 0; i < o.n; ++i) s.y(i) = std::sin(2.0 * s.t(i)) + (o.with_v ? 0.5 * s.V(i, 0) : 0.0);
        s.y += f.lower() * e / std::sqrt(r);
        subjects.push_back(std::move(s));
    }
    return Dataset(std::move(subjects), roles(o));
}

inline hpfr::BasisConfig basis(int interior = 3) { return {3, interior, 0.0, 1.0}; }

} // namespace toy
