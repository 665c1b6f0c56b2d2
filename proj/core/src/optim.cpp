#include "hpfr/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace hpfr::optim {

namespace {

Vector project(const Vector& x, const Vector& lo, const Vector& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

// Gradient with components zeroed where the bound is active and the descent
// direction points out of the box.
Vector projected_gradient(const Vector& x, const Vector& g, const Vector& lo, const Vector& hi) {
    Vector pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if ((x(i) <= lo(i) && g(i) > 0.0) || (x(i) >= hi(i) && g(i) < 0.0)) pg(i) = 0.0;
    }
    return pg;
}

} // namespace

Result minimize_bfgs(const ValueGrad& f, const Vector& x0, const Vector& lower, const Vector& upper,
                     const BfgsOptions& opt) {
    const Eigen::Index n = x0.size();
    Result res;
    res.x = project(x0, lower, upper);
    Vector g(n);
    res.value = f(res.x, g);
    res.evaluations = 1;
    if (n == 0) {
        res.converged = true;
        return res;
    }
    if (!std::isfinite(res.value)) return res;

    Matrix H = Matrix::Identity(n, n);
    const double gmax = g.cwiseAbs().maxCoeff();
    if (gmax > 1.0) H /= gmax;

    Vector g_new(n);
    while (res.evaluations < opt.max_evaluations) {
        const Vector pg = projected_gradient(res.x, g, lower, upper);
        if (pg.cwiseAbs().maxCoeff() < opt.gradient_tol) {
            res.converged = true;
            break;
        }
        Vector dir = -H * pg;
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((res.x(i) <= lower(i) && dir(i) < 0.0) || (res.x(i) >= upper(i) && dir(i) > 0.0)) dir(i) = 0.0;
        }
        double slope = pg.dot(dir);
        if (!(slope < 0.0)) {
            H.setIdentity();
            dir = -pg;
            slope = -pg.squaredNorm();
        }

        double step = 1.0;
        bool accepted = false;
        Vector x_new;
        double f_new = 0.0;
        while (res.evaluations < opt.max_evaluations) {
            x_new = project(res.x + step * dir, lower, upper);
            f_new = f(x_new, g_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
            if (step < 1e-12) break;
        }
        if (!accepted) break;

        const Vector s = x_new - res.x;
        const Vector y = g_new - g;
        const double change = res.value - f_new;
        res.x = x_new;
        res.value = f_new;
        g = g_new;

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (res.evaluations <= 3) H *= sy / y.squaredNorm();
            const double rho = 1.0 / sy;
            const Matrix I = Matrix::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        if (change <= opt.value_tol * (1.0 + std::abs(res.value))) {
            res.converged = true;
            break;
        }
    }
    return res;
}

Result maximize_golden(const std::function<double(double)>& f, double lo, double hi, double tol, int max_evaluations) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    int evals = 2;
    while (std::abs(b - a) > tol && evals < max_evaluations) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        ++evals;
    }
    Result r;
    r.x = Vector::Constant(1, fc >= fd ? c : d);
    r.value = std::max(fc, fd);
    r.evaluations = evals;
    r.converged = std::abs(b - a) <= tol;
    return r;
}

Result maximize_nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0, const Vector& lower,
                            const Vector& upper, double initial_step, double tol, int max_evaluations) {
    const Eigen::Index n = x0.size();
    std::vector<Vector> pts;
    std::vector<double> vals;
    int evals = 0;
    auto eval = [&](const Vector& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };
    pts.push_back(project(x0, lower, upper));
    vals.push_back(eval(pts.back()));
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector p = pts.front();
        const double span = upper(i) - lower(i);
        double h = initial_step * span;
        if (p(i) + h > upper(i)) h = -h;
        p(i) += h;
        pts.push_back(project(p, lower, upper));
        vals.push_back(eval(pts.back()));
    }

    std::vector<std::size_t> order(pts.size());
    bool converged = false;
    while (evals < max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
        if (std::abs(vals[best] - vals[worst]) <= tol * (1.0 + std::abs(vals[best]))) {
            double spread = 0.0;
            for (const auto& p : pts) spread = std::max(spread, (p - pts[best]).cwiseAbs().maxCoeff());
            if (spread < 1e-6) {
                converged = true;
                break;
            }
        }
        Vector centroid = Vector::Zero(n);
        for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += pts[order[k]];
        centroid /= static_cast<double>(n);

        const Vector xr = project(centroid + (centroid - pts[worst]), lower, upper);
        const double fr = eval(xr);
        if (fr > vals[best]) {
            const Vector xe = project(centroid + 2.0 * (centroid - pts[worst]), lower, upper);
            const double fe = eval(xe);
            if (fe > fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
        } else if (fr > vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
        } else {
            const Vector xc = project(centroid + 0.5 * (pts[worst] - centroid), lower, upper);
            const double fcv = eval(xc);
            if (fcv > vals[worst]) {
                pts[worst] = xc;
                vals[worst] = fcv;
            } else {
                for (std::size_t k = 1; k < order.size(); ++k) {
                    const std::size_t idx = order[k];
                    pts[idx] = pts[best] + 0.5 * (pts[idx] - pts[best]);
                    vals[idx] = eval(pts[idx]);
                }
            }
        }
    }
    const auto it = std::max_element(vals.begin(), vals.end());
    Result r;
    r.x = pts[static_cast<std::size_t>(it - vals.begin())];
    r.value = *it;
    r.evaluations = evals;
    r.converged = converged;
    return r;
}

} // namespace hpfr::optim
