#include "hpfr/bspline.hpp"

#include <cmath>
#include <sstream>

#include "hpfr/error.hpp"

namespace hpfr {

void BasisConfig::validate() const {
    if (degree < 0) throw ConfigError("basis degree must be >= 0");
    if (interior_knots < 0) throw ConfigError("interior knot count must be >= 0");
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo))
        throw ConfigError("basis domain must be a nonempty finite interval");
}

BSplineBasis::BSplineBasis(const BasisConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int p = cfg_.degree;
    const int k = cfg_.interior_knots;
    knots_.reserve(static_cast<std::size_t>(k + 2 * (p + 1)));
    for (int i = 0; i <= p; ++i) knots_.push_back(cfg_.lo);
    const double step = (cfg_.hi - cfg_.lo) / (k + 1);
    for (int i = 1; i <= k; ++i) knots_.push_back(cfg_.lo + step * i);
    for (int i = 0; i <= p; ++i) knots_.push_back(cfg_.hi);
}

// Index of the knot span [u_i, u_{i+1}) holding t; the right endpoint maps to
// the last non-degenerate span.
int BSplineBasis::find_span(double t) const {
    const int n = size() - 1;
    const int p = cfg_.degree;
    if (t >= knots_[n + 1]) return n;
    if (t <= knots_[p]) return p;
    int low = p, high = n + 1;
    int mid = (low + high) / 2;
    while (t < knots_[mid] || t >= knots_[mid + 1]) {
        if (t < knots_[mid]) high = mid;
        else low = mid;
        mid = (low + high) / 2;
    }
    return mid;
}

Vector BSplineBasis::evaluate(double t) const {
    if (!(t >= cfg_.lo && t <= cfg_.hi)) {
        std::ostringstream os;
        os << "t = " << t << " outside basis domain [" << cfg_.lo << ", " << cfg_.hi << "]";
        throw DomainError(os.str());
    }
    const int p = cfg_.degree;
    const int span = find_span(t);

    // Cox-de Boor triangular recursion over the p + 1 nonzero functions.
    std::vector<double> values(p + 1, 0.0), left(p + 1, 0.0), right(p + 1, 0.0);
    values[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - knots_[span + 1 - j];
        right[j] = knots_[span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }

    Vector row = Vector::Zero(size());
    for (int j = 0; j <= p; ++j) row(span - p + j) = values[j];
    return row;
}

Matrix BSplineBasis::evaluate(std::span<const double> t) const {
    Matrix out(static_cast<Eigen::Index>(t.size()), size());
    for (std::size_t i = 0; i < t.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = evaluate(t[i]).transpose();
    return out;
}

Matrix BSplineBasis::evaluate(const Vector& t) const {
    return evaluate(std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
}

Matrix build_bspline_basis(const BasisConfig& cfg, const Vector& t) {
    return BSplineBasis(cfg).evaluate(t);
}

} // namespace hpfr
