#include "pucci/core.hpp"

#include <cmath>

namespace pucci {

ProblemParams::ProblemParams(double lambda_, double Lambda_, int dim_, double s_)
    : lambda(lambda_), Lambda(Lambda_), dim(dim_), s(s_) {
    if (!(lambda > 0.0) || !(Lambda >= lambda))
        throw std::invalid_argument("ProblemParams: need 0 < lambda <= Lambda");
    if (dim < 1)
        throw std::invalid_argument("ProblemParams: need dim >= 1");
    if (!(s > 1.0))
        throw std::invalid_argument("ProblemParams: need s > 1");
}

double pucci_plus_eigen(std::span<const double> eigs, const ProblemParams& p) {
    if (static_cast<int>(eigs.size()) != p.dim)
        throw std::invalid_argument("pucci_plus_eigen: eigenvalue count != dim");
    double acc = 0.0;
    for (double e : eigs) acc += theta(e, p) * e;
    return acc;
}

double pucci_minus_eigen(std::span<const double> eigs, const ProblemParams& p) {
    if (static_cast<int>(eigs.size()) != p.dim)
        throw std::invalid_argument("pucci_minus_eigen: eigenvalue count != dim");
    double acc = 0.0;
    for (double e : eigs) acc += (e >= 0.0 ? p.lambda : p.Lambda) * e;
    return acc;
}

double pucci_radial(double /*u*/, double du, double d2u, double r,
                    const ProblemParams& p) {
    if (!(r > 0.0))
        throw std::domain_error("pucci_radial: r must be positive");
    return theta(d2u, p) * d2u + theta(du, p) * (p.dim - 1) * du / r;
}

double power_nonlinearity(double u, double s) {
    if (u == 0.0) return 0.0;
    return std::copysign(std::pow(std::abs(u), s), u);
}

double power_nonlinearity_derivative(double u, double s) {
    if (u == 0.0) return 0.0;
    return s * std::pow(std::abs(u), s - 1.0);
}

double power_gap_delta(double s) {
    if (!(s > 1.0))
        throw std::invalid_argument("power_gap_delta: need s > 1");
    return std::exp2(1.0 - s);
}

std::array<double, 2> SymmetricMatrix2::eigenvalues() const {
    const double mean = 0.5 * (a11 + a22);
    const double disc = std::hypot(0.5 * (a11 - a22), a12);
    return {mean - disc, mean + disc};
}

double pucci_plus(const SymmetricMatrix2& m, const ProblemParams& p) {
    const auto e = m.eigenvalues();
    if (p.dim != 2)
        throw std::invalid_argument("pucci_plus(SymmetricMatrix2): dim must be 2");
    return pucci_plus_eigen(std::span<const double>(e.data(), 2), p);
}

double pucci_minus(const SymmetricMatrix2& m, const ProblemParams& p) {
    const auto e = m.eigenvalues();
    if (p.dim != 2)
        throw std::invalid_argument("pucci_minus(SymmetricMatrix2): dim must be 2");
    return pucci_minus_eigen(std::span<const double>(e.data(), 2), p);
}

}  // namespace pucci
