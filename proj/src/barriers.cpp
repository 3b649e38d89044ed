#include "pucci/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pucci::barriers {

std::pair<double, double> osserman_constant(const ProblemParams& params) {
    const double alpha = 2.0 / (params.s - 1.0);
    const double N = params.dim;
    const double cs1 =
        2.0 * alpha * params.Lambda * std::max(N, 2.0 * (alpha + 1.0));
    return {alpha, std::pow(cs1, 1.0 / (params.s - 1.0))};
}

OssermanBarrier::OssermanBarrier(double radius, const ProblemParams& p)
    : R(radius), params(p) {
    if (!(radius > 0.0))
        throw std::invalid_argument("OssermanBarrier: radius must be positive");
    std::tie(alpha, C) = osserman_constant(p);
    // one-sided rounding: C^(s-1) must not round below the closed-form
    // constant, or the pole-amplified residual dips negative
    C *= 1.0 + 8.0 * std::numeric_limits<double>::epsilon();
}

OssermanBarrier::Derivs OssermanBarrier::eval(double r) const {
    if (!(std::abs(r) < R))
        throw std::domain_error("OssermanBarrier: point outside the open ball");
    const double w = R * R - r * r;
    const double pref = C * std::pow(R, alpha);
    Derivs d;
    d.U = pref * std::pow(w, -alpha);
    d.dU = 2.0 * alpha * std::abs(r) * pref * std::pow(w, -alpha - 1.0);
    d.d2U = 2.0 * alpha * pref * std::pow(w, -alpha - 2.0) *
            (w + 2.0 * (alpha + 1.0) * r * r);
    return d;
}

double osserman_residual_at(const OssermanBarrier& barrier, double r_in) {
    if (!(std::abs(r_in) < barrier.R))
        throw std::domain_error("osserman_residual_at: point outside the open ball");
    // extended precision: at N = 2(alpha+1) the residual vanishes
    // identically and double-width cancellation would dominate the minimum
    const long double R = barrier.R;
    const long double alpha = barrier.alpha;
    const long double Lam = barrier.params.Lambda;
    const long double N = barrier.params.dim;
    const long double s = barrier.params.s;
    const long double pref = static_cast<long double>(barrier.C) * std::pow(R, alpha);

    const long double r = std::abs(static_cast<long double>(r_in));
    const long double w = R * R - r * r;
    const long double U = pref * std::pow(w, -alpha);
    const long double d2U = 2.0L * alpha * pref * std::pow(w, -alpha - 2.0L) *
                            (w + 2.0L * (alpha + 1.0L) * r * r);
    long double lap;
    if (r == 0.0L) {
        lap = N * d2U;
    } else {
        const long double dU = 2.0L * alpha * r * pref * std::pow(w, -alpha - 1.0L);
        lap = d2U + (N - 1.0L) * dU / r;
    }
    return static_cast<double>(-Lam * lap + std::pow(U, s));
}

double osserman_residual_check(const OssermanBarrier& barrier, int samples) {
    if (samples < 100)
        throw std::invalid_argument("osserman_residual_check: need >= 100 samples");
    double min_res = std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k)
        min_res = std::min(min_res,
                           osserman_residual_at(barrier, barrier.R * k / samples));
    return min_res;
}

ComparisonVerdict comparison_verdict(const std::vector<double>& u,
                                     const std::vector<double>& comparator,
                                     double tol) {
    if (u.size() != comparator.size() || u.empty())
        throw std::invalid_argument("comparison_verdict: incompatible sample sets");
    ComparisonVerdict v;
    v.max_excess = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < u.size(); ++i) {
        const double excess = u[i] - comparator[i];
        if (excess > v.max_excess) {
            v.max_excess = excess;
            v.worst_index = static_cast<int>(i);
        }
    }
    v.pass = v.max_excess <= tol;
    return v;
}

std::vector<double> sample_barrier(const OssermanBarrier& barrier,
                                   const radial::RadialGrid& grid) {
    std::vector<double> out(grid.nodes.size());
    for (int i = 0; i < grid.size(); ++i)
        out[static_cast<size_t>(i)] = barrier.value(grid.r(i));
    return out;
}

std::vector<double> sample_barrier(const OssermanBarrier& barrier,
                                   const grid2d::CartesianGrid2& grid) {
    std::vector<double> out(static_cast<size_t>(grid.active_count()));
    for (int n = 0; n < grid.active_count(); ++n) {
        const auto [x, y] = grid.coords(n);
        out[static_cast<size_t>(n)] = barrier.value(std::hypot(x, y));
    }
    return out;
}

LocalBoundReport local_bound_experiment(const ProblemParams& params,
                                        const std::function<double(double, double)>& f,
                                        double inner_radius, double outer_radius,
                                        std::vector<double> boundary_values,
                                        const LocalBoundConfig& cfg) {
    if (!(inner_radius > 0.0) || !(inner_radius < outer_radius))
        throw std::invalid_argument(
            "local_bound_experiment: need 0 < inner radius < outer radius");
    if (boundary_values.size() < 3)
        throw std::invalid_argument(
            "local_bound_experiment: need at least 3 boundary values");
    std::sort(boundary_values.begin(), boundary_values.end());
    if (!(boundary_values.front() > 0.0) ||
        boundary_values.back() < 100.0 * boundary_values.front())
        throw std::invalid_argument(
            "local_bound_experiment: boundary values must span two orders of "
            "magnitude");

    const grid2d::CartesianGrid2 grid =
        grid2d::make_grid(cfg.h, outer_radius, cfg.stencil);
    grid2d::GridFn rhs(static_cast<size_t>(grid.active_count()));
    for (int n = 0; n < grid.active_count(); ++n) {
        const auto [x, y] = grid.coords(n);
        const double v = f(x, y);
        if (v < 0.0)
            throw std::invalid_argument("local_bound_experiment: data must be >= 0");
        rhs[static_cast<size_t>(n)] = v;
    }

    LocalBoundReport rep;
    rep.inner_radius = inner_radius;
    rep.outer_radius = outer_radius;
    rep.boundary_values = boundary_values;

    double l2 = 0.0;
    for (double v : rhs) l2 += cfg.h * cfg.h * v * v;
    rep.f_norm = std::sqrt(l2);

    const double in2 = inner_radius * inner_radius;
    grid2d::Grid2SolverConfig scfg = cfg.solver;
    for (double g : boundary_values) {
        grid2d::BoundaryFn bc = [g](double, double) { return g; };
        grid2d::GridFn u;
        try {
            u = grid2d::policy_iteration_solve(grid, cfg.stencil, rhs, params,
                                               cfg.c_reg, bc, scfg);
        } catch (const std::exception& e) {
            throw ExperimentError("local_bound_experiment: solve at boundary value " +
                                  std::to_string(g) + " failed: " + e.what());
        }
        double sup = 0.0;
        for (int n = 0; n < grid.active_count(); ++n) {
            const auto [x, y] = grid.coords(n);
            if (x * x + y * y < in2)
                sup = std::max(sup, std::abs(u[static_cast<size_t>(n)]));
        }
        rep.sup_inner.push_back(sup);
        scfg.initial_u = u;  // warm start the next, larger boundary value
    }

    rep.ratio = *std::max_element(rep.sup_inner.begin(), rep.sup_inner.end()) /
                (1.0 + rep.f_norm);
    return rep;
}

}  // namespace pucci::barriers
