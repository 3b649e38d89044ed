#include "pucci/blowup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pucci::blowup {

RateFit fit_blowup_rate(const grid2d::CartesianGrid2& grid,
                        const grid2d::GridFn& u, double domain_radius,
                        std::pair<double, double> fit_window,
                        const ProblemParams& params) {
    const auto [d_min, d_max] = fit_window;
    if (!(d_min > 0.0) || !(d_min < d_max))
        throw std::invalid_argument("fit_blowup_rate: bad fit window");
    if (static_cast<size_t>(grid.active_count()) != u.size())
        throw std::invalid_argument("fit_blowup_rate: solution/grid size mismatch");

    std::vector<std::pair<double, double>> pts;  // (d, u)
    for (int n = 0; n < grid.active_count(); ++n) {
        const auto [x, y] = grid.coords(n);
        const double d = domain_radius - std::hypot(x, y);
        const double v = u[static_cast<size_t>(n)];
        if (d >= d_min && d <= d_max && v > 0.0 && std::isfinite(v))
            pts.emplace_back(d, v);
    }
    if (pts.size() < 10)
        throw FitError("fit_blowup_rate: fewer than 10 usable samples in the window");

    // least squares of log u = log A - alpha log d
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [d, v] : pts) {
        const double lx = std::log(d);
        const double ly = std::log(v);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double m = static_cast<double>(pts.size());
    const double denom = m * sxx - sx * sx;
    const double slope = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
    const double intercept = (sy - slope * sx) / m;

    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / m;
    for (const auto& [d, v] : pts) {
        const double ly = std::log(v);
        const double fit = intercept + slope * std::log(d);
        ss_res += (ly - fit) * (ly - fit);
        ss_tot += (ly - mean_y) * (ly - mean_y);
    }

    RateFit out;
    out.fitted_exponent = -slope;
    out.fitted_amplitude = std::exp(intercept);
    out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    out.theoretical_exponent = 2.0 / (params.s - 1.0);
    const double alpha = out.theoretical_exponent;
    out.theoretical_amplitude = std::pow(
        params.Lambda * alpha * (alpha + 1.0), 1.0 / (params.s - 1.0));
    out.samples = static_cast<int>(pts.size());

    // curvature sign of the binned radial profile across the window
    const int bins = 12;
    std::vector<double> mean(bins, 0.0);
    std::vector<int> count(bins, 0);
    for (const auto& [d, v] : pts) {
        int b = static_cast<int>((d - d_min) / (d_max - d_min) * bins);
        b = std::clamp(b, 0, bins - 1);
        mean[static_cast<size_t>(b)] += v;
        ++count[static_cast<size_t>(b)];
    }
    int positive = 0, triples = 0;
    for (int b = 1; b + 1 < bins; ++b) {
        if (count[static_cast<size_t>(b - 1)] == 0 ||
            count[static_cast<size_t>(b)] == 0 ||
            count[static_cast<size_t>(b + 1)] == 0)
            continue;
        const double a = mean[static_cast<size_t>(b - 1)] / count[static_cast<size_t>(b - 1)];
        const double c = mean[static_cast<size_t>(b)] / count[static_cast<size_t>(b)];
        const double e = mean[static_cast<size_t>(b + 1)] / count[static_cast<size_t>(b + 1)];
        ++triples;
        if (a - 2.0 * c + e > 0.0) ++positive;
    }
    out.positive_curvature_fraction =
        triples > 0 ? static_cast<double>(positive) / triples : 0.0;
    return out;
}

EscalationResult solve_explosive(double domain_radius,
                                 const std::function<double(double, double)>& f,
                                 const ProblemParams& params,
                                 const BlowupSchedule& schedule,
                                 const BlowupConfig& cfg) {
    const auto& bvs = schedule.boundary_values;
    if (bvs.size() < 3)
        throw std::invalid_argument("solve_explosive: need at least 3 boundary values");
    for (size_t k = 0; k + 1 < bvs.size(); ++k)
        if (bvs[k + 1] <= bvs[k])
            throw std::invalid_argument(
                "solve_explosive: boundary values must strictly increase");
    if (!(bvs.front() > 0.0) || bvs.back() < 100.0 * bvs.front())
        throw std::invalid_argument(
            "solve_explosive: boundary values must span two decades");
    if (schedule.c_regs.size() != bvs.size())
        throw std::invalid_argument("solve_explosive: schedule arrays disagree");
    for (size_t k = 0; k < schedule.c_regs.size(); ++k) {
        if (!(schedule.c_regs[k] > 0.0))
            throw std::invalid_argument("solve_explosive: c_reg must be positive");
        if (k > 0 && schedule.c_regs[k] > schedule.c_regs[k - 1])
            throw std::invalid_argument("solve_explosive: c_reg must be nonincreasing");
    }
    if (schedule.fit_d_min < 2.0 * cfg.h)
        throw std::invalid_argument(
            "solve_explosive: fit window must start at least 2h from the boundary");

    EscalationResult out;
    out.grid = grid2d::make_grid(cfg.h, domain_radius, cfg.stencil);
    grid2d::GridFn rhs(static_cast<size_t>(out.grid.active_count()));
    for (int n = 0; n < out.grid.active_count(); ++n) {
        const auto [x, y] = out.grid.coords(n);
        rhs[static_cast<size_t>(n)] = f(x, y);
        if (!std::isfinite(rhs[static_cast<size_t>(n)]))
            throw std::invalid_argument("solve_explosive: data not finite on the grid");
    }
    const int center = out.grid.node_at(0, 0);
    if (center < 0) throw std::logic_error("solve_explosive: origin not active");

    grid2d::Grid2SolverConfig scfg = cfg.solver;
    for (size_t k = 0; k < bvs.size(); ++k) {
        const double g = bvs[k];
        grid2d::BoundaryFn bc = [g](double, double) { return g; };
        grid2d::GridFn u;
        try {
            u = grid2d::policy_iteration_solve(out.grid, cfg.stencil, rhs, params,
                                               schedule.c_regs[k], bc, scfg);
        } catch (const std::exception& e) {
            throw EscalationError("solve_explosive: rung " + std::to_string(k) +
                                      " failed: " + e.what(),
                                  static_cast<int>(k));
        }
        if (k > 0) {
            const grid2d::GridFn& prev = out.rungs.back();
            for (size_t i = 0; i < u.size(); ++i)
                if (u[i] < prev[i] - cfg.monotonicity_tol)
                    throw std::logic_error(
                        "solve_explosive: escalation lost monotonicity (scheme bug)");
        }
        out.center_value.push_back(u[static_cast<size_t>(center)]);
        scfg.initial_u = u;
        out.rungs.push_back(std::move(u));
    }

    out.fit = fit_blowup_rate(out.grid, out.rungs.back(), domain_radius,
                              {schedule.fit_d_min, schedule.fit_d_max}, params);
    return out;
}

}  // namespace pucci::blowup
