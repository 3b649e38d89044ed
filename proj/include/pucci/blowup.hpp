#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pucci/core.hpp"
#include "pucci/grid2d.hpp"

// Boundary blow-up solutions on a disk: escalate constant Dirichlet data,
// verify the escalation is monotone, and fit the rate u ~ A d^{-alpha} of
// the limit profile against the distance d to the boundary.
namespace pucci::blowup {

struct BlowupSchedule {
    std::vector<double> boundary_values;  // strictly increasing, >= 2 decades
    std::vector<double> c_regs;           // positive, nonincreasing
    double fit_d_min = 0.0;               // >= 2h of the working grid
    double fit_d_max = 0.0;
};

struct RateFit {
    double fitted_exponent = 0.0;
    double fitted_amplitude = 0.0;
    double r_squared = 0.0;
    double theoretical_exponent = 0.0;  // 2/(s-1)
    double theoretical_amplitude = 0.0;  // (Lambda alpha (alpha+1))^{1/(s-1)}
    int samples = 0;
    // fraction of fit-window profile bins with positive curvature; the
    // amplitude prediction assumes the Lambda branch (u'' > 0) near the
    // boundary, so the fit reports whether that branch was actually active
    double positive_curvature_fraction = 0.0;
};

class FitError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class EscalationError : public std::runtime_error {
  public:
    EscalationError(const std::string& what, int rung_)
        : std::runtime_error(what), rung(rung_) {}
    int rung;
};

// Log-log least squares of u against boundary distance over all active
// nodes in the window [d_min, d_max]; needs at least 10 usable samples
// (positive values).  Nodes within 2h of the boundary are polluted by
// cut-cell interpolation and belong outside the window.
RateFit fit_blowup_rate(const grid2d::CartesianGrid2& grid,
                        const grid2d::GridFn& u, double domain_radius,
                        std::pair<double, double> fit_window,
                        const ProblemParams& params);

struct BlowupConfig {
    double h = 1.0 / 64.0;
    grid2d::DirectionStencil stencil = grid2d::DirectionStencil::standard();
    grid2d::Grid2SolverConfig solver;
    double monotonicity_tol = 1e-8;
};

struct EscalationResult {
    grid2d::CartesianGrid2 grid;
    std::vector<grid2d::GridFn> rungs;
    std::vector<double> center_value;  // per rung, at the node nearest 0
    RateFit fit;                       // on the final rung
};

// Solves the Dirichlet problem once per boundary value, warm-starting each
// rung from the previous one; rungs must be nodewise nondecreasing (a
// violation indicates a scheme bug and throws), and the final rung feeds
// the rate fit.
EscalationResult solve_explosive(double domain_radius,
                                 const std::function<double(double, double)>& f,
                                 const ProblemParams& params,
                                 const BlowupSchedule& schedule,
                                 const BlowupConfig& cfg);

}  // namespace pucci::blowup
