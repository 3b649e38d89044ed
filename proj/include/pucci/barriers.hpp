#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pucci/core.hpp"
#include "pucci/grid2d.hpp"
#include "pucci/radial.hpp"

// Explosive radial supersolutions U = C R^alpha (R^2 - |x|^2)^{-alpha} in the
// Osserman style, comparison verdicts against them, and the local-bound
// experiment: interior sups of Dirichlet solves saturate as the boundary
// data grows.
namespace pucci::barriers {

// alpha = 2/(s-1) and the smallest constant making -Lambda dU + U^s >= 0 on
// the whole ball: C^{s-1} = 2 alpha Lambda max{N, 2(alpha+1)}.  The max's
// second argument carries the factor 2 because the (R^2-|x|^2)^{-alpha-2}
// coefficient is largest at the boundary, not the center.
std::pair<double, double> osserman_constant(const ProblemParams& params);

struct OssermanBarrier {
    double R = 0.0;
    double alpha = 0.0;
    double C = 0.0;
    ProblemParams params;

    OssermanBarrier(double radius, const ProblemParams& p);

    struct Derivs {
        double U = 0.0;
        double dU = 0.0;
        double d2U = 0.0;
    };

    // closed-form U, U', U'' at radius r; both derivatives are nonnegative
    Derivs eval(double r) const;
    double value(double r) const { return eval(r).U; }
};

// -Lambda (U'' + (N-1)U'/r) + U^s at one radius, evaluated in extended
// precision; the Laplacian degenerates to N U'' at r = 0
double osserman_residual_at(const OssermanBarrier& barrier, double r);

// min of osserman_residual_at over a uniform radial sample including r = 0;
// nonnegative up to rounding, and identically zero when N = 2(alpha+1)
double osserman_residual_check(const OssermanBarrier& barrier, int samples);

struct ComparisonVerdict {
    bool pass = false;
    double max_excess = 0.0;  // max of u - comparator
    int worst_index = -1;
};

// pass iff max(u - comparator) <= tol on the shared sample set
ComparisonVerdict comparison_verdict(const std::vector<double>& u,
                                     const std::vector<double>& comparator,
                                     double tol);

std::vector<double> sample_barrier(const OssermanBarrier& barrier,
                                   const radial::RadialGrid& grid);
std::vector<double> sample_barrier(const OssermanBarrier& barrier,
                                   const grid2d::CartesianGrid2& grid);

class ExperimentError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct LocalBoundReport {
    double inner_radius = 0.0;
    double outer_radius = 0.0;
    std::vector<double> boundary_values;
    std::vector<double> sup_inner;  // sup of |solution| over the inner ball
    double f_norm = 0.0;            // L^2 norm of the data over the outer ball
    double ratio = 0.0;             // max sup_inner / (1 + f_norm)
};

struct LocalBoundConfig {
    double h = 1.0 / 24.0;
    double c_reg = 0.0;
    grid2d::DirectionStencil stencil = grid2d::DirectionStencil::standard();
    grid2d::Grid2SolverConfig solver;
};

// Solves -M+(D^2 u) + |u|^{s-1} u = f on the outer disk once per boundary
// value and records the sup over the inner disk.  The interesting output is
// that the sups stop growing: the interior never sees how large the
// boundary data was.
LocalBoundReport local_bound_experiment(const ProblemParams& params,
                                        const std::function<double(double, double)>& f,
                                        double inner_radius, double outer_radius,
                                        std::vector<double> boundary_values,
                                        const LocalBoundConfig& cfg);

}  // namespace pucci::barriers
