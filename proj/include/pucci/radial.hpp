#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "pucci/core.hpp"

namespace pucci::radial {

enum class Grading { uniform, geometric_toward_zero };

/// Strictly increasing radii in (0, R], last node exactly R.  The interval
/// (0, r1) carries no unknowns; the inner flux condition stands in for it.
struct RadialGrid {
    std::vector<double> nodes;
    double R = 1.0;
    Grading grading = Grading::uniform;

    int size() const { return static_cast<int>(nodes.size()); }
    double r(int i) const { return nodes[static_cast<size_t>(i)]; }
};

/// Builds a grid of n nodes on (0, R].  Geometric grading places nodes at
/// R * ratio^(n-k), packing resolution toward the origin; ratio must be in
/// (0, 1).  Node count must be >= 16.
RadialGrid make_radial_grid(double R, int n, Grading grading,
                            double ratio = 0.9);

struct RadialState {
    std::vector<double> u;
    std::vector<double> du;
    bool frozen = false;  // weights were computed from this exact state
};

/// Fills state.du from state.u: central differences at interior nodes,
/// one-sided at both ends.  Clears the frozen flag.
void recompute_derivative(const RadialGrid& grid, RadialState& state);

struct RadialRhs {
    enum class Kind { sampled, power_singularity, mollified };

    Kind kind = Kind::power_singularity;
    std::vector<double> samples;        // sampled: one value per grid node
    double alpha = 0.0;                 // f(r) = c * r^-alpha
    double c = 0.0;
    double mollification_epsilon = 0.0; // mollified: bump half-width

    static RadialRhs constant(double value);
    static RadialRhs power(double c, double alpha);
    static RadialRhs mollified_power(double c, double alpha, double epsilon);
    static RadialRhs sampled(std::vector<double> values);
};

/// Pointwise evaluation of f at grid node i.  Mollified kinds convolve the
/// power law with a unit-mass bump of half-width epsilon, reflecting at 0 and
/// clipping the magnitude at the value f(epsilon) so the convolution exists
/// for alpha >= 1.
double rhs_value(const RadialGrid& grid, const RadialRhs& rhs, int i);

/// Mollified power law at an arbitrary radius (not just grid nodes).
double mollified_power_value(double c, double alpha, double epsilon, double r);

/// Discrete mollification of sampled data: convolution with the unit-mass
/// bump, integrand interpolated from the samples and reflected at the
/// origin.
std::vector<double> mollify_samples(const RadialGrid& grid,
                                    const std::vector<double>& samples,
                                    double epsilon);

/// Weighted data integral I = int_0^R r^(n_plus - 1) |f| dr by trapezoid on
/// the grid plus the closed-form head segment below r1.  Returns +inf when
/// the head segment diverges (power data with alpha >= n_plus).
double admissibility_integral(const RadialGrid& grid, const RadialRhs& rhs,
                              const ProblemParams& params);

inline bool admissible(const RadialGrid& grid, const RadialRhs& rhs,
                       const ProblemParams& params) {
    return std::isfinite(admissibility_integral(grid, rhs, params));
}

/// State-dependent weights of the divergence form.  rho is accumulated as a
/// product of per-cell power laws r^(dim_eff - 1) based at radius 1, so its
/// defining integral is evaluated exactly for the piecewise-constant
/// effective dimension.
struct RadialWeights {
    std::vector<double> theta_big;   // per node, in {lambda, Lambda}
    std::vector<double> dim_eff;     // per node, in [n_plus, n_minus]
    std::vector<double> rho;         // per node, positive
    std::vector<double> rho_tilde;   // per node, rho / theta_big

    std::vector<double> theta_prime;    // per node, theta(u') branch value
    std::vector<double> cell_exponent;  // per cell, dim_eff - 1 of left node
    std::vector<double> log_prefix;     // per node, running exponent integral
    double log_at_one = 0.0;            // prefix value interpolated at r = 1

    /// rho at an arbitrary radius, extending the first/last cell's power law
    /// beyond the grid.
    double rho_at(const RadialGrid& grid, double r) const;
};

RadialWeights compute_weights(const RadialGrid& grid, RadialState& state,
                              const RadialRhs& rhs,
                              const ProblemParams& params);

/// Weight computation used inside the outer solver loop: branch choices
/// within `deadband` of the switching threshold keep the previous branch, so
/// states sitting on the switching manifold (for example constant plateaus)
/// do not flip on rounding noise.  flips, when non-null, receives the number
/// of nodes whose branch changed relative to prev.
RadialWeights compute_weights_hysteretic(const RadialGrid& grid,
                                         RadialState& state,
                                         const RadialRhs& rhs,
                                         const ProblemParams& params,
                                         const RadialWeights& prev,
                                         double deadband, int* flips);

/// Finite-volume residual per node:
///   -[(rho u')_{i+1/2} - (rho u')_{i-1/2}] / m_i
///     + rho_tilde_i (c_reg u_i + |u_i|^{s-1} u_i - f_i)
/// with zero flux at the inner boundary and the rho-weighted dual-cell mass
/// m_i.  The last entry is the Dirichlet defect u_M - 0.
std::vector<double> assemble_residual(const RadialGrid& grid,
                                      const RadialState& state,
                                      const RadialWeights& weights,
                                      const RadialRhs& rhs,
                                      const ProblemParams& params,
                                      double c_reg);

struct RadialSolverConfig {
    double tol = 1e-10;        // residual max-norm, relative to max(1, |rho_tilde f|)
    double tol_pos = 1e-8;     // positivity slack for f >= 0 checks
    int max_outer = 200;       // weight-freezing iterations
    int max_newton = 50;       // Newton steps per frozen-weight solve
    int max_halvings = 30;     // damping budget per Newton step
    double branch_deadband = 1e-9;
    double initial_constant = 0.0;
    std::vector<double> initial_u;  // optional, overrides initial_constant
    bool verify_invariants = true;
};

struct RadialSolveReport {
    int outer_iterations = 0;
    double final_residual = 0.0;
    std::vector<double> residual_history;
};

/// Solves -(rho u')' + rho_tilde (c_reg u + |u|^{s-1} u) = rho_tilde f on the
/// grid with u(R) = 0, freezing the weights per outer iteration and running
/// damped Newton on the tridiagonal semilinear system in between.  Throws
/// ConvergenceError (with residual history) on iteration exhaustion and
/// std::invalid_argument when rhs fails the admissibility gate.
RadialState solve_radial_bvp(const RadialGrid& grid, const RadialRhs& rhs,
                             const ProblemParams& params, double c_reg,
                             const RadialSolverConfig& cfg,
                             RadialSolveReport* report = nullptr);

struct RadialLadderRung {
    double radius;
    double c_reg;
    double epsilon;  // mollification width; 0 means raw data
};

struct RadialLadderSchedule {
    std::vector<RadialLadderRung> rungs;
    int nodes = 256;
    Grading grading = Grading::geometric_toward_zero;
    double ratio = 0.9;
    double monitor_r0 = 0.0;  // interior comparison window; defaults derived
    double monitor_r1 = 0.0;
    RadialSolverConfig solver;
};

class LadderError : public std::runtime_error {
public:
    LadderError(const std::string& what, int rung_)
        : std::runtime_error(what), rung(rung_) {}
    int rung;
};

struct RadialLadderResult {
    std::vector<RadialGrid> grids;
    std::vector<RadialState> states;
    std::vector<double> sup_interior_diff;  // one per consecutive pair
    std::vector<double> data_distance;      // int r^(n_plus-1) |f_n - f| per rung
    std::vector<double> u_at_first_node;    // innermost value per rung
    std::vector<double> int_rho_us;         // int rho |u_n|^s per rung
};

/// Runs the solve sequence for a decreasing schedule of regularizations and
/// mollification widths against the target data, reporting interior
/// stabilization sup |u_n - u_{n+1}| over the monitor window.
RadialLadderResult approximation_ladder(const RadialRhs& target,
                                        const ProblemParams& params,
                                        const RadialLadderSchedule& schedule);

struct WeakResidualReport {
    int test_functions = 0;
    double max_residual = 0.0;
    double int_rho_us = 0.0;
    double int_rho_du = 0.0;
    std::vector<std::pair<double, double>> int_rho_du_q;  // (q, integral)
    double flux_at_zero = 0.0;
    bool ok = false;  // all reported values finite
};

/// Tests the weak identity  int rho u' phi' + rho_tilde |u|^{s-1} u phi
/// = int rho_tilde f phi  against n_test piecewise-linear hats supported on
/// dyadic sub-intervals of (0, R).  The flux term is exact per cell for the
/// piecewise-constant face fluxes; the reaction terms use trapezoid weights.
WeakResidualReport weak_residual_check(const RadialGrid& grid,
                                       const RadialState& state,
                                       const RadialWeights& weights,
                                       const RadialRhs& rhs,
                                       const ProblemParams& params,
                                       int n_test);

struct RadialMajorantResult {
    RadialRhs rhs;              // sampled envelope g(r) per node
    bool admissible = false;
    double weighted_integral = 0.0;
};

/// Radial envelope g(r) = max over sampled angles of |f(x)|, |x| = r, with
/// its admissibility status.  n_angles >= 64.
RadialMajorantResult radial_majorant(
    const std::function<double(double, double)>& f_2d, const RadialGrid& grid,
    const ProblemParams& params, int n_angles = 64);

}  // namespace pucci::radial
