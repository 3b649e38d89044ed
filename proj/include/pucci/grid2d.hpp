#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "pucci/core.hpp"

// Monotone wide-stencil solver for -M(D^2 u) + c u + |u|^{s-1} u = f on disks
// with Dirichlet data.  The extremal operator is realized in Bellman form,
// maximizing a*D_vv u + b*D_ww u over orthogonal direction pairs (v, w) and
// coefficients a, b in {lambda, Lambda}; the solver alternates policy
// improvement with damped Newton on the frozen monotone linear system.
namespace pucci::grid2d {

struct Offset {
    int p = 0;
    int q = 0;
};

// An orthogonal pair of lattice directions; w is v rotated by +90 degrees.
struct DirectionPair {
    Offset v;
    Offset w;
};

struct DirectionStencil {
    std::vector<DirectionPair> pairs;
    int max_width = 0;  // stencil radius in grid cells

    // 8 pairs with components up to 3, angular resolution about pi/8;
    // includes the axes pair and the diagonal pair.
    static DirectionStencil standard();
    // Axes pair only.  Matches the classical 5-point discretization and is
    // intended for degeneration checks at lambda == Lambda.
    static DirectionStencil axes_only();

    // Structural checks: nonempty, primitive vectors, w exactly perp(v),
    // axes pair present, max_width consistent.
    void validate() const;
};

// Cartesian lattice covering the open disk of the given radius.  Nodes with
// |x| < radius are active; the near-boundary flag marks active nodes where
// some stencil arm exits the disk.
struct CartesianGrid2 {
    double h = 0.0;
    double radius = 0.0;
    int half_span = 0;                       // bounding box [-half_span, half_span]^2
    std::vector<std::int32_t> index_of;      // box row-major -> active index or -1
    std::vector<std::array<int, 2>> active;  // lattice coordinates per active node
    std::vector<std::uint8_t> near_boundary;

    int active_count() const { return static_cast<int>(active.size()); }
    std::array<double, 2> coords(int node) const {
        return {h * active[static_cast<size_t>(node)][0],
                h * active[static_cast<size_t>(node)][1]};
    }
    int node_at(int i, int j) const {
        if (std::abs(i) > half_span || std::abs(j) > half_span) return -1;
        const int side = 2 * half_span + 1;
        return index_of[static_cast<size_t>((i + half_span) * side + (j + half_span))];
    }
};

CartesianGrid2 make_grid(double h, double radius, const DirectionStencil& stencil);

// One stencil arm from a node: either an interior neighbor, or the point
// where the ray meets the circle (then neighbor < 0 and t < 1 is the step
// fraction to the intersection).
struct Arm {
    std::int32_t neighbor = -1;
    double t = 1.0;
    double bx = 0.0;
    double by = 0.0;
};

// Precomputed arm geometry, node-major.  Directions are enumerated
// pair-major (v0, w0, v1, w1, ...); per direction the + arm precedes the -
// arm.
struct StencilTable {
    int n_dirs = 0;
    std::vector<double> step;  // h * |v| per direction
    std::vector<Arm> arms;     // active_count * n_dirs * 2 entries

    const Arm& arm(int node, int dir, bool plus) const {
        return arms[static_cast<size_t>((node * n_dirs + dir) * 2 + (plus ? 0 : 1))];
    }
};

StencilTable build_stencil_table(const CartesianGrid2& grid,
                                 const DirectionStencil& stencil);

using GridFn = std::vector<double>;                          // active-node values
using BoundaryFn = std::function<double(double, double)>;    // on the circle

// Three-point second difference with spacings a (to the minus sample) and b
// (to the plus sample); exact on quadratics, positive off-center weights.
double uneven_second_difference(double u_minus, double u_center, double u_plus,
                                double a, double b);

// Second difference along direction dir at a node, Dirichlet data filled in
// at cut arms.  Exits of the bounding box indicate a grid construction bug.
double directional_second_difference(const CartesianGrid2& grid,
                                     const StencilTable& table,
                                     std::span<const double> u,
                                     const BoundaryFn& dirichlet, int node,
                                     int dir);

struct PolicyEntry {
    std::int32_t pair = 0;
    double a = 0.0;  // coefficient on the v second difference
    double b = 0.0;  // coefficient on the w second difference
};

using Policy = std::vector<PolicyEntry>;

struct BellmanValue {
    double value = 0.0;
    PolicyEntry entry;
};

// max over pairs and coefficients of a*D_vv u + b*D_ww u at one node.  The
// per-direction coefficient max is closed-form; ties break to the lowest
// pair index, then to the smaller coefficient pair (zero curvature stores
// lambda, which realizes the same value).
BellmanValue discrete_pucci_plus(const CartesianGrid2& grid,
                                 const StencilTable& table,
                                 const DirectionStencil& stencil,
                                 std::span<const double> u,
                                 const BoundaryFn& dirichlet, int node,
                                 const ProblemParams& params);

// Frozen-policy linear operator M = -L_policy + c_reg I on active nodes,
// with the Dirichlet contributions of cut arms collected separately.  The
// matrix is a monotone M-matrix: positive diagonal, nonpositive
// off-diagonals.
class FrozenPolicyOperator {
  public:
    FrozenPolicyOperator(const CartesianGrid2& grid, const StencilTable& table,
                         const DirectionStencil& stencil, const Policy& policy,
                         double c_reg, const BoundaryFn& dirichlet);

    // M u - bc, the residual of the linear part at u
    GridFn apply(std::span<const double> u) const;
    // |M| |u| + |bc|, the one-ulp roundoff scale of apply() per row
    GridFn apply_magnitude(std::span<const double> u) const;
    // solve (M + diag(extra_diag)) x = rhs; extra_diag entries must be >= 0
    GridFn solve_shifted(std::span<const double> extra_diag,
                         std::span<const double> rhs) const;
    const GridFn& boundary_contribution() const;
    double min_boundary_value() const;

    struct Impl;

  private:
    std::shared_ptr<Impl> impl_;
};

enum class Extremal { plus_op, minus_op };

struct Grid2SolverConfig {
    // row-scaled Bellman residual: max_i |r_i| / (row magnitude_i + 1)
    double tol = 1e-10;
    double tol_pos = 1e-8;
    int max_policy = 60;
    int max_newton = 50;
    int max_halvings = 30;
    // incumbent policy entries survive value ties smaller than this
    double value_deadband = 1e-9;
    Extremal extremal = Extremal::plus_op;
    GridFn initial_u;  // optional warm start
    bool verify_invariants = true;
};

struct PolicySolveReport {
    int policy_iterations = 0;
    double final_residual = 0.0;
    std::vector<int> policy_changes;
    std::vector<double> residual_history;
};

class PolicyCyclingError : public std::runtime_error {
  public:
    PolicyCyclingError(const std::string& what, std::vector<int> changes)
        : std::runtime_error(what), policy_changes(std::move(changes)) {}
    std::vector<int> policy_changes;
};

// Solves -M+(D^2 u) + c_reg u + |u|^{s-1} u = f (or the minus operator via
// the identity M-(X) = -M+(-X), negating data and solution).  Terminates
// when the policy is stationary and the row-scaled Bellman residual is below
// tol; rows spanning many magnitudes (cut arms, large data) share one
// dimensionless norm.
GridFn policy_iteration_solve(const CartesianGrid2& grid,
                              const DirectionStencil& stencil,
                              const GridFn& rhs, const ProblemParams& params,
                              double c_reg, const BoundaryFn& dirichlet,
                              const Grid2SolverConfig& cfg,
                              PolicySolveReport* report = nullptr);

// Bellman residual -value + c_reg u + |u|^{s-1} u - f per active node.
GridFn bellman_residual(const CartesianGrid2& grid, const StencilTable& table,
                        const DirectionStencil& stencil, const GridFn& u,
                        const GridFn& rhs, const ProblemParams& params,
                        double c_reg, const BoundaryFn& dirichlet);

struct LadderSchedule {
    std::vector<double> radii;     // increasing
    std::vector<double> c_regs;    // positive, nonincreasing
    std::vector<double> epsilons;  // nonincreasing, 0 = raw data
    double monitor_radius = 0.0;   // < min radius
    double h = 0.0;
    DirectionStencil stencil;
    Grid2SolverConfig solver;
};

class LadderError : public std::runtime_error {
  public:
    LadderError(const std::string& what, int rung_) : std::runtime_error(what), rung(rung_) {}
    int rung;
};

struct LadderReport {
    std::vector<CartesianGrid2> grids;
    std::vector<GridFn> solutions;
    std::vector<double> sup_monitor_diff;  // consecutive rungs, shared lattice
    std::vector<double> sup_monitor_abs;
    std::vector<double> local_bound_ref;   // 1 + ||f_n||_{L^2} over the doubled window
    std::vector<double> min_u;
    std::vector<int> policy_iterations;
    std::vector<double> final_residuals;
};

// Exhaustion of the plane: solve on growing disks with vanishing zeroth-order
// regularization and mollification, zero Dirichlet data, warm-started from
// the previous rung extended by zero.
LadderReport whole_space_ladder(const std::function<double(double, double)>& f,
                                const ProblemParams& params,
                                const LadderSchedule& schedule);

// Mollified point evaluation of f at width epsilon (tensor Simpson rule over
// the unit-disk bump, normalized by the same rule).
double mollified_value_2d(const std::function<double(double, double)>& f,
                          double epsilon, double x, double y);

struct KatoReport {
    int checked = 0;
    int skipped = 0;          // nodes whose stencil straddles a sign change
    double max_excess = 0.0;  // over checked nodes, of -M+_h(|u|) + |u|^s - |f|
};

// Discrete check that |u| is a subsolution: away from kinks of |u| the
// residual -M+_h(|u|) + |u|^{s-1}|u| - |f| should not exceed solver noise.
KatoReport kato_subsolution_check(const CartesianGrid2& grid,
                                  const StencilTable& table,
                                  const DirectionStencil& stencil,
                                  const GridFn& u, const GridFn& f,
                                  const ProblemParams& params,
                                  const BoundaryFn& dirichlet);

}  // namespace pucci::grid2d
