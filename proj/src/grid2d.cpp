#include "pucci/grid2d.hpp"

#include <Eigen/SparseCore>
#include <Eigen/UmfPackSupport>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pucci::grid2d {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Offset perp(Offset v) { return Offset{-v.q, v.p}; }

bool same_offset(Offset a, Offset b) { return a.p == b.p && a.q == b.q; }

// Tensor Simpson rule on [-1,1]^2 against the radial unit bump, shared by
// every 2-D mollifier evaluation; normalizing by the same rule makes
// constants reproduce exactly.
struct BumpRule2 {
    struct Point {
        double x, y, w;
    };
    std::vector<Point> pts;
    double total = 0.0;

    BumpRule2() {
        const int n = 32;  // intervals per axis, even
        const double h = 2.0 / n;
        auto simpson = [n](int k) {
            return (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        };
        for (int i = 0; i <= n; ++i) {
            for (int j = 0; j <= n; ++j) {
                const double x = -1.0 + h * i;
                const double y = -1.0 + h * j;
                const double t = 1.0 - (x * x + y * y);
                if (t <= 0.0) continue;
                const double w =
                    simpson(i) * simpson(j) * (h / 3.0) * (h / 3.0) * std::exp(-1.0 / t);
                pts.push_back({x, y, w});
                total += w;
            }
        }
    }
};

const BumpRule2& bump_rule_2d() {
    static const BumpRule2 rule;
    return rule;
}

}  // namespace

DirectionStencil DirectionStencil::standard() {
    DirectionStencil s;
    const Offset base[] = {{1, 0}, {3, 1}, {2, 1}, {3, 2},
                           {1, 1}, {2, 3}, {1, 2}, {1, 3}};
    for (Offset v : base) s.pairs.push_back({v, perp(v)});
    s.max_width = 3;
    s.validate();
    return s;
}

DirectionStencil DirectionStencil::axes_only() {
    DirectionStencil s;
    s.pairs.push_back({{1, 0}, {0, 1}});
    s.max_width = 1;
    s.validate();
    return s;
}

void DirectionStencil::validate() const {
    if (pairs.empty())
        throw std::invalid_argument("DirectionStencil: no direction pairs");
    bool has_axes = false;
    int width = 0;
    for (const DirectionPair& pr : pairs) {
        if (pr.v.p == 0 && pr.v.q == 0)
            throw std::invalid_argument("DirectionStencil: zero direction");
        if (std::gcd(std::abs(pr.v.p), std::abs(pr.v.q)) != 1)
            throw std::invalid_argument("DirectionStencil: direction not primitive");
        if (!same_offset(pr.w, perp(pr.v)))
            throw std::invalid_argument("DirectionStencil: partner is not the perpendicular");
        if (same_offset(pr.v, {1, 0}) || same_offset(pr.v, {0, 1})) has_axes = true;
        width = std::max({width, std::abs(pr.v.p), std::abs(pr.v.q),
                          std::abs(pr.w.p), std::abs(pr.w.q)});
    }
    if (!has_axes)
        throw std::invalid_argument("DirectionStencil: axes pair missing");
    if (width > max_width)
        throw std::invalid_argument("DirectionStencil: max_width understates a direction");
}

CartesianGrid2 make_grid(double h, double radius, const DirectionStencil& stencil) {
    if (!(h > 0.0) || !(radius > 0.0))
        throw std::invalid_argument("make_grid: h and radius must be positive");
    stencil.validate();

    CartesianGrid2 g;
    g.h = h;
    g.radius = radius;
    g.half_span = static_cast<int>(std::ceil(radius / h)) + stencil.max_width + 1;
    const int side = 2 * g.half_span + 1;
    g.index_of.assign(static_cast<size_t>(side) * side, -1);

    const double r2 = radius * radius;
    for (int i = -g.half_span; i <= g.half_span; ++i) {
        for (int j = -g.half_span; j <= g.half_span; ++j) {
            if ((static_cast<double>(i) * i + static_cast<double>(j) * j) * h * h < r2) {
                g.index_of[static_cast<size_t>((i + g.half_span) * side +
                                               (j + g.half_span))] =
                    static_cast<std::int32_t>(g.active.size());
                g.active.push_back({i, j});
            }
        }
    }
    if (g.active_count() < 25)
        throw std::invalid_argument("make_grid: fewer than 25 active nodes");

    g.near_boundary.assign(g.active.size(), 0);
    for (int n = 0; n < g.active_count(); ++n) {
        const auto [i, j] = g.active[static_cast<size_t>(n)];
        for (const DirectionPair& pr : stencil.pairs) {
            for (Offset v : {pr.v, pr.w}) {
                for (int sgn : {1, -1}) {
                    const int ti = i + sgn * v.p;
                    const int tj = j + sgn * v.q;
                    if ((static_cast<double>(ti) * ti + static_cast<double>(tj) * tj) *
                            h * h >=
                        r2)
                        g.near_boundary[static_cast<size_t>(n)] = 1;
                }
            }
        }
    }
    return g;
}

StencilTable build_stencil_table(const CartesianGrid2& grid,
                                 const DirectionStencil& stencil) {
    StencilTable t;
    t.n_dirs = 2 * static_cast<int>(stencil.pairs.size());
    t.step.resize(static_cast<size_t>(t.n_dirs));
    std::vector<Offset> dirs(static_cast<size_t>(t.n_dirs));
    for (size_t k = 0; k < stencil.pairs.size(); ++k) {
        dirs[2 * k] = stencil.pairs[k].v;
        dirs[2 * k + 1] = stencil.pairs[k].w;
    }
    for (int d = 0; d < t.n_dirs; ++d)
        t.step[static_cast<size_t>(d)] =
            grid.h * std::hypot(dirs[static_cast<size_t>(d)].p,
                                dirs[static_cast<size_t>(d)].q);

    t.arms.resize(static_cast<size_t>(grid.active_count()) * t.n_dirs * 2);
    const double R2 = grid.radius * grid.radius;
    for (int n = 0; n < grid.active_count(); ++n) {
        const auto [i, j] = grid.active[static_cast<size_t>(n)];
        const double x = grid.h * i;
        const double y = grid.h * j;
        for (int d = 0; d < t.n_dirs; ++d) {
            const Offset v = dirs[static_cast<size_t>(d)];
            for (int sidx = 0; sidx < 2; ++sidx) {
                const int sgn = sidx == 0 ? 1 : -1;
                Arm& arm = t.arms[static_cast<size_t>((n * t.n_dirs + d) * 2 + sidx)];
                const int ti = i + sgn * v.p;
                const int tj = j + sgn * v.q;
                const double gx = grid.h * sgn * v.p;
                const double gy = grid.h * sgn * v.q;
                if ((static_cast<double>(ti) * ti + static_cast<double>(tj) * tj) *
                        grid.h * grid.h <
                    R2) {
                    arm.neighbor = static_cast<std::int32_t>(grid.node_at(ti, tj));
                    if (arm.neighbor < 0)
                        throw std::logic_error(
                            "build_stencil_table: interior neighbor missing from the "
                            "active set");
                    arm.t = 1.0;
                } else {
                    // smallest positive t with |x + t g| = radius
                    const double g2 = gx * gx + gy * gy;
                    const double xg = x * gx + y * gy;
                    const double disc = xg * xg + g2 * (R2 - (x * x + y * y));
                    const double tcut = (-xg + std::sqrt(disc)) / g2;
                    arm.neighbor = -1;
                    arm.t = std::clamp(tcut, 1e-12, 1.0);
                    arm.bx = x + arm.t * gx;
                    arm.by = y + arm.t * gy;
                }
            }
        }
    }
    return t;
}

double uneven_second_difference(double u_minus, double u_center, double u_plus,
                                double a, double b) {
    return 2.0 / (a + b) * ((u_plus - u_center) / b + (u_minus - u_center) / a);
}

double directional_second_difference(const CartesianGrid2& grid,
                                     const StencilTable& table,
                                     std::span<const double> u,
                                     const BoundaryFn& dirichlet, int node,
                                     int dir) {
    (void)grid;
    const Arm& ap = table.arm(node, dir, true);
    const Arm& am = table.arm(node, dir, false);
    const double sp = table.step[static_cast<size_t>(dir)];
    const double b = ap.t * sp;
    const double a = am.t * sp;
    const double up =
        ap.neighbor >= 0 ? u[static_cast<size_t>(ap.neighbor)] : dirichlet(ap.bx, ap.by);
    const double um =
        am.neighbor >= 0 ? u[static_cast<size_t>(am.neighbor)] : dirichlet(am.bx, am.by);
    return uneven_second_difference(um, u[static_cast<size_t>(node)], up, a, b);
}

BellmanValue discrete_pucci_plus(const CartesianGrid2& grid,
                                 const StencilTable& table,
                                 const DirectionStencil& stencil,
                                 std::span<const double> u,
                                 const BoundaryFn& dirichlet, int node,
                                 const ProblemParams& params) {
    BellmanValue best;
    best.value = -kInf;
    for (int k = 0; k < static_cast<int>(stencil.pairs.size()); ++k) {
        const double dvv =
            directional_second_difference(grid, table, u, dirichlet, node, 2 * k);
        const double dww =
            directional_second_difference(grid, table, u, dirichlet, node, 2 * k + 1);
        // per-direction coefficient max in closed form; zero curvature ties
        // resolve to lambda, realizing the same product
        const double a = dvv > 0.0 ? params.Lambda : params.lambda;
        const double b = dww > 0.0 ? params.Lambda : params.lambda;
        const double val = a * dvv + b * dww;
        if (val > best.value) {
            best.value = val;
            best.entry = PolicyEntry{k, a, b};
        }
    }
    return best;
}

struct FrozenPolicyOperator::Impl {
    Eigen::SparseMatrix<double> M;
    GridFn bc;
    double min_bc = kInf;
    bool has_bc = false;
    mutable Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;
    mutable bool analyzed = false;
};

FrozenPolicyOperator::FrozenPolicyOperator(const CartesianGrid2& grid,
                                           const StencilTable& table,
                                           const DirectionStencil& stencil,
                                           const Policy& policy, double c_reg,
                                           const BoundaryFn& dirichlet)
    : impl_(std::make_shared<Impl>()) {
    const int n = grid.active_count();
    if (static_cast<int>(policy.size()) != n)
        throw std::invalid_argument("FrozenPolicyOperator: policy size mismatch");
    if (c_reg < 0.0)
        throw std::invalid_argument("FrozenPolicyOperator: c_reg must be nonnegative");

    impl_->bc.assign(static_cast<size_t>(n), 0.0);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * 5);

    for (int node = 0; node < n; ++node) {
        const PolicyEntry& pe = policy[static_cast<size_t>(node)];
        if (pe.pair < 0 || pe.pair >= static_cast<int>(stencil.pairs.size()))
            throw std::invalid_argument("FrozenPolicyOperator: pair index out of range");
        double diag = c_reg;
        const double coefs[2] = {pe.a, pe.b};
        for (int half = 0; half < 2; ++half) {
            const int dir = 2 * pe.pair + half;
            const double coef = coefs[half];
            if (coef <= 0.0 || !std::isfinite(coef))
                throw std::invalid_argument(
                    "FrozenPolicyOperator: nonpositive diffusion coefficient");
            const Arm& ap = table.arm(node, dir, true);
            const Arm& am = table.arm(node, dir, false);
            const double sp = table.step[static_cast<size_t>(dir)];
            const double b = ap.t * sp;
            const double a = am.t * sp;
            const double cp = 2.0 / ((a + b) * b);
            const double cm = 2.0 / ((a + b) * a);
            diag += coef * (cp + cm);
            if (ap.neighbor >= 0) {
                trip.emplace_back(node, ap.neighbor, -coef * cp);
            } else {
                const double gval = dirichlet(ap.bx, ap.by);
                impl_->bc[static_cast<size_t>(node)] += coef * cp * gval;
                impl_->min_bc = std::min(impl_->min_bc, gval);
                impl_->has_bc = true;
            }
            if (am.neighbor >= 0) {
                trip.emplace_back(node, am.neighbor, -coef * cm);
            } else {
                const double gval = dirichlet(am.bx, am.by);
                impl_->bc[static_cast<size_t>(node)] += coef * cm * gval;
                impl_->min_bc = std::min(impl_->min_bc, gval);
                impl_->has_bc = true;
            }
        }
        trip.emplace_back(node, node, diag);
    }

    impl_->M.resize(n, n);
    impl_->M.setFromTriplets(trip.begin(), trip.end());
    impl_->M.makeCompressed();
}

GridFn FrozenPolicyOperator::apply(std::span<const double> u) const {
    const Eigen::Map<const Eigen::VectorXd> uv(u.data(),
                                               static_cast<Eigen::Index>(u.size()));
    Eigen::VectorXd out = impl_->M * uv;
    GridFn res(u.size());
    for (size_t i = 0; i < u.size(); ++i)
        res[i] = out[static_cast<Eigen::Index>(i)] - impl_->bc[i];
    return res;
}

GridFn FrozenPolicyOperator::apply_magnitude(std::span<const double> u) const {
    GridFn res(u.size(), 0.0);
    for (int k = 0; k < impl_->M.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(impl_->M, k); it; ++it)
            res[static_cast<size_t>(it.row())] +=
                std::abs(it.value()) * std::abs(u[static_cast<size_t>(it.col())]);
    for (size_t i = 0; i < u.size(); ++i) res[i] += std::abs(impl_->bc[i]);
    return res;
}

GridFn FrozenPolicyOperator::solve_shifted(std::span<const double> extra_diag,
                                           std::span<const double> rhs) const {
    Eigen::SparseMatrix<double> A = impl_->M;
    for (int i = 0; i < A.rows(); ++i) {
        const double e = extra_diag[static_cast<size_t>(i)];
        if (e < 0.0 || !std::isfinite(e))
            throw std::invalid_argument("solve_shifted: diagonal shift must be >= 0");
        A.coeffRef(i, i) += e;
    }
    if (!impl_->analyzed) {
        impl_->lu.analyzePattern(A);
        impl_->analyzed = true;
    }
    impl_->lu.factorize(A);
    if (impl_->lu.info() != Eigen::Success)
        throw std::runtime_error("solve_shifted: sparse factorization failed");
    const Eigen::Map<const Eigen::VectorXd> b(rhs.data(),
                                              static_cast<Eigen::Index>(rhs.size()));
    Eigen::VectorXd x = impl_->lu.solve(b);
    return GridFn(x.data(), x.data() + x.size());
}

const GridFn& FrozenPolicyOperator::boundary_contribution() const {
    return impl_->bc;
}

double FrozenPolicyOperator::min_boundary_value() const {
    return impl_->has_bc ? impl_->min_bc : 0.0;
}

GridFn bellman_residual(const CartesianGrid2& grid, const StencilTable& table,
                        const DirectionStencil& stencil, const GridFn& u,
                        const GridFn& rhs, const ProblemParams& params,
                        double c_reg, const BoundaryFn& dirichlet) {
    GridFn res(u.size());
    for (int node = 0; node < grid.active_count(); ++node) {
        const size_t sn = static_cast<size_t>(node);
        const double val =
            discrete_pucci_plus(grid, table, stencil, u, dirichlet, node, params).value;
        res[sn] = -val + c_reg * u[sn] + power_nonlinearity(u[sn], params.s) - rhs[sn];
    }
    return res;
}

namespace {

// Same arithmetic as directional_second_difference with every cancellation
// replaced by a sum; the magnitude the stencil row is built from.
double directional_second_magnitude(const StencilTable& table,
                                    std::span<const double> u,
                                    const BoundaryFn& dirichlet, int node,
                                    int dir) {
    const Arm& ap = table.arm(node, dir, true);
    const Arm& am = table.arm(node, dir, false);
    const double sp = table.step[static_cast<size_t>(dir)];
    const double b = ap.t * sp;
    const double a = am.t * sp;
    const double up = std::abs(
        ap.neighbor >= 0 ? u[static_cast<size_t>(ap.neighbor)] : dirichlet(ap.bx, ap.by));
    const double um = std::abs(
        am.neighbor >= 0 ? u[static_cast<size_t>(am.neighbor)] : dirichlet(am.bx, am.by));
    const double uc = std::abs(u[static_cast<size_t>(node)]);
    return 2.0 / (a + b) * ((up + uc) / b + (um + uc) / a);
}

// Row scale of the stopping norm: |r_i| / scale_i is dimensionless and
// uniform across rows whose magnitudes span many orders (cut arms, large
// boundary data), where a single absolute max-norm is unreachable.
double bellman_row_scale(const StencilTable& table, std::span<const double> u,
                         const BoundaryFn& dirichlet, int node,
                         const PolicyEntry& e, double c_reg, double s,
                         double rhsnode) {
    const size_t sn = static_cast<size_t>(node);
    const double magv =
        directional_second_magnitude(table, u, dirichlet, node, 2 * e.pair);
    const double magw =
        directional_second_magnitude(table, u, dirichlet, node, 2 * e.pair + 1);
    return e.a * magv + e.b * magw + c_reg * std::abs(u[sn]) +
           std::abs(power_nonlinearity(u[sn], s)) + std::abs(rhsnode) + 1.0;
}

// Damped Newton on the frozen semilinear system; returns the final row-scaled
// residual max-norm.  Row scaling keeps the line search moving on interior
// rows after near-boundary rows reach their much larger floors.
double newton_frozen_2d(const FrozenPolicyOperator& op, const GridFn& rhs,
                        const ProblemParams& params,
                        const Grid2SolverConfig& cfg, double tol_rel,
                        int max_steps, GridFn& u) {
    const size_t n = u.size();
    auto residual = [&](const GridFn& w) {
        GridFn r = op.apply(w);
        for (size_t i = 0; i < n; ++i)
            r[i] += power_nonlinearity(w[i], params.s) - rhs[i];
        return r;
    };
    auto scaled = [&](const GridFn& r, const GridFn& w) {
        const GridFn mag = op.apply_magnitude(w);
        double rn = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double sc = mag[i] +
                              std::abs(power_nonlinearity(w[i], params.s)) +
                              std::abs(rhs[i]) + 1.0;
            rn = std::max(rn, std::abs(r[i]) / sc);
        }
        return rn;
    };
    GridFn res = residual(u);
    double rn = scaled(res, u);
    for (int it = 0; it < max_steps && rn > tol_rel; ++it) {
        GridFn shift(n), neg(n);
        for (size_t i = 0; i < n; ++i) {
            shift[i] = power_nonlinearity_derivative(u[i], params.s);
            neg[i] = -res[i];
        }
        GridFn step = op.solve_shifted(shift, neg);

        double t = 1.0;
        GridFn trial(n);
        double rn_trial = kInf;
        GridFn res_trial;
        for (int halving = 0; halving <= cfg.max_halvings; ++halving) {
            for (size_t i = 0; i < n; ++i) trial[i] = u[i] + t * step[i];
            res_trial = residual(trial);
            rn_trial = scaled(res_trial, trial);
            if (rn_trial < rn) break;
            t *= 0.5;
        }
        if (rn_trial >= rn) break;  // residual floor reached
        u.swap(trial);
        res.swap(res_trial);
        rn = rn_trial;
    }
    return rn;
}

GridFn solve_plus(const CartesianGrid2& grid, const DirectionStencil& stencil,
                  const GridFn& rhs, const ProblemParams& params, double c_reg,
                  const BoundaryFn& dirichlet, const Grid2SolverConfig& cfg,
                  PolicySolveReport* report) {
    const int n = grid.active_count();
    if (static_cast<int>(rhs.size()) != n)
        throw std::invalid_argument("policy_iteration_solve: rhs size mismatch");
    for (double v : rhs)
        if (!std::isfinite(v))
            throw std::invalid_argument("policy_iteration_solve: non-finite rhs");

    const StencilTable table = build_stencil_table(grid, stencil);

    GridFn u;
    if (!cfg.initial_u.empty()) {
        if (static_cast<int>(cfg.initial_u.size()) != n)
            throw std::invalid_argument("policy_iteration_solve: initial_u size mismatch");
        u = cfg.initial_u;
    } else {
        u.assign(static_cast<size_t>(n), 0.0);
    }

    Policy policy(static_cast<size_t>(n));
    for (int node = 0; node < n; ++node)
        policy[static_cast<size_t>(node)] =
            discrete_pucci_plus(grid, table, stencil, u, dirichlet, node, params).entry;

    std::vector<int> changes_hist;
    std::vector<double> res_hist;

    for (int pit = 0; pit < cfg.max_policy; ++pit) {
        const FrozenPolicyOperator op(grid, table, stencil, policy, c_reg, dirichlet);
        // one Newton step per improvement sweep while the policy is moving
        // (each factorization advances a policy about to change anyway); full
        // Newton once it is stationary, so the stop test sees a solved system
        const bool moving = changes_hist.empty() || changes_hist.back() > 0;
        newton_frozen_2d(op, rhs, params, cfg, 0.01 * cfg.tol,
                         moving ? 1 : cfg.max_newton, u);

        // policy improvement: switch only on strict improvement beyond the
        // deadband so exact ties cannot cycle
        int changed = 0;
        double bellman = 0.0;
        for (int node = 0; node < n; ++node) {
            const size_t sn = static_cast<size_t>(node);
            const BellmanValue best =
                discrete_pucci_plus(grid, table, stencil, u, dirichlet, node, params);
            const PolicyEntry& inc = policy[sn];
            const double dvv = directional_second_difference(grid, table, u, dirichlet,
                                                             node, 2 * inc.pair);
            const double dww = directional_second_difference(grid, table, u, dirichlet,
                                                             node, 2 * inc.pair + 1);
            const double inc_val = inc.a * dvv + inc.b * dww;
            if (best.value - inc_val >
                cfg.value_deadband * std::max(1.0, std::abs(best.value))) {
                policy[sn] = best.entry;
                ++changed;
            }
            const double resid = -best.value + c_reg * u[sn] +
                                 power_nonlinearity(u[sn], params.s) - rhs[sn];
            const double sc = bellman_row_scale(table, u, dirichlet, node,
                                                best.entry, c_reg, params.s,
                                                rhs[sn]);
            bellman = std::max(bellman, std::abs(resid) / sc);
        }
        changes_hist.push_back(changed);
        res_hist.push_back(bellman);

        if (changed == 0 && bellman <= cfg.tol) {
            if (report != nullptr) {
                report->policy_iterations = pit + 1;
                report->final_residual = bellman;
                report->policy_changes = changes_hist;
                report->residual_history = res_hist;
            }
            if (cfg.verify_invariants) {
                bool data_nonneg = op.min_boundary_value() >= 0.0;
                for (double v : rhs) data_nonneg = data_nonneg && v >= 0.0;
                if (data_nonneg) {
                    for (double v : u)
                        if (v < -cfg.tol_pos)
                            throw std::logic_error(
                                "positivity violated for nonnegative data");
                }
            }
            return u;
        }
    }
    if (report != nullptr) {
        report->policy_iterations = cfg.max_policy;
        report->final_residual = res_hist.empty() ? kInf : res_hist.back();
        report->policy_changes = changes_hist;
        report->residual_history = res_hist;
    }
    throw PolicyCyclingError(
        "policy_iteration_solve: policy not stationary within max_policy "
        "iterations",
        changes_hist);
}

}  // namespace

GridFn policy_iteration_solve(const CartesianGrid2& grid,
                              const DirectionStencil& stencil,
                              const GridFn& rhs, const ProblemParams& params,
                              double c_reg, const BoundaryFn& dirichlet,
                              const Grid2SolverConfig& cfg,
                              PolicySolveReport* report) {
    if (cfg.extremal == Extremal::plus_op)
        return solve_plus(grid, stencil, rhs, params, c_reg, dirichlet, cfg, report);

    // minus operator through the swap identity: solve the plus problem for
    // -u with negated data
    GridFn neg_rhs(rhs.size());
    for (size_t i = 0; i < rhs.size(); ++i) neg_rhs[i] = -rhs[i];
    Grid2SolverConfig sub = cfg;
    sub.extremal = Extremal::plus_op;
    sub.verify_invariants = false;
    for (double& v : sub.initial_u) v = -v;
    BoundaryFn neg_bc = [&dirichlet](double x, double y) { return -dirichlet(x, y); };
    GridFn w = solve_plus(grid, stencil, neg_rhs, params, c_reg, neg_bc, sub, report);
    for (double& v : w) v = -v;

    if (cfg.verify_invariants) {
        bool data_nonneg = true;
        for (double v : rhs) data_nonneg = data_nonneg && v >= 0.0;
        if (data_nonneg) {
            const StencilTable table = build_stencil_table(grid, stencil);
            for (const Arm& arm : table.arms)
                if (arm.neighbor < 0)
                    data_nonneg = data_nonneg && dirichlet(arm.bx, arm.by) >= 0.0;
        }
        if (data_nonneg) {
            for (double v : w)
                if (v < -cfg.tol_pos)
                    throw std::logic_error("positivity violated for nonnegative data");
        }
    }
    return w;
}

double mollified_value_2d(const std::function<double(double, double)>& f,
                          double epsilon, double x, double y) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("mollified_value_2d: epsilon must be positive");
    const BumpRule2& rule = bump_rule_2d();
    double acc = 0.0;
    for (const auto& pt : rule.pts)
        acc += pt.w * f(x - epsilon * pt.x, y - epsilon * pt.y);
    return acc / rule.total;
}

LadderReport whole_space_ladder(const std::function<double(double, double)>& f,
                                const ProblemParams& params,
                                const LadderSchedule& schedule) {
    const size_t m = schedule.radii.size();
    if (m == 0) throw std::invalid_argument("whole_space_ladder: empty schedule");
    if (schedule.c_regs.size() != m || schedule.epsilons.size() != m)
        throw std::invalid_argument("whole_space_ladder: schedule arrays disagree");
    if (!(schedule.h > 0.0))
        throw std::invalid_argument("whole_space_ladder: invalid spacing");
    for (size_t k = 0; k + 1 < m; ++k) {
        if (schedule.radii[k + 1] <= schedule.radii[k])
            throw std::invalid_argument("whole_space_ladder: radii must increase");
        if (schedule.c_regs[k + 1] > schedule.c_regs[k] ||
            schedule.epsilons[k + 1] > schedule.epsilons[k])
            throw std::invalid_argument(
                "whole_space_ladder: c_reg and epsilon must be nonincreasing");
    }
    for (double c : schedule.c_regs)
        if (!(c > 0.0))
            throw std::invalid_argument("whole_space_ladder: c_reg must be positive");
    if (!(schedule.monitor_radius > 0.0) ||
        schedule.monitor_radius >= schedule.radii.front())
        throw std::invalid_argument(
            "whole_space_ladder: monitor window must sit inside the smallest disk");

    const BoundaryFn zero_bc = [](double, double) { return 0.0; };
    LadderReport rep;
    for (size_t k = 0; k < m; ++k) {
        CartesianGrid2 grid = make_grid(schedule.h, schedule.radii[k], schedule.stencil);
        const double eps = schedule.epsilons[k];
        GridFn rhs(static_cast<size_t>(grid.active_count()));
        for (int node = 0; node < grid.active_count(); ++node) {
            const auto [x, y] = grid.coords(node);
            rhs[static_cast<size_t>(node)] =
                eps > 0.0 ? mollified_value_2d(f, eps, x, y) : f(x, y);
        }

        Grid2SolverConfig cfg = schedule.solver;
        if (k > 0) {
            // previous rung extended by zero; the lattices share h
            cfg.initial_u.assign(static_cast<size_t>(grid.active_count()), 0.0);
            const CartesianGrid2& prev = rep.grids.back();
            for (int node = 0; node < grid.active_count(); ++node) {
                const auto [i, j] = grid.active[static_cast<size_t>(node)];
                const int pn = prev.node_at(i, j);
                if (pn >= 0)
                    cfg.initial_u[static_cast<size_t>(node)] =
                        rep.solutions.back()[static_cast<size_t>(pn)];
            }
        }

        PolicySolveReport srep;
        GridFn u;
        try {
            u = policy_iteration_solve(grid, schedule.stencil, rhs, params,
                                       schedule.c_regs[k], zero_bc, cfg, &srep);
        } catch (const std::exception& e) {
            throw LadderError("whole_space_ladder: rung " + std::to_string(k) +
                                  " failed: " + e.what(),
                              static_cast<int>(k));
        }

        const double mon2 = schedule.monitor_radius * schedule.monitor_radius;
        const double wide = std::min(2.0 * schedule.monitor_radius, schedule.radii[k]);
        double sup_abs = 0.0, min_u = kInf, l2 = 0.0;
        for (int node = 0; node < grid.active_count(); ++node) {
            const auto [x, y] = grid.coords(node);
            const double v = u[static_cast<size_t>(node)];
            if (x * x + y * y < mon2) sup_abs = std::max(sup_abs, std::abs(v));
            if (x * x + y * y < wide * wide) {
                const double fv = rhs[static_cast<size_t>(node)];
                l2 += schedule.h * schedule.h * fv * fv;
            }
            min_u = std::min(min_u, v);
        }
        rep.sup_monitor_abs.push_back(sup_abs);
        rep.local_bound_ref.push_back(1.0 + std::sqrt(l2));
        rep.min_u.push_back(min_u);
        rep.policy_iterations.push_back(srep.policy_iterations);
        rep.final_residuals.push_back(srep.final_residual);

        if (k > 0) {
            const CartesianGrid2& prev = rep.grids.back();
            const GridFn& uprev = rep.solutions.back();
            double sup = 0.0;
            for (int node = 0; node < grid.active_count(); ++node) {
                const auto [i, j] = grid.active[static_cast<size_t>(node)];
                const auto [x, y] = grid.coords(node);
                if (x * x + y * y >= mon2) continue;
                const int pn = prev.node_at(i, j);
                if (pn >= 0)
                    sup = std::max(sup, std::abs(u[static_cast<size_t>(node)] -
                                                 uprev[static_cast<size_t>(pn)]));
            }
            rep.sup_monitor_diff.push_back(sup);
        }

        rep.grids.push_back(std::move(grid));
        rep.solutions.push_back(std::move(u));
    }
    return rep;
}

KatoReport kato_subsolution_check(const CartesianGrid2& grid,
                                  const StencilTable& table,
                                  const DirectionStencil& stencil,
                                  const GridFn& u, const GridFn& f,
                                  const ProblemParams& params,
                                  const BoundaryFn& dirichlet) {
    const int n = grid.active_count();
    if (static_cast<int>(u.size()) != n || static_cast<int>(f.size()) != n)
        throw std::invalid_argument("kato_subsolution_check: size mismatch");

    GridFn w(u.size());
    for (size_t i = 0; i < u.size(); ++i) w[i] = std::abs(u[i]);
    BoundaryFn abs_bc = [&dirichlet](double x, double y) {
        return std::abs(dirichlet(x, y));
    };

    KatoReport rep;
    rep.max_excess = -kInf;
    for (int node = 0; node < n; ++node) {
        // skip stencils straddling a sign change of u, where |u| has a kink
        double lo = u[static_cast<size_t>(node)];
        double hi = lo;
        for (int d = 0; d < table.n_dirs; ++d) {
            for (bool plus : {true, false}) {
                const Arm& arm = table.arm(node, d, plus);
                const double v = arm.neighbor >= 0
                                     ? u[static_cast<size_t>(arm.neighbor)]
                                     : dirichlet(arm.bx, arm.by);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (lo < 0.0 && hi > 0.0) {
            ++rep.skipped;
            continue;
        }
        const double val =
            discrete_pucci_plus(grid, table, stencil, w, abs_bc, node, params).value;
        const size_t sn = static_cast<size_t>(node);
        const double excess =
            -val + power_nonlinearity(w[sn], params.s) - std::abs(f[sn]);
        rep.max_excess = std::max(rep.max_excess, excess);
        ++rep.checked;
    }
    if (rep.checked == 0) rep.max_excess = 0.0;
    return rep;
}

}  // namespace pucci::grid2d
