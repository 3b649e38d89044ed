#include "pucci/radial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace pucci::radial {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// widest relative branch hysteresis; genuinely wrong branches stay free to
// flip even on the first iterations
constexpr double kHysteresisCap = 0.25;
// flips before a node's branch is pinned for the rest of the solve
constexpr int kMaxNodeFlips = 6;

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Composite-Simpson rule on [-1, 1] shared by every mollifier evaluation.
// Normalizing by the same rule's integral of the bump makes constants
// reproduce exactly.
struct BumpRule {
    std::vector<double> y;   // quadrature abscissae
    std::vector<double> wq;  // Simpson weight times bump value
    double total = 0.0;      // sum of wq

    BumpRule() {
        const int n = 1024;  // intervals, even
        const double h = 2.0 / n;
        y.resize(n + 1);
        wq.resize(n + 1);
        for (int k = 0; k <= n; ++k) {
            const double yk = -1.0 + h * k;
            const double simpson =
                (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
            const double t = 1.0 - yk * yk;
            const double bump = t > 0.0 ? std::exp(-1.0 / t) : 0.0;
            y[k] = yk;
            wq[k] = simpson * (h / 3.0) * bump;
            total += wq[k];
        }
    }
};

const BumpRule& bump_rule() {
    static const BumpRule rule;
    return rule;
}

// Geometric data of the frozen finite-volume operator: face conductances and
// rho-weighted dual-cell masses.
struct FvOperator {
    std::vector<double> w;     // rho(m_i)/h_i at face i between nodes i, i+1
    std::vector<double> mass;  // dual mass per node (last entry unused)
};

FvOperator build_fv(const RadialGrid& grid, const RadialWeights& wts) {
    const int M = grid.size();
    FvOperator fv;
    fv.w.assign(M - 1, 0.0);
    fv.mass.assign(M, 0.0);
    for (int i = 0; i < M - 1; ++i) {
        const double h = grid.r(i + 1) - grid.r(i);
        const double mid = 0.5 * (grid.r(i) + grid.r(i + 1));
        const double e = wts.cell_exponent[i];
        fv.w[i] = wts.rho[i] * std::pow(mid / grid.r(i), e) / h;
    }
    for (int i = 0; i < M - 1; ++i) {
        const double ri = grid.r(i);
        const double m_right = 0.5 * (ri + grid.r(i + 1));
        const double er = wts.cell_exponent[i];
        double mass = ri * (std::pow(m_right / ri, er + 1.0) - 1.0) / (er + 1.0);
        if (i == 0) {
            // inner dual cell reaches down to the origin under the first
            // cell's power law
            mass += ri / (er + 1.0);
        } else {
            const double m_left = 0.5 * (grid.r(i - 1) + ri);
            const double el = wts.cell_exponent[i - 1];
            mass += ri * (1.0 - std::pow(m_left / ri, el + 1.0)) / (el + 1.0);
        }
        fv.mass[i] = mass;
    }
    return fv;
}

// Interior residual rows (Dirichlet row excluded).
std::vector<double> fv_residual(const FvOperator& fv, const RadialGrid& grid,
                                const RadialWeights& wts, const RadialRhs& rhs,
                                const ProblemParams& params, double c_reg,
                                const std::vector<double>& u) {
    const int M = grid.size();
    std::vector<double> res(M - 1);
    double flux_left = 0.0;  // natural inner condition
    for (int i = 0; i < M - 1; ++i) {
        const double flux_right = fv.w[i] * (u[i + 1] - u[i]);
        const double f_i = rhs_value(grid, rhs, i);
        res[i] = -(flux_right - flux_left) / fv.mass[i] +
                 wts.rho_tilde[i] *
                     (c_reg * u[i] + power_nonlinearity(u[i], params.s) - f_i);
        flux_left = flux_right;
    }
    return res;
}

// Roundoff floor of one residual row: the flux difference cancels to
// eps*|u| before the 1/mass amplification, so rows in the smallest dual
// cells cannot be driven below this level in double precision.
double row_floor(const FvOperator& fv, int i, double ueff) {
    const double wl = i > 0 ? fv.w[static_cast<size_t>(i - 1)] : 0.0;
    const double wr = fv.w[static_cast<size_t>(i)];
    constexpr double kSlack = 8.0;
    return kSlack * std::numeric_limits<double>::epsilon() * (wl + wr) * ueff /
           fv.mass[static_cast<size_t>(i)];
}

// Max-norm with each row's evaluation floor subtracted; convergence is
// judged on the signal that remains above roundoff.
double deflated_residual(const FvOperator& fv, const std::vector<double>& res,
                         double umax) {
    const double ueff = std::max(1.0, umax);
    double rn = 0.0;
    for (size_t i = 0; i < res.size(); ++i)
        rn = std::max(rn, std::abs(res[i]) -
                              row_floor(fv, static_cast<int>(i), ueff));
    return rn;
}

// Tridiagonal solve, in place on rhs.  The systems here are irreducibly
// diagonally dominant M-matrices, so no pivoting is required.
void thomas_solve(std::vector<double>& sub, std::vector<double>& diag,
                  std::vector<double>& sup, std::vector<double>& rhs) {
    const size_t n = diag.size();
    for (size_t i = 1; i < n; ++i) {
        const double m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (size_t i = n - 1; i-- > 0;) {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

double rhs_scale(const RadialGrid& grid, const RadialWeights& wts,
                 const RadialRhs& rhs) {
    double m = 1.0;
    for (int i = 0; i < grid.size(); ++i)
        m = std::max(m, std::abs(wts.rho_tilde[i] * rhs_value(grid, rhs, i)));
    return m;
}

// Damped Newton on the frozen-weight semilinear system.  Returns the final
// floor-deflated residual over interior rows.
double newton_frozen(const RadialGrid& grid, const RadialWeights& wts,
                     const RadialRhs& rhs, const ProblemParams& params,
                     double c_reg, const RadialSolverConfig& cfg,
                     double tol_abs, std::vector<double>& u) {
    const int M = grid.size();
    const FvOperator fv = build_fv(grid, wts);
    std::vector<double> res = fv_residual(fv, grid, wts, rhs, params, c_reg, u);
    double rn = deflated_residual(fv, res, max_abs(u));
    for (int it = 0; it < cfg.max_newton && rn > tol_abs; ++it) {
        std::vector<double> sub(M - 1, 0.0), diag(M - 1, 0.0), sup(M - 1, 0.0);
        for (int i = 0; i < M - 1; ++i) {
            const double wl = i > 0 ? fv.w[i - 1] : 0.0;
            const double wr = fv.w[i];
            diag[i] = (wl + wr) / fv.mass[i] +
                      wts.rho_tilde[i] *
                          (c_reg + power_nonlinearity_derivative(u[i], params.s));
            if (i > 0) sub[i] = -wl / fv.mass[i];
            if (i < M - 2) sup[i] = -wr / fv.mass[i];
            // the coupling of the last interior node to the Dirichlet node
            // stays on the right-hand side via u[M-1] = 0
        }
        std::vector<double> step(res);
        for (double& v : step) v = -v;
        thomas_solve(sub, diag, sup, step);

        double t = 1.0;
        std::vector<double> trial(u);
        std::vector<double> res_trial;
        double rn_trial = kInf;
        for (int halving = 0; halving <= cfg.max_halvings; ++halving) {
            for (int i = 0; i < M - 1; ++i) trial[i] = u[i] + t * step[i];
            res_trial = fv_residual(fv, grid, wts, rhs, params, c_reg, trial);
            rn_trial = deflated_residual(fv, res_trial, max_abs(trial));
            if (rn_trial < rn) break;
            t *= 0.5;
        }
        if (rn_trial >= rn) break;  // stalled; outer loop will re-freeze
        u.swap(trial);
        res.swap(res_trial);
        rn = rn_trial;
    }
    return rn;
}

double interp_linear(const std::vector<double>& xs, const std::vector<double>& ys,
                     double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const size_t j = static_cast<size_t>(it - xs.begin());
    const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

}  // namespace

RadialGrid make_radial_grid(double R, int n, Grading grading, double ratio) {
    if (!(R > 0.0)) throw std::invalid_argument("make_radial_grid: R must be positive");
    if (n < 16) throw std::invalid_argument("make_radial_grid: need at least 16 nodes");
    RadialGrid grid;
    grid.R = R;
    grid.grading = grading;
    grid.nodes.resize(static_cast<size_t>(n));
    if (grading == Grading::uniform) {
        for (int k = 1; k <= n; ++k)
            grid.nodes[static_cast<size_t>(k - 1)] = R * k / n;
    } else {
        if (!(ratio > 0.0 && ratio < 1.0))
            throw std::invalid_argument("make_radial_grid: ratio must be in (0,1)");
        for (int k = 1; k <= n; ++k)
            grid.nodes[static_cast<size_t>(k - 1)] = R * std::pow(ratio, n - k);
    }
    grid.nodes.back() = R;
    return grid;
}

void recompute_derivative(const RadialGrid& grid, RadialState& state) {
    const int M = grid.size();
    if (static_cast<int>(state.u.size()) != M)
        throw std::invalid_argument("recompute_derivative: state/grid size mismatch");
    state.du.resize(state.u.size());
    state.du[0] = (state.u[1] - state.u[0]) / (grid.r(1) - grid.r(0));
    for (int i = 1; i < M - 1; ++i)
        state.du[static_cast<size_t>(i)] =
            (state.u[static_cast<size_t>(i + 1)] - state.u[static_cast<size_t>(i - 1)]) /
            (grid.r(i + 1) - grid.r(i - 1));
    state.du[static_cast<size_t>(M - 1)] =
        (state.u[static_cast<size_t>(M - 1)] - state.u[static_cast<size_t>(M - 2)]) /
        (grid.r(M - 1) - grid.r(M - 2));
    state.frozen = false;
}

RadialRhs RadialRhs::constant(double value) {
    RadialRhs r;
    r.kind = Kind::power_singularity;
    r.c = value;
    r.alpha = 0.0;
    return r;
}

RadialRhs RadialRhs::power(double c, double alpha) {
    RadialRhs r;
    r.kind = Kind::power_singularity;
    r.c = c;
    r.alpha = alpha;
    return r;
}

RadialRhs RadialRhs::mollified_power(double c, double alpha, double epsilon) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("mollified_power: epsilon must be positive");
    RadialRhs r;
    r.kind = Kind::mollified;
    r.c = c;
    r.alpha = alpha;
    r.mollification_epsilon = epsilon;
    return r;
}

RadialRhs RadialRhs::sampled(std::vector<double> values) {
    RadialRhs r;
    r.kind = Kind::sampled;
    r.samples = std::move(values);
    return r;
}

double mollified_power_value(double c, double alpha, double epsilon, double r) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("mollified_power_value: epsilon must be positive");
    const BumpRule& rule = bump_rule();
    const double cap = alpha > 0.0 ? std::abs(c) * std::pow(epsilon, -alpha) : kInf;
    double acc = 0.0;
    for (size_t k = 0; k < rule.y.size(); ++k) {
        const double x = std::abs(r - epsilon * rule.y[k]);
        double v;
        if (alpha > 0.0) {
            v = x == 0.0 ? cap : std::min(std::pow(x, -alpha) * std::abs(c), cap);
            v = std::copysign(v, c);
        } else {
            v = c * std::pow(x, -alpha);
        }
        acc += rule.wq[k] * v;
    }
    return acc / rule.total;
}

std::vector<double> mollify_samples(const RadialGrid& grid,
                                    const std::vector<double>& samples,
                                    double epsilon) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("mollify_samples: epsilon must be positive");
    if (samples.size() != grid.nodes.size())
        throw std::invalid_argument("mollify_samples: sample count != node count");
    const BumpRule& rule = bump_rule();
    std::vector<double> out(samples.size());
    for (int i = 0; i < grid.size(); ++i) {
        double acc = 0.0;
        for (size_t k = 0; k < rule.y.size(); ++k) {
            const double t = std::abs(grid.r(i) - epsilon * rule.y[k]);
            acc += rule.wq[k] * interp_linear(grid.nodes, samples, t);
        }
        out[static_cast<size_t>(i)] = acc / rule.total;
    }
    return out;
}

double rhs_value(const RadialGrid& grid, const RadialRhs& rhs, int i) {
    switch (rhs.kind) {
        case RadialRhs::Kind::sampled:
            if (rhs.samples.size() != grid.nodes.size())
                throw std::invalid_argument("rhs_value: sample count != node count");
            return rhs.samples[static_cast<size_t>(i)];
        case RadialRhs::Kind::power_singularity:
            return rhs.c * std::pow(grid.r(i), -rhs.alpha);
        case RadialRhs::Kind::mollified:
            return mollified_power_value(rhs.c, rhs.alpha,
                                         rhs.mollification_epsilon, grid.r(i));
    }
    throw std::logic_error("rhs_value: unknown kind");
}

double admissibility_integral(const RadialGrid& grid, const RadialRhs& rhs,
                              const ProblemParams& params) {
    const double np = params.n_plus();
    const int M = grid.size();
    std::vector<double> v(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i)
        v[static_cast<size_t>(i)] =
            std::pow(grid.r(i), np - 1.0) * std::abs(rhs_value(grid, rhs, i));
    double acc = 0.0;
    for (int i = 0; i + 1 < M; ++i)
        acc += 0.5 * (v[static_cast<size_t>(i)] + v[static_cast<size_t>(i + 1)]) *
               (grid.r(i + 1) - grid.r(i));
    // head segment below the first node
    const double r1 = grid.r(0);
    if (rhs.kind == RadialRhs::Kind::power_singularity) {
        if (np <= rhs.alpha && rhs.c != 0.0) return kInf;
        acc += std::abs(rhs.c) * std::pow(r1, np - rhs.alpha) / (np - rhs.alpha);
    } else {
        acc += std::abs(rhs_value(grid, rhs, 0)) * std::pow(r1, np) / np;
    }
    return acc;
}

namespace {

double prefix_at(const RadialGrid& grid, const std::vector<double>& prefix,
                 const std::vector<double>& cell_exp, double r) {
    const int M = grid.size();
    if (r <= grid.r(0))
        return prefix[0] + cell_exp[0] * std::log(r / grid.r(0));
    if (r >= grid.r(M - 1))
        return prefix[static_cast<size_t>(M - 1)] +
               cell_exp[static_cast<size_t>(M - 2)] * std::log(r / grid.r(M - 1));
    const auto it =
        std::upper_bound(grid.nodes.begin(), grid.nodes.end(), r);
    const size_t j = static_cast<size_t>(it - grid.nodes.begin()) - 1;
    return prefix[j] + cell_exp[j] * std::log(r / grid.nodes[j]);
}

RadialWeights weights_impl(const RadialGrid& grid, RadialState& state,
                           const RadialRhs& rhs, const ProblemParams& params,
                           const RadialWeights* prev, double deadband,
                           int* flips,
                           const std::vector<std::uint8_t>* locked = nullptr) {
    const int M = grid.size();
    if (static_cast<int>(state.u.size()) != M ||
        static_cast<int>(state.du.size()) != M)
        throw std::invalid_argument("compute_weights: state/grid size mismatch");
    for (int i = 0; i < M; ++i) {
        if (!std::isfinite(state.u[static_cast<size_t>(i)]) ||
            !std::isfinite(state.du[static_cast<size_t>(i)]))
            throw std::range_error("compute_weights: non-finite state value");
    }

    RadialWeights w;
    w.theta_big.resize(static_cast<size_t>(M));
    w.dim_eff.resize(static_cast<size_t>(M));
    w.rho.resize(static_cast<size_t>(M));
    w.rho_tilde.resize(static_cast<size_t>(M));
    w.theta_prime.resize(static_cast<size_t>(M));
    w.cell_exponent.resize(static_cast<size_t>(M - 1));
    w.log_prefix.resize(static_cast<size_t>(M));

    int flip_count = 0;
    const int Nm1 = params.dim - 1;
    for (int i = 0; i < M; ++i) {
        const size_t si = static_cast<size_t>(i);
        const double du = state.du[si];
        const double g = power_nonlinearity(state.u[si], params.s);
        const double f = rhs_value(grid, rhs, i);

        double tp;
        double tb;
        if (prev != nullptr && locked != nullptr && (*locked)[si] != 0) {
            // chronic flipper pinned by the caller; either branch is
            // consistent to O(h) at a switching node
            tp = prev->theta_prime[si];
            tb = prev->theta_big[si];
        } else {
            tp = theta(du, params);
            if (prev != nullptr &&
                std::abs(du) <= deadband * (1.0 + std::abs(state.u[si])))
                tp = prev->theta_prime[si];

            const double arg = -tp * Nm1 * du / grid.r(i) + g - f;
            tb = theta(arg, params);
            if (prev != nullptr &&
                std::abs(arg) <= deadband * std::max({1.0, std::abs(g), std::abs(f)}))
                tb = prev->theta_big[si];

            if (prev != nullptr &&
                (tb != prev->theta_big[si] || tp != prev->theta_prime[si]))
                ++flip_count;
        }

        w.theta_prime[si] = tp;
        w.theta_big[si] = tb;
        w.dim_eff[si] = tp / tb * Nm1 + 1.0;
    }
    for (int i = 0; i + 1 < M; ++i)
        w.cell_exponent[static_cast<size_t>(i)] = w.dim_eff[static_cast<size_t>(i)] - 1.0;

    w.log_prefix[0] = 0.0;
    for (int i = 1; i < M; ++i)
        w.log_prefix[static_cast<size_t>(i)] =
            w.log_prefix[static_cast<size_t>(i - 1)] +
            w.cell_exponent[static_cast<size_t>(i - 1)] *
                std::log(grid.r(i) / grid.r(i - 1));
    w.log_at_one = prefix_at(grid, w.log_prefix, w.cell_exponent, 1.0);

    for (int i = 0; i < M; ++i) {
        const size_t si = static_cast<size_t>(i);
        w.rho[si] = std::exp(w.log_prefix[si] - w.log_at_one);
        w.rho_tilde[si] = w.rho[si] / w.theta_big[si];
        if (!(w.rho[si] > 0.0) || !std::isfinite(w.rho[si]))
            throw std::range_error("compute_weights: rho under/overflowed");
    }

    if (flips != nullptr) *flips = flip_count;
    state.frozen = true;
    return w;
}

}  // namespace

double RadialWeights::rho_at(const RadialGrid& grid, double r) const {
    return std::exp(prefix_at(grid, log_prefix, cell_exponent, r) - log_at_one);
}

RadialWeights compute_weights(const RadialGrid& grid, RadialState& state,
                              const RadialRhs& rhs,
                              const ProblemParams& params) {
    return weights_impl(grid, state, rhs, params, nullptr, 0.0, nullptr);
}

RadialWeights compute_weights_hysteretic(const RadialGrid& grid,
                                         RadialState& state,
                                         const RadialRhs& rhs,
                                         const ProblemParams& params,
                                         const RadialWeights& prev,
                                         double deadband, int* flips) {
    return weights_impl(grid, state, rhs, params, &prev, deadband, flips);
}

std::vector<double> assemble_residual(const RadialGrid& grid,
                                      const RadialState& state,
                                      const RadialWeights& weights,
                                      const RadialRhs& rhs,
                                      const ProblemParams& params,
                                      double c_reg) {
    if (!state.frozen)
        throw std::logic_error("assemble_residual: weights stale, recompute from state");
    const FvOperator fv = build_fv(grid, weights);
    std::vector<double> res =
        fv_residual(fv, grid, weights, rhs, params, c_reg, state.u);
    res.push_back(state.u.back());  // Dirichlet defect
    return res;
}

RadialState solve_radial_bvp(const RadialGrid& grid, const RadialRhs& rhs,
                             const ProblemParams& params, double c_reg,
                             const RadialSolverConfig& cfg,
                             RadialSolveReport* report) {
    if (c_reg < 0.0)
        throw std::invalid_argument("solve_radial_bvp: c_reg must be nonnegative");
    if (!admissible(grid, rhs, params))
        throw std::invalid_argument(
            "solve_radial_bvp: data fails the weighted integrability gate "
            "int r^(n_plus-1)|f| < inf");

    const int M = grid.size();
    RadialState state;
    if (!cfg.initial_u.empty()) {
        if (static_cast<int>(cfg.initial_u.size()) != M)
            throw std::invalid_argument("solve_radial_bvp: initial_u size mismatch");
        state.u = cfg.initial_u;
    } else {
        state.u.assign(static_cast<size_t>(M), cfg.initial_constant);
    }
    state.u.back() = 0.0;
    recompute_derivative(grid, state);

    RadialWeights weights = compute_weights(grid, state, rhs, params);
    std::vector<double> history;
    int noflip_streak = 0;
    double rn_prev = kInf;
    // nodes that keep flipping sit on the switching manifold where both
    // branches are O(h)-consistent; pin them so a two-pattern limit cycle
    // cannot survive
    std::vector<std::uint8_t> locked(static_cast<size_t>(M), 0);
    std::vector<int> node_flips(static_cast<size_t>(M), 0);

    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        const double scale = rhs_scale(grid, weights, rhs);
        std::vector<double> u_prev = state.u;
        newton_frozen(grid, weights, rhs, params, c_reg, cfg,
                      0.01 * cfg.tol * scale, state.u);
        state.u.back() = 0.0;
        recompute_derivative(grid, state);

        // a branch flip re-integrates rho for every node outside it, so
        // marginal choices the state cannot yet resolve must stay frozen:
        // the hysteresis tracks the residual and tightens as it falls
        const double deadband =
            std::min(kHysteresisCap,
                     std::max(cfg.branch_deadband, rn_prev / scale));

        int flips = 0;
        RadialWeights trial = weights_impl(grid, state, rhs, params, &weights,
                                           deadband, &flips, &locked);
        if (flips > 0) {
            // under-relax the state before re-freezing so branch switches
            // cannot cycle
            for (int i = 0; i < M - 1; ++i) {
                const size_t si = static_cast<size_t>(i);
                state.u[si] = 0.5 * (u_prev[si] + state.u[si]);
            }
            recompute_derivative(grid, state);
            int damped_flips = 0;
            trial = weights_impl(grid, state, rhs, params, &weights, deadband,
                                 &damped_flips, &locked);
            noflip_streak = 0;
        } else {
            ++noflip_streak;
        }
        for (int i = 0; i < M; ++i) {
            const size_t si = static_cast<size_t>(i);
            if (trial.theta_big[si] != weights.theta_big[si] ||
                trial.theta_prime[si] != weights.theta_prime[si]) {
                if (++node_flips[si] >= kMaxNodeFlips) locked[si] = 1;
            }
        }
        weights = std::move(trial);

        const FvOperator fv = build_fv(grid, weights);
        std::vector<double> res =
            fv_residual(fv, grid, weights, rhs, params, c_reg, state.u);
        const double rn = deflated_residual(fv, res, max_abs(state.u));
        history.push_back(rn);
        rn_prev = rn;

        if (noflip_streak >= 2 && rn <= cfg.tol * rhs_scale(grid, weights, rhs)) {
            if (report != nullptr) {
                report->outer_iterations = outer + 1;
                report->final_residual = rn;
                report->residual_history = history;
            }
            if (cfg.verify_invariants) {
                const double np = params.n_plus();
                const double nm = params.n_minus();
                const double slack = 1e-12;
                bool f_nonneg = true;
                for (int i = 0; i < M; ++i) {
                    const size_t si = static_cast<size_t>(i);
                    if (weights.theta_big[si] != params.lambda &&
                        weights.theta_big[si] != params.Lambda)
                        throw std::logic_error("weights: theta outside {lambda, Lambda}");
                    if (weights.dim_eff[si] < np - slack ||
                        weights.dim_eff[si] > nm + slack)
                        throw std::logic_error("weights: dim_eff outside [n_plus, n_minus]");
                    const double r = grid.r(i);
                    if (r <= 1.0) {
                        const double lo = std::exp((nm - 1.0) * std::log(r));
                        const double hi = std::exp((np - 1.0) * std::log(r));
                        if (weights.rho[si] < lo * (1.0 - 1e-10) ||
                            weights.rho[si] > hi * (1.0 + 1e-10))
                            throw std::logic_error("weights: rho sandwich violated");
                    }
                    if (weights.rho_tilde[si] <
                            weights.rho[si] / params.Lambda * (1.0 - slack) ||
                        weights.rho_tilde[si] >
                            weights.rho[si] / params.lambda * (1.0 + slack))
                        throw std::logic_error("weights: rho_tilde outside [rho/Lambda, rho/lambda]");
                    if (rhs_value(grid, rhs, i) < 0.0) f_nonneg = false;
                }
                if (f_nonneg) {
                    for (double v : state.u)
                        if (v < -cfg.tol_pos)
                            throw std::logic_error(
                                "positivity violated for nonnegative data");
                }
            }
            return state;
        }
    }
    if (report != nullptr) {
        report->outer_iterations = cfg.max_outer;
        report->final_residual = history.empty() ? 0.0 : history.back();
        report->residual_history = history;
    }
    throw ConvergenceError("solve_radial_bvp: no convergence within max_outer",
                           history);
}

RadialLadderResult approximation_ladder(const RadialRhs& target,
                                        const ProblemParams& params,
                                        const RadialLadderSchedule& schedule) {
    const auto& rungs = schedule.rungs;
    if (rungs.empty())
        throw std::invalid_argument("approximation_ladder: empty schedule");
    for (size_t k = 1; k < rungs.size(); ++k) {
        if (rungs[k].c_reg > rungs[k - 1].c_reg ||
            rungs[k].epsilon > rungs[k - 1].epsilon)
            throw std::invalid_argument(
                "approximation_ladder: c_reg and epsilon must be nonincreasing");
    }
    if (target.kind == RadialRhs::Kind::mollified)
        throw std::invalid_argument(
            "approximation_ladder: target must be raw data, not pre-mollified");

    RadialLadderResult out;
    for (size_t k = 0; k < rungs.size(); ++k) {
        const RadialLadderRung& rung = rungs[k];
        RadialGrid grid = make_radial_grid(rung.radius, schedule.nodes,
                                           schedule.grading, schedule.ratio);
        if (target.kind == RadialRhs::Kind::sampled &&
            (grid.nodes.size() != target.samples.size() ||
             rung.radius != rungs[0].radius))
            throw std::invalid_argument(
                "approximation_ladder: sampled data requires a fixed grid");

        RadialRhs rhs_k = target;
        if (rung.epsilon > 0.0) {
            if (target.kind == RadialRhs::Kind::power_singularity)
                rhs_k = RadialRhs::mollified_power(target.c, target.alpha,
                                                   rung.epsilon);
            else
                rhs_k = RadialRhs::sampled(
                    mollify_samples(grid, target.samples, rung.epsilon));
        }

        RadialSolverConfig cfg = schedule.solver;
        if (k > 0) {
            cfg.initial_u.resize(grid.nodes.size());
            for (int i = 0; i < grid.size(); ++i)
                cfg.initial_u[static_cast<size_t>(i)] =
                    grid.r(i) >= out.grids.back().R
                        ? 0.0
                        : interp_linear(out.grids.back().nodes,
                                        out.states.back().u, grid.r(i));
            cfg.initial_u.back() = 0.0;
        }

        RadialState state;
        try {
            state = solve_radial_bvp(grid, rhs_k, params, rung.c_reg, cfg);
        } catch (const std::exception& e) {
            throw LadderError("approximation_ladder: rung " + std::to_string(k) +
                                  " failed: " + e.what(),
                              static_cast<int>(k));
        }

        // data distance int r^(n_plus - 1) |f_k - f|, trapezoid on the grid
        const double np = params.n_plus();
        double dist = 0.0;
        for (int i = 0; i + 1 < grid.size(); ++i) {
            auto dv = [&](int j) {
                return std::pow(grid.r(j), np - 1.0) *
                       std::abs(rhs_value(grid, rhs_k, j) -
                                rhs_value(grid, target, j));
            };
            dist += 0.5 * (dv(i) + dv(i + 1)) * (grid.r(i + 1) - grid.r(i));
        }

        RadialState wstate = state;
        recompute_derivative(grid, wstate);
        RadialWeights w = compute_weights(grid, wstate, rhs_k, params);
        double ius = 0.0;
        for (int i = 0; i + 1 < grid.size(); ++i) {
            auto iv = [&](int j) {
                return w.rho[static_cast<size_t>(j)] *
                       std::pow(std::abs(state.u[static_cast<size_t>(j)]), params.s);
            };
            ius += 0.5 * (iv(i) + iv(i + 1)) * (grid.r(i + 1) - grid.r(i));
        }

        out.u_at_first_node.push_back(state.u.front());
        out.data_distance.push_back(dist);
        out.int_rho_us.push_back(ius);
        out.grids.push_back(std::move(grid));
        out.states.push_back(std::move(state));
    }

    double min_R = kInf;
    for (const auto& rung : rungs) min_R = std::min(min_R, rung.radius);
    const double r0 =
        schedule.monitor_r0 > 0.0 ? schedule.monitor_r0 : 0.1 * min_R;
    const double r1 =
        schedule.monitor_r1 > 0.0 ? schedule.monitor_r1 : 0.5 * min_R;
    const int n_probe = 257;
    for (size_t k = 0; k + 1 < out.states.size(); ++k) {
        double sup = 0.0;
        for (int j = 0; j < n_probe; ++j) {
            const double r = r0 + (r1 - r0) * j / (n_probe - 1);
            const double a = interp_linear(out.grids[k].nodes, out.states[k].u, r);
            const double b =
                interp_linear(out.grids[k + 1].nodes, out.states[k + 1].u, r);
            sup = std::max(sup, std::abs(a - b));
        }
        out.sup_interior_diff.push_back(sup);
    }
    return out;
}

WeakResidualReport weak_residual_check(const RadialGrid& grid,
                                       const RadialState& state,
                                       const RadialWeights& weights,
                                       const RadialRhs& rhs,
                                       const ProblemParams& params,
                                       int n_test) {
    if (n_test < 8)
        throw std::invalid_argument("weak_residual_check: need n_test >= 8");
    if (!state.frozen)
        throw std::logic_error("weak_residual_check: weights stale, recompute from state");

    const int M = grid.size();
    const FvOperator fv = build_fv(grid, weights);

    std::vector<double> face_flux(static_cast<size_t>(M - 1));
    for (int i = 0; i < M - 1; ++i)
        face_flux[static_cast<size_t>(i)] =
            fv.w[i] *
            (state.u[static_cast<size_t>(i + 1)] - state.u[static_cast<size_t>(i)]);

    // trapezoid weights over nodes
    std::vector<double> tw(static_cast<size_t>(M), 0.0);
    for (int i = 0; i + 1 < M; ++i) {
        const double h = grid.r(i + 1) - grid.r(i);
        tw[static_cast<size_t>(i)] += 0.5 * h;
        tw[static_cast<size_t>(i + 1)] += 0.5 * h;
    }

    WeakResidualReport rep;
    rep.test_functions = n_test;

    // dyadic hat catalogue: level l has peaks at k R / 2^l, half-width R / 2^l
    struct Hat {
        double center, half;
        double operator()(double r) const {
            return std::max(0.0, 1.0 - std::abs(r - center) / half);
        }
    };
    std::vector<Hat> hats;
    for (int level = 1; static_cast<int>(hats.size()) < n_test; ++level) {
        const double half = grid.R / std::exp2(level);
        for (int k = 1; k < (1 << level) && static_cast<int>(hats.size()) < n_test; ++k)
            hats.push_back(Hat{k * grid.R / std::exp2(level), half});
    }

    double worst = 0.0;
    for (const Hat& hat : hats) {
        double acc = 0.0;
        for (int i = 0; i < M - 1; ++i)
            acc += face_flux[static_cast<size_t>(i)] *
                   (hat(grid.r(i + 1)) - hat(grid.r(i)));
        for (int i = 0; i < M; ++i) {
            const size_t si = static_cast<size_t>(i);
            acc += tw[si] * weights.rho_tilde[si] *
                   (power_nonlinearity(state.u[si], params.s) -
                    rhs_value(grid, rhs, i)) *
                   hat(grid.r(i));
        }
        worst = std::max(worst, std::abs(acc));
    }
    rep.max_residual = worst;

    for (int i = 0; i < M; ++i) {
        const size_t si = static_cast<size_t>(i);
        rep.int_rho_us += tw[si] * weights.rho[si] *
                          std::pow(std::abs(state.u[si]), params.s);
    }
    const double q2 = 0.5 * (1.0 + 2.0 * params.s / (params.s + 1.0));
    rep.int_rho_du_q = {{1.1, 0.0}, {q2, 0.0}};
    for (int i = 0; i < M - 1; ++i) {
        const size_t si = static_cast<size_t>(i);
        const double slope = (state.u[si + 1] - state.u[si]) /
                             (grid.r(i + 1) - grid.r(i));
        const double e = weights.cell_exponent[si];
        const double cell_rho_mass =
            weights.rho[si] * grid.r(i) *
            (std::pow(grid.r(i + 1) / grid.r(i), e + 1.0) - 1.0) / (e + 1.0);
        rep.int_rho_du += std::abs(slope) * cell_rho_mass;
        for (auto& [q, val] : rep.int_rho_du_q)
            val += std::pow(std::abs(slope), q) * cell_rho_mass;
    }
    rep.flux_at_zero = weights.rho[0] * state.du[0];

    rep.ok = std::isfinite(rep.max_residual) && std::isfinite(rep.int_rho_us) &&
             std::isfinite(rep.int_rho_du) && std::isfinite(rep.flux_at_zero);
    for (const auto& [q, val] : rep.int_rho_du_q)
        rep.ok = rep.ok && std::isfinite(val);
    return rep;
}

RadialMajorantResult radial_majorant(
    const std::function<double(double, double)>& f_2d, const RadialGrid& grid,
    const ProblemParams& params, int n_angles) {
    if (n_angles < 64)
        throw std::invalid_argument("radial_majorant: need at least 64 angles");
    std::vector<double> g(grid.nodes.size(), 0.0);
    const double two_pi = 2.0 * std::acos(-1.0);
    for (int i = 0; i < grid.size(); ++i) {
        double best = 0.0;
        for (int k = 0; k < n_angles; ++k) {
            const double a = two_pi * k / n_angles;
            best = std::max(best, std::abs(f_2d(grid.r(i) * std::cos(a),
                                                grid.r(i) * std::sin(a))));
        }
        g[static_cast<size_t>(i)] = best;
    }
    RadialMajorantResult out;
    out.rhs = RadialRhs::sampled(std::move(g));
    out.weighted_integral = admissibility_integral(grid, out.rhs, params);
    out.admissible = std::isfinite(out.weighted_integral);
    return out;
}

}  // namespace pucci::radial
