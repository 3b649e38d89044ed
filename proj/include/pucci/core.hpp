#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pucci {

/// Ellipticity bounds, dimension, and absorption exponent shared by every
/// solver in this project.  Construction validates 0 < lambda <= Lambda,
/// dim >= 1 and s > 1.
struct ProblemParams {
    double lambda;
    double Lambda;
    int dim;
    double s;

    ProblemParams(double lambda_, double Lambda_, int dim_, double s_);

    /// Effective dimension (lambda/Lambda)(dim-1)+1, in (1, dim].
    double n_plus() const { return (lambda / Lambda) * (dim - 1) + 1.0; }
    /// Effective dimension (Lambda/lambda)(dim-1)+1, >= dim.
    double n_minus() const { return (Lambda / lambda) * (dim - 1) + 1.0; }
};

/// Branch coefficient: Lambda for t >= 0, lambda for t < 0.  The >= at zero
/// is deliberate and every branch decision in the project goes through it.
inline double theta(double t, const ProblemParams& p) {
    return t >= 0.0 ? p.Lambda : p.lambda;
}

/// Maximal extremal operator from an eigenvalue list: sum of theta(e)*e.
double pucci_plus_eigen(std::span<const double> eigs, const ProblemParams& p);

/// Minimal extremal operator: lambda on nonnegative eigenvalues, Lambda on
/// negative ones.  Satisfies pucci_minus_eigen(e) == -pucci_plus_eigen(-e)
/// exactly.
double pucci_minus_eigen(std::span<const double> eigs, const ProblemParams& p);

/// Radial evaluation theta(d2u)*d2u + theta(du)*(dim-1)*du/r.  The solution
/// value u does not enter the operator; the parameter is kept so call sites
/// read like the continuous expression. Requires r > 0.
double pucci_radial(double u, double du, double d2u, double r,
                    const ProblemParams& p);

/// Odd increasing absorption term |u|^{s-1} u.
double power_nonlinearity(double u, double s);

/// Derivative s*|u|^{s-1} of the absorption term, used by Newton loops.
double power_nonlinearity_derivative(double u, double s);

/// Constant delta(s) = 2^{1-s} with
///   | |a|^{s-1}a - |b|^{s-1}b | >= delta(s) * |a-b|^s   for all reals a, b.
/// The value is sharp (equality at a = -b) and is revalidated against a
/// brute-force scan in the test suite before being trusted here.
double power_gap_delta(double s);

/// Symmetric 2x2 matrix with closed-form spectral decomposition.
struct SymmetricMatrix2 {
    double a11 = 0.0;
    double a12 = 0.0;
    double a22 = 0.0;

    /// Eigenvalues in nondecreasing order, computed with the stable
    /// discriminant form hypot((a11-a22)/2, a12).
    std::array<double, 2> eigenvalues() const;
};

double pucci_plus(const SymmetricMatrix2& m, const ProblemParams& p);
double pucci_minus(const SymmetricMatrix2& m, const ProblemParams& p);

/// Thrown when an iterative solve exhausts its budget.  Carries the residual
/// trajectory so callers can distinguish stagnation from divergence.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), residual_history(std::move(history)) {}

    std::vector<double> residual_history;
};

}  // namespace pucci
