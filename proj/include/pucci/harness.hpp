#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "pucci/core.hpp"
#include "pucci/grid2d.hpp"
#include "pucci/radial.hpp"

// Experiment drivers: right-hand-side catalog, mollification with
// convergence metrics, config parsing, and bit-stable CSV/manifest output.
namespace pucci::harness {

struct RhsCatalogEntry {
    enum class Kind {
        constant,
        compact_bump,
        power_singularity,
        manufactured_from_u,
        off_center_singularity,
        radial_majorant_of,  // radial envelope of the off-center entry
    };

    Kind kind = Kind::constant;
    double amplitude = 1.0;
    double alpha = 0.0;  // singular exponent for the power kinds
    double width = 0.5;  // compact bump support radius
    double x0 = 0.0;     // off-center singular point
    double y0 = 0.0;
    std::string manufactured = "parabola";  // or "saddle"; both assume radius 1
    double c_reg = 0.0;  // manufactured data bake the c u term in

    static RhsCatalogEntry constant_data(double amplitude);
    static RhsCatalogEntry bump(double amplitude, double width);
    static RhsCatalogEntry power(double amplitude, double alpha);
    static RhsCatalogEntry manufactured_parabola(double c_reg);
    static RhsCatalogEntry manufactured_saddle(double c_reg);
    static RhsCatalogEntry off_center(double amplitude, double alpha, double x0,
                                      double y0);
    static RhsCatalogEntry majorant_of_off_center(double amplitude, double alpha,
                                                  double x0, double y0);

    bool singular() const {
        return (kind == Kind::power_singularity ||
                kind == Kind::off_center_singularity ||
                kind == Kind::radial_majorant_of) &&
               alpha > 0.0;
    }
};

// Each catalog entry self-reports which solvability gate it clears: the
// whole-plane theory wants locally L^N data (singular exponent < 1), the
// radial theory only the weighted integral (exponent < n_plus).
struct AdmissibilityReport {
    bool weighted_radial_ok = true;
    bool ln_loc_ok = true;
    std::string detail;
};

AdmissibilityReport classify_rhs(const RhsCatalogEntry& entry,
                                 const ProblemParams& params);

// Pointwise evaluation; singular kinds return +-inf exactly at their
// singular point.
double eval_rhs_2d(const RhsCatalogEntry& entry, const ProblemParams& params,
                   double x, double y);
// Radial trace; throws for entries with no radial meaning (saddle,
// off-center).
double eval_rhs_radial(const RhsCatalogEntry& entry, const ProblemParams& params,
                       double r);

// Solver-ready radial data: power entries stay closed-form, the majorant
// kind sweeps angles, everything else is sampled.
radial::RadialRhs to_radial_rhs(const RhsCatalogEntry& entry,
                                const ProblemParams& params,
                                const radial::RadialGrid& grid);

struct MollifierSpec {
    double width = 0.0;  // 0 disables; invalid for singular entries
};

struct MollifyResult {
    std::vector<double> values;
    double distance = 0.0;  // weighted L1 (radial) or L^dim (planar) vs raw
};

MollifyResult mollify(const RhsCatalogEntry& entry, const ProblemParams& params,
                      const MollifierSpec& spec, const radial::RadialGrid& grid);
MollifyResult mollify(const RhsCatalogEntry& entry, const ProblemParams& params,
                      const MollifierSpec& spec,
                      const grid2d::CartesianGrid2& grid);

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    enum class Experiment {
        radial,
        grid2d,
        ladder,
        blowup,
        barrier,
        local_bound,
        convergence,
    };

    Experiment experiment = Experiment::radial;

    double lambda = 1.0;
    double Lambda = 1.0;
    int dim = 2;
    double s = 3.0;
    ProblemParams params() const { return ProblemParams(lambda, Lambda, dim, s); }

    RhsCatalogEntry rhs;
    double mollify_width = 0.0;

    std::uint64_t seed = 0;
    bool exploratory = false;
    std::string out_dir = ".";
    std::string csv_name;  // empty: derived from the experiment name
    std::string manifest_name = "manifest.json";

    // radial
    double radius = 1.0;
    int nodes = 512;
    std::string grading = "uniform";  // or "geometric"
    double grading_ratio = 0.9;
    double c_reg = 0.0;
    double tol = 1e-10;

    // grid2d
    double h = 1.0 / 32.0;
    std::string stencil = "standard";  // or "axes-only"
    std::string op = "plus";           // or "minus"
    double dirichlet = 0.0;

    // ladder (space = radial | plane)
    std::string ladder_space = "radial";
    std::vector<double> ladder_radii;
    std::vector<double> ladder_c;
    std::vector<double> ladder_eps;
    double monitor_r0 = 0.0;
    double monitor_r1 = 0.0;

    // blowup
    std::vector<double> blowup_boundary_values;
    std::vector<double> blowup_c;
    double fit_d_min = 0.0;
    double fit_d_max = 0.0;

    // barrier
    int barrier_samples = 1000;

    // local bound
    double inner_radius = 1.0;
    double outer_radius = 2.0;
    std::vector<double> boundary_values;

    // convergence study
    std::string study_space = "radial";
    std::vector<int> study_nodes;
    std::vector<double> study_h;
};

// Flat key-value config with one section per module.  Unknown sections or
// keys are rejected by name, as are values that fail validation.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

struct RunResult {
    int exit_code = 0;  // 0 ok, 2 bad input, 3 solver failure, 4 gate refusal
    std::string csv_path;
    std::string manifest_path;
    std::string error_class;  // empty on success
};

// Executes the configured experiment and writes the CSV plus a JSON
// manifest (config echo, residuals, timings, seed).  CSV payloads are
// byte-identical across reruns of the same config and seed.
RunResult run(const RunConfig& config, std::ostream& log);

}  // namespace pucci::harness
