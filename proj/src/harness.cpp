#include "pucci/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "json.hpp"

#include "pucci/barriers.hpp"
#include "pucci/blowup.hpp"

namespace pucci::harness {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double bump_profile(double t) {
    // unit peak, support |t| < 1
    const double w = 1.0 - t * t;
    return w > 0.0 ? std::exp(1.0 - 1.0 / w) : 0.0;
}

std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// CSV with a fixed column order and 17-significant-digit cells so reruns
// are byte-identical.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open CSV path " + path);
    }
    void header(const std::vector<std::string>& cols) { line(cols); }
    void row(const std::vector<double>& vals) {
        std::vector<std::string> cells;
        cells.reserve(vals.size());
        for (double v : vals) cells.push_back(fmt17(v));
        line(cells);
    }
    void mixed_row(const std::vector<std::string>& cells) { line(cells); }

  private:
    void line(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }
    std::ofstream out_;
};

}  // namespace

RhsCatalogEntry RhsCatalogEntry::constant_data(double amplitude) {
    RhsCatalogEntry e;
    e.kind = Kind::constant;
    e.amplitude = amplitude;
    return e;
}

RhsCatalogEntry RhsCatalogEntry::bump(double amplitude, double width) {
    if (!(width > 0.0)) throw std::invalid_argument("bump: width must be positive");
    RhsCatalogEntry e;
    e.kind = Kind::compact_bump;
    e.amplitude = amplitude;
    e.width = width;
    return e;
}

RhsCatalogEntry RhsCatalogEntry::power(double amplitude, double alpha) {
    RhsCatalogEntry e;
    e.kind = Kind::power_singularity;
    e.amplitude = amplitude;
    e.alpha = alpha;
    return e;
}

RhsCatalogEntry RhsCatalogEntry::manufactured_parabola(double c_reg) {
    RhsCatalogEntry e;
    e.kind = Kind::manufactured_from_u;
    e.manufactured = "parabola";
    e.c_reg = c_reg;
    return e;
}

RhsCatalogEntry RhsCatalogEntry::manufactured_saddle(double c_reg) {
    RhsCatalogEntry e;
    e.kind = Kind::manufactured_from_u;
    e.manufactured = "saddle";
    e.c_reg = c_reg;
    return e;
}

RhsCatalogEntry RhsCatalogEntry::off_center(double amplitude, double alpha,
                                            double x0, double y0) {
    RhsCatalogEntry e;
    e.kind = Kind::off_center_singularity;
    e.amplitude = amplitude;
    e.alpha = alpha;
    e.x0 = x0;
    e.y0 = y0;
    return e;
}

RhsCatalogEntry RhsCatalogEntry::majorant_of_off_center(double amplitude,
                                                        double alpha, double x0,
                                                        double y0) {
    RhsCatalogEntry e = off_center(amplitude, alpha, x0, y0);
    e.kind = Kind::radial_majorant_of;
    return e;
}

AdmissibilityReport classify_rhs(const RhsCatalogEntry& entry,
                                 const ProblemParams& params) {
    AdmissibilityReport rep;
    switch (entry.kind) {
        case RhsCatalogEntry::Kind::constant:
        case RhsCatalogEntry::Kind::compact_bump:
        case RhsCatalogEntry::Kind::manufactured_from_u:
            rep.detail = "bounded data clears both gates";
            return rep;
        case RhsCatalogEntry::Kind::power_singularity:
            rep.weighted_radial_ok = entry.alpha < params.n_plus();
            rep.ln_loc_ok = entry.alpha < 1.0;
            rep.detail = "origin singularity r^-alpha: weighted gate needs alpha < "
                         "n_plus, the local L^N gate needs alpha < 1";
            return rep;
        case RhsCatalogEntry::Kind::off_center_singularity:
        case RhsCatalogEntry::Kind::radial_majorant_of:
            // away from the origin the weighted radial integral has no help
            // from the r^(n_plus - 1) factor, so both gates need alpha < 1
            rep.weighted_radial_ok = entry.alpha < 1.0;
            rep.ln_loc_ok = entry.alpha < 1.0;
            rep.detail = "off-center singularity: both gates need alpha < 1";
            return rep;
    }
    throw std::logic_error("classify_rhs: unknown kind");
}

double eval_rhs_2d(const RhsCatalogEntry& entry, const ProblemParams& params,
                   double x, double y) {
    const double r = std::hypot(x, y);
    switch (entry.kind) {
        case RhsCatalogEntry::Kind::constant:
            return entry.amplitude;
        case RhsCatalogEntry::Kind::compact_bump:
            return entry.amplitude * bump_profile(r / entry.width);
        case RhsCatalogEntry::Kind::power_singularity:
            return entry.amplitude * std::pow(r, -entry.alpha);
        case RhsCatalogEntry::Kind::manufactured_from_u: {
            if (entry.manufactured == "parabola") {
                const double u = 1.0 - r * r;
                return 2.0 * params.lambda * params.dim + entry.c_reg * u +
                       power_nonlinearity(u, params.s);
            }
            const double u = x * x - y * y;
            return -(2.0 * params.Lambda - 2.0 * params.lambda) + entry.c_reg * u +
                   power_nonlinearity(u, params.s);
        }
        case RhsCatalogEntry::Kind::off_center_singularity:
            return entry.amplitude *
                   std::pow(std::hypot(x - entry.x0, y - entry.y0), -entry.alpha);
        case RhsCatalogEntry::Kind::radial_majorant_of:
            return eval_rhs_radial(entry, params, r);
    }
    throw std::logic_error("eval_rhs_2d: unknown kind");
}

double eval_rhs_radial(const RhsCatalogEntry& entry, const ProblemParams& params,
                       double r) {
    switch (entry.kind) {
        case RhsCatalogEntry::Kind::constant:
            return entry.amplitude;
        case RhsCatalogEntry::Kind::compact_bump:
            return entry.amplitude * bump_profile(r / entry.width);
        case RhsCatalogEntry::Kind::power_singularity:
            return entry.amplitude * std::pow(r, -entry.alpha);
        case RhsCatalogEntry::Kind::manufactured_from_u: {
            if (entry.manufactured != "parabola")
                throw std::invalid_argument(
                    "eval_rhs_radial: only the parabola datum has a radial trace");
            const double u = 1.0 - r * r;
            return 2.0 * params.lambda * params.dim + entry.c_reg * u +
                   power_nonlinearity(u, params.s);
        }
        case RhsCatalogEntry::Kind::off_center_singularity:
            throw std::invalid_argument(
                "eval_rhs_radial: off-center data has no radial trace");
        case RhsCatalogEntry::Kind::radial_majorant_of: {
            const RhsCatalogEntry base = RhsCatalogEntry::off_center(
                entry.amplitude, entry.alpha, entry.x0, entry.y0);
            const int K = 256;
            double best = 0.0;
            for (int k = 0; k < K; ++k) {
                const double a = 2.0 * std::acos(-1.0) * k / K;
                best = std::max(best, std::abs(eval_rhs_2d(base, params,
                                                           r * std::cos(a),
                                                           r * std::sin(a))));
            }
            return best;
        }
    }
    throw std::logic_error("eval_rhs_radial: unknown kind");
}

radial::RadialRhs to_radial_rhs(const RhsCatalogEntry& entry,
                                const ProblemParams& params,
                                const radial::RadialGrid& grid) {
    switch (entry.kind) {
        case RhsCatalogEntry::Kind::constant:
            return radial::RadialRhs::constant(entry.amplitude);
        case RhsCatalogEntry::Kind::power_singularity:
            return radial::RadialRhs::power(entry.amplitude, entry.alpha);
        default: {
            std::vector<double> v(grid.nodes.size());
            for (int i = 0; i < grid.size(); ++i)
                v[static_cast<size_t>(i)] = eval_rhs_radial(entry, params, grid.r(i));
            return radial::RadialRhs::sampled(std::move(v));
        }
    }
}

MollifyResult mollify(const RhsCatalogEntry& entry, const ProblemParams& params,
                      const MollifierSpec& spec, const radial::RadialGrid& grid) {
    std::vector<double> raw(grid.nodes.size());
    for (int i = 0; i < grid.size(); ++i)
        raw[static_cast<size_t>(i)] = eval_rhs_radial(entry, params, grid.r(i));

    MollifyResult out;
    if (!(spec.width > 0.0)) {
        if (entry.singular())
            throw std::invalid_argument(
                "mollify: width 0 with a singularity inside the window");
        out.values = raw;
        out.distance = 0.0;
        return out;
    }

    if (entry.kind == RhsCatalogEntry::Kind::power_singularity) {
        out.values.resize(raw.size());
        for (int i = 0; i < grid.size(); ++i)
            out.values[static_cast<size_t>(i)] = radial::mollified_power_value(
                entry.amplitude, entry.alpha, spec.width, grid.r(i));
    } else {
        out.values = radial::mollify_samples(grid, raw, spec.width);
    }

    const double np = params.n_plus();
    double acc = 0.0;
    for (int i = 0; i + 1 < grid.size(); ++i) {
        auto dv = [&](int j) {
            return std::pow(grid.r(j), np - 1.0) *
                   std::abs(out.values[static_cast<size_t>(j)] -
                            raw[static_cast<size_t>(j)]);
        };
        acc += 0.5 * (dv(i) + dv(i + 1)) * (grid.r(i + 1) - grid.r(i));
    }
    out.distance = acc;
    return out;
}

MollifyResult mollify(const RhsCatalogEntry& entry, const ProblemParams& params,
                      const MollifierSpec& spec,
                      const grid2d::CartesianGrid2& grid) {
    std::vector<double> raw(static_cast<size_t>(grid.active_count()));
    for (int n = 0; n < grid.active_count(); ++n) {
        const auto [x, y] = grid.coords(n);
        raw[static_cast<size_t>(n)] = eval_rhs_2d(entry, params, x, y);
    }

    MollifyResult out;
    if (!(spec.width > 0.0)) {
        if (entry.singular())
            throw std::invalid_argument(
                "mollify: width 0 with a singularity inside the window");
        out.values = raw;
        out.distance = 0.0;
        return out;
    }

    // clip the magnitude at its value on the sphere of radius width before
    // convolving, as in the radial module, so the quadrature stays bounded
    const double cap = entry.singular()
                           ? std::abs(entry.amplitude) *
                                 std::pow(spec.width, -entry.alpha)
                           : kInf;
    auto clipped = [&](double x, double y) {
        const double v = eval_rhs_2d(entry, params, x, y);
        if (!(std::abs(v) > cap)) return v;
        return std::copysign(cap, v);
    };
    out.values.resize(raw.size());
    for (int n = 0; n < grid.active_count(); ++n) {
        const auto [x, y] = grid.coords(n);
        out.values[static_cast<size_t>(n)] =
            grid2d::mollified_value_2d(clipped, spec.width, x, y);
    }

    const double N = params.dim;
    double acc = 0.0;
    for (size_t i = 0; i < raw.size(); ++i)
        acc += grid.h * grid.h *
               std::pow(std::abs(out.values[i] - raw[i]), N);
    out.distance = std::pow(acc, 1.0 / N);
    return out;
}

// ---------------------------------------------------------------------------
// config parsing

namespace {

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

SectionMap parse_sections(const std::string& text) {
    SectionMap out;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": empty section name");
            out[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": key outside any [section]");
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (!out[section].emplace(key, value).second)
            throw ConfigError(section + "." + key + ": duplicate key");
    }
    return out;
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> table = {
        {"problem", {"lambda", "Lambda", "dim", "s"}},
        {"experiment", {"kind", "seed"}},
        {"rhs",
         {"kind", "amplitude", "alpha", "width", "x0", "y0", "manufactured",
          "c_reg", "mollify_width"}},
        {"radial", {"radius", "nodes", "grading", "ratio", "c_reg", "tol"}},
        {"grid2d", {"h", "radius", "stencil", "op", "dirichlet", "c_reg", "tol"}},
        {"ladder", {"space", "radii", "c", "eps", "monitor_r0", "monitor_r1"}},
        {"blowup", {"boundary_values", "c", "fit_d_min", "fit_d_max"}},
        {"barrier", {"samples", "radius"}},
        {"local-bound", {"inner_radius", "outer_radius", "boundary_values", "h"}},
        {"convergence", {"space", "nodes", "h"}},
        {"output", {"csv", "manifest"}},
    };
    return table;
}

class SectionReader {
  public:
    SectionReader(const SectionMap& map, std::string section)
        : map_(map), section_(std::move(section)) {}

    bool has(const std::string& key) const {
        const auto it = map_.find(section_);
        return it != map_.end() && it->second.count(key) > 0;
    }
    std::string str(const std::string& key, const std::string& fallback) const {
        const auto it = map_.find(section_);
        if (it == map_.end()) return fallback;
        const auto kit = it->second.find(key);
        return kit == it->second.end() ? fallback : kit->second;
    }
    double num(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        return parse_double(key, str(key, ""));
    }
    int integer(const std::string& key, int fallback) const {
        const double v = num(key, fallback);
        if (v != std::floor(v))
            throw ConfigError(section_ + "." + key + ": expected an integer");
        return static_cast<int>(v);
    }
    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        std::string text = str(key, "");
        std::istringstream in(text);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty())
                throw ConfigError(section_ + "." + key + ": empty list element");
            out.push_back(parse_double(key, item));
        }
        return out;
    }

  private:
    double parse_double(const std::string& key, const std::string& text) const {
        try {
            size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument("trailing text");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(section_ + "." + key + ": not a number: '" + text + "'");
        }
    }
    const SectionMap& map_;
    std::string section_;
};

RunConfig::Experiment parse_experiment(const std::string& name) {
    if (name == "radial") return RunConfig::Experiment::radial;
    if (name == "grid2d") return RunConfig::Experiment::grid2d;
    if (name == "ladder") return RunConfig::Experiment::ladder;
    if (name == "blowup") return RunConfig::Experiment::blowup;
    if (name == "barrier") return RunConfig::Experiment::barrier;
    if (name == "local-bound") return RunConfig::Experiment::local_bound;
    if (name == "convergence") return RunConfig::Experiment::convergence;
    throw ConfigError("experiment.kind: unknown experiment '" + name + "'");
}

const char* experiment_name(RunConfig::Experiment e) {
    switch (e) {
        case RunConfig::Experiment::radial: return "radial";
        case RunConfig::Experiment::grid2d: return "grid2d";
        case RunConfig::Experiment::ladder: return "ladder";
        case RunConfig::Experiment::blowup: return "blowup";
        case RunConfig::Experiment::barrier: return "barrier";
        case RunConfig::Experiment::local_bound: return "local-bound";
        case RunConfig::Experiment::convergence: return "convergence";
    }
    return "unknown";
}

RhsCatalogEntry::Kind parse_rhs_kind(const std::string& name) {
    if (name == "constant") return RhsCatalogEntry::Kind::constant;
    if (name == "compact-bump") return RhsCatalogEntry::Kind::compact_bump;
    if (name == "power-singularity") return RhsCatalogEntry::Kind::power_singularity;
    if (name == "manufactured-from-u")
        return RhsCatalogEntry::Kind::manufactured_from_u;
    if (name == "off-center-singularity")
        return RhsCatalogEntry::Kind::off_center_singularity;
    if (name == "radial-majorant-of")
        return RhsCatalogEntry::Kind::radial_majorant_of;
    throw ConfigError("rhs.kind: unknown kind '" + name + "'");
}

const char* rhs_kind_name(RhsCatalogEntry::Kind k) {
    switch (k) {
        case RhsCatalogEntry::Kind::constant: return "constant";
        case RhsCatalogEntry::Kind::compact_bump: return "compact-bump";
        case RhsCatalogEntry::Kind::power_singularity: return "power-singularity";
        case RhsCatalogEntry::Kind::manufactured_from_u:
            return "manufactured-from-u";
        case RhsCatalogEntry::Kind::off_center_singularity:
            return "off-center-singularity";
        case RhsCatalogEntry::Kind::radial_majorant_of:
            return "radial-majorant-of";
    }
    return "unknown";
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    const SectionMap sections = parse_sections(text);
    for (const auto& [section, keys] : sections) {
        const auto it = allowed_keys().find(section);
        if (it == allowed_keys().end())
            throw ConfigError("unknown config section [" + section + "]");
        for (const auto& [key, value] : keys)
            if (it->second.count(key) == 0)
                throw ConfigError(section + "." + key + ": unknown key");
    }

    RunConfig cfg;
    const SectionReader problem(sections, "problem");
    cfg.lambda = problem.num("lambda", 1.0);
    cfg.Lambda = problem.num("Lambda", 1.0);
    cfg.dim = problem.integer("dim", 2);
    cfg.s = problem.num("s", 3.0);
    try {
        (void)cfg.params();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }

    const SectionReader experiment(sections, "experiment");
    cfg.experiment = parse_experiment(experiment.str("kind", "radial"));
    const double seed = experiment.num("seed", 0.0);
    if (seed < 0.0 || seed != std::floor(seed))
        throw ConfigError("experiment.seed: expected a nonnegative integer");
    cfg.seed = static_cast<std::uint64_t>(seed);

    const SectionReader rhs(sections, "rhs");
    cfg.rhs.kind = parse_rhs_kind(rhs.str("kind", "constant"));
    cfg.rhs.amplitude = rhs.num("amplitude", 1.0);
    cfg.rhs.alpha = rhs.num("alpha", 0.0);
    cfg.rhs.width = rhs.num("width", 0.5);
    cfg.rhs.x0 = rhs.num("x0", 0.0);
    cfg.rhs.y0 = rhs.num("y0", 0.0);
    cfg.rhs.manufactured = rhs.str("manufactured", "parabola");
    cfg.rhs.c_reg = rhs.num("c_reg", 0.0);
    cfg.mollify_width = rhs.num("mollify_width", 0.0);
    if (cfg.rhs.manufactured != "parabola" && cfg.rhs.manufactured != "saddle")
        throw ConfigError("rhs.manufactured: expected 'parabola' or 'saddle'");
    if (cfg.rhs.kind == RhsCatalogEntry::Kind::compact_bump && !(cfg.rhs.width > 0.0))
        throw ConfigError("rhs.width: must be positive for compact-bump");
    if (cfg.mollify_width < 0.0)
        throw ConfigError("rhs.mollify_width: must be nonnegative");

    const SectionReader radial_sec(sections, "radial");
    cfg.radius = radial_sec.num("radius", cfg.radius);
    cfg.nodes = radial_sec.integer("nodes", cfg.nodes);
    cfg.grading = radial_sec.str("grading", cfg.grading);
    cfg.grading_ratio = radial_sec.num("ratio", cfg.grading_ratio);
    cfg.c_reg = radial_sec.num("c_reg", cfg.c_reg);
    cfg.tol = radial_sec.num("tol", cfg.tol);
    if (cfg.grading != "uniform" && cfg.grading != "geometric")
        throw ConfigError("radial.grading: expected 'uniform' or 'geometric'");

    const SectionReader grid_sec(sections, "grid2d");
    cfg.h = grid_sec.num("h", cfg.h);
    cfg.radius = grid_sec.num("radius", cfg.radius);
    cfg.stencil = grid_sec.str("stencil", cfg.stencil);
    cfg.op = grid_sec.str("op", cfg.op);
    cfg.dirichlet = grid_sec.num("dirichlet", cfg.dirichlet);
    cfg.c_reg = grid_sec.num("c_reg", cfg.c_reg);
    cfg.tol = grid_sec.num("tol", cfg.tol);
    if (cfg.stencil != "standard" && cfg.stencil != "axes-only")
        throw ConfigError("grid2d.stencil: expected 'standard' or 'axes-only'");
    if (cfg.op != "plus" && cfg.op != "minus")
        throw ConfigError("grid2d.op: expected 'plus' or 'minus'");

    const SectionReader ladder(sections, "ladder");
    cfg.ladder_space = ladder.str("space", cfg.ladder_space);
    cfg.ladder_radii = ladder.list("radii");
    cfg.ladder_c = ladder.list("c");
    cfg.ladder_eps = ladder.list("eps");
    cfg.monitor_r0 = ladder.num("monitor_r0", 0.0);
    cfg.monitor_r1 = ladder.num("monitor_r1", 0.0);
    if (cfg.ladder_space != "radial" && cfg.ladder_space != "plane")
        throw ConfigError("ladder.space: expected 'radial' or 'plane'");

    const SectionReader blow(sections, "blowup");
    cfg.blowup_boundary_values = blow.list("boundary_values");
    cfg.blowup_c = blow.list("c");
    cfg.fit_d_min = blow.num("fit_d_min", 0.0);
    cfg.fit_d_max = blow.num("fit_d_max", 0.0);

    const SectionReader barrier(sections, "barrier");
    cfg.barrier_samples = barrier.integer("samples", cfg.barrier_samples);
    cfg.radius = barrier.num("radius", cfg.radius);

    const SectionReader local(sections, "local-bound");
    cfg.inner_radius = local.num("inner_radius", cfg.inner_radius);
    cfg.outer_radius = local.num("outer_radius", cfg.outer_radius);
    cfg.boundary_values = local.list("boundary_values");
    cfg.h = local.num("h", cfg.h);

    const SectionReader conv(sections, "convergence");
    cfg.study_space = conv.str("space", cfg.study_space);
    if (cfg.study_space != "radial" && cfg.study_space != "plane")
        throw ConfigError("convergence.space: expected 'radial' or 'plane'");
    for (double v : conv.list("nodes")) {
        if (v <= 0.0 || v != std::floor(v))
            throw ConfigError("convergence.nodes: expected positive integers");
        cfg.study_nodes.push_back(static_cast<int>(v));
    }
    cfg.study_h = conv.list("h");

    const SectionReader output(sections, "output");
    cfg.csv_name = output.str("csv", "");
    cfg.manifest_name = output.str("manifest", cfg.manifest_name);
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// experiment drivers

namespace {

json config_echo(const RunConfig& c) {
    json j;
    j["experiment"] = experiment_name(c.experiment);
    j["problem"] = {{"lambda", c.lambda}, {"Lambda", c.Lambda}, {"dim", c.dim},
                    {"s", c.s}};
    j["rhs"] = {{"kind", rhs_kind_name(c.rhs.kind)},
                {"amplitude", c.rhs.amplitude},
                {"alpha", c.rhs.alpha},
                {"width", c.rhs.width},
                {"x0", c.rhs.x0},
                {"y0", c.rhs.y0},
                {"manufactured", c.rhs.manufactured},
                {"c_reg", c.rhs.c_reg},
                {"mollify_width", c.mollify_width}};
    j["seed"] = c.seed;
    j["exploratory"] = c.exploratory;
    switch (c.experiment) {
        case RunConfig::Experiment::radial:
        case RunConfig::Experiment::convergence:
            j["radial"] = {{"radius", c.radius},   {"nodes", c.nodes},
                           {"grading", c.grading}, {"ratio", c.grading_ratio},
                           {"c_reg", c.c_reg},     {"tol", c.tol}};
            break;
        default:
            break;
    }
    if (c.experiment == RunConfig::Experiment::grid2d ||
        c.experiment == RunConfig::Experiment::blowup ||
        c.experiment == RunConfig::Experiment::convergence)
        j["grid2d"] = {{"h", c.h},          {"radius", c.radius},
                       {"stencil", c.stencil}, {"op", c.op},
                       {"dirichlet", c.dirichlet}, {"c_reg", c.c_reg},
                       {"tol", c.tol}};
    return j;
}

grid2d::DirectionStencil stencil_from(const RunConfig& c) {
    return c.stencil == "axes-only" ? grid2d::DirectionStencil::axes_only()
                                    : grid2d::DirectionStencil::standard();
}

struct GateRefusal {
    std::string gate;
    std::string detail;
};

// nullptr when the data clears the gate for this experiment family
std::unique_ptr<GateRefusal> gate_check(const RunConfig& c, bool radial_family) {
    const AdmissibilityReport rep = classify_rhs(c.rhs, c.params());
    if (radial_family && !rep.weighted_radial_ok)
        return std::make_unique<GateRefusal>(GateRefusal{
            "weighted-radial-integrability",
            "int_0^R r^(n_plus-1)|f| dr diverges (alpha >= n_plus): " + rep.detail});
    if (!radial_family && !rep.ln_loc_ok)
        return std::make_unique<GateRefusal>(GateRefusal{
            "local-LN-integrability",
            "f is not locally L^N (alpha >= 1): " + rep.detail});
    return nullptr;
}

radial::RadialGrid radial_grid_from(const RunConfig& c, double radius, int nodes) {
    const radial::Grading g = c.grading == "geometric"
                                  ? radial::Grading::geometric_toward_zero
                                  : radial::Grading::uniform;
    return radial::make_radial_grid(radius, nodes, g, c.grading_ratio);
}

void run_radial(const RunConfig& c, CsvWriter& csv, json& results) {
    const ProblemParams params = c.params();
    const radial::RadialGrid grid = radial_grid_from(c, c.radius, c.nodes);

    radial::RadialRhs rhs = to_radial_rhs(c.rhs, params, grid);
    if (c.mollify_width > 0.0) {
        const MollifyResult m =
            mollify(c.rhs, params, MollifierSpec{c.mollify_width}, grid);
        if (c.rhs.kind == RhsCatalogEntry::Kind::power_singularity)
            rhs = radial::RadialRhs::mollified_power(c.rhs.amplitude, c.rhs.alpha,
                                                     c.mollify_width);
        else
            rhs = radial::RadialRhs::sampled(m.values);
        results["mollify_distance"] = m.distance;
    }

    radial::RadialSolverConfig scfg;
    scfg.tol = c.tol;
    radial::RadialSolveReport rep;
    radial::RadialState state =
        radial::solve_radial_bvp(grid, rhs, params, c.c_reg, scfg, &rep);

    radial::RadialState wstate = state;
    radial::recompute_derivative(grid, wstate);
    const radial::RadialWeights weights =
        radial::compute_weights(grid, wstate, rhs, params);
    const radial::WeakResidualReport weak =
        radial::weak_residual_check(grid, wstate, weights, rhs, params, 32);

    csv.header({"r", "u", "du", "rho", "rho_tilde", "dim_eff"});
    for (int i = 0; i < grid.size(); ++i) {
        const size_t si = static_cast<size_t>(i);
        csv.row({grid.r(i), state.u[si], wstate.du[si], weights.rho[si],
                 weights.rho_tilde[si], weights.dim_eff[si]});
    }

    results["outer_iterations"] = rep.outer_iterations;
    results["final_residual"] = rep.final_residual;
    results["weak_residual"] = {{"max_residual", weak.max_residual},
                                {"int_rho_us", weak.int_rho_us},
                                {"int_rho_du", weak.int_rho_du},
                                {"flux_at_zero", weak.flux_at_zero},
                                {"test_functions", weak.test_functions}};
    results["admissibility_integral"] =
        radial::admissibility_integral(grid, rhs, params);
}

void run_grid2d(const RunConfig& c, CsvWriter& csv, json& results) {
    const ProblemParams params = c.params();
    const grid2d::DirectionStencil stencil = stencil_from(c);
    const grid2d::CartesianGrid2 grid = grid2d::make_grid(c.h, c.radius, stencil);

    grid2d::GridFn rhs(static_cast<size_t>(grid.active_count()));
    if (c.mollify_width > 0.0) {
        rhs = mollify(c.rhs, params, MollifierSpec{c.mollify_width}, grid).values;
    } else {
        for (int n = 0; n < grid.active_count(); ++n) {
            const auto [x, y] = grid.coords(n);
            rhs[static_cast<size_t>(n)] = eval_rhs_2d(c.rhs, params, x, y);
        }
    }
    for (double v : rhs)
        if (!std::isfinite(v))
            throw std::invalid_argument(
                "grid2d: data not finite on a grid node; mollify or move the "
                "singular point off the lattice");

    grid2d::Grid2SolverConfig scfg;
    scfg.tol = c.tol;
    scfg.extremal = c.op == "minus" ? grid2d::Extremal::minus_op
                                    : grid2d::Extremal::plus_op;
    const double g = c.dirichlet;
    grid2d::PolicySolveReport rep;
    const grid2d::GridFn u = grid2d::policy_iteration_solve(
        grid, stencil, rhs, params, c.c_reg,
        [g](double, double) { return g; }, scfg, &rep);

    csv.header({"x", "y", "u"});
    for (int n = 0; n < grid.active_count(); ++n) {
        const auto [x, y] = grid.coords(n);
        csv.row({x, y, u[static_cast<size_t>(n)]});
    }
    results["policy_iterations"] = rep.policy_iterations;
    results["final_residual"] = rep.final_residual;
}

void run_ladder(const RunConfig& c, CsvWriter& csv, json& results) {
    const ProblemParams params = c.params();
    const size_t m = c.ladder_radii.size();
    if (m == 0 || c.ladder_c.size() != m || c.ladder_eps.size() != m)
        throw ConfigError(
            "ladder.radii/c/eps: lists must be nonempty and equally long");

    if (c.ladder_space == "radial") {
        if (c.rhs.kind != RhsCatalogEntry::Kind::constant &&
            c.rhs.kind != RhsCatalogEntry::Kind::power_singularity)
            throw ConfigError(
                "rhs.kind: the radial ladder needs closed-form data (constant or "
                "power-singularity)");
        radial::RadialLadderSchedule sched;
        for (size_t k = 0; k < m; ++k)
            sched.rungs.push_back(
                {c.ladder_radii[k], c.ladder_c[k], c.ladder_eps[k]});
        sched.nodes = c.nodes;
        sched.grading = c.grading == "geometric"
                            ? radial::Grading::geometric_toward_zero
                            : radial::Grading::uniform;
        sched.ratio = c.grading_ratio;
        sched.monitor_r0 = c.monitor_r0;
        sched.monitor_r1 = c.monitor_r1;
        sched.solver.tol = c.tol;
        const radial::RadialRhs target =
            to_radial_rhs(c.rhs, params, radial_grid_from(c, c.ladder_radii[0], c.nodes));
        const radial::RadialLadderResult lad =
            radial::approximation_ladder(target, params, sched);

        csv.header({"rung", "radius", "c_reg", "epsilon", "u_first_node",
                    "int_rho_us", "data_distance", "sup_diff_prev"});
        for (size_t k = 0; k < m; ++k)
            csv.row({static_cast<double>(k), c.ladder_radii[k], c.ladder_c[k],
                     c.ladder_eps[k], lad.u_at_first_node[k], lad.int_rho_us[k],
                     lad.data_distance[k],
                     k == 0 ? kNan : lad.sup_interior_diff[k - 1]});
        results["sup_interior_diff"] = lad.sup_interior_diff;
        results["int_rho_us"] = lad.int_rho_us;
    } else {
        grid2d::LadderSchedule sched;
        sched.radii = c.ladder_radii;
        sched.c_regs = c.ladder_c;
        sched.epsilons = c.ladder_eps;
        sched.monitor_radius = c.monitor_r0 > 0.0 ? c.monitor_r0
                                                  : 0.5 * c.ladder_radii.front();
        sched.h = c.h;
        sched.stencil = stencil_from(c);
        sched.solver.tol = c.tol;
        const RhsCatalogEntry entry = c.rhs;
        const grid2d::LadderReport rep = grid2d::whole_space_ladder(
            [&entry, &params](double x, double y) {
                return eval_rhs_2d(entry, params, x, y);
            },
            params, sched);

        csv.header({"rung", "radius", "c_reg", "epsilon", "sup_monitor_abs",
                    "local_bound_ref", "min_u", "policy_iterations",
                    "final_residual", "sup_diff_prev"});
        for (size_t k = 0; k < m; ++k)
            csv.row({static_cast<double>(k), sched.radii[k], sched.c_regs[k],
                     sched.epsilons[k], rep.sup_monitor_abs[k],
                     rep.local_bound_ref[k], rep.min_u[k],
                     static_cast<double>(rep.policy_iterations[k]),
                     rep.final_residuals[k],
                     k == 0 ? kNan : rep.sup_monitor_diff[k - 1]});
        results["sup_monitor_diff"] = rep.sup_monitor_diff;
        results["sup_monitor_abs"] = rep.sup_monitor_abs;
        results["local_bound_ref"] = rep.local_bound_ref;
    }
}

void run_blowup(const RunConfig& c, CsvWriter& csv, json& results) {
    const ProblemParams params = c.params();
    blowup::BlowupSchedule sched;
    sched.boundary_values = c.blowup_boundary_values;
    sched.c_regs = c.blowup_c;
    sched.fit_d_min = c.fit_d_min;
    sched.fit_d_max = c.fit_d_max;
    blowup::BlowupConfig bcfg;
    bcfg.h = c.h;
    bcfg.stencil = stencil_from(c);
    bcfg.solver.tol = c.tol;
    const RhsCatalogEntry entry = c.rhs;
    const blowup::EscalationResult res = blowup::solve_explosive(
        c.radius,
        [&entry, &params](double x, double y) {
            return eval_rhs_2d(entry, params, x, y);
        },
        params, sched, bcfg);

    csv.header({"row", "boundary_value", "center_value", "fitted_exponent",
                "fitted_amplitude", "r_squared", "theoretical_exponent",
                "theoretical_amplitude"});
    for (size_t k = 0; k < res.rungs.size(); ++k)
        csv.mixed_row({"rung", fmt17(sched.boundary_values[k]),
                       fmt17(res.center_value[k]), "", "", "", "", ""});
    csv.mixed_row({"fit", "", "", fmt17(res.fit.fitted_exponent),
                   fmt17(res.fit.fitted_amplitude), fmt17(res.fit.r_squared),
                   fmt17(res.fit.theoretical_exponent),
                   fmt17(res.fit.theoretical_amplitude)});

    results["fit"] = {{"exponent", res.fit.fitted_exponent},
                      {"amplitude", res.fit.fitted_amplitude},
                      {"r_squared", res.fit.r_squared},
                      {"theoretical_exponent", res.fit.theoretical_exponent},
                      {"theoretical_amplitude", res.fit.theoretical_amplitude},
                      {"samples", res.fit.samples},
                      {"positive_curvature_fraction",
                       res.fit.positive_curvature_fraction}};
    results["center_values"] = res.center_value;
}

void run_barrier(const RunConfig& c, CsvWriter& csv, json& results) {
    const ProblemParams params = c.params();
    const barriers::OssermanBarrier barrier(c.radius, params);
    const int samples = c.barrier_samples;

    csv.header({"r", "U", "dU", "d2U", "residual"});
    for (int k = 0; k < samples; ++k) {
        const double r = barrier.R * k / samples;
        const auto d = barrier.eval(r);
        csv.row({r, d.U, d.dU, d.d2U, barriers::osserman_residual_at(barrier, r)});
    }
    results["alpha"] = barrier.alpha;
    results["C"] = barrier.C;
    results["min_residual"] = barriers::osserman_residual_check(barrier, samples);
}

void run_local_bound(const RunConfig& c, CsvWriter& csv, json& results) {
    const ProblemParams params = c.params();
    barriers::LocalBoundConfig bcfg;
    bcfg.h = c.h;
    bcfg.stencil = stencil_from(c);
    bcfg.solver.tol = c.tol;
    bcfg.c_reg = c.c_reg;
    const RhsCatalogEntry entry = c.rhs;
    const barriers::LocalBoundReport rep = barriers::local_bound_experiment(
        params,
        [&entry, &params](double x, double y) {
            return eval_rhs_2d(entry, params, x, y);
        },
        c.inner_radius, c.outer_radius, c.boundary_values, bcfg);

    csv.header({"boundary_value", "sup_inner"});
    for (size_t k = 0; k < rep.boundary_values.size(); ++k)
        csv.row({rep.boundary_values[k], rep.sup_inner[k]});

    const barriers::OssermanBarrier cap(c.outer_radius, params);
    results["f_norm"] = rep.f_norm;
    results["ratio"] = rep.ratio;
    results["barrier_cap"] = cap.value(c.inner_radius);
}

void run_convergence(const RunConfig& c, CsvWriter& csv, json& results) {
    const ProblemParams params = c.params();
    if (c.rhs.kind != RhsCatalogEntry::Kind::manufactured_from_u)
        throw ConfigError("rhs.kind: convergence studies need manufactured-from-u");
    if (c.rhs.c_reg != c.c_reg)
        throw ConfigError(
            "rhs.c_reg: must match the solver c_reg for a manufactured study");

    std::vector<double> hs, errs;
    if (c.study_space == "radial") {
        if (c.study_nodes.empty())
            throw ConfigError("convergence.nodes: list required for radial studies");
        if (c.rhs.manufactured != "parabola")
            throw ConfigError(
                "rhs.manufactured: radial studies use the parabola datum");
        for (int n : c.study_nodes) {
            const radial::RadialGrid grid =
                radial::make_radial_grid(1.0, n, radial::Grading::uniform);
            const radial::RadialRhs rhs = to_radial_rhs(c.rhs, params, grid);
            radial::RadialSolverConfig scfg;
            scfg.tol = c.tol;
            const radial::RadialState state =
                radial::solve_radial_bvp(grid, rhs, params, c.c_reg, scfg);
            double err = 0.0;
            for (int i = 0; i < grid.size(); ++i)
                err = std::max(err, std::abs(state.u[static_cast<size_t>(i)] -
                                             (1.0 - grid.r(i) * grid.r(i))));
            hs.push_back(1.0 / n);
            errs.push_back(err);
        }
    } else {
        if (c.study_h.empty())
            throw ConfigError("convergence.h: list required for planar studies");
        const grid2d::DirectionStencil stencil = stencil_from(c);
        const bool saddle = c.rhs.manufactured == "saddle";
        for (double h : c.study_h) {
            const grid2d::CartesianGrid2 grid = grid2d::make_grid(h, 1.0, stencil);
            grid2d::GridFn rhs(static_cast<size_t>(grid.active_count()));
            for (int n = 0; n < grid.active_count(); ++n) {
                const auto [x, y] = grid.coords(n);
                rhs[static_cast<size_t>(n)] = eval_rhs_2d(c.rhs, params, x, y);
            }
            grid2d::Grid2SolverConfig scfg;
            scfg.tol = c.tol;
            auto exact = [saddle](double x, double y) {
                return saddle ? x * x - y * y : 1.0 - (x * x + y * y);
            };
            const grid2d::GridFn u = grid2d::policy_iteration_solve(
                grid, stencil, rhs, params, c.c_reg, exact, scfg);
            double err = 0.0;
            for (int n = 0; n < grid.active_count(); ++n) {
                const auto [x, y] = grid.coords(n);
                err = std::max(err, std::abs(u[static_cast<size_t>(n)] - exact(x, y)));
            }
            hs.push_back(h);
            errs.push_back(err);
        }
    }

    csv.header({"h", "max_error", "observed_order"});
    std::vector<double> orders;
    for (size_t k = 0; k < hs.size(); ++k) {
        const double order =
            k == 0 ? kNan
                   : std::log(errs[k - 1] / errs[k]) / std::log(hs[k - 1] / hs[k]);
        if (k > 0) orders.push_back(order);
        csv.row({hs[k], errs[k], order});
    }
    results["max_errors"] = errs;
    results["observed_orders"] = orders;
}

}  // namespace

RunResult run(const RunConfig& config, std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult out;

    json manifest;
    manifest["version"] = "1.0.0";
    manifest["config"] = config_echo(config);
    manifest["seed"] = config.seed;

    const AdmissibilityReport adm = classify_rhs(config.rhs, config.params());
    manifest["gates"] = {{"weighted_radial_ok", adm.weighted_radial_ok},
                         {"ln_loc_ok", adm.ln_loc_ok},
                         {"detail", adm.detail}};

    std::filesystem::create_directories(config.out_dir);
    std::string csv_name = config.csv_name;
    if (csv_name.empty())
        csv_name = std::string(experiment_name(config.experiment)) + ".csv";
    const std::string csv_path =
        (std::filesystem::path(config.out_dir) / csv_name).string();
    const std::string manifest_path =
        (std::filesystem::path(config.out_dir) / config.manifest_name).string();
    out.manifest_path = manifest_path;

    auto finish = [&](int code, const std::string& error_class,
                      const std::string& message) {
        const auto t1 = std::chrono::steady_clock::now();
        manifest["timings"] = {
            {"total_ms",
             std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()}};
        if (!error_class.empty())
            manifest["error"] = {{"class", error_class}, {"message", message}};
        std::ofstream mf(manifest_path);
        mf << manifest.dump(2) << '\n';
        out.exit_code = code;
        out.error_class = error_class;
        return out;
    };

    // admissibility gates: radial experiments need the weighted integral,
    // planar ones local L^N integrability
    const bool radial_family =
        config.experiment == RunConfig::Experiment::radial ||
        (config.experiment == RunConfig::Experiment::ladder &&
         config.ladder_space == "radial") ||
        (config.experiment == RunConfig::Experiment::convergence &&
         config.study_space == "radial");
    const bool gated = config.experiment != RunConfig::Experiment::barrier;
    if (gated) {
        if (auto refusal = gate_check(config, radial_family)) {
            if (!config.exploratory) {
                log << "rejected by the " << refusal->gate << " gate: "
                    << refusal->detail << "\n";
                return finish(4, "admissibility-gate",
                              refusal->gate + ": " + refusal->detail);
            }
            log << "warning: " << refusal->gate
                << " gate bypassed (exploratory): " << refusal->detail << "\n";
            manifest["warnings"] = {refusal->gate + " bypassed (exploratory)"};
        }
    }

    try {
        CsvWriter csv(csv_path);
        json results;
        switch (config.experiment) {
            case RunConfig::Experiment::radial:
                run_radial(config, csv, results);
                break;
            case RunConfig::Experiment::grid2d:
                run_grid2d(config, csv, results);
                break;
            case RunConfig::Experiment::ladder:
                run_ladder(config, csv, results);
                break;
            case RunConfig::Experiment::blowup:
                run_blowup(config, csv, results);
                break;
            case RunConfig::Experiment::barrier:
                run_barrier(config, csv, results);
                break;
            case RunConfig::Experiment::local_bound:
                run_local_bound(config, csv, results);
                break;
            case RunConfig::Experiment::convergence:
                run_convergence(config, csv, results);
                break;
        }
        manifest["results"] = results;
        out.csv_path = csv_path;
        log << "wrote " << csv_path << "\n";
        return finish(0, "", "");
    } catch (const ConfigError& e) {
        return finish(2, "config", e.what());
    } catch (const ConvergenceError& e) {
        return finish(3, "convergence", e.what());
    } catch (const grid2d::PolicyCyclingError& e) {
        return finish(3, "policy-cycling", e.what());
    } catch (const radial::LadderError& e) {
        return finish(3, "ladder", e.what());
    } catch (const grid2d::LadderError& e) {
        return finish(3, "ladder", e.what());
    } catch (const blowup::EscalationError& e) {
        return finish(3, "escalation", e.what());
    } catch (const blowup::FitError& e) {
        return finish(3, "fit", e.what());
    } catch (const barriers::ExperimentError& e) {
        return finish(3, "experiment", e.what());
    } catch (const std::invalid_argument& e) {
        return finish(2, "input", e.what());
    } catch (const std::domain_error& e) {
        return finish(2, "input", e.what());
    } catch (const std::logic_error& e) {
        return finish(3, "internal", e.what());
    } catch (const std::exception& e) {
        return finish(3, "solver", e.what());
    }
}

}  // namespace pucci::harness
