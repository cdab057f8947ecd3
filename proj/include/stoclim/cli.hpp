// cli.hpp: JSON run configuration and the command implementations behind tools/stoclim
//
// Config layout (all blocks optional except the system):
//   {"system": {"hamiltonian": [[[re, im], ...], ...], "couplings": [...], "cluster_tol": 1e-9}
//    | "system": {"spin_chain": {"sites": 3, "J": 1.0, "boundary": "periodic", "convention": "half"}},
//    "bath": {"beta": 1.0, "kernel": "analytic", "dos": "paper", "filter": {"omega_max": 0.5},
//             "lamb_shift": false, "uv_cutoff": 50.0, "spontaneous_emission": true,
//             "form_factor": "g.csv" | ["g0.csv", ...] | 1.0, "mode_density": "thermal" | "n.csv"},
//    "run": {...command parameters...}}
// The system keys may also sit at the top level.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "stoclim/bath.hpp"
#include "stoclim/evolution.hpp"
#include "stoclim/experiments.hpp"
#include "stoclim/generator.hpp"
#include "stoclim/glauber.hpp"
#include "stoclim/operator_core.hpp"

namespace stoclim::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2 };

namespace field {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string at(const std::string& path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config field '" + path + "': " + what);
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) fail(join(path, key), "missing");
    return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity" || s == "+inf") return std::numeric_limits<double>::infinity();
    }
    fail(path, "expected a number");
}

inline bool boolean(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected true/false");
    return v.get<bool>();
}

inline std::string string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

inline int integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
}

inline Complex complex(const json& v, const std::string& path) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        return {v[0].get<double>(), v[1].get<double>()};
    }
    fail(path, "expected a number or an [re, im] pair");
}

inline Matrix matrix(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
    const auto rows = static_cast<Index>(v.size());
    Index cols = -1;
    Matrix m;
    for (std::size_t r = 0; r < v.size(); ++r) {
        const auto& row = v[r];
        if (!row.is_array()) fail(at(path, r), "expected a row array");
        if (cols < 0) {
            cols = static_cast<Index>(row.size());
            m.resize(rows, cols);
        } else if (static_cast<Index>(row.size()) != cols) {
            fail(at(path, r), "row length differs from row 0");
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            m(static_cast<Index>(r), static_cast<Index>(c)) = complex(row[c], at(at(path, r), c));
        }
    }
    return m;
}

template <class T, class F>
std::optional<T> optional(const json& obj, const std::string& key, const std::string& path, F&& read) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return read(obj.at(key), join(path, key));
}

}  // namespace field

struct SystemConfig {
    std::optional<SpinChainSpec> chain;
    Matrix hamiltonian;
    std::vector<Matrix> couplings;
    std::optional<double> cluster_tol;
};

struct RunConfig {
    SystemConfig system;
    BathSpec bath;
    json run = json::object();
    std::filesystem::path base_dir;
};

inline Boundary parse_boundary(const std::string& s, const std::string& path) {
    if (s == "open") return Boundary::Open;
    if (s == "periodic") return Boundary::Periodic;
    field::fail(path, "expected 'open' or 'periodic'");
}

inline BondConvention parse_convention(const std::string& s, const std::string& path) {
    if (s == "half") return BondConvention::Half;
    if (s == "full") return BondConvention::Full;
    field::fail(path, "expected 'half' or 'full'");
}

inline DosConvention parse_dos(const std::string& s, const std::string& path) {
    if (s == "paper") return DosConvention::Paper;
    if (s == "physical") return DosConvention::Physical;
    field::fail(path, "expected 'paper' or 'physical'");
}

inline SpinChainSpec parse_chain(const json& v, const std::string& path) {
    if (!v.is_object()) field::fail(path, "expected an object");
    SpinChainSpec cs;
    cs.sites = field::integer(field::require(v, "sites", path), field::join(path, "sites"));
    cs.boundary = parse_boundary(field::optional<std::string>(v, "boundary", path, field::string).value_or("open"),
                                 field::join(path, "boundary"));
    cs.convention = parse_convention(field::optional<std::string>(v, "convention", path, field::string).value_or("half"),
                                     field::join(path, "convention"));
    const auto jpath = field::join(path, "J");
    const json& j = field::require(v, "J", path);
    const std::size_t bonds = static_cast<std::size_t>(cs.boundary == Boundary::Periodic ? cs.sites : cs.sites - 1);
    if (j.is_array()) {
        for (std::size_t k = 0; k < j.size(); ++k) cs.couplings.push_back(field::number(j[k], field::at(jpath, k)));
    } else {
        cs.couplings.assign(bonds, field::number(j, jpath));
    }
    try {
        cs.validate();
    } catch (const ConfigError& e) {
        field::fail(path, e.what());
    }
    return cs;
}

inline SystemConfig parse_system(const json& v, const std::string& path) {
    SystemConfig sys;
    const bool has_h = v.is_object() && v.contains("hamiltonian");
    const bool has_chain = v.is_object() && (v.contains("spin_chain") || v.contains("sites"));
    if (has_h && has_chain) field::fail(path.empty() ? "system" : path, "give either 'hamiltonian' or 'spin_chain', not both");
    if (!has_h && !has_chain) field::fail(field::join(path, "hamiltonian"), "missing (or give 'spin_chain')");
    sys.cluster_tol = field::optional<double>(v, "cluster_tol", path, field::number);
    if (has_chain) {
        const auto cpath = v.contains("spin_chain") ? field::join(path, "spin_chain") : path;
        sys.chain = parse_chain(v.contains("spin_chain") ? v.at("spin_chain") : v, cpath);
        if (sys.chain->sites > kMaxQuantumSites) return sys;  // classical-only
        auto is = ising_system(*sys.chain);
        sys.hamiltonian = is.hamiltonian.matrix();
        sys.couplings = std::move(is.couplings);
        return sys;
    }
    const auto hpath = field::join(path, "hamiltonian");
    sys.hamiltonian = field::matrix(v.at("hamiltonian"), hpath);
    if (sys.hamiltonian.rows() != sys.hamiltonian.cols()) field::fail(hpath, "matrix must be square");
    if (sys.hamiltonian.rows() > 64) field::fail(hpath, "dimension exceeds 64");
    if (v.contains("couplings")) {
        const auto cpath = field::join(path, "couplings");
        const json& c = v.at("couplings");
        if (!c.is_array()) field::fail(cpath, "expected a list of matrices");
        for (std::size_t k = 0; k < c.size(); ++k) {
            Matrix m = field::matrix(c[k], field::at(cpath, k));
            if (m.rows() != sys.hamiltonian.rows() || m.cols() != sys.hamiltonian.cols()) {
                field::fail(field::at(cpath, k), "dimension does not match the hamiltonian");
            }
            sys.couplings.push_back(std::move(m));
        }
    }
    return sys;
}

inline RadialFunction table_function(const std::filesystem::path& base, const std::string& file, const std::string& path) {
    try {
        auto t = std::make_shared<TabulatedFunction>(TabulatedFunction::from_csv((base / file).string()));
        return [t](double x) { return (*t)(x); };
    } catch (const ConfigError& e) {
        field::fail(path, e.what());
    }
}

inline BathSpec parse_bath(const json& v, const std::string& path, const std::filesystem::path& base) {
    BathSpec b;
    if (v.is_null()) return b;
    if (!v.is_object()) field::fail(path, "expected an object");
    b.beta = field::optional<double>(v, "beta", path, field::number).value_or(1.0);
    const auto kernel = field::optional<std::string>(v, "kernel", path, field::string).value_or("analytic");
    if (kernel == "analytic" || kernel == "analytic_linear_dispersion") b.kernel = Kernel::Analytic;
    else if (kernel == "radial_quadrature" || kernel == "quadrature") b.kernel = Kernel::RadialQuadrature;
    else field::fail(field::join(path, "kernel"), "expected 'analytic' or 'radial_quadrature'");
    b.dos = parse_dos(field::optional<std::string>(v, "dos", path, field::string).value_or("paper"), field::join(path, "dos"));
    if (v.contains("filter") && !v.at("filter").is_null()) {
        const auto fpath = field::join(path, "filter");
        b.filter = FrequencyFilter{field::number(field::require(v.at("filter"), "omega_max", fpath), field::join(fpath, "omega_max"))};
    }
    b.lamb_shift = field::optional<bool>(v, "lamb_shift", path, field::boolean).value_or(false);
    b.uv_cutoff = field::optional<double>(v, "uv_cutoff", path, field::number);
    b.pv_excision = field::optional<double>(v, "pv_excision", path, field::number);
    b.spontaneous_emission = field::optional<bool>(v, "spontaneous_emission", path, field::boolean).value_or(true);
    if (v.contains("form_factor")) {
        const auto gpath = field::join(path, "form_factor");
        const json& g = v.at("form_factor");
        if (g.is_number()) {
            const double s = g.get<double>();
            b.form_factors.push_back([s](double) { return s; });
        } else if (g.is_string()) {
            b.form_factors.push_back(table_function(base, g.get<std::string>(), gpath));
        } else if (g.is_array()) {
            for (std::size_t k = 0; k < g.size(); ++k) {
                const auto p = field::at(gpath, k);
                if (g[k].is_number()) {
                    const double s = g[k].get<double>();
                    b.form_factors.push_back([s](double) { return s; });
                } else {
                    b.form_factors.push_back(table_function(base, field::string(g[k], p), p));
                }
            }
        } else {
            field::fail(gpath, "expected a number, a CSV path or a list of them");
        }
    }
    if (v.contains("mode_density")) {
        const auto npath = field::join(path, "mode_density");
        const auto s = field::string(v.at("mode_density"), npath);
        if (s != "thermal") b.mode_density = table_function(base, s, npath);
    }
    try {
        b.validate();
    } catch (const ConfigError& e) {
        field::fail(path, e.what());
    }
    return b;
}

inline RunConfig parse_config(const json& root, const std::filesystem::path& base = {}) {
    if (!root.is_object()) throw ConfigError("config: top level must be a JSON object");
    RunConfig cfg;
    cfg.base_dir = base;
    if (root.contains("system")) cfg.system = parse_system(root.at("system"), "system");
    else cfg.system = parse_system(root, "");
    cfg.bath = parse_bath(root.contains("bath") ? root.at("bath") : json(), "bath", base);
    if (root.contains("run")) {
        if (!root.at("run").is_object()) field::fail("run", "expected an object");
        cfg.run = root.at("run");
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json root;
    try {
        in >> root;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(root, std::filesystem::path(path).parent_path());
}

struct GlobalOptions {
    bool json_output{false};
    std::optional<DosConvention> dos;
    int threads{1};
};

inline void apply_globals(RunConfig& cfg, const GlobalOptions& g) {
    if (g.dos) cfg.bath.dos = *g.dos;
}

// 17 significant digits everywhere.
inline std::string num(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline HermitianOperator system_hamiltonian(const RunConfig& cfg) {
    if (cfg.system.hamiltonian.size() == 0) throw ConfigError("system: quantum path unavailable for this spin chain size");
    try {
        return HermitianOperator(cfg.system.hamiltonian);
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("config field 'system.hamiltonian': ") + e.what());
    }
}

inline OpenSystem open_system(const RunConfig& cfg, DenseMode dense = DenseMode::Auto) {
    GeneratorOptions opt;
    opt.dense = dense;
    return build_open_system(system_hamiltonian(cfg), cfg.system.couplings, cfg.bath, opt, cfg.system.cluster_tol);
}

// ---- spectrum ----------------------------------------------------------------------

inline json spectrum_json(const SpectralData& spec) {
    json j;
    j["dim"] = spec.dim();
    j["cluster_tol"] = spec.cluster_tol();
    json levels = json::array();
    for (const auto& l : spec.levels()) levels.push_back({{"energy", l.energy}, {"degeneracy", l.rank}});
    j["levels"] = levels;
    json f = json::array();
    const BohrSet bohr = bohr_frequencies(spec);
    for (const auto& b : bohr.entries()) f.push_back(b.omega);
    j["bohr_frequencies"] = f;
    const auto g = genericity_check(spec);
    j["generic"] = g.generic();
    j["degenerate_levels"] = g.degenerate_levels;
    j["repeated_frequencies"] = g.repeated_frequencies;
    return j;
}

inline int cmd_spectrum(const RunConfig& cfg, const GlobalOptions& g, std::ostream& out) {
    const auto spec = spectral_decompose(system_hamiltonian(cfg), cfg.system.cluster_tol);
    const json j = spectrum_json(spec);
    if (g.json_output) {
        out << j.dump(2) << "\n";
        return kOk;
    }
    out << "dimension " << spec.dim() << ", " << spec.num_levels() << " levels\n";
    for (const auto& l : spec.levels()) out << "  E = " << num(l.energy) << "  degeneracy " << l.rank << "\n";
    out << "Bohr frequencies:";
    for (const auto& w : j["bohr_frequencies"]) out << " " << num(w.get<double>());
    out << "\n";
    const auto rep = genericity_check(spec);
    if (rep.generic()) {
        out << "generic: yes\n";
    } else {
        out << "generic: no (" << rep.degenerate_levels.size() << " degenerate levels, " << rep.repeated_frequencies.size()
            << " repeated frequencies)\n";
    }
    return kOk;
}

// ---- rates -------------------------------------------------------------------------

inline int cmd_rates(const RunConfig& cfg, const GlobalOptions&, std::ostream& out) {
    const auto sys = open_system(cfg, DenseMode::Never);
    out << "omega,i,j,re_minus,im_minus,re_plus,im_plus\n";
    const auto n = static_cast<Index>(sys.couplings.size());
    for (std::size_t k = 0; k < sys.table.size(); ++k) {
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                const Complex m = sys.table.minus(k)(i, j);
                const Complex p = sys.table.plus(k)(i, j);
                out << num(sys.table.frequencies()[k]) << "," << i << "," << j << "," << num(m.real()) << ","
                    << num(m.imag()) << "," << num(p.real()) << "," << num(p.imag()) << "\n";
            }
        }
    }
    return kOk;
}

// ---- generator ---------------------------------------------------------------------

inline json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

// 8-byte little-endian size header (rows of the square matrix), then row-major (re, im) doubles.
inline void write_dense(const Matrix& l, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    auto put_u64 = [&](std::uint64_t v) {
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xff);
        f.write(reinterpret_cast<const char*>(b), 8);
    };
    auto put_f64 = [&](double x) {
        std::uint64_t v = 0;
        std::memcpy(&v, &x, 8);
        put_u64(v);
    };
    put_u64(static_cast<std::uint64_t>(l.rows()));
    for (Index r = 0; r < l.rows(); ++r) {
        for (Index c = 0; c < l.cols(); ++c) {
            put_f64(l(r, c).real());
            put_f64(l(r, c).imag());
        }
    }
}

inline Matrix read_dense(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read '" + path + "'");
    auto get_u64 = [&]() {
        unsigned char b[8];
        f.read(reinterpret_cast<char*>(b), 8);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
        return v;
    };
    auto get_f64 = [&]() {
        const std::uint64_t v = get_u64();
        double x = 0.0;
        std::memcpy(&x, &v, 8);
        return x;
    };
    const auto n = static_cast<Index>(get_u64());
    Matrix l(n, n);
    for (Index r = 0; r < n; ++r) {
        for (Index c = 0; c < n; ++c) {
            const double re = get_f64();
            l(r, c) = {re, get_f64()};
        }
    }
    if (!f) throw ConfigError("'" + path + "' is truncated");
    return l;
}

inline int cmd_generator(const RunConfig& cfg, const GlobalOptions&, std::ostream& out,
                         const std::optional<std::string>& dense_path) {
    const auto sys = open_system(cfg, dense_path ? DenseMode::Always : DenseMode::Never);
    const auto& gen = sys.generator;
    json j;
    j["dim"] = gen.dim();
    j["vectorization"] = "column-stacking";
    j["effective_hamiltonian"] = matrix_json(gen.effective_hamiltonian());
    json chans = json::array();
    for (const auto& c : gen.channels()) {
        json cj;
        cj["omega"] = c.omega;
        cj["gamma_minus"] = matrix_json(c.gamma_minus);
        cj["gamma_plus"] = matrix_json(c.gamma_plus);
        json jumps = json::array();
        for (const auto& e : c.jumps) jumps.push_back(matrix_json(e));
        cj["jumps"] = jumps;
        chans.push_back(cj);
    }
    j["channels"] = chans;
    if (dense_path) {
        write_dense(gen.dense(), *dense_path);
        j["dense_file"] = *dense_path;
    }
    out << j.dump(2) << "\n";
    return kOk;
}

// ---- evolve ------------------------------------------------------------------------

inline DensityMatrix initial_state(const json& run, const SpectralData& spec, double beta) {
    const Index d = spec.dim();
    if (!run.contains("initial")) return DensityMatrix(spec.matrix_unit(d - 1, d - 1));
    const json& v = run.at("initial");
    const std::string path = "run.initial";
    if (v.is_number_integer()) {
        const int k = v.get<int>();
        if (k < 0 || k >= d) field::fail(path, "eigenstate index out of range");
        return DensityMatrix(spec.matrix_unit(k, k));
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "ground") return DensityMatrix(spec.matrix_unit(0, 0));
        if (s == "excited") return DensityMatrix(spec.matrix_unit(d - 1, d - 1));
        if (s == "maximally_mixed") return DensityMatrix::maximally_mixed(d);
        if (s == "gibbs") {
            if (std::isinf(beta)) return DensityMatrix(spec.matrix_unit(0, 0));
            return gibbs_state(beta, spec);
        }
        field::fail(path, "expected ground, excited, gibbs, maximally_mixed, an index, {coherent: [mu, nu]} or {matrix: ...}");
    }
    if (v.is_object() && v.contains("coherent")) {
        const json& p = v.at("coherent");
        if (!p.is_array() || p.size() != 2) field::fail(path + ".coherent", "expected [mu, nu]");
        const int mu = field::integer(p[0], path + ".coherent[0]");
        const int nu = field::integer(p[1], path + ".coherent[1]");
        if (mu < 0 || nu < 0 || mu >= d || nu >= d) field::fail(path + ".coherent", "index out of range");
        return DensityMatrix::pure((spec.basis().col(mu) + spec.basis().col(nu)) / std::sqrt(2.0));
    }
    if (v.is_object() && v.contains("matrix")) {
        try {
            return DensityMatrix(field::matrix(v.at("matrix"), path + ".matrix"));
        } catch (const ValidationError& e) {
            field::fail(path + ".matrix", e.what());
        }
    }
    field::fail(path, "unrecognized initial state");
}

inline std::vector<double> time_grid(double t_max, int points) {
    if (!(t_max > 0.0)) throw ConfigError("t-max must be > 0");
    if (points < 1) throw ConfigError("points must be >= 1");
    std::vector<double> t;
    for (int k = 0; k <= points; ++k) t.push_back(t_max * k / points);
    return t;
}

inline int cmd_evolve(const RunConfig& cfg, const GlobalOptions&, std::ostream& out, std::optional<double> t_max,
                      std::optional<int> points) {
    const auto sys = open_system(cfg);
    const double tm = t_max.value_or(field::optional<double>(cfg.run, "t_max", "run", field::number).value_or(10.0));
    const int np = points.value_or(field::optional<int>(cfg.run, "points", "run", field::integer).value_or(200));
    const auto rho0 = initial_state(cfg.run, sys.spec, cfg.bath.beta);
    const auto traj = evolve(sys.generator, rho0, time_grid(tm, np));
    const Index d = sys.spec.dim();
    out << "t";
    for (Index r = 0; r < d; ++r) {
        for (Index c = 0; c < d; ++c) out << ",re_" << r << "_" << c << ",im_" << r << "_" << c;
    }
    out << "\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const Matrix e = sys.spec.to_eigenbasis(traj.states[k].matrix());
        out << num(traj.times[k]);
        for (Index r = 0; r < d; ++r) {
            for (Index c = 0; c < d; ++c) out << "," << num(e(r, c).real()) << "," << num(e(r, c).imag());
        }
        out << "\n";
    }
    return kOk;
}

// ---- glauber -----------------------------------------------------------------------

struct GlauberArgs {
    std::optional<int> sites;
    std::optional<double> coupling;
    std::optional<double> beta;
    std::optional<std::string> boundary;
    std::optional<std::string> convention;
    std::string mode{"classical"};
    std::string observable{"magnetization"};
    std::optional<std::string> initial;  // e.g. "+++-"; default all up
    double t_max{1.0};
    int points{100};
};

inline int cmd_glauber(const std::optional<RunConfig>& cfg, const GlauberArgs& a, const GlobalOptions& g, std::ostream& out) {
    SpinChainSpec cs;
    BathSpec bath;
    if (cfg) {
        bath = cfg->bath;
        if (cfg->system.chain) cs = *cfg->system.chain;
    }
    if (g.dos) bath.dos = *g.dos;
    if (a.beta) bath.beta = *a.beta;
    const int n = a.sites.value_or(cfg && cfg->system.chain ? cs.sites : 4);
    const Boundary b = a.boundary ? parse_boundary(*a.boundary, "--boundary")
                                  : (cfg && cfg->system.chain ? cs.boundary : Boundary::Periodic);
    const BondConvention conv = a.convention ? parse_convention(*a.convention, "--convention")
                                             : (cfg && cfg->system.chain ? cs.convention : BondConvention::Half);
    if (a.coupling || !(cfg && cfg->system.chain) || a.sites || a.boundary) {
        const double j = a.coupling.value_or(cfg && cfg->system.chain && !cs.couplings.empty() ? cs.couplings.front() : 1.0);
        cs = SpinChainSpec::uniform(n, j, b, conv);
    }
    cs.convention = conv;
    cs.validate();
    bath.validate();
    if (a.observable != "magnetization" && a.observable != "energy" && a.observable != "all") {
        throw ConfigError("--observable: expected magnetization, energy or all");
    }
    SpinConfiguration s0(static_cast<std::size_t>(cs.sites), 1);
    if (a.initial) {
        if (static_cast<int>(a.initial->size()) != cs.sites) throw ConfigError("--initial: need one +/- per site");
        for (int r = 0; r < cs.sites; ++r) {
            const char c = (*a.initial)[static_cast<std::size_t>(r)];
            if (c != '+' && c != '-') throw ConfigError("--initial: use '+' and '-'");
            s0[static_cast<std::size_t>(r)] = c == '+' ? 1 : -1;
        }
    }
    const Index start = basis_index(s0);
    const Index d = cs.dim();
    RealVector mag(d);
    RealVector en(d);
    for (Index k = 0; k < d; ++k) {
        const auto s = configuration(k, cs.sites);
        double m = 0.0;
        for (int v : s) m += v;
        mag(k) = m / cs.sites;
        en(k) = configuration_energy(cs, s);
    }
    const auto times = time_grid(a.t_max, a.points);
    if (a.mode == "classical") {
        const auto cks = classical_glauber_generator(cs, bath);
        RealVector p0 = RealVector::Zero(d);
        p0(start) = 1.0;
        const auto ps = cks.evolve(p0, times);
        out << "t,magnetization,energy\n";
        for (std::size_t k = 0; k < times.size(); ++k) {
            out << num(times[k]) << "," << num(mag.dot(ps[k])) << "," << num(en.dot(ps[k])) << "\n";
        }
        return kOk;
    }
    if (a.mode != "quantum") throw ConfigError("--mode: expected quantum or classical");
    const auto gen = quantum_glauber_generator(cs, bath);
    Matrix rho0 = Matrix::Zero(d, d);
    rho0(start, start) = 1.0;
    const auto traj = evolve(gen, DensityMatrix(rho0), times);
    out << "t,magnetization,energy,offdiag_l1\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
        const Matrix& r = traj.states[k].matrix();
        const RealVector p = r.diagonal().real();
        const double off = linalg::entrywise_l1(r) - r.diagonal().cwiseAbs().sum();
        out << num(times[k]) << "," << num(mag.dot(p)) << "," << num(en.dot(p)) << "," << num(off) << "\n";
    }
    return kOk;
}

// ---- check -------------------------------------------------------------------------

inline double run_number(const RunConfig& cfg, const std::string& key, double fallback) {
    return field::optional<double>(cfg.run, key, "run", field::number).value_or(fallback);
}

inline Matrix random_hermitian(std::mt19937_64& rng, Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(d, d);
    for (Index r = 0; r < d; ++r) {
        for (Index c = 0; c < d; ++c) m(r, c) = {n(rng), n(rng)};
    }
    return linalg::hermitian_part(m);
}

inline DensityMatrix random_density(std::mt19937_64& rng, Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix a(d, d);
    for (Index r = 0; r < d; ++r) {
        for (Index c = 0; c < d; ++c) a(r, c) = {n(rng), n(rng)};
    }
    Matrix rho = a * a.adjoint();
    rho = linalg::hermitian_part(rho / rho.trace().real());
    return DensityMatrix(rho);
}

inline json suite_detailed_balance(const RunConfig& cfg, bool& pass) {
    const double threshold = run_number(cfg, "threshold", 1e-10);
    ClassicalKineticSystem cks;
    RealVector dist;
    if (cfg.system.chain) {
        cks = classical_glauber_generator(*cfg.system.chain, cfg.bath);
    } else {
        const auto sys = open_system(cfg);
        cks = diagonal_restriction(sys.generator, sys.spec);
    }
    if (cfg.run.contains("corrupt_rate")) {
        const json& c = cfg.run.at("corrupt_rate");
        const int from = field::integer(field::require(c, "from", "run.corrupt_rate"), "run.corrupt_rate.from");
        const int to = field::integer(field::require(c, "to", "run.corrupt_rate"), "run.corrupt_rate.to");
        const double factor = field::optional<double>(c, "factor", "run.corrupt_rate", field::number).value_or(2.0);
        if (from < 0 || to < 0 || from >= cks.size() || to >= cks.size() || from == to) {
            field::fail("run.corrupt_rate", "from/to out of range");
        }
        auto w = cks.rates();
        w.coeffRef(to, from) *= factor;
        cks = ClassicalKineticSystem(cks.labels(), w);
    }
    const auto stat = cks.stationary();
    json j;
    j["null_dim"] = stat.null_dim;
    if (cfg.bath.thermal() && !cfg.bath.filter && !std::isinf(cfg.bath.beta)) {
        if (cfg.system.chain) {
            dist = configuration_gibbs(*cfg.system.chain, cfg.bath.beta);
        } else {
            const auto spec = spectral_decompose(system_hamiltonian(cfg), cfg.system.cluster_tol);
            dist = gibbs_weights(cfg.bath.beta, spec);
        }
        j["reference"] = "gibbs";
    } else if (stat.distribution) {
        dist = *stat.distribution;
        j["reference"] = "stationary";
    } else {
        throw ConfigError("detailed-balance: non-ergodic kinetic system without a thermal reference");
    }
    const auto r = detailed_balance_residual(cks, dist);
    pass = r.value <= threshold;
    j["residual"] = r.value;
    j["threshold"] = threshold;
    if (!pass) j["offending_pair"] = {{"from", r.from}, {"to", r.to}, {"from_label", cks.labels()[r.from]}, {"to_label", cks.labels()[r.to]}};
    return j;
}

inline json suite_leibniz(const RunConfig& cfg, bool& pass) {
    const double threshold = run_number(cfg, "threshold", 1e-10);
    const int samples = static_cast<int>(run_number(cfg, "samples", 100));
    std::mt19937_64 rng(static_cast<std::uint64_t>(run_number(cfg, "seed", 7)));
    const auto sys = open_system(cfg, DenseMode::Never);
    const StructureMapSet maps(sys.generator);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Matrix x = random_hermitian(rng, sys.spec.dim());
        const Matrix y = random_hermitian(rng, sys.spec.dim());
        worst = std::max(worst, leibniz_defect(maps, x, y));
    }
    pass = worst <= threshold;
    return {{"max_defect", worst}, {"samples", samples}, {"threshold", threshold}};
}

inline json suite_positivity(const RunConfig& cfg, bool& pass) {
    const int samples = static_cast<int>(run_number(cfg, "samples", 5));
    std::mt19937_64 rng(static_cast<std::uint64_t>(run_number(cfg, "seed", 11)));
    const auto sys = open_system(cfg);
    const double scale = std::max(1.0, linalg::max_abs(sys.generator.damping()));
    const std::vector<double> times{0.1 / scale, 1.0 / scale, 10.0 / scale};
    double worst = std::numeric_limits<double>::infinity();
    double trace_err = 0.0;
    double herm_err = 0.0;
    std::string error;
    for (int k = 0; k < samples; ++k) {
        const auto rho = random_density(rng, sys.spec.dim());
        const Matrix drho = sys.generator.apply_adjoint(rho.matrix());
        trace_err = std::max(trace_err, std::abs(drho.trace()));
        herm_err = std::max(herm_err, linalg::max_asymmetry(drho));
        try {
            const auto traj = evolve(sys.generator, rho, times);
            for (const auto& st : traj.states) worst = std::min(worst, linalg::min_eigenvalue(st.matrix()));
        } catch (const ConsistencyError& e) {
            error = e.what();
            worst = -std::numeric_limits<double>::infinity();
        }
    }
    pass = worst >= -1e-10 && trace_err <= 1e-12 * scale && herm_err <= 1e-12 * scale;
    json j = {{"min_eigenvalue", worst}, {"trace_error", trace_err}, {"hermiticity_error", herm_err}, {"samples", samples}};
    if (!error.empty()) j["error"] = error;
    return j;
}

inline json suite_scaling(const RunConfig& cfg, bool& pass) {
    std::vector<int> sizes{2, 3, 4, 5, 6};
    if (cfg.run.contains("sizes")) {
        sizes.clear();
        const json& s = cfg.run.at("sizes");
        if (!s.is_array()) field::fail("run.sizes", "expected a list of integers");
        for (std::size_t k = 0; k < s.size(); ++k) sizes.push_back(field::integer(s[k], field::at("run.sizes", k)));
    }
    for (int n : sizes) {
        if (n < 2 || n > kMaxQuantumSites) field::fail("run.sizes", "sizes must lie in [2, 6]");
    }
    double j = run_number(cfg, "J", 1.0);
    BondConvention conv = BondConvention::Half;
    if (cfg.system.chain) {
        if (!cfg.run.contains("J")) j = cfg.system.chain->couplings.front();
        conv = cfg.system.chain->convention;
    }
    const double r2_min = run_number(cfg, "r2_min", 0.999);
    const auto res = n_scaling_experiment(sizes, cfg.bath, j, conv);
    pass = res.r_squared >= r2_min;
    json pts = json::array();
    for (const auto& p : res.points) {
        pts.push_back({{"sites", p.sites}, {"re_a", p.measured}, {"derived", p.derived}, {"printed_closed_form", p.printed}});
    }
    return {{"slope", res.slope}, {"intercept", res.intercept}, {"r_squared", res.r_squared}, {"points", pts}};
}

inline json suite_coherence(const RunConfig& cfg, bool& pass) {
    if (!cfg.bath.filter) field::fail("bath.filter", "coherence-control needs a filtered bath");
    const int start = static_cast<int>(run_number(cfg, "start", 0));
    const auto r = coherence_control(system_hamiltonian(cfg), cfg.system.couplings, cfg.bath, start);
    const double rel = std::abs(r.open_rate_generator - r.open_rate_closed_form) /
                       std::max(std::abs(r.open_rate_closed_form), 1e-300);
    pass = r.filtered_transfer <= 1e-10 && r.intra_deviation <= 1e-8 && rel <= 1e-8 && r.open_rate_closed_form > 0.0;
    return {{"groups", r.groups},
            {"t_final", r.t_final},
            {"filtered_transfer", r.filtered_transfer},
            {"intra_deviation", r.intra_deviation},
            {"open_rate_generator", r.open_rate_generator},
            {"open_rate_closed_form", r.open_rate_closed_form},
            {"relative_error", rel},
            {"null_dim", r.null_dim}};
}

inline int cmd_check(const RunConfig& cfg, const std::string& suite, const GlobalOptions&, std::ostream& out) {
    bool pass = false;
    json j;
    if (suite == "detailed-balance") j = suite_detailed_balance(cfg, pass);
    else if (suite == "leibniz") j = suite_leibniz(cfg, pass);
    else if (suite == "positivity") j = suite_positivity(cfg, pass);
    else if (suite == "scaling") j = suite_scaling(cfg, pass);
    else if (suite == "coherence-control") j = suite_coherence(cfg, pass);
    else throw ConfigError("unknown suite '" + suite + "' (detailed-balance, leibniz, positivity, scaling, coherence-control)");
    j["suite"] = suite;
    j["pass"] = pass;
    out << j.dump() << "\n";
    return pass ? kOk : kCheckFailed;
}

}  // namespace stoclim::cli
