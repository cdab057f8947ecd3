// glauber.hpp: Ising chains coupled through sigma^x_r, classical Glauber rates and
// their quantum extension
//
// Site r is bit (n - 1 - r) of the basis index; bit 0 is spin up (+1).
// Bond convention Half: E = -1/2 sum_b J_b e_a e_b, so flipping site r exchanges the
// energy h_r = sum of neighbouring J e (the flip frequency). Full: E = -sum_b J_b e_a e_b,
// exchanging 2 h_r.

#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stoclim/bath.hpp"
#include "stoclim/core.hpp"
#include "stoclim/evolution.hpp"
#include "stoclim/generator.hpp"
#include "stoclim/operator_core.hpp"

namespace stoclim {

enum class Boundary { Open, Periodic };
enum class BondConvention { Half, Full };

inline constexpr int kMaxQuantumSites = 6;
inline constexpr int kMaxClassicalSites = 20;

struct SpinChainSpec {
    int sites{2};
    std::vector<double> couplings;  // J_{r,r+1}; n - 1 entries (open) or n (periodic, last closes the ring)
    Boundary boundary{Boundary::Open};
    BondConvention convention{BondConvention::Half};

    static SpinChainSpec uniform(int n, double j, Boundary b, BondConvention c = BondConvention::Half) {
        SpinChainSpec s;
        s.sites = n;
        s.boundary = b;
        s.convention = c;
        s.couplings.assign(static_cast<std::size_t>(b == Boundary::Periodic ? n : n - 1), j);
        return s;
    }

    void validate(int cap = kMaxClassicalSites) const {
        if (sites < 2) throw ConfigError("spin chain: need at least 2 sites");
        if (sites > cap) {
            std::ostringstream os;
            os << "spin chain: " << sites << " sites exceeds the cap of " << cap;
            throw ConfigError(os.str());
        }
        const std::size_t want = static_cast<std::size_t>(boundary == Boundary::Periodic ? sites : sites - 1);
        if (couplings.size() != want) {
            std::ostringstream os;
            os << "spin chain: expected " << want << " bond couplings, got " << couplings.size();
            throw ConfigError(os.str());
        }
    }

    Index dim() const { return Index{1} << sites; }
    double scale() const { return convention == BondConvention::Half ? 0.5 : 1.0; }

    // (a, b, J) for every bond.
    struct Bond {
        int a;
        int b;
        double j;
    };
    std::vector<Bond> bonds() const {
        std::vector<Bond> out;
        for (std::size_t k = 0; k < couplings.size(); ++k) {
            const int a = static_cast<int>(k);
            out.push_back({a, (a + 1) % sites, couplings[k]});
        }
        return out;
    }
};

using SpinConfiguration = std::vector<int>;  // +1 / -1 per site

inline int spin_of(Index basis, int site, int n) { return ((basis >> (n - 1 - site)) & 1) ? -1 : 1; }

inline SpinConfiguration configuration(Index basis, int n) {
    SpinConfiguration s(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) s[static_cast<std::size_t>(r)] = spin_of(basis, r, n);
    return s;
}

inline Index basis_index(const SpinConfiguration& s) {
    const int n = static_cast<int>(s.size());
    Index k = 0;
    for (int r = 0; r < n; ++r) {
        if (s[static_cast<std::size_t>(r)] == -1) k |= Index{1} << (n - 1 - r);
        else if (s[static_cast<std::size_t>(r)] != 1) throw ValidationError("spin configuration entries must be +1 or -1");
    }
    return k;
}

inline Index flip(Index basis, int site, int n) { return basis ^ (Index{1} << (n - 1 - site)); }

inline std::string configuration_label(Index basis, int n) {
    std::string s;
    for (int r = 0; r < n; ++r) s += spin_of(basis, r, n) > 0 ? '+' : '-';
    return s;
}

inline double configuration_energy(const SpinChainSpec& cs, const SpinConfiguration& s) {
    double e = 0.0;
    for (const auto& b : cs.bonds()) e -= b.j * s[static_cast<std::size_t>(b.a)] * s[static_cast<std::size_t>(b.b)];
    return cs.scale() * e;
}

// h_r = sum over bonds touching r of J * (spin of the other end); missing neighbours give 0.
inline double flip_frequency(const SpinChainSpec& cs, const SpinConfiguration& s, int r) {
    double h = 0.0;
    for (const auto& b : cs.bonds()) {
        if (b.a == r) h += b.j * s[static_cast<std::size_t>(b.b)];
        if (b.b == r) h += b.j * s[static_cast<std::size_t>(b.a)];
    }
    return h;
}

// Energy given to the bath by flipping site r: E(s) - E(flip_r s).
inline double flip_release(const SpinChainSpec& cs, const SpinConfiguration& s, int r) {
    return -2.0 * cs.scale() * s[static_cast<std::size_t>(r)] * flip_frequency(cs, s, r);
}

namespace pauli {

inline Matrix x() { return (Matrix(2, 2) << 0, 1, 1, 0).finished(); }
inline Matrix z() { return (Matrix(2, 2) << 1, 0, 0, -1).finished(); }
inline Matrix up() { return (Matrix(2, 2) << 1, 0, 0, 0).finished(); }
inline Matrix down() { return (Matrix(2, 2) << 0, 0, 0, 1).finished(); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows() * b.rows(), a.cols() * b.cols());
    linalg::kron_add(out, a, b);
    return out;
}

// Tensor product of per-site factors (site 0 leftmost).
inline Matrix product(const std::vector<Matrix>& factors) {
    Matrix out = Matrix::Identity(1, 1);
    for (const auto& f : factors) out = kron(out, f);
    return out;
}

inline Matrix at_site(const Matrix& op, int site, int n) {
    std::vector<Matrix> f(static_cast<std::size_t>(n), Matrix::Identity(2, 2));
    f[static_cast<std::size_t>(site)] = op;
    return product(f);
}

}  // namespace pauli

struct IsingSystem {
    HermitianOperator hamiltonian;
    std::vector<Matrix> couplings;  // sigma^x_r
};

inline IsingSystem ising_system(const SpinChainSpec& cs) {
    cs.validate(kMaxQuantumSites);
    const int n = cs.sites;
    const Index d = cs.dim();
    Matrix h = Matrix::Zero(d, d);
    for (const auto& b : cs.bonds()) {
        h -= cs.scale() * b.j * (pauli::at_site(pauli::z(), b.a, n) * pauli::at_site(pauli::z(), b.b, n));
    }
    std::vector<Matrix> d_ops;
    for (int r = 0; r < n; ++r) d_ops.push_back(pauli::at_site(pauli::x(), r, n));
    return {HermitianOperator(h), std::move(d_ops)};
}

// Single-flip rates from configuration energies only: downhill 2 Re(g_r|g_r)^-, uphill 2 Re(g_r|g_r)^+.
inline double flip_rate(const SpinChainSpec& cs, const BathSpec& bath, const SpinConfiguration& s, int r) {
    const double w = flip_release(cs, s, r);
    const auto site = static_cast<std::size_t>(r);
    if (w > 0.0) return 2.0 * delta_shell(bath, Branch::Minus, w, site, site);
    if (w < 0.0) return 2.0 * delta_shell(bath, Branch::Plus, -w, site, site);
    return 0.0;
}

inline double total_flip_rate(const SpinChainSpec& cs, const BathSpec& bath, const SpinConfiguration& s) {
    double total = 0.0;
    for (int r = 0; r < cs.sites; ++r) total += flip_rate(cs, bath, s, r);
    return total;
}

inline ClassicalKineticSystem classical_glauber_generator(const SpinChainSpec& cs, const BathSpec& bath) {
    cs.validate();
    bath.validate();
    const int n = cs.sites;
    const Index d = cs.dim();
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<std::string> labels;
    for (Index from = 0; from < d; ++from) {
        labels.push_back(configuration_label(from, n));
        const auto s = configuration(from, n);
        for (int r = 0; r < n; ++r) {
            const double rate = flip_rate(cs, bath, s, r);
            if (rate != 0.0) trip.emplace_back(flip(from, r, n), from, rate);
        }
    }
    ClassicalKineticSystem::Sparse w(d, d);
    w.setFromTriplets(trip.begin(), trip.end());
    return ClassicalKineticSystem(std::move(labels), std::move(w));
}

inline RealVector configuration_gibbs(const SpinChainSpec& cs, double beta) {
    const Index d = cs.dim();
    RealVector e(d);
    for (Index k = 0; k < d; ++k) e(k) = configuration_energy(cs, configuration(k, cs.sites));
    RealVector p = (-beta * (e.array() - e.minCoeff())).exp();
    return p / p.sum();
}

// E_w(sigma^x_r) assembled locally: sum over the states of r and its neighbours whose flip
// releases w, of (neighbour projectors) x (flip at r), identity elsewhere.
inline Matrix local_e_omega(const SpinChainSpec& cs, int r, double omega, double tol = 1e-9) {
    cs.validate(kMaxQuantumSites);
    const int n = cs.sites;
    std::vector<int> nbrs;
    for (const auto& b : cs.bonds()) {
        if (b.a == r && b.b != r) nbrs.push_back(b.b);
        if (b.b == r && b.a != r) nbrs.push_back(b.a);
    }
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());

    const Index d = cs.dim();
    Matrix out = Matrix::Zero(d, d);
    const int m = static_cast<int>(nbrs.size());
    SpinConfiguration s(static_cast<std::size_t>(n), 1);
    for (int mask = 0; mask < (1 << m); ++mask) {
        for (int k = 0; k < m; ++k) s[static_cast<std::size_t>(nbrs[k])] = (mask >> k) & 1 ? -1 : 1;
        for (int er : {1, -1}) {
            s[static_cast<std::size_t>(r)] = er;
            if (std::abs(flip_release(cs, s, r) - omega) > tol) continue;
            std::vector<Matrix> f(static_cast<std::size_t>(n), Matrix::Identity(2, 2));
            for (int k = 0; k < m; ++k) {
                f[static_cast<std::size_t>(nbrs[k])] = s[static_cast<std::size_t>(nbrs[k])] > 0 ? pauli::up() : pauli::down();
            }
            Matrix jump = Matrix::Zero(2, 2);
            // |flipped><current| at site r
            if (er > 0) jump(1, 0) = 1.0;
            else jump(0, 1) = 1.0;
            f[static_cast<std::size_t>(r)] = jump;
            out += pauli::product(f);
        }
    }
    return out;
}

inline OpenSystem quantum_glauber_system(const SpinChainSpec& cs, const BathSpec& bath, const GeneratorOptions& opt = {}) {
    auto sys = ising_system(cs);
    return build_open_system(sys.hamiltonian, std::move(sys.couplings), bath, opt);
}

inline Generator quantum_glauber_generator(const SpinChainSpec& cs, const BathSpec& bath, const GeneratorOptions& opt = {}) {
    return quantum_glauber_system(cs, bath, opt).generator;
}

// Re A_mu_nu = -1/2 (total flip rate out of mu + total flip rate out of nu).
inline double amunu_rate(const SpinChainSpec& cs, const BathSpec& bath, Index mu, Index nu) {
    return -0.5 * (total_flip_rate(cs, bath, configuration(mu, cs.sites)) +
                   total_flip_rate(cs, bath, configuration(nu, cs.sites)));
}

struct ScalingPoint {
    int sites{0};
    double measured{0.0};       // Re <mu| theta0^*(|mu><nu|) |nu>, all-up / all-down
    double derived{0.0};        // -|L| 2 Re(g|g)^+ at the aligned flip frequency
    double printed{0.0};        // -2 C |L| (1 + e^{-2 beta J}) / (1 - e^{-2 beta J})
};

struct ScalingResult {
    std::vector<ScalingPoint> points;
    double slope{0.0};
    double intercept{0.0};
    double r_squared{0.0};
};

// Least-squares line through (x, y).
inline void fit_line(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept,
                     double& r2) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sx += x[k];
        sy += y[k];
        sxx += x[k] * x[k];
        sxy += x[k] * y[k];
    }
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    intercept = (sy - slope * sx) / n;
    const double mean = sy / n;
    double ss_tot = 0, ss_res = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        ss_tot += (y[k] - mean) * (y[k] - mean);
        const double f = slope * x[k] + intercept;
        ss_res += (y[k] - f) * (y[k] - f);
    }
    r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
}

// Glauber constant C = 2 pi J(2J) |g(2J)|^2 at the aligned-neighbour frequency of a uniform ring.
inline double glauber_constant(const BathSpec& bath, double j) {
    const double w = 2.0 * j;
    const double g = bath.form_factor(0, w);
    return 2.0 * kPi * bath.dos_factor(w) * g * g;
}

inline ScalingResult n_scaling_experiment(const std::vector<int>& sizes, const BathSpec& bath, double j,
                                          BondConvention conv = BondConvention::Half, DenseMode dense = DenseMode::Never) {
    ScalingResult res;
    std::vector<double> xs;
    std::vector<double> ys;
    for (int n : sizes) {
        const auto cs = SpinChainSpec::uniform(n, j, Boundary::Periodic, conv);
        GeneratorOptions opt;
        opt.dense = dense;
        const auto sys = quantum_glauber_system(cs, bath, opt);
        const Index up = 0;
        const Index down = cs.dim() - 1;
        const Index d = cs.dim();
        Matrix unit = Matrix::Zero(d, d);
        unit(up, down) = 1.0;
        double measured = 0.0;
        if (sys.generator.has_dense()) {
            const Index col = linalg::vec_index(up, down, d);
            measured = sys.generator.dense()(col, col).real();
        } else {
            measured = sys.generator.apply_adjoint(unit)(up, down).real();
        }
        ScalingPoint p;
        p.sites = n;
        p.measured = measured;
        // All-up is a ground state: every flip is uphill by the aligned release energy.
        const double w = -flip_release(cs, configuration(up, n), 0);
        p.derived = -static_cast<double>(n) * 2.0 * delta_shell(bath, Branch::Plus, w, 0, 0);
        const double c = glauber_constant(bath, j);
        const double q = std::exp(-2.0 * bath.beta * j);
        p.printed = -2.0 * c * n * (1.0 + q) / (1.0 - q);
        res.points.push_back(p);
        xs.push_back(n);
        ys.push_back(std::abs(measured));
    }
    fit_line(xs, ys, res.slope, res.intercept, res.r_squared);
    return res;
}

}  // namespace stoclim
