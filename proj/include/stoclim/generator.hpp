// generator.hpp: drift, Markovian generator (Heisenberg and Schroedinger pictures),
// structure maps and the generic-system off-diagonal rates
//
// For each positive Bohr frequency w with jump operators E_j = E_w(D_j) and rate
// matrices g-_ij = 2 Re(g_i|g_j)^-_w, g+_ij = 2 Re(g_i|g_j)^+_w:
//
//   theta0(X)     = i[H, X] + sum_ij g-_ij (E_i^* X E_j - 1/2 {X, E_i^* E_j})
//                           + g+_ij (E_i X E_j^* - 1/2 {X, E_i E_j^*})
//   theta0^*(rho) = -i[H, rho] - 1/2 {K, rho} + sum_i M_i rho E_i^* + sum_i N_i rho E_i
//
// with M_i = sum_j g-_ij E_j, N_i = sum_j g+_ij E_j^*, K = sum g- E_i^* E_j + g+ E_i E_j^*,
// and H = sum over all w of Im(g_i|g_j)^-_w E_i^* E_j - Im(g_i|g_j)^+_w E_i E_j^*.
// Dense form: column-stacked vec, vec(A X B) = (B^T kron A) vec(X).

#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stoclim/bath.hpp"
#include "stoclim/core.hpp"
#include "stoclim/density_matrix.hpp"
#include "stoclim/operator_core.hpp"

namespace stoclim {

// Dissipative channel at one positive Bohr frequency.
struct Channel {
    double omega{0.0};
    std::size_t table_index{0};
    std::vector<Matrix> jumps;  // E_w(D_j)
    Matrix gamma_minus;         // 2 Re(g_i|g_j)^-_w
    Matrix gamma_plus;          // 2 Re(g_i|g_j)^+_w
    std::vector<Matrix> m;      // sum_j gamma_minus(i, j) E_j
    std::vector<Matrix> n;      // sum_j gamma_plus(i, j) E_j^*
};

enum class DenseMode { Auto, Always, Never };

struct GeneratorOptions {
    DenseMode dense{DenseMode::Auto};  // Auto: dense form for dim <= 16
};

class Generator {
public:
    Generator() = default;

    Index dim() const { return dim_; }
    const std::vector<Channel>& channels() const { return channels_; }
    const Matrix& effective_hamiltonian() const { return h_eff_; }
    const Matrix& damping() const { return k_; }  // K = G + G^*
    const Matrix& drift() const { return drift_; }
    bool has_dense() const { return dense_.has_value(); }

    const Matrix& dense() const {
        if (!dense_) throw ConfigError("Generator: dense form was not built (DenseMode::Always to force)");
        return *dense_;
    }

    bool is_zero() const {
        return channels_.empty() && linalg::max_abs(h_eff_) == 0.0;
    }

    Matrix apply_heisenberg(const Matrix& x) const {
        check(x, "apply_heisenberg");
        Matrix out = kI * linalg::commutator(h_eff_, x) - 0.5 * linalg::anticommutator(x, k_);
        for (const auto& c : channels_) {
            for (std::size_t i = 0; i < c.jumps.size(); ++i) {
                const Matrix& e = c.jumps[i];
                out.noalias() += e.adjoint() * x * c.m[i];
                out.noalias() += e * x * c.n[i];
            }
        }
        return out;
    }

    Matrix apply_adjoint(const Matrix& rho) const {
        check(rho, "apply_adjoint");
        Matrix out = -kI * linalg::commutator(h_eff_, rho) - 0.5 * linalg::anticommutator(k_, rho);
        for (const auto& c : channels_) {
            for (std::size_t i = 0; i < c.jumps.size(); ++i) {
                const Matrix& e = c.jumps[i];
                out.noalias() += c.m[i] * rho * e.adjoint();
                out.noalias() += c.n[i] * rho * e;
            }
        }
        return out;
    }

    Matrix apply_schroedinger(const DensityMatrix& rho) const { return apply_adjoint(rho.matrix()); }

    void build_dense() {
        if (dense_) return;
        const Index d = dim_;
        Matrix l = Matrix::Zero(d * d, d * d);
        const Matrix id = Matrix::Identity(d, d);
        const Matrix a = -kI * h_eff_ - 0.5 * k_;  // rho -> a rho + rho a^*
        linalg::kron_add_identity_left(l, d, a);
        linalg::kron_add_identity_right(l, Matrix(a.adjoint().transpose()), d);
        for (const auto& c : channels_) {
            for (std::size_t i = 0; i < c.jumps.size(); ++i) {
                const Matrix& e = c.jumps[i];
                linalg::kron_add(l, e.conjugate(), c.m[i]);
                linalg::kron_add(l, e.transpose(), c.n[i]);
            }
        }
        dense_ = std::move(l);
    }

private:
    friend Generator build_generator(const SpectralData&, const std::vector<Matrix>&, const CorrelationTable&,
                                     const GeneratorOptions&);

    void check(const Matrix& x, const char* what) const {
        if (x.rows() != dim_ || x.cols() != dim_) {
            std::ostringstream os;
            os << "Generator::" << what << ": dimension mismatch (" << x.rows() << "x" << x.cols() << " vs " << dim_ << ")";
            throw ValidationError(os.str());
        }
    }

    Index dim_{0};
    std::vector<Channel> channels_;
    Matrix h_eff_;
    Matrix k_;
    Matrix drift_;
    std::optional<Matrix> dense_;
};

inline void check_couplings(const std::vector<Matrix>& couplings, const SpectralData& spec) {
    for (const auto& dj : couplings) check_dim(dj, spec, "coupling operator");
}

// E_w(D_j) for every Bohr frequency (outer index) and coupling (inner index).
inline std::vector<std::vector<Matrix>> frequency_components(const SpectralData& spec, const BohrSet& bohr,
                                                             const std::vector<Matrix>& couplings) {
    check_couplings(couplings, spec);
    std::vector<std::vector<Matrix>> out;
    out.reserve(bohr.size());
    for (const auto& f : bohr.entries()) {
        std::vector<Matrix> row;
        row.reserve(couplings.size());
        for (const auto& dj : couplings) row.push_back(e_omega(dj, f, spec));
        out.push_back(std::move(row));
    }
    return out;
}

// true where every component vanishes; used to skip Lamb shifts that cannot contribute.
inline std::vector<bool> inactive_frequencies(const std::vector<std::vector<Matrix>>& comps) {
    std::vector<bool> out;
    for (const auto& row : comps) {
        bool zero = true;
        for (const auto& e : row) zero = zero && linalg::max_abs(e) == 0.0;
        out.push_back(zero);
    }
    return out;
}

namespace detail {

inline void check_table(const CorrelationTable& table, const BohrSet& bohr, std::size_t n) {
    for (const auto& f : bohr.entries()) {
        const std::size_t k = table.require(f.omega);
        if (table.minus(k).rows() != static_cast<Index>(n) || table.plus(k).rows() != static_cast<Index>(n)) {
            throw ConsistencyError("correlation table: coupling count does not match the number of couplings");
        }
    }
}

}  // namespace detail

// G = sum_{ij, w in F} (g_i|g_j)^-_w E_w^*(D_i) E_w(D_j) + conj((g_i|g_j)^+_w) E_w(D_i) E_w^*(D_j)
inline Matrix build_drift(const SpectralData& spec, const std::vector<Matrix>& couplings, const CorrelationTable& table) {
    const BohrSet bohr = bohr_frequencies(spec);
    detail::check_table(table, bohr, couplings.size());
    const auto comps = frequency_components(spec, bohr, couplings);
    const Index d = spec.dim();
    Matrix g = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < bohr.size(); ++k) {
        const std::size_t t = table.require(bohr.entries()[k].omega);
        const auto& e = comps[k];
        for (std::size_t i = 0; i < e.size(); ++i) {
            for (std::size_t j = 0; j < e.size(); ++j) {
                const Complex gm = table.minus(t)(static_cast<Index>(i), static_cast<Index>(j));
                const Complex gp = table.plus(t)(static_cast<Index>(i), static_cast<Index>(j));
                if (gm != Complex{}) g.noalias() += gm * (e[i].adjoint() * e[j]);
                if (gp != Complex{}) g.noalias() += std::conj(gp) * (e[i] * e[j].adjoint());
            }
        }
    }
    return g;
}

inline Generator build_generator(const SpectralData& spec, const std::vector<Matrix>& couplings,
                                 const CorrelationTable& table, const GeneratorOptions& opt = {}) {
    const BohrSet bohr = bohr_frequencies(spec);
    detail::check_table(table, bohr, couplings.size());
    const auto comps = frequency_components(spec, bohr, couplings);
    const Index d = spec.dim();
    const std::size_t n = couplings.size();

    Generator gen;
    gen.dim_ = d;
    gen.h_eff_ = Matrix::Zero(d, d);
    gen.k_ = Matrix::Zero(d, d);

    for (std::size_t k = 0; k < bohr.size(); ++k) {
        const double w = bohr.entries()[k].omega;
        const std::size_t t = table.require(w);
        const auto& e = comps[k];
        const Matrix& gm = table.minus(t);
        const Matrix& gp = table.plus(t);

        // Lamb shift: all frequencies, including w <= 0.
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double im_m = gm(static_cast<Index>(i), static_cast<Index>(j)).imag();
                const double im_p = gp(static_cast<Index>(i), static_cast<Index>(j)).imag();
                if (im_m != 0.0) gen.h_eff_.noalias() += im_m * (e[i].adjoint() * e[j]);
                if (im_p != 0.0) gen.h_eff_.noalias() -= im_p * (e[i] * e[j].adjoint());
            }
        }

        if (!(w > 0.0)) continue;
        Channel c;
        c.omega = w;
        c.table_index = t;
        c.gamma_minus = Matrix(2.0 * gm.real().cast<Complex>());
        c.gamma_plus = Matrix(2.0 * gp.real().cast<Complex>());
        const bool no_ops = std::all_of(e.begin(), e.end(), [](const Matrix& m) { return linalg::max_abs(m) == 0.0; });
        const bool no_rates = linalg::max_abs(c.gamma_minus) == 0.0 && linalg::max_abs(c.gamma_plus) == 0.0;
        if (no_ops || no_rates) continue;
        c.jumps = e;
        for (std::size_t i = 0; i < n; ++i) {
            Matrix mi = Matrix::Zero(d, d);
            Matrix ni = Matrix::Zero(d, d);
            for (std::size_t j = 0; j < n; ++j) {
                const Complex a = c.gamma_minus(static_cast<Index>(i), static_cast<Index>(j));
                const Complex b = c.gamma_plus(static_cast<Index>(i), static_cast<Index>(j));
                if (a != Complex{}) mi += a * e[j];
                if (b != Complex{}) ni += b * e[j].adjoint();
            }
            gen.k_.noalias() += e[i].adjoint() * mi;
            gen.k_.noalias() += e[i] * ni;
            c.m.push_back(std::move(mi));
            c.n.push_back(std::move(ni));
        }
        gen.channels_.push_back(std::move(c));
    }
    gen.drift_ = 0.5 * gen.k_ + kI * gen.h_eff_;

    const bool want_dense = opt.dense == DenseMode::Always || (opt.dense == DenseMode::Auto && d <= 16);
    if (want_dense) gen.build_dense();
    return gen;
}

// Everything derived from (H, couplings, bath) in one place.
struct OpenSystem {
    SpectralData spec;
    BohrSet bohr;
    std::vector<Matrix> couplings;
    BathSpec bath;
    CorrelationTable table;
    Generator generator;
};

inline OpenSystem build_open_system(const HermitianOperator& h, std::vector<Matrix> couplings, const BathSpec& bath,
                                    const GeneratorOptions& opt = {}, std::optional<double> cluster_tol = std::nullopt) {
    OpenSystem sys;
    sys.spec = spectral_decompose(h, cluster_tol);
    sys.bohr = bohr_frequencies(sys.spec);
    sys.couplings = std::move(couplings);
    sys.bath = bath;
    const auto comps = frequency_components(sys.spec, sys.bohr, sys.couplings);
    sys.table = correlation_table(bath, sys.bohr, static_cast<Index>(sys.couplings.size()), inactive_frequencies(comps));
    sys.generator = build_generator(sys.spec, sys.couplings, sys.table, opt);
    return sys;
}

// theta_{-1, j w}(X) = -i [X, E_w^*(D_j)],  theta_{1, j w}(X) = -i [X, E_w(D_j)]
// over the dissipative channels of a generator.
class StructureMapSet {
public:
    explicit StructureMapSet(const Generator& gen) : gen_(&gen) {}

    const Generator& generator() const { return *gen_; }

    Matrix theta_minus(std::size_t channel, std::size_t j, const Matrix& x) const {
        return -kI * linalg::commutator(x, gen_->channels().at(channel).jumps.at(j).adjoint());
    }
    Matrix theta_plus(std::size_t channel, std::size_t j, const Matrix& x) const {
        return -kI * linalg::commutator(x, gen_->channels().at(channel).jumps.at(j));
    }
    Matrix theta0(const Matrix& x) const { return gen_->apply_heisenberg(x); }

    // Ito constants: dB_i dB_j^* = gamma-_ij dt, dB_i^* dB_j = gamma+_ij dt.
    const Matrix& ito_minus(std::size_t channel) const { return gen_->channels().at(channel).gamma_minus; }
    const Matrix& ito_plus(std::size_t channel) const { return gen_->channels().at(channel).gamma_plus; }

    // sum_{ij w} gamma-_ij theta_{-1,i}(X) theta_{1,j}(Y) + gamma+_ij theta_{1,i}(X) theta_{-1,j}(Y)
    Matrix ito_correction(const Matrix& x, const Matrix& y) const {
        const Index d = gen_->dim();
        Matrix out = Matrix::Zero(d, d);
        const auto& chans = gen_->channels();
        for (std::size_t c = 0; c < chans.size(); ++c) {
            const std::size_t n = chans[c].jumps.size();
            std::vector<Matrix> tm_x;
            std::vector<Matrix> tp_x;
            std::vector<Matrix> tm_y;
            std::vector<Matrix> tp_y;
            for (std::size_t j = 0; j < n; ++j) {
                tm_x.push_back(theta_minus(c, j, x));
                tp_x.push_back(theta_plus(c, j, x));
                tm_y.push_back(theta_minus(c, j, y));
                tp_y.push_back(theta_plus(c, j, y));
            }
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const Complex a = chans[c].gamma_minus(static_cast<Index>(i), static_cast<Index>(j));
                    const Complex b = chans[c].gamma_plus(static_cast<Index>(i), static_cast<Index>(j));
                    if (a != Complex{}) out.noalias() += a * (tm_x[i] * tp_y[j]);
                    if (b != Complex{}) out.noalias() += b * (tp_x[i] * tm_y[j]);
                }
            }
        }
        return out;
    }

private:
    const Generator* gen_;
};

// Frobenius norm of theta0(XY) - theta0(X) Y - X theta0(Y) - ito_correction(X, Y).
inline double leibniz_defect(const StructureMapSet& maps, const Matrix& x, const Matrix& y) {
    const Matrix lhs = maps.theta0(x * y) - maps.theta0(x) * y - x * maps.theta0(y);
    return (lhs - maps.ito_correction(x, y)).norm();
}

struct GenericityReport {
    std::vector<Index> degenerate_levels;   // level indices with rank > 1
    std::vector<double> repeated_frequencies;  // w != 0 realized by more than one level pair
    bool generic() const { return degenerate_levels.empty() && repeated_frequencies.empty(); }
};

inline GenericityReport genericity_check(const SpectralData& spec) {
    GenericityReport r;
    for (Index k = 0; k < spec.num_levels(); ++k) {
        if (spec.levels()[static_cast<std::size_t>(k)].rank > 1) r.degenerate_levels.push_back(k);
    }
    const BohrSet bohr = bohr_frequencies(spec);
    for (const auto& f : bohr.entries()) {
        if (f.omega != 0.0 && f.transitions.size() > 1) r.repeated_frequencies.push_back(f.omega);
    }
    return r;
}

// A_mu_nu with theta0^*(|mu><nu|) = A_mu_nu |mu><nu| on a generic spectrum, from matrix
// elements of the couplings and the correlation table:
//   A = -i (h_mu - h_nu) - 1/2 (k_mu + k_nu),
//   k_mu = sum_s sum_ij 2Re-_ij(e_mu - e_s) conj(<s|D_i|mu>) <s|D_j|mu>
//                     + 2Re+_ij(e_s - e_mu) <mu|D_i|s> conj(<mu|D_j|s>),
// h_mu the same sums with Im parts over all signs of the frequency (minus sign on the + branch).
inline Complex offdiag_rate(const SpectralData& spec, const std::vector<Matrix>& couplings,
                            const CorrelationTable& table, Index mu, Index nu) {
    const auto report = genericity_check(spec);
    if (!report.generic()) {
        std::ostringstream os;
        os << "offdiag_rate: spectrum is not generic (" << report.degenerate_levels.size() << " degenerate levels, "
           << report.repeated_frequencies.size() << " repeated Bohr frequencies); use the dense generator";
        throw ConfigError(os.str());
    }
    const Index d = spec.dim();
    if (mu < 0 || nu < 0 || mu >= d || nu >= d || mu == nu) throw ValidationError("offdiag_rate: need mu != nu in [0, dim)");
    check_couplings(couplings, spec);

    std::vector<Matrix> dt;  // couplings in the eigenbasis
    for (const auto& dj : couplings) dt.push_back(spec.to_eigenbasis(dj));
    const auto n = static_cast<Index>(couplings.size());

    auto level = [&](Index a, double& h, double& k) {
        h = 0.0;
        k = 0.0;
        for (Index s = 0; s < d; ++s) {
            const double w_down = spec.basis_energy(a) - spec.basis_energy(s);  // emission a -> s
            const double w_up = -w_down;                                      // absorption a -> s
            const std::size_t tm = table.require(s == a ? 0.0 : w_down);
            const std::size_t tp = table.require(s == a ? 0.0 : w_up);
            for (Index i = 0; i < n; ++i) {
                for (Index j = 0; j < n; ++j) {
                    const Complex em = std::conj(dt[i](s, a)) * dt[j](s, a);
                    const Complex ab = dt[i](a, s) * std::conj(dt[j](a, s));
                    const Complex gm = table.minus(tm)(i, j);
                    const Complex gp = table.plus(tp)(i, j);
                    h += gm.imag() * em.real() - gp.imag() * ab.real();
                    if (s != a) {
                        if (w_down > 0.0) k += (2.0 * gm.real() * em).real();
                        if (w_up > 0.0) k += (2.0 * gp.real() * ab).real();
                    }
                }
            }
        }
    };
    double hm = 0.0;
    double km = 0.0;
    double hn = 0.0;
    double kn = 0.0;
    level(mu, hm, km);
    level(nu, hn, kn);
    return Complex{-0.5 * (km + kn), -(hm - hn)};
}

}  // namespace stoclim
