// bath.hpp: bosonic bath description and the correlation constants (g_i|g_j)^-/+_w
//
// Real parts are delta-shell integrals,
//   Re(g_i|g_j)^-_w = pi J(w) g_i(w) g_j(w) (N(w) + 1),
//   Re(g_i|g_j)^+_w = pi J(w) g_i(w) g_j(w) N(w),          (w > 0, zero otherwise)
// with J the radial density-of-states factor. Imaginary parts are the principal values
//   Im(g_i|g_j)^-_w = -PV int_0^cutoff J g_i g_j (N + 1) / (rho - w) drho
//   Im(g_i|g_j)^+_w = -PV int_0^cutoff J g_i g_j N / (rho - w) drho.

#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "stoclim/core.hpp"
#include "stoclim/operator_core.hpp"

namespace stoclim {

using RadialFunction = std::function<double(double)>;

enum class Kernel { Analytic, RadialQuadrature };

// Paper: J(w) = 4 pi w (reproduces the closed-form rates); Physical: J(w) = 4 pi w^2.
enum class DosConvention { Paper, Physical };

enum class Branch { Minus, Plus };

struct FrequencyFilter {
    double omega_max{0.0};
};

// Piecewise-linear function through (x, y) samples; zero outside the sampled range.
class TabulatedFunction {
public:
    TabulatedFunction(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        if (x_.size() != y_.size() || x_.size() < 2) {
            throw ConfigError("TabulatedFunction: need at least two (x, y) samples of equal length");
        }
        for (std::size_t k = 1; k < x_.size(); ++k) {
            if (!(x_[k] > x_[k - 1])) throw ConfigError("TabulatedFunction: abscissae must be strictly increasing");
        }
    }

    static TabulatedFunction from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open table '" + path + "'");
        std::vector<double> xs;
        std::vector<double> ys;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            for (char& c : line) {
                if (c == ',' || c == ';' || c == '\t') c = ' ';
            }
            std::istringstream ls(line);
            double a = 0.0;
            double b = 0.0;
            if (!(ls >> a >> b)) continue;  // header row
            xs.push_back(a);
            ys.push_back(b);
        }
        return TabulatedFunction(std::move(xs), std::move(ys));
    }

    double operator()(double x) const {
        if (x < x_.front() || x > x_.back()) return 0.0;
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        if (it == x_.end()) return y_.back();
        const std::size_t k = static_cast<std::size_t>(it - x_.begin());
        const double t = (x - x_[k - 1]) / (x_[k] - x_[k - 1]);
        return (1.0 - t) * y_[k - 1] + t * y_[k];
    }

private:
    std::vector<double> x_;
    std::vector<double> y_;
};

struct BathSpec {
    double beta{1.0};  // +inf: vacuum
    Kernel kernel{Kernel::Analytic};
    DosConvention dos{DosConvention::Paper};
    // One radial form factor per coupling operator, or a single shared one; empty means g = 1.
    std::vector<RadialFunction> form_factors;
    // Empty means thermal N(rho) = 1 / (exp(beta rho) - 1).
    std::optional<RadialFunction> mode_density;
    std::optional<FrequencyFilter> filter;
    std::optional<double> uv_cutoff;
    bool lamb_shift{false};
    // false replaces (N + 1) by N in the emission channel.
    bool spontaneous_emission{true};
    // PV excision radius; defaults to 1e-4 * uv_cutoff.
    std::optional<double> pv_excision;

    bool thermal() const { return !mode_density.has_value(); }
    bool vacuum() const { return std::isinf(beta); }

    void validate() const {
        if (!(beta > 0.0)) throw ConfigError("bath.beta must be > 0 (use +inf for vacuum)");
        if (filter && !(filter->omega_max > 0.0)) throw ConfigError("bath.filter.omega_max must be > 0");
        if (uv_cutoff && !(*uv_cutoff > 0.0)) throw ConfigError("bath.uv_cutoff must be > 0");
        if (lamb_shift) {
            if (kernel == Kernel::Analytic) {
                throw ConfigError("bath.lamb_shift requires the radial_quadrature kernel (the analytic PV integral diverges)");
            }
            if (!uv_cutoff) throw ConfigError("bath.lamb_shift requires bath.uv_cutoff (PV integral diverges)");
        }
    }

    double dos_factor(double rho) const {
        return dos == DosConvention::Paper ? 4.0 * kPi * rho : 4.0 * kPi * rho * rho;
    }

    double form_factor(std::size_t i, double rho) const {
        if (form_factors.empty()) return 1.0;
        const auto& g = form_factors.size() == 1 ? form_factors.front() : form_factors.at(i);
        return g(rho);
    }

    // Unfiltered N(rho).
    double raw_density(double rho) const {
        if (mode_density) return (*mode_density)(rho);
        if (vacuum() || rho <= 0.0) return 0.0;
        return 1.0 / std::expm1(beta * rho);
    }

    // N(rho) after the optional frequency filter.
    double density(double rho) const {
        if (filter && !(rho > 0.0 && rho < filter->omega_max)) return 0.0;
        return raw_density(rho);
    }

    // Weight of the emission channel: N + 1, or N with spontaneous emission disabled.
    double emission_density(double rho) const {
        if (!spontaneous_emission) return density(rho);
        if (thermal() && !filter && !vacuum() && rho > 0.0) return -1.0 / std::expm1(-beta * rho);
        return density(rho) + 1.0;
    }

    double branch_density(Branch b, double rho) const {
        return b == Branch::Minus ? emission_density(rho) : density(rho);
    }
};

inline double filtered_density(const BathSpec& bath, double rho) { return bath.density(rho); }

// Delta-shell real part of (g_i|g_j)^b_w.
inline double delta_shell(const BathSpec& bath, Branch b, double omega, std::size_t i, std::size_t j) {
    if (!(omega > 0.0)) return 0.0;
    return kPi * bath.dos_factor(omega) * bath.form_factor(i, omega) * bath.form_factor(j, omega) *
           bath.branch_density(b, omega);
}

// Large-temperature value pi J(w) g(w)^2 / (beta w); 4 pi^2 / beta for the paper convention and g = 1.
inline double high_temperature_limit(const BathSpec& bath, double omega) {
    if (bath.kernel != Kernel::Analytic) throw ConfigError("high_temperature_limit: analytic kernel required");
    if (bath.vacuum()) throw DomainError("high_temperature_limit: undefined at zero temperature (beta = inf)");
    if (!(omega > 0.0)) throw DomainError("high_temperature_limit: omega must be > 0");
    const double g = bath.form_factor(0, omega);
    return kPi * bath.dos_factor(omega) * g * g / (bath.beta * omega);
}

struct PvOptions {
    double excision{1e-4};   // symmetric window radius around the pole
    double rel_tol{1e-13};   // Gauss-Kronrod tolerance
    unsigned max_depth{18};
};

// Principal value of int_a^b f(x) / (x - pole) dx.
// Pole inside (a, b): symmetric excision I(h) = int_a^{pole-h} + int_{pole+h}^b,
// Richardson-extrapolated over h and h/2 (I(h) = PV - 2 f'(pole) h + O(h^3)).
// Pole at the lower endpoint: converges only when f vanishes there.
inline double principal_value(const std::function<double(double)>& f, double pole, double a, double b,
                              const PvOptions& opt = {}) {
    using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    if (!(b > a)) throw DomainError("principal_value: empty interval");
    auto integrand = [&](double x) { return f(x) / (x - pole); };
    auto plain = [&](double lo, double hi) {
        if (!(hi > lo)) return 0.0;
        return Quad::integrate(integrand, lo, hi, opt.max_depth, opt.rel_tol);
    };

    if (pole >= b) throw DomainError("principal_value: pole at or beyond the upper limit");
    const double h0 = opt.excision;
    if (pole < a - h0) return plain(a, b);
    if (pole <= a + h0) {
        // Endpoint pole: int f(x)/(x - pole) is finite only if f(pole) = 0.
        const double probe = std::abs(f(a + 1e-10 * (b - a)));
        const double scale = std::max({std::abs(f(a + 0.25 * (b - a))), std::abs(f(a + 0.5 * (b - a))), 1e-300});
        if (probe > 1e-6 * scale) {
            throw DomainError("principal_value: logarithmically divergent integral (pole at the lower limit)");
        }
        return plain(std::max(a, pole), b);
    }

    double h = std::min({h0, 0.5 * (pole - a), 0.5 * (b - pole)});
    auto excised = [&](double hh) { return plain(a, pole - hh) + plain(pole + hh, b); };
    return 2.0 * excised(0.5 * h) - excised(h);
}

inline double pv_lamb_shift(const BathSpec& bath, double omega, std::size_t i, std::size_t j, Branch b) {
    if (bath.kernel != Kernel::RadialQuadrature || !bath.uv_cutoff) {
        throw ConfigError("pv_lamb_shift: radial_quadrature kernel with uv_cutoff required");
    }
    const double cutoff = *bath.uv_cutoff;
    if (omega >= cutoff) throw DomainError("pv_lamb_shift: omega must lie below uv_cutoff");
    PvOptions opt;
    opt.excision = bath.pv_excision.value_or(1e-4 * cutoff);
    auto f = [&](double rho) {
        return bath.dos_factor(rho) * bath.form_factor(i, rho) * bath.form_factor(j, rho) * bath.branch_density(b, rho);
    };
    return -principal_value(f, omega, 0.0, cutoff, opt);
}

// (g_i|g_j)^-/+_w for every Bohr frequency, as complex (n x n) matrices.
class CorrelationTable {
public:
    CorrelationTable() = default;
    CorrelationTable(std::vector<double> omegas, std::vector<Matrix> minus, std::vector<Matrix> plus, double tol)
        : omegas_(std::move(omegas)), minus_(std::move(minus)), plus_(std::move(plus)), tol_(tol) {}

    std::size_t size() const { return omegas_.size(); }
    const std::vector<double>& frequencies() const { return omegas_; }
    const Matrix& minus(std::size_t k) const { return minus_.at(k); }
    const Matrix& plus(std::size_t k) const { return plus_.at(k); }
    Matrix& minus(std::size_t k) { return minus_.at(k); }
    Matrix& plus(std::size_t k) { return plus_.at(k); }
    Index n_couplings() const { return minus_.empty() ? 0 : minus_.front().rows(); }

    std::optional<std::size_t> find(double omega) const {
        for (std::size_t k = 0; k < omegas_.size(); ++k) {
            if (std::abs(omegas_[k] - omega) <= tol_) return k;
        }
        return std::nullopt;
    }

    std::size_t require(double omega) const {
        auto k = find(omega);
        if (!k) {
            std::ostringstream os;
            os << "correlation table has no entry for Bohr frequency " << omega;
            throw ConsistencyError(os.str());
        }
        return *k;
    }

private:
    std::vector<double> omegas_;
    std::vector<Matrix> minus_;
    std::vector<Matrix> plus_;
    double tol_{0.0};
};

// `skip_imag[k]` (optional) marks frequencies whose Lamb shift is not needed
// because every frequency component of the couplings vanishes there.
inline CorrelationTable correlation_table(const BathSpec& bath, const BohrSet& bohr, Index n_couplings,
                                          const std::vector<bool>& skip_imag = {}) {
    bath.validate();
    if (!bath.form_factors.empty() && bath.form_factors.size() != 1 &&
        static_cast<Index>(bath.form_factors.size()) != n_couplings) {
        throw ConfigError("bath.form_factors: need one shared form factor or one per coupling");
    }
    const auto n = static_cast<std::size_t>(n_couplings);
    std::vector<double> omegas = bohr.frequencies();
    std::vector<Matrix> minus;
    std::vector<Matrix> plus;
    for (std::size_t k = 0; k < omegas.size(); ++k) {
        const double w = omegas[k];
        Matrix gm(n_couplings, n_couplings);
        Matrix gp(n_couplings, n_couplings);
        const bool want_imag = bath.lamb_shift && !(k < skip_imag.size() && skip_imag[k]);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double im_m = 0.0;
                double im_p = 0.0;
                if (want_imag) {
                    if (j < i) {
                        // real form factors: the table is symmetric in (i, j)
                        im_m = gm(static_cast<Index>(j), static_cast<Index>(i)).imag();
                        im_p = gp(static_cast<Index>(j), static_cast<Index>(i)).imag();
                    } else {
                        try {
                            im_m = pv_lamb_shift(bath, w, i, j, Branch::Minus);
                            im_p = pv_lamb_shift(bath, w, i, j, Branch::Plus);
                        } catch (const DomainError& e) {
                            std::ostringstream os;
                            os << "Lamb shift at Bohr frequency " << w << ": " << e.what();
                            throw ConfigError(os.str());
                        }
                    }
                }
                gm(static_cast<Index>(i), static_cast<Index>(j)) = {delta_shell(bath, Branch::Minus, w, i, j), im_m};
                gp(static_cast<Index>(i), static_cast<Index>(j)) = {delta_shell(bath, Branch::Plus, w, i, j), im_p};
            }
        }
        minus.push_back(std::move(gm));
        plus.push_back(std::move(gp));
    }
    return CorrelationTable(std::move(omegas), std::move(minus), std::move(plus), bohr.tol());
}

}  // namespace stoclim
