// evolution.hpp: time evolution under theta0^*, stationary states, the classical kinetic
// restriction and the detailed-balance / Gibbs / decay-rate diagnostics

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/numeric/odeint.hpp>

#include "stoclim/core.hpp"
#include "stoclim/density_matrix.hpp"
#include "stoclim/generator.hpp"
#include "stoclim/operator_core.hpp"

namespace stoclim {

struct Trajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
};

struct EvolveOptions {
    Index exact_max_dim{16};  // dense exponential up to this dimension
    double abs_tol{1e-10};
    double rel_tol{1e-10};
    double trace_tol{1e-10};
    double eigen_tol{1e-10};
};

namespace detail {

inline void check_times(const std::vector<double>& times) {
    if (times.empty()) throw ValidationError("evolve: empty time list");
    if (times.front() < 0.0) throw ValidationError("evolve: times must be >= 0");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) throw ValidationError("evolve: times must be strictly increasing");
    }
}

// Hermitize, renormalize a small trace drift, and refuse anything beyond tolerance.
inline DensityMatrix settle(Matrix m, double t, const EvolveOptions& opt) {
    m = linalg::hermitian_part(m);
    const double tr = m.trace().real();
    if (std::abs(tr - 1.0) > opt.trace_tol) {
        std::ostringstream os;
        os.precision(17);
        os << "evolve: trace drift " << tr - 1.0 << " at t = " << t;
        throw ConsistencyError(os.str());
    }
    m /= tr;
    const double lo = linalg::min_eigenvalue(m);
    if (lo < -opt.eigen_tol) {
        std::ostringstream os;
        os << "evolve: negative eigenvalue " << lo << " at t = " << t;
        throw ConsistencyError(os.str());
    }
    return DensityMatrix::unchecked(std::move(m));
}

}  // namespace detail

inline Trajectory evolve(const Generator& gen, const DensityMatrix& rho0, const std::vector<double>& times,
                         const EvolveOptions& opt = {}) {
    detail::check_times(times);
    if (rho0.dim() != gen.dim()) throw ValidationError("evolve: initial state dimension does not match the generator");
    const Index d = gen.dim();
    Trajectory traj;
    traj.times = times;
    traj.states.reserve(times.size());

    if (gen.is_zero()) {
        for (std::size_t k = 0; k < times.size(); ++k) traj.states.push_back(rho0);
        return traj;
    }

    if (d <= opt.exact_max_dim && gen.has_dense()) {
        const Matrix& l = gen.dense();
        std::map<double, Matrix> steps;  // exp(dt L) per distinct step
        Vector v = linalg::vec(rho0.matrix());
        double t = 0.0;
        for (double target : times) {
            const double dt = target - t;
            if (dt > 0.0) {
                auto it = steps.find(dt);
                if (it == steps.end()) it = steps.emplace(dt, Matrix((dt * l).exp())).first;
                v = it->second * v;
            }
            t = target;
            traj.states.push_back(detail::settle(linalg::unvec(v, d), t, opt));
            v = linalg::vec(traj.states.back().matrix());
        }
        return traj;
    }

    namespace odeint = boost::numeric::odeint;
    using State = std::vector<Complex>;
    const std::size_t n = static_cast<std::size_t>(d * d);
    auto rhs = [&](const State& x, State& dxdt, double) {
        const Matrix rho = Eigen::Map<const Matrix>(x.data(), d, d);
        const Matrix out = gen.apply_adjoint(rho);
        dxdt.assign(out.data(), out.data() + n);
    };
    State x(rho0.matrix().data(), rho0.matrix().data() + n);
    double t = 0.0;
    auto stepper = odeint::make_dense_output(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<State>());
    for (double target : times) {
        if (target > t) {
            const double norm = std::max(1.0, linalg::max_abs(gen.damping()));
            odeint::integrate_adaptive(stepper, rhs, x, t, target, std::min(target - t, 0.01 / norm));
        }
        t = target;
        traj.states.push_back(detail::settle(Eigen::Map<const Matrix>(x.data(), d, d), t, opt));
        const Matrix& m = traj.states.back().matrix();
        x.assign(m.data(), m.data() + n);
    }
    return traj;
}

struct StationaryResult {
    std::optional<DensityMatrix> state;  // set when the null space is one-dimensional
    std::vector<Matrix> basis;           // orthonormal basis of the null space of theta0^*
    bool ergodic{false};
    Index null_dim{0};
};

inline StationaryResult stationary_state(const Generator& gen, double threshold = 1e-10) {
    const Index d = gen.dim();
    StationaryResult res;
    if (gen.is_zero()) {
        res.null_dim = d * d;
        for (Index k = 0; k < d * d; ++k) {
            res.basis.push_back(linalg::unvec(Vector::Unit(d * d, k), d));
        }
        return res;
    }
    Generator local;
    const Matrix* l = nullptr;
    if (gen.has_dense()) {
        l = &gen.dense();
    } else {
        if (d > 32) throw ConfigError("stationary_state: dense form required (dim > 32)");
        local = gen;
        local.build_dense();
        l = &local.dense();
    }
    // Pivots below threshold * max pivot count as zero.
    Eigen::FullPivLU<Matrix> lu(*l);
    lu.setThreshold(threshold);
    const Matrix ker = lu.kernel();
    res.null_dim = (lu.rank() == l->cols()) ? 0 : ker.cols();
    if (res.null_dim == 0) return res;
    Eigen::HouseholderQR<Matrix> qr(ker);
    const Matrix q = qr.householderQ() * Matrix::Identity(ker.rows(), ker.cols());
    for (Index k = 0; k < q.cols(); ++k) res.basis.push_back(linalg::unvec(q.col(k), d));
    res.ergodic = res.null_dim == 1;
    if (res.ergodic) {
        Matrix rho = linalg::unvec(ker.col(0), d);
        rho = linalg::hermitian_part(rho / rho.trace());
        res.state = DensityMatrix::unchecked(rho / rho.trace().real());
    }
    return res;
}

// Kinetic (Pauli) system: rates(to, from) >= 0, generator Q = rates - diag(outflow).
class ClassicalKineticSystem {
public:
    using Sparse = Eigen::SparseMatrix<double>;

    ClassicalKineticSystem() = default;
    ClassicalKineticSystem(std::vector<std::string> labels, Sparse rates) : labels_(std::move(labels)), w_(std::move(rates)) {
        if (w_.rows() != w_.cols()) throw ValidationError("ClassicalKineticSystem: rate matrix must be square");
        if (static_cast<Index>(labels_.size()) != w_.rows()) {
            throw ValidationError("ClassicalKineticSystem: label count does not match the rate matrix");
        }
        for (Index c = 0; c < w_.outerSize(); ++c) {
            for (Sparse::InnerIterator it(w_, c); it; ++it) {
                if (it.row() == it.col()) continue;
                if (it.value() < 0.0) {
                    std::ostringstream os;
                    os << "ClassicalKineticSystem: negative rate " << it.value() << " for " << labels_[c] << " -> "
                       << labels_[it.row()];
                    throw ValidationError(os.str());
                }
            }
        }
        w_.prune([](Index r, Index c, double) { return r != c; });
        w_.makeCompressed();
    }

    Index size() const { return w_.rows(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const Sparse& rates() const { return w_; }
    double rate(Index from, Index to) const { return w_.coeff(to, from); }

    double outflow(Index from) const {
        double s = 0.0;
        for (Sparse::InnerIterator it(w_, from); it; ++it) s += it.value();
        return s;
    }

    Sparse generator_sparse() const {
        Sparse q = w_;
        for (Index c = 0; c < size(); ++c) q.coeffRef(c, c) -= outflow(c);
        q.makeCompressed();
        return q;
    }

    RealMatrix generator() const { return RealMatrix(generator_sparse()); }

    std::vector<RealVector> evolve(const RealVector& p0, const std::vector<double>& times) const {
        detail::check_times(times);
        if (p0.size() != size()) throw ValidationError("ClassicalKineticSystem::evolve: size mismatch");
        std::vector<RealVector> out;
        if (size() <= 512) {
            const RealMatrix q = generator();
            std::map<double, RealMatrix> steps;
            RealVector p = p0;
            double t = 0.0;
            for (double target : times) {
                const double dt = target - t;
                if (dt > 0.0) {
                    auto it = steps.find(dt);
                    if (it == steps.end()) it = steps.emplace(dt, RealMatrix((dt * q).exp())).first;
                    p = it->second * p;
                }
                t = target;
                out.push_back(p);
            }
            return out;
        }
        namespace odeint = boost::numeric::odeint;
        using State = std::vector<double>;
        const Sparse q = generator_sparse();
        auto rhs = [&](const State& x, State& dxdt, double) {
            Eigen::Map<const RealVector> xv(x.data(), static_cast<Index>(x.size()));
            dxdt.resize(x.size());
            Eigen::Map<RealVector>(dxdt.data(), static_cast<Index>(x.size())) = q * xv;
        };
        State x(p0.data(), p0.data() + p0.size());
        auto stepper = odeint::make_dense_output(1e-12, 1e-10, odeint::runge_kutta_dopri5<State>());
        double t = 0.0;
        for (double target : times) {
            if (target > t) odeint::integrate_adaptive(stepper, rhs, x, t, target, (target - t) / 100.0);
            t = target;
            out.push_back(Eigen::Map<const RealVector>(x.data(), static_cast<Index>(x.size())));
        }
        return out;
    }

    // Null space of Q: one probability vector when unique, else an orthonormal basis.
    struct Stationary {
        std::optional<RealVector> distribution;
        std::vector<RealVector> basis;
        Index null_dim{0};
    };

    Stationary stationary() const {
        Stationary res;
        if (size() <= 1024) {
            const RealMatrix q = generator();
            Eigen::FullPivLU<RealMatrix> lu(q);
            lu.setThreshold(1e-10);
            const RealMatrix ker = lu.kernel();
            res.null_dim = lu.rank() == q.cols() ? 0 : ker.cols();
            for (Index k = 0; k < res.null_dim; ++k) res.basis.push_back(ker.col(k));
            if (res.null_dim == 1) {
                RealVector p = ker.col(0);
                p /= p.sum();
                res.distribution = p;
            }
            return res;
        }
        // Large ergodic chains: replace one balance equation by normalization.
        Sparse a = generator_sparse();
        const Index n = size();
        std::vector<Eigen::Triplet<double>> trip;
        for (Index c = 0; c < a.outerSize(); ++c) {
            for (Sparse::InnerIterator it(a, c); it; ++it) {
                if (it.row() != n - 1) trip.emplace_back(it.row(), it.col(), it.value());
            }
        }
        for (Index c = 0; c < n; ++c) trip.emplace_back(n - 1, c, 1.0);
        Sparse b(n, n);
        b.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Sparse> solver;
        solver.compute(b);
        if (solver.info() != Eigen::Success) throw ConsistencyError("stationary: sparse factorization failed (non-ergodic?)");
        RealVector rhs = RealVector::Zero(n);
        rhs(n - 1) = 1.0;
        res.distribution = solver.solve(rhs);
        res.basis.push_back(*res.distribution / res.distribution->norm());
        res.null_dim = 1;
        return res;
    }

private:
    std::vector<std::string> labels_;
    Sparse w_;
};

inline ClassicalKineticSystem::Sparse dense_to_sparse(const RealMatrix& rates) {
    std::vector<Eigen::Triplet<double>> trip;
    for (Index c = 0; c < rates.cols(); ++c) {
        for (Index r = 0; r < rates.rows(); ++r) {
            if (r != c && rates(r, c) != 0.0) trip.emplace_back(r, c, rates(r, c));
        }
    }
    ClassicalKineticSystem::Sparse s(rates.rows(), rates.cols());
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

inline std::vector<std::string> level_labels(Index n) {
    std::vector<std::string> out;
    for (Index k = 0; k < n; ++k) out.push_back(std::to_string(k));
    return out;
}

// Population block W[s' -> s] = <s| theta0^*(|s'><s'|) |s>, eigenbasis indices, by direct application.
inline RealMatrix population_block(const Generator& gen, const SpectralData& spec) {
    const Index d = spec.dim();
    RealMatrix w = RealMatrix::Zero(d, d);
    for (Index from = 0; from < d; ++from) {
        const Matrix out = spec.to_eigenbasis(gen.apply_adjoint(spec.matrix_unit(from, from)));
        for (Index to = 0; to < d; ++to) w(to, from) = out(to, to).real();
    }
    return w;
}

// Rates from the channel data:
//   W[s' -> s] = sum_ij g-_ij(e_s' - e_s) conj(<s|E_i|s'>) <s|E_j|s'>
//              + sum_ij g+_ij(e_s - e_s') <s'|E_i|s> conj(<s'|E_j|s>).
// Degenerate spectra fall back to population_block.
inline ClassicalKineticSystem diagonal_restriction(const Generator& gen, const SpectralData& spec) {
    const Index d = spec.dim();
    if (!spec.nondegenerate()) {
        return ClassicalKineticSystem(level_labels(d), dense_to_sparse(population_block(gen, spec)));
    }
    RealMatrix w = RealMatrix::Zero(d, d);
    for (const auto& c : gen.channels()) {
        std::vector<Matrix> e;
        for (const auto& j : c.jumps) e.push_back(spec.to_eigenbasis(j));
        const auto n = static_cast<Index>(e.size());
        for (Index from = 0; from < d; ++from) {
            for (Index to = 0; to < d; ++to) {
                if (to == from) continue;
                Complex s{};
                for (Index i = 0; i < n; ++i) {
                    for (Index j = 0; j < n; ++j) {
                        s += c.gamma_minus(i, j) * std::conj(e[i](to, from)) * e[j](to, from);
                        s += c.gamma_plus(i, j) * e[i](from, to) * std::conj(e[j](from, to));
                    }
                }
                w(to, from) += s.real();
            }
        }
    }
    return ClassicalKineticSystem(level_labels(d), dense_to_sparse(w));
}

struct BalanceResidual {
    double value{0.0};
    Index from{-1};
    Index to{-1};
};

// max over connected pairs of |p(s) W[s -> s'] - p(s') W[s' -> s]|
inline BalanceResidual detailed_balance_residual(const ClassicalKineticSystem& cks, const RealVector& dist) {
    if (dist.size() != cks.size()) throw ValidationError("detailed_balance_residual: size mismatch");
    BalanceResidual r;
    const auto& w = cks.rates();
    for (Index c = 0; c < w.outerSize(); ++c) {
        for (ClassicalKineticSystem::Sparse::InnerIterator it(w, c); it; ++it) {
            const Index from = it.col();
            const Index to = it.row();
            const double v = std::abs(dist(from) * it.value() - dist(to) * cks.rate(to, from));
            if (v > r.value || r.from < 0) r = {v, from, to};
        }
    }
    return r;
}

// Boltzmann weights per eigenbasis column, shifted by the ground energy.
inline RealVector gibbs_weights(double beta, const SpectralData& spec) {
    if (!(beta >= 0.0) || std::isinf(beta)) throw DomainError("gibbs_state: beta must be finite and >= 0");
    const Index d = spec.dim();
    RealVector p(d);
    const double e0 = spec.levels().front().energy;
    for (Index k = 0; k < d; ++k) p(k) = std::exp(-beta * (spec.basis_energy(k) - e0));
    return p / p.sum();
}

inline DensityMatrix gibbs_state(double beta, const SpectralData& spec) {
    const RealVector p = gibbs_weights(beta, spec);
    const Matrix rho = spec.basis() * p.cast<Complex>().asDiagonal() * spec.basis().adjoint();
    return DensityMatrix(linalg::hermitian_part(rho));
}

struct DecayFit {
    Complex rate{};
    double residual{0.0};  // rms of the log-magnitude and phase residuals
    std::size_t samples{0};
};

// Least-squares fit of log rho(mu, nu, t) = A t + c (eigenbasis indices), over |rho| > floor.
inline DecayFit decay_fit(const Trajectory& traj, const SpectralData& spec, Index mu, Index nu, double floor = 1e-10) {
    if (traj.states.empty()) throw ValidationError("decay_fit: empty trajectory");
    auto element = [&](std::size_t k) { return spec.to_eigenbasis(traj.states[k].matrix())(mu, nu); };
    if (std::abs(element(0)) <= 1e-8) throw ValidationError("decay_fit: initial element is (numerically) zero");
    std::vector<double> ts;
    std::vector<double> lm;
    std::vector<double> ph;
    double prev = 0.0;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const Complex c = element(k);
        if (std::abs(c) <= floor) break;
        double a = std::arg(c);
        if (!ph.empty()) {
            while (a - prev > kPi) a -= 2.0 * kPi;
            while (a - prev < -kPi) a += 2.0 * kPi;
        }
        prev = a;
        ts.push_back(traj.times[k]);
        lm.push_back(std::log(std::abs(c)));
        ph.push_back(a);
    }
    DecayFit fit;
    fit.samples = ts.size();
    if (ts.size() < 2) throw ValidationError("decay_fit: fewer than two usable samples");
    RealMatrix a(static_cast<Index>(ts.size()), 2);
    RealVector yr(static_cast<Index>(ts.size()));
    RealVector yi(static_cast<Index>(ts.size()));
    for (std::size_t k = 0; k < ts.size(); ++k) {
        a(static_cast<Index>(k), 0) = ts[k];
        a(static_cast<Index>(k), 1) = 1.0;
        yr(static_cast<Index>(k)) = lm[k];
        yi(static_cast<Index>(k)) = ph[k];
    }
    const auto qr = a.colPivHouseholderQr();
    const RealVector cr = qr.solve(yr);
    const RealVector ci = qr.solve(yi);
    fit.rate = {cr(0), ci(0)};
    const double ss = (a * cr - yr).squaredNorm() + (a * ci - yi).squaredNorm();
    fit.residual = std::sqrt(ss / static_cast<double>(ts.size()));
    return fit;
}

}  // namespace stoclim
