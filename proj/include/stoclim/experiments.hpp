// experiments.hpp: filtered-bath coherence control and small shared fixtures

#pragma once

#include <cmath>
#include <vector>

#include "stoclim/bath.hpp"
#include "stoclim/evolution.hpp"
#include "stoclim/generator.hpp"
#include "stoclim/operator_core.hpp"

namespace stoclim {

// Connected components of the kinetic graph (either direction counts).
inline std::vector<int> kinetic_groups(const ClassicalKineticSystem& cks) {
    const Index n = cks.size();
    std::vector<int> group(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (Index s = 0; s < n; ++s) {
        if (group[static_cast<std::size_t>(s)] >= 0) continue;
        std::vector<Index> stack{s};
        group[static_cast<std::size_t>(s)] = next;
        while (!stack.empty()) {
            const Index a = stack.back();
            stack.pop_back();
            for (Index b = 0; b < n; ++b) {
                if (group[static_cast<std::size_t>(b)] >= 0) continue;
                if (cks.rate(a, b) > 0.0 || cks.rate(b, a) > 0.0) {
                    group[static_cast<std::size_t>(b)] = next;
                    stack.push_back(b);
                }
            }
        }
        ++next;
    }
    return group;
}

struct CoherenceControlResult {
    int groups{0};
    double intra_rate{0.0};           // slowest nonzero intra-group rate
    double t_final{0.0};              // 100 / intra_rate
    double filtered_transfer{0.0};    // max population outside the initial group
    double intra_deviation{0.0};      // |p - intra-group stationary| at t_final
    double open_rate_generator{0.0};  // d/dt population outside the group at t = 0, filter removed
    double open_rate_closed_form{0.0};
    Index null_dim{0};                // stationary null space with the filter on
};

// Start in eigenstate `start`; the bath must carry a filter. Spontaneous emission is
// switched off for the filtered run and kept off for the unfiltered comparison so that
// the two differ only by the filter.
inline CoherenceControlResult coherence_control(const HermitianOperator& h, const std::vector<Matrix>& couplings,
                                                BathSpec bath, Index start = 0, std::size_t samples = 200) {
    if (!bath.filter) throw ConfigError("coherence_control: bath.filter is required");
    bath.spontaneous_emission = false;
    CoherenceControlResult res;

    GeneratorOptions opt;
    opt.dense = DenseMode::Always;
    const auto sys = build_open_system(h, couplings, bath, opt);
    const auto& spec = sys.spec;
    const Index d = spec.dim();
    const auto cks = diagonal_restriction(sys.generator, spec);
    const auto group = kinetic_groups(cks);
    res.groups = 1 + *std::max_element(group.begin(), group.end());
    const int g0 = group[static_cast<std::size_t>(start)];

    double slow = 0.0;
    for (Index a = 0; a < d; ++a) {
        for (Index b = 0; b < d; ++b) {
            const double r = cks.rate(a, b);
            if (a != b && r > 0.0 && group[static_cast<std::size_t>(a)] == g0) slow = slow == 0.0 ? r : std::min(slow, r);
        }
    }
    if (slow == 0.0) throw ConfigError("coherence_control: initial group has no internal dynamics");
    res.intra_rate = slow;
    res.t_final = 100.0 / slow;
    res.null_dim = stationary_state(sys.generator).null_dim;

    std::vector<double> times;
    for (std::size_t k = 1; k <= samples; ++k) times.push_back(res.t_final * static_cast<double>(k) / samples);
    const auto rho0 = DensityMatrix(spec.matrix_unit(start, start));
    const auto traj = evolve(sys.generator, rho0, times);
    for (const auto& st : traj.states) {
        const Matrix e = spec.to_eigenbasis(st.matrix());
        double out = 0.0;
        for (Index a = 0; a < d; ++a) {
            if (group[static_cast<std::size_t>(a)] != g0) out += std::abs(e(a, a).real());
        }
        res.filtered_transfer = std::max(res.filtered_transfer, out);
    }

    // Intra-group stationary distribution of the restricted chain.
    const auto stat = cks.stationary();
    RealVector target = RealVector::Zero(d);
    for (const auto& v : stat.basis) {
        double in = 0.0;
        double all = 0.0;
        for (Index a = 0; a < d; ++a) {
            all += std::abs(v(a));
            if (group[static_cast<std::size_t>(a)] == g0) in += std::abs(v(a));
        }
        if (in > 0.5 * all) target = v / v.sum();
    }
    const Matrix last = spec.to_eigenbasis(traj.states.back().matrix());
    for (Index a = 0; a < d; ++a) res.intra_deviation = std::max(res.intra_deviation, std::abs(last(a, a).real() - target(a)));

    // Filter removed.
    BathSpec open = bath;
    open.filter.reset();
    const auto osys = build_open_system(h, couplings, open, opt);
    const Matrix drho = spec.to_eigenbasis(osys.generator.apply_adjoint(rho0.matrix()));
    std::vector<Matrix> dt;
    for (const auto& dj : couplings) dt.push_back(spec.to_eigenbasis(dj));
    for (Index a = 0; a < d; ++a) {
        if (group[static_cast<std::size_t>(a)] == g0) continue;
        res.open_rate_generator += drho(a, a).real();
        const double w = spec.basis_energy(a) - spec.basis_energy(start);
        for (std::size_t i = 0; i < dt.size(); ++i) {
            for (std::size_t j = 0; j < dt.size(); ++j) {
                const Complex m = dt[i](start, a) * std::conj(dt[j](start, a));
                const Branch b = w > 0.0 ? Branch::Plus : Branch::Minus;
                res.open_rate_closed_form += 2.0 * delta_shell(open, b, std::abs(w), i, j) * m.real();
            }
        }
    }
    return res;
}

// Four levels in two groups {0, 0.3} and {2, 2.45}; nonzero couplings between all pairs.
inline HermitianOperator two_group_hamiltonian() {
    RealVector e(4);
    e << 0.0, 0.3, 2.0, 2.45;
    return HermitianOperator(Matrix(e.cast<Complex>().asDiagonal()));
}

inline Matrix two_group_coupling() {
    Matrix dm(4, 4);
    dm << 0.0, 1.0, 0.6, 0.4,
          1.0, 0.0, 0.5, 0.7,
          0.6, 0.5, 0.0, 0.9,
          0.4, 0.7, 0.9, 0.0;
    return dm;
}

}  // namespace stoclim
