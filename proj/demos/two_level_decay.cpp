// two_level_decay.cpp: thermalization and dephasing of a two-level atom in a thermal bath

#include <cmath>
#include <cstdio>

#include "stoclim/stoclim.hpp"

using namespace stoclim;

int main() {
    const double beta = 1.0;
    BathSpec bath;
    bath.beta = beta;
    const Matrix h = (Matrix(2, 2) << 0, 0, 0, 1).finished();
    const Matrix d = (Matrix(2, 2) << 0, 1, 1, 0).finished();
    const auto sys = build_open_system(HermitianOperator(h), {d}, bath);

    const double down = 2.0 * delta_shell(bath, Branch::Minus, 1.0, 0, 0);
    const double up = 2.0 * delta_shell(bath, Branch::Plus, 1.0, 0, 0);
    const Complex a = offdiag_rate(sys.spec, sys.couplings, sys.table, 0, 1);
    std::printf("emission %.6f  absorption %.6f  ratio %.6f (e^beta = %.6f)\n", down, up, down / up, std::exp(beta));
    std::printf("coherence rate A_01 = %.6f%+.6fi\n", a.real(), a.imag() + 0.0);

    Vector psi(2);
    psi << 1.0, 1.0;
    std::vector<double> times;
    for (int k = 0; k <= 10; ++k) times.push_back(0.005 * k);
    const auto traj = evolve(sys.generator, DensityMatrix::pure(psi), times);
    std::printf("%8s %14s %14s\n", "t", "p_excited", "|rho_01|");
    for (std::size_t k = 0; k < times.size(); ++k) {
        std::printf("%8.4f %14.10f %14.10f\n", times[k], traj.states[k](1, 1).real(), std::abs(traj.states[k](0, 1)));
    }
    const auto st = stationary_state(sys.generator);
    std::printf("stationary excited population %.10f, Gibbs %.10f\n", st.state->matrix()(1, 1).real(),
                gibbs_weights(beta, sys.spec)(1));
    return 0;
}
