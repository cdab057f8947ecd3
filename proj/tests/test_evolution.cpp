// test_evolution.cpp: density matrices, evolution, stationary states, kinetic restriction

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stoclim/evolution.hpp"
#include "stoclim/experiments.hpp"

using namespace stoclim;

namespace {

Matrix diag(std::initializer_list<double> v) {
    RealVector e(static_cast<Index>(v.size()));
    Index k = 0;
    for (double x : v) e(k++) = x;
    return Matrix(e.cast<Complex>().asDiagonal());
}

BathSpec thermal(double beta) {
    BathSpec b;
    b.beta = beta;
    return b;
}

Matrix sigma_x() { return (Matrix(2, 2) << 0, 1, 1, 0).finished(); }

OpenSystem two_level(double beta = 1.0, DenseMode mode = DenseMode::Auto) {
    GeneratorOptions opt;
    opt.dense = mode;
    return build_open_system(HermitianOperator(diag({0.0, 1.0})), {sigma_x()}, thermal(beta), opt);
}

OpenSystem three_level(double beta = 1.0) {
    // generic spectrum, every pair coupled
    const Matrix dm = (Matrix(3, 3) << 0.0, 1.0, 0.5, 1.0, 0.0, 0.8, 0.5, 0.8, 0.0).finished();
    return build_open_system(HermitianOperator(diag({0.0, 0.7, 1.9})), {dm}, thermal(beta));
}

std::vector<double> grid(double t_max, int n) {
    std::vector<double> t;
    for (int k = 1; k <= n; ++k) t.push_back(t_max * k / n);
    return t;
}

}  // namespace

TEST(DensityMatrix, Validation) {
    EXPECT_NO_THROW(DensityMatrix(diag({0.5, 0.5})));
    try {
        DensityMatrix(diag({0.6, 0.5}));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("trace is 1.1"), std::string::npos) << e.what();
    }
    try {
        DensityMatrix(diag({1.2, -0.2}));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("negative eigenvalue -0.2"), std::string::npos) << e.what();
    }
    Matrix nh = diag({0.5, 0.5});
    nh(0, 1) = 0.1;
    EXPECT_THROW(DensityMatrix{nh}, ValidationError);
    EXPECT_THROW(DensityMatrix(Matrix::Zero(2, 3)), ValidationError);
    const auto p = DensityMatrix::pure((Vector(2) << 1.0, Complex(0, 1)).finished());
    EXPECT_NEAR(p(0, 1).real(), 0.0, 1e-15);
    EXPECT_NEAR(p(0, 1).imag(), -0.5, 1e-15);
}

TEST(Evolve, ZeroGeneratorIsConstant) {
    const auto sys = build_open_system(HermitianOperator(diag({0.0, 1.0})), {Matrix::Zero(2, 2)}, thermal(1.0));
    const auto rho = DensityMatrix::pure((Vector(2) << 1.0, 1.0).finished());
    const auto traj = evolve(sys.generator, rho, {0.0, 1.0, 5.0});
    for (const auto& s : traj.states) EXPECT_EQ(linalg::max_abs(s.matrix() - rho.matrix()), 0.0);
}

TEST(Evolve, TimeValidation) {
    const auto sys = two_level();
    const auto rho = DensityMatrix::maximally_mixed(2);
    EXPECT_THROW(evolve(sys.generator, rho, {}), ValidationError);
    EXPECT_THROW(evolve(sys.generator, rho, {1.0, 0.5}), ValidationError);
    EXPECT_THROW(evolve(sys.generator, rho, {-1.0}), ValidationError);
    EXPECT_THROW(evolve(sys.generator, DensityMatrix::maximally_mixed(3), {1.0}), ValidationError);
}

TEST(Evolve, TwoStateRateEquation) {
    const auto sys = two_level(1.0);
    const double down = 2 * oracle::re_minus(1.0, 1.0);
    const double up = 2 * oracle::re_plus(1.0, 1.0);
    const auto times = grid(0.05, 25);
    const auto traj = evolve(sys.generator, DensityMatrix(diag({0.0, 1.0})), times);
    for (std::size_t k = 0; k < times.size(); ++k) {
        EXPECT_NEAR(traj.states[k](1, 1).real(), oracle::two_state_excited(1.0, down, up, times[k]), 1e-10);
    }
}

TEST(Evolve, OffDiagonalFollowsExponential) {
    const auto sys = two_level(1.0);
    const double a = -(oracle::re_minus(1, 1) + oracle::re_plus(1, 1));
    const auto rho = DensityMatrix::pure((Vector(2) << 1.0, 1.0).finished());
    const auto times = grid(2.0 / std::abs(a), 20);
    const auto traj = evolve(sys.generator, rho, times);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const Complex want = 0.5 * std::exp(a * times[k]);  // interaction picture, no Lamb shift
        EXPECT_LE(std::abs(traj.states[k](0, 1) - want), 1e-8 * std::abs(want));
    }
}

TEST(Evolve, IntegratorPathMatchesExponential) {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 3; ++k) {
        GeneratorOptions opt;
        opt.dense = DenseMode::Always;
        const auto sys = build_open_system(HermitianOperator(oracle::random_hermitian(rng, 3)),
                                           {oracle::random_hermitian(rng, 3)}, thermal(2.0), opt);
        const auto rho = DensityMatrix(oracle::random_density(rng, 3));
        const auto times = grid(0.05, 5);
        EvolveOptions ode;
        ode.exact_max_dim = 0;
        const auto a = evolve(sys.generator, rho, times);
        const auto b = evolve(sys.generator, rho, times, ode);
        for (std::size_t t = 0; t < times.size(); ++t) {
            EXPECT_LE(linalg::max_abs(a.states[t].matrix() - b.states[t].matrix()), 1e-7);
        }
    }
}

TEST(Evolve, PositivityAlongTrajectories) {
    std::mt19937_64 rng(9);
    for (int k = 0; k < 5; ++k) {
        GeneratorOptions opt;
        opt.dense = DenseMode::Always;
        const auto sys = build_open_system(HermitianOperator(oracle::random_hermitian(rng, 3)),
                                           {oracle::random_hermitian(rng, 3), oracle::random_hermitian(rng, 3)},
                                           thermal(0.5), opt);
        const auto traj = evolve(sys.generator, DensityMatrix(oracle::random_density(rng, 3)), grid(0.1, 20));
        for (const auto& s : traj.states) {
            EXPECT_GE(linalg::min_eigenvalue(s.matrix()), -1e-10);
            EXPECT_NEAR(s.matrix().trace().real(), 1.0, 1e-12);
        }
    }
}

TEST(Stationary, TwoLevelGibbs) {
    const auto sys = two_level(1.0);
    const auto st = stationary_state(sys.generator);
    ASSERT_TRUE(st.ergodic);
    const auto p = oracle::gibbs({0.0, 1.0}, 1.0);
    EXPECT_NEAR(st.state->matrix()(0, 0).real(), p(0), 1e-12);
    EXPECT_NEAR(st.state->matrix()(0, 0).real(), 0.7310585786, 1e-10);
    EXPECT_LE(linalg::trace_distance(st.state->matrix(), gibbs_state(1.0, sys.spec).matrix()), 1e-12);
}

TEST(Stationary, ConvergenceFromExcited) {
    const auto sys = three_level(0.8);
    const auto traj = evolve(sys.generator, DensityMatrix(diag({0.0, 0.0, 1.0})), {5.0, 10.0});
    EXPECT_LE(linalg::trace_distance(traj.states.back().matrix(), gibbs_state(0.8, sys.spec).matrix()), 1e-8);
}

TEST(Stationary, ZeroGeneratorAndNonErgodic) {
    const auto zero = build_open_system(HermitianOperator(diag({0.0, 1.0})), {Matrix::Zero(2, 2)}, thermal(1.0));
    const auto st = stationary_state(zero.generator);
    EXPECT_EQ(st.null_dim, 4);
    EXPECT_FALSE(st.ergodic);
    // diagonal coupling: populations conserved, no transitions
    const auto dg = build_open_system(HermitianOperator(diag({0.0, 1.0, 2.3})), {diag({1.0, 0.0, -1.0})}, thermal(1.0));
    EXPECT_GE(stationary_state(dg.generator).null_dim, 3);
}

TEST(Restriction, TwoLevelRates) {
    const auto sys = two_level(1.0);
    const auto cks = diagonal_restriction(sys.generator, sys.spec);
    EXPECT_NEAR(cks.rate(1, 0), 2 * oracle::re_minus(1, 1), 1e-12);
    EXPECT_NEAR(cks.rate(0, 1), 2 * oracle::re_plus(1, 1), 1e-12);
    EXPECT_NEAR(cks.rate(1, 0) / cks.rate(0, 1), std::exp(1.0), 1e-12);
}

TEST(Restriction, MatchesPopulationBlock) {
    std::mt19937_64 rng(13);
    for (int k = 0; k < 5; ++k) {
        const auto sys = build_open_system(HermitianOperator(oracle::random_hermitian(rng, 4)),
                                           {oracle::random_hermitian(rng, 4), oracle::random_hermitian(rng, 4)},
                                           thermal(1.0));
        const auto cks = diagonal_restriction(sys.generator, sys.spec);
        const RealMatrix pb = population_block(sys.generator, sys.spec);
        EXPECT_LE((cks.generator() - pb).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, pb.cwiseAbs().maxCoeff()));
    }
}

TEST(Restriction, DiagonalCouplingHasNoRates) {
    const auto sys = build_open_system(HermitianOperator(diag({0.0, 1.0, 2.3})), {diag({1.0, 0.5, -1.0})}, thermal(1.0));
    EXPECT_EQ(diagonal_restriction(sys.generator, sys.spec).rates().nonZeros(), 0);
}

TEST(Restriction, FilteredBathSplitsGroups) {
    BathSpec b = thermal(1.0);
    b.filter = FrequencyFilter{1.0};
    b.spontaneous_emission = false;
    const auto sys = build_open_system(two_group_hamiltonian(), {two_group_coupling()}, b);
    const auto cks = diagonal_restriction(sys.generator, sys.spec);
    // no rates between {0, 1} and {2, 3}
    for (Index a : {0, 1}) {
        for (Index c : {2, 3}) {
            EXPECT_EQ(cks.rate(a, c), 0.0);
            EXPECT_EQ(cks.rate(c, a), 0.0);
        }
    }
    EXPECT_EQ(cks.stationary().null_dim, 2);
    // spontaneous emission restores the downhill rates
    b.spontaneous_emission = true;
    const auto se = build_open_system(two_group_hamiltonian(), {two_group_coupling()}, b);
    const auto cse = diagonal_restriction(se.generator, se.spec);
    EXPECT_GT(cse.rate(2, 0), 0.0);
    EXPECT_EQ(cse.rate(0, 2), 0.0);
    EXPECT_NEAR(cse.rate(2, 0), 2 * kPi * 4 * kPi * 2.0 * 0.36, 1e-10 * cse.rate(2, 0));  // 2 pi J(w) |D|^2, N = 0
}

TEST(DetailedBalance, ConstructedChain) {
    // symmetric base rates times sqrt of Boltzmann ratios
    const std::vector<double> e{0.0, 0.4, 1.1, 2.0};
    const double beta = 1.3;
    RealMatrix w = RealMatrix::Zero(4, 4);
    for (int a = 0; a < 4; ++a) {
        for (int c = 0; c < 4; ++c) {
            if (a != c) w(c, a) = (1.0 + a + c) * std::exp(-0.5 * beta * (e[c] - e[a]));
        }
    }
    const ClassicalKineticSystem cks(level_labels(4), dense_to_sparse(w));
    const auto p = oracle::gibbs(e, beta);
    EXPECT_LE(detailed_balance_residual(cks, p).value, 1e-14);
    const auto st = cks.stationary();
    ASSERT_TRUE(st.distribution.has_value());
    EXPECT_LE((*st.distribution - p).cwiseAbs().maxCoeff(), 1e-12);
    // broken link is located
    RealMatrix bad = w;
    bad(2, 1) *= 3.0;
    const auto r = detailed_balance_residual(ClassicalKineticSystem(level_labels(4), dense_to_sparse(bad)), p);
    EXPECT_GT(r.value, 1e-3);
    EXPECT_TRUE((r.from == 1 && r.to == 2) || (r.from == 2 && r.to == 1));
}

TEST(DetailedBalance, StationaryStateOfThermalSystem) {
    const auto sys = three_level(1.0);
    const auto cks = diagonal_restriction(sys.generator, sys.spec);
    const RealVector p = stationary_state(sys.generator).state->matrix().diagonal().real();
    EXPECT_LE(detailed_balance_residual(cks, p).value, 1e-12);
}

TEST(Gibbs, Values) {
    const auto spec = spectral_decompose(HermitianOperator(diag({0.0, 1.0})));
    EXPECT_NEAR(gibbs_weights(1.0, spec)(0), 0.7310585786, 1e-10);
    EXPECT_NEAR(gibbs_weights(0.0, spec)(0), 0.5, 1e-15);
    EXPECT_THROW(gibbs_weights(std::numeric_limits<double>::infinity(), spec), DomainError);
    EXPECT_THROW(gibbs_weights(-1.0, spec), DomainError);
    // large energies do not overflow
    const auto big = spectral_decompose(HermitianOperator(diag({1000.0, 1001.0})));
    EXPECT_NEAR(gibbs_weights(1.0, big)(0), 0.7310585786, 1e-10);
}

TEST(DecayFit, RecoversRate) {
    const auto sys = two_level(1.0);
    const double a = -(oracle::re_minus(1, 1) + oracle::re_plus(1, 1));
    const auto traj = evolve(sys.generator, DensityMatrix::pure((Vector(2) << 1.0, 1.0).finished()), grid(0.02, 20));
    const auto fit = decay_fit(traj, sys.spec, 0, 1);
    EXPECT_NEAR(fit.rate.real(), a, 1e-8 * std::abs(a));
    EXPECT_NEAR(fit.rate.imag(), 0.0, 1e-8);
    EXPECT_LT(fit.residual, 1e-8);
    const auto flat = evolve(sys.generator, DensityMatrix(diag({0.5, 0.5})), grid(0.02, 5));
    EXPECT_THROW(decay_fit(flat, sys.spec, 0, 1), ValidationError);
}

TEST(Classical, KineticSystemBasics) {
    RealMatrix w(2, 2);
    w << 0.0, 2.0, 1.0, 0.0;  // 0 -> 1 at 1, 1 -> 0 at 2
    const ClassicalKineticSystem cks({"a", "b"}, dense_to_sparse(w));
    EXPECT_EQ(cks.rate(0, 1), 1.0);
    EXPECT_EQ(cks.outflow(1), 2.0);
    const auto st = cks.stationary();
    EXPECT_NEAR((*st.distribution)(0), 2.0 / 3.0, 1e-14);
    const auto p = cks.evolve((RealVector(2) << 1.0, 0.0).finished(), {0.5, 1.0});
    EXPECT_NEAR(p[1](0), 2.0 / 3.0 + (1.0 / 3.0) * std::exp(-3.0), 1e-12);
    EXPECT_NEAR(p[1].sum(), 1.0, 1e-14);
    RealMatrix neg = w;
    neg(1, 0) = -1.0;
    EXPECT_THROW(ClassicalKineticSystem({"a", "b"}, dense_to_sparse(neg)), ValidationError);
    EXPECT_THROW(ClassicalKineticSystem({"a"}, dense_to_sparse(w)), ValidationError);
}

TEST(Classical, QuantumAndClassicalPopulationsAgree) {
    const auto sys = three_level(0.9);
    const auto cks = diagonal_restriction(sys.generator, sys.spec);
    const RealVector p0 = (RealVector(3) << 0.2, 0.3, 0.5).finished();
    const auto times = grid(0.05, 10);
    const auto q = evolve(sys.generator, DensityMatrix(sys.spec.from_eigenbasis(Matrix(p0.cast<Complex>().asDiagonal()))), times);
    const auto c = cks.evolve(p0, times);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const RealVector pq = sys.spec.to_eigenbasis(q.states[k].matrix()).diagonal().real();
        EXPECT_LE((pq - c[k]).cwiseAbs().maxCoeff(), 1e-10);
    }
}
