// core.hpp: shared scalar/matrix aliases, error types and small linear-algebra helpers

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stoclim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

// Input violates a documented precondition (non-Hermitian operator, bad density matrix, ...).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A configuration combination that cannot be evaluated (e.g. divergent PV integral).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Two objects that must agree (tables, Bohr sets, dimensions) do not.
struct ConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

namespace linalg {

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }
inline Matrix anticommutator(const Matrix& a, const Matrix& b) { return a * b + b * a; }

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Sum of absolute values of all entries.
inline double entrywise_l1(const Matrix& m) { return m.cwiseAbs().sum(); }

inline double max_asymmetry(const Matrix& m) { return max_abs(m - m.adjoint()); }

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

// Column-stacking vectorisation: vec(X)[r + c*d] = X(r, c).
inline Vector vec(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvec(const Vector& v, Index dim) {
    if (v.size() != dim * dim) throw ConsistencyError("unvec: length is not dim^2");
    return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

inline Index vec_index(Index row, Index col, Index dim) { return row + col * dim; }

// dst += a ⊗ b, skipping zero entries of a (the jump operators are sparse).
inline void kron_add(Matrix& dst, const Matrix& a, const Matrix& b, Complex scale = 1.0) {
    const Index m = b.rows();
    const Index n = b.cols();
    for (Index c = 0; c < a.cols(); ++c) {
        for (Index r = 0; r < a.rows(); ++r) {
            const Complex w = scale * a(r, c);
            if (w == Complex{}) continue;
            dst.block(r * m, c * n, m, n) += w * b;
        }
    }
}

// dst += a ⊗ 1_m
inline void kron_add_identity_right(Matrix& dst, const Matrix& a, Index m, Complex scale = 1.0) {
    for (Index c = 0; c < a.cols(); ++c) {
        for (Index r = 0; r < a.rows(); ++r) {
            const Complex w = scale * a(r, c);
            if (w == Complex{}) continue;
            for (Index k = 0; k < m; ++k) dst(r * m + k, c * m + k) += w;
        }
    }
}

// dst += 1_m ⊗ b
inline void kron_add_identity_left(Matrix& dst, Index m, const Matrix& b, Complex scale = 1.0) {
    const Index n = b.rows();
    for (Index k = 0; k < m; ++k) dst.block(k * n, k * n, n, n) += scale * b;
}

inline RealVector hermitian_eigenvalues(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double min_eigenvalue(const Matrix& m) { return hermitian_eigenvalues(m).minCoeff(); }

// 1/2 ||a - b||_1 for Hermitian a, b.
inline double trace_distance(const Matrix& a, const Matrix& b) {
    return 0.5 * hermitian_eigenvalues(a - b).cwiseAbs().sum();
}

}  // namespace linalg

}  // namespace stoclim
