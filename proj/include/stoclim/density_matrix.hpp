// density_matrix.hpp: validated density matrices

#pragma once

#include <sstream>
#include <utility>

#include "stoclim/core.hpp"

namespace stoclim {

struct DensityTolerance {
    double hermitian{1e-12};
    double trace{1e-12};
    double eigenvalue{1e-10};
};

class DensityMatrix {
public:
    explicit DensityMatrix(Matrix entries, const DensityTolerance& tol = {}) : m_(std::move(entries)) {
        if (m_.rows() != m_.cols() || m_.rows() == 0) {
            throw ValidationError("DensityMatrix: matrix must be square and non-empty");
        }
        const double asym = linalg::max_asymmetry(m_);
        if (asym > tol.hermitian) {
            std::ostringstream os;
            os << "DensityMatrix: not Hermitian (max |rho - rho^*| = " << asym << ")";
            throw ValidationError(os.str());
        }
        const Complex tr = m_.trace();
        if (std::abs(tr - 1.0) > tol.trace) {
            std::ostringstream os;
            os.precision(17);
            os << "DensityMatrix: trace is " << tr.real() << (tr.imag() < 0 ? "-" : "+") << std::abs(tr.imag())
               << "i, expected 1";
            throw ValidationError(os.str());
        }
        const double lo = linalg::min_eigenvalue(m_);
        if (lo < -tol.eigenvalue) {
            std::ostringstream os;
            os << "DensityMatrix: negative eigenvalue " << lo;
            throw ValidationError(os.str());
        }
    }

    // No checks; for intermediate integrator states.
    static DensityMatrix unchecked(Matrix entries) {
        DensityMatrix out;
        out.m_ = std::move(entries);
        return out;
    }

    Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    Complex operator()(Index r, Index c) const { return m_(r, c); }

    static DensityMatrix pure(const Vector& psi) {
        const Vector v = psi / psi.norm();
        return DensityMatrix(v * v.adjoint(), {1e-12, 1e-12, 1e-10});
    }

    static DensityMatrix maximally_mixed(Index dim) {
        return DensityMatrix(Matrix::Identity(dim, dim) / static_cast<double>(dim));
    }

private:
    DensityMatrix() = default;
    Matrix m_;
};

}  // namespace stoclim
