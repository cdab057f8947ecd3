// operator_core.hpp: Hermitian operators, clustered spectral decomposition, Bohr
// frequencies and the frequency-component maps E_w(X) = sum_r P_{e_r - w} X P_{e_r}

#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "stoclim/core.hpp"

namespace stoclim {

// Dense Hermitian matrix, hbar = 1 energy units.
class HermitianOperator {
public:
    explicit HermitianOperator(Matrix entries) : m_(std::move(entries)) {
        if (m_.rows() != m_.cols() || m_.rows() == 0) {
            throw ValidationError("HermitianOperator: matrix must be square and non-empty");
        }
        const double asym = linalg::max_asymmetry(m_);
        const double scale = m_.norm();
        if (asym > 1e-12 * scale) {
            std::ostringstream os;
            os << "HermitianOperator: matrix is not Hermitian (max |H - H^*| = " << asym << ")";
            throw ValidationError(os.str());
        }
    }

    Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }

private:
    Matrix m_;
};

struct SpectralLevel {
    double energy{0.0};
    Matrix projector;
    Index rank{0};
};

// Eigen-levels of H sorted by increasing energy. The eigenbasis (columns of basis())
// is ordered the same way; matrix units |mu><nu| always refer to this ordering.
class SpectralData {
public:
    SpectralData() = default;

    Index dim() const { return basis_.rows(); }
    const std::vector<SpectralLevel>& levels() const { return levels_; }
    Index num_levels() const { return static_cast<Index>(levels_.size()); }
    const Matrix& basis() const { return basis_; }
    double cluster_tol() const { return tol_; }

    // Level index of eigenbasis column k.
    Index level_of(Index k) const { return level_of_column_[static_cast<std::size_t>(k)]; }
    double basis_energy(Index k) const { return levels_[static_cast<std::size_t>(level_of(k))].energy; }

    std::optional<Index> find_level(double energy) const {
        // levels_ is sorted and gaps exceed tol_, so at most one level matches.
        auto it = std::lower_bound(levels_.begin(), levels_.end(), energy - tol_,
                                   [](const SpectralLevel& l, double e) { return l.energy < e; });
        if (it != levels_.end() && std::abs(it->energy - energy) <= tol_) {
            return static_cast<Index>(it - levels_.begin());
        }
        return std::nullopt;
    }

    bool nondegenerate() const {
        return std::all_of(levels_.begin(), levels_.end(), [](const SpectralLevel& l) { return l.rank == 1; });
    }

    Matrix to_eigenbasis(const Matrix& x) const { return basis_.adjoint() * x * basis_; }
    Matrix from_eigenbasis(const Matrix& x) const { return basis_ * x * basis_.adjoint(); }

    // |mu><nu| in the lab frame, mu and nu being eigenbasis indices.
    Matrix matrix_unit(Index mu, Index nu) const { return basis_.col(mu) * basis_.col(nu).adjoint(); }

private:
    friend SpectralData spectral_decompose(const HermitianOperator&, std::optional<double>);

    std::vector<SpectralLevel> levels_;
    std::vector<Index> level_of_column_;
    Matrix basis_;
    double tol_{0.0};
};

inline double default_cluster_tol(const RealVector& eigenvalues) {
    const double range = eigenvalues.size() ? eigenvalues.maxCoeff() - eigenvalues.minCoeff() : 0.0;
    return range > 0.0 ? 1e-9 * range : 1e-9;
}

// Eigenvalues closer than cluster_tol (chained between neighbours) form one level.
inline SpectralData spectral_decompose(const HermitianOperator& h, std::optional<double> cluster_tol = std::nullopt) {
    const Matrix& m = h.matrix();
    const Index d = h.dim();

    RealVector evals(d);
    Matrix evecs(d, d);

    // Diagonal input keeps the computational basis (spin configurations stay basis vectors).
    const bool diagonal = linalg::max_abs(m - Matrix(m.diagonal().asDiagonal())) == 0.0;
    if (diagonal) {
        std::vector<Index> order(static_cast<std::size_t>(d));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Index a, Index b) { return m(a, a).real() < m(b, b).real(); });
        evecs.setZero();
        for (Index k = 0; k < d; ++k) {
            const Index src = order[static_cast<std::size_t>(k)];
            evals(k) = m(src, src).real();
            evecs(src, k) = 1.0;
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::hermitian_part(m));
        if (es.info() != Eigen::Success) throw ValidationError("spectral_decompose: eigensolver failed");
        evals = es.eigenvalues();
        evecs = es.eigenvectors();
    }

    const double tol = cluster_tol.value_or(default_cluster_tol(evals));
    if (!(tol > 0.0)) throw ValidationError("spectral_decompose: cluster_tol must be positive");

    SpectralData out;
    out.tol_ = tol;
    out.basis_ = evecs;
    out.level_of_column_.resize(static_cast<std::size_t>(d));

    Index start = 0;
    while (start < d) {
        Index stop = start + 1;
        while (stop < d && evals(stop) - evals(stop - 1) <= tol) ++stop;
        SpectralLevel level;
        level.rank = stop - start;
        level.energy = evals.segment(start, level.rank).mean();
        const auto cols = evecs.middleCols(start, level.rank);
        level.projector = cols * cols.adjoint();
        for (Index k = start; k < stop; ++k) {
            out.level_of_column_[static_cast<std::size_t>(k)] = static_cast<Index>(out.levels_.size());
        }
        out.levels_.push_back(std::move(level));
        start = stop;
    }
    return out;
}

// E_w maps level `source` (energy e_r) to level `target` (energy e_r - w).
struct BohrTransition {
    Index source{0};
    Index target{0};
};

struct BohrFrequency {
    double omega{0.0};
    std::vector<BohrTransition> transitions;
};

class BohrSet {
public:
    BohrSet() = default;
    BohrSet(std::vector<BohrFrequency> entries, double tol) : entries_(std::move(entries)), tol_(tol) {}

    const std::vector<BohrFrequency>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    double tol() const { return tol_; }

    std::vector<double> frequencies() const {
        std::vector<double> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.omega);
        return out;
    }

    std::optional<std::size_t> find(double omega) const {
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            if (std::abs(entries_[k].omega - omega) <= tol_) return k;
        }
        return std::nullopt;
    }

    bool contains(double omega) const { return find(omega).has_value(); }

private:
    std::vector<BohrFrequency> entries_;
    double tol_{0.0};
};

// All level differences, deduplicated with the spectral cluster tolerance.
// Sorted ascending; w = 0 is exact and the set is closed under negation.
inline BohrSet bohr_frequencies(const SpectralData& spec) {
    const Index n = spec.num_levels();
    const double tol = spec.cluster_tol();
    const auto& lv = spec.levels();

    struct Diff {
        double value;
        BohrTransition t;
    };
    std::vector<Diff> diffs;
    for (Index r = 0; r < n; ++r) {
        for (Index s = 0; s < r; ++s) {
            diffs.push_back({lv[r].energy - lv[s].energy, {r, s}});
        }
    }
    std::sort(diffs.begin(), diffs.end(), [](const Diff& a, const Diff& b) { return a.value < b.value; });

    std::vector<BohrFrequency> positive;
    std::size_t start = 0;
    while (start < diffs.size()) {
        std::size_t stop = start + 1;
        while (stop < diffs.size() && diffs[stop].value - diffs[stop - 1].value <= tol) ++stop;
        BohrFrequency f;
        double sum = 0.0;
        for (std::size_t k = start; k < stop; ++k) {
            sum += diffs[k].value;
            f.transitions.push_back(diffs[k].t);
        }
        f.omega = sum / static_cast<double>(stop - start);
        positive.push_back(std::move(f));
        start = stop;
    }

    std::vector<BohrFrequency> all;
    all.reserve(2 * positive.size() + 1);
    for (auto it = positive.rbegin(); it != positive.rend(); ++it) {
        BohrFrequency neg;
        neg.omega = -it->omega;
        for (const auto& t : it->transitions) neg.transitions.push_back({t.target, t.source});
        all.push_back(std::move(neg));
    }
    if (n > 0) {
        BohrFrequency zero;
        for (Index r = 0; r < n; ++r) zero.transitions.push_back({r, r});
        all.push_back(std::move(zero));
    }
    for (auto& p : positive) all.push_back(std::move(p));
    return BohrSet(std::move(all), tol);
}

inline void check_dim(const Matrix& x, const SpectralData& spec, const char* what) {
    if (x.rows() != spec.dim() || x.cols() != spec.dim()) {
        std::ostringstream os;
        os << what << ": dimension mismatch (" << x.rows() << "x" << x.cols() << " vs system dim " << spec.dim() << ")";
        throw ValidationError(os.str());
    }
}

// E_w(X); the zero matrix when w is not a Bohr frequency.
inline Matrix e_omega(const Matrix& x, double omega, const SpectralData& spec) {
    check_dim(x, spec, "e_omega");
    Matrix out = Matrix::Zero(spec.dim(), spec.dim());
    const auto& lv = spec.levels();
    for (Index r = 0; r < spec.num_levels(); ++r) {
        const auto target = spec.find_level(lv[r].energy - omega);
        if (!target) continue;
        out.noalias() += lv[*target].projector * x * lv[r].projector;
    }
    return out;
}

// Same map evaluated through a precomputed Bohr-set entry.
inline Matrix e_omega(const Matrix& x, const BohrFrequency& freq, const SpectralData& spec) {
    check_dim(x, spec, "e_omega");
    Matrix out = Matrix::Zero(spec.dim(), spec.dim());
    const auto& lv = spec.levels();
    for (const auto& t : freq.transitions) {
        out.noalias() += lv[t.target].projector * x * lv[t.source].projector;
    }
    return out;
}

struct CommutantReport {
    bool member{false};
    double residual{0.0};  // max_r of the entrywise 1-norm of [X, P_r]
};

inline CommutantReport commutant_membership(const Matrix& x, const SpectralData& spec, double tol) {
    check_dim(x, spec, "commutant_membership");
    double worst = 0.0;
    for (const auto& l : spec.levels()) {
        worst = std::max(worst, linalg::entrywise_l1(linalg::commutator(x, l.projector)));
    }
    return {worst <= tol, worst};
}

}  // namespace stoclim
