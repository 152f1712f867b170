#pragma once

// Subleading spectrum of moment channels.
//
// The unit eigenspace is known in closed form (products of permutation
// states), so it is projected out inside every operator application and a
// restarted Krylov-Schur Arnoldi iteration runs on (1 - Π) B (1 - Π).

#include "core.hpp"
#include "perm_dynamics.hpp"
#include "rng.hpp"
#include "subspace.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>

namespace brickdesign {

/// out = B in. `in` and `out` never alias.
using LinearOp = std::function<void(const CVector& in, CVector& out)>;

struct SpectralOptions {
    double tol = 1e-8;
    int max_applications = 10000;
    int krylov_dim = 40;
    int nev = 3;
    double degeneracy_tol = 1e-6;
    double unit_tol = 1e-9;
    std::uint64_t seed = 0x5eed;
};

struct SpectralResult {
    int unit_multiplicity = 0;
    double lambda1 = 0.0;
    std::vector<Complex> lambda1_values;
    std::vector<Complex> ritz_values;  // sorted by decreasing magnitude
    std::vector<double> residuals;     // aligned with ritz_values
    double residual = 0.0;             // worst residual over the leading group
    int iterations = 0;
    int applications = 0;
    bool converged = false;
};

namespace detail {

/// Swaps diagonal entries i and i+1 of the upper triangular T, updating Z.
inline void swap_schur(CMatrix& t, CMatrix& z, Eigen::Index i) {
    const Complex a = t(i, i), b = t(i + 1, i + 1), x = t(i, i + 1);
    const double nv = std::sqrt(std::norm(x) + std::norm(b - a));
    if (nv == 0.0) return;
    const Complex c = x / nv, s = (b - a) / nv;
    Eigen::Matrix2cd q;
    q << c, -std::conj(s), s, std::conj(c);
    t.middleRows(i, 2) = q.adjoint() * t.middleRows(i, 2);
    t.middleCols(i, 2) = t.middleCols(i, 2) * q;
    z.middleCols(i, 2) = z.middleCols(i, 2) * q;
    t(i + 1, i) = 0.0;
}

/// Reorders the Schur form so diagonal magnitudes decrease.
inline void sort_schur(CMatrix& t, CMatrix& z) {
    const Eigen::Index n = t.rows();
    for (Eigen::Index target = 0; target < n; ++target) {
        Eigen::Index best = target;
        for (Eigen::Index i = target + 1; i < n; ++i)
            if (std::abs(t(i, i)) > std::abs(t(best, best))) best = i;
        for (Eigen::Index i = best; i > target; --i) swap_schur(t, z, i - 1);
    }
}

}  // namespace detail

/// Largest eigenvalues of B restricted to the complement of `deflation`.
inline SpectralResult subleading_eigenvalue(const LinearOp& op, const Subspace& deflation,
                                            Eigen::Index dim, const SpectralOptions& opts = {}) {
    if (dim <= 0) throw std::invalid_argument("spectral: empty operator");
    if (deflation.size() == 0) throw std::invalid_argument("spectral: empty deflation basis");
    if (deflation.ambient_dim() != dim) throw std::invalid_argument("spectral: deflation dimension mismatch");

    SpectralResult res;
    CVector tmp(dim);

    // Unit multiplicity check on the deflation vectors.
    for (int i = 0; i < deflation.size(); ++i) {
        const CVector u = deflation.basis_vector(i);
        op(u, tmp);
        ++res.applications;
        if ((tmp - u).norm() <= opts.unit_tol * std::max(1.0, u.norm())) ++res.unit_multiplicity;
    }

    auto apply = [&](const CVector& in, CVector& out) {
        op(in, out);
        ++res.applications;
        deflation.project_out(out);
    };

    const Eigen::Index p = std::min<Eigen::Index>(opts.krylov_dim, dim);
    const Eigen::Index keep = std::max<Eigen::Index>(
        std::min<Eigen::Index>(opts.nev + (p - opts.nev) / 2, p - 1), 1);

    CMatrix v(dim, p + 1);
    CMatrix h = CMatrix::Zero(p + 1, p);
    {
        Rng rng(opts.seed);
        std::normal_distribution<double> normal;
        CVector start(dim);
        for (Eigen::Index i = 0; i < dim; ++i) start[i] = Complex(normal(rng), normal(rng));
        deflation.project_out(start);
        const double nrm = start.norm();
        if (nrm == 0.0) throw std::runtime_error("spectral: deflation removes the whole space");
        v.col(0) = start / nrm;
    }

    Eigen::Index current = 0;  // number of valid columns in the Krylov-Schur relation
    CVector w(dim);
    while (true) {
        ++res.iterations;
        Eigen::Index size = p;
        bool invariant = false;
        for (Eigen::Index j = current; j < p; ++j) {
            apply(v.col(j), w);
            CVector coeff = v.leftCols(j + 1).adjoint() * w;
            w -= v.leftCols(j + 1) * coeff;
            const CVector again = v.leftCols(j + 1).adjoint() * w;
            w -= v.leftCols(j + 1) * again;
            coeff += again;
            h.col(j).head(j + 1) = coeff;
            const double beta = w.norm();
            if (beta <= 1e-13 * std::max(1.0, coeff.norm())) {
                h(j + 1, j) = 0.0;
                size = j + 1;
                invariant = true;
                break;
            }
            h(j + 1, j) = beta;
            v.col(j + 1) = w / beta;
        }

        const CMatrix s = h.topLeftCorner(size, size);
        const Eigen::RowVectorXcd b = h.row(size).head(size);

        Eigen::ComplexEigenSolver<CMatrix> es(s);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(size));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
            return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[c]);
        });
        res.ritz_values.clear();
        res.residuals.clear();
        for (Eigen::Index idx : order) {
            const CVector y = es.eigenvectors().col(idx).normalized();
            res.ritz_values.push_back(es.eigenvalues()[idx]);
            res.residuals.push_back(invariant ? 0.0 : std::abs((b * y)(0, 0)));
        }

        const double top = std::abs(res.ritz_values.front());
        res.lambda1 = top;
        res.lambda1_values.clear();
        res.residual = 0.0;
        const auto wanted = static_cast<std::size_t>(std::min<Eigen::Index>(opts.nev, size));
        for (std::size_t i = 0; i < res.ritz_values.size(); ++i) {
            const bool in_group =
                std::abs(res.ritz_values[i]) >= top - opts.degeneracy_tol * std::max(top, 1e-300);
            if (in_group) res.lambda1_values.push_back(res.ritz_values[i]);
            if (in_group || i < wanted) res.residual = std::max(res.residual, res.residuals[i]);
        }
        res.converged = res.residual <= opts.tol;
        if (res.converged || invariant) {
            res.converged = res.residual <= opts.tol;
            break;
        }
        if (res.applications + (p - keep) > opts.max_applications) break;

        // Krylov-Schur restart: keep the `keep` dominant Schur vectors.
        Eigen::ComplexSchur<CMatrix> schur(s);
        CMatrix t = schur.matrixT();
        CMatrix z = schur.matrixU();
        detail::sort_schur(t, z);
        const CMatrix vk = v.leftCols(size) * z.leftCols(keep);
        const CVector next = v.col(size);
        v.leftCols(keep) = vk;
        v.col(keep) = next;
        h.setZero();
        h.topLeftCorner(keep, keep) = t.topLeftCorner(keep, keep).triangularView<Eigen::Upper>();
        h.row(keep).head(keep) = b * z.leftCols(keep);
        current = keep;
    }
    return res;
}

/// Spectrum of the reduced Case (b) channel with its permutation fixed points deflated.
inline SpectralResult reduced_spectrum(const ReducedChannel& ch, const SpectralOptions& opts = {}) {
    const ProductSpan span = fixed_point_span(ch.basis, ch.L);
    const auto dim = static_cast<Eigen::Index>(ch.dimension());
    LinearOp op = [&ch](const CVector& in, CVector& out) {
        out = in;
        ch.apply(out.data());
    };
    return subleading_eigenvalue(op, span, dim, opts);
}

/// max{d^-2, (1-p)^2} for k = 2 and max{d^-2, ρ_k} otherwise.
inline double predicted_lambda1(int d, double p, int k, double rho_k = -1.0) {
    const double floor = 1.0 / (static_cast<double>(d) * d);
    if (k == 2) return std::max(floor, (1.0 - p) * (1.0 - p));
    if (rho_k < 0.0) throw std::invalid_argument("predicted_lambda1: rho_k required for k != 2");
    return std::max(floor, rho_k);
}

}  // namespace brickdesign
