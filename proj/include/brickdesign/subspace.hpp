#pragma once

// Subspaces used to deflate the unit eigenspace of moment channels. The
// unit eigenvectors of every channel here are products of per-site
// permutation states, so ProductSpan never materializes them.

#include "core.hpp"
#include "kernels.hpp"

#include <vector>

namespace brickdesign {

class Subspace {
public:
    virtual ~Subspace() = default;
    /// Number of spanning vectors (may exceed the rank).
    virtual int size() const = 0;
    virtual Eigen::Index ambient_dim() const = 0;
    /// v <- (1 - Π) v with Π the orthogonal projector onto the span.
    virtual void project_out(CVector& v) const = 0;
    virtual CVector basis_vector(int i) const = 0;
};

/// Span of product vectors u_i = v_i ⊗ ... ⊗ v_i over n equal sites.
class ProductSpan final : public Subspace {
public:
    ProductSpan(int site_dim, int n_sites, std::vector<CVector> site_vectors, double cutoff = 1e-10)
        : site_dim_(site_dim), n_sites_(n_sites), vectors_(std::move(site_vectors)) {
        const auto m = static_cast<Eigen::Index>(vectors_.size());
        if (m == 0) throw std::invalid_argument("ProductSpan: empty vector set");
        for (const auto& v : vectors_)
            if (v.size() != site_dim_) throw std::invalid_argument("ProductSpan: site dimension mismatch");
        gram_.resize(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                gram_(i, j) = std::pow(vectors_[i].dot(vectors_[j]), n_sites_);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(gram_);
        const double top = es.eigenvalues().cwiseAbs().maxCoeff();
        pinv_ = CMatrix::Zero(m, m);
        rank_ = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double ev = es.eigenvalues()[i];
            if (ev > cutoff * top) {
                pinv_ += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint() / ev;
                ++rank_;
            }
        }
    }

    int size() const override { return static_cast<int>(vectors_.size()); }
    int rank() const { return rank_; }
    Eigen::Index ambient_dim() const override {
        return static_cast<Eigen::Index>(ipow(site_dim_, n_sites_));
    }
    const CMatrix& gram() const { return gram_; }

    CVector overlaps(const CVector& v) const {
        CVector b(size());
        for (int i = 0; i < size(); ++i)
            b[i] = kernels::product_overlap(v.data(), site_dim_, n_sites_, vectors_[i]);
        return b;
    }

    /// Coefficients c with Π v = sum_i c_i u_i.
    CVector coefficients(const CVector& v) const { return pinv_ * overlaps(v); }

    /// ||Π v||^2.
    double projected_norm2(const CVector& v) const {
        const CVector b = overlaps(v);
        return (b.adjoint() * pinv_ * b)(0, 0).real();
    }

    void add_combination(CVector& v, const CVector& coeff) const {
        for (int i = 0; i < size(); ++i)
            if (coeff[i] != Complex(0.0))
                kernels::add_product(v.data(), site_dim_, n_sites_, vectors_[i], coeff[i]);
    }

    void project_out(CVector& v) const override {
        const CVector c = coefficients(v);
        add_combination(v, -c);
    }

    CVector basis_vector(int i) const override {
        CVector v = CVector::Zero(ambient_dim());
        kernels::add_product(v.data(), site_dim_, n_sites_, vectors_[static_cast<std::size_t>(i)], 1.0);
        return v;
    }

private:
    int site_dim_;
    int n_sites_;
    std::vector<CVector> vectors_;
    CMatrix gram_;
    CMatrix pinv_;
    int rank_ = 0;
};

/// Span of explicitly stored vectors, orthonormalized on construction.
class DenseSpan final : public Subspace {
public:
    explicit DenseSpan(const std::vector<CVector>& vectors, double cutoff = 1e-10) {
        if (vectors.empty()) throw std::invalid_argument("DenseSpan: empty vector set");
        const Eigen::Index n = vectors.front().size();
        CMatrix a(n, static_cast<Eigen::Index>(vectors.size()));
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            if (vectors[i].size() != n) throw std::invalid_argument("DenseSpan: size mismatch");
            a.col(static_cast<Eigen::Index>(i)) = vectors[i];
        }
        Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU);
        const double top = svd.singularValues()[0];
        Eigen::Index r = 0;
        while (r < svd.singularValues().size() && svd.singularValues()[r] > cutoff * top) ++r;
        q_ = svd.matrixU().leftCols(r);
        count_ = static_cast<int>(vectors.size());
    }

    int size() const override { return count_; }
    Eigen::Index ambient_dim() const override { return q_.rows(); }
    void project_out(CVector& v) const override { v -= q_ * (q_.adjoint() * v); }
    CVector basis_vector(int i) const override { return q_.col(std::min<Eigen::Index>(i, q_.cols() - 1)); }
    const CMatrix& orthonormal_basis() const { return q_; }

private:
    CMatrix q_;
    int count_ = 0;
};

}  // namespace brickdesign
