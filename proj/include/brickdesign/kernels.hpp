#pragma once

// Dense tensor kernels over registers of equal-dimension sites.
//
// Layout: a register of n sites of dimension D is a flat vector of length
// D^n, big-endian: site 0 is the most significant digit. Every module
// (pure states, replica states, reduced states) shares this layout.

#include "core.hpp"

#include <array>
#include <vector>

namespace brickdesign::kernels {

inline std::uint64_t stride_of(int dim, int n_sites, int site) {
    return ipow(static_cast<std::uint64_t>(dim), n_sites - 1 - site);
}

/// Applies a dim x dim matrix to one site in place.
inline void apply_one_site(Complex* data, int dim, int n_sites, int site, const CMatrix& m) {
    const std::uint64_t total = ipow(dim, n_sites);
    const std::uint64_t s = stride_of(dim, n_sites, site);
    const std::uint64_t outer = total / (s * dim);
    const std::size_t dd = static_cast<std::size_t>(dim);

    // Row-major copy so the inner loop walks contiguous memory.
    std::vector<Complex> mat(dd * dd);
    for (std::size_t r = 0; r < dd; ++r)
        for (std::size_t c = 0; c < dd; ++c) mat[r * dd + c] = m(r, c);

    std::vector<Complex> in(dd);
    for (std::uint64_t o = 0; o < outer; ++o) {
        Complex* block = data + o * s * dim;
        for (std::uint64_t i = 0; i < s; ++i) {
            for (std::size_t a = 0; a < dd; ++a) in[a] = block[i + a * s];
            for (std::size_t r = 0; r < dd; ++r) {
                Complex acc = 0.0;
                const Complex* row = &mat[r * dd];
                for (std::size_t c = 0; c < dd; ++c) acc += row[c] * in[c];
                block[i + r * s] = acc;
            }
        }
    }
}

namespace detail {

template <int DD>
inline void two_site_loop(Complex* data, std::uint64_t outer, std::uint64_t mid,
                          std::uint64_t inner, std::uint64_t s_hi, std::uint64_t s_lo, int dim,
                          const std::uint64_t* offsets, const Complex* mat) {
    std::array<Complex, DD> in;
    for (std::uint64_t o = 0; o < outer; ++o)
        for (std::uint64_t m = 0; m < mid; ++m) {
            Complex* base = data + o * s_hi * dim + m * s_lo * dim;
            for (std::uint64_t i = 0; i < inner; ++i) {
                Complex* b = base + i;
                for (int a = 0; a < DD; ++a) in[a] = b[offsets[a]];
                for (int r = 0; r < DD; ++r) {
                    Complex acc = 0.0;
                    const Complex* row = mat + r * DD;
                    for (int c = 0; c < DD; ++c) acc += row[c] * in[c];
                    b[offsets[r]] = acc;
                }
            }
        }
}

}  // namespace detail

/// Applies a dim^2 x dim^2 matrix to the ordered site pair (p, q) in place.
/// The matrix index is a*dim + b with a the digit of site p and b of site q;
/// p and q need not be adjacent and p may exceed q.
inline void apply_two_site(Complex* data, int dim, int n_sites, int p, int q, const CMatrix& m) {
    if (p == q) throw std::invalid_argument("apply_two_site: sites must differ");
    const std::uint64_t total = ipow(dim, n_sites);
    const std::uint64_t sp = stride_of(dim, n_sites, p);
    const std::uint64_t sq = stride_of(dim, n_sites, q);
    const std::uint64_t s_hi = std::max(sp, sq);
    const std::uint64_t s_lo = std::min(sp, sq);
    const std::uint64_t outer = total / (s_hi * dim);
    const std::uint64_t mid = s_hi / (s_lo * dim);
    const std::uint64_t inner = s_lo;
    const int dd = dim * dim;

    std::vector<std::uint64_t> offsets(dd);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) offsets[a * dim + b] = a * sp + b * sq;
    std::vector<Complex> mat(static_cast<std::size_t>(dd) * dd);
    for (int r = 0; r < dd; ++r)
        for (int c = 0; c < dd; ++c) mat[r * dd + c] = m(r, c);

    switch (dd) {
        case 4:
            detail::two_site_loop<4>(data, outer, mid, inner, s_hi, s_lo, dim, offsets.data(),
                                     mat.data());
            return;
        case 9:
            detail::two_site_loop<9>(data, outer, mid, inner, s_hi, s_lo, dim, offsets.data(),
                                     mat.data());
            return;
        default:
            break;
    }
    std::vector<Complex> in(dd);
    for (std::uint64_t o = 0; o < outer; ++o)
        for (std::uint64_t mm = 0; mm < mid; ++mm) {
            Complex* base = data + o * s_hi * dim + mm * s_lo * dim;
            for (std::uint64_t i = 0; i < inner; ++i) {
                Complex* b = base + i;
                for (int a = 0; a < dd; ++a) in[a] = b[offsets[a]];
                for (int r = 0; r < dd; ++r) {
                    Complex acc = 0.0;
                    for (int c = 0; c < dd; ++c) acc += mat[r * dd + c] * in[c];
                    b[offsets[r]] = acc;
                }
            }
        }
}

/// Overlap <v ⊗ v ⊗ ... ⊗ v | data> with one copy of v per site.
inline Complex product_overlap(const Complex* data, int dim, int n_sites, const CVector& v) {
    std::uint64_t len = ipow(dim, n_sites);
    std::vector<Complex> cur(data, data + len);
    std::vector<Complex> next;
    for (int s = 0; s < n_sites; ++s) {
        const std::uint64_t rows = len / dim;
        next.assign(rows, Complex(0.0));
        for (std::uint64_t r = 0; r < rows; ++r) {
            Complex acc = 0.0;
            const Complex* src = &cur[r * dim];
            for (int b = 0; b < dim; ++b) acc += std::conj(v[b]) * src[b];
            next[r] = acc;
        }
        cur.swap(next);
        len = rows;
    }
    return cur[0];
}

/// data += coeff * (v ⊗ ... ⊗ v), without materializing the product vector.
inline void add_product(Complex* data, int dim, int n_sites, const CVector& v, Complex coeff) {
    const int head_sites = n_sites / 2;
    const int tail_sites = n_sites - head_sites;
    auto build = [&](int sites) {
        std::vector<Complex> out{Complex(1.0)};
        for (int s = 0; s < sites; ++s) {
            std::vector<Complex> grown(out.size() * dim);
            for (std::size_t i = 0; i < out.size(); ++i)
                for (int b = 0; b < dim; ++b) grown[i * dim + b] = out[i] * v[b];
            out.swap(grown);
        }
        return out;
    };
    const std::vector<Complex> head = build(head_sites);
    std::vector<Complex> tail = build(tail_sites);
    for (auto& x : tail) x *= coeff;
    const std::size_t tl = tail.size();
    for (std::size_t h = 0; h < head.size(); ++h) {
        Complex* row = data + h * tl;
        const Complex hv = head[h];
        for (std::size_t i = 0; i < tl; ++i) row[i] += hv * tail[i];
    }
}

}  // namespace brickdesign::kernels
