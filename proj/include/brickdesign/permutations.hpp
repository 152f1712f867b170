#pragma once

// Permutation states of k replicas.
//
// Per-site replica index order is (s_1, r_1, ..., s_k, r_k), ket and bra
// interleaved, big-endian over the 2k qudits of dimension d. The vectorized
// permutation operator |sigma> has entries prod_m delta(s_m, r_sigma(m)).

#include "core.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace brickdesign {

using Permutation = std::vector<int>;

/// All permutations of {0..k-1} in lexicographic one-line order.
inline std::vector<Permutation> all_permutations(int k) {
    if (k < 1 || k > 6) throw BudgetExceeded("permutation enumeration supports 1 <= k <= 6");
    Permutation p(k);
    std::iota(p.begin(), p.end(), 0);
    std::vector<Permutation> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

inline int cycle_count(const Permutation& p) {
    std::vector<bool> seen(p.size(), false);
    int cycles = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (seen[i]) continue;
        ++cycles;
        for (std::size_t j = i; !seen[j]; j = static_cast<std::size_t>(p[j])) seen[j] = true;
    }
    return cycles;
}

inline Permutation inverse(const Permutation& p) {
    Permutation inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv[static_cast<std::size_t>(p[i])] = static_cast<int>(i);
    return inv;
}

/// (a ∘ b)(i) = a(b(i)).
inline Permutation compose(const Permutation& a, const Permutation& b) {
    Permutation c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[static_cast<std::size_t>(b[i])];
    return c;
}

/// Unnormalized vectorized permutation operator of dimension d^{2k}.
inline CVector permutation_state(int d, const Permutation& sigma) {
    const int k = static_cast<int>(sigma.size());
    const auto dim = static_cast<Eigen::Index>(ipow(d, 2 * k));
    CVector v = CVector::Zero(dim);
    // Enumerate the ket digits s, then fix r by r_{sigma(m)} = s_m.
    const auto kets = static_cast<Eigen::Index>(ipow(d, k));
    std::vector<int> s(k), r(k);
    for (Eigen::Index idx = 0; idx < kets; ++idx) {
        Eigen::Index rem = idx;
        for (int m = k - 1; m >= 0; --m) {
            s[m] = static_cast<int>(rem % d);
            rem /= d;
        }
        for (int m = 0; m < k; ++m) r[sigma[m]] = s[m];
        Eigen::Index pos = 0;
        for (int m = 0; m < k; ++m) pos = (pos * d + s[m]) * d + r[m];
        v[pos] = 1.0;
    }
    return v;
}

/// Gram matrix G_{sigma,tau} = <sigma|tau> = d^{#cycles(sigma^{-1} tau)}.
inline RMatrix permutation_gram(int d, const std::vector<Permutation>& perms) {
    const auto n = static_cast<Eigen::Index>(perms.size());
    RMatrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            g(i, j) = std::pow(static_cast<double>(d),
                               cycle_count(compose(inverse(perms[i]), perms[j])));
    return g;
}

}  // namespace brickdesign
