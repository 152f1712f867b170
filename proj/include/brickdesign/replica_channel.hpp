#pragma once

// Exact evolution of the vectorized k-th moment under the averaged channel.
//
// A replica state lives on 2L sites of dimension d^{2k}. Inside a site the
// 2k qudits are ordered (s_1, r_1, ..., s_k, r_k), so the whole vector is
// also a register of 4kL qudits of dimension d and the folded gate
// (U ⊗ U*)^{⊗k} reduces to 2k two-qudit kernels per gate.

#include "core.hpp"
#include "gates.hpp"
#include "kernels.hpp"
#include "permutations.hpp"
#include "series.hpp"
#include "statevec.hpp"
#include "theory.hpp"

#include <functional>
#include <optional>

namespace brickdesign {

inline constexpr std::uint64_t kMaxReplicaAmplitudes = std::uint64_t{1} << 30;

struct ReplicaState {
    int d = 2;
    int L = 1;
    int k = 1;
    CVector amplitudes;

    int n_sites() const { return 2 * L; }
    int site_dim() const { return static_cast<int>(ipow(d, 2 * k)); }
};

inline std::uint64_t replica_amplitude_count(int d, int L, int k) {
    return ipow(d, 4 * k * L);
}

inline void check_replica_budget(int d, int L, int k) {
    std::uint64_t n = 0;
    try {
        n = replica_amplitude_count(d, L, k);
    } catch (const BudgetExceeded&) {
        n = UINT64_MAX;
    }
    if (n > kMaxReplicaAmplitudes)
        throw BudgetExceeded("replica state needs d^(4kL) = " + std::to_string(d) + "^" +
                             std::to_string(4 * k * L) +
                             " amplitudes (limit 2^30); use the reduced permutation dynamics");
}

/// (|ψ><ψ|)^{⊗k} vectorized in the interleaved per-site order.
inline ReplicaState replica_initial(const PureState& psi, int k) {
    if (psi.n_sites % 2 != 0) throw std::invalid_argument("replica_initial: odd number of sites");
    const int d = psi.d;
    const int L = psi.n_sites / 2;
    check_replica_budget(d, L, k);
    ReplicaState rho{d, L, k, CVector(static_cast<Eigen::Index>(replica_amplitude_count(d, L, k)))};
    const int n = psi.n_sites;
    const int q = 2 * k;
    const auto site_dim = static_cast<std::uint64_t>(rho.site_dim());

    // Depth-first over sites, carrying the partial ket/bra indices of each replica.
    std::vector<std::uint64_t> partial(static_cast<std::size_t>(q) * (n + 1), 0);
    std::function<void(int, std::uint64_t)> descend = [&](int site, std::uint64_t prefix) {
        const std::uint64_t* cur = &partial[static_cast<std::size_t>(site) * q];
        if (site == n) {
            Complex v = 1.0;
            for (int m = 0; m < k; ++m)
                v *= psi.amplitudes[static_cast<Eigen::Index>(cur[2 * m])] *
                     std::conj(psi.amplitudes[static_cast<Eigen::Index>(cur[2 * m + 1])]);
            rho.amplitudes[static_cast<Eigen::Index>(prefix)] = v;
            return;
        }
        std::uint64_t* next = &partial[static_cast<std::size_t>(site + 1) * q];
        for (std::uint64_t c = 0; c < site_dim; ++c) {
            std::uint64_t rem = c;
            for (int j = q - 1; j >= 0; --j) {
                next[j] = cur[j] * d + rem % d;
                rem /= d;
            }
            descend(site + 1, prefix * site_dim + c);
        }
    };
    descend(0, 0);
    return rho;
}

enum class TwirlKind { PauliTwirl, HaarTwirl };

struct TwirlOp {
    int d = 2;
    int k = 1;
    TwirlKind kind = TwirlKind::HaarTwirl;
    CMatrix matrix;
};

/// (u ⊗ u*)^{⊗k} as a d^{2k} x d^{2k} matrix in the interleaved order.
inline CMatrix folded_one_site(const CMatrix& u, int k) {
    const CMatrix pair = kron(u, u.conjugate());
    CMatrix out = pair;
    for (int m = 1; m < k; ++m) out = kron(out, pair);
    return out;
}

/// Orthogonal projector onto span{|σ>} built from the (pseudo-)inverse Gram matrix.
inline CMatrix permutation_projector(int d, int k, double cutoff = 1e-10) {
    const auto perms = all_permutations(k);
    const auto dim = static_cast<Eigen::Index>(ipow(d, 2 * k));
    CMatrix p(dim, static_cast<Eigen::Index>(perms.size()));
    for (std::size_t i = 0; i < perms.size(); ++i)
        p.col(static_cast<Eigen::Index>(i)) = permutation_state(d, perms[i]);
    const RMatrix g = permutation_gram(d, perms);
    Eigen::SelfAdjointEigenSolver<RMatrix> es(g);
    const double top = es.eigenvalues().maxCoeff();
    RMatrix ginv = RMatrix::Zero(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        if (es.eigenvalues()[i] > cutoff * top)
            ginv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / es.eigenvalues()[i];
    return p * ginv.cast<Complex>() * p.adjoint();
}

inline TwirlOp build_twirl(int d, int k, TwirlKind kind) {
    if (d < 2 || k < 1) throw std::invalid_argument("build_twirl: need d >= 2 and k >= 1");
    if (ipow(d, 2 * k) > 4096) throw BudgetExceeded("build_twirl: d^(2k) exceeds 4096");
    TwirlOp op{d, k, kind, {}};
    if (kind == TwirlKind::PauliTwirl) {
        if (d != 2) throw std::invalid_argument("build_twirl: Pauli twirl needs d = 2");
        const OneSiteSet set = pauli_set();
        const auto dim = static_cast<Eigen::Index>(ipow(2, 2 * k));
        op.matrix = CMatrix::Zero(dim, dim);
        for (std::size_t i = 0; i < set.elements.size(); ++i)
            op.matrix += set.weights[i] * folded_one_site(set.elements[i], k);
    } else {
        op.matrix = permutation_projector(d, k);
    }
    return op;
}

enum class TwirlPlacement { None, Boundary, EveryLeg };

/// One time step of the replica channel for a fixed brickwork.
struct ReplicaChannel {
    CircuitSpec circuit;
    int k = 1;
    TwirlPlacement placement = TwirlPlacement::None;
    std::optional<TwirlOp> twirl;

    void validate() const {
        validate_spec(circuit);
        if (placement != TwirlPlacement::None) {
            if (!twirl) throw std::invalid_argument("replica channel: placement requires a twirl");
            if (twirl->d != circuit.d || twirl->k != k)
                throw std::invalid_argument("replica channel: twirl dimension mismatch");
        }
    }
};

namespace detail {

inline void apply_twirl_site(Complex* data, const ReplicaState& shape, const TwirlOp& tw, int site) {
    kernels::apply_one_site(data, shape.site_dim(), shape.n_sites(), site, tw.matrix);
}

inline void apply_folded_gate(Complex* data, int d, int L, int k, const CMatrix& u, const CMatrix& uc,
                              int site) {
    const int q = 2 * k;
    const int nq = 2 * L * q;
    for (int m = 0; m < k; ++m) {
        kernels::apply_two_site(data, d, nq, site * q + 2 * m, (site + 1) * q + 2 * m, u);
        kernels::apply_two_site(data, d, nq, site * q + 2 * m + 1, (site + 1) * q + 2 * m + 1, uc);
    }
}

}  // namespace detail

/// Applies one step of the channel to a raw amplitude array of a replica register.
inline void apply_replica_step(Complex* data, const ReplicaState& shape, const ReplicaChannel& ch) {
    const int d = shape.d, L = shape.L, k = shape.k;
    if (ch.placement == TwirlPlacement::Boundary)
        detail::apply_twirl_site(data, shape, *ch.twirl, 2 * L - 1);
    auto layer = [&](const std::vector<Gate>& gates, int first) {
        for (std::size_t n = 0; n < gates.size(); ++n) {
            const int site = first + 2 * static_cast<int>(n);
            if (ch.placement == TwirlPlacement::EveryLeg) {
                detail::apply_twirl_site(data, shape, *ch.twirl, site);
                detail::apply_twirl_site(data, shape, *ch.twirl, site + 1);
            }
            detail::apply_folded_gate(data, d, L, k, gates[n].matrix, gates[n].matrix.conjugate(),
                                      site);
            if (ch.placement == TwirlPlacement::EveryLeg) {
                detail::apply_twirl_site(data, shape, *ch.twirl, site);
                detail::apply_twirl_site(data, shape, *ch.twirl, site + 1);
            }
        }
    };
    layer(ch.circuit.gates_odd, 1);
    layer(ch.circuit.gates_even, 0);
}

inline void evolve_step(ReplicaState& rho, const ReplicaChannel& ch) {
    if (rho.d != ch.circuit.d || rho.L != ch.circuit.L || rho.k != ch.k)
        throw std::invalid_argument("evolve_step: replica state does not match the channel");
    apply_replica_step(rho.amplitudes.data(), rho, ch);
}

/// tr[ρ^2], the frame potential.
inline double purity(const ReplicaState& rho) { return rho.amplitudes.squaredNorm(); }

inline double delta2(const ReplicaState& rho) {
    return purity(rho) / theory::haar_frame_potential(rho.d, rho.L, rho.k) - 1.0;
}

/// tr ρ: overlap with the identity permutation state on every site.
inline Complex replica_trace(const ReplicaState& rho) {
    Permutation id(static_cast<std::size_t>(rho.k));
    std::iota(id.begin(), id.end(), 0);
    return kernels::product_overlap(rho.amplitudes.data(), rho.site_dim(), rho.n_sites(),
                                    permutation_state(rho.d, id));
}

/// max |ρ - ρ†| entrywise, via the ket/bra swap on every replica.
inline double hermiticity_defect(const ReplicaState& rho) {
    const int sd = rho.site_dim();
    const int q = 2 * rho.k;
    std::vector<std::uint64_t> swap_table(static_cast<std::size_t>(sd));
    for (int c = 0; c < sd; ++c) {
        std::vector<int> digits(static_cast<std::size_t>(q));
        int rem = c;
        for (int j = q - 1; j >= 0; --j) {
            digits[j] = rem % rho.d;
            rem /= rho.d;
        }
        for (int m = 0; m < rho.k; ++m) std::swap(digits[2 * m], digits[2 * m + 1]);
        std::uint64_t s = 0;
        for (int j = 0; j < q; ++j) s = s * rho.d + digits[j];
        swap_table[static_cast<std::size_t>(c)] = s;
    }
    double defect = 0.0;
    const auto n = static_cast<std::uint64_t>(rho.amplitudes.size());
    const int sites = rho.n_sites();
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t rem = i, j = 0, mult = 1;
        for (int s = 0; s < sites; ++s) {
            j += swap_table[rem % sd] * mult;
            rem /= sd;
            mult *= sd;
        }
        defect = std::max(defect, std::abs(rho.amplitudes[static_cast<Eigen::Index>(i)] -
                                           std::conj(rho.amplitudes[static_cast<Eigen::Index>(j)])));
    }
    return defect;
}

/// Normalized k=2 site vectors: |○> = |id>/d, |●> = (d|□> - |○>)/sqrt(d^2-1).
inline CVector circle_state(int d) { return permutation_state(d, {0, 1}) / static_cast<double>(d); }
inline CVector black_state(int d) {
    const CVector square = permutation_state(d, {1, 0}) / static_cast<double>(d);
    return (d * square - circle_state(d)) / std::sqrt(d * d - 1.0);
}

/// O_x = <○ ... ● (at x) ... ○ | ρ> for k = 2.
inline Complex magnon_overlap(const ReplicaState& rho, int x) {
    if (rho.k != 2) throw std::invalid_argument("magnon_overlap: requires k = 2");
    if (x < 0 || x >= rho.n_sites()) throw std::out_of_range("magnon_overlap: site out of range");
    const CVector circle = circle_state(rho.d);
    const CVector black = black_state(rho.d);
    CVector work = rho.amplitudes;
    int sites = rho.n_sites();
    const int sd = rho.site_dim();
    // Contract sites from the right one at a time.
    for (int s = sites - 1; s >= 0; --s) {
        const CVector& v = (s == x) ? black : circle;
        const Eigen::Index rows = work.size() / sd;
        CVector next(rows);
        for (Eigen::Index r = 0; r < rows; ++r) next[r] = v.dot(work.segment(r * sd, sd));
        work.swap(next);
    }
    return work[0];
}

/// Δ2 and F series of the replica channel from ψ0, rows t = 0..t_max.
inline std::vector<MomentRow> replica_series(const ReplicaChannel& ch, const PureState& psi0, int t_max,
                                             const std::function<void(int)>& progress = {}) {
    ch.validate();
    ReplicaState rho = replica_initial(psi0, ch.k);
    std::vector<MomentRow> rows;
    const double fh = theory::haar_frame_potential(rho.d, rho.L, rho.k);
    for (int t = 0; t <= t_max; ++t) {
        if (t > 0) evolve_step(rho, ch);
        const double f = purity(rho);
        rows.push_back(MomentRow{t, ch.k, f, 0.0, f / fh - 1.0, "replica", 0});
        if (progress) progress(t);
    }
    return rows;
}

}  // namespace brickdesign
