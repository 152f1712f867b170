#pragma once

// Case (b) dynamics restricted to the span of permutation states.
//
// Twirling every gate leg projects each site onto span{|σ>}, so the
// channel acts on 2L sites of dimension m = rank of the permutation Gram
// matrix through the averaged gate W = (E ⊗ E)† (U ⊗ U*)^{⊗k} (E ⊗ E),
// where E is an isometric embedding of the reduced site space.

#include "core.hpp"
#include "gates.hpp"
#include "kernels.hpp"
#include "permutations.hpp"
#include "replica_channel.hpp"
#include "series.hpp"
#include "subspace.hpp"
#include "theory.hpp"

#include <functional>

namespace brickdesign {

enum class BasisConvention {
    Lowdin,         // symmetric orthogonalization E = P G^{-1/2}
    IdentityFirst,  // Gram-Schmidt in lexicographic order; {○, ●} for k = 2
};

struct PermBasis {
    int d = 2;
    int k = 1;
    int m = 1;
    BasisConvention convention = BasisConvention::Lowdin;
    std::vector<Permutation> perms;
    RMatrix gram;
    CMatrix embed;  // d^{2k} x m, orthonormal columns

    /// Reduced coordinates E†|σ> of every permutation state.
    std::vector<CVector> permutation_coordinates() const {
        std::vector<CVector> out;
        for (const auto& p : perms) out.push_back(embed.adjoint() * permutation_state(d, p));
        return out;
    }

    /// E†|id> / |id|, the normalized identity state.
    CVector identity_coordinates() const {
        return embed.adjoint() * permutation_state(d, perms.front()) /
               std::sqrt(std::pow(static_cast<double>(d), k));
    }
};

inline PermBasis build_perm_basis(int d, int k, BasisConvention conv = BasisConvention::Lowdin,
                                  double cutoff = 1e-10) {
    if (d < 2) throw std::invalid_argument("perm basis: d must be >= 2");
    if (ipow(d, 2 * k) > 4096) throw BudgetExceeded("perm basis: d^(2k) exceeds 4096");
    PermBasis b;
    b.d = d;
    b.k = k;
    b.convention = conv;
    b.perms = all_permutations(k);
    b.gram = permutation_gram(d, b.perms);
    const auto n = static_cast<Eigen::Index>(b.perms.size());
    const auto dim = static_cast<Eigen::Index>(ipow(d, 2 * k));
    CMatrix p(dim, n);
    for (Eigen::Index i = 0; i < n; ++i) p.col(i) = permutation_state(d, b.perms[static_cast<std::size_t>(i)]);

    if (conv == BasisConvention::Lowdin) {
        Eigen::SelfAdjointEigenSolver<RMatrix> es(b.gram);
        const double top = es.eigenvalues().maxCoeff();
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < n; ++i)
            if (es.eigenvalues()[i] > cutoff * top) keep.push_back(i);
        b.m = static_cast<int>(keep.size());
        if (b.m == n) {
            const RMatrix inv_sqrt = es.eigenvectors() *
                                     es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                     es.eigenvectors().transpose();
            b.embed = p * inv_sqrt.cast<Complex>();
        } else {
            RMatrix vr(n, b.m);
            for (int j = 0; j < b.m; ++j)
                vr.col(j) = es.eigenvectors().col(keep[static_cast<std::size_t>(j)]) /
                            std::sqrt(es.eigenvalues()[keep[static_cast<std::size_t>(j)]]);
            b.embed = p * vr.cast<Complex>();
        }
    } else {
        std::vector<CVector> cols;
        for (Eigen::Index i = 0; i < n; ++i) {
            CVector v = p.col(i);
            const double scale = v.norm();
            for (const auto& c : cols) v -= c * c.dot(v);
            for (const auto& c : cols) v -= c * c.dot(v);
            if (v.norm() > std::sqrt(cutoff) * scale) cols.push_back(v / v.norm());
        }
        b.m = static_cast<int>(cols.size());
        b.embed.resize(dim, b.m);
        for (int j = 0; j < b.m; ++j) b.embed.col(j) = cols[static_cast<std::size_t>(j)];
    }
    return b;
}

struct AveragedGate {
    PermBasis basis;
    CMatrix matrix;  // m^2 x m^2, index i*m + j with i the left site
};

/// Projects a two-site replica vector (d^{2k} x d^{2k} after reshape) to m^2 coordinates.
inline CVector project_pair(const PermBasis& b, const CVector& v) {
    const auto sd = b.embed.rows();
    const Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mat(
        v.data(), sd, sd);
    const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r =
        b.embed.adjoint() * mat * b.embed.conjugate();
    return Eigen::Map<const CVector>(r.data(), r.size());
}

inline AveragedGate average_gate(const Gate& g, const PermBasis& b) {
    if (g.d != b.d) throw std::invalid_argument("average_gate: dimension mismatch");
    const int m = b.m;
    const auto sd = b.embed.rows();
    AveragedGate w{b, CMatrix(m * m, m * m)};
    const CMatrix uc = g.matrix.conjugate();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            CVector v(sd * sd);
            for (Eigen::Index a = 0; a < sd; ++a) v.segment(a * sd, sd) = b.embed(a, i) * b.embed.col(j);
            detail::apply_folded_gate(v.data(), b.d, 1, b.k, g.matrix, uc, 0);
            w.matrix.col(i * m + j) = project_pair(b, v);
        }
    return w;
}

/// The k = 2 averaged dual-unitary gate in the {○, ●} basis with entangling power p.
inline AveragedGate averaged_du_gate(int d, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("averaged_du_gate: p must lie in [0,1]");
    const double s = p / std::sqrt(d * d - 1.0);
    CMatrix w(4, 4);
    w << 1, 0, 0, 0,
         0, 0, 1 - p, s,
         0, 1 - p, 0, s,
         0, s, s, 1 - 2 * p / (d * d - 1.0);
    return AveragedGate{build_perm_basis(d, 2, BasisConvention::IdentityFirst), w};
}

struct ReducedState {
    PermBasis basis;
    int L = 1;
    CVector amplitudes;  // m^{2L}

    int n_sites() const { return 2 * L; }
};

enum class InitialKind { AllZero, BellPairs };

/// Twirled (|ψ0><ψ0|)^{⊗k} in reduced coordinates, built pair by pair.
inline ReducedState reduced_initial(InitialKind kind, const PermBasis& b, int L) {
    if (L < 1) throw std::invalid_argument("reduced_initial: L must be >= 1");
    const PureState pair = kind == InitialKind::AllZero ? initial_all_zero(b.d, 1) : initial_bell_pairs(b.d, 1);
    const ReplicaState rho = replica_initial(pair, b.k);
    const CVector pv = project_pair(b, rho.amplitudes);
    CVector amps = pv;
    for (int n = 1; n < L; ++n) {
        CVector grown(amps.size() * pv.size());
        for (Eigen::Index i = 0; i < amps.size(); ++i) grown.segment(i * pv.size(), pv.size()) = amps[i] * pv;
        amps = std::move(grown);
    }
    return ReducedState{b, L, std::move(amps)};
}

/// Open brickwork of averaged gates; the same W on every bond unless overridden.
struct ReducedChannel {
    PermBasis basis;
    int L = 1;
    std::vector<CMatrix> even;  // L matrices
    std::vector<CMatrix> odd;   // L-1 matrices

    std::uint64_t dimension() const { return ipow(static_cast<std::uint64_t>(basis.m), 2 * L); }

    void apply(Complex* data) const {
        const int m = basis.m;
        const int n = 2 * L;
        for (std::size_t i = 0; i < odd.size(); ++i) {
            const int s = 1 + 2 * static_cast<int>(i);
            kernels::apply_two_site(data, m, n, s, s + 1, odd[i]);
        }
        for (std::size_t i = 0; i < even.size(); ++i) {
            const int s = 2 * static_cast<int>(i);
            kernels::apply_two_site(data, m, n, s, s + 1, even[i]);
        }
    }
};

inline constexpr std::uint64_t kMaxReducedAmplitudes = std::uint64_t{1} << 28;

inline ReducedChannel uniform_reduced_channel(const AveragedGate& w, int L) {
    if (L < 1) throw std::invalid_argument("reduced channel: L must be >= 1");
    ReducedChannel ch{w.basis, L, std::vector<CMatrix>(static_cast<std::size_t>(L), w.matrix),
                      std::vector<CMatrix>(static_cast<std::size_t>(L - 1), w.matrix)};
    if (ch.dimension() > kMaxReducedAmplitudes)
        throw BudgetExceeded("reduced state needs m^(2L) = " + std::to_string(w.basis.m) + "^" +
                             std::to_string(2 * L) + " amplitudes (limit 2^28)");
    return ch;
}

inline void evolve_reduced(ReducedState& s, const ReducedChannel& ch, int steps = 1) {
    if (s.L != ch.L || s.basis.m != ch.basis.m)
        throw std::invalid_argument("evolve_reduced: state does not match the channel");
    for (int i = 0; i < steps; ++i) ch.apply(s.amplitudes.data());
}

/// The unit eigenspace span{c_σ^{⊗2L}} of the reduced channel.
inline ProductSpan fixed_point_span(const PermBasis& b, int L) {
    return ProductSpan(b.m, 2 * L, b.permutation_coordinates());
}

/// Δ2 and F series for Case (b) in the reduced space. The distance to the
/// Haar moment is evolved directly, δ_t = B^t (1 - Π) ρ_0, so small Δ2 is
/// not lost to cancellation in F/F_H - 1. Row t = 0 is the untwirled pure
/// state (F = 1).
inline std::vector<MomentRow> reduced_series(const ReducedChannel& ch, InitialKind kind, int t_max) {
    const int d = ch.basis.d, k = ch.basis.k, L = ch.L;
    const double fh = theory::haar_frame_potential(d, L, k);
    const ProductSpan span = fixed_point_span(ch.basis, L);
    ReducedState s = reduced_initial(kind, ch.basis, L);
    CVector delta = s.amplitudes;
    span.project_out(delta);
    std::vector<MomentRow> rows;
    rows.push_back(MomentRow{0, k, 1.0, 0.0, 1.0 / fh - 1.0, "perm", 0});
    for (int t = 1; t <= t_max; ++t) {
        ch.apply(delta.data());
        span.project_out(delta);
        const double dist = delta.squaredNorm();
        rows.push_back(MomentRow{t, k, fh + dist, 0.0, dist / fh, "perm", 0});
    }
    return rows;
}

/// O_x = <○ ... ● (at x) ... ○ | ρ> in reduced coordinates (k = 2).
inline Complex magnon_overlap(const ReducedState& s, int x) {
    if (s.basis.k != 2) throw std::invalid_argument("magnon_overlap: requires k = 2");
    if (x < 0 || x >= s.n_sites()) throw std::out_of_range("magnon_overlap: site out of range");
    const CVector circle = s.basis.embed.adjoint() * circle_state(s.basis.d);
    const CVector black = s.basis.embed.adjoint() * black_state(s.basis.d);
    const int m = s.basis.m;
    CVector work = s.amplitudes;
    for (int site = s.n_sites() - 1; site >= 0; --site) {
        const CVector& v = site == x ? black : circle;
        const Eigen::Index rows = work.size() / m;
        CVector next(rows);
        for (Eigen::Index r = 0; r < rows; ++r) next[r] = v.dot(work.segment(r * m, m));
        work.swap(next);
    }
    return work[0];
}

namespace detail {

/// Contracts one output leg (row side) and one input leg (column side) of W
/// with o. `out_left`/`in_left` choose which legs are capped.
inline CMatrix cap_gate(const CMatrix& w, int m, const CVector& o, bool out_left, bool in_left) {
    CMatrix r = CMatrix::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            Complex acc = 0.0;
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) {
                    const int row = out_left ? a * m + i : i * m + a;
                    const int col = in_left ? b * m + j : j * m + b;
                    acc += std::conj(o[a]) * w(row, col) * o[b];
                }
            r(i, j) = acc;
        }
    return r;
}

}  // namespace detail

struct FoldedConditions {
    double unitarity = 0.0;       // W|○○> = |○○> and <○○|W = <○○|
    double dual_unitarity = 0.0;  // capping both left or both right legs leaves |○><○|
    double perfect_tensor = 0.0;  // capping diagonal legs leaves |○><○|

    bool is_perfect_tensor(double tol = 1e-10) const {
        return unitarity <= tol && dual_unitarity <= tol && perfect_tensor <= tol;
    }
};

inline FoldedConditions check_perfect_tensor(const AveragedGate& w) {
    const int m = w.basis.m;
    const CVector o = w.basis.identity_coordinates();
    CVector oo(m * m);
    for (int a = 0; a < m; ++a) oo.segment(a * m, m) = o[a] * o;
    const CMatrix proj = o * o.adjoint();
    FoldedConditions c;
    c.unitarity = std::max((w.matrix * oo - oo).cwiseAbs().maxCoeff(),
                           (oo.adjoint() * w.matrix - oo.adjoint()).cwiseAbs().maxCoeff());
    c.dual_unitarity = std::max((detail::cap_gate(w.matrix, m, o, true, true) - proj).cwiseAbs().maxCoeff(),
                                (detail::cap_gate(w.matrix, m, o, false, false) - proj).cwiseAbs().maxCoeff());
    c.perfect_tensor = std::max((detail::cap_gate(w.matrix, m, o, true, false) - proj).cwiseAbs().maxCoeff(),
                                (detail::cap_gate(w.matrix, m, o, false, true) - proj).cwiseAbs().maxCoeff());
    return c;
}

inline FoldedConditions check_perfect_tensor(const Gate& g, int k = 2) {
    return check_perfect_tensor(average_gate(g, build_perm_basis(g.d, k)));
}

/// One-site map with the top-left and bottom-right legs of W capped by |○>.
inline CMatrix magnon_channel(const AveragedGate& w) {
    return detail::cap_gate(w.matrix, w.basis.m, w.basis.identity_coordinates(), true, false);
}

/// ρ_k: squared magnitude of the largest non-trivial eigenvalue of the magnon channel.
inline double magnon_channel_eigenvalue(const AveragedGate& w) {
    const CMatrix mc = magnon_channel(w);
    Eigen::ComplexEigenSolver<CMatrix> es(mc, false);
    std::vector<Complex> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    auto trivial = std::min_element(ev.begin(), ev.end(), [](Complex a, Complex b) {
        return std::abs(a - 1.0) < std::abs(b - 1.0);
    });
    ev.erase(trivial);
    double top = 0.0;
    for (const auto& e : ev) top = std::max(top, std::norm(e));
    return top;
}

inline double magnon_channel_eigenvalue(const Gate& g, int k) {
    return magnon_channel_eigenvalue(average_gate(g, build_perm_basis(g.d, k)));
}

}  // namespace brickdesign
