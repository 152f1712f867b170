#pragma once

// Two-site gates and one-site unitary ensembles.
//
// A two-site gate is a d^2 x d^2 unitary acting on |s1 s2>, row-major with
// index s1*d + s2 (s1 is the left site).

#include "core.hpp"
#include "kernels.hpp"
#include "rng.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace brickdesign {

struct Gate {
    int d = 2;
    CMatrix matrix;
    std::string label;
};

inline constexpr double kUnitarityTol = 1e-12;

/// Wraps a matrix into a Gate after checking shape and unitarity.
inline Gate make_gate(int d, CMatrix m, std::string label, double tol = 1e-10) {
    if (d < 2) throw std::invalid_argument("gate: local dimension must be >= 2");
    if (m.rows() != d * d || m.cols() != d * d)
        throw std::invalid_argument("gate: matrix must be d^2 x d^2");
    const double defect = unitarity_defect(m);
    if (defect > tol)
        throw std::invalid_argument("gate: matrix is not unitary (defect " +
                                    std::to_string(defect) + ")");
    return Gate{d, std::move(m), std::move(label)};
}

namespace pauli {

inline CMatrix identity() { return CMatrix::Identity(2, 2); }
inline CMatrix x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}
inline CMatrix y() {
    CMatrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}
inline CMatrix z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

}  // namespace pauli

struct EulerAngles {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double theta3 = 0.0;
};

/// exp(i theta1 Z) exp(i theta2 X) exp(i theta3 Z).
inline CMatrix euler_unitary(const EulerAngles& e) {
    const Complex i(0.0, 1.0);
    auto rot = [&](double th, const CMatrix& p) -> CMatrix {
        return std::cos(th) * pauli::identity() + i * std::sin(th) * p;
    };
    return rot(e.theta1, pauli::z()) * rot(e.theta2, pauli::x()) * rot(e.theta3, pauli::z());
}

/// exp(i[Jx XX + Jy YY + J ZZ]) (u_left ⊗ u_right) for qubits. The three
/// two-site Pauli strings commute and square to one, so the exponential
/// factorizes into cos/sin terms.
inline Gate build_xyz_gate(double jx, double jy, double jz, const EulerAngles& left = {},
                           const EulerAngles& right = {}) {
    const Complex i(0.0, 1.0);
    const CMatrix id4 = CMatrix::Identity(4, 4);
    auto term = [&](double j, const CMatrix& p) -> CMatrix {
        return std::cos(j) * id4 + i * std::sin(j) * kron(p, p);
    };
    const CMatrix interaction =
        term(jx, pauli::x()) * term(jy, pauli::y()) * term(jz, pauli::z());
    CMatrix m = interaction * kron(euler_unitary(left), euler_unitary(right));
    return make_gate(2, std::move(m),
                     "xyz(Jx=" + std::to_string(jx) + ",Jy=" + std::to_string(jy) +
                         ",J=" + std::to_string(jz) + ")");
}

/// <c d'|U|a b> = delta(a,d') delta(b,c) exp(i J_ab): SWAP dressed with a phase.
inline Gate build_du_phase_gate(int d, const RMatrix& phases) {
    if (phases.rows() != d || phases.cols() != d)
        throw std::invalid_argument("du_phase gate: phases must be a d x d matrix");
    CMatrix m = CMatrix::Zero(d * d, d * d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) m(b * d + a, a * d + b) = std::polar(1.0, phases(a, b));
    return make_gate(d, std::move(m), "du_phase(d=" + std::to_string(d) + ")");
}

inline Gate swap_gate(int d) { return build_du_phase_gate(d, RMatrix::Zero(d, d)); }

inline Gate identity_gate(int d) {
    return Gate{d, CMatrix::Identity(d * d, d * d), "identity"};
}

/// J_ab = 2 pi a b / d.
inline Gate hadamard_phase_gate(int d) {
    RMatrix j(d, d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) j(a, b) = 2.0 * kPi * a * b / d;
    Gate g = build_du_phase_gate(d, j);
    g.label = "hadamard(d=" + std::to_string(d) + ")";
    return g;
}

inline bool is_prime(int n) {
    if (n < 2) return false;
    for (int q = 2; q * q <= n; ++q)
        if (n % q == 0) return false;
    return true;
}

/// Permutation gate |a,b> -> |a+b, a+2b> (mod d) over the prime field F_d.
inline Gate build_perfect_tensor(int d) {
    if (d == 2)
        throw std::invalid_argument("perfect tensor: no two-qubit perfect tensor exists for d=2");
    if (!is_prime(d))
        throw std::invalid_argument("perfect tensor: finite-field construction needs prime d");
    CMatrix m = CMatrix::Zero(d * d, d * d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) m(((a + b) % d) * d + (a + 2 * b) % d, a * d + b) = 1.0;
    return make_gate(d, std::move(m), "perfect_tensor(d=" + std::to_string(d) + ")");
}

/// Space-time dual: <s1 s2|U~|s3 s4> = <s1 s3|U|s2 s4>.
inline CMatrix dual_matrix(const Gate& g) {
    const int d = g.d;
    CMatrix out(d * d, d * d);
    for (int s1 = 0; s1 < d; ++s1)
        for (int s2 = 0; s2 < d; ++s2)
            for (int s3 = 0; s3 < d; ++s3)
                for (int s4 = 0; s4 < d; ++s4)
                    out(s1 * d + s2, s3 * d + s4) = g.matrix(s1 * d + s3, s2 * d + s4);
    return out;
}

struct DualUnitarity {
    bool flag = false;
    double defect = 0.0;
};

inline DualUnitarity is_dual_unitary(const Gate& g, double tol = 1e-10) {
    const double defect = unitarity_defect(dual_matrix(g));
    return {defect <= tol, defect};
}

/// Normalized entangling power in [0, 1].
///
/// The Haar average over product inputs is done exactly: each input site
/// carries the two-replica average (|id> + |swap>)/(d(d+1)), the folded gate
/// (U ⊗ U*)^{⊗2} is applied, and the left output is contracted with |swap>
/// and the right one with |id>, giving the mean purity of the left reduced
/// state. The linear entropy 1 - purity is rescaled by (d+1)/(d-1), its
/// maximum over all gates, so that perfect tensors give 1 and the qubit
/// dual-unitary family gives (2/3) cos^2(2J).
inline double entangling_power(const Gate& g) {
    const int d = g.d;
    const int site = d * d * d * d;  // (s1 r1 s2 r2)
    auto idx = [d](int s1, int r1, int s2, int r2) { return ((s1 * d + r1) * d + s2) * d + r2; };
    CVector avg = CVector::Zero(site), id = CVector::Zero(site), sw = CVector::Zero(site);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            id[idx(a, a, b, b)] += 1.0;
            sw[idx(a, b, b, a)] += 1.0;
        }
    avg = (id + sw) / static_cast<double>(d * (d + 1));

    // Register of 8 qudits: left site (0..3), right site (4..7).
    CVector state(static_cast<Eigen::Index>(site) * site);
    for (int i = 0; i < site; ++i)
        for (int j = 0; j < site; ++j) state[i * site + j] = avg[i] * avg[j];
    const CMatrix uc = g.matrix.conjugate();
    for (int replica = 0; replica < 2; ++replica) {
        kernels::apply_two_site(state.data(), d, 8, 2 * replica, 4 + 2 * replica, g.matrix);
        kernels::apply_two_site(state.data(), d, 8, 2 * replica + 1, 5 + 2 * replica, uc);
    }
    Complex purity = 0.0;
    for (int i = 0; i < site; ++i)
        for (int j = 0; j < site; ++j) purity += sw[i] * id[j] * state[i * site + j];
    const double linear_entropy = 1.0 - purity.real();
    return linear_entropy * (d + 1.0) / (d - 1.0);
}

/// Haar-distributed element of U(d): QR of a complex Ginibre matrix with
/// the phases of diag(R) moved into Q.
inline CMatrix haar_unitary(int d, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    CMatrix z(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) z(i, j) = Complex(normal(rng), normal(rng));
    Eigen::HouseholderQR<CMatrix> qr(z);
    CMatrix q = qr.householderQ();
    const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j) {
        const Complex rjj = r(j, j);
        const double mag = std::abs(rjj);
        q.col(j) *= (mag > 0.0 ? rjj / mag : Complex(1.0));
    }
    return q;
}

enum class OneSiteKind { PauliSet, HaarOnSite };

struct OneSiteSet {
    OneSiteKind kind = OneSiteKind::PauliSet;
    int d = 2;
    std::vector<CMatrix> elements;  // discrete sets only
    std::vector<double> weights;
};

inline OneSiteSet pauli_set() {
    return OneSiteSet{OneSiteKind::PauliSet,
                      2,
                      {pauli::identity(), pauli::x(), pauli::y(), pauli::z()},
                      {0.25, 0.25, 0.25, 0.25}};
}

inline OneSiteSet haar_set(int d) { return OneSiteSet{OneSiteKind::HaarOnSite, d, {}, {}}; }

/// Draws one element. For the Pauli set `label` receives the index in
/// {I, X, Y, Z}; for Haar draws it is set to -1.
inline CMatrix sample_one_site(const OneSiteSet& set, Rng& rng, int* label = nullptr) {
    if (set.kind == OneSiteKind::PauliSet) {
        std::uniform_int_distribution<int> pick(0, static_cast<int>(set.elements.size()) - 1);
        const int a = pick(rng);
        if (label) *label = a;
        return set.elements[static_cast<std::size_t>(a)];
    }
    if (label) *label = -1;
    return haar_unitary(set.d, rng);
}

}  // namespace brickdesign
