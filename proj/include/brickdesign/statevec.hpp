#pragma once

// Dense pure-state evolution of 2L qudits under an open brickwork circuit.
//
// Sites are 0-based here: site 0 is the left edge, site 2L-1 the right
// edge (where Case (a) boundary driving acts). One time step is
//   boundary draw at 2L-1 -> odd layer on bonds (1,2),(3,4),...,(2L-3,2L-2)
//   -> even layer on bonds (0,1),(2,3),...,(2L-2,2L-1).

#include "core.hpp"
#include "gates.hpp"
#include "kernels.hpp"
#include "rng.hpp"

#include <optional>
#include <vector>

namespace brickdesign {

struct PureState {
    int d = 2;
    int n_sites = 2;
    CVector amplitudes;
};

struct CircuitSpec {
    int d = 2;
    int L = 1;
    std::vector<Gate> gates_even;  // L gates, gate n on sites (2n, 2n+1)
    std::vector<Gate> gates_odd;   // L-1 gates, gate n on sites (2n+1, 2n+2)
    std::optional<OneSiteSet> boundary;    // Case (a): one draw per step at site 2L-1
    std::optional<OneSiteSet> structured;  // Case (b): draws on every gate leg

    int n_sites() const { return 2 * L; }
};

/// Checks the layer sizes and dimensions of a spec.
inline void validate_spec(const CircuitSpec& spec) {
    if (spec.L < 1) throw std::invalid_argument("circuit: L must be >= 1");
    if (static_cast<int>(spec.gates_even.size()) != spec.L)
        throw std::invalid_argument("circuit: even layer needs exactly L gates");
    if (static_cast<int>(spec.gates_odd.size()) != spec.L - 1)
        throw std::invalid_argument("circuit: odd layer needs exactly L-1 gates");
    for (const auto* layer : {&spec.gates_even, &spec.gates_odd})
        for (const Gate& g : *layer)
            if (g.d != spec.d) throw std::invalid_argument("circuit: gate dimension mismatch");
    if (spec.boundary && spec.boundary->d != spec.d)
        throw std::invalid_argument("circuit: boundary set dimension mismatch");
    if (spec.structured && spec.structured->d != spec.d)
        throw std::invalid_argument("circuit: structured set dimension mismatch");
}

/// Same gate on every bond.
inline CircuitSpec uniform_circuit(const Gate& g, int L) {
    CircuitSpec spec;
    spec.d = g.d;
    spec.L = L;
    spec.gates_even.assign(static_cast<std::size_t>(L), g);
    spec.gates_odd.assign(static_cast<std::size_t>(L - 1), g);
    return spec;
}

/// Gates exp(i[Jx XX + Jy YY + J ZZ]) (u_n ⊗ u_{n+1}) on every bond (n, n+1),
/// with Jx = Jy = π/4 - δ and one fixed one-site unitary u_n per site.
inline CircuitSpec xyz_circuit(int L, double delta, double j, const std::vector<EulerAngles>& site_angles) {
    if (L < 1) throw std::invalid_argument("xyz_circuit: L must be >= 1");
    if (static_cast<int>(site_angles.size()) != 2 * L)
        throw std::invalid_argument("xyz_circuit: need one set of Euler angles per site");
    const double jxy = kPi / 4.0 - delta;
    CircuitSpec spec;
    spec.d = 2;
    spec.L = L;
    for (int n = 0; n + 1 < 2 * L; ++n) {
        Gate g = build_xyz_gate(jxy, jxy, j, site_angles[static_cast<std::size_t>(n)],
                                site_angles[static_cast<std::size_t>(n + 1)]);
        (n % 2 == 0 ? spec.gates_even : spec.gates_odd).push_back(std::move(g));
    }
    return spec;
}

/// Euler angles drawn uniformly from [0, 2π) for each of n sites.
inline std::vector<EulerAngles> random_euler_angles(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    std::vector<EulerAngles> out(static_cast<std::size_t>(n));
    for (auto& e : out) {
        e.theta1 = angle(rng);
        e.theta2 = angle(rng);
        e.theta3 = angle(rng);
    }
    return out;
}

/// Per-step randomness record. For Pauli draws `labels` holds indices into
/// {I,X,Y,Z}; `unitaries` always holds the drawn matrices in draw order.
struct CircuitPath {
    struct StepDraws {
        std::vector<int> labels;
        std::vector<CMatrix> unitaries;
    };
    std::vector<StepDraws> steps;

    std::size_t length() const { return steps.size(); }
};

inline PureState initial_all_zero(int d, int L) {
    if (d < 1 || L < 1) throw std::invalid_argument("initial state: d and L must be >= 1");
    PureState s{d, 2 * L, CVector::Zero(static_cast<Eigen::Index>(ipow(d, 2 * L)))};
    s.amplitudes[0] = 1.0;
    return s;
}

/// Product of generalized Bell pairs on sites (2n, 2n+1).
inline PureState initial_bell_pairs(int d, int L) {
    if (d < 1 || L < 1) throw std::invalid_argument("initial state: d and L must be >= 1");
    const auto pair_dim = static_cast<Eigen::Index>(d) * d;
    CVector pair = CVector::Zero(pair_dim);
    for (int j = 0; j < d; ++j) pair[j * d + j] = 1.0 / std::sqrt(static_cast<double>(d));
    CVector amps = pair;
    for (int n = 1; n < L; ++n) {
        CVector grown(amps.size() * pair_dim);
        for (Eigen::Index i = 0; i < amps.size(); ++i) grown.segment(i * pair_dim, pair_dim) = amps[i] * pair;
        amps = std::move(grown);
    }
    return PureState{d, 2 * L, std::move(amps)};
}

/// Applies g to sites (site, site+1) in place.
inline void apply_two_site(PureState& psi, const Gate& g, int site) {
    if (g.d != psi.d) throw std::invalid_argument("apply_two_site: dimension mismatch");
    if (site < 0 || site + 1 >= psi.n_sites)
        throw std::out_of_range("apply_two_site: site out of range");
    kernels::apply_two_site(psi.amplitudes.data(), psi.d, psi.n_sites, site, site + 1, g.matrix);
}

inline void apply_one_site(PureState& psi, const CMatrix& u, int site) {
    if (site < 0 || site >= psi.n_sites) throw std::out_of_range("apply_one_site: site out of range");
    kernels::apply_one_site(psi.amplitudes.data(), psi.d, psi.n_sites, site, u);
}

namespace detail {

inline void apply_layer(PureState& psi, const std::vector<Gate>& layer, int first_site,
                        const CircuitSpec& spec, Rng* rng, CircuitPath::StepDraws* draws) {
    for (std::size_t n = 0; n < layer.size(); ++n) {
        const int site = first_site + 2 * static_cast<int>(n);
        if (spec.structured && rng) {
            // Dress input and output legs with independent one-site draws.
            std::array<CMatrix, 4> u;
            for (auto& m : u) {
                int label = -1;
                m = sample_one_site(*spec.structured, *rng, &label);
                if (draws) {
                    draws->labels.push_back(label);
                    draws->unitaries.push_back(m);
                }
            }
            const CMatrix dressed = kron(u[2], u[3]) * layer[n].matrix * kron(u[0], u[1]);
            kernels::apply_two_site(psi.amplitudes.data(), psi.d, psi.n_sites, site, site + 1,
                                    dressed);
        } else {
            kernels::apply_two_site(psi.amplitudes.data(), psi.d, psi.n_sites, site, site + 1,
                                    layer[n].matrix);
        }
    }
}

}  // namespace detail

/// Fixed part of one time step: odd layer, then even layer.
inline void apply_brickwork(PureState& psi, const CircuitSpec& spec) {
    detail::apply_layer(psi, spec.gates_odd, 1, spec, nullptr, nullptr);
    detail::apply_layer(psi, spec.gates_even, 0, spec, nullptr, nullptr);
}

/// One time step with a given boundary unitary (used by path enumeration).
inline void step_with_boundary(PureState& psi, const CircuitSpec& spec, const CMatrix& alpha) {
    apply_one_site(psi, alpha, psi.n_sites - 1);
    apply_brickwork(psi, spec);
}

/// One full random time step; the draws are appended to `path` if given.
inline void step(PureState& psi, const CircuitSpec& spec, Rng& rng, CircuitPath* path = nullptr) {
    CircuitPath::StepDraws draws;
    if (spec.boundary) {
        int label = -1;
        CMatrix alpha = sample_one_site(*spec.boundary, rng, &label);
        apply_one_site(psi, alpha, psi.n_sites - 1);
        draws.labels.push_back(label);
        draws.unitaries.push_back(std::move(alpha));
    }
    detail::apply_layer(psi, spec.gates_odd, 1, spec, &rng, &draws);
    detail::apply_layer(psi, spec.gates_even, 0, spec, &rng, &draws);
    if (path) path->steps.push_back(std::move(draws));
}

inline double norm_defect(const PureState& psi) { return std::abs(psi.amplitudes.norm() - 1.0); }

/// Rescales the state to unit norm; returns the drift that was removed.
inline double renormalize(PureState& psi) {
    const double n = psi.amplitudes.norm();
    psi.amplitudes /= n;
    return std::abs(n - 1.0);
}

}  // namespace brickdesign
