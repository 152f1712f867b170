#pragma once

// Closed-form reference quantities: Haar frame potentials, trace moments of
// random unitaries, early-time decay rates, design times and generalized
// gamma moments. Combinatorial quantities are computed exactly with
// arbitrary-precision integers and converted to double at the interface.

#include "core.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <functional>
#include <vector>

namespace brickdesign::theory {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

inline BigInt binomial(const BigInt& n, int k) {
    BigInt r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

inline BigInt factorial(int n) {
    BigInt r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

/// binom(d^{2L}+k-1, k), the inverse Haar frame potential on 2L qudits.
inline BigInt haar_frame_potential_inverse(int d, int L, int k) {
    BigInt dim = boost::multiprecision::pow(BigInt(d), 2 * L);
    return binomial(dim + k - 1, k);
}

inline double haar_frame_potential(int d, int L, int k) {
    if (d < 2 || L < 1 || k < 0) throw std::invalid_argument("haar_frame_potential: bad arguments");
    return 1.0 / haar_frame_potential_inverse(d, L, k).convert_to<double>();
}

/// C_k = binom(2k, k)/(k+1).
inline BigInt catalan(int k) { return binomial(BigInt(2 * k), k) / (k + 1); }

/// E|tr U|^{2k} over Haar U(d), as the sum over partitions of k with at
/// most d parts of prod_{i<j}(s_i-s_j-i+j)^2 / prod_i (l-i+s_i)!^2, times k!^2.
inline BigInt trace_moment_exact(int d, int k) {
    if (k < 0 || k > 8) throw BudgetExceeded("trace_moment: supports 0 <= k <= 8");
    if (d < 1) throw std::invalid_argument("trace_moment: d must be >= 1");
    if (k == 0) return 1;
    BigRational total = 0;
    std::vector<int> parts;
    std::function<void(int, int)> descend = [&](int remaining, int max_part) {
        if (remaining == 0) {
            const int l = static_cast<int>(parts.size());
            BigInt num = 1, den = 1;
            for (int i = 0; i < l; ++i)
                for (int j = i + 1; j < l; ++j) {
                    const int f = parts[i] - parts[j] - i + j;
                    num *= f * f;
                }
            for (int i = 0; i < l; ++i) {
                const BigInt f = factorial(l - (i + 1) + parts[i]);
                den *= f * f;
            }
            total += BigRational(num, den);
            return;
        }
        if (static_cast<int>(parts.size()) == d) return;
        for (int s = std::min(remaining, max_part); s >= 1; --s) {
            parts.push_back(s);
            descend(remaining - s, s);
            parts.pop_back();
        }
    };
    descend(k, k);
    const BigInt kf = factorial(k);
    const BigRational value = total * BigRational(kf * kf);
    if (boost::multiprecision::denominator(value) != 1)
        throw std::logic_error("trace_moment: partition sum is not an integer");
    return boost::multiprecision::numerator(value);
}

inline double trace_moment(int d, int k) { return trace_moment_exact(d, k).convert_to<double>(); }

enum class EarlyCase { PauliBoundary, HaarBoundary };

/// Initial decay rate of Δ2 for dual-unitary Case (a) circuits.
inline double du_early_rate(EarlyCase c, int d, int k) {
    if (c == EarlyCase::PauliBoundary) return 2.0 * std::log(2.0);
    return 2.0 * k * std::log(static_cast<double>(d)) - std::log(trace_moment(d, k));
}

/// Late-time Δ2 rate of a Haar random brickwork circuit at large size.
inline double haar_circuit_rate(int d) {
    if (d < 2) throw std::invalid_argument("haar_circuit_rate: d must be >= 2");
    const double dd = d;
    return 4.0 * std::log((dd * dd + 1.0) / (2.0 * dd));
}

/// Depth at which Δ2^(k) falls below eps given the saturated |λ1|.
inline double design_time(double eps, int k, int L, int d, double lambda1_bar) {
    if (!(lambda1_bar > 0.0 && lambda1_bar < 1.0))
        throw std::invalid_argument("design_time: lambda1_bar must lie in (0,1)");
    if (!(eps > 0.0)) throw std::invalid_argument("design_time: eps must be positive");
    return (2.0 * k * L * std::log(static_cast<double>(d)) - std::log(eps)) /
           (2.0 * std::log(1.0 / lambda1_bar));
}

/// E[X^r] = a^r Γ((q+r)/p) / Γ(q/p) for the generalized gamma law.
inline double gamma_moment(double a, double p, double q, double r) {
    if (!(a > 0.0 && p > 0.0 && q > 0.0)) throw std::invalid_argument("gamma_moment: a, p, q must be positive");
    if (!(q + r > 0.0)) throw std::invalid_argument("gamma_moment: requires q + r > 0");
    return std::exp(r * std::log(a) + std::lgamma((q + r) / p) - std::lgamma(q / p));
}

struct TheoryContext {
    int d = 2;
    int L = 1;
    int k = 1;
    double frame_potential_haar = 0.0;
    double frame_potential_haar_asymptotic = 0.0;  // k! d^{-2kL}
    double trace_moment = 0.0;
    double early_rate_pauli = 0.0;
    double early_rate_haar = 0.0;
    double haar_circuit_rate = 0.0;
};

inline TheoryContext make_context(int d, int L, int k) {
    TheoryContext c;
    c.d = d;
    c.L = L;
    c.k = k;
    c.frame_potential_haar = haar_frame_potential(d, L, k);
    c.frame_potential_haar_asymptotic =
        std::exp(std::lgamma(k + 1.0) - 2.0 * k * L * std::log(static_cast<double>(d)));
    c.trace_moment = trace_moment(d, k);
    c.early_rate_pauli = du_early_rate(EarlyCase::PauliBoundary, d, k);
    c.early_rate_haar = du_early_rate(EarlyCase::HaarBoundary, d, k);
    c.haar_circuit_rate = haar_circuit_rate(d);
    return c;
}

}  // namespace brickdesign::theory
