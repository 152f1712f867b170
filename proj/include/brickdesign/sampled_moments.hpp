#pragma once

// Frame potentials of the boundary-driven ensemble, either exactly by
// enumerating every Pauli path or by Monte Carlo over independent paths.

#include "core.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "series.hpp"
#include "statevec.hpp"
#include "theory.hpp"

#include <cmath>
#include <vector>

namespace brickdesign {

inline constexpr double kMaxEnumerationPairs = 1e8;

inline double enumeration_pairs(int t_max) { return std::pow(4.0, 2.0 * t_max); }

/// Exact F^(k)(t) for t = 0..t_max by evolving all 4^t Pauli paths.
/// Branch states of step t are kept and extended to step t+1.
inline MomentSeries frame_potential_enumerate(const CircuitSpec& spec, const PureState& psi0,
                                              const std::vector<int>& ks, int t_max) {
    validate_spec(spec);
    if (!spec.boundary || spec.boundary->kind != OneSiteKind::PauliSet)
        throw std::invalid_argument("enumerate: requires Pauli boundary driving");
    if (spec.structured) throw std::invalid_argument("enumerate: structured randomness cannot be enumerated");
    if (t_max < 0) throw std::invalid_argument("enumerate: t_max must be >= 0");
    if (enumeration_pairs(t_max) > kMaxEnumerationPairs)
        throw BudgetExceeded("enumerate: 4^(2 t_max) = " + format_double(enumeration_pairs(t_max)) +
                             " pair evaluations exceed 1e8");
    const OneSiteSet& set = *spec.boundary;

    MomentSeries out;
    out.d = spec.d;
    out.L = spec.L;
    for (int k : ks) {
        const double fh = theory::haar_frame_potential(spec.d, spec.L, k);
        out.rows.push_back(MomentRow{0, k, 1.0, 0.0, 1.0 / fh - 1.0, "enumerate", 1});
    }

    const Eigen::Index dim = psi0.amplitudes.size();
    CMatrix states = psi0.amplitudes;
    std::vector<double> weights{1.0};
    for (int t = 1; t <= t_max; ++t) {
        const auto branches = static_cast<Eigen::Index>(set.elements.size());
        CMatrix next(dim, states.cols() * branches);
        std::vector<double> next_w(static_cast<std::size_t>(next.cols()));
        for (Eigen::Index b = 0; b < states.cols(); ++b)
            for (Eigen::Index a = 0; a < branches; ++a) {
                PureState psi{psi0.d, psi0.n_sites, states.col(b)};
                step_with_boundary(psi, spec, set.elements[static_cast<std::size_t>(a)]);
                next.col(b * branches + a) = psi.amplitudes;
                next_w[static_cast<std::size_t>(b * branches + a)] =
                    weights[static_cast<std::size_t>(b)] * set.weights[static_cast<std::size_t>(a)];
            }
        states = std::move(next);
        weights = std::move(next_w);

        // Blockwise Gram matrix; partial sums combined in block order.
        const Eigen::Index n = states.cols();
        const Eigen::Index block = 512;
        std::vector<std::vector<double>> partial(ks.size());
        for (Eigen::Index j0 = 0; j0 < n; j0 += block) {
            const Eigen::Index nb = std::min(block, n - j0);
            const CMatrix g = states.adjoint() * states.middleCols(j0, nb);
            std::vector<std::vector<double>> col_sums(ks.size(), std::vector<double>(static_cast<std::size_t>(nb)));
            for (Eigen::Index j = 0; j < nb; ++j) {
                std::vector<std::vector<double>> terms(ks.size(), std::vector<double>(static_cast<std::size_t>(n)));
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double x2 = std::norm(g(i, j));
                    const double w = weights[static_cast<std::size_t>(i)] * weights[static_cast<std::size_t>(j0 + j)];
                    for (std::size_t q = 0; q < ks.size(); ++q)
                        terms[q][static_cast<std::size_t>(i)] = w * std::pow(x2, ks[q]);
                }
                for (std::size_t q = 0; q < ks.size(); ++q)
                    col_sums[q][static_cast<std::size_t>(j)] = pairwise_sum(terms[q]);
            }
            for (std::size_t q = 0; q < ks.size(); ++q) partial[q].push_back(pairwise_sum(col_sums[q]));
        }
        for (std::size_t q = 0; q < ks.size(); ++q) {
            const double f = pairwise_sum(partial[q]);
            const double fh = theory::haar_frame_potential(spec.d, spec.L, ks[q]);
            out.rows.push_back(MomentRow{t, ks[q], f, 0.0, f / fh - 1.0, "enumerate",
                                         static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n)});
        }
    }
    return out;
}

struct SamplingOptions {
    std::size_t chunk_size = 256;
    bool all_pairs = false;  // pool each chunk and use every pair inside it
    int workers = worker_count();
};

namespace detail {

/// Chunk layout depends only on n, so results do not depend on the worker count.
inline std::size_t chunk_length(std::size_t n, std::size_t cap) {
    return std::clamp<std::size_t>(n / 32, 1, std::max<std::size_t>(cap, 1));
}

struct ChunkSums {
    std::vector<double> sums;  // (t_max+1) x nk
    double count = 0.0;
};

}  // namespace detail

/// Monte-Carlo frame potentials. Default: n_samples disjoint pairs of
/// independent paths. With all_pairs, n_samples paths are split into chunks
/// and every pair within a chunk contributes (a U-statistic: unbiased but
/// correlated). The standard error is a jackknife over chunks.
inline MomentSeries frame_potential_sample(const CircuitSpec& spec, const PureState& psi0,
                                           const std::vector<int>& ks, int t_max, std::size_t n_samples,
                                           std::uint64_t seed, const SamplingOptions& opts = {}) {
    validate_spec(spec);
    if (n_samples < 2) throw std::invalid_argument("sample: n_samples must be >= 2");
    if (t_max < 0) throw std::invalid_argument("sample: t_max must be >= 0");
    const std::size_t nk = ks.size();
    const auto rows = static_cast<std::size_t>(t_max + 1);
    const std::size_t cs = detail::chunk_length(n_samples, opts.chunk_size);
    const std::size_t chunks = (n_samples + cs - 1) / cs;
    std::vector<detail::ChunkSums> results(chunks);

    parallel_for(
        chunks,
        [&](std::size_t c) {
            Rng rng(derive_seed(seed, c));
            const std::size_t begin = c * cs;
            const std::size_t len = std::min(cs, n_samples - begin);
            detail::ChunkSums& out = results[c];
            out.sums.assign(rows * nk, 0.0);
            std::vector<std::vector<double>> terms(rows * nk);
            auto record = [&](int t, double x2) {
                for (std::size_t q = 0; q < nk; ++q)
                    terms[static_cast<std::size_t>(t) * nk + q].push_back(std::pow(x2, ks[q]));
            };
            if (!opts.all_pairs) {
                for (std::size_t s = 0; s < len; ++s) {
                    PureState a = psi0, b = psi0;
                    record(0, std::norm(a.amplitudes.dot(b.amplitudes)));
                    for (int t = 1; t <= t_max; ++t) {
                        step(a, spec, rng);
                        step(b, spec, rng);
                        record(t, std::norm(a.amplitudes.dot(b.amplitudes)));
                    }
                }
                out.count = static_cast<double>(len);
            } else {
                std::vector<PureState> pool(len, psi0);
                for (int t = 0; t <= t_max; ++t) {
                    if (t > 0)
                        for (auto& p : pool) step(p, spec, rng);
                    for (std::size_t i = 0; i < len; ++i)
                        for (std::size_t j = i + 1; j < len; ++j)
                            record(t, std::norm(pool[i].amplitudes.dot(pool[j].amplitudes)));
                }
                out.count = static_cast<double>(len) * (len - 1) / 2.0;
            }
            for (std::size_t i = 0; i < rows * nk; ++i) out.sums[i] = pairwise_sum(terms[i]);
        },
        opts.workers);

    MomentSeries series;
    series.d = spec.d;
    series.L = spec.L;
    series.seed = seed;
    std::vector<double> counts(chunks);
    for (std::size_t c = 0; c < chunks; ++c) counts[c] = results[c].count;
    const double total = pairwise_sum(counts);
    if (total <= 0.0) throw std::invalid_argument("sample: no pairs (all_pairs needs chunks of >= 2 paths)");
    for (std::size_t ti = 0; ti < rows; ++ti)
        for (std::size_t q = 0; q < nk; ++q) {
            std::vector<double> per(chunks);
            for (std::size_t c = 0; c < chunks; ++c) per[c] = results[c].sums[ti * nk + q];
            const double sum = pairwise_sum(per);
            const double f = sum / total;
            double stderr_f = 0.0;
            if (chunks >= 2) {
                std::vector<double> loo(chunks);
                for (std::size_t c = 0; c < chunks; ++c)
                    loo[c] = (sum - per[c]) / (total - counts[c]);
                const double mean = pairwise_sum(loo) / static_cast<double>(chunks);
                std::vector<double> dev(chunks);
                for (std::size_t c = 0; c < chunks; ++c) dev[c] = (loo[c] - mean) * (loo[c] - mean);
                stderr_f = std::sqrt((chunks - 1.0) / chunks * pairwise_sum(dev));
            }
            const double fh = theory::haar_frame_potential(spec.d, spec.L, ks[q]);
            series.rows.push_back(MomentRow{static_cast<int>(ti), ks[q], f, stderr_f, f / fh - 1.0, "sample",
                                            static_cast<std::uint64_t>(total)});
        }
    return series;
}

/// |<ψ_α|ψ_β>| at depth t for n_samples disjoint pairs of independent paths.
inline std::vector<double> collect_overlaps(const CircuitSpec& spec, const PureState& psi0, int t,
                                            std::size_t n_samples, std::uint64_t seed,
                                            const SamplingOptions& opts = {}) {
    validate_spec(spec);
    if (n_samples < 1) throw std::invalid_argument("collect_overlaps: n_samples must be >= 1");
    const std::size_t cs = detail::chunk_length(n_samples, opts.chunk_size);
    const std::size_t chunks = (n_samples + cs - 1) / cs;
    std::vector<double> out(n_samples);
    parallel_for(
        chunks,
        [&](std::size_t c) {
            Rng rng(derive_seed(seed, c));
            const std::size_t begin = c * cs;
            const std::size_t len = std::min(cs, n_samples - begin);
            for (std::size_t s = 0; s < len; ++s) {
                PureState a = psi0, b = psi0;
                for (int i = 0; i < t; ++i) {
                    step(a, spec, rng);
                    step(b, spec, rng);
                }
                out[begin + s] = std::abs(a.amplitudes.dot(b.amplitudes));
            }
        },
        opts.workers);
    return out;
}

}  // namespace brickdesign
