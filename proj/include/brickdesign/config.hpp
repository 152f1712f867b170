#pragma once

// Experiment configuration: TOML parsing, validation and resource estimates.

#include "perm_dynamics.hpp"
#include "replica_channel.hpp"
#include "sampled_moments.hpp"

#include <toml++/toml.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace brickdesign {

enum class Mode {
    CaseAEnumerate,
    CaseASample,
    CaseAReplica,
    CaseBReduced,
    CaseBReplica,
    Spectrum,
    OverlapHist,
    Theory,
    Fit
};

inline const std::vector<std::pair<Mode, std::string>>& mode_names() {
    static const std::vector<std::pair<Mode, std::string>> names = {
        {Mode::CaseAEnumerate, "case_a_enumerate"}, {Mode::CaseASample, "case_a_sample"},
        {Mode::CaseAReplica, "case_a_replica"},     {Mode::CaseBReduced, "case_b_reduced"},
        {Mode::CaseBReplica, "case_b_replica"},     {Mode::Spectrum, "spectrum"},
        {Mode::OverlapHist, "overlap_hist"},        {Mode::Theory, "theory"},
        {Mode::Fit, "fit"}};
    return names;
}

inline std::string to_string(Mode m) {
    for (const auto& [mode, name] : mode_names())
        if (mode == m) return name;
    return "unknown";
}

inline bool is_simulation(Mode m) {
    return m == Mode::CaseAEnumerate || m == Mode::CaseASample || m == Mode::CaseAReplica ||
           m == Mode::CaseBReduced || m == Mode::CaseBReplica;
}

/// Invalid configuration; line is 0 when no source position applies.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

struct GateConfig {
    std::string kind = "xyz";  // xyz | du_phase | perfect_tensor | hadamard | swap | avg_du | haar
    double delta = 0.0;
    double j = 0.0;
    std::string euler = "none";  // none | random
    std::uint64_t euler_seed = 0;
    double p = 0.5;               // avg_du
    std::vector<std::vector<double>> phases;  // du_phase, d x d
    std::uint64_t gate_seed = 0;  // haar
};

struct ExperimentConfig {
    Mode mode = Mode::Theory;
    int d = 2;
    int L = 1;
    std::vector<int> k{2};
    int t_max = 10;
    int t = 0;  // overlap_hist depth
    std::uint64_t n_samples = 0;
    bool all_pairs = false;
    std::string initial = "all_zero";  // all_zero | bell_pairs
    std::string one_site = "pauli";    // pauli | haar
    GateConfig gate;
    std::vector<double> sweep_delta;
    std::vector<double> sweep_j;
    std::vector<double> sweep_p;
    std::vector<int> sweep_L;
    std::optional<std::uint64_t> seed;
    std::string output = "results";
    std::string input;  // fit: run directory or series CSV
    double noise_floor = 1e-12;
    double t_min = 0.0;
    double tol = 1e-8;
    std::string canonical;  // normalized TOML used for the hash
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

namespace detail {

inline int line_of(const toml::node& n) { return static_cast<int>(n.source().begin.line); }

template <class T>
T get_number(const toml::table& tbl, std::string_view key, T fallback) {
    const toml::node* n = tbl.get(key);
    if (!n) return fallback;
    if constexpr (std::is_floating_point_v<T>) {
        if (auto v = n->value<double>()) return static_cast<T>(*v);
    } else {
        if (auto v = n->value<std::int64_t>()) {
            if constexpr (std::is_unsigned_v<T>)
                if (*v < 0) throw ConfigError("'" + std::string(key) + "' must be non-negative", line_of(*n));
            return static_cast<T>(*v);
        }
    }
    throw ConfigError("'" + std::string(key) + "' has the wrong type", line_of(*n));
}

inline std::string get_string(const toml::table& tbl, std::string_view key, const std::string& fallback) {
    const toml::node* n = tbl.get(key);
    if (!n) return fallback;
    if (auto v = n->value<std::string>()) return *v;
    throw ConfigError("'" + std::string(key) + "' must be a string", line_of(*n));
}

inline bool get_bool(const toml::table& tbl, std::string_view key, bool fallback) {
    const toml::node* n = tbl.get(key);
    if (!n) return fallback;
    if (auto v = n->value<bool>()) return *v;
    throw ConfigError("'" + std::string(key) + "' must be a boolean", line_of(*n));
}

/// A scalar or an array of numbers.
template <class T>
std::vector<T> get_list(const toml::table& tbl, std::string_view key, std::vector<T> fallback) {
    const toml::node* n = tbl.get(key);
    if (!n) return fallback;
    std::vector<T> out;
    auto one = [&](const toml::node& e) {
        if constexpr (std::is_floating_point_v<T>) {
            if (auto v = e.value<double>()) return out.push_back(static_cast<T>(*v));
        } else {
            if (auto v = e.value<std::int64_t>()) return out.push_back(static_cast<T>(*v));
        }
        throw ConfigError("'" + std::string(key) + "' has a non-numeric entry", line_of(e));
    };
    if (const toml::array* arr = n->as_array()) {
        for (const auto& e : *arr) one(e);
    } else {
        one(*n);
    }
    return out;
}

inline void reject_unknown(const toml::table& tbl, std::initializer_list<std::string_view> known,
                           const std::string& where) {
    for (const auto& [key, node] : tbl) {
        bool ok = false;
        for (auto k : known) ok = ok || key.str() == k;
        if (!ok) throw ConfigError("unknown key '" + std::string(key.str()) + "'" + where, line_of(node));
    }
}

}  // namespace detail

/// Parses and validates a configuration. Errors carry TOML line numbers.
inline ExperimentConfig parse_config(std::string_view text, std::string_view source = "config") {
    toml::table tbl;
    try {
        tbl = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string(e.description()), static_cast<int>(e.source().begin.line));
    }
    detail::reject_unknown(tbl,
                           {"mode", "d", "L", "k", "t_max", "t", "n_samples", "all_pairs", "initial", "one_site",
                            "seed", "output", "input", "noise_floor", "t_min", "tol", "gate", "sweep"},
                           "");
    ExperimentConfig c;
    const toml::node* mode = tbl.get("mode");
    if (!mode) throw ConfigError("missing required key 'mode'");
    const std::string mode_name = detail::get_string(tbl, "mode", "");
    bool found = false;
    for (const auto& [m, name] : mode_names())
        if (name == mode_name) {
            c.mode = m;
            found = true;
        }
    if (!found) throw ConfigError("unknown mode '" + mode_name + "'", detail::line_of(*mode));

    c.d = detail::get_number<int>(tbl, "d", c.d);
    c.L = detail::get_number<int>(tbl, "L", c.L);
    c.k = detail::get_list<int>(tbl, "k", c.k);
    c.t_max = detail::get_number<int>(tbl, "t_max", c.t_max);
    c.t = detail::get_number<int>(tbl, "t", c.t);
    c.n_samples = detail::get_number<std::uint64_t>(tbl, "n_samples", c.n_samples);
    c.all_pairs = detail::get_bool(tbl, "all_pairs", c.all_pairs);
    c.initial = detail::get_string(tbl, "initial", c.initial);
    c.one_site = detail::get_string(tbl, "one_site", c.one_site);
    if (tbl.get("seed")) c.seed = detail::get_number<std::uint64_t>(tbl, "seed", 0);
    c.output = detail::get_string(tbl, "output", c.output);
    c.input = detail::get_string(tbl, "input", c.input);
    c.noise_floor = detail::get_number<double>(tbl, "noise_floor", c.noise_floor);
    c.t_min = detail::get_number<double>(tbl, "t_min", c.t_min);
    c.tol = detail::get_number<double>(tbl, "tol", c.tol);

    if (const toml::node* g = tbl.get("gate")) {
        const toml::table* gt = g->as_table();
        if (!gt) throw ConfigError("'gate' must be a table", detail::line_of(*g));
        detail::reject_unknown(*gt, {"kind", "delta", "J", "euler", "euler_seed", "p", "phases", "seed"}, " in [gate]");
        GateConfig& gc = c.gate;
        gc.kind = detail::get_string(*gt, "kind", gc.kind);
        gc.delta = detail::get_number<double>(*gt, "delta", gc.delta);
        gc.j = detail::get_number<double>(*gt, "J", gc.j);
        gc.euler = detail::get_string(*gt, "euler", gc.euler);
        gc.euler_seed = detail::get_number<std::uint64_t>(*gt, "euler_seed", gc.euler_seed);
        gc.p = detail::get_number<double>(*gt, "p", gc.p);
        gc.gate_seed = detail::get_number<std::uint64_t>(*gt, "seed", gc.gate_seed);
        if (const toml::node* ph = gt->get("phases")) {
            const toml::array* rows = ph->as_array();
            if (!rows) throw ConfigError("'phases' must be an array of arrays", detail::line_of(*ph));
            for (const auto& row : *rows) {
                const toml::array* r = row.as_array();
                if (!r) throw ConfigError("'phases' rows must be arrays", detail::line_of(row));
                std::vector<double> vals;
                for (const auto& e : *r) {
                    auto v = e.value<double>();
                    if (!v) throw ConfigError("'phases' entries must be numbers", detail::line_of(e));
                    vals.push_back(*v);
                }
                gc.phases.push_back(std::move(vals));
            }
        }
        static const std::vector<std::string> kinds = {"xyz",  "du_phase", "perfect_tensor", "hadamard",
                                                       "swap", "avg_du",   "haar"};
        if (std::find(kinds.begin(), kinds.end(), gc.kind) == kinds.end())
            throw ConfigError("unknown gate kind '" + gc.kind + "'", detail::line_of(*gt->get("kind")));
        if (gc.euler != "none" && gc.euler != "random")
            throw ConfigError("gate.euler must be 'none' or 'random'", detail::line_of(*gt->get("euler")));
    }
    if (const toml::node* s = tbl.get("sweep")) {
        const toml::table* st = s->as_table();
        if (!st) throw ConfigError("'sweep' must be a table", detail::line_of(*s));
        detail::reject_unknown(*st, {"delta", "J", "p", "L"}, " in [sweep]");
        c.sweep_delta = detail::get_list<double>(*st, "delta", {});
        c.sweep_j = detail::get_list<double>(*st, "J", {});
        c.sweep_p = detail::get_list<double>(*st, "p", {});
        c.sweep_L = detail::get_list<int>(*st, "L", {});
    }

    // Output location is not part of the hash; the seed is appended separately.
    toml::table canon = tbl;
    canon.erase("output");
    canon.erase("seed");
    std::ostringstream os;
    os << canon;
    c.canonical = os.str();
    return c;
}

inline std::string config_hash(const ExperimentConfig& c) {
    return hex64(fnv1a(c.canonical + "\nseed=" + (c.seed ? std::to_string(*c.seed) : "none")));
}

struct ResourceEstimate {
    std::string kind;  // replica | reduced | statevector | enumeration | none
    double amplitudes = 0.0;
    double bytes = 0.0;
    double operations = 0.0;
    bool accepted = true;
    std::string message;
};

inline int perm_basis_rank(int d, int k) { return build_perm_basis(d, k).m; }

/// Dry-run resource estimate, also used as the budget guard before any run.
inline ResourceEstimate estimate_resources(const ExperimentConfig& c) {
    ResourceEstimate r;
    const int kmax = c.k.empty() ? 1 : *std::max_element(c.k.begin(), c.k.end());
    std::vector<int> Ls = c.sweep_L.empty() ? std::vector<int>{c.L} : c.sweep_L;
    const int Lmax = *std::max_element(Ls.begin(), Ls.end());
    switch (c.mode) {
    case Mode::CaseAReplica:
    case Mode::CaseBReplica: {
        r.kind = "replica";
        r.amplitudes = std::pow(static_cast<double>(c.d), 4.0 * kmax * Lmax);
        r.bytes = 2.0 * 16.0 * r.amplitudes;
        r.operations = r.amplitudes * std::pow(c.d, 4.0 * kmax) * 2.0 * Lmax * (c.t_max + 1);
        const double cap = static_cast<double>(kMaxReplicaAmplitudes);
        if (r.amplitudes > cap) {
            r.accepted = false;
            r.message = "replica state needs d^(4kL) = " + std::to_string(c.d) + "^" +
                        std::to_string(4 * kmax * Lmax) + " = " + format_double(r.amplitudes) +
                        " amplitudes (limit 2^30); reduce L or k, or use case_b_reduced";
        }
        break;
    }
    case Mode::CaseBReduced:
    case Mode::Spectrum: {
        r.kind = "reduced";
        const int m = perm_basis_rank(c.d, kmax);
        r.amplitudes = std::pow(static_cast<double>(m), 2.0 * Lmax);
        r.bytes = (c.mode == Mode::Spectrum ? 44.0 : 3.0) * 16.0 * r.amplitudes;
        r.operations = r.amplitudes * m * m * 2.0 * Lmax * (c.mode == Mode::Spectrum ? 1000 : c.t_max + 1);
        if (r.amplitudes > static_cast<double>(kMaxReducedAmplitudes)) {
            r.accepted = false;
            r.message = "reduced state needs m^(2L) = " + std::to_string(m) + "^" + std::to_string(2 * Lmax) +
                        " = " + format_double(r.amplitudes) + " amplitudes (limit 2^28); reduce L";
        }
        break;
    }
    case Mode::CaseAEnumerate: {
        r.kind = "enumeration";
        r.amplitudes = std::pow(4.0, c.t_max) * std::pow(static_cast<double>(c.d), 2.0 * c.L);
        r.bytes = 2.0 * 16.0 * r.amplitudes;
        r.operations = enumeration_pairs(c.t_max);
        if (r.operations > kMaxEnumerationPairs) {
            r.accepted = false;
            r.message = "enumeration needs 4^(2 t_max) = " + format_double(r.operations) +
                        " pair evaluations (limit 1e8); use t_max <= 6 or case_a_sample";
        }
        break;
    }
    case Mode::CaseASample:
    case Mode::OverlapHist: {
        r.kind = "statevector";
        r.amplitudes = std::pow(static_cast<double>(c.d), 2.0 * c.L);
        r.bytes = 2.0 * 16.0 * r.amplitudes * std::max<double>(1.0, worker_count());
        const int depth = c.mode == Mode::OverlapHist ? c.t : c.t_max;
        r.operations = 2.0 * static_cast<double>(c.n_samples) * depth * r.amplitudes * 2.0 * c.L * c.d * c.d;
        if (r.amplitudes > std::pow(2.0, 28)) {
            r.accepted = false;
            r.message = "state vector needs d^(2L) = " + format_double(r.amplitudes) + " amplitudes (limit 2^28)";
        }
        break;
    }
    case Mode::Theory:
    case Mode::Fit:
        r.kind = "none";
        break;
    }
    return r;
}

/// Mode-specific checks; throws ConfigError on the first problem.
inline void validate_config(const ExperimentConfig& c) {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(c.d >= 2, "d must be >= 2");
    need(c.L >= 1, "L must be >= 1");
    need(!c.k.empty(), "k must list at least one moment order");
    for (int k : c.k) need(k >= 1 && k <= 6, "k must lie in 1..6");
    need(c.initial == "all_zero" || c.initial == "bell_pairs", "initial must be 'all_zero' or 'bell_pairs'");
    need(c.one_site == "pauli" || c.one_site == "haar", "one_site must be 'pauli' or 'haar'");
    need(c.t_max >= 0, "t_max must be >= 0");
    for (int L : c.sweep_L) need(L >= 1, "sweep.L entries must be >= 1");
    const bool case_a = c.mode == Mode::CaseAEnumerate || c.mode == Mode::CaseASample ||
                        c.mode == Mode::CaseAReplica || c.mode == Mode::OverlapHist;
    if (case_a) {
        need(c.gate.kind != "avg_du", "gate kind 'avg_du' only applies to case_b_reduced and spectrum");
        need(c.one_site == "pauli" || c.mode != Mode::CaseAEnumerate, "case_a_enumerate requires one_site = 'pauli'");
        if (c.one_site == "pauli") need(c.d == 2, "Pauli driving requires d = 2");
        need(c.sweep_p.empty() && c.sweep_L.empty(), "case (a) modes sweep only delta or J");
    }
    if (c.mode == Mode::CaseASample) need(c.n_samples >= 2, "case_a_sample requires n_samples >= 2");
    if (c.mode == Mode::OverlapHist) {
        need(c.n_samples >= 1000, "overlap_hist requires n_samples >= 1000");
        need(c.t >= 1, "overlap_hist requires t >= 1");
    }
    if (c.mode == Mode::CaseBReduced || c.mode == Mode::Spectrum) {
        need(c.sweep_delta.empty() && c.sweep_j.empty(), "case (b) modes sweep only p or L");
        if (!c.sweep_p.empty()) need(c.gate.kind == "avg_du", "sweep.p requires gate kind 'avg_du'");
        if (c.gate.kind == "avg_du") {
            need(c.k.size() == 1 && c.k[0] == 2, "gate kind 'avg_du' is defined for k = 2");
            for (double p : c.sweep_p.empty() ? std::vector<double>{c.gate.p} : c.sweep_p)
                need(p >= 0.0 && p <= 1.0, "p must lie in [0, 1]");
        }
    }
    if (c.mode == Mode::CaseBReplica) need(c.gate.kind != "avg_du", "case_b_replica needs a concrete gate");
    if (c.mode != Mode::Spectrum) need(c.sweep_L.empty(), "sweep.L applies to spectrum only");
    if (c.mode == Mode::Fit) need(!c.input.empty(), "fit requires 'input' (run directory or series CSV)");
    if (c.gate.kind == "du_phase") {
        need(static_cast<int>(c.gate.phases.size()) == c.d, "gate.phases must be a d x d array");
        for (const auto& row : c.gate.phases) need(static_cast<int>(row.size()) == c.d, "gate.phases must be d x d");
    }
    if (c.gate.kind == "perfect_tensor") need(is_prime(c.d) && c.d >= 3, "perfect_tensor requires prime d >= 3");
    if (c.gate.kind == "xyz") need(c.d == 2, "xyz gates require d = 2");
    const ResourceEstimate r = estimate_resources(c);
    if (!r.accepted) throw BudgetExceeded(r.message);
}

}  // namespace brickdesign
