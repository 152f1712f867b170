#pragma once

// Executes an ExperimentConfig and writes CSV series plus a JSON sidecar
// into <output>/<config hash>/.

#include "config.hpp"
#include "fitting.hpp"
#include "perm_dynamics.hpp"
#include "replica_channel.hpp"
#include "sampled_moments.hpp"
#include "spectral.hpp"
#include "theory.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#ifndef BRICKDESIGN_VERSION
#define BRICKDESIGN_VERSION "0.1.0"
#endif

namespace brickdesign {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr const char* kSpectraHeader = "d,k,L,p,lambda1,converged,residual";
inline constexpr const char* kFitsHeader = "delta,r1,r2,t_star";

/// Writes through a temporary file so readers never see partial output.
inline void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << content;
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline ExperimentConfig load_config(const fs::path& path) {
    return parse_config(read_file(path), path.string());
}

/// One point of a parameter sweep.
struct SweepPoint {
    std::string param;  // delta | J | p | L | none
    double value = 0.0;
    int L = 1;
};

inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& c) {
    std::vector<SweepPoint> out;
    auto add = [&](const std::string& name, const std::vector<double>& vals) {
        for (double v : vals) out.push_back({name, v, c.L});
    };
    if (!c.sweep_delta.empty()) add("delta", c.sweep_delta);
    if (!c.sweep_j.empty()) add("J", c.sweep_j);
    if (!c.sweep_p.empty() && c.mode != Mode::Spectrum) add("p", c.sweep_p);
    if (c.mode == Mode::Spectrum) {
        const std::vector<int> Ls = c.sweep_L.empty() ? std::vector<int>{c.L} : c.sweep_L;
        const std::vector<double> ps = c.sweep_p.empty() ? std::vector<double>{c.gate.p} : c.sweep_p;
        for (int L : Ls)
            for (double p : ps) out.push_back({"p", p, L});
    }
    if (out.empty()) out.push_back({"none", 0.0, c.L});
    const int kinds = int(!c.sweep_delta.empty()) + int(!c.sweep_j.empty()) + int(!c.sweep_p.empty());
    if (kinds > 1) throw ConfigError("sweep: give only one of delta, J, p");
    return out;
}

/// Concrete gate for a sweep point.
inline Gate gate_for(const ExperimentConfig& c, const SweepPoint& pt) {
    const GateConfig& g = c.gate;
    if (g.kind == "xyz") {
        const double delta = pt.param == "delta" ? pt.value : g.delta;
        const double j = pt.param == "J" ? pt.value : g.j;
        return build_xyz_gate(kPi / 4 - delta, kPi / 4 - delta, j);
    }
    if (g.kind == "du_phase") {
        RMatrix ph(c.d, c.d);
        for (int a = 0; a < c.d; ++a)
            for (int b = 0; b < c.d; ++b) ph(a, b) = g.phases[a][b];
        return build_du_phase_gate(c.d, ph);
    }
    if (g.kind == "perfect_tensor") return build_perfect_tensor(c.d);
    if (g.kind == "hadamard") return hadamard_phase_gate(c.d);
    if (g.kind == "swap") return swap_gate(c.d);
    if (g.kind == "haar") {
        Rng rng(g.gate_seed);
        return make_gate(c.d, haar_unitary(c.d * c.d, rng), "haar");
    }
    throw ConfigError("gate kind '" + g.kind + "' has no concrete two-site unitary");
}

inline CircuitSpec circuit_for(const ExperimentConfig& c, const SweepPoint& pt) {
    CircuitSpec spec;
    if (c.gate.kind == "xyz") {
        const double delta = pt.param == "delta" ? pt.value : c.gate.delta;
        const double j = pt.param == "J" ? pt.value : c.gate.j;
        const std::vector<EulerAngles> angles = c.gate.euler == "random"
                                                    ? random_euler_angles(2 * pt.L, c.gate.euler_seed)
                                                    : std::vector<EulerAngles>(2 * pt.L);
        spec = xyz_circuit(pt.L, delta, j, angles);
    } else {
        spec = uniform_circuit(gate_for(c, pt), pt.L);
    }
    return spec;
}

inline OneSiteSet one_site_set(const ExperimentConfig& c) {
    return c.one_site == "pauli" ? pauli_set() : haar_set(c.d);
}

inline PureState initial_state(const ExperimentConfig& c, int L) {
    return c.initial == "bell_pairs" ? initial_bell_pairs(c.d, L) : initial_all_zero(c.d, L);
}

inline AveragedGate averaged_gate_for(const ExperimentConfig& c, const SweepPoint& pt, int k) {
    if (c.gate.kind == "avg_du") return averaged_du_gate(c.d, pt.param == "p" ? pt.value : c.gate.p);
    return average_gate(gate_for(c, pt), build_perm_basis(c.d, k));
}

struct RunOutput {
    fs::path dir;
    Json sidecar;
};

inline void log_progress(const std::string& msg) {
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    std::cerr << msg << std::endl;
}

namespace detail {

inline std::string series_csv(const std::vector<MomentRow>& rows) {
    std::ostringstream os;
    write_series_csv(os, rows);
    return os.str();
}

inline Json base_sidecar(const ExperimentConfig& c) {
    Json j;
    j["config_hash"] = config_hash(c);
    j["mode"] = to_string(c.mode);
    j["master_seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
    j["code_version"] = BRICKDESIGN_VERSION;
    j["d"] = c.d;
    j["L"] = c.L;
    j["k"] = c.k;
    return j;
}

/// Moment series for one sweep point of a simulation mode.
inline std::vector<MomentRow> simulate_point(const ExperimentConfig& c, const SweepPoint& pt, std::uint64_t seed,
                                             int workers) {
    switch (c.mode) {
    case Mode::CaseAEnumerate: {
        CircuitSpec spec = circuit_for(c, pt);
        spec.boundary = one_site_set(c);
        return frame_potential_enumerate(spec, initial_state(c, pt.L), c.k, c.t_max).rows;
    }
    case Mode::CaseASample: {
        CircuitSpec spec = circuit_for(c, pt);
        spec.boundary = one_site_set(c);
        SamplingOptions opts;
        opts.all_pairs = c.all_pairs;
        opts.workers = workers;
        return frame_potential_sample(spec, initial_state(c, pt.L), c.k, c.t_max, c.n_samples, seed, opts).rows;
    }
    case Mode::CaseAReplica:
    case Mode::CaseBReplica: {
        std::vector<MomentRow> rows;
        for (int k : c.k) {
            ReplicaChannel ch;
            ch.circuit = circuit_for(c, pt);
            ch.k = k;
            if (c.mode == Mode::CaseAReplica) {
                ch.circuit.boundary = one_site_set(c);
                ch.placement = TwirlPlacement::Boundary;
                ch.twirl = build_twirl(c.d, k, c.one_site == "pauli" ? TwirlKind::PauliTwirl : TwirlKind::HaarTwirl);
            } else {
                ch.circuit.structured = haar_set(c.d);
                ch.placement = TwirlPlacement::EveryLeg;
                ch.twirl = build_twirl(c.d, k, TwirlKind::HaarTwirl);
            }
            auto part = replica_series(ch, initial_state(c, pt.L), c.t_max);
            rows.insert(rows.end(), part.begin(), part.end());
        }
        return rows;
    }
    case Mode::CaseBReduced: {
        std::vector<MomentRow> rows;
        const InitialKind kind = c.initial == "bell_pairs" ? InitialKind::BellPairs : InitialKind::AllZero;
        for (int k : c.k) {
            const ReducedChannel ch = uniform_reduced_channel(averaged_gate_for(c, pt, k), pt.L);
            auto part = reduced_series(ch, kind, c.t_max);
            rows.insert(rows.end(), part.begin(), part.end());
        }
        return rows;
    }
    default:
        throw ConfigError("mode '" + to_string(c.mode) + "' is not a simulation mode");
    }
}

inline std::string fmt_value(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace detail

/// Runs a simulation mode; sweep points run in parallel, each with a derived seed.
inline RunOutput run_simulation(const ExperimentConfig& c) {
    if (!c.seed) throw ConfigError("simulation modes require a master seed (--seed)");
    validate_config(c);
    RunOutput out;
    out.dir = fs::path(c.output) / config_hash(c);
    const std::vector<SweepPoint> pts = sweep_points(c);
    const int inner = pts.size() > 1 ? 1 : worker_count();
    std::vector<std::string> files(pts.size());
    std::vector<std::uint64_t> seeds(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        seeds[i] = derive_seed(*c.seed, i);
        const auto rows = detail::simulate_point(c, pts[i], seeds[i], inner);
        files[i] = pts.size() == 1 ? "series.csv" : "series_" + std::to_string(i) + ".csv";
        write_atomic(out.dir / files[i], detail::series_csv(rows));
        log_progress("[" + std::to_string(i + 1) + "/" + std::to_string(pts.size()) + "] " + pts[i].param + "=" +
                     detail::fmt_value(pts[i].value) + " done");
    });
    out.sidecar = detail::base_sidecar(c);
    out.sidecar["sweep_param"] = pts.front().param;
    Json entries = Json::array();
    for (std::size_t i = 0; i < pts.size(); ++i)
        entries.push_back({{"index", i}, {"value", pts[i].value}, {"seed", seeds[i]}, {"file", files[i]}});
    out.sidecar["entries"] = entries;
    write_atomic(out.dir / "run.json", out.sidecar.dump(2) + "\n");
    return out;
}

/// |λ1| for every (L, p) point; writes spectra.csv.
inline RunOutput run_spectrum(const ExperimentConfig& c) {
    validate_config(c);
    RunOutput out;
    out.dir = fs::path(c.output) / config_hash(c);
    const std::vector<SweepPoint> pts = sweep_points(c);
    const int k = c.k.front();
    std::vector<std::string> lines(pts.size());
    std::vector<Json> details(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        const AveragedGate w = averaged_gate_for(c, pts[i], k);
        const double p = c.gate.kind == "avg_du" ? pts[i].value : entangling_power(gate_for(c, pts[i]));
        const ReducedChannel ch = uniform_reduced_channel(w, pts[i].L);
        SpectralOptions opts;
        opts.tol = c.tol;
        const SpectralResult r = reduced_spectrum(ch, opts);
        lines[i] = std::to_string(c.d) + "," + std::to_string(k) + "," + std::to_string(pts[i].L) + "," +
                   format_double(p) + "," + format_double(r.lambda1) + "," + (r.converged ? "1" : "0") + "," +
                   format_double(r.residual);
        Json dj;
        dj["L"] = pts[i].L;
        dj["p"] = p;
        dj["lambda1"] = r.lambda1;
        dj["unit_multiplicity"] = r.unit_multiplicity;
        dj["applications"] = r.applications;
        if (k == 2) dj["predicted"] = predicted_lambda1(c.d, p, 2);
        details[i] = dj;
        log_progress("[" + std::to_string(i + 1) + "/" + std::to_string(pts.size()) + "] L=" +
                     std::to_string(pts[i].L) + " p=" + detail::fmt_value(p) + " |lambda1|=" +
                     detail::fmt_value(r.lambda1));
    });
    std::string csv = std::string(kSpectraHeader) + "\n";
    for (const auto& l : lines) csv += l + "\n";
    write_atomic(out.dir / "spectra.csv", csv);
    out.sidecar = detail::base_sidecar(c);
    out.sidecar["points"] = details;
    write_atomic(out.dir / "run.json", out.sidecar.dump(2) + "\n");
    return out;
}

/// Overlap magnitudes at depth t with their generalized gamma fit.
inline RunOutput run_overlap_hist(const ExperimentConfig& c) {
    if (!c.seed) throw ConfigError("overlap_hist requires a master seed (--seed)");
    validate_config(c);
    RunOutput out;
    out.dir = fs::path(c.output) / config_hash(c);
    const SweepPoint pt{"none", 0.0, c.L};
    CircuitSpec spec = circuit_for(c, pt);
    spec.boundary = one_site_set(c);
    const auto ov = collect_overlaps(spec, initial_state(c, c.L), c.t, c.n_samples, *c.seed);
    std::string csv = "overlap\n";
    for (double v : ov) csv += format_double(v) + "\n";
    write_atomic(out.dir / "overlaps.csv", csv);
    const GammaFit f = fit_overlap_distribution(ov);
    out.sidecar = detail::base_sidecar(c);
    out.sidecar["t"] = c.t;
    out.sidecar["n_samples"] = c.n_samples;
    out.sidecar["fit"] = {{"a", f.a},   {"p", f.p},
                          {"q", f.q},   {"ks", f.ks},
                          {"log_likelihood", f.log_likelihood}, {"converged", f.converged}};
    write_atomic(out.dir / "run.json", out.sidecar.dump(2) + "\n");
    log_progress("overlap fit: p=" + detail::fmt_value(f.p) + " q=" + detail::fmt_value(f.q));
    return out;
}

/// Closed-form quantities as JSON.
inline Json theory_report(int d, int L, int k) {
    const theory::TheoryContext t = theory::make_context(d, L, k);
    Json j;
    j["d"] = d;
    j["L"] = L;
    j["k"] = k;
    const theory::BigInt dim = boost::multiprecision::pow(theory::BigInt(d), 2 * L);
    j["F_H"] = t.frame_potential_haar;
    j["F_H_exact"] = "1/binom(" + theory::BigInt(dim + k - 1).str() + "," + std::to_string(k) + ")";
    j["F_H_asymptotic"] = t.frame_potential_haar_asymptotic;
    j["trace_moment"] = theory::trace_moment_exact(d, k).str();
    j["du_early_rate_pauli"] = t.early_rate_pauli;
    j["du_early_rate_haar"] = t.early_rate_haar;
    j["haar_circuit_rate"] = t.haar_circuit_rate;
    return j;
}

/// Series file set from a run directory (run.json) or a single CSV.
struct FitInput {
    std::vector<double> values;
    std::vector<fs::path> files;
};

inline FitInput fit_inputs(const fs::path& input) {
    FitInput in;
    if (fs::is_directory(input)) {
        const Json side = Json::parse(read_file(input / "run.json"));
        if (!side.contains("entries")) throw ConfigError("fit: " + (input / "run.json").string() + " has no series entries");
        for (const auto& e : side["entries"]) {
            in.values.push_back(e["value"].get<double>());
            in.files.push_back(input / e["file"].get<std::string>());
        }
    } else {
        in.values.push_back(0.0);
        in.files.push_back(input);
    }
    return in;
}

/// Two-step fits of every series; writes fits.csv for the first requested k.
inline RunOutput run_fit(const ExperimentConfig& c) {
    validate_config(c);
    const FitInput in = fit_inputs(c.input);
    RunOutput out;
    out.dir = fs::path(c.output) / config_hash(c);
    const int k = c.k.front();
    TwoStepOptions opts;
    opts.noise_floor = c.noise_floor;
    opts.t_min = c.t_min;
    std::string csv = std::string(kFitsHeader) + "\n";
    Json fits = Json::array();
    std::vector<double> deltas, r1s;
    for (std::size_t i = 0; i < in.files.size(); ++i) {
        std::ifstream is(in.files[i]);
        if (!is) throw std::runtime_error("fit: cannot read " + in.files[i].string());
        MomentSeries s;
        s.rows = read_series_csv(is);
        const auto rows = s.for_k(k);
        if (rows.empty()) throw ConfigError("fit: " + in.files[i].string() + " has no rows for k=" + std::to_string(k));
        const double fh = rows.front().F / (1.0 + rows.front().delta2);
        const TwoStepFit f = fit_two_step(rows, fh, opts);
        csv += format_double(in.values[i]) + "," + format_double(f.r1) + "," + format_double(f.r2) + "," +
               format_double(f.t_star) + "\n";
        fits.push_back({{"value", in.values[i]}, {"file", in.files[i].filename().string()}, {"r1", f.r1},
                        {"c1", f.c1}, {"r2", f.r2}, {"c2", f.c2}, {"t_star", f.t_star},
                        {"breakpoint", f.breakpoint}, {"rms1", f.rms1}, {"rms2", f.rms2}});
        deltas.push_back(in.values[i]);
        r1s.push_back(f.r1);
    }
    write_atomic(out.dir / "fits.csv", csv);
    out.sidecar = detail::base_sidecar(c);
    out.sidecar["input"] = c.input;
    out.sidecar["fits"] = fits;
    try {
        const RateTrend tr = rate_vs_delta(deltas, r1s);
        out.sidecar["rate_vs_delta"] = {{"slope", tr.slope},
                                        {"slope_ci", tr.slope_ci},
                                        {"intercept", tr.intercept},
                                        {"intercept_ci", tr.intercept_ci},
                                        {"n_points", tr.n_points}};
    } catch (const std::invalid_argument&) {
        out.sidecar["rate_vs_delta"] = nullptr;
    }
    write_atomic(out.dir / "run.json", out.sidecar.dump(2) + "\n");
    return out;
}

/// Dry-run report.
inline Json validate_report(const ExperimentConfig& c) {
    const ResourceEstimate r = estimate_resources(c);
    Json j;
    j["mode"] = to_string(c.mode);
    j["config_hash"] = config_hash(c);
    j["state_kind"] = r.kind;
    j["amplitudes"] = r.amplitudes;
    j["bytes"] = r.bytes;
    j["operations"] = r.operations;
    try {
        validate_config(c);
        j["accepted"] = true;
    } catch (const std::exception& e) {
        j["accepted"] = false;
        j["reason"] = e.what();
    }
    return j;
}

/// Dispatches on the configured mode.
inline RunOutput run(const ExperimentConfig& c) {
    switch (c.mode) {
    case Mode::Spectrum:
        return run_spectrum(c);
    case Mode::OverlapHist:
        return run_overlap_hist(c);
    case Mode::Fit:
        return run_fit(c);
    case Mode::Theory: {
        validate_config(c);
        RunOutput out;
        out.dir = fs::path(c.output) / config_hash(c);
        out.sidecar = detail::base_sidecar(c);
        Json reports = Json::array();
        for (int k : c.k) reports.push_back(theory_report(c.d, c.L, k));
        out.sidecar["theory"] = reports;
        write_atomic(out.dir / "run.json", out.sidecar.dump(2) + "\n");
        return out;
    }
    default:
        return run_simulation(c);
    }
}

}  // namespace brickdesign
