// Command-line front end: simulate, spectrum, theory, fit, overlap-hist, validate.

#include "brickdesign/runner.hpp"

#include <CLI11/CLI11.hpp>

#include <iostream>

using namespace brickdesign;

namespace {

int fail(const std::string& type, const std::string& message, int line = 0) {
    Json err;
    err["error"] = type;
    err["message"] = message;
    if (line > 0) err["line"] = line;
    std::cerr << err.dump() << std::endl;
    return 1;
}

ExperimentConfig load_checked(const std::string& path, std::initializer_list<Mode> allowed,
                              const std::string& command) {
    ExperimentConfig c = load_config(path);
    bool ok = false;
    for (Mode m : allowed) ok = ok || c.mode == m;
    if (!ok) throw ConfigError("mode '" + to_string(c.mode) + "' cannot run under '" + command + "'");
    return c;
}

void report(const RunOutput& out) {
    Json j;
    j["output"] = out.dir.string();
    j["config_hash"] = out.sidecar.value("config_hash", "");
    std::cout << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design generation in minimally random brickwork circuits"};
    app.require_subcommand(1);

    std::string config_path, out_dir, input;
    std::uint64_t seed = 0;

    auto* simulate = app.add_subcommand("simulate", "Run a case_a_* or case_b_* configuration");
    simulate->add_option("config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
    simulate->add_option("--seed", seed, "Master seed")->required();
    simulate->add_option("--out", out_dir, "Output root (overrides the config)");

    auto* spectrum = app.add_subcommand("spectrum", "Subleading eigenvalue of the reduced channel");
    spectrum->add_option("config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
    spectrum->add_option("--out", out_dir, "Output root (overrides the config)");

    auto* hist = app.add_subcommand("overlap-hist", "Overlap magnitudes and their generalized gamma fit");
    hist->add_option("config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
    hist->add_option("--seed", seed, "Master seed")->required();
    hist->add_option("--out", out_dir, "Output root (overrides the config)");

    int d = 2, L = 1, k = 2;
    double eps = 0.0, lambda = 0.0;
    auto* theory = app.add_subcommand("theory", "Closed-form reference values");
    theory->add_option("--d", d, "Local dimension")->check(CLI::Range(2, 64));
    theory->add_option("--L", L, "Number of site pairs")->check(CLI::Range(1, 64));
    theory->add_option("--k", k, "Moment order")->check(CLI::Range(1, 12));
    theory->add_option("--eps", eps, "Target accuracy for the design time");
    theory->add_option("--lambda1", lambda, "Saturated |lambda1| for the design time");

    double noise_floor = 1e-12;
    int fit_k = 0;
    double t_min = 0.0;
    auto* fit = app.add_subcommand("fit", "Two-step rate fits of series CSVs");
    fit->add_option("input", input, "Run directory or series CSV (or a fit config with --config)");
    fit->add_option("--config", config_path, "Fit configuration")->check(CLI::ExistingFile);
    fit->add_option("--k", fit_k, "Moment order to fit");
    fit->add_option("--noise-floor", noise_floor, "Points with delta2 below this are dropped");
    fit->add_option("--t-min", t_min, "Points with t below this are ignored");
    fit->add_option("--out", out_dir, "Output root");

    auto* validate = app.add_subcommand("validate", "Dry-run resource estimate");
    validate->add_option("config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("usage", e.what());
    }

    try {
        if (*simulate) {
            ExperimentConfig c =
                load_checked(config_path,
                             {Mode::CaseAEnumerate, Mode::CaseASample, Mode::CaseAReplica, Mode::CaseBReduced,
                              Mode::CaseBReplica},
                             "simulate");
            c.seed = seed;
            if (!out_dir.empty()) c.output = out_dir;
            report(run_simulation(c));
        } else if (*spectrum) {
            ExperimentConfig c = load_checked(config_path, {Mode::Spectrum}, "spectrum");
            if (!out_dir.empty()) c.output = out_dir;
            report(run_spectrum(c));
        } else if (*hist) {
            ExperimentConfig c = load_checked(config_path, {Mode::OverlapHist}, "overlap-hist");
            c.seed = seed;
            if (!out_dir.empty()) c.output = out_dir;
            report(run_overlap_hist(c));
        } else if (*theory) {
            Json j = theory_report(d, L, k);
            if (eps > 0.0 && lambda > 0.0) j["design_time"] = theory::design_time(eps, k, L, d, lambda);
            std::cout << j.dump(2) << std::endl;
        } else if (*fit) {
            ExperimentConfig c;
            if (!config_path.empty()) {
                c = load_checked(config_path, {Mode::Fit}, "fit");
            } else {
                if (input.empty()) throw ConfigError("fit: give an input path or --config");
                std::string text = "mode = \"fit\"\ninput = " + Json(input).dump() + "\n";
                if (fit_k > 0) text += "k = " + std::to_string(fit_k) + "\n";
                text += "noise_floor = " + format_double(noise_floor) + "\n";
                text += "t_min = " + format_double(t_min) + "\n";
                c = parse_config(text, "command line");
            }
            if (!input.empty()) c.input = input;
            if (fit_k > 0) c.k = {fit_k};
            if (!out_dir.empty()) c.output = out_dir;
            report(run_fit(c));
        } else if (*validate) {
            const ExperimentConfig c = load_config(config_path);
            const Json j = validate_report(c);
            std::cout << j.dump(2) << std::endl;
        }
    } catch (const ConfigError& e) {
        return fail("config", e.what(), e.line());
    } catch (const BudgetExceeded& e) {
        return fail("budget", e.what());
    } catch (const std::exception& e) {
        return fail("runtime", e.what());
    }
    return 0;
}
