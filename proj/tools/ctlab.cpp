#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "ctlab/config.hpp"
#include "ctlab/output.hpp"
#include "ctlab/parallel.hpp"
#include "ctlab/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ctlab: Combes-Thomas, Helffer-Sjoestrand and Feynman-Kac experiments on lattice magnetic "
                 "Schroedinger operators"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, plot_kind = "decay", csv_path;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "experiment config (JSON)");
    app.add_option("--out", out_dir, "output directory (plot: output SVG file)");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "worker threads, 0 = all cores");
    app.add_flag("--verbose", verbose, "progress on stderr");

    const std::pair<const char*, const char*> experiments[] = {
        {"build", "assemble the Hamiltonian and report its structure"},
        {"spectrum", "eigenvalues of the Hamiltonian"},
        {"constants", "admissible Combes-Thomas parameters and the U+V inverse check"},
        {"ct-decay", "resolvent block norms against the exponential bound"},
        {"kernel-decay", "block norms of f(H) times distance^k"},
        {"hs-apply", "f(H) from the quasi-analytic extension integral, compared with the exact spectral sum"},
        {"fk-semigroup", "Monte Carlo path-integral estimate of exp(-tH) phi"},
        {"smoothing", "L^p -> L^q semigroup norms and their fitted envelope"},
    };
    for (const auto& [name, help] : experiments) app.add_subcommand(name, help);
    CLI::App* plot = app.add_subcommand("plot", "render a decay or envelope CSV as SVG");
    plot->add_option("--csv", csv_path, "input CSV")->required();
    plot->add_option("--kind", plot_kind, "decay or envelope")->check(CLI::IsMember({"decay", "envelope"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        ctlab::set_thread_count(threads);
        if (plot->parsed()) {
            if (out_dir.empty()) throw ctlab::ValidationError("--out: SVG path required");
            const auto kind = plot_kind == "decay" ? ctlab::PlotKind::Decay : ctlab::PlotKind::Envelope;
            const auto s = ctlab::emit_plot(csv_path, kind, out_dir);
            if (verbose) std::cerr << "[plot] " << s.points << " points, rate " << s.rate << '\n';
            std::cout << out_dir << '\n';
            return 0;
        }
        const std::string sub = app.get_subcommands().front()->get_name();
        const auto kind = *ctlab::parse_kind(sub);
        if (config_path.empty()) throw ctlab::ValidationError("--config: required for '" + sub + "'");
        const ctlab::ExperimentConfig cfg = ctlab::load_config(config_path, kind);
        ctlab::RunOptions opt;
        opt.out = out_dir;
        opt.seed = seed;
        if (verbose) opt.log = &std::cerr;
        const auto res = ctlab::run_experiment(cfg, kind, opt);
        for (const auto& f : res.files) std::cout << f.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ctlab::exit_code_for(e);
    }
}
