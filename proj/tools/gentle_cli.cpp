// Batch front end for the echo-spectroscopy pipeline.  Subcommands map onto
// the pipeline stages; every run writes a manifest alongside its outputs so
// results are reproducible from the config hash and root seed alone.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "gentle/gentle.hpp"
#include "gentle/io.hpp"

namespace fs = std::filesystem;
using namespace gentle;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool stage_cache = false;
};

ExperimentConfig load_or_die(const CommonArgs& args, json& raw) {
    ValidationReport report;
    std::ifstream in(args.config_path);
    if (!in) {
        std::cerr << "[config] cannot open " << args.config_path << "\n";
        std::exit(2);
    }
    try {
        in >> raw;
    } catch (const std::exception& e) {
        std::cerr << "[config] JSON parse error: " << e.what() << "\n";
        std::exit(2);
    }
    ExperimentConfig cfg = parse_config(raw, report);
    if (!report.ok()) {
        for (const auto& e : report.errors) std::cerr << "[config] " << e << "\n";
        std::exit(2);
    }
    if (args.seed_set) cfg.seed = args.seed;
    if (args.threads > 0) cfg.threads = args.threads;
    if (!args.out.empty()) cfg.out = args.out;
    cfg.reconstruct.seed = cfg.seed;
    return cfg;
}

void write_manifest(const fs::path& dir, const json& raw_config, const ExperimentConfig& cfg,
                    const std::string& command, std::vector<std::string> files) {
    Manifest m;
    m.config_hash = config_hash(raw_config);
    m.seed = cfg.seed;
    m.command = command;
    m.files = std::move(files);
    atomic_write(dir / "manifest.json", to_json(m).dump(2) + "\n");
}

json echo_bundle_json(const SimulatedEcho& sim) {
    json j;
    j["record"] = to_json(sim.measured);
    j["exact"] = to_json(sim.exact);
    j["moments"] = {{"expH", sim.expH}, {"expH2", sim.expH2}};
    j["initial_energy"] = sim.initial_energy;
    j["E0_exact"] = sim.E0_exact;
    j["n_sites"] = sim.n_sites;
    return j;
}

SimulatedEcho echo_bundle_from_json(const json& j) {
    SimulatedEcho sim;
    sim.measured = echo_from_json(j.at("record"));
    sim.exact = echo_from_json(j.at("exact"));
    sim.expH = j.at("moments").at("expH").get<double>();
    sim.expH2 = j.at("moments").at("expH2").get<double>();
    sim.initial_energy = j.at("initial_energy").get<double>();
    sim.E0_exact = j.at("E0_exact").get<double>();
    sim.n_sites = j.at("n_sites").get<int>();
    return sim;
}

std::string windows_csv(const GentleResult& res) {
    std::ostringstream os;
    os << "window_end,E0\n";
    for (std::size_t k = 0; k < res.window_estimates.size(); ++k)
        os << format_g17(res.window_ends[k]) << ',' << format_g17(res.window_estimates[k]) << '\n';
    return os.str();
}

std::string kde_csv(const GentleResult& res, double grid_res) {
    std::ostringstream os;
    os << "energy,density\n";
    for (auto [x, d] : kde_curve(res.window_estimates, grid_res))
        os << format_g17(x) << ',' << format_g17(d) << '\n';
    return os.str();
}

int cmd_validate(const CommonArgs& args) {
    json raw;
    std::ifstream in(args.config_path);
    if (!in) {
        std::cerr << "[config] cannot open " << args.config_path << "\n";
        return 2;
    }
    try {
        in >> raw;
    } catch (const std::exception& e) {
        std::cerr << "[config] JSON parse error: " << e.what() << "\n";
        return 2;
    }
    ValidationReport report;
    parse_config(raw, report);
    for (const auto& e : report.errors) std::cout << e << "\n";
    if (report.ok()) std::cout << "config ok\n";
    return report.ok() ? 0 : 1;
}

int cmd_simulate_echo(const CommonArgs& args) {
    json raw;
    ExperimentConfig cfg = load_or_die(args, raw);
    SimulatedEcho sim = simulate_echo(cfg);
    fs::path dir = cfg.out;
    atomic_write(dir / "echo.json", echo_bundle_json(sim).dump(2) + "\n");
    atomic_write(dir / "echo.csv", to_csv(sim.measured));
    write_manifest(dir, raw, cfg, "simulate-echo", {"echo.json", "echo.csv"});
    std::cout << "wrote " << (dir / "echo.json").string() << " (" << sim.measured.size()
              << " points)\n";
    return 0;
}

int cmd_fit_spectrum(const CommonArgs& args, const std::string& input) {
    json raw;
    ExperimentConfig cfg = load_or_die(args, raw);
    json in = json::parse(read_file(input));
    EchoRecord rec = in.contains("record") ? echo_from_json(in.at("record")) : echo_from_json(in);
    SpectrumEstimate est = fit_spectrum_cs(rec, cfg.sigproc);
    fs::path dir = cfg.out;
    atomic_write(dir / "spectrum.json", to_json(est).dump(2) + "\n");
    write_manifest(dir, raw, cfg, "fit-spectrum", {"spectrum.json"});
    std::cout << "wrote " << (dir / "spectrum.json").string() << " (" << est.modes()
              << " modes)\n";
    return 0;
}

int cmd_gentle(const CommonArgs& args) {
    json raw;
    ExperimentConfig cfg = load_or_die(args, raw);
    fs::path dir = cfg.out;

    SimulatedEcho sim;
    if (args.stage_cache && fs::exists(dir / "echo.json")) {
        sim = echo_bundle_from_json(json::parse(read_file(dir / "echo.json")));
        std::cout << "stage-cache: reusing " << (dir / "echo.json").string() << "\n";
    } else {
        sim = simulate_echo(cfg);
    }
    GentleResult res = gentle_analyze(cfg, sim);

    std::vector<std::string> files{"echo.json", "echo.csv", "gentle_result.json", "windows.csv",
                                   "kde_curve.csv", "spectrum_full.json"};
    atomic_write(dir / "echo.json", echo_bundle_json(sim).dump(2) + "\n");
    atomic_write(dir / "echo.csv", to_csv(sim.measured));
    atomic_write(dir / "gentle_result.json", to_json(res).dump(2) + "\n");
    atomic_write(dir / "windows.csv", windows_csv(res));
    atomic_write(dir / "kde_curve.csv", kde_csv(res, cfg.pipeline.kde_resolution));
    // Full-record spectrum, identical to fit-spectrum run on echo.json.
    SpectrumEstimate full = fit_spectrum_cs(sim.measured, cfg.sigproc);
    atomic_write(dir / "spectrum_full.json", to_json(full).dump(2) + "\n");
    write_manifest(dir, raw, cfg, "gentle", files);

    std::cout << "E0 estimate: " << format_g17(res.boot_mean) << " +/- " << format_g17(res.boot_std)
              << "\n";
    std::cout << "eps_gentle = " << res.eps_gentle << ", eps_initial = " << res.eps_initial << "\n";
    return 0;
}

int cmd_observable(const CommonArgs& args) {
    json raw;
    ExperimentConfig cfg = load_or_die(args, raw);
    ObservableEstimate est = hellmann_feynman(cfg);
    fs::path dir = cfg.out;
    atomic_write(dir / "observable.json", to_json(est).dump(2) + "\n");
    std::ostringstream os;
    os << "mu,E0,err\n";
    for (std::size_t i = 0; i < est.mu.size(); ++i)
        os << format_g17(est.mu[i]) << ',' << format_g17(est.E0[i]) << ','
           << format_g17(est.err[i]) << '\n';
    atomic_write(dir / "hf_sweep.csv", os.str());
    write_manifest(dir, raw, cfg, "observable", {"observable.json", "hf_sweep.csv"});
    std::cout << "<O> = " << format_g17(est.value) << " +/- " << format_g17(est.error) << "\n";
    return 0;
}

int cmd_mitigate(const CommonArgs& args, const std::string& input, const std::string& calib) {
    json raw;
    ExperimentConfig cfg = load_or_die(args, raw);
    json in = json::parse(read_file(input));
    EchoRecord noisy = in.contains("record") ? echo_from_json(in.at("record")) : echo_from_json(in);
    EchoRecord cal = echo_from_json(json::parse(read_file(calib)));
    DecayFit fit = fit_decay(cal);
    EchoRecord corrected = correct_echo(noisy, fit);
    fs::path dir = cfg.out;
    json out;
    out["record"] = to_json(corrected);
    out["fit"] = {{"A", fit.A}, {"B", fit.B}, {"residual_norm", fit.residual_norm}};
    atomic_write(dir / "corrected.json", out.dump(2) + "\n");
    atomic_write(dir / "corrected.csv", to_csv(corrected));
    write_manifest(dir, raw, cfg, "mitigate", {"corrected.json", "corrected.csv"});
    std::cout << "decay fit: A = " << fit.A << ", B = " << fit.B << "\n";
    return 0;
}

// Exact mode list (gap, 2 p_n p_m) of an eigen-superposition configuration.
SpectrumEstimate exact_superposition_spectrum(const ExperimentConfig& cfg) {
    AssembledModel am = assemble_model(cfg.model);
    EigenSystem eig = eigendecompose(am.spec, *am.basis);
    const auto& comps = cfg.prep.components;
    SpectrumEstimate exact;
    struct Mode {
        double w, a;
    };
    std::vector<Mode> modes;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        exact.offset += comps[i].weight * comps[i].weight;
        for (std::size_t j = i + 1; j < comps.size(); ++j)
            modes.push_back(
                {std::abs(eig.energies[comps[j].index] - eig.energies[comps[i].index]),
                 2 * comps[i].weight * comps[j].weight});
    }
    std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.w < b.w; });
    for (const auto& m : modes) {
        exact.freqs.push_back(m.w);
        exact.amps.push_back(m.a);
    }
    return exact;
}

int cmd_benchmark(const CommonArgs& args, const std::string& mode, int n_seeds,
                  const std::vector<double>& ta_list) {
    json raw;
    ExperimentConfig cfg = load_or_die(args, raw);
    fs::path dir = cfg.out;

    if (mode == "cs-vs-fft") {
        if (cfg.prep.schedule != PrepSchedule::EigenSuperposition) {
            std::cerr << "[benchmark] cs-vs-fft requires an eigen_superposition preparation\n";
            return 2;
        }
        SpectrumEstimate exact = exact_superposition_spectrum(cfg);
        AssembledModel am = assemble_model(cfg.model);
        EigenSystem eig = eigendecompose(am.spec, *am.basis);
        std::vector<EigenComponent> comps;
        for (const auto& c : cfg.prep.components) comps.push_back({c.index, c.weight, c.phase});
        VectorXcd psi = eigen_superposition(eig, comps);

        std::ostringstream os;
        os << "seed,delta_av_cs,delta_av_fft\n";
        for (int s = 0; s < n_seeds; ++s) {
            std::uint64_t seed = derive_seed(cfg.seed, "benchmark", static_cast<std::uint64_t>(s));
            auto rt = sampling_schedule(cfg.echo.T_G, SamplingMode::Random, cfg.echo.M1, seed,
                                        cfg.echo.dT_G);
            EchoRecord ycs = loschmidt_echo(psi, eig, rt, am.spec.unit);
            if (cfg.echo.shots > 0)
                ycs = sample_shots(ycs, cfg.echo.shots, derive_seed(seed, "cs-shots"));
            double dcs = delta_av(fit_spectrum_cs(ycs, cfg.sigproc), exact);

            auto et = sampling_schedule(cfg.echo.T_G, SamplingMode::Equispaced, cfg.echo.M1, seed);
            EchoRecord yfft = loschmidt_echo(psi, eig, et, am.spec.unit);
            if (cfg.echo.shots > 0)
                yfft = sample_shots(yfft, cfg.echo.shots, derive_seed(seed, "fft-shots"));
            double dfft;
            try {
                dfft = delta_av(fft_baseline(yfft, cfg.sigproc.amp_thresh, cfg.sigproc.max_modes),
                                exact);
            } catch (const std::exception&) {
                dfft = std::numeric_limits<double>::quiet_NaN();
            }
            os << s << ',' << format_g17(dcs) << ',' << format_g17(dfft) << '\n';
        }
        atomic_write(dir / "benchmark_cs_vs_fft.csv", os.str());
        write_manifest(dir, raw, cfg, "benchmark cs-vs-fft", {"benchmark_cs_vs_fft.csv"});
        std::cout << "wrote " << (dir / "benchmark_cs_vs_fft.csv").string() << "\n";
        return 0;
    }

    if (mode == "prep-sweep") {
        if (ta_list.empty()) {
            std::cerr << "[benchmark] prep-sweep needs --ta values\n";
            return 2;
        }
        std::ostringstream os;
        os << "gT_a,eps_initial,eps_gentle\n";
        for (double ta : ta_list) {
            ExperimentConfig run = cfg;
            run.prep.T_a = ta;
            GentleResult res = gentle_estimate(run);
            os << format_g17(ta) << ',' << format_g17(res.eps_initial) << ','
               << format_g17(res.eps_gentle) << '\n';
            std::cout << "gT_a = " << ta << ": eps_initial = " << res.eps_initial
                      << ", eps_gentle = " << res.eps_gentle << "\n";
        }
        atomic_write(dir / "prep_sweep.csv", os.str());
        write_manifest(dir, raw, cfg, "benchmark prep-sweep", {"prep_sweep.csv"});
        return 0;
    }

    std::cerr << "[benchmark] unknown mode " << mode << " (cs-vs-fft | prep-sweep)\n";
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Loschmidt-echo ground-state estimation pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string input, calib, bench_mode;
    int n_seeds = 20;
    std::vector<double> ta_list;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
        cmd->add_option("--out", args.out, "output directory (overrides config)");
        cmd->add_option("--seed", args.seed, "root seed (overrides config)")
            ->each([&](const std::string&) { args.seed_set = true; });
        cmd->add_option("--threads", args.threads, "worker threads (overrides config)");
        cmd->add_flag("--stage-cache", args.stage_cache, "reuse stage outputs already in --out");
    };

    auto* validate = app.add_subcommand("validate", "schema-check a config without running");
    add_common(validate);
    auto* sim = app.add_subcommand("simulate-echo", "generate the measured echo record");
    add_common(sim);
    auto* fit = app.add_subcommand("fit-spectrum", "sparse spectral fit of a saved record");
    add_common(fit);
    fit->add_option("--in", input, "echo record JSON")->required();
    auto* run = app.add_subcommand("gentle", "full ground-state energy estimate");
    add_common(run);
    auto* obs = app.add_subcommand("observable", "Hellmann-Feynman observable sweep");
    add_common(obs);
    auto* mit = app.add_subcommand("mitigate", "echo-verification correction of a noisy record");
    add_common(mit);
    mit->add_option("--in", input, "noisy echo record JSON")->required();
    mit->add_option("--calib", calib, "verification calibration record JSON")->required();
    auto* bench = app.add_subcommand("benchmark", "method benchmarks (cs-vs-fft, prep-sweep)");
    add_common(bench);
    bench->add_option("mode", bench_mode, "benchmark mode")->required();
    bench->add_option("--seeds", n_seeds, "number of seeds");
    bench->add_option("--ta", ta_list, "preparation times for prep-sweep");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(args);
        if (sim->parsed()) return cmd_simulate_echo(args);
        if (fit->parsed()) return cmd_fit_spectrum(args, input);
        if (run->parsed()) return cmd_gentle(args);
        if (obs->parsed()) return cmd_observable(args);
        if (mit->parsed()) return cmd_mitigate(args, input, calib);
        if (bench->parsed()) return cmd_benchmark(args, bench_mode, n_seeds, ta_list);
    } catch (const invalid_argument_error& e) {
        std::cerr << "[stage:config] " << e.what() << "\n";
        return 2;
    } catch (const domain_error& e) {
        std::cerr << "[stage:run] " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "[error] " << e.what() << "\n";
        return 1;
    }
    return 0;
}
