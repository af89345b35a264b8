#pragma once

// Declarative experiment configuration: one JSON document with nested blocks,
// schema-validated (unknown keys rejected), defaults matching the protocol
// parameters used throughout.

#include <fstream>
#include <optional>
#include <set>

#include <json.hpp>

#include "gentle/lattice.hpp"
#include "gentle/noise.hpp"
#include "gentle/reconstruct.hpp"
#include "gentle/sigproc.hpp"

namespace gentle {

using nlohmann::json;

enum class ModelType { Tfim, FhLadder };
enum class PrepSchedule { None, ExactGround, RampBonds, CoupleLegs, BandToLadder, EigenSuperposition };
enum class Backend { Engine, FreeFermion };

struct ChemEntry {
    int x = 0, y = 0;
    Spin spin = Spin::None; // None = both components
    double mu = 0.0;
};

struct BiasConfig {
    ObservableKind kind = ObservableKind::StaggeredMx;
    int x = 0;
    double strength = 0.0;
};

struct ModelConfig {
    ModelType type = ModelType::Tfim;
    Lattice lattice = Lattice{LatticeKind::Chain, 8, 1};
    double J = 1.25, g = 1.0, staggered_h = 0.0; // TFIM
    double t = 1.0, U = 8.0;                     // FH
    std::vector<ChemEntry> chem;
    int n_up = -1, n_down = -1; // -1 = half filling
    std::optional<BiasConfig> bias;
};

struct SuperpositionComponent {
    int index = 0;
    double weight = 0.0;
    double phase = 0.0;
};

struct PrepConfig {
    PrepSchedule schedule = PrepSchedule::RampBonds;
    double T_a = 5.0;
    double dT = 0.1;
    double T_stage1 = 0.0; // first-stage time for the two-stage FH schedule
    std::vector<SuperpositionComponent> components;
    std::vector<int> doublons; // band-insulator occupation (flat site indices)
};

struct EchoConfig {
    double T_G = 30.0;
    double dT_G = 0.1;
    SamplingMode sampling = SamplingMode::Equispaced;
    int M1 = 0; // 0 = full grid
    long shots = 0;
};

struct ShortTimeConfig {
    double T_s_max = 0.1;
    int points = 20;
    long shots = 0;
    bool quartic = true;
};

struct NoisePipelineConfig {
    double gamma = 0.0;
    double beta = std::numeric_limits<double>::infinity();
    bool mitigate = false;
    bool include_floor = true;
    long calib_shots = 0;
};

struct PipelineParams {
    double t0 = 5.0;
    double dt = 1.0;
    int n_boot = 1000;
    double boot_frac = 0.7;
    bool with_replacement = false;
    bool oracle_moments = true;
    Backend backend = Backend::Engine;
    double kde_resolution = 1e-3;
};

struct ObservableConfig {
    ObservableKind kind = ObservableKind::StaggeredMx;
    int x = 0;
    std::vector<double> mu_values{-0.2, -0.1, 0.0, 0.1, 0.2};
};

struct ExperimentConfig {
    ModelConfig model;
    PrepConfig prep;
    EchoConfig echo;
    ShortTimeConfig short_time;
    NoisePipelineConfig noise;
    SigprocParams sigproc;
    ReconstructParams reconstruct;
    PipelineParams pipeline;
    ObservableConfig observable;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = "results";
};

// ---------------------------------------------------------------------------
// Parsing with schema validation
// ---------------------------------------------------------------------------

namespace cfgdetail {

inline void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where,
                         std::vector<std::string>& errors) {
    if (!j.is_object()) {
        errors.push_back(where + ": expected an object");
        return;
    }
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) errors.push_back(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, T def) {
    if (j.contains(key)) return j.at(key).get<T>();
    return def;
}

inline Spin parse_spin(const std::string& s) {
    if (s == "up") return Spin::Up;
    if (s == "down") return Spin::Down;
    if (s == "both") return Spin::None;
    throw invalid_argument_error("config: spin must be up|down|both");
}

inline ObservableKind parse_obs(const std::string& s) {
    if (s == "staggered_mx") return ObservableKind::StaggeredMx;
    if (s == "rung_density") return ObservableKind::RungDensity;
    throw invalid_argument_error("config: observable must be staggered_mx|rung_density");
}

} // namespace cfgdetail

struct ValidationReport {
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

inline ExperimentConfig parse_config(const json& j, ValidationReport& report) {
    using namespace cfgdetail;
    auto& errs = report.errors;
    require_keys(j,
                 {"model", "prep", "echo", "short_time", "noise", "sigproc", "reconstruct",
                  "pipeline", "observable", "seed", "threads", "out"},
                 "config", errs);

    ExperimentConfig cfg;
    try {
        if (j.contains("model")) {
            const auto& m = j.at("model");
            require_keys(m,
                         {"type", "lattice", "J", "g", "staggered_h", "t", "U", "chem", "n_up",
                          "n_down", "bias"},
                         "model", errs);
            std::string type = get_or<std::string>(m, "type", "tfim");
            if (type == "tfim")
                cfg.model.type = ModelType::Tfim;
            else if (type == "fh_ladder")
                cfg.model.type = ModelType::FhLadder;
            else
                errs.push_back("model.type: must be tfim|fh_ladder");
            if (m.contains("lattice")) {
                const auto& l = m.at("lattice");
                require_keys(l, {"kind", "Lx", "Ly"}, "model.lattice", errs);
                std::string kind = get_or<std::string>(l, "kind", "chain");
                int Lx = get_or<int>(l, "Lx", 2);
                int Ly = get_or<int>(l, "Ly", kind == "chain" ? 1 : (kind == "ladder" ? 2 : 2));
                LatticeKind lk = LatticeKind::Chain;
                if (kind == "chain")
                    lk = LatticeKind::Chain;
                else if (kind == "square")
                    lk = LatticeKind::Square;
                else if (kind == "ladder")
                    lk = LatticeKind::Ladder;
                else
                    errs.push_back("model.lattice.kind: must be chain|square|ladder");
                try {
                    cfg.model.lattice = make_lattice(lk, Lx, Ly);
                } catch (const std::exception& e) {
                    errs.push_back(std::string("model.lattice: ") + e.what());
                }
            }
            cfg.model.J = get_or<double>(m, "J", cfg.model.J);
            cfg.model.g = get_or<double>(m, "g", cfg.model.g);
            cfg.model.staggered_h = get_or<double>(m, "staggered_h", 0.0);
            cfg.model.t = get_or<double>(m, "t", 1.0);
            cfg.model.U = get_or<double>(m, "U", 8.0);
            cfg.model.n_up = get_or<int>(m, "n_up", -1);
            cfg.model.n_down = get_or<int>(m, "n_down", -1);
            if (m.contains("chem"))
                for (const auto& c : m.at("chem")) {
                    require_keys(c, {"x", "y", "spin", "mu"}, "model.chem[]", errs);
                    ChemEntry e;
                    e.x = get_or<int>(c, "x", 0);
                    e.y = get_or<int>(c, "y", 0);
                    e.spin = parse_spin(get_or<std::string>(c, "spin", "both"));
                    e.mu = get_or<double>(c, "mu", 0.0);
                    cfg.model.chem.push_back(e);
                }
            if (m.contains("bias")) {
                const auto& b = m.at("bias");
                require_keys(b, {"observable", "x", "strength"}, "model.bias", errs);
                BiasConfig bias;
                bias.kind = parse_obs(get_or<std::string>(b, "observable", "staggered_mx"));
                bias.x = get_or<int>(b, "x", 0);
                bias.strength = get_or<double>(b, "strength", 0.0);
                cfg.model.bias = bias;
            }
        }
        if (j.contains("prep")) {
            const auto& p = j.at("prep");
            require_keys(p, {"schedule", "T_a", "dT", "T_stage1", "components", "doublons"}, "prep",
                         errs);
            std::string s = get_or<std::string>(p, "schedule", "ramp_bonds");
            if (s == "none")
                cfg.prep.schedule = PrepSchedule::None;
            else if (s == "exact_ground")
                cfg.prep.schedule = PrepSchedule::ExactGround;
            else if (s == "ramp_bonds")
                cfg.prep.schedule = PrepSchedule::RampBonds;
            else if (s == "couple_legs")
                cfg.prep.schedule = PrepSchedule::CoupleLegs;
            else if (s == "band_to_ladder")
                cfg.prep.schedule = PrepSchedule::BandToLadder;
            else if (s == "eigen_superposition")
                cfg.prep.schedule = PrepSchedule::EigenSuperposition;
            else
                errs.push_back("prep.schedule: unknown schedule " + s);
            cfg.prep.T_a = get_or<double>(p, "T_a", 5.0);
            cfg.prep.dT = get_or<double>(p, "dT", 0.1);
            cfg.prep.T_stage1 = get_or<double>(p, "T_stage1", 0.0);
            if (p.contains("components"))
                for (const auto& c : p.at("components")) {
                    require_keys(c, {"index", "weight", "phase"}, "prep.components[]", errs);
                    cfg.prep.components.push_back({get_or<int>(c, "index", 0),
                                                   get_or<double>(c, "weight", 0.0),
                                                   get_or<double>(c, "phase", 0.0)});
                }
            if (p.contains("doublons")) cfg.prep.doublons = p.at("doublons").get<std::vector<int>>();
        }
        if (j.contains("echo")) {
            const auto& e = j.at("echo");
            require_keys(e, {"T_G", "dT_G", "sampling", "M1", "shots"}, "echo", errs);
            cfg.echo.T_G = get_or<double>(e, "T_G", 30.0);
            cfg.echo.dT_G = get_or<double>(e, "dT_G", 0.1);
            std::string s = get_or<std::string>(e, "sampling", "equispaced");
            if (s == "equispaced")
                cfg.echo.sampling = SamplingMode::Equispaced;
            else if (s == "random")
                cfg.echo.sampling = SamplingMode::Random;
            else
                errs.push_back("echo.sampling: must be equispaced|random");
            cfg.echo.M1 = get_or<int>(e, "M1", 0);
            cfg.echo.shots = get_or<long>(e, "shots", 0);
        }
        if (j.contains("short_time")) {
            const auto& s = j.at("short_time");
            require_keys(s, {"T_s_max", "points", "shots", "quartic"}, "short_time", errs);
            cfg.short_time.T_s_max = get_or<double>(s, "T_s_max", 0.1);
            cfg.short_time.points = get_or<int>(s, "points", 20);
            cfg.short_time.shots = get_or<long>(s, "shots", 0);
            cfg.short_time.quartic = get_or<bool>(s, "quartic", true);
        }
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            require_keys(n, {"gamma", "beta", "mitigate", "include_floor", "calib_shots"}, "noise",
                         errs);
            cfg.noise.gamma = get_or<double>(n, "gamma", 0.0);
            if (n.contains("beta") && !n.at("beta").is_null())
                cfg.noise.beta = n.at("beta").get<double>();
            cfg.noise.mitigate = get_or<bool>(n, "mitigate", false);
            cfg.noise.include_floor = get_or<bool>(n, "include_floor", true);
            cfg.noise.calib_shots = get_or<long>(n, "calib_shots", 0);
        }
        if (j.contains("sigproc")) {
            const auto& s = j.at("sigproc");
            require_keys(s, {"resolution_floor", "merge_tol", "amp_thresh", "eta0", "max_modes"},
                         "sigproc", errs);
            cfg.sigproc.resolution_floor = get_or<double>(s, "resolution_floor", 0.05);
            cfg.sigproc.merge_tol = get_or<double>(s, "merge_tol", 0.1);
            cfg.sigproc.amp_thresh = get_or<double>(s, "amp_thresh", 5e-3);
            cfg.sigproc.eta0 = get_or<double>(s, "eta0", 0.0);
            cfg.sigproc.max_modes = get_or<int>(s, "max_modes", 15);
        }
        if (j.contains("reconstruct")) {
            const auto& r = j.at("reconstruct");
            require_keys(r, {"tol", "restarts", "jitter", "low_conf_residual", "allow_missing_cross"},
                         "reconstruct", errs);
            cfg.reconstruct.tol = get_or<double>(r, "tol", 5e-3);
            cfg.reconstruct.restarts = get_or<int>(r, "restarts", 5);
            cfg.reconstruct.jitter = get_or<double>(r, "jitter", 0.05);
            cfg.reconstruct.low_conf_residual = get_or<double>(r, "low_conf_residual", 1e-3);
            cfg.reconstruct.allow_missing_cross = get_or<bool>(r, "allow_missing_cross", false);
        }
        if (j.contains("pipeline")) {
            const auto& p = j.at("pipeline");
            require_keys(p,
                         {"t0", "dt", "n_boot", "boot_frac", "with_replacement", "oracle_moments",
                          "backend", "kde_resolution"},
                         "pipeline", errs);
            cfg.pipeline.t0 = get_or<double>(p, "t0", 5.0);
            cfg.pipeline.dt = get_or<double>(p, "dt", 1.0);
            cfg.pipeline.n_boot = get_or<int>(p, "n_boot", 1000);
            cfg.pipeline.boot_frac = get_or<double>(p, "boot_frac", 0.7);
            cfg.pipeline.with_replacement = get_or<bool>(p, "with_replacement", false);
            cfg.pipeline.oracle_moments = get_or<bool>(p, "oracle_moments", true);
            cfg.pipeline.kde_resolution = get_or<double>(p, "kde_resolution", 1e-3);
            std::string b = get_or<std::string>(p, "backend", "engine");
            if (b == "engine")
                cfg.pipeline.backend = Backend::Engine;
            else if (b == "freefermion")
                cfg.pipeline.backend = Backend::FreeFermion;
            else
                errs.push_back("pipeline.backend: must be engine|freefermion");
        }
        if (j.contains("observable")) {
            const auto& o = j.at("observable");
            require_keys(o, {"kind", "x", "mu_values"}, "observable", errs);
            cfg.observable.kind = parse_obs(get_or<std::string>(o, "kind", "staggered_mx"));
            cfg.observable.x = get_or<int>(o, "x", 0);
            if (o.contains("mu_values"))
                cfg.observable.mu_values = o.at("mu_values").get<std::vector<double>>();
        }
        cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
        cfg.threads = get_or<int>(j, "threads", 1);
        cfg.out = get_or<std::string>(j, "out", "results");
        cfg.reconstruct.seed = cfg.seed;
    } catch (const std::exception& e) {
        errs.push_back(std::string("config: ") + e.what());
        return cfg;
    }

    // Cross-field validation.
    if (cfg.noise.gamma < 0) errs.push_back("noise.gamma: must be >= 0");
    if (cfg.noise.beta <= 0 && !std::isinf(cfg.noise.beta))
        errs.push_back("noise.beta: must be > 0 (null/absent for pure states)");
    if (cfg.echo.T_G <= 0) errs.push_back("echo.T_G: must be > 0");
    if (cfg.echo.dT_G <= 0) errs.push_back("echo.dT_G: must be > 0");
    if (cfg.pipeline.t0 > cfg.echo.T_G)
        errs.push_back("pipeline.t0: windowing infeasible, t0 exceeds echo.T_G");
    if (cfg.pipeline.dt <= 0) errs.push_back("pipeline.dt: must be > 0");
    if (cfg.pipeline.boot_frac <= 0 || cfg.pipeline.boot_frac > 1)
        errs.push_back("pipeline.boot_frac: must be in (0, 1]");
    if (cfg.pipeline.n_boot < 1) errs.push_back("pipeline.n_boot: must be >= 1");
    if (cfg.prep.T_a < 0) errs.push_back("prep.T_a: must be >= 0");
    if (cfg.prep.dT <= 0) errs.push_back("prep.dT: must be > 0");
    if (cfg.echo.shots < 0) errs.push_back("echo.shots: must be >= 0");
    if (cfg.sigproc.merge_tol < 0.05 || cfg.sigproc.merge_tol > 0.2)
        errs.push_back("sigproc.merge_tol: must be in [0.05, 0.2]");
    if (cfg.pipeline.backend == Backend::FreeFermion) {
        if (cfg.model.type != ModelType::Tfim || cfg.model.lattice.kind != LatticeKind::Chain)
            errs.push_back("pipeline.backend: freefermion requires a TFIM chain");
        if (cfg.prep.schedule != PrepSchedule::RampBonds && cfg.prep.schedule != PrepSchedule::None)
            errs.push_back("pipeline.backend: freefermion supports ramp_bonds/none schedules");
    }
    if (!std::isinf(cfg.noise.beta) && cfg.pipeline.backend != Backend::Engine)
        errs.push_back("noise.beta: thermal pipelines require the engine backend");
    if (cfg.prep.schedule == PrepSchedule::EigenSuperposition) {
        double total = 0;
        for (const auto& c : cfg.prep.components) total += c.weight;
        if (cfg.prep.components.empty() || std::abs(total - 1.0) > 1e-6)
            errs.push_back("prep.components: weights must be present and sum to 1");
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path, ValidationReport& report) {
    std::ifstream in(path);
    if (!in) {
        report.errors.push_back("cannot open config file: " + path);
        return {};
    }
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        report.errors.push_back(std::string("config JSON parse error: ") + e.what());
        return {};
    }
    return parse_config(j, report);
}

// Canonical hash over the sorted-key dump; identical configs hash identically.
inline std::uint64_t config_hash(const json& j) { return fnv1a64(j.dump()); }

// ---------------------------------------------------------------------------
// Term-level spec serialization (lossless round trip)
// ---------------------------------------------------------------------------

inline json to_json(const HamiltonianSpec& spec) {
    static const char* kind_names[] = {"xx", "x", "z", "hop", "uu", "density"};
    json j;
    j["lattice"] = {{"kind", spec.lattice.kind == LatticeKind::Chain
                                 ? "chain"
                                 : (spec.lattice.kind == LatticeKind::Square ? "square" : "ladder")},
                    {"Lx", spec.lattice.Lx},
                    {"Ly", spec.lattice.Ly}};
    j["unit"] = spec.unit;
    json terms = json::array();
    for (const auto& t : spec.terms)
        terms.push_back({{"kind", kind_names[static_cast<int>(t.kind)]},
                         {"coeff", t.coeff},
                         {"a", t.site_a},
                         {"b", t.site_b},
                         {"spin", static_cast<int>(t.spin)}});
    j["terms"] = terms;
    return j;
}

inline HamiltonianSpec spec_from_json(const json& j) {
    HamiltonianSpec spec;
    const auto& l = j.at("lattice");
    std::string kind = l.at("kind").get<std::string>();
    LatticeKind lk = kind == "chain" ? LatticeKind::Chain
                                     : (kind == "square" ? LatticeKind::Square : LatticeKind::Ladder);
    spec.lattice = make_lattice(lk, l.at("Lx").get<int>(), l.at("Ly").get<int>());
    spec.unit = j.at("unit").get<std::string>();
    for (const auto& t : j.at("terms")) {
        std::string k = t.at("kind").get<std::string>();
        TermKind tk;
        if (k == "xx")
            tk = TermKind::XX;
        else if (k == "x")
            tk = TermKind::X;
        else if (k == "z")
            tk = TermKind::Z;
        else if (k == "hop")
            tk = TermKind::Hop;
        else if (k == "uu")
            tk = TermKind::OnsiteUU;
        else if (k == "density")
            tk = TermKind::Density;
        else
            throw invalid_argument_error("spec JSON: unknown term kind " + k);
        spec.terms.push_back({tk, t.at("coeff").get<double>(), t.at("a").get<int>(),
                              t.at("b").get<int>(), static_cast<Spin>(t.at("spin").get<int>())});
    }
    return spec;
}

} // namespace gentle
