#pragma once

// End-to-end orchestration of the protocol: model assembly, state
// preparation, echo generation (state-vector, thermal or free-fermion), the
// noise chain, windowed sub-signal estimates, KDE mode extraction, bootstrap
// error bars, and the Hellmann-Feynman observable sweep.

#include <numeric>

#include "gentle/config.hpp"
#include "gentle/engine.hpp"
#include "gentle/freefermion.hpp"
#include "gentle/noise.hpp"
#include "gentle/reconstruct.hpp"
#include "gentle/sigproc.hpp"
#include "gentle/thermal.hpp"
#include "gentle/trotter.hpp"

namespace gentle {

// ---------------------------------------------------------------------------
// KDE mode and bootstrap
// ---------------------------------------------------------------------------

// Gaussian-kernel density on a grid of spacing grid_res over
// [min - 3h, max + 3h]; returns the argmax, lowest grid point on ties.
// Bandwidth: Silverman's rule, floored at twice the grid resolution.
inline double kde_mode(const std::vector<double>& samples, double grid_res = 1e-3) {
    if (samples.empty()) throw invalid_argument_error("kde_mode: no samples");
    const auto n = samples.size();
    // Work on the sorted copy throughout so the result does not depend on the
    // sample order (bitwise reproducibility across resampling schedules).
    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double s : sorted) var += (s - mean) * (s - mean);
    var /= static_cast<double>(n);
    double sigma = std::sqrt(var);
    auto quantile = [&](double p) {
        double idx = p * static_cast<double>(n - 1);
        auto lo = static_cast<std::size_t>(idx);
        double frac = idx - static_cast<double>(lo);
        return (lo + 1 < n) ? sorted[lo] * (1 - frac) + sorted[lo + 1] * frac : sorted[lo];
    };
    double iqr = quantile(0.75) - quantile(0.25);
    double spread = sigma;
    if (iqr > 0) spread = std::min(sigma, iqr / 1.34);
    double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    h = std::max(h, 2.0 * grid_res);

    // Grid points snapped to integer multiples of the resolution.
    double lo_edge = std::floor((sorted.front() - 3 * h) / grid_res) * grid_res;
    double hi_edge = std::ceil((sorted.back() + 3 * h) / grid_res) * grid_res;
    const auto n_pts = static_cast<std::size_t>(std::round((hi_edge - lo_edge) / grid_res)) + 1;

    double best_val = -1.0, best_x = lo_edge;
    const double inv2h2 = 1.0 / (2.0 * h * h);
    for (std::size_t k = 0; k < n_pts; ++k) {
        double x = lo_edge + static_cast<double>(k) * grid_res;
        double d = 0.0;
        for (double s : sorted) {
            double u = x - s;
            d += std::exp(-u * u * inv2h2);
        }
        if (d > best_val * (1.0 + 1e-12)) {
            best_val = d;
            best_x = x;
        }
    }
    return best_x;
}

// Density curve over the same grid kde_mode scans, for plotting.
inline std::vector<std::pair<double, double>> kde_curve(const std::vector<double>& samples,
                                                        double grid_res = 1e-3) {
    if (samples.empty()) throw invalid_argument_error("kde_curve: no samples");
    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double s : sorted) var += (s - mean) * (s - mean);
    double sigma = std::sqrt(var / static_cast<double>(n));
    auto quantile = [&](double p) {
        double idx = p * static_cast<double>(n - 1);
        auto lo = static_cast<std::size_t>(idx);
        double frac = idx - static_cast<double>(lo);
        return (lo + 1 < n) ? sorted[lo] * (1 - frac) + sorted[lo + 1] * frac : sorted[lo];
    };
    double iqr = quantile(0.75) - quantile(0.25);
    double spread = iqr > 0 ? std::min(sigma, iqr / 1.34) : sigma;
    double h = std::max(0.9 * spread * std::pow(static_cast<double>(n), -0.2), 2.0 * grid_res);
    double lo_edge = std::floor((sorted.front() - 3 * h) / grid_res) * grid_res;
    double hi_edge = std::ceil((sorted.back() + 3 * h) / grid_res) * grid_res;
    const auto n_pts = static_cast<std::size_t>(std::round((hi_edge - lo_edge) / grid_res)) + 1;
    std::vector<std::pair<double, double>> out;
    out.reserve(n_pts);
    const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2 * kPi));
    const double inv2h2 = 1.0 / (2.0 * h * h);
    for (std::size_t k = 0; k < n_pts; ++k) {
        double x = lo_edge + static_cast<double>(k) * grid_res;
        double d = 0.0;
        for (double s : sorted) d += std::exp(-(x - s) * (x - s) * inv2h2);
        out.emplace_back(x, d * norm);
    }
    return out;
}

// Subsampling bootstrap: each iteration draws ceil(frac*K) samples without
// replacement (with replacement behind the flag), applies kde_mode, and the
// iteration outputs give (mean, std).
inline std::pair<double, double> bootstrap(const std::vector<double>& samples, double frac,
                                           int n_boot, std::uint64_t seed, double grid_res = 1e-3,
                                           bool with_replacement = false) {
    if (samples.empty()) throw invalid_argument_error("bootstrap: no samples");
    if (frac <= 0 || frac > 1) throw invalid_argument_error("invalid-config: frac must be in (0,1]");
    if (n_boot < 1) throw invalid_argument_error("invalid-config: n_boot must be >= 1");
    const auto K = samples.size();
    const auto m = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(K)));
    if (m == 0) throw invalid_argument_error("invalid-config: empty bootstrap subsample");

    std::vector<double> outs(static_cast<std::size_t>(n_boot));
    std::vector<std::size_t> idx(K);
    for (int it = 0; it < n_boot; ++it) {
        auto rng = make_rng(seed, "bootstrap", static_cast<std::uint64_t>(it));
        std::vector<double> sub(m);
        if (with_replacement) {
            std::uniform_int_distribution<std::size_t> pick(0, K - 1);
            for (std::size_t i = 0; i < m; ++i) sub[i] = samples[pick(rng)];
        } else {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            for (std::size_t i = 0; i < m; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, K - 1);
                std::swap(idx[i], idx[pick(rng)]);
                sub[i] = samples[idx[i]];
            }
        }
        outs[static_cast<std::size_t>(it)] = kde_mode(sub, grid_res);
    }
    bool all_equal = true;
    for (double v : outs)
        if (v != outs[0]) all_equal = false;
    if (all_equal) return {outs[0], 0.0};
    double mean = std::accumulate(outs.begin(), outs.end(), 0.0) / static_cast<double>(n_boot);
    double var = 0.0;
    for (double v : outs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n_boot);
    return {mean, std::sqrt(var)};
}

// ---------------------------------------------------------------------------
// Windowed estimates
// ---------------------------------------------------------------------------

struct WindowedResult {
    std::vector<double> estimates;    // E0 per successful window
    std::vector<double> window_ends;  // matching [0, t] window end times
    int windows_total = 0;
    int windows_failed = 0;
    int windows_low_confidence = 0;
};

// K = floor((T_G - t0)/dt) + 1 windows, window k spanning [0, t0 + k dt];
// each runs the sigproc + reconstruct chain on the truncated record.
inline WindowedResult windowed_estimates(const EchoRecord& echo, double expH, double expH2,
                                         double t0, double dt, const SigprocParams& sig,
                                         const ReconstructParams& rec, int threads = 1) {
    if (echo.times.empty() || echo.times.back() + 1e-9 < t0)
        throw invalid_argument_error("windowed_estimates: echo max time below t0");
    const double T_end = echo.times.back();
    const int K = static_cast<int>(std::floor((T_end - t0) / dt + 1e-9)) + 1;

    struct Slot {
        double E0 = 0.0;
        double t_end = 0.0;
        int status = -1; // -1 failed, 0 ok, 1 low confidence
    };
    std::vector<Slot> slots(static_cast<std::size_t>(K));
    parallel_for(
        static_cast<std::size_t>(K),
        [&](std::size_t k) {
            Slot& slot = slots[k];
            slot.t_end = t0 + static_cast<double>(k) * dt;
            try {
                EchoRecord sub = echo.truncated(slot.t_end);
                if (sub.size() < 8) return;
                SpectrumEstimate fit = fit_spectrum_cs(sub, sig);
                if (fit.modes() == 0) {
                    // No mode above the amplitude threshold: within the
                    // protocol's resolution the state is an eigenstate, so
                    // E0 = <H> -- but only when the record really is flat up
                    // to shot noise and sub-threshold oscillations.
                    double mean = 0;
                    for (double v : sub.values) mean += v;
                    mean /= static_cast<double>(sub.size());
                    double rms = 0;
                    for (double v : sub.values) rms += (v - mean) * (v - mean);
                    rms = std::sqrt(rms / static_cast<double>(sub.size()));
                    double shot = sub.shots_per_point > 0
                                      ? std::sqrt(std::max(mean * (1 - mean), 0.0) /
                                                  static_cast<double>(sub.shots_per_point))
                                      : 0.0;
                    if (rms <= std::max({1e-8, 2 * shot, sig.amp_thresh})) {
                        slot.E0 = expH;
                        slot.status = 0;
                    }
                    return;
                }
                GentleSolution sol = solve_gentle(fit, expH, expH2, rec);
                slot.E0 = sol.ground_energy();
                slot.status = sol.low_confidence ? 1 : 0;
            } catch (const std::exception&) {
                slot.status = -1;
            }
        },
        threads);

    WindowedResult out;
    out.windows_total = K;
    for (const auto& s : slots) {
        if (s.status < 0) {
            ++out.windows_failed;
            continue;
        }
        if (s.status == 1) ++out.windows_low_confidence;
        out.estimates.push_back(s.E0);
        out.window_ends.push_back(s.t_end);
    }
    if (out.estimates.empty())
        throw domain_error("pipeline-failed: no window produced an estimate");
    if (out.windows_low_confidence == static_cast<int>(out.estimates.size()))
        throw domain_error("pipeline-failed: all windows flagged low-confidence");
    return out;
}

// ---------------------------------------------------------------------------
// Model and preparation assembly
// ---------------------------------------------------------------------------

struct AssembledModel {
    HamiltonianSpec spec;  // target Hamiltonian (bias and HF perturbation included)
    std::shared_ptr<Basis> basis;
    int n_sites = 0;
};

inline AssembledModel assemble_model(const ModelConfig& mc, const ObservableSpec* hf_obs = nullptr,
                                     double hf_mu = 0.0) {
    AssembledModel am;
    if (mc.type == ModelType::Tfim) {
        am.spec = build_tfim(mc.lattice, mc.J, mc.g, mc.staggered_h);
        am.basis = std::make_shared<Basis>(make_spin_basis(mc.lattice));
    } else {
        std::map<std::pair<int, Spin>, double> chem;
        for (const auto& c : mc.chem)
            chem[{ladder(mc.lattice.Lx).site(c.x, c.y), c.spin}] += c.mu;
        am.spec = build_fh_ladder(mc.lattice.Lx, mc.t, mc.U, chem);
        int ns = am.spec.lattice.sites();
        int nu = mc.n_up >= 0 ? mc.n_up : ns / 2;
        int nd = mc.n_down >= 0 ? mc.n_down : ns / 2;
        am.basis = std::make_shared<Basis>(make_fermion_basis(am.spec.lattice, nu, nd));
    }
    if (mc.bias && mc.bias->strength != 0.0) {
        ObservableSpec ob = build_observable(mc.bias->kind, am.spec.lattice, mc.bias->x);
        am.spec = perturb(am.spec, ob, mc.bias->strength);
    }
    if (hf_obs != nullptr) am.spec = perturb(am.spec, *hf_obs, hf_mu);
    am.n_sites = am.spec.lattice.sites();
    return am;
}

struct Preparation {
    VectorXcd psi;              // prepared pure state
    VectorXcd psi0;             // initial product state (basis of the projective echo)
    TrotterCircuit circuit;     // empty for circuit-free schedules
    HamiltonianSpec H0;         // reference Hamiltonian for thermal starts
    bool has_circuit = false;
};

namespace pipedetail {

inline bool is_leg_bond(const Lattice& lat, const Term& t) {
    return lat.site_y(t.site_a) == lat.site_y(t.site_b);
}

} // namespace pipedetail

inline Preparation prepare_state(const ExperimentConfig& cfg, const AssembledModel& am,
                                 const EigenSystem& eig) {
    const auto& lat = am.spec.lattice;
    Preparation prep;
    switch (cfg.prep.schedule) {
    case PrepSchedule::None:
    case PrepSchedule::RampBonds: {
        if (am.spec.fermionic())
            throw invalid_argument_error("ramp_bonds: spin models only");
        prep.psi0 = all_up_state(*am.basis);
        auto [onsite, twosite] = split_by_locality(am.spec);
        // Static part: the diagonal fields; ramped part: bonds plus any
        // single-site X terms (one commuting product group).
        std::vector<Term> stat, ramp;
        for (const auto& t : am.spec.terms)
            (is_diagonal(t.kind) ? stat : ramp).push_back(t);
        prep.H0.lattice = lat;
        prep.H0.terms = stat;
        prep.H0.unit = am.spec.unit;
        if (cfg.prep.schedule == PrepSchedule::None || cfg.prep.T_a == 0) {
            prep.psi = prep.psi0;
            prep.circuit.basis = am.basis;
            return prep;
        }
        prep.circuit = build_adiabatic_circuit(am.basis, stat, ramp, cfg.prep.T_a, cfg.prep.dT);
        prep.has_circuit = true;
        prep.psi = apply_circuit(prep.circuit, prep.psi0);
        return prep;
    }
    case PrepSchedule::ExactGround: {
        prep.psi = eig.vectors.col(0).cast<cdouble>();
        prep.psi0 = prep.psi;
        prep.circuit.basis = am.basis;
        return prep;
    }
    case PrepSchedule::EigenSuperposition: {
        std::vector<EigenComponent> comps;
        for (const auto& c : cfg.prep.components) comps.push_back({c.index, c.weight, c.phase});
        prep.psi = eigen_superposition(eig, comps);
        prep.psi0 = prep.psi;
        prep.circuit.basis = am.basis;
        return prep;
    }
    case PrepSchedule::CoupleLegs: {
        if (!am.spec.fermionic()) throw invalid_argument_error("couple_legs: FH models only");
        std::vector<Term> stat, ramp;
        for (const auto& t : am.spec.terms) {
            if (t.kind == TermKind::Hop && pipedetail::is_leg_bond(lat, t))
                ramp.push_back(t);
            else
                stat.push_back(t);
        }
        prep.H0.lattice = lat;
        prep.H0.terms = stat;
        prep.H0.unit = am.spec.unit;
        EigenSystem eig0 = eigendecompose(prep.H0, *am.basis);
        prep.psi0 = eig0.vectors.col(0).cast<cdouble>();
        prep.circuit = build_adiabatic_circuit(am.basis, stat, ramp, cfg.prep.T_a, cfg.prep.dT);
        prep.has_circuit = true;
        prep.psi = apply_circuit(prep.circuit, prep.psi0);
        return prep;
    }
    case PrepSchedule::BandToLadder: {
        if (!am.spec.fermionic()) throw invalid_argument_error("band_to_ladder: FH models only");
        if (cfg.prep.doublons.empty())
            throw invalid_argument_error("band_to_ladder: doublon sites required");
        std::vector<Term> stat, ramp;
        for (const auto& t : am.spec.terms) {
            if (t.kind == TermKind::Hop) {
                ramp.push_back(t);
            } else if (t.kind == TermKind::Density) {
                stat.push_back(t);
                Term off = t;
                off.coeff = -t.coeff; // chemical potentials ramp down to zero
                ramp.push_back(off);
            } else {
                stat.push_back(t);
            }
        }
        prep.H0.lattice = lat;
        prep.H0.terms = stat;
        prep.H0.unit = am.spec.unit;
        prep.psi0 = band_insulator_state(*am.basis, cfg.prep.doublons);
        prep.circuit = build_adiabatic_circuit(am.basis, stat, ramp, cfg.prep.T_a, cfg.prep.dT);
        prep.has_circuit = true;
        prep.psi = apply_circuit(prep.circuit, prep.psi0);
        return prep;
    }
    }
    throw invalid_argument_error("unknown preparation schedule");
}

// ---------------------------------------------------------------------------
// GentleResult
// ---------------------------------------------------------------------------

struct GentleResult {
    std::vector<double> window_estimates;
    std::vector<double> window_ends;
    double kde_estimate = 0.0;
    double boot_mean = 0.0;
    double boot_std = 0.0;
    double expH = 0.0, expH2 = 0.0;
    double initial_energy = 0.0;
    double E0_exact = 0.0;
    double eps_gentle = 0.0;   // |boot_mean - E0| / N
    double eps_initial = 0.0;  // |<H> - E0| / N
    int n_sites = 0;
    int K = 0;
    int windows_failed = 0;
    int windows_low_confidence = 0;
    double t0 = 0.0, dt = 0.0;
    int n_boot = 0;
    double boot_frac = 0.0;
    EchoRecord echo_measured;  // record fed to the spectral analysis

    double estimate() const { return boot_mean; }
};

inline nlohmann::json to_json(const GentleResult& r) {
    nlohmann::json j;
    j["window_estimates"] = r.window_estimates;
    j["window_ends"] = r.window_ends;
    j["kde_estimate"] = r.kde_estimate;
    j["bootstrap"] = {{"mean", r.boot_mean}, {"std", r.boot_std}};
    j["expH"] = r.expH;
    j["expH2"] = r.expH2;
    j["initial_energy"] = r.initial_energy;
    j["E0_exact"] = r.E0_exact;
    j["eps_gentle"] = r.eps_gentle;
    j["eps_initial"] = r.eps_initial;
    j["n_sites"] = r.n_sites;
    j["windows"] = {{"K", r.K},
                    {"failed", r.windows_failed},
                    {"low_confidence", r.windows_low_confidence},
                    {"t0", r.t0},
                    {"dt", r.dt}};
    j["bootstrap_config"] = {{"n_boot", r.n_boot}, {"frac", r.boot_frac}};
    return j;
}

// ---------------------------------------------------------------------------
// The full estimate
// ---------------------------------------------------------------------------

namespace pipedetail {

inline std::vector<double> echo_times(const EchoConfig& ec, std::uint64_t seed) {
    if (ec.M1 > 0) return sampling_schedule(ec.T_G, ec.sampling, ec.M1, seed, ec.dT_G);
    return time_grid(ec.T_G, ec.dT_G);
}

struct NoiseChainOutput {
    EchoRecord measured;
    EchoRecord exact;
};

inline NoiseChainOutput apply_noise_chain(const ExperimentConfig& cfg, EchoRecord exact,
                                          std::uint64_t dim, const std::string& shot_stage) {
    NoiseChainOutput out;
    out.exact = exact;
    EchoRecord rec = std::move(exact);
    DecayFit fit;
    bool have_fit = false;
    if (cfg.noise.gamma > 0) {
        NoiseConfig nc;
        nc.gamma = cfg.noise.gamma;
        nc.T_a = cfg.prep.T_a;
        nc.dim = dim;
        nc.include_floor = cfg.noise.include_floor && dim > 0;
        rec = depolarize_echo(rec, nc);
        if (cfg.noise.mitigate) {
            NoiseConfig cal = nc;
            cal.shots = cfg.noise.calib_shots;
            cal.seed = derive_seed(cfg.seed, "calibration");
            EchoRecord calib = simulate_verification_signal(cal, rec.times);
            fit = fit_decay(calib);
            have_fit = true;
        }
    }
    if (cfg.echo.shots > 0)
        rec = sample_shots(rec, cfg.echo.shots, derive_seed(cfg.seed, shot_stage));
    if (have_fit) rec = correct_echo(rec, fit);
    out.measured = std::move(rec);
    return out;
}

} // namespace pipedetail

// Everything the measurement stage produces: the record fed to the analysis
// plus the moment inputs and the oracle reference.
struct SimulatedEcho {
    EchoRecord measured;
    EchoRecord exact;
    double expH = 0.0, expH2 = 0.0;
    double initial_energy = 0.0;
    double E0_exact = 0.0;
    int n_sites = 0;
};

inline SimulatedEcho simulate_echo(const ExperimentConfig& cfg,
                                   const ObservableSpec* hf_obs = nullptr, double hf_mu = 0.0) {
    SimulatedEcho sim;
    std::vector<double> times = pipedetail::echo_times(cfg.echo, derive_seed(cfg.seed, "schedule"));
    double h1 = 0.0, h2 = 0.0;
    EchoRecord exact_echo;
    EchoRecord short_exact;
    std::uint64_t dim = 0;

    if (cfg.pipeline.backend == Backend::FreeFermion) {
        FreeFermionRamp ramp{cfg.model.lattice.Lx, cfg.model.J, cfg.model.g, cfg.prep.T_a,
                             cfg.prep.dT};
        GaussianState prepared = gaussian_prepare(ramp);
        QuadraticHamiltonian Hf = jw_tfim_chain(ramp.N, ramp.J_final, ramp.g);
        exact_echo = gaussian_prepare_and_echo(ramp, times);
        auto [m1, m2] = gaussian_energy_moments(prepared, Hf);
        h1 = m1;
        h2 = m2;
        sim.E0_exact = even_sector_ground_energy(Hf);
        sim.n_sites = ramp.N;
        dim = ramp.N <= 62 ? (std::uint64_t{1} << ramp.N) : 0;
        if (!cfg.pipeline.oracle_moments) {
            std::vector<double> ts;
            for (int i = 1; i <= cfg.short_time.points; ++i)
                ts.push_back(cfg.short_time.T_s_max * i / cfg.short_time.points);
            short_exact = gaussian_prepare_and_echo(ramp, ts);
        }
    } else {
        AssembledModel am = assemble_model(cfg.model, hf_obs, hf_mu);
        EigenSystem eig = eigendecompose(am.spec, *am.basis);
        Preparation prep = prepare_state(cfg, am, eig);
        sim.n_sites = am.n_sites;
        dim = static_cast<std::uint64_t>(am.basis->dim);

        // Oracle reference: the lowest level in the prepared state's support.
        // Symmetry sectors the dynamics cannot reach (e.g. the odd spin-flip
        // sector of a chain prepared from the all-up state) carry exactly
        // zero weight and are excluded; for finite chains in the ordered
        // phase the sector splitting is far from negligible.
        auto supported_ground = [&](const VectorXd& weights) {
            for (Eigen::Index n = 0; n < weights.size(); ++n)
                if (weights[n] > 1e-10) return eig.energies[n];
            return eig.ground_energy();
        };

        std::vector<double> short_ts;
        for (int i = 1; i <= cfg.short_time.points; ++i)
            short_ts.push_back(cfg.short_time.T_s_max * i / cfg.short_time.points);

        if (!std::isinf(cfg.noise.beta)) {
            if (!prep.has_circuit)
                throw invalid_argument_error("thermal pipeline requires a preparation circuit");
            ThermalState rho0 = thermal_state(prep.H0, *am.basis, cfg.noise.beta);
            ThermalEnsemble ens = thermal_ensemble(rho0, prep.circuit, eig);
            exact_echo = thermal_echo(ens, times, cfg.noise.beta, am.spec.unit);
            auto [m1, m2] = thermal_moments(ens);
            h1 = m1;
            h2 = m2;
            VectorXd weights = ens.R.diagonal().real();
            sim.E0_exact = supported_ground(weights);
            if (!cfg.pipeline.oracle_moments)
                short_exact = thermal_echo(ens, short_ts, cfg.noise.beta, am.spec.unit);
        } else {
            exact_echo = loschmidt_echo(prep.psi, eig, times, am.spec.unit);
            h1 = expectation(prep.psi, am.spec, *am.basis, 1);
            h2 = expectation(prep.psi, am.spec, *am.basis, 2);
            sim.E0_exact = supported_ground(spectral_weights(prep.psi, eig));
            if (!cfg.pipeline.oracle_moments)
                short_exact = loschmidt_echo(prep.psi, eig, short_ts, am.spec.unit);
        }
    }

    sim.initial_energy = h1;
    auto chain = pipedetail::apply_noise_chain(cfg, exact_echo, dim, "echo-shots");
    sim.exact = std::move(chain.exact);
    sim.measured = std::move(chain.measured);

    if (!cfg.pipeline.oracle_moments) {
        auto short_chain = pipedetail::apply_noise_chain(cfg, short_exact, dim, "short-shots");
        double varH = short_time_variance(short_chain.measured, cfg.short_time.quartic).varH;
        h2 = varH + h1 * h1;
    }
    sim.expH = h1;
    sim.expH2 = h2;
    return sim;
}

// Windowed analysis + KDE + bootstrap over an already-measured record.
inline GentleResult gentle_analyze(const ExperimentConfig& cfg, const SimulatedEcho& sim) {
    GentleResult res;
    res.t0 = cfg.pipeline.t0;
    res.dt = cfg.pipeline.dt;
    res.n_boot = cfg.pipeline.n_boot;
    res.boot_frac = cfg.pipeline.boot_frac;
    res.expH = sim.expH;
    res.expH2 = sim.expH2;
    res.initial_energy = sim.initial_energy;
    res.E0_exact = sim.E0_exact;
    res.n_sites = sim.n_sites;
    res.echo_measured = sim.measured;

    WindowedResult win =
        windowed_estimates(sim.measured, sim.expH, sim.expH2, cfg.pipeline.t0, cfg.pipeline.dt,
                           cfg.sigproc, cfg.reconstruct, cfg.threads);
    res.window_estimates = win.estimates;
    res.window_ends = win.window_ends;
    res.K = win.windows_total;
    res.windows_failed = win.windows_failed;
    res.windows_low_confidence = win.windows_low_confidence;

    res.kde_estimate = kde_mode(win.estimates, cfg.pipeline.kde_resolution);
    auto [bm, bs] = bootstrap(win.estimates, cfg.pipeline.boot_frac, cfg.pipeline.n_boot,
                              derive_seed(cfg.seed, "bootstrap"), cfg.pipeline.kde_resolution,
                              cfg.pipeline.with_replacement);
    res.boot_mean = bm;
    res.boot_std = bs;
    res.eps_gentle = std::abs(res.boot_mean - res.E0_exact) / res.n_sites;
    res.eps_initial = std::abs(res.initial_energy - res.E0_exact) / res.n_sites;
    return res;
}

inline GentleResult gentle_estimate(const ExperimentConfig& cfg,
                                    const ObservableSpec* hf_obs = nullptr, double hf_mu = 0.0) {
    return gentle_analyze(cfg, simulate_echo(cfg, hf_obs, hf_mu));
}

// ---------------------------------------------------------------------------
// Hellmann-Feynman sweep
// ---------------------------------------------------------------------------

struct ObservableEstimate {
    std::vector<double> mu;
    std::vector<double> E0;
    std::vector<double> err;
    double coeff_a = 0.0, coeff_b = 0.0, coeff_c = 0.0; // a + b mu + c mu^2
    double value = 0.0;  // <O> = b
    double error = 0.0;  // propagated from the bootstrap errors
};

// Weighted quadratic least squares y = a + b x + c x^2; err entries <= 0
// switch to an unweighted fit with the error scale taken from the residuals.
inline void quadratic_fit(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& err, ObservableEstimate& est) {
    const auto n = x.size();
    if (n < 3) throw invalid_argument_error("quadratic_fit: need at least three points");
    MatrixXd X(static_cast<Eigen::Index>(n), 3);
    VectorXd yv(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
    bool weighted = !err.empty();
    for (std::size_t i = 0; i < err.size(); ++i)
        if (err[i] <= 0) weighted = false;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = static_cast<Eigen::Index>(i);
        X(r, 0) = 1.0;
        X(r, 1) = x[i];
        X(r, 2) = x[i] * x[i];
        yv[r] = y[i];
        w[r] = weighted ? 1.0 / (err[i] * err[i]) : 1.0;
    }
    MatrixXd XtW = X.transpose() * w.asDiagonal();
    MatrixXd G = XtW * X;
    VectorXd coef = G.ldlt().solve(XtW * yv);
    est.coeff_a = coef[0];
    est.coeff_b = coef[1];
    est.coeff_c = coef[2];
    est.value = coef[1];
    MatrixXd cov = G.inverse();
    if (!weighted) {
        double s2 = (yv - X * coef).squaredNorm() / std::max<double>(1.0, static_cast<double>(n) - 3);
        cov *= s2;
    }
    est.error = std::sqrt(std::max(cov(1, 1), 0.0));
}

inline ObservableEstimate hellmann_feynman(const ExperimentConfig& cfg) {
    const auto& mus = cfg.observable.mu_values;
    if (mus.size() < 3)
        throw invalid_argument_error("hellmann_feynman: need at least three mu values");
    bool has_zero = false;
    for (double m : mus) {
        if (m == 0.0) has_zero = true;
        bool sym = false;
        for (double m2 : mus)
            if (std::abs(m + m2) < 1e-12) sym = true;
        if (!sym) throw invalid_argument_error("hellmann_feynman: mu grid must be symmetric about 0");
    }
    if (!has_zero) throw invalid_argument_error("hellmann_feynman: mu grid must contain 0");

    Lattice lat = cfg.model.type == ModelType::Tfim ? cfg.model.lattice : ladder(cfg.model.lattice.Lx);
    ObservableSpec obs = build_observable(cfg.observable.kind, lat, cfg.observable.x);

    ObservableEstimate est;
    std::vector<std::string> failures;
    for (double m : mus) {
        try {
            GentleResult r = gentle_estimate(cfg, &obs, m);
            est.mu.push_back(m);
            est.E0.push_back(r.estimate());
            est.err.push_back(r.boot_std);
        } catch (const std::exception& e) {
            failures.push_back("mu=" + format_g17(m) + ": " + e.what());
        }
    }
    if (!failures.empty()) {
        std::string msg = "partial-result: failed mu runs:";
        for (const auto& f : failures) msg += " [" + f + "]";
        throw domain_error(msg);
    }

    quadratic_fit(est.mu, est.E0, est.err, est);
    return est;
}

inline nlohmann::json to_json(const ObservableEstimate& e) {
    nlohmann::json j;
    j["mu"] = e.mu;
    j["E0"] = e.E0;
    j["err"] = e.err;
    j["fit"] = {{"a", e.coeff_a}, {"b", e.coeff_b}, {"c", e.coeff_c}};
    j["value"] = e.value;
    j["error"] = e.error;
    return j;
}

} // namespace gentle
