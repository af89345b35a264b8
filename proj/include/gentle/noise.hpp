#pragma once

// Noise channels on echo records: global depolarizing damping, binomial shot
// sampling, sampling schedules, and the echo-verification mitigation
// (calibration decay fit + envelope correction).

#include <algorithm>
#include <random>

#include "gentle/echo_record.hpp"
#include "gentle/optim.hpp"

namespace gentle {

struct NoiseConfig {
    double gamma = 0.0;       // depolarizing rate, 1/time
    double T_a = 0.0;         // preparation time (noise acts for 2 T_a around the echo)
    long shots = 0;           // M per data point; 0 = exact
    std::uint64_t seed = 0;
    std::uint64_t dim = 0;    // Hilbert dimension for the identity floor
    bool include_floor = true;

    void validate() const {
        if (gamma < 0) throw invalid_argument_error("noise: gamma must be >= 0");
        if (shots < 0) throw invalid_argument_error("noise: shots must be >= 0");
    }
};

// L_M(t) = e^{-gamma (2 T_a + t)} L(t) + (1 - e^{-gamma (2 T_a + t)}) / dim.
// The floor term is dropped when include_floor is false (the damping law as
// commonly quoted); it matters for small dimensions.
inline EchoRecord depolarize_echo(const EchoRecord& echo, const NoiseConfig& cfg) {
    cfg.validate();
    EchoRecord out = echo;
    out.noise.gamma = cfg.gamma;
    out.noise.T_a = cfg.T_a;
    out.noise.floor_included = cfg.include_floor;
    if (cfg.dim) out.noise.dim = cfg.dim;
    const double d = static_cast<double>(out.noise.dim);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const double env = std::exp(-cfg.gamma * (2 * cfg.T_a + out.times[i]));
        double v = env * echo.values[i];
        if (cfg.include_floor) {
            if (out.noise.dim == 0)
                throw invalid_argument_error("noise: identity floor requires dim metadata");
            v += (1.0 - env) / d;
        }
        out.values[i] = v;
    }
    return out;
}

// Each value replaced by k/M with k ~ Binomial(M, value); values outside
// [0, 1] after noise composition are clamped first.
inline EchoRecord sample_shots(const EchoRecord& echo, long M, std::uint64_t seed) {
    if (M < 1) throw invalid_argument_error("sample_shots: M must be >= 1");
    EchoRecord out = echo;
    out.shots_per_point = M;
    out.noise.seed = seed;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        double p = std::clamp(echo.values[i], 0.0, 1.0);
        auto rng = make_rng(seed, "shots", i);
        std::binomial_distribution<long> bin(M, p);
        out.values[i] = static_cast<double>(bin(rng)) / static_cast<double>(M);
    }
    return out;
}

enum class SamplingMode { Equispaced, Random };

// Sorted times in (0, T_G].  Equispaced: {T_G/M1 * k}.  Random: M1 draws
// without replacement from the fine grid of spacing grid_dt.
inline std::vector<double> sampling_schedule(double T_G, SamplingMode mode, int M1,
                                             std::uint64_t seed, double grid_dt = 0.1) {
    if (M1 < 2) throw invalid_argument_error("sampling_schedule: M1 must be >= 2");
    if (T_G <= 0 || grid_dt <= 0) throw invalid_argument_error("sampling_schedule: bad T_G/grid");
    if (mode == SamplingMode::Equispaced) {
        std::vector<double> out(M1);
        for (int k = 1; k <= M1; ++k) out[k - 1] = T_G / M1 * k;
        return out;
    }
    const int grid_n = static_cast<int>(std::round(T_G / grid_dt));
    if (M1 > grid_n)
        throw invalid_argument_error("infeasible-schedule: M1 exceeds the fine-grid size");
    std::vector<int> idx(grid_n);
    for (int k = 0; k < grid_n; ++k) idx[k] = k + 1;
    auto rng = make_rng(seed, "schedule");
    // Partial Fisher-Yates; first M1 entries are the sample.
    for (int k = 0; k < M1; ++k) {
        std::uniform_int_distribution<int> pick(k, grid_n - 1);
        std::swap(idx[k], idx[pick(rng)]);
    }
    std::vector<double> out(M1);
    for (int k = 0; k < M1; ++k) out[k] = idx[k] * grid_dt;
    std::sort(out.begin(), out.end());
    return out;
}

struct DecayFit {
    double A = 1.0;
    double B = 0.0;
    double residual_norm = 0.0;
    std::uint64_t dim = 0; // floor-aware fit when nonzero
};

// Fit of the verification decay.  With dim metadata the model is
// A e^{-Bt} + (1 - A e^{-Bt})/dim, otherwise the bare exponential A e^{-Bt}.
// Log-linear regression seeds a Levenberg-Marquardt refinement.
inline DecayFit fit_decay(const EchoRecord& calibration) {
    const auto n = calibration.values.size();
    if (n < 2) throw invalid_argument_error("fit_decay: need at least two points");
    for (double v : calibration.values)
        if (v <= 0) throw domain_error("fit-domain: calibration values must be positive");
    const std::uint64_t dim = calibration.noise.dim;
    const double d = static_cast<double>(dim);

    // Linearized start: log(v - floor-ish) ~ log A - B t.  Subtracting 1/dim is
    // the right first-order floor removal for e^{-Bt} not too small.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = calibration.values[i];
        if (dim) v -= (1.0 - v) / (d - 1.0);
        if (v <= 0) continue;
        double x = calibration.times[i], y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++used;
    }
    if (used < 2) throw domain_error("fit-domain: too few usable calibration values");
    double denom = used * sxx - sx * sx;
    double B0 = denom != 0.0 ? -(used * sxy - sx * sy) / denom : 0.0;
    double A0 = std::exp((sy + B0 * sx) / used);
    B0 = std::max(B0, 0.0);
    A0 = std::clamp(A0, 1e-12, 1.0);

    auto model = [&](const VectorXd& p, VectorXd& r, MatrixXd& J) {
        const double A = p[0], B = p[1];
        r.resize(static_cast<Eigen::Index>(n));
        J.resize(static_cast<Eigen::Index>(n), 2);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = calibration.times[i];
            const double e = std::exp(-B * t);
            double m = A * e;
            double dmdA = e, dmdB = -A * t * e;
            if (dim) {
                m += (1.0 - A * e) / d;
                dmdA *= (1.0 - 1.0 / d);
                dmdB *= (1.0 - 1.0 / d);
            }
            r[static_cast<Eigen::Index>(i)] = m - calibration.values[i];
            J(static_cast<Eigen::Index>(i), 0) = dmdA;
            J(static_cast<Eigen::Index>(i), 1) = dmdB;
        }
    };
    VectorXd p0(2);
    p0 << A0, B0;
    LmResult lm = levenberg_marquardt(model, p0);
    DecayFit fit;
    fit.A = std::clamp(lm.params[0], 1e-12, 1.0);
    fit.B = std::max(lm.params[1], 0.0);
    fit.residual_norm = std::sqrt(lm.residual_sq);
    fit.dim = dim;
    return fit;
}

// Inverts the depolarizing envelope.  The calibration circuit runs forward and
// backward, so its decay rate is 2 gamma while the echo damps at gamma: the
// echo envelope is A e^{-B t / 2}.  The identity floor is subtracted before
// rescaling when the fit is floor-aware.
inline EchoRecord correct_echo(const EchoRecord& noisy, const DecayFit& fit) {
    EchoRecord out = noisy;
    out.noise.corrected = true;
    const double d = static_cast<double>(fit.dim);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const double env = fit.A * std::exp(-fit.B * out.times[i] / 2.0);
        double v = noisy.values[i];
        if (fit.dim) v -= (1.0 - env) / d;
        out.values[i] = v / env;
    }
    return out;
}

// Survival probability of the forward+backward verification circuit,
// e^{-gamma (2 T_a + 2t)} plus the identity floor, then shot-sampled.
inline EchoRecord simulate_verification_signal(const NoiseConfig& cfg,
                                               const std::vector<double>& times) {
    cfg.validate();
    EchoRecord rec;
    rec.times = times;
    rec.values.resize(times.size());
    rec.noise.gamma = cfg.gamma;
    rec.noise.T_a = cfg.T_a;
    rec.noise.dim = cfg.dim;
    rec.noise.floor_included = cfg.include_floor;
    const double d = static_cast<double>(cfg.dim);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double env = std::exp(-cfg.gamma * (2 * cfg.T_a + 2 * times[i]));
        double v = env;
        if (cfg.include_floor) {
            if (cfg.dim == 0)
                throw invalid_argument_error("noise: identity floor requires dim metadata");
            v += (1.0 - env) / d;
        }
        rec.values[i] = v;
    }
    if (cfg.shots > 0) rec = sample_shots(rec, cfg.shots, derive_seed(cfg.seed, "verification"));
    return rec;
}

} // namespace gentle
