#pragma once

// Sparse cosine-spectrum recovery from echo records: overcomplete cosine
// grids, basis-pursuit-denoise recovery by primal-dual proximal splitting
// with eta escalation, spectrum cleanup, Levenberg-Marquardt refinement, the
// short-time variance extraction and the windowed-FFT baseline.

#include <json.hpp>

#include "gentle/echo_record.hpp"
#include "gentle/optim.hpp"

namespace gentle {

struct CosineGrid {
    VectorXd freqs;     // ascending, freqs[0] == 0
    double resolution;  // grid spacing, floored at 0.05 energy units
    std::vector<double> times;
};

// delta_omega = max(floor, 1/sqrt(M_total)); the grid spans [0, pi/dt_mean],
// the Nyquist extent of the average sampling interval (the discretized
// frequency set has as many entries per resolution step as the canonical
// square construction; random schedules keep the same extent as their
// equispaced counterpart of equal budget).
inline CosineGrid make_cosine_grid(const std::vector<double>& times, double total_shots,
                                   double resolution_floor = 0.05, double omega_max = 0.0) {
    if (times.empty()) throw invalid_argument_error("cosine grid: empty time set");
    double res = resolution_floor;
    if (total_shots > 0) res = std::max(resolution_floor, 1.0 / std::sqrt(total_shots));
    if (omega_max <= 0.0) {
        for (std::size_t i = 1; i < times.size(); ++i)
            if (times[i] <= times[i - 1])
                throw invalid_argument_error("cosine grid: non-increasing times");
        double dt_mean = times.back() / static_cast<double>(times.size());
        omega_max = kPi / dt_mean;
    }
    const int K = static_cast<int>(std::floor(omega_max / res + 1e-9));
    CosineGrid grid;
    grid.resolution = res;
    grid.times = times;
    grid.freqs.resize(K + 1);
    for (int k = 0; k <= K; ++k) grid.freqs[k] = k * res;
    return grid;
}

// DCT-II sample points (n + 1/2) dt with the matching frequency grid
// pi k / (N dt); build_cosine_matrix is orthogonal on this pair.
inline CosineGrid canonical_dct_grid(int N, double dt) {
    CosineGrid grid;
    grid.resolution = kPi / (N * dt);
    grid.times.resize(N);
    grid.freqs.resize(N);
    for (int n = 0; n < N; ++n) grid.times[n] = (n + 0.5) * dt;
    for (int k = 0; k < N; ++k) grid.freqs[k] = kPi * k / (N * dt);
    return grid;
}

// C_{nk} = beta_k cos(omega_k t_n), beta_0 = 1/sqrt(N), beta_k = sqrt(2/N).
inline MatrixXd build_cosine_matrix(const std::vector<double>& times, const CosineGrid& grid) {
    if (times.empty()) throw invalid_argument_error("cosine matrix: empty time set");
    const auto N = static_cast<Eigen::Index>(times.size());
    const auto K = grid.freqs.size();
    MatrixXd C(N, K);
    const double b0 = 1.0 / std::sqrt(static_cast<double>(N));
    const double bk = std::sqrt(2.0 / static_cast<double>(N));
    for (Eigen::Index k = 0; k < K; ++k) {
        const double beta = (grid.freqs[k] == 0.0) ? b0 : bk;
        for (Eigen::Index n = 0; n < N; ++n)
            C(n, k) = beta * std::cos(grid.freqs[k] * times[static_cast<std::size_t>(n)]);
    }
    return C;
}

// --------------------------------------------------------------------------
// Compressed sensing: min ||x||_1  s.t.  ||C x - y||_2 <= eta
// --------------------------------------------------------------------------

struct CsOptions {
    int max_iterations = 5000; // per eta round
    int max_rounds = 10;
    double eta_growth = 1.5;
    double feas_slack = 1e-6;
    double x_change_tol = 1e-10;
};

struct CsResult {
    VectorXd x;
    double eta_final = 0.0;
    double feasibility = 0.0; // ||Cx - y||
    int iterations = 0;
    int rounds = 0;
};

namespace detail {

inline double operator_norm(const MatrixXd& C) {
    VectorXd v = VectorXd::Ones(C.cols()).normalized();
    double norm = 1.0;
    for (int it = 0; it < 60; ++it) {
        v = C.transpose() * (C * v);
        norm = v.norm();
        if (norm == 0.0) return 1.0;
        v /= norm;
    }
    return std::sqrt(norm);
}

} // namespace detail

// Primal-dual proximal splitting (Chambolle-Pock) on the denoising form; the
// dual prox is the projection onto the eta-ball around y, the primal prox is
// soft thresholding.  eta is escalated x1.5 until the constraint is met.
// Columns are equilibrated to unit norm internally: on non-equispaced time
// sets the slow cosine columns carry norms up to sqrt(2), which would bias
// the l1 objective toward near-DC frequencies.
inline CsResult cs_recover(const VectorXd& y, const MatrixXd& C, double eta0,
                           const CsOptions& opt = {}) {
    if (eta0 <= 0) throw invalid_argument_error("cs_recover: eta0 must be positive");
    VectorXd colnorm(C.cols());
    for (Eigen::Index k = 0; k < C.cols(); ++k) colnorm[k] = std::max(C.col(k).norm(), 1e-12);
    MatrixXd Cn = C * colnorm.cwiseInverse().asDiagonal();
    const double L = std::max(detail::operator_norm(Cn), 1e-12);
    const double tau = 0.99 / L, sigma = 0.99 / L;

    CsResult res;
    VectorXd x = VectorXd::Zero(Cn.cols());
    VectorXd xbar = x, w = VectorXd::Zero(Cn.rows());
    VectorXd x_checkpoint = x;
    double eta = eta0;
    auto finish = [&](double feas) {
        res.x = colnorm.cwiseInverse().asDiagonal() * x;
        res.eta_final = eta;
        res.feasibility = feas;
        return res;
    };
    for (int round = 0; round < opt.max_rounds; ++round) {
        res.rounds = round + 1;
        for (int it = 0; it < opt.max_iterations; ++it) {
            // Dual ascent with ball projection.
            VectorXd u = w + sigma * (Cn * xbar);
            VectorXd dvec = u / sigma - y;
            double dn = dvec.norm();
            if (dn > eta) dvec *= eta / dn;
            w = u - sigma * (y + dvec);
            // Primal soft threshold.
            VectorXd x_new = x - tau * (Cn.transpose() * w);
            for (Eigen::Index i = 0; i < x_new.size(); ++i) {
                double v = x_new[i];
                x_new[i] = (v > tau) ? v - tau : (v < -tau ? v + tau : 0.0);
            }
            xbar = 2.0 * x_new - x;
            x = std::move(x_new);
            ++res.iterations;
            if ((it + 1) % 25 == 0) {
                double stalled = (x - x_checkpoint).norm();
                x_checkpoint = x;
                if (stalled <= opt.x_change_tol * std::max(1.0, x.norm())) {
                    double feas = (Cn * x - y).norm();
                    if (feas <= eta * (1.0 + opt.feas_slack)) return finish(feas);
                    break; // converged but infeasible at this eta
                }
            }
        }
        double feas = (Cn * x - y).norm();
        if (feas <= eta * (1.0 + opt.feas_slack)) return finish(feas);
        eta *= opt.eta_growth;
    }
    double feas = (Cn * x - y).norm();
    if (feas <= eta * (1.0 + opt.feas_slack)) return finish(feas);
    throw domain_error("recovery-failed: no feasible CS solution after eta escalation");
}

// Default noise-bound seed: the expected binomial residual norm estimated
// from the measured values, eta ~ sqrt(sum y(1-y)/M); kept slightly low (the
// escalation loop recovers) so genuine low-amplitude modes are not swallowed
// by the ball constraint.  Exact records start from a tiny bound.
inline double default_eta(const std::vector<double>& values, long shots_per_point) {
    const auto n = values.size();
    if (shots_per_point > 0) {
        double var = 0.0;
        for (double v : values) {
            double p = std::clamp(v, 0.0, 1.0);
            var += p * (1.0 - p);
        }
        var /= static_cast<double>(shots_per_point);
        return std::max(0.9 * std::sqrt(var), 1e-4 * std::sqrt(static_cast<double>(n)));
    }
    return 1e-6 * std::sqrt(static_cast<double>(n));
}

// --------------------------------------------------------------------------
// Spectrum estimates
// --------------------------------------------------------------------------

struct SpectrumEstimate {
    double offset = 0.0;
    std::vector<double> freqs; // strictly increasing, > 0
    std::vector<double> amps;  // > 0
    double residual = 0.0;     // ||y - f(t)||
    std::string provenance = "cs";
    double eta_final = 0.0;
    int iterations = 0;
    bool warning = false;

    std::size_t modes() const { return freqs.size(); }
};

inline double spectrum_model(const SpectrumEstimate& s, double t) {
    double v = s.offset;
    for (std::size_t p = 0; p < s.freqs.size(); ++p) v += s.amps[p] * std::cos(s.freqs[p] * t);
    return v;
}

inline double spectrum_residual(const SpectrumEstimate& s, const EchoRecord& y) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < y.times.size(); ++i) {
        double d = y.values[i] - spectrum_model(s, y.times[i]);
        r2 += d * d;
    }
    return std::sqrt(r2);
}

// Merge grid peaks closer than merge_tol into amplitude-weighted centroids,
// fold sub-resolution clusters into the offset, drop amplitudes below
// amp_thresh, cap the mode count (lowest amplitude dropped first).
inline SpectrumEstimate cleanup_spectrum(const VectorXd& x, const CosineGrid& grid,
                                         double merge_tol = 0.1, double amp_thresh = 5e-3,
                                         int max_modes = 15) {
    const double n = static_cast<double>(grid.times.size());
    SpectrumEstimate est;
    est.provenance = "cs";
    est.offset = x[0] / std::sqrt(n);
    const double bk = std::sqrt(2.0 / n);

    struct Peak {
        double freq, amp;
    };
    std::vector<Peak> peaks;
    for (Eigen::Index k = 1; k < x.size(); ++k)
        if (std::abs(x[k]) > 1e-12) peaks.push_back({grid.freqs[k], x[k] * bk});

    std::vector<Peak> merged;
    for (std::size_t i = 0; i < peaks.size();) {
        double wsum = std::abs(peaks[i].amp), fsum = wsum * peaks[i].freq, asum = peaks[i].amp;
        std::size_t j = i + 1;
        while (j < peaks.size() && peaks[j].freq - peaks[j - 1].freq <= merge_tol + 1e-12) {
            double w = std::abs(peaks[j].amp);
            wsum += w;
            fsum += w * peaks[j].freq;
            asum += peaks[j].amp;
            ++j;
        }
        merged.push_back({fsum / wsum, asum});
        i = j;
    }
    for (const auto& p : merged) {
        if (p.freq <= merge_tol) {
            est.offset += p.amp; // within merging distance of DC
        } else if (p.amp > amp_thresh) {
            est.freqs.push_back(p.freq);
            est.amps.push_back(p.amp);
        }
    }
    // Cap P: drop lowest amplitudes first.
    while (static_cast<int>(est.freqs.size()) > max_modes) {
        std::size_t drop = 0;
        for (std::size_t p = 1; p < est.amps.size(); ++p)
            if (est.amps[p] < est.amps[drop]) drop = p;
        est.freqs.erase(est.freqs.begin() + static_cast<long>(drop));
        est.amps.erase(est.amps.begin() + static_cast<long>(drop));
    }
    return est;
}

// Final nonlinear least-squares fit of offset, amplitudes and frequencies to
// f(t) = A0 + sum A_p cos(omega_p t), seeded by the grid estimate.  The
// returned residual never exceeds the seed's.  Modes the fit drives below
// min_freq fold into the offset (cos is flat there over any window of
// interest); modes below min_amp are dropped.
inline SpectrumEstimate refine_nonlinear(const EchoRecord& y, const SpectrumEstimate& init,
                                         double min_freq = 0.025, double min_amp = 0.0) {
    if (init.modes() < 1) throw invalid_argument_error("refine: need at least one mode");
    const auto n = y.times.size();
    const auto P = init.modes();

    auto fn = [&](const VectorXd& p, VectorXd& r, MatrixXd& J) {
        r.resize(static_cast<Eigen::Index>(n));
        J.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + 2 * P));
        for (std::size_t i = 0; i < n; ++i) {
            const double t = y.times[i];
            double model = p[0];
            J(static_cast<Eigen::Index>(i), 0) = 1.0;
            for (std::size_t k = 0; k < P; ++k) {
                const double A = p[1 + 2 * k], w = p[2 + 2 * k];
                model += A * std::cos(w * t);
                J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(1 + 2 * k)) = std::cos(w * t);
                J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 + 2 * k)) =
                    -A * t * std::sin(w * t);
            }
            r[static_cast<Eigen::Index>(i)] = model - y.values[i];
        }
    };
    VectorXd p0(1 + 2 * P);
    p0[0] = init.offset;
    for (std::size_t k = 0; k < P; ++k) {
        p0[1 + 2 * k] = init.amps[k];
        p0[2 + 2 * k] = init.freqs[k];
    }
    LmResult lm = levenberg_marquardt(fn, p0, LmOptions{400, 1e-16, 1e-4});

    SpectrumEstimate out;
    out.provenance = "refined";
    out.eta_final = init.eta_final;
    out.iterations = lm.iterations;
    out.offset = lm.params[0];
    struct Mode {
        double f, a;
    };
    std::vector<Mode> modes;
    for (std::size_t k = 0; k < P; ++k) {
        double A = lm.params[1 + 2 * k], w = std::abs(lm.params[2 + 2 * k]);
        if (w < min_freq) {
            out.offset += A; // degenerate with the constant over the window
        } else if (A > min_amp && A > 0) {
            modes.push_back({w, A});
        }
    }
    std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.f < b.f; });
    for (const auto& m : modes) {
        out.freqs.push_back(m.f);
        out.amps.push_back(m.a);
    }
    out.residual = spectrum_residual(out, y);
    double init_res = spectrum_residual(init, y);
    if (out.residual > init_res + 1e-12) {
        out = init;
        out.provenance = "refined";
        out.residual = init_res;
        out.warning = true;
    }
    return out;
}

// --------------------------------------------------------------------------
// Short-time variance: L(T_s) = 1 - varH T_s^2 + O(T_s^4)
// --------------------------------------------------------------------------

struct ShortTimeVariance {
    double varH = 0.0;
    bool regime_ok = true;
};

inline ShortTimeVariance short_time_variance(const EchoRecord& y, bool include_quartic = true) {
    const auto n = y.times.size();
    if (n < 2) throw invalid_argument_error("short_time_variance: need >= 2 points");
    const int cols = (include_quartic && n >= 4) ? 2 : 1;
    MatrixXd X(static_cast<Eigen::Index>(n), cols);
    VectorXd z(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double t2 = y.times[i] * y.times[i];
        X(static_cast<Eigen::Index>(i), 0) = t2;
        if (cols == 2) X(static_cast<Eigen::Index>(i), 1) = t2 * t2;
        z[static_cast<Eigen::Index>(i)] = 1.0 - y.values[i];
    }
    VectorXd c = (X.transpose() * X).ldlt().solve(X.transpose() * z);
    ShortTimeVariance out;
    out.varH = c[0];
    if (out.varH < 0) {
        if (out.varH > -1e-12) {
            out.varH = 0.0;
        } else {
            throw domain_error("regime-violation: negative fitted variance");
        }
    }
    out.regime_ok = y.times.back() * std::sqrt(std::max(out.varH, 0.0)) <= 0.5;
    return out;
}

// --------------------------------------------------------------------------
// FFT baseline: Hann window -> discrete transform -> parabolic sub-bin peak
// interpolation -> amplitude least squares -> LM refinement.
// --------------------------------------------------------------------------

inline SpectrumEstimate fft_baseline(const EchoRecord& y, double amp_thresh = 5e-3,
                                     int max_modes = 15) {
    const auto n = y.times.size();
    if (n < 4) throw invalid_argument_error("insufficient-data: FFT baseline needs >= 4 samples");
    const double dt = y.times[1] - y.times[0];
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs((y.times[i] - y.times[i - 1]) - dt) > 1e-9 * std::max(1.0, dt))
            throw invalid_argument_error("fft_baseline: times must be equispaced");

    double mean = 0.0;
    for (double v : y.values) mean += v;
    mean /= static_cast<double>(n);

    std::vector<double> win(n);
    for (std::size_t i = 0; i < n; ++i)
        win[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1)));

    const std::size_t half = n / 2;
    std::vector<double> mag(half + 1, 0.0);
    for (std::size_t m = 0; m <= half; ++m) {
        cdouble acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += win[i] * (y.values[i] - mean) *
                   std::exp(cdouble(0.0, -2.0 * kPi * static_cast<double>(m * i) / static_cast<double>(n)));
        mag[m] = std::abs(acc);
    }

    // Local maxima with parabolic interpolation on the log magnitude.
    struct Peak {
        double freq, weight;
    };
    std::vector<Peak> peaks;
    double max_mag = *std::max_element(mag.begin(), mag.end());
    for (std::size_t m = 1; m + 1 <= half && m + 1 < mag.size(); ++m) {
        if (mag[m] <= mag[m - 1] || mag[m] < mag[m + 1]) continue;
        if (mag[m] < 1e-6 * max_mag) continue;
        double lm1 = std::log(std::max(mag[m - 1], 1e-300));
        double l0 = std::log(std::max(mag[m], 1e-300));
        double lp1 = std::log(std::max(mag[m + 1], 1e-300));
        double denom = lm1 - 2 * l0 + lp1;
        double delta = (denom != 0.0) ? 0.5 * (lm1 - lp1) / denom : 0.0;
        delta = std::clamp(delta, -0.5, 0.5);
        double omega = 2.0 * kPi * (static_cast<double>(m) + delta) / (static_cast<double>(n) * dt);
        peaks.push_back({omega, mag[m]});
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.weight > b.weight; });
    if (static_cast<int>(peaks.size()) > max_modes) peaks.resize(max_modes);
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.freq < b.freq; });

    SpectrumEstimate est;
    est.provenance = "fft";
    if (peaks.empty()) {
        est.offset = mean;
        est.residual = spectrum_residual(est, y);
        return est;
    }

    // Linear LS for offset and amplitudes at the interpolated frequencies.
    MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(peaks.size() + 1));
    VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t p = 0; p < peaks.size(); ++p)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p + 1)) =
                std::cos(peaks[p].freq * y.times[i]);
        rhs[static_cast<Eigen::Index>(i)] = y.values[i];
    }
    VectorXd coef = (X.transpose() * X).ldlt().solve(X.transpose() * rhs);
    est.offset = coef[0];
    for (std::size_t p = 0; p < peaks.size(); ++p) {
        double A = coef[static_cast<Eigen::Index>(p + 1)];
        if (A > amp_thresh) {
            est.freqs.push_back(peaks[p].freq);
            est.amps.push_back(A);
        }
    }
    est.residual = spectrum_residual(est, y);
    if (est.modes() >= 1) {
        SpectrumEstimate refined = refine_nonlinear(y, est);
        refined.provenance = "fft";
        return refined;
    }
    return est;
}

// --------------------------------------------------------------------------
// delta_av benchmark metric: (1/2P) sum_p (|w_ex - w_fit| + |A_ex - A_fit|)
// with greedy nearest-frequency assignment; unmatched exact modes count their
// full amplitude.
// --------------------------------------------------------------------------

inline double delta_av(const SpectrumEstimate& fit, const SpectrumEstimate& exact) {
    const auto P = exact.modes();
    if (P == 0) throw invalid_argument_error("delta_av: exact spectrum has no modes");
    struct Pair {
        double dist;
        std::size_t e, f;
    };
    std::vector<Pair> pairs;
    for (std::size_t e = 0; e < P; ++e)
        for (std::size_t f = 0; f < fit.modes(); ++f)
            pairs.push_back({std::abs(exact.freqs[e] - fit.freqs[f]), e, f});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
    std::vector<int> emate(P, -1);
    std::vector<bool> fused(fit.modes(), false);
    for (const auto& pr : pairs) {
        if (emate[pr.e] >= 0 || fused[pr.f]) continue;
        emate[pr.e] = static_cast<int>(pr.f);
        fused[pr.f] = true;
    }
    double sum = 0.0;
    for (std::size_t e = 0; e < P; ++e) {
        if (emate[e] >= 0) {
            auto f = static_cast<std::size_t>(emate[e]);
            sum += std::abs(exact.freqs[e] - fit.freqs[f]) + std::abs(exact.amps[e] - fit.amps[f]);
        } else {
            sum += std::abs(exact.amps[e]);
        }
    }
    return sum / (2.0 * static_cast<double>(P));
}

// JSON ------------------------------------------------------------------------

inline nlohmann::json to_json(const SpectrumEstimate& s) {
    nlohmann::json j;
    j["offset"] = s.offset;
    j["freqs"] = s.freqs;
    j["amps"] = s.amps;
    j["residual"] = s.residual;
    j["provenance"] = s.provenance;
    j["eta_final"] = s.eta_final;
    j["iterations"] = s.iterations;
    j["warning"] = s.warning;
    return j;
}

inline SpectrumEstimate spectrum_from_json(const nlohmann::json& j) {
    SpectrumEstimate s;
    s.offset = j.at("offset").get<double>();
    s.freqs = j.at("freqs").get<std::vector<double>>();
    s.amps = j.at("amps").get<std::vector<double>>();
    s.residual = j.at("residual").get<double>();
    s.provenance = j.at("provenance").get<std::string>();
    s.eta_final = j.at("eta_final").get<double>();
    s.iterations = j.at("iterations").get<int>();
    s.warning = j.at("warning").get<bool>();
    return s;
}

// Convenience: full CS pipeline on a record (grid, recover, cleanup, refine).
struct SigprocParams {
    double resolution_floor = 0.05;
    double merge_tol = 0.1;
    double amp_thresh = 5e-3;
    double eta0 = 0.0; // 0 = auto from shot count
    int max_modes = 15;
    CsOptions cs;
};

inline SpectrumEstimate fit_spectrum_cs(const EchoRecord& y, const SigprocParams& par = {}) {
    double total_shots =
        y.shots_per_point > 0 ? static_cast<double>(y.shots_per_point) * static_cast<double>(y.size())
                              : 0.0;
    CosineGrid grid = make_cosine_grid(y.times, total_shots, par.resolution_floor);
    MatrixXd C = build_cosine_matrix(y.times, grid);
    VectorXd yv = Eigen::Map<const VectorXd>(y.values.data(), static_cast<Eigen::Index>(y.values.size()));
    double eta0 = par.eta0 > 0 ? par.eta0 : default_eta(y.values, y.shots_per_point);
    CsResult cs = cs_recover(yv, C, eta0, par.cs);
    SpectrumEstimate est = cleanup_spectrum(cs.x, grid, par.merge_tol, par.amp_thresh, par.max_modes);
    est.eta_final = cs.eta_final;
    est.iterations = cs.iterations;
    est.residual = spectrum_residual(est, y);
    if (est.modes() == 0) return est;
    return refine_nonlinear(y, est, grid.resolution / 2, par.amp_thresh);
}

} // namespace gentle
