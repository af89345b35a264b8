#include <catch2/catch.hpp>

#include "gentle/noise.hpp"
#include "gentle/sigproc.hpp"

using namespace gentle;

namespace {

EchoRecord make_signal(const std::vector<double>& times, double offset,
                       const std::vector<std::pair<double, double>>& modes) {
    EchoRecord rec;
    rec.times = times;
    for (double t : times) {
        double v = offset;
        for (auto [w, a] : modes) v += a * std::cos(w * t);
        rec.values.push_back(v);
    }
    return rec;
}

} // namespace

TEST_CASE("canonical cosine matrix is orthogonal") {
    CosineGrid grid = canonical_dct_grid(4, 0.3);
    MatrixXd C = build_cosine_matrix(grid.times, grid);
    MatrixXd gram = C.transpose() * C;
    REQUIRE((gram - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index n = 0; n < 4; ++n) REQUIRE(C(n, 0) == Approx(0.5).margin(1e-15)); // 1/sqrt(4)

    CosineGrid grid64 = canonical_dct_grid(64, 0.1);
    MatrixXd C64 = build_cosine_matrix(grid64.times, grid64);
    REQUIRE((C64.transpose() * C64 - MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("grid resolution rule") {
    auto times = time_grid(10.0, 0.1);
    CosineGrid coarse = make_cosine_grid(times, 0.0);
    REQUIRE(coarse.resolution == Approx(0.05));
    REQUIRE(coarse.freqs[0] == 0.0);
    REQUIRE(coarse.freqs[coarse.freqs.size() - 1] <= kPi / 0.1 + 1e-9);

    CosineGrid shotty = make_cosine_grid(times, 100.0); // 1/sqrt(100) = 0.1 > floor
    REQUIRE(shotty.resolution == Approx(0.1));
    CosineGrid fine = make_cosine_grid(times, 1e6); // floored
    REQUIRE(fine.resolution == Approx(0.05));
}

TEST_CASE("noiseless on-grid recovery is exactly sparse") {
    CosineGrid grid = canonical_dct_grid(64, 0.1);
    MatrixXd C = build_cosine_matrix(grid.times, grid);
    const int kTrue = 13;
    VectorXd x0 = VectorXd::Zero(64);
    x0[kTrue] = 0.4 * std::sqrt(64.0 / 2.0); // physical amplitude 0.4
    x0[0] = 0.5 * std::sqrt(64.0);           // offset 0.5
    VectorXd y = C * x0;

    CsResult res = cs_recover(y, C, 1e-7);
    REQUIRE(res.feasibility <= res.eta_final * (1 + 1e-6));
    double sidelobe = 0.0;
    for (Eigen::Index k = 0; k < 64; ++k)
        if (k != kTrue && k != 0) sidelobe = std::max(sidelobe, std::abs(res.x[k]));
    REQUIRE(sidelobe < 1e-6);
    REQUIRE(res.x[kTrue] == Approx(x0[kTrue]).epsilon(1e-3));
}

TEST_CASE("zero signal recovers the zero vector") {
    CosineGrid grid = canonical_dct_grid(32, 0.1);
    MatrixXd C = build_cosine_matrix(grid.times, grid);
    VectorXd y = VectorXd::Zero(32);
    CsResult res = cs_recover(y, C, 1e-8);
    REQUIRE(res.x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cleanup merges, thresholds and caps") {
    auto times = time_grid(10.0, 0.1);
    CosineGrid grid = make_cosine_grid(times, 0.0); // resolution 0.05
    const double n = static_cast<double>(times.size());
    VectorXd x = VectorXd::Zero(grid.freqs.size());
    auto set_amp = [&](double freq, double amp) {
        auto k = static_cast<Eigen::Index>(std::round(freq / grid.resolution));
        x[k] = amp / std::sqrt(2.0 / n);
    };
    set_amp(1.00, 0.30);
    set_amp(1.05, 0.10); // within merge_tol of 1.00
    set_amp(2.50, 0.20);
    set_amp(3.40, 1e-3); // below threshold
    x[0] = 0.4 * std::sqrt(n);

    SpectrumEstimate est = cleanup_spectrum(x, grid, 0.1, 5e-3);
    REQUIRE(est.modes() == 2);
    REQUIRE(est.offset == Approx(0.4).margin(1e-12));
    // Amplitude-weighted centroid of the merged pair.
    REQUIRE(est.freqs[0] == Approx((1.00 * 0.30 + 1.05 * 0.10) / 0.40).margin(1e-9));
    REQUIRE(est.amps[0] == Approx(0.40).margin(1e-9));
    REQUIRE(est.freqs[1] == Approx(2.50).margin(1e-12));

    // Clean, well-separated peaks pass through unchanged.
    VectorXd x2 = VectorXd::Zero(grid.freqs.size());
    x2[0] = 0.365 * std::sqrt(n);
    auto set2 = [&](double freq, double amp) {
        auto k = static_cast<Eigen::Index>(std::round(freq / grid.resolution));
        x2[k] = amp / std::sqrt(2.0 / n);
    };
    set2(1.0, 0.315);
    set2(2.2, 0.18);
    set2(3.3, 0.14);
    SpectrumEstimate clean = cleanup_spectrum(x2, grid, 0.1, 5e-3);
    REQUIRE(clean.modes() == 3);
    REQUIRE(clean.amps[0] == Approx(0.315).margin(1e-9));
}

TEST_CASE("refinement leaves an exact fit unchanged and never degrades") {
    auto times = time_grid(10.0, 0.1);
    EchoRecord y = make_signal(times, 0.52, {{1.7, 0.48}});
    SpectrumEstimate init;
    init.offset = 0.52;
    init.freqs = {1.7};
    init.amps = {0.48};
    SpectrumEstimate out = refine_nonlinear(y, init);
    REQUIRE(out.freqs[0] == Approx(1.7).margin(1e-8));
    REQUIRE(out.amps[0] == Approx(0.48).margin(1e-8));
    REQUIRE(out.residual <= spectrum_residual(init, y) + 1e-12);
}

TEST_CASE("refinement pulls an off-grid frequency out of shot noise") {
    auto times = time_grid(10.0, 0.1);
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        EchoRecord y = make_signal(times, 0.6, {{1.337, 0.35}});
        y = sample_shots(y, 10000, seed);
        SpectrumEstimate init;
        init.offset = 0.6;
        init.freqs = {1.35};
        init.amps = {0.33};
        SpectrumEstimate out = refine_nonlinear(y, init);
        REQUIRE(out.modes() == 1);
        REQUIRE(std::abs(out.freqs[0] - 1.337) < 1e-3);
    }
}

TEST_CASE("short-time variance extraction") {
    EchoRecord quad;
    for (double t = 0.005; t <= 0.1; t += 0.005) {
        quad.times.push_back(t);
        quad.values.push_back(1.0 - 4.0 * t * t);
    }
    REQUIRE(short_time_variance(quad).varH == Approx(4.0).margin(1e-10));

    EchoRecord flat;
    for (double t = 0.005; t <= 0.1; t += 0.005) {
        flat.times.push_back(t);
        flat.values.push_back(1.0);
    }
    REQUIRE(short_time_variance(flat).varH == Approx(0.0).margin(1e-12));

    EchoRecord rising;
    rising.times = {0.01, 0.02, 0.03, 0.04};
    rising.values = {1.001, 1.004, 1.009, 1.016};
    REQUIRE_THROWS_AS(short_time_variance(rising, false), domain_error);
}

TEST_CASE("quadratic-window bias shrinks ~4x when the window halves") {
    auto window_bias = [](double T) {
        EchoRecord rec;
        const double w = 3.0, A = 0.4; // varH = A w^2 / 2 = 1.8
        for (int i = 1; i <= 40; ++i) {
            double t = T * i / 40.0;
            rec.times.push_back(t);
            rec.values.push_back(1.0 - A * (1.0 - std::cos(w * t)));
        }
        return std::abs(short_time_variance(rec, false).varH - A * w * w / 2);
    };
    double b1 = window_bias(0.2), b2 = window_bias(0.1);
    REQUIRE(b1 / b2 > 3.0);
    REQUIRE(b1 / b2 < 5.0);
}

TEST_CASE("fft baseline nails an on-bin cosine") {
    const int N = 128;
    const double dt = 0.1;
    const double w = 2 * kPi * 9 / (N * dt);
    std::vector<double> times;
    for (int k = 1; k <= N; ++k) times.push_back(k * dt);
    EchoRecord y = make_signal(times, 0.5, {{w, 0.4}});
    SpectrumEstimate est = fft_baseline(y);
    REQUIRE(est.modes() >= 1);
    REQUIRE(est.freqs.size() == est.amps.size());
    // Strongest mode is the true one.
    std::size_t top = 0;
    for (std::size_t p = 1; p < est.modes(); ++p)
        if (est.amps[p] > est.amps[top]) top = p;
    REQUIRE(est.freqs[top] == Approx(w).margin(1e-6));
    REQUIRE(est.amps[top] == Approx(0.4).margin(1e-6));

    EchoRecord tiny;
    tiny.times = {0.1, 0.2, 0.3};
    tiny.values = {1.0, 0.9, 0.8};
    REQUIRE_THROWS_AS(fft_baseline(tiny), invalid_argument_error);
}

TEST_CASE("delta_av metric") {
    SpectrumEstimate exact;
    exact.freqs = {1.0, 2.0};
    exact.amps = {0.3, 0.2};
    REQUIRE(delta_av(exact, exact) == Approx(0.0).margin(1e-15));

    SpectrumEstimate off;
    off.freqs = {1.1};
    off.amps = {0.3};
    SpectrumEstimate one;
    one.freqs = {1.0};
    one.amps = {0.3};
    REQUIRE(delta_av(off, one) == Approx(0.05).margin(1e-12));

    // Missing exact mode contributes its amplitude.
    SpectrumEstimate partial;
    partial.freqs = {1.0};
    partial.amps = {0.3};
    REQUIRE(delta_av(partial, exact) == Approx(0.2 / 4.0).margin(1e-12));
}

TEST_CASE("sparse support recovery from few random samples") {
    const double T = 20.0, grid_dt = 0.1;
    int successes = 0;
    const int n_seeds = 20;
    for (int seed = 0; seed < n_seeds; ++seed) {
        auto rng = make_rng(static_cast<std::uint64_t>(seed), "support");
        // 5 on-grid frequencies, spacing >= 3 * 0.05.
        std::vector<double> freqs;
        double f = 0.5;
        std::uniform_int_distribution<int> step(3, 30);
        for (int k = 0; k < 5; ++k) {
            f += step(rng) * 0.05;
            freqs.push_back(f);
        }
        std::vector<std::pair<double, double>> modes;
        for (std::size_t k = 0; k < freqs.size(); ++k)
            modes.push_back({freqs[k], 0.08 + 0.02 * static_cast<double>(k)});

        auto times = sampling_schedule(T, SamplingMode::Random, 130,
                                       static_cast<std::uint64_t>(seed) + 100, grid_dt);
        EchoRecord y = make_signal(times, 0.5, modes);
        SigprocParams par;
        par.eta0 = 1e-6;
        SpectrumEstimate est = fit_spectrum_cs(y, par);
        bool ok = est.modes() == 5;
        if (ok)
            for (int k = 0; k < 5; ++k)
                if (std::abs(est.freqs[static_cast<std::size_t>(k)] - freqs[static_cast<std::size_t>(k)]) > 0.01)
                    ok = false;
        if (ok) ++successes;
    }
    INFO("exact support recovered on " << successes << "/" << n_seeds << " seeds");
    REQUIRE(successes >= 19);
}

TEST_CASE("cs feasibility always holds on the returned vector") {
    auto times = sampling_schedule(10.0, SamplingMode::Random, 17, 5, 0.1);
    EchoRecord y = make_signal(times, 0.5, {{1.3, 0.3}, {2.9, 0.2}});
    y = sample_shots(y, 500, 7);
    CosineGrid grid = make_cosine_grid(times, 17.0 * 500.0);
    MatrixXd C = build_cosine_matrix(times, grid);
    VectorXd yv = Eigen::Map<const VectorXd>(y.values.data(), static_cast<Eigen::Index>(y.size()));
    CsResult res = cs_recover(yv, C, default_eta(y.values, 500));
    REQUIRE((C * res.x - yv).norm() <= res.eta_final * (1 + 1e-6));
}
