#include <catch2/catch.hpp>

#include "gentle/engine.hpp"
#include "gentle/thermal.hpp"
#include "gentle/trotter.hpp"

using namespace gentle;

namespace {

std::shared_ptr<Basis> spin_basis(const Lattice& lat) {
    return std::make_shared<Basis>(make_spin_basis(lat));
}

// Test-only oracle: RK4 integration of the time-ordered Schroedinger equation
// for H(s) = H_static + s * H_ramp.
VectorXcd rk4_prepare(const Basis& basis, const std::vector<Term>& stat,
                      const std::vector<Term>& ramp, const VectorXcd& psi0, double T, double dt) {
    MatrixXd Hs = build_dense(basis, stat);
    MatrixXd Hr = build_dense(basis, ramp);
    auto rhs = [&](double t, const VectorXcd& psi) -> VectorXcd {
        MatrixXd H = Hs + (t / T) * Hr;
        VectorXd re = H * psi.real();
        VectorXd im = H * psi.imag();
        VectorXcd out(psi.size());
        for (Eigen::Index i = 0; i < psi.size(); ++i) out[i] = cdouble(im[i], -re[i]); // -i H psi
        return out;
    };
    VectorXcd psi = psi0;
    int n = static_cast<int>(std::round(T / dt));
    for (int k = 0; k < n; ++k) {
        double t = k * dt;
        VectorXcd k1 = rhs(t, psi);
        VectorXcd k2 = rhs(t + dt / 2, psi + (dt / 2) * k1);
        VectorXcd k3 = rhs(t + dt / 2, psi + (dt / 2) * k2);
        VectorXcd k4 = rhs(t + dt, psi + dt * k3);
        psi += (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    psi.normalize();
    return psi;
}

} // namespace

TEST_CASE("single-site field spectrum") {
    HamiltonianSpec spec = build_tfim(chain(1), 0.0, 0.7);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);
    REQUIRE(eig.energies[0] == Approx(-0.7).margin(1e-12));
    REQUIRE(eig.energies[1] == Approx(0.7).margin(1e-12));
}

TEST_CASE("two-site TFIM analytic spectrum") {
    HamiltonianSpec spec = build_tfim(chain(2), 1.0, 1.0);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);
    const double r5 = std::sqrt(5.0);
    REQUIRE(eig.energies[0] == Approx(-r5).margin(1e-10));
    REQUIRE(eig.energies[1] == Approx(-1.0).margin(1e-10));
    REQUIRE(eig.energies[2] == Approx(1.0).margin(1e-10));
    REQUIRE(eig.energies[3] == Approx(r5).margin(1e-10));
}

TEST_CASE("two-site Hubbard dimer analytic spectrum") {
    const double U = 6.0, t = 1.0;
    HamiltonianSpec spec = build_fh_ladder(1, t, U);
    Basis basis = make_fermion_basis(spec.lattice, 1, 1);
    REQUIRE(basis.dim == 4);
    EigenSystem eig = eigendecompose(spec, basis);
    const double disc = std::sqrt(U * U + 16 * t * t);
    REQUIRE(eig.energies[0] == Approx((U - disc) / 2).margin(1e-10));
    REQUIRE(eig.energies[1] == Approx(0.0).margin(1e-10));
    REQUIRE(eig.energies[2] == Approx(U).margin(1e-10));
    REQUIRE(eig.energies[3] == Approx((U + disc) / 2).margin(1e-10));
}

TEST_CASE("hermiticity and eigenvector orthonormality") {
    HamiltonianSpec tfim = build_tfim(square(2, 3), -0.8, 1.0, 0.0025);
    auto sb = spin_basis(tfim.lattice);
    MatrixXd H = build_dense(*sb, tfim.terms);
    REQUIRE((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);

    std::map<std::pair<int, Spin>, double> chem;
    chem[{0, Spin::Up}] = 1.3;
    HamiltonianSpec fh = build_fh_ladder(2, 1.0, 6.0, chem);
    Basis fb = make_fermion_basis(fh.lattice, 2, 1);
    MatrixXd Hf = build_dense(fb, fh.terms);
    REQUIRE((Hf - Hf.transpose()).cwiseAbs().maxCoeff() == 0.0);

    EigenSystem eig = eigendecompose(tfim, *sb);
    MatrixXd gram = eig.vectors.transpose() * eig.vectors;
    REQUIRE((gram - MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("perturb is linear at the matrix level") {
    HamiltonianSpec H = build_tfim(square(2, 2), -1.0, 1.0);
    ObservableSpec O = build_observable(ObservableKind::StaggeredMx, H.lattice, 1);
    auto basis = spin_basis(H.lattice);
    const double mu = 0.37;
    MatrixXd lhs = build_dense(*basis, perturb(H, O, mu).terms);
    MatrixXd rhs = build_dense(*basis, H.terms) + mu * build_dense(*basis, O.terms);
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("J -> -J spectra agree on bipartite lattices") {
    auto basis = spin_basis(square(2, 3));
    EigenSystem ep = eigendecompose(build_tfim(square(2, 3), 1.0, 0.9), *basis);
    EigenSystem em = eigendecompose(build_tfim(square(2, 3), -1.0, 0.9), *basis);
    REQUIRE((ep.energies - em.energies).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("evolution basics") {
    HamiltonianSpec spec = build_tfim(chain(3), 1.0, 0.8);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);

    VectorXcd ground = eig.vectors.col(0).cast<cdouble>();
    VectorXcd evolved = evolve(ground, eig, 1.7);
    REQUIRE(std::abs(std::norm(ground.dot(evolved)) - 1.0) < 1e-12);

    VectorXcd psi = VectorXcd::Random(static_cast<Eigen::Index>(basis->dim));
    psi.normalize();
    REQUIRE((evolve(psi, eig, 0.0) - psi).norm() < 1e-12);
    REQUIRE(std::abs(evolve(psi, eig, 3.1).norm() - 1.0) < 1e-10);

    // Two-level closed form: the equal superposition acquires a relative pi
    // phase at t = pi / (E1 - E0), where the pair echo vanishes.
    VectorXcd pair = eigen_superposition(eig, {{0, 0.5, 0.0}, {1, 0.5, 0.0}});
    double tpi = kPi / eig.gap();
    EchoRecord echo = loschmidt_echo(pair, eig, {tpi});
    REQUIRE(echo.values[0] == Approx(0.0).margin(1e-10));
}

TEST_CASE("loschmidt echo closed forms") {
    HamiltonianSpec spec = build_tfim(chain(3), 1.0, 0.8);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);

    VectorXcd ground = eig.vectors.col(0).cast<cdouble>();
    EchoRecord flat = loschmidt_echo(ground, eig, {0.3, 1.0, 7.7});
    for (double v : flat.values) REQUIRE(v == Approx(1.0).margin(1e-12));

    VectorXcd two = eigen_superposition(eig, {{0, 0.6, 0.0}, {1, 0.4, 0.0}});
    std::vector<double> ts{0.01, 0.4, 1.3, 2.9};
    EchoRecord echo = loschmidt_echo(two, eig, ts);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double expect = 0.52 + 0.48 * std::cos(eig.gap() * ts[i]);
        REQUIRE(echo.values[i] == Approx(expect).margin(1e-10));
    }
}

TEST_CASE("three-mode ladder echo amplitudes") {
    HamiltonianSpec spec = build_tfim(ladder(4), 1.0, 1.0);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);
    VectorXcd psi = eigen_superposition(eig, {{0, 0.45, 0.0}, {3, 0.35, 0.0}, {4, 0.2, -kPi / 2}});
    std::vector<double> ts;
    for (int k = 0; k <= 40; ++k) ts.push_back(0.25 * k + 0.01);
    EchoRecord echo = loschmidt_echo(psi, eig, ts);
    const double w30 = eig.energies[3] - eig.energies[0];
    const double w40 = eig.energies[4] - eig.energies[0];
    const double w43 = eig.energies[4] - eig.energies[3];
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double expect = 0.365 + 0.315 * std::cos(w30 * ts[i]) + 0.18 * std::cos(w40 * ts[i]) +
                        0.14 * std::cos(w43 * ts[i]);
        REQUIRE(echo.values[i] == Approx(expect).margin(1e-10));
    }
}

TEST_CASE("expectation values against the eigenbasis oracle") {
    HamiltonianSpec spec = build_tfim(square(2, 2), -1.0, 1.0, 0.01);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);

    VectorXcd ground = eig.vectors.col(0).cast<cdouble>();
    REQUIRE(expectation(ground, spec, *basis, 1) == Approx(eig.energies[0]).margin(1e-10));

    VectorXcd two = eigen_superposition(eig, {{0, 0.6, 0.0}, {1, 0.4, 0.0}});
    double e2 = 0.6 * eig.energies[0] * eig.energies[0] + 0.4 * eig.energies[1] * eig.energies[1];
    REQUIRE(expectation(two, spec, *basis, 2) == Approx(e2).margin(1e-10));

    auto rng = make_rng(7, "engine-random");
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 5; ++rep) {
        VectorXcd psi(static_cast<Eigen::Index>(basis->dim));
        for (Eigen::Index i = 0; i < psi.size(); ++i) psi[i] = cdouble(nd(rng), nd(rng));
        psi.normalize();
        VectorXd p = spectral_weights(psi, eig);
        double h1 = 0, h2 = 0;
        for (Eigen::Index n = 0; n < p.size(); ++n) {
            h1 += p[n] * eig.energies[n];
            h2 += p[n] * eig.energies[n] * eig.energies[n];
        }
        REQUIRE(std::abs(expectation(psi, spec, *basis, 1) - h1) < 1e-9);
        REQUIRE(std::abs(expectation(psi, spec, *basis, 2) - h2) < 1e-9);
    }
}

TEST_CASE("ldos binning") {
    HamiltonianSpec spec = build_tfim(chain(3), 1.0, 0.8);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);

    auto edges = make_energy_bins(eig.energies[0] - 0.025, eig.energies[eig.dim() - 1] + 0.05, 0.05);
    VectorXcd ground = eig.vectors.col(0).cast<cdouble>();
    auto mass = ldos(ground, eig, edges);
    double total = 0;
    int occupied = 0;
    for (double m : mass) {
        total += m;
        if (m > 1e-12) ++occupied;
    }
    REQUIRE(total == Approx(1.0).margin(1e-10));
    REQUIRE(occupied == 1);

    VectorXcd two = eigen_superposition(eig, {{0, 0.6, 0.0}, {2, 0.4, 0.0}});
    mass = ldos(two, eig, edges);
    std::vector<double> occ;
    for (double m : mass)
        if (m > 1e-12) occ.push_back(m);
    REQUIRE(occ.size() == 2);
    REQUIRE(occ[0] == Approx(0.6).margin(1e-10));
    REQUIRE(occ[1] == Approx(0.4).margin(1e-10));
}

TEST_CASE("echo long-time mean approaches sum of squared weights") {
    HamiltonianSpec spec = build_tfim(chain(4), 1.25, 1.0);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);
    std::vector<Term> stat, ramp;
    for (const auto& t : spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);
    TrotterCircuit circ = build_adiabatic_circuit(basis, stat, ramp, 2.0, 0.1);
    VectorXcd psi = apply_circuit(circ, all_up_state(*basis));

    VectorXd p = spectral_weights(psi, eig);
    double l0 = p.squaredNorm();
    auto ts = time_grid(500.0, 0.1);
    EchoRecord echo = loschmidt_echo(psi, eig, ts);
    double mean = 0;
    for (double v : echo.values) mean += v;
    mean /= static_cast<double>(echo.values.size());
    REQUIRE(std::abs(mean - l0) < 0.02);
    for (double v : echo.values) {
        REQUIRE(v >= -1e-12);
        REQUIRE(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("short-time expansion matches the energy variance") {
    HamiltonianSpec spec = build_tfim(chain(4), 1.25, 1.0);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);
    std::vector<Term> stat, ramp;
    for (const auto& t : spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);
    TrotterCircuit circ = build_adiabatic_circuit(basis, stat, ramp, 1.5, 0.1);
    VectorXcd psi = apply_circuit(circ, all_up_state(*basis));

    double var = expectation(psi, spec, *basis, 2) - std::pow(expectation(psi, spec, *basis, 1), 2);
    const double ts = 1e-3;
    EchoRecord echo = loschmidt_echo(psi, eig, {ts});
    double est = (1.0 - echo.values[0]) / (ts * ts);
    REQUIRE(std::abs(est - var) / var < 1e-4);
}

TEST_CASE("adiabatic preparation limits") {
    HamiltonianSpec spec = build_tfim(chain(3), 1.0, 1.0);
    auto basis = spin_basis(spec.lattice);
    std::vector<Term> stat, ramp;
    for (const auto& t : spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);

    TrotterCircuit empty = build_adiabatic_circuit(basis, stat, ramp, 0.0, 0.1);
    VectorXcd psi0 = all_up_state(*basis);
    REQUIRE((apply_circuit(empty, psi0) - psi0).norm() == 0.0);

    // Commuting limit: both parts diagonal, so the all-up ground state
    // survives any ramp exactly (up to phase).
    std::vector<Term> diag_ramp{{TermKind::Z, -0.5, 0, 0, Spin::None},
                                {TermKind::Z, -0.5, 1, 0, Spin::None}};
    TrotterCircuit diag = build_adiabatic_circuit(basis, stat, diag_ramp, 3.0, 0.1);
    VectorXcd out = apply_circuit(diag, psi0);
    REQUIRE(std::norm(psi0.dot(out)) == Approx(1.0).margin(1e-12));

    REQUIRE_THROWS_AS(build_adiabatic_circuit(basis, {}, ramp, 1.0, 0.1), invalid_argument_error);
}

TEST_CASE("trotter error improves at least quadratically in dT") {
    HamiltonianSpec spec = build_tfim(square(2, 2), -1.0, 1.0);
    auto basis = spin_basis(spec.lattice);
    std::vector<Term> stat, ramp;
    for (const auto& t : spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);
    VectorXcd psi0 = all_up_state(*basis);
    VectorXcd exact = rk4_prepare(*basis, stat, ramp, psi0, 2.0, 2.5e-4);

    auto infid = [&](double dT) {
        TrotterCircuit c = build_adiabatic_circuit(basis, stat, ramp, 2.0, dT);
        VectorXcd psi = apply_circuit(c, psi0);
        return 1.0 - std::norm(exact.dot(psi));
    };
    double i1 = infid(0.2), i2 = infid(0.1);
    REQUIRE(i1 > i2);
    REQUIRE(i1 / i2 > 3.5);
}

TEST_CASE("gauge reversal is the exact circuit inverse") {
    for (const Lattice& lat : {square(2, 2), square(2, 3)}) {
        HamiltonianSpec spec = build_tfim(lat, 1.0, 1.0);
        auto basis = spin_basis(lat);
        std::vector<Term> stat, ramp;
        for (const auto& t : spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);
        TrotterCircuit prep = build_adiabatic_circuit(basis, stat, ramp, 2.0, 0.1);
        TrotterCircuit inv = unprep_via_gauge(prep);
        VectorXcd psi0 = all_up_state(*basis);
        VectorXcd round = apply_circuit(inv, apply_circuit(prep, psi0));
        REQUIRE(std::norm(psi0.dot(round)) > 1.0 - 1e-10);
    }
}

TEST_CASE("staggered rotations with opposite signs cancel") {
    auto basis = spin_basis(square(2, 2));
    auto stagg = staggered_generator(basis->lattice, false);
    TrotterCircuit circ;
    circ.basis = basis;
    circ.gates.push_back(make_gate(*basis, GateKind::Diagonal, stagg, kPi / 2));
    circ.gates.push_back(make_gate(*basis, GateKind::Diagonal, stagg, -kPi / 2));
    VectorXcd psi = VectorXcd::Random(static_cast<Eigen::Index>(basis->dim));
    psi.normalize();
    REQUIRE((apply_circuit(circ, psi) - psi).norm() < 1e-14);
}

TEST_CASE("echo through the unpreparation circuit matches the direct echo") {
    HamiltonianSpec spec = build_tfim(square(2, 2), 1.0, 1.0);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);
    std::vector<Term> stat, ramp;
    for (const auto& t : spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);
    TrotterCircuit prep = build_adiabatic_circuit(basis, stat, ramp, 2.0, 0.1);
    VectorXcd psi0 = all_up_state(*basis);
    VectorXcd prepared = apply_circuit(prep, psi0);

    auto ts = time_grid(6.0, 0.25);
    EchoRecord direct = loschmidt_echo(prepared, eig, ts);
    EchoRecord circuit = echo_via_unprep(prep, eig, psi0, ts);
    for (std::size_t i = 0; i < ts.size(); ++i)
        REQUIRE(circuit.values[i] == Approx(direct.values[i]).margin(1e-10));
}

TEST_CASE("gauge reversal for the Fermi-Hubbard plaquette") {
    std::map<std::pair<int, Spin>, double> chem;
    Lattice lat = ladder(2);
    chem[{lat.site(0, 0), Spin::None}] = 4.0;
    chem[{lat.site(0, 1), Spin::None}] = 4.0;
    HamiltonianSpec spec = build_fh_ladder(2, 1.0, 6.0, chem);
    auto basis = std::make_shared<Basis>(make_fermion_basis(lat, 2, 2));

    std::vector<Term> stat, ramp;
    for (const auto& t : spec.terms) {
        if (t.kind == TermKind::Hop) {
            ramp.push_back(t);
        } else if (t.kind == TermKind::Density) {
            stat.push_back(t);
            Term off = t;
            off.coeff = -t.coeff;
            ramp.push_back(off);
        } else {
            stat.push_back(t);
        }
    }
    TrotterCircuit prep = build_adiabatic_circuit(basis, stat, ramp, 3.0, 0.1);
    TrotterCircuit inv = unprep_via_gauge(prep);
    VectorXcd psi0 = band_insulator_state(*basis, {lat.site(0, 0), lat.site(0, 1)});
    VectorXcd round = apply_circuit(inv, apply_circuit(prep, psi0));
    REQUIRE(std::norm(psi0.dot(round)) > 1.0 - 1e-10);
}

TEST_CASE("thermal echo limits") {
    HamiltonianSpec spec = build_tfim(chain(4), 1.25, 1.0);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);
    std::vector<Term> stat, ramp;
    for (const auto& t : spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);
    HamiltonianSpec H0;
    H0.lattice = spec.lattice;
    H0.terms = stat;
    TrotterCircuit prep = build_adiabatic_circuit(basis, stat, ramp, 2.0, 0.1);
    auto ts = time_grid(10.0, 0.5);

    // beta = infinity reproduces the pure prepared-state echo.
    ThermalState cold = thermal_state(H0, *basis, std::numeric_limits<double>::infinity());
    ThermalEnsemble ens_cold = thermal_ensemble(cold, prep, eig);
    EchoRecord thermal = thermal_echo(ens_cold, ts, cold.beta);
    VectorXcd psi = apply_circuit(prep, all_up_state(*basis));
    EchoRecord pure = loschmidt_echo(psi, eig, ts);
    for (std::size_t i = 0; i < ts.size(); ++i)
        REQUIRE(thermal.values[i] == Approx(pure.values[i]).margin(1e-10));

    // beta = 0 is maximally mixed: constant echo 1/dim.
    ThermalState hot = thermal_state(H0, *basis, 0.0);
    ThermalEnsemble ens_hot = thermal_ensemble(hot, prep, eig);
    EchoRecord flat = thermal_echo(ens_hot, ts, 0.0);
    for (double v : flat.values)
        REQUIRE(v == Approx(1.0 / static_cast<double>(basis->dim)).margin(1e-10));

    double trace = 0;
    for (Eigen::Index n = 0; n < ens_hot.R.rows(); ++n) trace += ens_hot.R(n, n).real();
    REQUIRE(trace == Approx(1.0).margin(1e-10));
    REQUIRE((ens_hot.R - ens_hot.R.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("thermal factorization in the low-temperature regime") {
    HamiltonianSpec spec = build_tfim(chain(4), 1.25, 1.0);
    auto basis = spin_basis(spec.lattice);
    EigenSystem eig = eigendecompose(spec, *basis);
    std::vector<Term> stat, ramp;
    for (const auto& t : spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);
    HamiltonianSpec H0;
    H0.lattice = spec.lattice;
    H0.terms = stat;
    TrotterCircuit prep = build_adiabatic_circuit(basis, stat, ramp, 3.0, 0.1);

    const double beta = 8.0;
    ThermalState st = thermal_state(H0, *basis, beta);
    REQUIRE(1.0 - st.weights[0] < 1e-6); // 1 - Z_beta
    ThermalEnsemble ens = thermal_ensemble(st, prep, eig);
    double worst = 0.0;
    for (Eigen::Index n = 0; n < ens.R.rows(); ++n)
        for (Eigen::Index m = n + 1; m < ens.R.rows(); ++m)
            worst = std::max(worst, std::abs(std::norm(ens.R(n, m)) -
                                             ens.R(n, n).real() * ens.R(m, m).real()));
    REQUIRE(worst < 1e-5);
}

TEST_CASE("dimension guard") {
    REQUIRE_THROWS_AS(make_spin_basis(square(5, 4)), domain_error);
}
