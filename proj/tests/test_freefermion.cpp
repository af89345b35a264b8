#include <catch2/catch.hpp>

#include <bit>

#include "gentle/engine.hpp"
#include "gentle/freefermion.hpp"
#include "gentle/trotter.hpp"

using namespace gentle;

namespace {

struct EnginePrep {
    std::shared_ptr<Basis> basis;
    EigenSystem eig;
    VectorXcd psi;
    HamiltonianSpec spec;
};

EnginePrep engine_ramp(int N, double J_final, double g, double T_a, double dT) {
    EnginePrep ep;
    ep.spec = build_tfim(chain(N), J_final, g);
    ep.basis = std::make_shared<Basis>(make_spin_basis(ep.spec.lattice));
    ep.eig = eigendecompose(ep.spec, *ep.basis);
    std::vector<Term> stat, ramp;
    for (const auto& t : ep.spec.terms) (is_diagonal(t.kind) ? stat : ramp).push_back(t);
    TrotterCircuit circ = build_adiabatic_circuit(ep.basis, stat, ramp, T_a, dT);
    ep.psi = apply_circuit(circ, all_up_state(*ep.basis));
    return ep;
}

// Spin-flip parity of engine eigenvectors; even-sector ground energy.
double engine_even_ground(const EigenSystem& eig, std::size_t dim) {
    for (Eigen::Index k = 0; k < eig.dim(); ++k) {
        double par = 0;
        for (std::size_t i = 0; i < dim; ++i) {
            double w = eig.vectors(static_cast<Eigen::Index>(i), k);
            par += w * w * (std::popcount(static_cast<unsigned>(i)) % 2 == 0 ? 1.0 : -1.0);
        }
        if (par > 0.5) return eig.energies[k];
    }
    throw std::runtime_error("no even-parity state found");
}

} // namespace

TEST_CASE("decoupled spins have flat single-particle energies") {
    QuadraticHamiltonian H = jw_tfim_chain(2, 0.0, 1.0);
    VectorXd eps = single_particle_energies(H);
    REQUIRE(eps.size() == 2);
    REQUIRE(eps[0] == Approx(1.0).margin(1e-12));
    REQUIRE(eps[1] == Approx(1.0).margin(1e-12));
}

TEST_CASE("even-sector ground energy matches the engine") {
    const double g = 1.0, J = g / 0.8;
    for (int N : {4, 6, 8}) {
        QuadraticHamiltonian H = jw_tfim_chain(N, J, g);
        HamiltonianSpec spec = build_tfim(chain(N), J, g);
        Basis basis = make_spin_basis(spec.lattice);
        EigenSystem eig = eigendecompose(spec, basis);
        double e_even = engine_even_ground(eig, basis.dim);
        REQUIRE(even_sector_ground_energy(H) == Approx(e_even).margin(1e-9));
    }
}

TEST_CASE("per-site ground energy approaches the bulk monotonically") {
    const double g = 1.0, J = g / 0.8;
    auto per_site = [&](int N) { return even_sector_ground_energy(jw_tfim_chain(N, J, g)) / N; };
    double e80 = per_site(80), e160 = per_site(160), e320 = per_site(320);
    REQUIRE(e160 < e80);
    REQUIRE(e320 < e160);
    REQUIRE(std::abs(e320 - e160) < std::abs(e160 - e80));
}

TEST_CASE("gaussian eigenstate echo is flat") {
    QuadraticHamiltonian H = jw_tfim_chain(6, 1.0, 0.7);
    GaussianState ground = gaussian_ground_state(H);
    BdgEigen eig = diagonalize_bdg(H);
    GaussianState evolved = ground;
    for (double t : {0.5, 1.0, 3.0}) {
        gaussian_rotate(evolved, eig, t);
        REQUIRE(overlap_sq(ground, evolved) == Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("oracle equivalence: echo and moments match the state-vector engine") {
    const double g = 1.0, J = g / 0.8, T_a = 2.0, dT = 0.1;
    auto times = time_grid(5.0, 0.1);
    for (int N : {3, 6, 9}) {
        EnginePrep ep = engine_ramp(N, J, g, T_a, dT);
        EchoRecord engine_echo = loschmidt_echo(ep.psi, ep.eig, times);

        FreeFermionRamp ramp{N, J, g, T_a, dT};
        EchoRecord ff_echo = gaussian_prepare_and_echo(ramp, times);
        double max_diff = 0;
        for (std::size_t i = 0; i < times.size(); ++i)
            max_diff = std::max(max_diff, std::abs(ff_echo.values[i] - engine_echo.values[i]));
        INFO("N = " << N << ", max echo diff = " << max_diff);
        REQUIRE(max_diff < 1e-8);

        GaussianState prepared = gaussian_prepare(ramp);
        auto [h1, h2] = gaussian_energy_moments(prepared, jw_tfim_chain(N, J, g));
        REQUIRE(std::abs(h1 - expectation(ep.psi, ep.spec, *ep.basis, 1)) < 1e-8);
        REQUIRE(std::abs(h2 - expectation(ep.psi, ep.spec, *ep.basis, 2)) < 1e-8);
    }
}

TEST_CASE("gaussian moments basics") {
    QuadraticHamiltonian H = jw_tfim_chain(8, 1.1, 0.9);
    GaussianState ground = gaussian_ground_state(H);
    auto [h1, h2] = gaussian_energy_moments(ground, H);
    double e0 = -single_particle_energies(H).sum(); // Bogoliubov vacuum energy
    REQUIRE(h1 == Approx(e0).margin(1e-9));
    REQUIRE(h2 == Approx(e0 * e0).margin(1e-7));

    for (double T_a : {0.3, 1.0, 2.5}) {
        GaussianState s = gaussian_prepare({8, 1.1, 0.9, T_a, 0.1});
        auto [m1, m2] = gaussian_energy_moments(s, H);
        REQUIRE(m2 - m1 * m1 >= -1e-9);
    }
}

TEST_CASE("majorana covariance is antisymmetric and pure") {
    GaussianState s = gaussian_prepare({6, 1.25, 1.0, 1.7, 0.1});
    MatrixXd G = majorana_covariance(s);
    REQUIRE((G + G.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    MatrixXd GtG = G.transpose() * G;
    REQUIRE((GtG - MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("overlap magnitude is Bogoliubov-gauge invariant") {
    GaussianState a = gaussian_prepare({5, 1.25, 1.0, 1.0, 0.1});
    GaussianState b = gaussian_prepare({5, 1.25, 1.0, 2.0, 0.1});
    double ref = overlap_sq(a, b);

    // Re-mix the annihilators of b by a random unitary: same physical state.
    auto rng = make_rng(3, "gauge");
    std::normal_distribution<double> nd;
    MatrixXcd R(5, 5);
    for (Eigen::Index i = 0; i < 5; ++i)
        for (Eigen::Index j = 0; j < 5; ++j) R(i, j) = cdouble(nd(rng), nd(rng));
    Eigen::HouseholderQR<MatrixXcd> qr(R);
    MatrixXcd Q = qr.householderQ();
    GaussianState b2{b.U * Q, b.V * Q};
    REQUIRE(overlap_sq(a, b2) == Approx(ref).margin(1e-10));
}

TEST_CASE("vacuum parity flags the all-up sector") {
    GaussianState vac = GaussianState::vacuum(6);
    REQUIRE(vacuum_parity(vac) == +1);
    QuadraticHamiltonian H = jw_tfim_chain(6, 1.25, 1.0);
    BdgEigen eig = diagonalize_bdg(H);
    GaussianState evolved = gaussian_prepare({6, 1.25, 1.0, 1.3, 0.1});
    gaussian_rotate(evolved, eig, 2.7);
    REQUIRE(vacuum_parity(evolved) == +1);
}
