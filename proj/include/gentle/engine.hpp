#pragma once

// Exact state-vector backend: dense diagonalization, eigenbasis time
// evolution, Loschmidt echoes, moments and the local density of states.
// Exact evolution is always done in the eigenbasis; Trotterization appears
// only inside preparation circuits (see trotter.hpp).

#include <Eigen/Dense>

#include "gentle/basis.hpp"
#include "gentle/echo_record.hpp"
#include "gentle/lattice.hpp"

namespace gentle {

struct EigenSystem {
    VectorXd energies;  // ascending
    MatrixXd vectors;   // columns are eigenvectors (real for all supported terms)

    Eigen::Index dim() const { return energies.size(); }
    double ground_energy() const { return energies[0]; }
    double gap() const { return energies[1] - energies[0]; }
};

inline EigenSystem eigendecompose(const HamiltonianSpec& spec, const Basis& basis) {
    if (basis.dim > (std::size_t{1} << 18))
        throw domain_error("too-large: Hilbert dimension exceeds 2^18");
    for (const auto& t : spec.terms) check_sites(spec.lattice, t);
    MatrixXd H = build_dense(basis, spec.terms);
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(H);
    if (solver.info() != Eigen::Success) throw domain_error("eigendecomposition failed");
    return EigenSystem{solver.eigenvalues(), solver.eigenvectors()};
}

// Product-state constructors -------------------------------------------------

inline VectorXcd all_up_state(const Basis& basis) {
    VectorXcd psi = VectorXcd::Zero(static_cast<Eigen::Index>(basis.dim));
    psi[0] = 1.0;
    return psi;
}

inline VectorXcd fock_state(const Basis& basis, std::uint32_t mask) {
    auto it = basis.lookup.find(mask);
    if (it == basis.lookup.end())
        throw invalid_argument_error("fock state outside the sector basis");
    VectorXcd psi = VectorXcd::Zero(static_cast<Eigen::Index>(basis.dim));
    psi[it->second] = 1.0;
    return psi;
}

// Band-insulator product state: doubly occupied sites from `doublons`.
inline VectorXcd band_insulator_state(const Basis& basis, const std::vector<int>& doublons) {
    std::uint32_t mask = 0;
    for (int s : doublons)
        mask |= (1u << basis.mode(s, Spin::Up)) | (1u << basis.mode(s, Spin::Down));
    return fock_state(basis, mask);
}

// Superposition of target eigenstates: sum_k sqrt(w_k) e^{i phi_k} |phi_{n_k}>.
struct EigenComponent {
    int index;
    double weight;
    double phase = 0.0;
};

inline VectorXcd eigen_superposition(const EigenSystem& eig, const std::vector<EigenComponent>& parts) {
    VectorXcd psi = VectorXcd::Zero(eig.dim());
    for (const auto& c : parts)
        psi += std::sqrt(c.weight) * std::exp(cdouble(0.0, c.phase)) *
               eig.vectors.col(c.index).cast<cdouble>();
    psi.normalize();
    return psi;
}

// Exact dynamics --------------------------------------------------------------

inline VectorXcd evolve(const VectorXcd& psi, const EigenSystem& eig, double t) {
    if (psi.size() != eig.dim()) throw invalid_argument_error("evolve: dimension mismatch");
    // V e^{-iEt} V^T psi, split into real and imaginary parts so the rotation
    // stays in real arithmetic.
    VectorXd cr = eig.vectors.transpose() * psi.real();
    VectorXd ci = eig.vectors.transpose() * psi.imag();
    VectorXcd c(eig.dim());
    for (Eigen::Index n = 0; n < eig.dim(); ++n)
        c[n] = cdouble(cr[n], ci[n]) * std::exp(cdouble(0.0, -eig.energies[n] * t));
    VectorXd outr = eig.vectors * c.real().matrix();
    VectorXd outi = eig.vectors * c.imag().matrix();
    VectorXcd out(eig.dim());
    out.real() = outr;
    out.imag() = outi;
    return out;
}

// Spectral weights p_n = |<phi_n|psi>|^2.
inline VectorXd spectral_weights(const VectorXcd& psi, const EigenSystem& eig) {
    VectorXd cr = eig.vectors.transpose() * psi.real();
    VectorXd ci = eig.vectors.transpose() * psi.imag();
    return (cr.array().square() + ci.array().square()).matrix();
}

// L(t) = |sum_n p_n e^{-i E_n t}|^2 for a pure state.
inline EchoRecord loschmidt_echo(const VectorXcd& psi, const EigenSystem& eig,
                                 const std::vector<double>& times, const std::string& unit = "g") {
    VectorXd p = spectral_weights(psi, eig);
    std::vector<std::pair<double, double>> modes; // (E_n, p_n), pruned
    for (Eigen::Index n = 0; n < p.size(); ++n)
        if (p[n] > 1e-16) modes.emplace_back(eig.energies[n], p[n]);
    EchoRecord rec;
    rec.unit = unit;
    rec.times = times;
    rec.values.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < 0) throw invalid_argument_error("loschmidt_echo: negative time");
        cdouble amp = 0.0;
        for (const auto& [E, pn] : modes) amp += pn * std::exp(cdouble(0.0, -E * times[k]));
        rec.values[k] = std::norm(amp);
    }
    rec.noise.dim = static_cast<std::uint64_t>(eig.dim());
    return rec;
}

// <psi| H^power |psi> for power in {1, 2}.
inline double expectation(const VectorXcd& psi, const HamiltonianSpec& spec, const Basis& basis,
                          int power = 1) {
    if (power != 1 && power != 2) throw invalid_argument_error("expectation: power must be 1 or 2");
    VectorXcd hpsi = apply_spec(basis, spec.terms, psi);
    if (power == 1) return psi.dot(hpsi).real();
    return hpsi.squaredNorm();
}

// Binned spectral weight sum_n p_n over the energy grid `edges`.
inline std::vector<double> ldos(const VectorXcd& psi, const EigenSystem& eig,
                                const std::vector<double>& edges) {
    if (edges.size() < 2) throw invalid_argument_error("ldos: need at least one bin");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1])) throw invalid_argument_error("ldos: edges must increase");
    VectorXd p = spectral_weights(psi, eig);
    std::vector<double> mass(edges.size() - 1, 0.0);
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        if (p[n] <= 0.0) continue;
        double E = eig.energies[n];
        if (E < edges.front() - 1e-12 || E > edges.back() + 1e-12)
            throw invalid_argument_error("ldos: bins do not cover the occupied spectrum");
        auto it = std::upper_bound(edges.begin(), edges.end(), E);
        std::size_t bin = (it == edges.begin()) ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
        if (bin >= mass.size()) bin = mass.size() - 1;
        mass[bin] += p[n];
    }
    return mass;
}

inline std::vector<double> make_energy_bins(double e_min, double e_max, double width = 0.05) {
    std::vector<double> edges;
    for (double e = e_min; e < e_max + width; e += width) edges.push_back(e);
    return edges;
}

} // namespace gentle
