#pragma once

// Finite-temperature initial states.  The echo generalization for a prepared
// Gibbs state rho = U rho0 U^dag is the linearized trace form
//   Tr[rho rho(T)] = sum_n rho_nn^2 + 2 sum_{n<m} |rho_nm|^2 cos[(E_n-E_m) T]
// with rho_nm taken in the eigenbasis of the target Hamiltonian.

#include <limits>

#include "gentle/engine.hpp"
#include "gentle/trotter.hpp"

namespace gentle {

struct ThermalState {
    EigenSystem ref;   // eigensystem of the reference (preparation) Hamiltonian
    VectorXd weights;  // Gibbs weights in that basis, trace 1
    double beta = std::numeric_limits<double>::infinity();
};

inline ThermalState thermal_state(const HamiltonianSpec& H0, const Basis& basis, double beta) {
    if (basis.dim > (std::size_t{1} << 12))
        throw domain_error("too-large: density matrices capped at 2^12");
    if (beta < 0) throw invalid_argument_error("thermal_state: beta must be >= 0 or +inf");
    ThermalState st;
    st.ref = eigendecompose(H0, basis);
    st.beta = beta;
    const auto d = st.ref.dim();
    st.weights = VectorXd::Zero(d);
    if (std::isinf(beta)) {
        st.weights[0] = 1.0;
        return st;
    }
    // Shift by E0 before exponentiating.
    double e0 = st.ref.energies[0];
    for (Eigen::Index i = 0; i < d; ++i) st.weights[i] = std::exp(-beta * (st.ref.energies[i] - e0));
    st.weights /= st.weights.sum();
    return st;
}

// rho in the eigenbasis of the target Hamiltonian: R = A diag(w) A^dag with
// A = V_target^T (U_prep V_ref).
struct ThermalEnsemble {
    MatrixXcd R;        // rho_nm
    VectorXd energies;  // target eigenenergies

    double purity() const { return R.cwiseAbs2().sum(); }
};

inline ThermalEnsemble thermal_ensemble(const ThermalState& st, const TrotterCircuit& prep,
                                        const EigenSystem& target) {
    const auto d = st.ref.dim();
    if (target.dim() != d) throw invalid_argument_error("thermal_ensemble: dimension mismatch");
    MatrixXcd A(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        VectorXcd col = st.ref.vectors.col(k).cast<cdouble>();
        col = apply_circuit(prep, col);
        VectorXd re = target.vectors.transpose() * col.real();
        VectorXd im = target.vectors.transpose() * col.imag();
        for (Eigen::Index n = 0; n < d; ++n) A(n, k) = cdouble(re[n], im[n]);
    }
    ThermalEnsemble ens;
    ens.R = A * st.weights.asDiagonal() * A.adjoint();
    ens.energies = target.energies;
    return ens;
}

// Trace-form echo; beta = inf reproduces the pure-state echo exactly.
inline EchoRecord thermal_echo(const ThermalEnsemble& ens, const std::vector<double>& times,
                               double beta, const std::string& unit = "g") {
    const auto d = ens.R.rows();
    double offset = 0.0;
    for (Eigen::Index n = 0; n < d; ++n) offset += std::norm(ens.R(n, n));
    struct Mode {
        double freq, amp;
    };
    std::vector<Mode> modes;
    for (Eigen::Index n = 0; n < d; ++n)
        for (Eigen::Index m = n + 1; m < d; ++m) {
            double a = 2.0 * std::norm(ens.R(n, m));
            if (a > 1e-16) modes.push_back({ens.energies[m] - ens.energies[n], a});
        }
    EchoRecord rec;
    rec.unit = unit;
    rec.noise.beta = beta;
    rec.noise.dim = static_cast<std::uint64_t>(d);
    rec.times = times;
    rec.values.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        double v = offset;
        for (const auto& mo : modes) v += mo.amp * std::cos(mo.freq * times[k]);
        rec.values[k] = v;
    }
    return rec;
}

// Tr[rho H] and Tr[rho H^2] from the diagonal of rho in the target basis.
inline std::pair<double, double> thermal_moments(const ThermalEnsemble& ens) {
    const auto d = ens.R.rows();
    double h1 = 0.0, h2 = 0.0;
    for (Eigen::Index n = 0; n < d; ++n) {
        double w = ens.R(n, n).real();
        h1 += w * ens.energies[n];
        h2 += w * ens.energies[n] * ens.energies[n];
    }
    return {h1, h2};
}

} // namespace gentle
