#pragma once

// Trotterized preparation circuits.  A circuit is an ordered list of gates,
// each an exact exponential of one commuting term group, so reversal and the
// staggered-gauge adjoint trick operate gate-by-gate and invert the circuit
// to machine precision.

#include <memory>

#include "gentle/basis.hpp"
#include "gentle/engine.hpp"

namespace gentle {

enum class GateKind { Diagonal, XGroup, HopGroup };

struct Gate {
    GateKind kind;
    std::vector<Term> terms;
    double theta = 0.0;       // applies exp(-i theta * sum(terms))
    VectorXd diag;            // cached diagonal values (Diagonal gates)
};

struct TrotterCircuit {
    std::shared_ptr<const Basis> basis;
    std::vector<Gate> gates;
};

namespace detail {

inline VectorXd diagonal_values(const Basis& basis, const std::vector<Term>& terms) {
    const auto dim = static_cast<Eigen::Index>(basis.dim);
    VectorXd d = VectorXd::Zero(dim);
    for (const auto& t : terms) {
        switch (t.kind) {
        case TermKind::Z: {
            const std::uint32_t bit = 1u << t.site_a;
            for (Eigen::Index i = 0; i < dim; ++i)
                d[i] += (static_cast<std::uint32_t>(i) & bit) ? -t.coeff : t.coeff;
            break;
        }
        case TermKind::Density: {
            const std::uint32_t bit = 1u << basis.mode(t.site_a, t.spin);
            for (Eigen::Index i = 0; i < dim; ++i)
                if (basis.masks[i] & bit) d[i] += t.coeff;
            break;
        }
        case TermKind::OnsiteUU: {
            const std::uint32_t bits =
                (1u << basis.mode(t.site_a, Spin::Up)) | (1u << basis.mode(t.site_a, Spin::Down));
            for (Eigen::Index i = 0; i < dim; ++i)
                if ((basis.masks[i] & bits) == bits) d[i] += t.coeff;
            break;
        }
        default:
            throw invalid_argument_error("diagonal gate with off-diagonal term");
        }
    }
    return d;
}

inline void apply_x_rotation(const Basis& basis, const Term& t, double theta, VectorXcd& psi) {
    const std::uint32_t flip = (t.kind == TermKind::XX)
                                   ? ((1u << t.site_a) | (1u << t.site_b))
                                   : (1u << t.site_a);
    const double phi = theta * t.coeff;
    const double c = std::cos(phi), s = std::sin(phi);
    const cdouble ims(0.0, -s);
    const auto dim = static_cast<Eigen::Index>(basis.dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const auto j = static_cast<Eigen::Index>(static_cast<std::uint32_t>(i) ^ flip);
        if (j <= i) continue;
        const cdouble a = psi[i], b = psi[j];
        psi[i] = c * a + ims * b;
        psi[j] = c * b + ims * a;
    }
}

inline void apply_hop_rotation(const Basis& basis, const Term& t, double theta, VectorXcd& psi) {
    const int mi = basis.mode(t.site_a, t.spin);
    const int mj = basis.mode(t.site_b, t.spin);
    const std::uint32_t bi = 1u << mi, bj = 1u << mj;
    const double phi = theta * t.coeff;
    const double c = std::cos(phi), s = std::sin(phi);
    const auto dim = static_cast<Eigen::Index>(basis.dim);
    for (Eigen::Index a = 0; a < dim; ++a) {
        const std::uint32_t mask = basis.masks[a];
        if (!(mask & bj) || (mask & bi)) continue; // handle each pair from one side
        const std::uint32_t m2 = (mask ^ bj) | bi;
        const auto b = static_cast<Eigen::Index>(basis.lookup.at(m2));
        const double sign = jw_sign(mask, mi, mj);
        const cdouble ims(0.0, -s * sign);
        const cdouble va = psi[a], vb = psi[b];
        psi[a] = c * va + ims * vb;
        psi[b] = c * vb + ims * va;
    }
}

} // namespace detail

inline Gate make_gate(const Basis& basis, GateKind kind, std::vector<Term> terms, double theta) {
    Gate g{kind, std::move(terms), theta, {}};
    if (kind == GateKind::Diagonal) g.diag = detail::diagonal_values(basis, g.terms);
    return g;
}

inline void apply_gate(const Basis& basis, const Gate& g, VectorXcd& psi) {
    switch (g.kind) {
    case GateKind::Diagonal: {
        for (Eigen::Index i = 0; i < psi.size(); ++i)
            psi[i] *= std::exp(cdouble(0.0, -g.theta * g.diag[i]));
        break;
    }
    case GateKind::XGroup:
        for (const auto& t : g.terms) detail::apply_x_rotation(basis, t, g.theta, psi);
        break;
    case GateKind::HopGroup:
        for (const auto& t : g.terms) detail::apply_hop_rotation(basis, t, g.theta, psi);
        break;
    }
}

inline VectorXcd apply_circuit(const TrotterCircuit& circ, VectorXcd psi) {
    for (const auto& g : circ.gates) apply_gate(*circ.basis, g, psi);
    return psi;
}

// Partition terms into exactly-exponentiable commuting groups: one diagonal
// group, one X-product group, and hop groups with disjoint (site, spin)
// support.
inline std::vector<std::pair<GateKind, std::vector<Term>>> commuting_groups(const std::vector<Term>& terms) {
    std::vector<Term> diag, xgrp;
    std::vector<std::vector<Term>> hops;
    for (const auto& t : terms) {
        if (is_diagonal(t.kind)) {
            diag.push_back(t);
        } else if (t.kind == TermKind::X || t.kind == TermKind::XX) {
            xgrp.push_back(t);
        } else { // Hop
            bool placed = false;
            for (auto& grp : hops) {
                bool clash = false;
                for (const auto& u : grp)
                    if (u.spin == t.spin &&
                        (u.site_a == t.site_a || u.site_a == t.site_b || u.site_b == t.site_a ||
                         u.site_b == t.site_b)) {
                        clash = true;
                        break;
                    }
                if (!clash) {
                    grp.push_back(t);
                    placed = true;
                    break;
                }
            }
            if (!placed) hops.push_back({t});
        }
    }
    std::vector<std::pair<GateKind, std::vector<Term>>> out;
    if (!diag.empty()) out.emplace_back(GateKind::Diagonal, std::move(diag));
    if (!xgrp.empty()) out.emplace_back(GateKind::XGroup, std::move(xgrp));
    for (auto& h : hops) out.emplace_back(GateKind::HopGroup, std::move(h));
    return out;
}

namespace detail {

// exp(-i theta * sum(groups)) as gates, symmetric ordering when more than one
// group so each step stays second-order accurate.
inline void emit_groups(const Basis& basis,
                        const std::vector<std::pair<GateKind, std::vector<Term>>>& groups,
                        double theta, std::vector<Gate>& gates) {
    if (groups.empty()) return;
    if (groups.size() == 1) {
        gates.push_back(make_gate(basis, groups[0].first, groups[0].second, theta));
        return;
    }
    for (std::size_t i = 0; i + 1 < groups.size(); ++i)
        gates.push_back(make_gate(basis, groups[i].first, groups[i].second, theta / 2));
    gates.push_back(make_gate(basis, groups.back().first, groups.back().second, theta));
    for (std::size_t i = groups.size() - 1; i-- > 0;)
        gates.push_back(make_gate(basis, groups[i].first, groups[i].second, theta / 2));
}

} // namespace detail

// Second-order product circuit for the linearly ramped interpolation
// H(s) = H_static + s * H_ramp over total time T_a in steps of dT:
// each step applies exp(-i H_static dT/2) exp(-i H_ramp dT_k) exp(-i H_static dT/2)
// with dT_k = (T_k + T_{k+1}) dT / (2 T_a).
inline TrotterCircuit build_adiabatic_circuit(std::shared_ptr<const Basis> basis,
                                              const std::vector<Term>& static_terms,
                                              const std::vector<Term>& ramp_terms, double T_a,
                                              double dT) {
    if (dT <= 0) throw invalid_argument_error("adiabatic circuit: dT must be positive");
    if (T_a < 0) throw invalid_argument_error("adiabatic circuit: negative duration");
    if (static_terms.empty())
        throw invalid_argument_error("degenerate-split: static term set is empty");
    TrotterCircuit circ;
    circ.basis = std::move(basis);
    if (T_a == 0) return circ;

    const int n = std::max(1, static_cast<int>(std::round(T_a / dT)));
    const double step = T_a / n;
    auto static_groups = commuting_groups(static_terms);
    auto ramp_groups = commuting_groups(ramp_terms);

    for (int k = 0; k < n; ++k) {
        const double s_mid = (2 * k + 1) * step / (2 * T_a);
        const double dT_k = s_mid * step;
        detail::emit_groups(*circ.basis, static_groups, step / 2, circ.gates);
        detail::emit_groups(*circ.basis, ramp_groups, dT_k, circ.gates);
        detail::emit_groups(*circ.basis, static_groups, step / 2, circ.gates);
    }
    return circ;
}

// State preparation: psi = U_prep psi0.
inline VectorXcd adiabatic_prepare(const TrotterCircuit& circ, const VectorXcd& psi0) {
    return apply_circuit(circ, psi0);
}

inline TrotterCircuit concat(const TrotterCircuit& a, const TrotterCircuit& b) {
    TrotterCircuit out = a;
    out.gates.insert(out.gates.end(), b.gates.begin(), b.gates.end());
    return out;
}

// Staggered generator: Ising uses sum_{(x+y) odd} sigma^z, FH uses
// sum_i (-1)^(x+y) n_i; conjugation by exp(-i pi/2 H_stagg) flips the sign of
// every nearest-neighbor two-site term and leaves single-site terms alone.
inline std::vector<Term> staggered_generator(const Lattice& lat, bool fermionic) {
    std::vector<Term> terms;
    for (int s = 0; s < lat.sites(); ++s) {
        if (fermionic) {
            double c = lat.parity(s);
            terms.push_back({TermKind::Density, c, s, 0, Spin::Up});
            terms.push_back({TermKind::Density, c, s, 0, Spin::Down});
        } else if (lat.parity(s) < 0) {
            terms.push_back({TermKind::Z, 1.0, s, 0, Spin::None});
        }
    }
    return terms;
}

// Exact adjoint of a preparation circuit built only from global-control
// ingredients: staggered rotations around the reversed circuit with the
// single-site term signs flipped (two-site terms keep their sign).
inline TrotterCircuit unprep_via_gauge(const TrotterCircuit& prep) {
    const Basis& basis = *prep.basis;
    const Lattice& lat = basis.lattice;
    for (const auto& g : prep.gates)
        for (const auto& t : g.terms) {
            if (t.kind == TermKind::X)
                throw invalid_argument_error(
                    "unsupported: gauge reversal undefined for single-site X terms");
            if (is_two_site(t.kind) && lat.parity(t.site_a) == lat.parity(t.site_b))
                throw invalid_argument_error(
                    "unsupported: gauge reversal requires bipartite two-site terms");
        }

    auto stagg = staggered_generator(lat, basis.fermionic);
    TrotterCircuit inv;
    inv.basis = prep.basis;
    inv.gates.push_back(make_gate(basis, GateKind::Diagonal, stagg, kPi / 2));
    for (auto it = prep.gates.rbegin(); it != prep.gates.rend(); ++it) {
        Gate g = *it;
        for (auto& t : g.terms)
            if (!is_two_site(t.kind)) t.coeff = -t.coeff;
        if (g.kind == GateKind::Diagonal) g.diag = -g.diag;
        inv.gates.push_back(std::move(g));
    }
    inv.gates.push_back(make_gate(basis, GateKind::Diagonal, stagg, -kPi / 2));
    return inv;
}

// Echo measured through the explicit circuit of the protocol: prepare, evolve
// for t, un-prepare via the gauge circuit, project on the initial basis state.
inline EchoRecord echo_via_unprep(const TrotterCircuit& prep, const EigenSystem& eig,
                                  const VectorXcd& psi0, const std::vector<double>& times,
                                  const std::string& unit = "g") {
    TrotterCircuit inv = unprep_via_gauge(prep);
    VectorXcd prepared = apply_circuit(prep, psi0);
    EchoRecord rec;
    rec.unit = unit;
    rec.times = times;
    rec.values.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        VectorXcd psi = evolve(prepared, eig, times[k]);
        psi = apply_circuit(inv, psi);
        rec.values[k] = std::norm(psi0.dot(psi));
    }
    rec.noise.dim = static_cast<std::uint64_t>(eig.dim());
    return rec;
}

} // namespace gentle
