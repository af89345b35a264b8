#pragma once

// Computational bases for the state-vector engine.  Spin models use the full
// 2^N product basis (bit = 1 means spin down, so |up...up> is index 0).
// Fermi-Hubbard states live in a fixed (N_up, N_down) sector of Fock masks
// over 2*sites Jordan-Wigner modes, ordered along the row-major site path
// with spins interleaved: mode = 2*site + spin.

#include <bit>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "gentle/common.hpp"
#include "gentle/lattice.hpp"

namespace gentle {

struct Basis {
    Lattice lattice;
    bool fermionic = false;
    int n_up = 0;
    int n_down = 0;
    std::vector<std::uint32_t> masks;               // fermionic sector only
    std::unordered_map<std::uint32_t, int> lookup;  // mask -> basis index
    std::size_t dim = 0;

    int modes() const { return fermionic ? 2 * lattice.sites() : lattice.sites(); }
    int mode(int site, Spin s) const { return 2 * site + static_cast<int>(s); }
};

inline Basis make_spin_basis(const Lattice& lat) {
    if (lat.sites() > 18) throw domain_error("too-large: spin basis capped at 18 sites");
    Basis b;
    b.lattice = lat;
    b.fermionic = false;
    b.dim = std::size_t{1} << lat.sites();
    return b;
}

inline Basis make_fermion_basis(const Lattice& lat, int n_up, int n_down) {
    int ns = lat.sites();
    if (ns > 14) throw domain_error("too-large: fermion basis capped at 14 sites");
    if (n_up < 0 || n_down < 0 || n_up > ns || n_down > ns)
        throw invalid_argument_error("invalid sector occupation");
    Basis b;
    b.lattice = lat;
    b.fermionic = true;
    b.n_up = n_up;
    b.n_down = n_down;

    // Enumerate spin-resolved occupation patterns and interleave the bits.
    std::vector<std::uint32_t> ups, downs;
    for (std::uint32_t m = 0; m < (1u << ns); ++m) {
        if (std::popcount(m) == n_up) ups.push_back(m);
        if (std::popcount(m) == n_down) downs.push_back(m);
    }
    auto interleave = [ns](std::uint32_t site_mask, int spin) {
        std::uint32_t out = 0;
        for (int s = 0; s < ns; ++s)
            if (site_mask & (1u << s)) out |= 1u << (2 * s + spin);
        return out;
    };
    for (auto mu : ups)
        for (auto md : downs) b.masks.push_back(interleave(mu, 0) | interleave(md, 1));
    std::sort(b.masks.begin(), b.masks.end());
    b.dim = b.masks.size();
    b.lookup.reserve(b.dim * 2);
    for (std::size_t i = 0; i < b.dim; ++i) b.lookup.emplace(b.masks[i], static_cast<int>(i));
    return b;
}

// Jordan-Wigner sign of c^dag_i c_j acting on |mask> (i != j, mode j occupied,
// mode i empty): parity of the occupied modes strictly between i and j.
inline int jw_sign(std::uint32_t mask, int i, int j) {
    int lo = std::min(i, j), hi = std::max(i, j);
    std::uint32_t between = mask & (((1u << hi) - 1u) & ~((1u << (lo + 1)) - 1u));
    return (std::popcount(between) & 1) ? -1 : +1;
}

// ----------------------------------------------------------------------------
// Term action.  apply_term accumulates coeff * T |in> into |out|.
// ----------------------------------------------------------------------------

inline void apply_term(const Basis& basis, const Term& t, const VectorXcd& in, VectorXcd& out) {
    const auto dim = static_cast<Eigen::Index>(basis.dim);
    switch (t.kind) {
    case TermKind::Z: {
        const std::uint32_t bit = 1u << t.site_a;
        for (Eigen::Index i = 0; i < dim; ++i) {
            double z = (static_cast<std::uint32_t>(i) & bit) ? -1.0 : 1.0;
            out[i] += t.coeff * z * in[i];
        }
        break;
    }
    case TermKind::X: {
        const std::uint32_t bit = 1u << t.site_a;
        for (Eigen::Index i = 0; i < dim; ++i)
            out[static_cast<Eigen::Index>(static_cast<std::uint32_t>(i) ^ bit)] += t.coeff * in[i];
        break;
    }
    case TermKind::XX: {
        const std::uint32_t flip = (1u << t.site_a) | (1u << t.site_b);
        for (Eigen::Index i = 0; i < dim; ++i)
            out[static_cast<Eigen::Index>(static_cast<std::uint32_t>(i) ^ flip)] += t.coeff * in[i];
        break;
    }
    case TermKind::Density: {
        const std::uint32_t bit = 1u << basis.mode(t.site_a, t.spin);
        for (Eigen::Index i = 0; i < dim; ++i)
            if (basis.masks[i] & bit) out[i] += t.coeff * in[i];
        break;
    }
    case TermKind::OnsiteUU: {
        const std::uint32_t bits =
            (1u << basis.mode(t.site_a, Spin::Up)) | (1u << basis.mode(t.site_a, Spin::Down));
        for (Eigen::Index i = 0; i < dim; ++i)
            if ((basis.masks[i] & bits) == bits) out[i] += t.coeff * in[i];
        break;
    }
    case TermKind::Hop: {
        const int mi = basis.mode(t.site_a, t.spin);
        const int mj = basis.mode(t.site_b, t.spin);
        const std::uint32_t bi = 1u << mi, bj = 1u << mj;
        for (Eigen::Index a = 0; a < dim; ++a) {
            std::uint32_t mask = basis.masks[a];
            // c^dag_i c_j
            if ((mask & bj) && !(mask & bi)) {
                std::uint32_t m2 = (mask ^ bj) | bi;
                int b = basis.lookup.at(m2);
                out[b] += t.coeff * jw_sign(mask, mi, mj) * in[a];
            }
            // c^dag_j c_i
            if ((mask & bi) && !(mask & bj)) {
                std::uint32_t m2 = (mask ^ bi) | bj;
                int b = basis.lookup.at(m2);
                out[b] += t.coeff * jw_sign(mask, mj, mi) * in[a];
            }
        }
        break;
    }
    }
}

inline VectorXcd apply_spec(const Basis& basis, const std::vector<Term>& terms, const VectorXcd& in) {
    VectorXcd out = VectorXcd::Zero(in.size());
    for (const auto& t : terms) apply_term(basis, t, in, out);
    return out;
}

// Dense real-symmetric realization.  Every supported term kind has real
// matrix elements in these bases.
inline MatrixXd build_dense(const Basis& basis, const std::vector<Term>& terms) {
    const auto dim = static_cast<Eigen::Index>(basis.dim);
    MatrixXd H = MatrixXd::Zero(dim, dim);
    VectorXcd col(dim), out(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        col.setZero();
        col[j] = 1.0;
        out.setZero();
        for (const auto& t : terms) apply_term(basis, t, col, out);
        H.col(j) = out.real();
    }
    return H;
}

} // namespace gentle
