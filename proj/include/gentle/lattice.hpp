#pragma once

// Lattice geometry and symbolic Hamiltonian / observable specifications for
// the transverse-field Ising and Fermi-Hubbard models.  Specs are immutable
// term lists; all matrix realizations live in the engine.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gentle/common.hpp"

namespace gentle {

enum class LatticeKind { Chain, Square, Ladder };

struct Lattice {
    LatticeKind kind = LatticeKind::Chain;
    int Lx = 1;
    int Ly = 1;

    int sites() const { return Lx * Ly; }
    // Row-major flat index, x fastest.
    int site(int x, int y) const { return x + Lx * y; }
    int site_x(int s) const { return s % Lx; }
    int site_y(int s) const { return s / Lx; }
    // Sublattice parity (-1)^(x+y); the lattices here are all bipartite.
    int parity(int s) const { return ((site_x(s) + site_y(s)) % 2 == 0) ? +1 : -1; }

    bool operator==(const Lattice&) const = default;
};

inline Lattice make_lattice(LatticeKind kind, int Lx, int Ly) {
    if (Lx < 1 || Ly < 1) throw invalid_argument_error("invalid-lattice: zero-size lattice");
    if (kind == LatticeKind::Chain && Ly != 1)
        throw invalid_argument_error("invalid-lattice: chain requires Ly = 1");
    if (kind == LatticeKind::Ladder && Ly != 2)
        throw invalid_argument_error("invalid-lattice: ladder requires Ly = 2");
    return Lattice{kind, Lx, Ly};
}

inline Lattice chain(int L) { return make_lattice(LatticeKind::Chain, L, 1); }
inline Lattice square(int Lx, int Ly) { return make_lattice(LatticeKind::Square, Lx, Ly); }
inline Lattice ladder(int Lx) { return make_lattice(LatticeKind::Ladder, Lx, 2); }

// Nearest-neighbor bonds with open boundaries, (a, b) with a < b.
inline std::vector<std::pair<int, int>> bonds(const Lattice& lat) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < lat.Ly; ++y)
        for (int x = 0; x < lat.Lx; ++x) {
            if (x + 1 < lat.Lx) out.emplace_back(lat.site(x, y), lat.site(x + 1, y));
            if (y + 1 < lat.Ly) out.emplace_back(lat.site(x, y), lat.site(x, y + 1));
        }
    return out;
}

// Spin conventions for Fermi-Hubbard terms.  Spin::None marks spin-1/2
// (Pauli) terms; Both expands to one term per spin component.
enum class Spin : int { Up = 0, Down = 1, None = -1 };

enum class TermKind {
    XX,       // sigma^x_i sigma^x_j
    X,        // sigma^x_i
    Z,        // sigma^z_i
    Hop,      // c^dag_{i,s} c_{j,s} + h.c.
    OnsiteUU, // n_{i,up} n_{i,down}
    Density   // n_{i,s}
};

inline bool is_two_site(TermKind k) { return k == TermKind::XX || k == TermKind::Hop; }
inline bool is_diagonal(TermKind k) {
    return k == TermKind::Z || k == TermKind::OnsiteUU || k == TermKind::Density;
}
inline bool is_fermionic(TermKind k) {
    return k == TermKind::Hop || k == TermKind::OnsiteUU || k == TermKind::Density;
}

struct Term {
    TermKind kind;
    double coeff = 0.0;
    int site_a = 0;
    int site_b = 0; // unused for single-site kinds
    Spin spin = Spin::None;
};

struct HamiltonianSpec {
    Lattice lattice;
    std::vector<Term> terms;
    std::string unit = "g"; // energy-unit label: g (TFIM) or t (FH)

    bool fermionic() const {
        for (const auto& t : terms)
            if (is_fermionic(t.kind)) return true;
        return false;
    }
};

struct ObservableSpec {
    Lattice lattice;
    std::vector<Term> terms;
    std::string name;
};

inline void check_sites(const Lattice& lat, const Term& t) {
    auto ok = [&](int s) { return s >= 0 && s < lat.sites(); };
    if (!ok(t.site_a) || (is_two_site(t.kind) && !ok(t.site_b)))
        throw invalid_argument_error("invalid-site: term site index out of lattice bounds");
}

// --------------------------------------------------------------------------
// Builders
// --------------------------------------------------------------------------

// H = -J sum_<ij> X_i X_j - g sum_i Z_i + h sum_i (-1)^(x+y) Z_i
inline HamiltonianSpec build_tfim(const Lattice& lat, double J, double g, double staggered_h = 0.0) {
    if (lat.sites() < 1) throw invalid_argument_error("invalid-lattice: zero-size lattice");
    HamiltonianSpec spec;
    spec.lattice = lat;
    spec.unit = "g";
    for (auto [a, b] : bonds(lat)) spec.terms.push_back({TermKind::XX, -J, a, b, Spin::None});
    for (int s = 0; s < lat.sites(); ++s) spec.terms.push_back({TermKind::Z, -g, s, 0, Spin::None});
    if (staggered_h != 0.0)
        for (int s = 0; s < lat.sites(); ++s)
            spec.terms.push_back({TermKind::Z, staggered_h * lat.parity(s), s, 0, Spin::None});
    return spec;
}

// H = -t sum_<ij>,s hop + U sum_i n_up n_down - sum_{i,s} mu_{i,s} n_{i,s}
// on a two-leg ladder of length Lx.  chem maps (site, spin) -> mu.
inline HamiltonianSpec build_fh_ladder(int Lx, double t, double U,
                                       const std::map<std::pair<int, Spin>, double>& chem = {}) {
    Lattice lat = ladder(Lx);
    HamiltonianSpec spec;
    spec.lattice = lat;
    spec.unit = "t";
    for (auto [a, b] : bonds(lat))
        for (Spin s : {Spin::Up, Spin::Down})
            spec.terms.push_back({TermKind::Hop, -t, a, b, s});
    if (U != 0.0)
        for (int s = 0; s < lat.sites(); ++s)
            spec.terms.push_back({TermKind::OnsiteUU, U, s, 0, Spin::None});
    for (const auto& [key, mu] : chem) {
        auto [site, sp] = key;
        if (site < 0 || site >= lat.sites())
            throw invalid_argument_error("invalid-site: chemical potential on out-of-range site");
        if (sp == Spin::None) {
            spec.terms.push_back({TermKind::Density, -mu, site, 0, Spin::Up});
            spec.terms.push_back({TermKind::Density, -mu, site, 0, Spin::Down});
        } else {
            spec.terms.push_back({TermKind::Density, -mu, site, 0, sp});
        }
    }
    return spec;
}

// H_mu = H + mu * O.  Zero-coefficient appended terms are kept so the term
// count is independent of mu.
inline HamiltonianSpec perturb(const HamiltonianSpec& H, const ObservableSpec& O, double mu) {
    if (!(H.lattice == O.lattice))
        throw invalid_argument_error("incompatible-spec: Hamiltonian and observable lattices differ");
    HamiltonianSpec out = H;
    for (Term t : O.terms) {
        t.coeff *= mu;
        out.terms.push_back(t);
    }
    return out;
}

enum class ObservableKind { StaggeredMx, RungDensity };

// Order parameters at a fixed column/rung index x:
//   staggered_mx: sum_y (-1)^(x+y) sigma^x_(x,y)
//   rung_density: sum_{y,s} n_{(x,y),s}
inline ObservableSpec build_observable(ObservableKind kind, const Lattice& lat, int x = 0) {
    if (x < 0 || x >= lat.Lx)
        throw invalid_argument_error("unsupported-observable: column index out of range");
    ObservableSpec obs;
    obs.lattice = lat;
    switch (kind) {
    case ObservableKind::StaggeredMx:
        obs.name = "staggered_mx";
        for (int y = 0; y < lat.Ly; ++y) {
            int s = lat.site(x, y);
            obs.terms.push_back({TermKind::X, static_cast<double>(lat.parity(s)), s, 0, Spin::None});
        }
        break;
    case ObservableKind::RungDensity:
        if (lat.kind != LatticeKind::Ladder)
            throw invalid_argument_error("unsupported-observable: rung_density requires a ladder");
        obs.name = "rung_density";
        for (int y = 0; y < lat.Ly; ++y)
            for (Spin sp : {Spin::Up, Spin::Down})
                obs.terms.push_back({TermKind::Density, 1.0, lat.site(x, y), 0, sp});
        break;
    }
    return obs;
}

// Splits a spec into the single-site part and the two-site part; used by the
// adiabatic schedules and the gauge-reversal circuit.
inline std::pair<std::vector<Term>, std::vector<Term>> split_by_locality(const HamiltonianSpec& spec) {
    std::vector<Term> onsite, twosite;
    for (const auto& t : spec.terms)
        (is_two_site(t.kind) ? twosite : onsite).push_back(t);
    return {onsite, twosite};
}

} // namespace gentle
