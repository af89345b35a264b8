#pragma once

// From fitted frequencies to absolute energies: the anchored
// minimum-distance-superset solve maps each frequency to a level pair, and
// the GENTLE equations combine the pairings with <H> and <H^2> to pin the
// absolute scale.

#include <json.hpp>

#include "gentle/optim.hpp"
#include "gentle/sigproc.hpp"

namespace gentle {

struct EnergyLadder {
    std::vector<double> levels;                // e_0 = 0, ascending
    std::vector<std::pair<int, int>> pairing;  // per input frequency: (i, j) or (-1, -1)
    std::vector<int> unexplained;              // input indices left unconsumed
    bool ambiguous = false;                    // near-degenerate pair differences

    bool complete() const { return unexplained.empty(); }
};

namespace detail {

// Greedy interval matching of the implied pair differences against the input
// frequency multiset: each frequency is consumed by at most one pair.
// Returns false when a required difference has no unconsumed match.  With
// allow_missing_cross, non-anchored differences (between two excited levels,
// whose amplitudes 2 p_n p_m are quadratically small and often unmeasurable)
// may be absent; anchored differences must always be consumed.
struct PairDiff {
    double diff;
    int i, j;
};

inline bool match_differences(const std::vector<double>& freqs, const std::vector<PairDiff>& diffs,
                              double tol, std::vector<int>& assignment,
                              bool allow_missing_cross = false, int* missing = nullptr) {
    const auto P = freqs.size();
    std::vector<bool> used(P, false);
    assignment.assign(diffs.size(), -1);
    if (missing) *missing = 0;
    for (std::size_t d = 0; d < diffs.size(); ++d) {
        auto it = std::lower_bound(freqs.begin(), freqs.end(), diffs[d].diff - tol);
        int pick = -1;
        for (auto k = static_cast<std::size_t>(it - freqs.begin()); k < P; ++k) {
            if (freqs[k] > diffs[d].diff + tol) break;
            if (!used[k]) {
                pick = static_cast<int>(k);
                break;
            }
        }
        if (pick < 0) {
            if (allow_missing_cross && diffs[d].i > 0) {
                if (missing) ++*missing;
                continue;
            }
            return false;
        }
        used[static_cast<std::size_t>(pick)] = true;
        assignment[d] = pick;
    }
    return true;
}

} // namespace detail

// Relaxed minimum-distance-superset solve: the ground level anchors every
// other level, so candidate ladders are {0} plus a subset of the measured
// frequencies.  Among configurations whose implied pairwise differences can
// all be consumed by distinct measured frequencies (within tol), the one
// consuming the most frequencies wins; ties fall to fewest levels, then (when
// amplitudes are supplied) to the largest amplitude mass on the anchored
// pairs, then to the lexicographically smallest ladder.  The amplitude rule
// resolves the mirror-reflection ambiguity of the difference multiset: with
// p0 dominant the anchored pairs (0, k) carry the largest amplitudes, so the
// physical ladder beats its reflection.  If nothing consumes every frequency
// the best partial ladder is returned with the leftovers listed.
inline EnergyLadder superset_solve(const std::vector<double>& freqs, double tol = 5e-3,
                                   const std::vector<double>& amps = {},
                                   bool allow_missing_cross = false) {
    const auto P = freqs.size();
    if (P == 0) throw invalid_argument_error("superset_solve: no frequencies");
    if (P > 18) throw invalid_argument_error("superset_solve: too many modes (cap 18)");
    for (std::size_t i = 0; i < P; ++i) {
        if (freqs[i] <= 0) throw invalid_argument_error("superset_solve: frequencies must be positive");
        if (i > 0 && freqs[i] < freqs[i - 1])
            throw invalid_argument_error("superset_solve: frequencies must be sorted");
    }
    if (!amps.empty() && amps.size() != P)
        throw invalid_argument_error("superset_solve: amplitude/frequency length mismatch");

    std::vector<double> best_levels{0.0};
    std::vector<detail::PairDiff> best_diffs;
    std::vector<int> best_assign;
    std::size_t best_consumed = 0;
    int best_missing = 0;
    double best_anchor_mass = -1.0;

    auto lex_less = [](const std::vector<double>& a, const std::vector<double>& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    };

    const std::uint32_t n_masks = 1u << P;
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
        std::vector<double> levels{0.0};
        for (std::size_t p = 0; p < P; ++p)
            if (mask & (1u << p)) levels.push_back(freqs[p]);
        const auto L = levels.size();
        std::vector<detail::PairDiff> diffs;
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = i + 1; j < L; ++j)
                diffs.push_back({levels[j] - levels[i], static_cast<int>(i), static_cast<int>(j)});
        std::sort(diffs.begin(), diffs.end(),
                  [](const detail::PairDiff& a, const detail::PairDiff& b) { return a.diff < b.diff; });
        std::vector<int> assign;
        int missing = 0;
        if (!detail::match_differences(freqs, diffs, tol, assign, allow_missing_cross, &missing))
            continue;
        std::size_t consumed = 0;
        for (int a : assign)
            if (a >= 0) ++consumed;
        double anchor_mass = 0.0;
        if (!amps.empty())
            for (std::size_t d = 0; d < diffs.size(); ++d)
                if (diffs[d].i == 0 && assign[d] >= 0)
                    anchor_mass += amps[static_cast<std::size_t>(assign[d])];
        bool better = false;
        if (consumed != best_consumed) {
            better = consumed > best_consumed;
        } else if (levels.size() != best_levels.size()) {
            better = levels.size() < best_levels.size();
        } else if (missing != best_missing) {
            better = missing < best_missing;
        } else if (!amps.empty() && std::abs(anchor_mass - best_anchor_mass) > 1e-14) {
            better = anchor_mass > best_anchor_mass;
        } else {
            better = lex_less(levels, best_levels);
        }
        if (better) {
            best_levels = levels;
            best_diffs = diffs;
            best_assign = assign;
            best_consumed = consumed;
            best_missing = missing;
            best_anchor_mass = anchor_mass;
        }
    }

    EnergyLadder ladder;
    ladder.levels = best_levels;
    ladder.pairing.assign(P, {-1, -1});
    for (std::size_t d = 0; d < best_diffs.size(); ++d)
        if (best_assign[d] >= 0)
            ladder.pairing[static_cast<std::size_t>(best_assign[d])] = {best_diffs[d].i,
                                                                        best_diffs[d].j};
    for (std::size_t p = 0; p < P; ++p)
        if (ladder.pairing[p].first < 0) ladder.unexplained.push_back(static_cast<int>(p));
    // Degenerate-gap warning: two implied differences inside one tolerance
    // window cannot be paired unambiguously.
    for (std::size_t a = 0; a + 1 < best_diffs.size(); ++a)
        if (best_diffs[a + 1].diff - best_diffs[a].diff < 2 * tol) ladder.ambiguous = true;
    return ladder;
}

// --------------------------------------------------------------------------
// GENTLE equations
// --------------------------------------------------------------------------

struct GentleEquations {
    std::vector<double> omega, amp;           // explained modes
    std::vector<std::pair<int, int>> pairs;   // level pair per mode
    double expH = 0.0, expH2 = 0.0;
    int n_levels = 0;
    double penalty_lambda = 1e3;
};

// Sum of squared residues of the 2P + 2 equations plus the normalization
// penalty; params = (E_0..E_{L-1}, q_0..q_{L-1}) with p_n = q_n^2.
inline double gentle_residual(const GentleEquations& eq, const VectorXd& params,
                              VectorXd* grad = nullptr) {
    const int L = eq.n_levels;
    const auto E = params.head(L);
    const auto q = params.tail(L);
    if (grad) grad->setZero(2 * L);

    double f = 0.0;
    for (std::size_t p = 0; p < eq.omega.size(); ++p) {
        const auto [i, j] = eq.pairs[p];
        const double rw = (E[j] - E[i]) - eq.omega[p];
        f += rw * rw;
        const double ra = 2.0 * q[i] * q[i] * q[j] * q[j] - eq.amp[p];
        f += ra * ra;
        if (grad) {
            (*grad)[j] += 2 * rw;
            (*grad)[i] -= 2 * rw;
            (*grad)[L + i] += 2 * ra * 4.0 * q[i] * q[j] * q[j];
            (*grad)[L + j] += 2 * ra * 4.0 * q[i] * q[i] * q[j];
        }
    }
    double h1 = 0.0, h2 = 0.0, norm = 0.0;
    for (int k = 0; k < L; ++k) {
        const double pk = q[k] * q[k];
        h1 += pk * E[k];
        h2 += pk * E[k] * E[k];
        norm += pk;
    }
    const double r1 = h1 - eq.expH, r2 = h2 - eq.expH2, rn = norm - 1.0;
    f += r1 * r1 + r2 * r2 + eq.penalty_lambda * rn * rn;
    if (grad) {
        for (int k = 0; k < L; ++k) {
            const double pk = q[k] * q[k];
            (*grad)[k] += 2 * r1 * pk + 2 * r2 * 2.0 * pk * E[k];
            (*grad)[L + k] += 2 * r1 * 2.0 * q[k] * E[k] + 2 * r2 * 2.0 * q[k] * E[k] * E[k] +
                              eq.penalty_lambda * 2 * rn * 2.0 * q[k];
        }
    }
    return f;
}

struct GentleSolution {
    VectorXd energies;  // absolute E_n, ascending with the ladder order
    VectorXd overlaps;  // p_n = q_n^2
    double residual = 0.0;
    EnergyLadder ladder;
    bool low_confidence = false;
    bool p0_dominant = true;
    int restarts_used = 0;

    double ground_energy() const { return energies[0]; }
};

struct ReconstructParams {
    double tol = 5e-3;          // superset frequency mismatch
    int restarts = 5;           // multi-start count (jittered)
    double jitter = 0.05;       // energy jitter scale, ~ grid resolution
    double low_conf_residual = 1e-3;
    std::uint64_t seed = 0;
    double penalty_lambda = 1e3;
    // Accept ladders whose excited-excited differences are unmeasured (their
    // amplitudes are quadratically small); see superset_solve.
    bool allow_missing_cross = false;
};

// Quasi-Newton solve of the GENTLE equations from the prescribed start:
// E_0 = <H>, remaining levels at E_0 + ladder offsets, p_0 = 1/2 with the
// rest uniform.  Multi-start with jittered energies; best residual wins.
inline GentleSolution solve_gentle(const SpectrumEstimate& spectrum, double expH, double expH2,
                                   const ReconstructParams& par = {}) {
    if (spectrum.modes() < 1) throw invalid_argument_error("solve_gentle: spectrum has no modes");
    EnergyLadder ladder =
        superset_solve(spectrum.freqs, par.tol, spectrum.amps, par.allow_missing_cross);
    const int L = static_cast<int>(ladder.levels.size());
    if (L < 2) throw domain_error("solve_gentle: superset solve produced no excited levels");

    GentleEquations eq;
    eq.n_levels = L;
    eq.expH = expH;
    eq.expH2 = expH2;
    eq.penalty_lambda = par.penalty_lambda;
    for (std::size_t p = 0; p < spectrum.modes(); ++p) {
        if (ladder.pairing[p].first < 0) continue;
        eq.omega.push_back(spectrum.freqs[p]);
        eq.amp.push_back(spectrum.amps[p]);
        eq.pairs.push_back(ladder.pairing[p]);
    }

    auto objective = [&eq](const VectorXd& x, VectorXd& g) { return gentle_residual(eq, x, &g); };

    VectorXd base(2 * L);
    for (int k = 0; k < L; ++k) base[k] = expH + ladder.levels[static_cast<std::size_t>(k)];
    base[L] = std::sqrt(0.5);
    for (int k = 1; k < L; ++k) base[L + k] = std::sqrt(0.5 / (L - 1));

    // The GENTLE equations are exactly invariant under reflecting the ladder
    // and reversing the overlaps (both moments included), so equal-residual
    // mirror solutions exist.  The protocol's standing assumption p_0 > p_n
    // selects the physical branch: restarts also jitter the overlaps to reach
    // both basins, and ties in residual resolve toward the dominant-p_0 one.
    auto p0_dominant = [L](const VectorXd& x) {
        for (int k = 1; k < L; ++k)
            if (x[L + k] * x[L + k] >= x[L] * x[L]) return false;
        return true;
    };

    GentleSolution best;
    best.residual = std::numeric_limits<double>::infinity();
    bool best_dom = false;
    for (int r = 0; r < std::max(1, par.restarts); ++r) {
        VectorXd x0 = base;
        if (r > 0) {
            auto rng = make_rng(par.seed, "gentle-restart", static_cast<std::uint64_t>(r));
            std::uniform_real_distribution<double> u(-par.jitter, par.jitter);
            for (int k = 0; k < L; ++k) x0[k] += u(rng);
            std::uniform_real_distribution<double> v(-0.2, 0.2);
            for (int k = 0; k < L; ++k) x0[L + k] *= 1.0 + v(rng);
        }
        LbfgsResult opt = lbfgs_minimize(objective, x0, LbfgsOptions{800, 10, 1e-13, 1e-18});
        bool dom = p0_dominant(opt.x);
        double tie = 1e-10 * std::max(1.0, std::abs(best.residual));
        bool better = opt.f < best.residual - tie ||
                      (opt.f <= best.residual + tie && dom && !best_dom);
        if (better) {
            best.residual = opt.f;
            best.energies = opt.x.head(L);
            best.overlaps = opt.x.tail(L).array().square();
            best.restarts_used = r + 1;
            best_dom = dom;
        }
    }
    best.ladder = ladder;
    best.low_confidence = !(best.residual <= par.low_conf_residual);
    best.p0_dominant = best_dom;
    return best;
}

inline nlohmann::json to_json(const GentleSolution& s) {
    nlohmann::json j;
    j["energies"] = std::vector<double>(s.energies.data(), s.energies.data() + s.energies.size());
    j["overlaps"] = std::vector<double>(s.overlaps.data(), s.overlaps.data() + s.overlaps.size());
    j["residual"] = s.residual;
    j["low_confidence"] = s.low_confidence;
    j["p0_dominant"] = s.p0_dominant;
    j["ladder_levels"] = s.ladder.levels;
    nlohmann::json pairs = nlohmann::json::array();
    for (auto [i, k] : s.ladder.pairing) pairs.push_back({i, k});
    j["pairing"] = pairs;
    j["unexplained"] = s.ladder.unexplained;
    j["ambiguous_pairing"] = s.ladder.ambiguous;
    return j;
}

} // namespace gentle
