#pragma once

// Physicochemical descriptors over the molecular graph model: the nine
// distribution descriptors, QED drug-likeness, normalized logP solubility,
// an Ertl-style synthetic accessibility score with corpus-estimated fragment
// frequencies, the nine-descriptor KL benchmark score, and a Mann-Whitney
// rank test. Parameter tables follow Wildman & Crippen (1999), Ertl (2000)
// TPSA, and the published QED desirability parameters.

#include <cmath>
#include <map>
#include <unordered_map>

#include "qmol/molgraph.hpp"

namespace qmol::chem {

using molgraph::Atom;
using molgraph::Bond;
using molgraph::MolecularGraph;
using molgraph::RingInfo;

constexpr int kNumDescriptors = 9;

inline constexpr std::array<const char*, kNumDescriptors> kDescriptorNames = {
    "BertzCT", "MolLogP", "MolWt", "TPSA", "NumHAcceptors",
    "NumHDonors", "NumRotatableBonds", "NumAliphaticRings", "NumAromaticRings"};

inline constexpr std::array<bool, kNumDescriptors> kDescriptorIsInteger = {
    false, false, false, false, true, true, true, true, true};

struct DescriptorVector {
    double bertz_ct = 0;
    double mol_logp = 0;
    double mol_wt = 0;
    double tpsa = 0;
    int num_h_acceptors = 0;
    int num_h_donors = 0;
    int num_rotatable_bonds = 0;
    int num_aliphatic_rings = 0;
    int num_aromatic_rings = 0;

    std::array<double, kNumDescriptors> as_array() const {
        return {bertz_ct, mol_logp, mol_wt, tpsa,
                static_cast<double>(num_h_acceptors), static_cast<double>(num_h_donors),
                static_cast<double>(num_rotatable_bonds), static_cast<double>(num_aliphatic_rings),
                static_cast<double>(num_aromatic_rings)};
    }
};

namespace detail {

inline double atomic_mass(Atom a) {
    switch (a) {
        case Atom::C: return 12.011;
        case Atom::N: return 14.007;
        case Atom::O: return 15.999;
        case Atom::F: return 18.998403163;
        default: return 0.0;
    }
}
constexpr double kHydrogenMass = 1.008;

struct AtomView {
    int index;
    Atom elem;
    bool aromatic;
    int hydrogens;
    std::vector<std::pair<int, Bond>> neighbors;  // (atom index, bond)
};

inline std::vector<AtomView> atom_views(const MolecularGraph& g) {
    std::vector<AtomView> out;
    for (int i = 0; i < molgraph::kMaxAtoms; ++i) {
        if (g.atoms[static_cast<std::size_t>(i)] == Atom::Pad) continue;
        AtomView v;
        v.index = i;
        v.elem = g.atoms[static_cast<std::size_t>(i)];
        v.aromatic = g.is_aromatic_atom(i);
        v.hydrogens = g.implicit_hydrogens(i);
        for (int j = 0; j < molgraph::kMaxAtoms; ++j)
            if (j != i && g.bond(i, j) != Bond::None) v.neighbors.emplace_back(j, g.bond(i, j));
        out.push_back(std::move(v));
    }
    return out;
}

// ---- Wildman-Crippen logP contributions, C/N/O/F/H subset ----

inline double carbon_logp(const MolecularGraph& g, const AtomView& a) {
    if (a.aromatic) {
        std::vector<std::pair<int, Bond>> subs;
        int arom_bonds = 0;
        for (const auto& [j, b] : a.neighbors) {
            if (b == Bond::Aromatic) ++arom_bonds;
            else subs.emplace_back(j, b);
        }
        for (const auto& [j, b] : subs)
            if (g.atoms[static_cast<std::size_t>(j)] == Atom::F) return 0.0;            // C14
        if (a.hydrogens > 0) return 0.1581;                                             // C18
        if (arom_bonds >= 3) return 0.2955;                                             // C19
        for (const auto& [j, b] : subs) {
            if (b == Bond::Double) return -0.8186;                                      // C25
            if (g.is_aromatic_atom(j)) return 0.2713;                                   // C20
        }
        for (const auto& [j, b] : subs) {
            (void)b;
            switch (g.atoms[static_cast<std::size_t>(j)]) {
                case Atom::C: return 0.1360;                                            // C21
                case Atom::N: return 0.4619;                                            // C22
                case Atom::O: return 0.5437;                                            // C23
                default: break;
            }
        }
        return 0.08129;                                                                 // CS
    }
    bool has_double = false, has_triple = false;
    for (const auto& [j, b] : a.neighbors) {
        (void)j;
        has_double |= (b == Bond::Double);
        has_triple |= (b == Bond::Triple);
    }
    if (!has_double && !has_triple) {
        bool alip_het = false, arom_nb = false, arom_c_nb = false, all_alip_c = true;
        for (const auto& [j, b] : a.neighbors) {
            (void)b;
            const Atom e = g.atoms[static_cast<std::size_t>(j)];
            const bool ar = g.is_aromatic_atom(j);
            if (!ar && (e == Atom::N || e == Atom::O || e == Atom::F)) alip_het = true;
            if (ar) {
                arom_nb = true;
                if (e == Atom::C) arom_c_nb = true;
            }
            if (ar || e != Atom::C) all_alip_c = false;
        }
        if (a.hydrogens >= 2) {
            if (alip_het) return -0.2035;                                               // C3
            if (arom_nb) {
                if (arom_c_nb && a.hydrogens == 3) return 0.08452;                      // C8
                if (a.hydrogens == 3) return -0.1444;                                   // C9
                return -0.0516;                                                         // C10
            }
            if (all_alip_c) return 0.1441;                                              // C1
            return 0.08129;
        }
        if (alip_het) return -0.2051;                                                   // C4
        if (arom_nb) return a.hydrogens == 1 ? 0.1193 : -0.0967;                        // C11 / C12
        if (all_alip_c) return 0.0;                                                     // C2
        return 0.08129;
    }
    if (has_triple) return 0.0017;                                                      // C7
    int dbl_partner = -1;
    for (const auto& [j, b] : a.neighbors)
        if (b == Bond::Double) {
            dbl_partner = j;
            break;
        }
    if (g.atoms[static_cast<std::size_t>(dbl_partner)] != Atom::C && !g.is_aromatic_atom(dbl_partner))
        return -0.2783;                                                                 // C5
    for (const auto& [j, b] : a.neighbors) {
        (void)b;
        if (g.is_aromatic_atom(j)) return 0.2640;                                       // C26
    }
    return 0.1551;                                                                      // C6
}

inline double nitrogen_logp(const MolecularGraph& g, const AtomView& a) {
    if (a.aromatic) return -0.3239;                                                     // N11
    bool has_triple = false, has_double = false, arom_nb = false;
    for (const auto& [j, b] : a.neighbors) {
        has_triple |= (b == Bond::Triple);
        has_double |= (b == Bond::Double);
        arom_nb |= g.is_aromatic_atom(j);
    }
    if (has_triple) return 0.01508;                                                     // N9
    if (a.hydrogens == 2) {
        if (a.neighbors.empty()) return -0.4806;                                        // NS (ammonia-ish)
        return g.is_aromatic_atom(a.neighbors[0].first) ? -1.0270 : -1.0190;            // N3 / N1
    }
    if (a.hydrogens == 1) {
        if (has_double) return 0.08387;                                                 // N5
        if (arom_nb) return -0.5188;                                                    // N4
        return -0.7096;                                                                 // N2
    }
    if (has_double) return 0.1836;                                                      // N6
    if (a.neighbors.size() == 3) return arom_nb ? -0.4458 : -0.3187;                    // N8 / N7
    return -0.4806;                                                                     // NS
}

inline double oxygen_logp(const MolecularGraph& g, const AtomView& a) {
    if (a.aromatic) return 0.1552;                                                      // O1
    if (a.hydrogens >= 1) return -0.2893;                                               // O2 hydroxyl
    if (a.neighbors.size() == 2) {
        for (const auto& [j, b] : a.neighbors) {
            (void)b;
            if (g.is_aromatic_atom(j)) return 0.4833;                                   // O4
        }
        return -0.0684;                                                                 // O3
    }
    if (a.neighbors.size() == 1 && a.neighbors[0].second == Bond::Double) {
        const int j = a.neighbors[0].first;
        const Atom e = g.atoms[static_cast<std::size_t>(j)];
        if (e == Atom::N || e == Atom::O) return 0.0335;                                // O5
        if (g.is_aromatic_atom(j)) return 0.1788;                                       // O8
        std::vector<int> other;
        for (int k = 0; k < molgraph::kMaxAtoms; ++k)
            if (k != j && k != a.index && g.bond(j, k) != Bond::None) other.push_back(k);
        if (other.size() == 2 && g.atoms[static_cast<std::size_t>(other[0])] != Atom::C &&
            g.atoms[static_cast<std::size_t>(other[1])] != Atom::C)
            return 0.4833;                                                              // O11
        for (int k : other)
            if (g.is_aromatic_atom(k)) return 0.1129;                                   // O10
        return -0.1526;                                                                 // O9
    }
    return -0.1188;                                                                     // OS
}

inline double hydroxyl_h_logp(const MolecularGraph& g, const AtomView& o) {
    if (o.neighbors.empty()) return 0.1125;                                             // HS (water H)
    const int j = o.neighbors[0].first;
    switch (g.atoms[static_cast<std::size_t>(j)]) {
        case Atom::N: return 0.2142;                                                    // H3
        case Atom::O: return 0.2980;                                                    // H4 peroxide
        case Atom::C: {
            if (g.is_aromatic_atom(j)) return -0.2677;                                  // H2 phenol
            for (int k = 0; k < molgraph::kMaxAtoms; ++k) {
                if (k == o.index || k == j) continue;
                if (g.bond(j, k) == Bond::Double) return 0.2980;                        // H4 acid/enol
                if (g.bond(j, k) == Bond::Triple) return 0.1125;                        // HS
            }
            return -0.2677;                                                             // H2 alcohol
        }
        default: return -0.2677;
    }
}

// ---- Ertl TPSA contributions for N and O ----

inline double tpsa_contrib(const AtomView& a, const std::set<int>& three_ring) {
    int singles = 0, doubles = 0, triples = 0;
    for (const auto& [j, b] : a.neighbors) {
        (void)j;
        if (b == Bond::Single) ++singles;
        else if (b == Bond::Double) ++doubles;
        else if (b == Bond::Triple) ++triples;
    }
    const int deg = static_cast<int>(a.neighbors.size());
    const bool in3 = three_ring.count(a.index) > 0;
    if (a.elem == Atom::N) {
        if (a.aromatic) return 12.89;
        if (deg == 1 && triples == 1) return 23.79;
        if (deg == 2 && doubles == 1 && a.hydrogens == 0) return 12.36;
        if (deg == 1 && doubles == 1 && a.hydrogens == 1) return 23.85;
        if (deg == 3 && a.hydrogens == 0) return in3 ? 3.01 : 3.24;
        if (deg == 2 && a.hydrogens == 1) return in3 ? 21.94 : 12.03;
        if (deg == 1 && a.hydrogens == 2) return 26.02;
        return 3.24;
    }
    if (a.elem == Atom::O) {
        if (a.aromatic) return 13.14;
        if (deg == 1 && doubles == 1) return 17.07;
        if (deg == 1 && a.hydrogens == 1) return 20.23;
        if (deg == 2) return in3 ? 12.53 : 9.23;
        return 9.23;
    }
    return 0.0;
}

// ---- graph complexity (Bertz-style) ----

inline double bertz_complexity(const MolecularGraph& g) {
    const int n = g.heavy_atom_count();
    if (n < 2) return 0.0;
    const auto ranks = molgraph::morgan_ranks(g);
    const auto edges = molgraph::detail::bond_list(g);

    std::map<std::pair<int, std::array<std::pair<int, int>, 2>>, long> conn;
    for (std::size_t a = 0; a < edges.size(); ++a)
        for (std::size_t b = a + 1; b < edges.size(); ++b) {
            const auto [u1, v1] = edges[a];
            const auto [u2, v2] = edges[b];
            int shared = -1;
            if (u1 == u2 || u1 == v2) shared = u1;
            else if (v1 == u2 || v1 == v2) shared = v1;
            if (shared < 0) continue;
            const int far1 = (u1 == shared) ? v1 : u1;
            const int far2 = (u2 == shared) ? v2 : u2;
            std::array<std::pair<int, int>, 2> pair_key = {
                std::make_pair(molgraph::bond_order2(g.bond(shared, far1)), ranks[static_cast<std::size_t>(far1)]),
                std::make_pair(molgraph::bond_order2(g.bond(shared, far2)), ranks[static_cast<std::size_t>(far2)])};
            if (pair_key[1] < pair_key[0]) std::swap(pair_key[0], pair_key[1]);
            ++conn[{ranks[static_cast<std::size_t>(shared)], pair_key}];
        }
    long total = 0;
    for (const auto& [k, c] : conn) total += c;
    double c_bonds = 0.0;
    if (total > 0) {
        c_bonds = 2.0 * static_cast<double>(total) * std::log2(static_cast<double>(total));
        for (const auto& [k, c] : conn) c_bonds -= static_cast<double>(c) * std::log2(static_cast<double>(c));
    }
    std::array<int, 4> elem_counts{};
    for (int i = 0; i < molgraph::kMaxAtoms; ++i)
        if (g.atoms[static_cast<std::size_t>(i)] != Atom::Pad) ++elem_counts[static_cast<std::size_t>(g.atoms[static_cast<std::size_t>(i)])];
    double c_elem = n * std::log2(static_cast<double>(n));
    for (int c : elem_counts)
        if (c > 0) c_elem -= c * std::log2(static_cast<double>(c));
    return c_bonds + c_elem;
}

}  // namespace detail

inline double mol_weight(const MolecularGraph& g) {
    double w = 0.0;
    for (int i = 0; i < molgraph::kMaxAtoms; ++i) {
        const Atom a = g.atoms[static_cast<std::size_t>(i)];
        if (a == Atom::Pad) continue;
        w += detail::atomic_mass(a) + g.implicit_hydrogens(i) * detail::kHydrogenMass;
    }
    return w;
}

inline double crippen_logp(const MolecularGraph& g) {
    double total = 0.0;
    for (const auto& a : detail::atom_views(g)) {
        switch (a.elem) {
            case Atom::C:
                total += detail::carbon_logp(g, a) + a.hydrogens * 0.1230;  // H1
                break;
            case Atom::N:
                total += detail::nitrogen_logp(g, a) + a.hydrogens * 0.2142;  // H3
                break;
            case Atom::O:
                total += detail::oxygen_logp(g, a) + a.hydrogens * detail::hydroxyl_h_logp(g, a);
                break;
            case Atom::F: total += 0.4202; break;
            default: break;
        }
    }
    return total;
}

inline DescriptorVector descriptors(const MolecularGraph& g) {
    if (!molgraph::is_valid(g)) throw ValidityError("descriptors require a valid graph");
    DescriptorVector d;
    const RingInfo ri = molgraph::ring_info(g);
    std::set<int> three_ring;
    for (const auto& ring : ri.rings)
        if (ring.size() == 3) three_ring.insert(ring.begin(), ring.end());

    d.mol_wt = mol_weight(g);
    d.mol_logp = crippen_logp(g);
    d.bertz_ct = detail::bertz_complexity(g);
    d.num_aromatic_rings = ri.aromatic_rings;
    d.num_aliphatic_rings = ri.aliphatic_rings;
    for (const auto& a : detail::atom_views(g)) {
        if (a.elem == Atom::N || a.elem == Atom::O) {
            ++d.num_h_acceptors;
            if (a.hydrogens > 0) ++d.num_h_donors;
            d.tpsa += detail::tpsa_contrib(a, three_ring);
        }
    }
    for (int i = 0; i < molgraph::kMaxAtoms; ++i)
        for (int j = i + 1; j < molgraph::kMaxAtoms; ++j) {
            if (g.bond(i, j) != Bond::Single || ri.in_ring(i, j)) continue;
            if (g.degree(i) >= 2 && g.degree(j) >= 2) ++d.num_rotatable_bonds;
        }
    return d;
}

// -- QED --------------------------------------------------------------------

namespace detail {

struct AdsParam {
    double a, b, c, d, e, f, dmax;
};

// published desirability parameters, order: MW ALOGP HBA HBD PSA ROTB AROM ALERTS
inline constexpr std::array<AdsParam, 8> kAdsParams = {{
    {2.817065973, 392.5754953, 290.7489764, 2.419764353, 49.22325677, 65.37051707, 104.9805561},
    {3.172690585, 137.8624751, 2.534937431, 4.581497897, 0.822739154, 0.576295591, 131.3186604},
    {2.948620388, 160.4605972, 3.615294657, 4.435986202, 0.290141953, 1.300669958, 148.7763046},
    {1.618662227, 1010.051101, 0.985094388, 0.000000001, 0.713820843, 0.920922555, 258.1632616},
    {1.876861559, 125.2232657, 62.90773554, 87.83366614, 12.01999824, 28.51324732, 104.5686167},
    {0.010000000, 272.4121427, 2.558379970, 1.565547684, 1.271567166, 2.758063707, 105.4420403},
    {3.217788970, 957.7374108, 2.274627939, 0.000000001, 1.317690384, 0.375760881, 312.3372610},
    {0.010000000, 1199.094025, -0.09002883, 0.000000001, 0.185904477, 0.875193782, 417.7253140},
}};

inline constexpr std::array<double, 8> kQedWeights = {0.66, 0.46, 0.05, 0.61, 0.06, 0.65, 0.48, 0.95};

inline double ads(double x, const AdsParam& p) {
    const double exp1 = 1.0 + std::exp(-(x - p.c + p.d / 2) / p.e);
    const double exp2 = 1.0 + std::exp(-(x - p.c - p.d / 2) / p.f);
    return (p.a + p.b / exp1 * (1.0 - 1.0 / exp2)) / p.dmax;
}

}  // namespace detail

// Weighted geometric mean of desirabilities. The structural-alert count is
// fixed at zero: the C/N/O/F subset realizes none of the published alert
// patterns that require other elements or charges.
inline double qed(const MolecularGraph& g) {
    const DescriptorVector d = descriptors(g);
    const std::array<double, 8> props = {d.mol_wt,
                                         d.mol_logp,
                                         static_cast<double>(d.num_h_acceptors),
                                         static_cast<double>(d.num_h_donors),
                                         d.tpsa,
                                         static_cast<double>(d.num_rotatable_bonds),
                                         static_cast<double>(d.num_aromatic_rings),
                                         0.0};
    double t = 0.0, wsum = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
        t += detail::kQedWeights[k] * std::log(detail::ads(props[k], detail::kAdsParams[k]));
        wsum += detail::kQedWeights[k];
    }
    return std::exp(t / wsum);
}

// -- normalized solubility ------------------------------------------------------

constexpr double kLogpMin = -2.12;
constexpr double kLogpMax = 6.04;

inline double solubility_norm(const MolecularGraph& g) {
    const double lp = crippen_logp(g);  // validity enforced below
    if (!molgraph::is_valid(g)) throw ValidityError("solubility_norm requires a valid graph");
    return std::clamp((lp - kLogpMin) / (kLogpMax - kLogpMin), 0.0, 1.0);
}

// -- synthetic accessibility ---------------------------------------------------

// Fragment-frequency model estimated from a molecule corpus.
struct SaModel {
    std::unordered_map<std::uint64_t, long> freq;
    long ref_count = 0;  // frequency at the 80th percentile of distinct fragments

    static SaModel none() { return SaModel{}; }

    static SaModel from_corpus(std::span<const MolecularGraph> corpus) {
        SaModel m;
        for (const auto& g : corpus)
            for (std::uint64_t id : molgraph::fragment_ids(g)) ++m.freq[id];
        if (!m.freq.empty()) {
            std::vector<long> counts;
            counts.reserve(m.freq.size());
            for (const auto& [id, c] : m.freq) counts.push_back(c);
            std::sort(counts.begin(), counts.end());
            m.ref_count = counts[static_cast<std::size_t>(0.8 * static_cast<double>(counts.size() - 1))];
        }
        return m;
    }
};

inline double sa_raw(const MolecularGraph& g, const SaModel& model) {
    if (!molgraph::is_valid(g)) throw ValidityError("sa score requires a valid graph");
    const auto frags = molgraph::fragment_ids(g);

    double score1 = -4.0;
    if (model.ref_count > 0) {
        double s = 0.0;
        for (std::uint64_t id : frags) {
            const auto it = model.freq.find(id);
            const double c = it == model.freq.end() ? 0.1 : static_cast<double>(it->second);
            s += std::clamp(std::log10(c / static_cast<double>(model.ref_count)), -4.0, 4.0);
        }
        score1 = s / static_cast<double>(frags.size());
    }

    const int n = g.heavy_atom_count();
    const RingInfo ri = molgraph::ring_info(g);
    int n_spiro = 0, n_bridge = 0;
    {
        std::set<int> spiro, bridge;
        for (std::size_t i = 0; i < ri.rings.size(); ++i)
            for (std::size_t j = i + 1; j < ri.rings.size(); ++j) {
                std::set<int> a(ri.rings[i].begin(), ri.rings[i].end());
                std::set<int> b(ri.rings[j].begin(), ri.rings[j].end());
                std::vector<int> shared;
                std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
                if (shared.size() == 1) spiro.insert(shared[0]);
                else if (shared.size() >= 3) {
                    for (int at : shared) {
                        int ring_deg = 0;
                        for (int y = 0; y < molgraph::kMaxAtoms; ++y)
                            if (y != at && g.bond(at, y) != Bond::None && ri.in_ring(at, y)) ++ring_deg;
                        if (ring_deg >= 3) bridge.insert(at);
                    }
                }
            }
        n_spiro = static_cast<int>(spiro.size());
        n_bridge = static_cast<int>(bridge.size());
    }
    const double size_penalty = std::pow(n, 1.005) - n;
    const double ring_penalty = std::log10(static_cast<double>(ri.rings.size()) + 1.0);
    double macro_penalty = 0.0;
    for (const auto& ring : ri.rings)
        if (ring.size() > 8) macro_penalty = std::log10(2.0);
    const double spiro_penalty = std::log10(n_spiro + 1.0);
    const double bridge_penalty = std::log10(n_bridge + 1.0);
    const double score2 = -(size_penalty + ring_penalty + macro_penalty + spiro_penalty + bridge_penalty);

    std::set<std::uint64_t> distinct(frags.begin(), frags.end());
    const double score3 =
        n > static_cast<int>(distinct.size()) ? 0.5 * std::log(static_cast<double>(n) / static_cast<double>(distinct.size())) : 0.0;

    const double raw = score1 + score2 + score3;
    const double lo = -4.0, hi = 2.5;
    double sascore = 11.0 - (raw - lo + 1.0) / (hi - lo) * 9.0;
    if (sascore > 8.0) sascore = 8.0 + std::log(sascore + 1.0 - 9.0);
    return std::clamp(sascore, 1.0, 10.0);
}

// Inverted normalization of the raw 1..10 scale; higher means easier.
inline double sa_norm(const MolecularGraph& g, const SaModel& model) {
    return std::clamp((5.0 - sa_raw(g, model)) / 3.5, 0.0, 1.0);
}

inline double sa_norm(const MolecularGraph& g) { return sa_norm(g, SaModel::none()); }

// -- KL benchmark score -----------------------------------------------------------

constexpr double kKlSmoothing = 1e-8;
constexpr int kKlContinuousBins = 50;

inline double kl_from_counts(std::span<const double> ref_counts, std::span<const double> gen_counts,
                             double eps = kKlSmoothing) {
    if (ref_counts.size() != gen_counts.size()) throw ShapeError("histogram size mismatch");
    double rs = 0, gs = 0;
    for (std::size_t i = 0; i < ref_counts.size(); ++i) {
        rs += ref_counts[i] + eps;
        gs += gen_counts[i] + eps;
    }
    double d = 0.0;
    for (std::size_t i = 0; i < ref_counts.size(); ++i) {
        const double p = (ref_counts[i] + eps) / rs;
        const double q = (gen_counts[i] + eps) / gs;
        d += p * std::log(p / q);
    }
    return d;
}

struct DescriptorHistogram {
    std::vector<double> bin_low, bin_high;
    std::vector<double> ref_density, gen_density;
    double kl = 0.0;
};

namespace detail {

inline DescriptorHistogram histogram_for(std::vector<double> ref, std::vector<double> gen,
                                         bool integer_valued) {
    DescriptorHistogram h;
    std::vector<double> ref_counts, gen_counts;
    if (integer_valued) {
        long lo = std::numeric_limits<long>::max(), hi = std::numeric_limits<long>::min();
        for (double v : ref) {
            lo = std::min(lo, std::lround(v));
            hi = std::max(hi, std::lround(v));
        }
        for (double v : gen) {
            lo = std::min(lo, std::lround(v));
            hi = std::max(hi, std::lround(v));
        }
        const std::size_t nb = static_cast<std::size_t>(hi - lo + 1);
        ref_counts.assign(nb, 0.0);
        gen_counts.assign(nb, 0.0);
        for (double v : ref) ++ref_counts[static_cast<std::size_t>(std::lround(v) - lo)];
        for (double v : gen) ++gen_counts[static_cast<std::size_t>(std::lround(v) - lo)];
        for (long b = lo; b <= hi; ++b) {
            h.bin_low.push_back(static_cast<double>(b) - 0.5);
            h.bin_high.push_back(static_cast<double>(b) + 0.5);
        }
    } else {
        // 50 bins spanning the reference range widened by 5 percent
        double rmin = ref[0], rmax = ref[0];
        for (double v : ref) {
            rmin = std::min(rmin, v);
            rmax = std::max(rmax, v);
        }
        double range = rmax - rmin;
        if (range <= 0) range = std::max(1.0, std::abs(rmin));
        const double lo = rmin - 0.05 * range, hi = rmax + 0.05 * range;
        const double width = (hi - lo) / kKlContinuousBins;
        ref_counts.assign(kKlContinuousBins, 0.0);
        gen_counts.assign(kKlContinuousBins, 0.0);
        auto bin_of = [&](double v) {
            const long b = static_cast<long>((v - lo) / width);
            return static_cast<std::size_t>(std::clamp<long>(b, 0, kKlContinuousBins - 1));
        };
        for (double v : ref) ++ref_counts[bin_of(v)];
        for (double v : gen) ++gen_counts[bin_of(v)];
        for (int b = 0; b < kKlContinuousBins; ++b) {
            h.bin_low.push_back(lo + b * width);
            h.bin_high.push_back(lo + (b + 1) * width);
        }
    }
    h.kl = kl_from_counts(ref_counts, gen_counts);
    double rs = 0, gs = 0;
    for (double c : ref_counts) rs += c;
    for (double c : gen_counts) gs += c;
    for (std::size_t b = 0; b < ref_counts.size(); ++b) {
        h.ref_density.push_back(rs > 0 ? ref_counts[b] / rs : 0.0);
        h.gen_density.push_back(gs > 0 ? gen_counts[b] / gs : 0.0);
    }
    return h;
}

}  // namespace detail

struct KlReport {
    std::array<double, kNumDescriptors> per_descriptor_kl{};
    std::array<DescriptorHistogram, kNumDescriptors> histograms;
    double score = 0.0;  // mean of exp(-KL)
};

// S = (1/9) sum_i exp(-D_KL,i) with D_KL(reference || generated) per
// descriptor; smoothed histograms as the density estimator.
inline KlReport kl_report(std::span<const std::array<double, kNumDescriptors>> generated,
                          std::span<const std::array<double, kNumDescriptors>> reference) {
    if (generated.empty() || reference.empty()) throw ArityError("kl_score: empty descriptor set");
    KlReport rep;
    double s = 0.0;
    for (int d = 0; d < kNumDescriptors; ++d) {
        std::vector<double> gen, ref;
        gen.reserve(generated.size());
        ref.reserve(reference.size());
        for (const auto& row : generated) gen.push_back(row[static_cast<std::size_t>(d)]);
        for (const auto& row : reference) ref.push_back(row[static_cast<std::size_t>(d)]);
        rep.histograms[static_cast<std::size_t>(d)] =
            detail::histogram_for(std::move(ref), std::move(gen), kDescriptorIsInteger[static_cast<std::size_t>(d)]);
        rep.per_descriptor_kl[static_cast<std::size_t>(d)] = rep.histograms[static_cast<std::size_t>(d)].kl;
        s += std::exp(-rep.per_descriptor_kl[static_cast<std::size_t>(d)]);
    }
    rep.score = s / kNumDescriptors;
    return rep;
}

inline double kl_score(std::span<const std::array<double, kNumDescriptors>> generated,
                       std::span<const std::array<double, kNumDescriptors>> reference) {
    return kl_report(generated, reference).score;
}

// -- Mann-Whitney U test -----------------------------------------------------------

// Two-sided p-value, normal approximation with tie correction.
inline double stat_test(std::span<const double> sample_a, std::span<const double> sample_b) {
    const std::size_t n1 = sample_a.size(), n2 = sample_b.size();
    if (n1 < 2 || n2 < 2) throw UndefinedTestError("both samples need at least 2 elements");
    struct Tagged {
        double v;
        int group;
    };
    std::vector<Tagged> all;
    all.reserve(n1 + n2);
    for (double v : sample_a) all.push_back({v, 0});
    for (double v : sample_b) all.push_back({v, 1});
    std::sort(all.begin(), all.end(), [](const Tagged& x, const Tagged& y) { return x.v < y.v; });

    const double n = static_cast<double>(n1 + n2);
    double r1 = 0.0;
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].v == all[i].v) ++j;
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        const double t = static_cast<double>(j - i);
        if (t > 1) tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k)
            if (all[k].group == 0) r1 += mid_rank;
        i = j;
    }
    const double u1 = r1 - static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
    const double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
    const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                       ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) return u1 == mu ? 1.0 : 0.0;
    const double z = (u1 - mu) / std::sqrt(var);
    return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

}  // namespace qmol::chem
