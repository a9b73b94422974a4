#pragma once

// Molecular-graph data model for QM9-scale molecules: 9 atom slots over
// {C,N,O,F,PAD} and a symmetric 9x9 bond matrix over five bond classes,
// with logits decoding, validity checking, the 450-element flattening,
// ring perception, and circular fingerprints.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <vector>

#include "qmol/common.hpp"

namespace qmol::molgraph {

constexpr int kMaxAtoms = 9;
constexpr int kAtomClasses = 5;
constexpr int kBondClasses = 5;
constexpr int kFlatLen = kMaxAtoms * kAtomClasses + kMaxAtoms * kMaxAtoms * kBondClasses;  // 450

enum class Atom : std::uint8_t { C = 0, N, O, F, Pad };
enum class Bond : std::uint8_t { None = 0, Single, Double, Triple, Aromatic };

inline int valence_of(Atom a) {
    switch (a) {
        case Atom::C: return 4;
        case Atom::N: return 3;
        case Atom::O: return 2;
        case Atom::F: return 1;
        default: return 0;
    }
}

// twice the bond order, so aromatic (1.5) stays integral
inline int bond_order2(Bond b) {
    switch (b) {
        case Bond::Single: return 2;
        case Bond::Double: return 4;
        case Bond::Triple: return 6;
        case Bond::Aromatic: return 3;
        default: return 0;
    }
}

inline char element_symbol(Atom a) {
    switch (a) {
        case Atom::C: return 'C';
        case Atom::N: return 'N';
        case Atom::O: return 'O';
        case Atom::F: return 'F';
        default: return '*';
    }
}

struct MolecularGraph {
    std::array<Atom, kMaxAtoms> atoms{};
    std::array<std::array<Bond, kMaxAtoms>, kMaxAtoms> bonds{};

    MolecularGraph() {
        atoms.fill(Atom::Pad);
        for (auto& row : bonds) row.fill(Bond::None);
    }

    Bond bond(int i, int j) const { return bonds[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }

    void set_bond(int i, int j, Bond b) {
        bonds[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = b;
        bonds[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = b;
    }

    int heavy_atom_count() const {
        int n = 0;
        for (Atom a : atoms)
            if (a != Atom::Pad) ++n;
        return n;
    }

    int degree(int i) const {
        int d = 0;
        for (int j = 0; j < kMaxAtoms; ++j)
            if (j != i && bond(i, j) != Bond::None) ++d;
        return d;
    }

    int order2_sum(int i) const {
        int s = 0;
        for (int j = 0; j < kMaxAtoms; ++j)
            if (j != i) s += bond_order2(bond(i, j));
        return s;
    }

    // remaining valence filled with hydrogens; meaningful for valid graphs
    int implicit_hydrogens(int i) const {
        const int used = (order2_sum(i) + 1) / 2;
        return std::max(0, valence_of(atoms[static_cast<std::size_t>(i)]) - used);
    }

    bool is_aromatic_atom(int i) const {
        for (int j = 0; j < kMaxAtoms; ++j)
            if (j != i && bond(i, j) == Bond::Aromatic) return true;
        return false;
    }

    bool operator==(const MolecularGraph& o) const = default;
};

// bonds symmetric, empty diagonal, nothing incident to a PAD slot
inline bool well_formed(const MolecularGraph& g) {
    for (int i = 0; i < kMaxAtoms; ++i) {
        if (g.bond(i, i) != Bond::None) return false;
        for (int j = 0; j < kMaxAtoms; ++j) {
            if (g.bond(i, j) != g.bond(j, i)) return false;
            if (g.bond(i, j) != Bond::None &&
                (g.atoms[static_cast<std::size_t>(i)] == Atom::Pad || g.atoms[static_cast<std::size_t>(j)] == Atom::Pad))
                return false;
        }
    }
    return true;
}

inline MolecularGraph permuted(const MolecularGraph& g, const std::array<int, kMaxAtoms>& perm) {
    MolecularGraph out;
    for (int i = 0; i < kMaxAtoms; ++i) out.atoms[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = g.atoms[static_cast<std::size_t>(i)];
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = 0; j < kMaxAtoms; ++j)
            out.bonds[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])][static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = g.bond(i, j);
    return out;
}

// -- ring perception ---------------------------------------------------------

struct RingInfo {
    std::vector<std::vector<int>> rings;          // atom cycles, one per SSSR ring
    std::set<std::pair<int, int>> ring_bonds;     // (i<j) pairs
    int aromatic_rings = 0;
    int aliphatic_rings = 0;

    bool in_ring(int i, int j) const {
        return ring_bonds.count({std::min(i, j), std::max(i, j)}) > 0;
    }
};

namespace detail {

inline std::vector<std::pair<int, int>> bond_list(const MolecularGraph& g) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = i + 1; j < kMaxAtoms; ++j)
            if (g.bond(i, j) != Bond::None) edges.emplace_back(i, j);
    return edges;
}

inline int component_count(const MolecularGraph& g) {
    std::array<bool, kMaxAtoms> seen{};
    int comps = 0;
    for (int s = 0; s < kMaxAtoms; ++s) {
        if (g.atoms[static_cast<std::size_t>(s)] == Atom::Pad || seen[static_cast<std::size_t>(s)]) continue;
        ++comps;
        std::vector<int> stack{s};
        while (!stack.empty()) {
            const int x = stack.back();
            stack.pop_back();
            if (seen[static_cast<std::size_t>(x)]) continue;
            seen[static_cast<std::size_t>(x)] = true;
            for (int y = 0; y < kMaxAtoms; ++y)
                if (y != x && g.bond(x, y) != Bond::None && !seen[static_cast<std::size_t>(y)]) stack.push_back(y);
        }
    }
    return comps;
}

// shortest path src..dst avoiding one edge; empty if none
inline std::vector<int> path_avoiding(const MolecularGraph& g, int src, int dst, int bu, int bv) {
    std::array<int, kMaxAtoms> prev;
    prev.fill(-2);
    prev[static_cast<std::size_t>(src)] = -1;
    std::vector<int> queue{src};
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const int x = queue[qi];
        if (x == dst) break;
        for (int y = 0; y < kMaxAtoms; ++y) {
            if (y == x || g.bond(x, y) == Bond::None) continue;
            if ((x == bu && y == bv) || (x == bv && y == bu)) continue;
            if (prev[static_cast<std::size_t>(y)] == -2) {
                prev[static_cast<std::size_t>(y)] = x;
                queue.push_back(y);
            }
        }
    }
    if (prev[static_cast<std::size_t>(dst)] == -2) return {};
    std::vector<int> path;
    for (int x = dst; x != -1; x = prev[static_cast<std::size_t>(x)]) path.push_back(x);
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace detail

// Smallest set of smallest rings: shortest cycle through every bond, kept
// greedily while linearly independent over GF(2) on the edge set.
inline RingInfo ring_info(const MolecularGraph& g) {
    RingInfo info;
    const auto edges = detail::bond_list(g);
    const int n_rings = static_cast<int>(edges.size()) - g.heavy_atom_count() + detail::component_count(g);
    if (n_rings <= 0) return info;

    std::vector<std::pair<std::size_t, std::vector<int>>> candidates;  // (size, cycle atoms)
    for (const auto& [u, v] : edges) {
        auto path = detail::path_avoiding(g, u, v, u, v);
        if (!path.empty()) candidates.emplace_back(path.size(), std::move(path));
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) { return a.first != b.first ? a.first < b.first : a.second < b.second; });

    auto edge_index = [&edges](int a, int b) {
        const auto key = std::make_pair(std::min(a, b), std::max(a, b));
        return static_cast<std::size_t>(std::find(edges.begin(), edges.end(), key) - edges.begin());
    };
    std::vector<std::uint64_t> basis;
    for (const auto& [sz, cyc] : candidates) {
        (void)sz;
        std::uint64_t vec = 0;
        for (std::size_t k = 0; k < cyc.size(); ++k)
            vec |= std::uint64_t{1} << edge_index(cyc[k], cyc[(k + 1) % cyc.size()]);
        std::uint64_t red = vec;
        for (std::uint64_t b : basis) red = std::min(red, red ^ b);
        if (!red) continue;
        basis.push_back(red);
        std::sort(basis.rbegin(), basis.rend());
        info.rings.push_back(cyc);
        bool all_aromatic = true;
        for (std::size_t k = 0; k < cyc.size(); ++k) {
            const int a = cyc[k], b = cyc[(k + 1) % cyc.size()];
            info.ring_bonds.insert({std::min(a, b), std::max(a, b)});
            if (g.bond(a, b) != Bond::Aromatic) all_aromatic = false;
        }
        if (all_aromatic) ++info.aromatic_rings;
        else ++info.aliphatic_rings;
        if (static_cast<int>(info.rings.size()) == n_rings) break;
    }
    return info;
}

// -- validity ------------------------------------------------------------------

namespace detail {

// Perfect matching on the "needs a double bond" atoms of the aromatic
// subsystem; plain backtracking is fine at <= 9 vertices.
inline bool kekulizable(const MolecularGraph& g) {
    std::vector<int> arom;
    for (int i = 0; i < kMaxAtoms; ++i)
        if (g.is_aromatic_atom(i)) arom.push_back(i);
    if (arom.empty()) return true;

    // every aromatic bond must lie in a cycle of the aromatic subgraph
    MolecularGraph sub;
    sub.atoms = g.atoms;
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = i + 1; j < kMaxAtoms; ++j)
            if (g.bond(i, j) == Bond::Aromatic) sub.set_bond(i, j, Bond::Aromatic);
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = i + 1; j < kMaxAtoms; ++j)
            if (sub.bond(i, j) == Bond::Aromatic && path_avoiding(sub, i, j, i, j).empty()) return false;

    // C and N contribute one double bond each; aromatic O never does (and
    // already fails the valence rule)
    std::vector<int> need;
    for (int i : arom) {
        const Atom a = g.atoms[static_cast<std::size_t>(i)];
        if (a == Atom::C || a == Atom::N) need.push_back(i);
        else return false;
    }
    if (need.size() % 2 != 0) return false;

    std::array<bool, kMaxAtoms> matched{};
    std::function<bool(std::size_t)> solve = [&](std::size_t from) -> bool {
        std::size_t i = from;
        while (i < need.size() && matched[static_cast<std::size_t>(need[i])]) ++i;
        if (i == need.size()) return true;
        const int u = need[i];
        matched[static_cast<std::size_t>(u)] = true;
        for (std::size_t jj = i + 1; jj < need.size(); ++jj) {
            const int v = need[jj];
            if (matched[static_cast<std::size_t>(v)] || g.bond(u, v) != Bond::Aromatic) continue;
            matched[static_cast<std::size_t>(v)] = true;
            if (solve(i + 1)) return true;
            matched[static_cast<std::size_t>(v)] = false;
        }
        matched[static_cast<std::size_t>(u)] = false;
        return false;
    };
    return solve(0);
}

}  // namespace detail

// Valid iff: at least one heavy atom, the heavy atoms form one connected
// component, no atom exceeds its valence (aromatic counts 1.5), and aromatic
// bonds sit in kekulizable rings. Total function, never throws.
inline bool is_valid(const MolecularGraph& g) {
    if (!well_formed(g)) return false;
    if (g.heavy_atom_count() < 1) return false;
    if (detail::component_count(g) != 1) return false;
    for (int i = 0; i < kMaxAtoms; ++i) {
        const Atom a = g.atoms[static_cast<std::size_t>(i)];
        if (a == Atom::Pad) continue;
        if (g.order2_sum(i) > 2 * valence_of(a)) return false;
    }
    return detail::kekulizable(g);
}

// -- logits and decoding -------------------------------------------------------

struct GraphLogits {
    std::array<std::array<double, kAtomClasses>, kMaxAtoms> atom{};
    std::array<std::array<std::array<double, kBondClasses>, kMaxAtoms>, kMaxAtoms> bond{};

    void symmetrize() {
        for (int i = 0; i < kMaxAtoms; ++i)
            for (int j = i + 1; j < kMaxAtoms; ++j)
                for (int c = 0; c < kBondClasses; ++c) {
                    const double m = 0.5 * (bond[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] +
                                            bond[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]);
                    bond[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] = m;
                    bond[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = m;
                }
    }

    bool all_finite() const {
        for (const auto& row : atom)
            for (double v : row)
                if (!std::isfinite(v)) return false;
        for (const auto& plane : bond)
            for (const auto& row : plane)
                for (double v : row)
                    if (!std::isfinite(v)) return false;
        return true;
    }
};

// Relaxed one-hot tensors from straight-through Gumbel decoding.
struct RelaxedGraph {
    std::array<std::array<double, kAtomClasses>, kMaxAtoms> atom{};
    std::array<std::array<std::array<double, kBondClasses>, kMaxAtoms>, kMaxAtoms> bond{};
};

enum class DecodeMode { Argmax, Sample, GumbelST };

struct DecodeResult {
    MolecularGraph graph;
    RelaxedGraph relaxed;   // populated for GumbelST only
    bool has_relaxed = false;
};

namespace detail {

inline int argmax5(std::span<const double> v) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(v.size()); ++c)
        if (v[static_cast<std::size_t>(c)] > v[static_cast<std::size_t>(best)]) best = c;
    return best;
}

inline void softmax_inplace(std::span<double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double s = 0.0;
    for (auto& x : v) {
        x = std::exp(x - mx);
        s += x;
    }
    for (auto& x : v) x /= s;
}

inline int sample_cat(std::span<const double> probs, Rng& rng) {
    const double r = rng.uniform();
    double c = 0.0;
    for (int k = 0; k < static_cast<int>(probs.size()); ++k) {
        c += probs[static_cast<std::size_t>(k)];
        if (r < c) return k;
    }
    return static_cast<int>(probs.size()) - 1;
}

inline double gumbel(Rng& rng) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    return -std::log(-std::log(u));
}

}  // namespace detail

inline DecodeResult decode_graph(const GraphLogits& logits_in, DecodeMode mode, double temperature,
                                 std::uint64_t seed) {
    if (!logits_in.all_finite()) throw NumericError("non-finite graph logits");
    if (mode == DecodeMode::GumbelST && temperature <= 0.0)
        throw ConfigError("gumbel_st needs temperature > 0");
    GraphLogits logits = logits_in;
    logits.symmetrize();

    DecodeResult res;
    Rng rng(seed);

    auto pick = [&](std::span<double> slot, std::span<double> relaxed_out) -> int {
        if (mode == DecodeMode::Argmax) return detail::argmax5(slot);
        if (mode == DecodeMode::Sample) {
            for (auto& x : slot) x /= std::max(temperature, 1e-12);
            detail::softmax_inplace(slot);
            return detail::sample_cat(slot, rng);
        }
        // noise anneals with temperature: T=1 is a plain Gumbel sample,
        // T->0 recovers the argmax of the raw logits
        for (auto& x : slot) x = x / temperature + detail::gumbel(rng);
        detail::softmax_inplace(slot);
        std::copy(slot.begin(), slot.end(), relaxed_out.begin());
        return detail::argmax5(slot);
    };

    std::array<double, kAtomClasses> buf_a;
    std::array<double, kBondClasses> buf_b;
    std::array<double, kAtomClasses> relaxed_a;
    std::array<double, kBondClasses> relaxed_b;
    for (int i = 0; i < kMaxAtoms; ++i) {
        buf_a = logits.atom[static_cast<std::size_t>(i)];
        const int c = pick(buf_a, relaxed_a);
        res.graph.atoms[static_cast<std::size_t>(i)] = static_cast<Atom>(c);
        if (mode == DecodeMode::GumbelST) res.relaxed.atom[static_cast<std::size_t>(i)] = relaxed_a;
    }
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = i + 1; j < kMaxAtoms; ++j) {
            buf_b = logits.bond[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const int c = pick(buf_b, relaxed_b);
            res.graph.set_bond(i, j, static_cast<Bond>(c));
            if (mode == DecodeMode::GumbelST) {
                res.relaxed.bond[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = relaxed_b;
                res.relaxed.bond[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = relaxed_b;
            }
        }

    // bonds touching PAD slots are forced off, in both hard and relaxed form
    std::array<double, kBondClasses> none_hot{};
    none_hot[0] = 1.0;
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = 0; j < kMaxAtoms; ++j) {
            if (i == j) continue;
            if (res.graph.atoms[static_cast<std::size_t>(i)] == Atom::Pad || res.graph.atoms[static_cast<std::size_t>(j)] == Atom::Pad) {
                if (i < j) res.graph.set_bond(i, j, Bond::None);
                if (mode == DecodeMode::GumbelST) {
                    res.relaxed.bond[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = none_hot;
                    res.relaxed.bond[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = none_hot;
                }
            }
        }
    res.has_relaxed = (mode == DecodeMode::GumbelST);
    return res;
}

// -- 450-element flattening -------------------------------------------------

// Layout: 9x5 atom one-hots (45), then 9x9x5 bond one-hots row-major (405).
inline std::array<double, kFlatLen> flatten(const MolecularGraph& g) {
    std::array<double, kFlatLen> v{};
    for (int i = 0; i < kMaxAtoms; ++i)
        v[static_cast<std::size_t>(i * kAtomClasses + static_cast<int>(g.atoms[static_cast<std::size_t>(i)]))] = 1.0;
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = 0; j < kMaxAtoms; ++j) {
            const int c = (i == j) ? 0 : static_cast<int>(g.bond(i, j));
            v[static_cast<std::size_t>(45 + (i * kMaxAtoms + j) * kBondClasses + c)] = 1.0;
        }
    return v;
}

inline std::array<double, kFlatLen> flatten(const RelaxedGraph& r) {
    std::array<double, kFlatLen> v{};
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int c = 0; c < kAtomClasses; ++c)
            v[static_cast<std::size_t>(i * kAtomClasses + c)] = r.atom[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = 0; j < kMaxAtoms; ++j)
            for (int c = 0; c < kBondClasses; ++c) {
                double x = (i == j) ? (c == 0 ? 1.0 : 0.0) : r.bond[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
                v[static_cast<std::size_t>(45 + (i * kMaxAtoms + j) * kBondClasses + c)] = x;
            }
    return v;
}

inline MolecularGraph unflatten(std::span<const double> v) {
    if (v.size() != kFlatLen) throw ShapeError("flatten vector must have length 450");
    MolecularGraph g;
    for (int i = 0; i < kMaxAtoms; ++i)
        g.atoms[static_cast<std::size_t>(i)] = static_cast<Atom>(detail::argmax5(v.subspan(static_cast<std::size_t>(i * kAtomClasses), kAtomClasses)));
    for (int i = 0; i < kMaxAtoms; ++i)
        for (int j = i + 1; j < kMaxAtoms; ++j) {
            const int cij = detail::argmax5(v.subspan(static_cast<std::size_t>(45 + (i * kMaxAtoms + j) * kBondClasses), kBondClasses));
            if (g.atoms[static_cast<std::size_t>(i)] != Atom::Pad && g.atoms[static_cast<std::size_t>(j)] != Atom::Pad)
                g.set_bond(i, j, static_cast<Bond>(cij));
        }
    return g;
}

// -- canonical ranks (Morgan refinement) ----------------------------------------

// Refined symmetry classes; label-free, shared by the SMILES writer, the
// fingerprint, and the complexity descriptor.
inline std::vector<int> morgan_ranks(const MolecularGraph& g) {
    std::vector<int> idx;  // heavy atoms
    for (int i = 0; i < kMaxAtoms; ++i)
        if (g.atoms[static_cast<std::size_t>(i)] != Atom::Pad) idx.push_back(i);

    std::vector<std::vector<std::int64_t>> keys(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const int i = idx[k];
        keys[k] = {static_cast<int>(g.atoms[static_cast<std::size_t>(i)]), g.degree(i), g.implicit_hydrogens(i),
                   g.order2_sum(i), g.is_aromatic_atom(i) ? 1 : 0};
    }
    auto rank_of = [](const std::vector<std::vector<std::int64_t>>& ks) {
        std::vector<std::vector<std::int64_t>> sorted = ks;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        std::vector<int> r(ks.size());
        for (std::size_t k = 0; k < ks.size(); ++k)
            r[k] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), ks[k]) - sorted.begin());
        return r;
    };
    std::vector<int> ranks = rank_of(keys);
    for (std::size_t iter = 0; iter < idx.size(); ++iter) {
        std::vector<std::vector<std::int64_t>> next(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const int i = idx[k];
            std::vector<std::pair<int, int>> nb;
            for (std::size_t m = 0; m < idx.size(); ++m) {
                const int j = idx[m];
                if (j != i && g.bond(i, j) != Bond::None)
                    nb.emplace_back(bond_order2(g.bond(i, j)), ranks[m]);
            }
            std::sort(nb.begin(), nb.end());
            next[k] = {ranks[k]};
            for (const auto& [o, r] : nb) {
                next[k].push_back(o);
                next[k].push_back(r);
            }
        }
        std::vector<int> nr = rank_of(next);
        if (nr == ranks) break;
        ranks = nr;
    }
    std::vector<int> full(kMaxAtoms, -1);
    for (std::size_t k = 0; k < idx.size(); ++k) full[static_cast<std::size_t>(idx[k])] = ranks[k];
    return full;
}

// -- circular fingerprints ---------------------------------------------------------

struct Fingerprint {
    std::vector<std::uint64_t> words;
    std::size_t n_bits = 0;

    void set(std::size_t bit) { words[bit / 64] |= std::uint64_t{1} << (bit % 64); }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (auto w : words) n += static_cast<std::size_t>(__builtin_popcountll(w));
        return n;
    }
};

// Environment hash of (atom, radius); identical content gives identical ids
// regardless of atom numbering.
inline std::vector<std::uint64_t> fragment_ids(const MolecularGraph& g, int radius = 2) {
    std::vector<int> idx;
    for (int i = 0; i < kMaxAtoms; ++i)
        if (g.atoms[static_cast<std::size_t>(i)] != Atom::Pad) idx.push_back(i);
    std::vector<std::uint64_t> inv(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const int i = idx[k];
        std::uint64_t h = 0xcbf29ce484222325ULL;
        h = hash_mix(h, static_cast<std::uint64_t>(g.atoms[static_cast<std::size_t>(i)]));
        h = hash_mix(h, static_cast<std::uint64_t>(g.degree(i)));
        h = hash_mix(h, static_cast<std::uint64_t>(g.implicit_hydrogens(i)));
        h = hash_mix(h, static_cast<std::uint64_t>(g.order2_sum(i)));
        h = hash_mix(h, g.is_aromatic_atom(i) ? 1u : 0u);
        inv[k] = h;
    }
    std::vector<std::uint64_t> out = inv;
    for (int r = 1; r <= radius; ++r) {
        std::vector<std::uint64_t> next(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const int i = idx[k];
            std::vector<std::pair<std::uint64_t, std::uint64_t>> nb;
            for (std::size_t m = 0; m < idx.size(); ++m) {
                const int j = idx[m];
                if (j != i && g.bond(i, j) != Bond::None)
                    nb.emplace_back(static_cast<std::uint64_t>(bond_order2(g.bond(i, j))), inv[m]);
            }
            std::sort(nb.begin(), nb.end());
            std::uint64_t h = hash_mix(0x9e3779b97f4a7c15ULL, inv[k]);
            for (const auto& [o, hv] : nb) {
                h = hash_mix(h, o);
                h = hash_mix(h, hv);
            }
            next[k] = h;
        }
        inv = next;
        out.insert(out.end(), next.begin(), next.end());
    }
    return out;
}

inline Fingerprint fingerprint(const MolecularGraph& g, int radius = 2, std::size_t n_bits = 1024) {
    if (!is_valid(g)) throw ValidityError("fingerprint requires a valid graph");
    Fingerprint fp;
    fp.n_bits = n_bits;
    fp.words.assign((n_bits + 63) / 64, 0);
    for (std::uint64_t id : fragment_ids(g, radius)) fp.set(static_cast<std::size_t>(id % n_bits));
    return fp;
}

inline double tanimoto(const Fingerprint& a, const Fingerprint& b) {
    if (a.n_bits != b.n_bits) throw ShapeError("fingerprint length mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t w = 0; w < a.words.size(); ++w) {
        inter += static_cast<std::size_t>(__builtin_popcountll(a.words[w] & b.words[w]));
        uni += static_cast<std::size_t>(__builtin_popcountll(a.words[w] | b.words[w]));
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// -- random valid graphs -------------------------------------------------------

// Seeded generator of random valid molecules: a spanning tree under valence
// budgets, optional extra ring bonds, and occasional bond-order upgrades.
// Used by tests and the bundled sample corpus.
inline MolecularGraph random_valid_graph(Rng& rng, int max_atoms = kMaxAtoms) {
    const int n = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_atoms)));
    MolecularGraph g;
    std::array<int, kMaxAtoms> budget{};
    const Atom palette[] = {Atom::C, Atom::C, Atom::C, Atom::C, Atom::C, Atom::N, Atom::N, Atom::O, Atom::O, Atom::F};
    for (int i = 0; i < n; ++i) {
        const Atom a = palette[rng.uniform_index(10)];
        g.atoms[static_cast<std::size_t>(i)] = a;
        budget[static_cast<std::size_t>(i)] = valence_of(a);
    }
    for (int i = 1; i < n; ++i) {
        std::vector<int> anchors;
        for (int j = 0; j < i; ++j)
            if (budget[static_cast<std::size_t>(j)] >= 1) anchors.push_back(j);
        if (anchors.empty()) {
            g.atoms[static_cast<std::size_t>(i)] = Atom::Pad;  // truncate; tree cannot grow
            for (int k = i + 1; k < n; ++k) g.atoms[static_cast<std::size_t>(k)] = Atom::Pad;
            break;
        }
        const int j = anchors[rng.uniform_index(anchors.size())];
        g.set_bond(i, j, Bond::Single);
        budget[static_cast<std::size_t>(i)] -= 1;
        budget[static_cast<std::size_t>(j)] -= 1;
    }
    // extra ring bonds
    const int extra = static_cast<int>(rng.uniform_index(3));
    for (int t = 0; t < extra; ++t) {
        std::vector<std::pair<int, int>> options;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (g.bond(i, j) == Bond::None && budget[static_cast<std::size_t>(i)] >= 1 && budget[static_cast<std::size_t>(j)] >= 1 &&
                    g.atoms[static_cast<std::size_t>(i)] != Atom::Pad && g.atoms[static_cast<std::size_t>(j)] != Atom::Pad)
                    options.emplace_back(i, j);
        if (options.empty()) break;
        const auto [i, j] = options[rng.uniform_index(options.size())];
        g.set_bond(i, j, Bond::Single);
        budget[static_cast<std::size_t>(i)] -= 1;
        budget[static_cast<std::size_t>(j)] -= 1;
    }
    // upgrade some single bonds to double/triple
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (g.bond(i, j) != Bond::Single) continue;
            if (budget[static_cast<std::size_t>(i)] >= 1 && budget[static_cast<std::size_t>(j)] >= 1 && rng.uniform() < 0.2) {
                const bool triple = budget[static_cast<std::size_t>(i)] >= 2 && budget[static_cast<std::size_t>(j)] >= 2 && rng.uniform() < 0.25;
                g.set_bond(i, j, triple ? Bond::Triple : Bond::Double);
                const int cost = triple ? 2 : 1;
                budget[static_cast<std::size_t>(i)] -= cost;
                budget[static_cast<std::size_t>(j)] -= cost;
            }
        }
    return g;
}

}  // namespace qmol::molgraph
