#pragma once

// SMILES subset: atoms C/N/O/F (aromatic c/n/o), bonds -/=/#, branches and
// ring-closure digits. No brackets, charges, isotopes or stereo markers.
// The writer produces a canonical string: the lexicographic minimum over all
// rank-guided DFS traversals, so isomorphic graphs serialize identically.

#include <map>
#include <optional>
#include <string>

#include "qmol/molgraph.hpp"

namespace qmol::molgraph {

inline MolecularGraph parse_smiles(const std::string& s) {
    MolecularGraph g;
    int n_atoms = 0;
    int prev = -1;
    std::vector<int> stack;
    std::optional<Bond> pending;
    struct RingOpen {
        int atom = -1;
        bool has_bond = false;
        Bond bond = Bond::Single;
    };
    std::map<char, RingOpen> ring;

    std::array<bool, kMaxAtoms> aromatic_flag{};
    auto link = [&](int a, int b, std::optional<Bond> eb, std::size_t pos) {
        if (a == b) throw UnsupportedFeatureError("self bond", pos);
        if (g.bond(a, b) != Bond::None) throw UnsupportedFeatureError("duplicate bond", pos);
        Bond kind = eb ? *eb
                       : (aromatic_flag[static_cast<std::size_t>(a)] && aromatic_flag[static_cast<std::size_t>(b)] ? Bond::Aromatic
                                                                                                                   : Bond::Single);
        g.set_bond(a, b, kind);
    };

    for (std::size_t i = 0; i < s.size(); ++i) {
        const char ch = s[i];
        Atom elem;
        bool arom = false;
        switch (ch) {
            case 'C': elem = Atom::C; break;
            case 'N': elem = Atom::N; break;
            case 'O': elem = Atom::O; break;
            case 'F': elem = Atom::F; break;
            case 'c': elem = Atom::C; arom = true; break;
            case 'n': elem = Atom::N; arom = true; break;
            case 'o': elem = Atom::O; arom = true; break;
            case '-': pending = Bond::Single; continue;
            case '=': pending = Bond::Double; continue;
            case '#': pending = Bond::Triple; continue;
            case '(':
                if (prev < 0) throw UnsupportedFeatureError("branch before any atom", i);
                stack.push_back(prev);
                continue;
            case ')':
                if (stack.empty()) throw UnsupportedFeatureError("unmatched ')'", i);
                prev = stack.back();
                stack.pop_back();
                continue;
            default:
                if (ch >= '0' && ch <= '9') {
                    if (prev < 0) throw UnsupportedFeatureError("ring closure before any atom", i);
                    auto it = ring.find(ch);
                    if (it == ring.end()) {
                        RingOpen open;
                        open.atom = prev;
                        open.has_bond = pending.has_value();
                        if (pending) open.bond = *pending;
                        ring[ch] = open;
                    } else {
                        const RingOpen open = it->second;
                        ring.erase(it);
                        if (open.has_bond && pending && open.bond != *pending)
                            throw UnsupportedFeatureError("conflicting ring bond symbols", i);
                        std::optional<Bond> eb = pending;
                        if (!eb && open.has_bond) eb = open.bond;
                        link(open.atom, prev, eb, i);
                    }
                    pending.reset();
                    continue;
                }
                throw UnsupportedFeatureError(std::string("unsupported token '") + ch + "'", i);
        }
        // atom token
        if (n_atoms >= kMaxAtoms) throw SizeError("more than 9 heavy atoms");
        const int idx = n_atoms++;
        g.atoms[static_cast<std::size_t>(idx)] = elem;
        aromatic_flag[static_cast<std::size_t>(idx)] = arom;
        if (prev >= 0) link(prev, idx, pending, i);
        pending.reset();
        prev = idx;
    }
    if (!ring.empty()) throw UnsupportedFeatureError("unclosed ring bond", s.size());
    if (!stack.empty()) throw UnsupportedFeatureError("unclosed branch", s.size());
    if (pending) throw UnsupportedFeatureError("dangling bond symbol", s.size());
    if (n_atoms == 0) throw UnsupportedFeatureError("no atoms", 0);
    return g;
}

namespace detail {

struct Traversal {
    std::array<bool, kMaxAtoms> visited{};
    std::array<int, kMaxAtoms> visit_pos{};
    std::vector<int> order;
    std::array<std::vector<int>, kMaxAtoms> children;
    std::set<std::pair<int, int>> back_edges;

    struct Frame {
        int atom;
        std::vector<int> nbr_order;
        std::size_t next = 0;
    };
    std::vector<Frame> frames;
};

class CanonicalWriter {
  public:
    explicit CanonicalWriter(const MolecularGraph& g) : g_(g), ranks_(morgan_ranks(g)) {}

    std::string run() {
        for (int s = 0; s < kMaxAtoms; ++s) {
            if (g_.atoms[static_cast<std::size_t>(s)] == Atom::Pad) continue;
            Traversal t;
            visit(t, s, -1);
            expand(std::move(t));
        }
        return best_;
    }

  private:
    const MolecularGraph& g_;
    std::vector<int> ranks_;
    std::string best_;
    long budget_ = 500000;

    void visit(Traversal& t, int v, int parent) {
        t.visited[static_cast<std::size_t>(v)] = true;
        t.visit_pos[static_cast<std::size_t>(v)] = static_cast<int>(t.order.size());
        t.order.push_back(v);
        if (parent >= 0) t.children[static_cast<std::size_t>(parent)].push_back(v);
        t.frames.push_back({v, {}, 0});
        auto& order = t.frames.back().nbr_order;
        for (int w = 0; w < kMaxAtoms; ++w)
            if (w != v && w != parent && g_.bond(v, w) != Bond::None) order.push_back(w);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(v, a) < key(v, b); });
    }

    std::pair<int, int> key(int from, int to) const {
        return {ranks_[static_cast<std::size_t>(to)], bond_order2(g_.bond(from, to))};
    }

    // Runs the traversal machine; forks a copy at every tie between
    // unvisited neighbors so all candidate orderings get rendered.
    void expand(Traversal t) {
        if (--budget_ < 0) throw Error("canonical writer budget exceeded");
        while (!t.frames.empty()) {
            auto& f = t.frames.back();
            if (f.next >= f.nbr_order.size()) {
                t.frames.pop_back();
                continue;
            }
            const int u = f.atom;
            const int v = f.nbr_order[f.next++];
            if (t.visited[static_cast<std::size_t>(v)]) {
                const auto e = std::minmax(u, v);
                t.back_edges.insert({e.first, e.second});
                continue;
            }
            // collect the group of unvisited neighbors tied with v
            std::vector<int> tied{v};
            while (f.next < f.nbr_order.size()) {
                const int w = f.nbr_order[f.next];
                if (t.visited[static_cast<std::size_t>(w)]) {
                    ++f.next;
                    const auto e = std::minmax(u, w);
                    t.back_edges.insert({e.first, e.second});
                    continue;
                }
                if (key(u, w) != key(u, v)) break;
                tied.push_back(w);
                ++f.next;
            }
            if (tied.size() == 1) {
                visit(t, v, u);
                continue;
            }
            // fork on each choice of first element; the rest go back in front
            std::sort(tied.begin(), tied.end());
            for (std::size_t c = 0; c < tied.size(); ++c) {
                Traversal copy = t;
                auto& cf = copy.frames.back();
                std::vector<int> rest;
                for (std::size_t k = 0; k < tied.size(); ++k)
                    if (k != c) rest.push_back(tied[k]);
                cf.nbr_order.insert(cf.nbr_order.begin() + static_cast<long>(cf.next), rest.begin(), rest.end());
                visit(copy, tied[c], u);
                expand(std::move(copy));
            }
            return;
        }
        render(t);
    }

    const char* bond_symbol(int a, int b) const {
        switch (g_.bond(a, b)) {
            case Bond::Double: return "=";
            case Bond::Triple: return "#";
            case Bond::Aromatic: return "";
            case Bond::Single:
                return (g_.is_aromatic_atom(a) && g_.is_aromatic_atom(b)) ? "-" : "";
            default: return "";
        }
    }

    void render(const Traversal& t) {
        // closure digits: allocated at the earlier endpoint, freed at the later
        std::map<std::pair<int, int>, char> digit_of;
        std::array<std::vector<std::pair<int, int>>, kMaxAtoms> closures;  // per atom: (partner_pos, partner)
        for (const auto& [a, b] : t.back_edges) {
            const int pa = t.visit_pos[static_cast<std::size_t>(a)], pb = t.visit_pos[static_cast<std::size_t>(b)];
            closures[static_cast<std::size_t>(a)].push_back({pb, b});
            closures[static_cast<std::size_t>(b)].push_back({pa, a});
        }
        for (auto& v : closures) std::sort(v.begin(), v.end());

        std::string out;
        std::array<bool, 10> digit_used{};
        std::function<void(int)> emit = [&](int u) {
            const char sym = element_symbol(g_.atoms[static_cast<std::size_t>(u)]);
            out += g_.is_aromatic_atom(u) ? static_cast<char>(sym - 'A' + 'a') : sym;
            for (const auto& [ppos, p] : closures[static_cast<std::size_t>(u)]) {
                const auto e = std::minmax(u, p);
                auto it = digit_of.find({e.first, e.second});
                if (it != digit_of.end()) {
                    out += it->second;  // closing occurrence
                    digit_used[static_cast<std::size_t>(it->second - '0')] = false;
                } else {
                    int d = 1;
                    while (d <= 9 && digit_used[static_cast<std::size_t>(d)]) ++d;
                    if (d > 9) d = 0;
                    digit_used[static_cast<std::size_t>(d)] = true;
                    out += bond_symbol(u, p);
                    out += static_cast<char>('0' + d);
                    digit_of[{e.first, e.second}] = static_cast<char>('0' + d);
                }
            }
            const auto& kids = t.children[static_cast<std::size_t>(u)];
            for (std::size_t k = 0; k < kids.size(); ++k) {
                const bool last = (k + 1 == kids.size());
                if (!last) out += '(';
                out += bond_symbol(u, kids[k]);
                emit(kids[k]);
                if (!last) out += ')';
            }
        };
        emit(t.order.front());
        if (best_.empty() || less_smiles(out, best_)) best_ = out;
    }

    // lexicographic preference with branch parens ranked last, so chain
    // forms like CCO beat C(C)O
    static bool less_smiles(const std::string& a, const std::string& b) {
        auto rank = [](char c) -> int { return (c == '(' || c == ')') ? 256 + c : c; };
        for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
            if (a[i] != b[i]) return rank(a[i]) < rank(b[i]);
        return a.size() < b.size();
    }
};

}  // namespace detail

// Canonical serialization; isomorphic valid graphs map to the same string.
inline std::string to_smiles(const MolecularGraph& g) {
    if (!is_valid(g)) throw ValidityError("to_smiles requires a valid graph");
    return detail::CanonicalWriter(g).run();
}

inline std::string canonical_smiles(const std::string& any_form) {
    return to_smiles(parse_smiles(any_form));
}

}  // namespace qmol::molgraph
