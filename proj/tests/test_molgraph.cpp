#include <catch2/catch.hpp>

#include <algorithm>
#include <set>

#include "qmol/molgraph.hpp"
#include "qmol/smiles.hpp"

using namespace qmol;
using namespace qmol::molgraph;

namespace {

MolecularGraph single_atom(Atom a) {
    MolecularGraph g;
    g.atoms[0] = a;
    return g;
}

std::array<int, kMaxAtoms> random_perm(Rng& rng) {
    std::array<int, kMaxAtoms> p;
    for (int i = 0; i < kMaxAtoms; ++i) p[static_cast<std::size_t>(i)] = i;
    for (int i = kMaxAtoms - 1; i > 0; --i)
        std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)))]);
    return p;
}

}  // namespace

TEST_CASE("validity rules", "[molgraph]") {
    SECTION("single carbon is valid") {
        CHECK(is_valid(single_atom(Atom::C)));
    }
    SECTION("empty graph is invalid") {
        CHECK_FALSE(is_valid(MolecularGraph{}));
    }
    SECTION("fluorine with two single bonds exceeds valence") {
        MolecularGraph g;
        g.atoms[0] = Atom::F;
        g.atoms[1] = Atom::C;
        g.atoms[2] = Atom::C;
        g.set_bond(0, 1, Bond::Single);
        g.set_bond(0, 2, Bond::Single);
        CHECK_FALSE(is_valid(g));
    }
    SECTION("two disconnected atoms are invalid") {
        MolecularGraph g;
        g.atoms[0] = Atom::C;
        g.atoms[1] = Atom::C;
        CHECK_FALSE(is_valid(g));
    }
    SECTION("benzene ring is valid, open aromatic chain is not") {
        MolecularGraph ring;
        for (int i = 0; i < 6; ++i) ring.atoms[static_cast<std::size_t>(i)] = Atom::C;
        for (int i = 0; i < 6; ++i) ring.set_bond(i, (i + 1) % 6, Bond::Aromatic);
        CHECK(is_valid(ring));

        MolecularGraph chain = ring;
        chain.set_bond(5, 0, Bond::None);
        CHECK_FALSE(is_valid(chain));
    }
    SECTION("odd aromatic ring cannot kekulize") {
        MolecularGraph g;
        for (int i = 0; i < 5; ++i) g.atoms[static_cast<std::size_t>(i)] = Atom::C;
        for (int i = 0; i < 5; ++i) g.set_bond(i, (i + 1) % 5, Bond::Aromatic);
        CHECK_FALSE(is_valid(g));
    }
    SECTION("aromatic oxygen breaks the valence rule") {
        MolecularGraph g;
        g.atoms[0] = Atom::O;
        for (int i = 1; i < 6; ++i) g.atoms[static_cast<std::size_t>(i)] = Atom::C;
        for (int i = 0; i < 6; ++i) g.set_bond(i, (i + 1) % 6, Bond::Aromatic);
        CHECK_FALSE(is_valid(g));
    }
    SECTION("is_valid is invariant under relabeling") {
        Rng rng(101);
        for (int t = 0; t < 200; ++t) {
            MolecularGraph g = random_valid_graph(rng);
            const auto p = random_perm(rng);
            CHECK(is_valid(g) == is_valid(permuted(g, p)));
        }
    }
    SECTION("random generator only builds valid graphs") {
        Rng rng(102);
        for (int t = 0; t < 500; ++t) CHECK(is_valid(random_valid_graph(rng)));
    }
}

TEST_CASE("ring perception", "[molgraph]") {
    SECTION("cyclopropane has one aliphatic ring") {
        const auto g = parse_smiles("C1CC1");
        const auto ri = ring_info(g);
        REQUIRE(ri.rings.size() == 1);
        CHECK(ri.rings[0].size() == 3);
        CHECK(ri.aliphatic_rings == 1);
        CHECK(ri.aromatic_rings == 0);
    }
    SECTION("benzene has one aromatic ring") {
        const auto ri = ring_info(parse_smiles("c1ccccc1"));
        CHECK(ri.aromatic_rings == 1);
        CHECK(ri.aliphatic_rings == 0);
    }
    SECTION("bicyclopentane has two rings") {
        const auto ri = ring_info(parse_smiles("C1C2CC1C2"));
        CHECK(ri.rings.size() == 2);
    }
    SECTION("acyclic molecule has none") {
        CHECK(ring_info(parse_smiles("CCOCC")).rings.empty());
    }
}

TEST_CASE("smiles parsing", "[molgraph]") {
    SECTION("single atom") {
        const auto g = parse_smiles("C");
        CHECK(g.heavy_atom_count() == 1);
        CHECK(g.atoms[0] == Atom::C);
    }
    SECTION("cyclopropane ring closure") {
        const auto g = parse_smiles("C1CC1");
        CHECK(g.heavy_atom_count() == 3);
        CHECK(g.bond(0, 1) == Bond::Single);
        CHECK(g.bond(1, 2) == Bond::Single);
        CHECK(g.bond(0, 2) == Bond::Single);
    }
    SECTION("pyridine: aromatic ring with one nitrogen") {
        const auto g = parse_smiles("c1ccncc1");
        CHECK(g.heavy_atom_count() == 6);
        int n_count = 0, arom_bonds = 0;
        for (int i = 0; i < 6; ++i)
            if (g.atoms[static_cast<std::size_t>(i)] == Atom::N) ++n_count;
        for (int i = 0; i < 6; ++i)
            for (int j = i + 1; j < 6; ++j)
                if (g.bond(i, j) == Bond::Aromatic) ++arom_bonds;
        CHECK(n_count == 1);
        CHECK(arom_bonds == 6);
        CHECK(is_valid(g));
        // hand-built adjacency: ring in input order 0-1-2-3(N)-4-5-0
        CHECK(g.atoms[3] == Atom::N);
        CHECK(g.bond(0, 1) == Bond::Aromatic);
        CHECK(g.bond(2, 3) == Bond::Aromatic);
        CHECK(g.bond(5, 0) == Bond::Aromatic);
    }
    SECTION("explicit bonds and branches") {
        const auto g = parse_smiles("CC(=O)O");
        CHECK(g.bond(1, 2) == Bond::Double);
        CHECK(g.bond(1, 3) == Bond::Single);
    }
    SECTION("unsupported tokens carry the position") {
        try {
            parse_smiles("CCS");
            FAIL("expected throw");
        } catch (const UnsupportedFeatureError& e) {
            CHECK(e.position == 2);
        }
        CHECK_THROWS_AS(parse_smiles("C[C@H]"), UnsupportedFeatureError);
        CHECK_THROWS_AS(parse_smiles("C(C"), UnsupportedFeatureError);
        CHECK_THROWS_AS(parse_smiles("C1CC"), UnsupportedFeatureError);
    }
    SECTION("more than nine heavy atoms") {
        CHECK_THROWS_AS(parse_smiles("CCCCCCCCCC"), SizeError);
    }
}

TEST_CASE("canonical smiles", "[molgraph]") {
    SECTION("trivial strings") {
        CHECK(to_smiles(single_atom(Atom::C)) == "C");
        MolecularGraph cc;
        cc.atoms[0] = cc.atoms[1] = Atom::C;
        cc.set_bond(0, 1, Bond::Single);
        CHECK(to_smiles(cc) == "CC");
    }
    SECTION("round trip: parse(canonical) re-canonicalizes identically") {
        for (const char* s : {"C", "CC", "CCO", "CC(C)C", "C1CC1", "c1ccccc1", "c1ccncc1",
                              "CC(=O)O", "OCC(O)CO", "C1CCCCC1", "FC(F)F", "N#CC#N", "CNC",
                              "CC(N)=O", "Fc1ccccc1", "C=CC=C", "c1cnccn1", "C1C2CC1C2"}) {
            const std::string canon = to_smiles(parse_smiles(s));
            CHECK(to_smiles(parse_smiles(canon)) == canon);
        }
    }
    SECTION("canonical string is invariant under every relabeling of a 6-atom graph") {
        Rng rng(103);
        MolecularGraph g;
        do {
            g = random_valid_graph(rng, 6);
        } while (g.heavy_atom_count() != 6);
        const std::string canon = to_smiles(g);

        std::array<int, kMaxAtoms> p{0, 1, 2, 3, 4, 5, 6, 7, 8};
        int checked = 0;
        do {
            const auto h = permuted(g, p);
            REQUIRE(to_smiles(h) == canon);
            ++checked;
        } while (std::next_permutation(p.begin(), p.begin() + 6));
        CHECK(checked == 720);
    }
    SECTION("canonical invariance on random graphs and permutations") {
        Rng rng(104);
        for (int t = 0; t < 150; ++t) {
            const MolecularGraph g = random_valid_graph(rng);
            const auto p = random_perm(rng);
            CHECK(to_smiles(g) == to_smiles(permuted(g, p)));
        }
    }
    SECTION("aromatic molecules keep aromatic form") {
        const std::string canon = to_smiles(parse_smiles("c1ccncc1"));
        CHECK(canon.find('n') != std::string::npos);
        CHECK(canon.find('=') == std::string::npos);
    }
    SECTION("invalid graph raises") {
        CHECK_THROWS_AS(to_smiles(MolecularGraph{}), ValidityError);
    }
}

TEST_CASE("decode_graph", "[molgraph]") {
    GraphLogits logits;
    SECTION("strong all-PAD logits give the empty graph") {
        for (auto& row : logits.atom) row[static_cast<std::size_t>(Atom::Pad)] = 50.0;
        const auto res = decode_graph(logits, DecodeMode::Argmax, 1.0, 1);
        CHECK(res.graph.heavy_atom_count() == 0);
    }
    SECTION("argmax is deterministic") {
        Rng rng(7);
        for (auto& row : logits.atom)
            for (auto& v : row) v = rng.normal();
        for (auto& plane : logits.bond)
            for (auto& row : plane)
                for (auto& v : row) v = rng.normal();
        const auto a = decode_graph(logits, DecodeMode::Argmax, 1.0, 1);
        const auto b = decode_graph(logits, DecodeMode::Argmax, 1.0, 999);
        CHECK(a.graph == b.graph);
    }
    SECTION("gumbel_st at low temperature converges to argmax") {
        Rng rng(8);
        int agree = 0;
        const int trials = 1000;
        for (int t = 0; t < trials; ++t) {
            GraphLogits l;
            for (auto& row : l.atom)
                for (auto& v : row) v = 3.0 * rng.normal();
            for (auto& plane : l.bond)
                for (auto& row : plane)
                    for (auto& v : row) v = 3.0 * rng.normal();
            const auto hard = decode_graph(l, DecodeMode::Argmax, 1.0, 0);
            const auto soft = decode_graph(l, DecodeMode::GumbelST, 1e-3, static_cast<std::uint64_t>(t));
            if (hard.graph == soft.graph) ++agree;
        }
        CHECK(agree >= 990);
    }
    SECTION("gumbel relaxed tensors project onto the returned graph") {
        Rng rng(9);
        GraphLogits l;
        for (auto& row : l.atom)
            for (auto& v : row) v = rng.normal();
        for (auto& plane : l.bond)
            for (auto& row : plane)
                for (auto& v : row) v = rng.normal();
        const auto res = decode_graph(l, DecodeMode::GumbelST, 0.8, 42);
        REQUIRE(res.has_relaxed);
        const auto hard = unflatten(flatten(res.relaxed));
        CHECK(hard == res.graph);
    }
    SECTION("non-finite logits raise") {
        logits.atom[0][0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(decode_graph(logits, DecodeMode::Argmax, 1.0, 1), NumericError);
    }
    SECTION("gumbel_st needs positive temperature") {
        CHECK_THROWS_AS(decode_graph(GraphLogits{}, DecodeMode::GumbelST, 0.0, 1), ConfigError);
    }
    SECTION("sample mode is seed-reproducible and explores") {
        Rng rng(10);
        GraphLogits l;
        for (auto& row : l.atom)
            for (auto& v : row) v = rng.normal();
        for (auto& plane : l.bond)
            for (auto& row : plane)
                for (auto& v : row) v = rng.normal();
        const auto a = decode_graph(l, DecodeMode::Sample, 1.0, 7);
        const auto b = decode_graph(l, DecodeMode::Sample, 1.0, 7);
        CHECK(a.graph == b.graph);
        bool differs = false;
        for (std::uint64_t s = 0; s < 20 && !differs; ++s)
            differs = !(decode_graph(l, DecodeMode::Sample, 1.0, s).graph ==
                        decode_graph(l, DecodeMode::Argmax, 1.0, 0).graph);
        CHECK(differs);
    }
    SECTION("bonds to PAD atoms are forced off") {
        GraphLogits l;
        for (int i = 0; i < kMaxAtoms; ++i) l.atom[static_cast<std::size_t>(i)][static_cast<std::size_t>(Atom::Pad)] = (i >= 2) ? 10.0 : -10.0;
        for (int i = 0; i < kMaxAtoms; ++i) l.atom[static_cast<std::size_t>(i)][0] += (i < 2) ? 10.0 : 0.0;
        for (auto& plane : l.bond)
            for (auto& row : plane) row[static_cast<std::size_t>(Bond::Single)] = 10.0;
        const auto res = decode_graph(l, DecodeMode::Argmax, 1.0, 0);
        for (int i = 0; i < kMaxAtoms; ++i)
            for (int j = 0; j < kMaxAtoms; ++j)
                if (i != j && (res.graph.atoms[static_cast<std::size_t>(i)] == Atom::Pad || res.graph.atoms[static_cast<std::size_t>(j)] == Atom::Pad))
                    CHECK(res.graph.bond(i, j) == Bond::None);
        CHECK(res.graph.bond(0, 1) == Bond::Single);
    }
}

TEST_CASE("flatten and unflatten", "[molgraph]") {
    SECTION("length is always 450") {
        CHECK(flatten(MolecularGraph{}).size() == 450);
        CHECK(kFlatLen == 450);
    }
    SECTION("empty graph flattens to PAD and NONE one-hots") {
        const auto v = flatten(MolecularGraph{});
        for (int i = 0; i < 9; ++i) {
            CHECK(v[static_cast<std::size_t>(i * 5 + static_cast<int>(Atom::Pad))] == 1.0);
        }
        double ones = 0;
        for (double x : v) ones += x;
        CHECK(ones == 90.0);  // 9 atom one-hots + 81 bond one-hots
    }
    SECTION("unflatten inverts flatten on 1000 random valid graphs") {
        Rng rng(105);
        for (int t = 0; t < 1000; ++t) {
            const MolecularGraph g = random_valid_graph(rng);
            CHECK(unflatten(flatten(g)) == g);
        }
    }
}

TEST_CASE("fingerprints and tanimoto", "[molgraph]") {
    SECTION("identical graphs give tanimoto 1") {
        const auto g = parse_smiles("CCO");
        CHECK(tanimoto(fingerprint(g), fingerprint(g)) == 1.0);
    }
    SECTION("single C vs single O are disjoint") {
        CHECK(tanimoto(fingerprint(single_atom(Atom::C)), fingerprint(single_atom(Atom::O))) == 0.0);
    }
    SECTION("relabeled graphs share the fingerprint, 500 cases") {
        Rng rng(106);
        for (int t = 0; t < 500; ++t) {
            const MolecularGraph g = random_valid_graph(rng);
            const auto p = random_perm(rng);
            const auto a = fingerprint(g);
            const auto b = fingerprint(permuted(g, p));
            CHECK(a.words == b.words);
        }
    }
    SECTION("subset bit counts behave") {
        Fingerprint a, b;
        a.n_bits = b.n_bits = 64;
        a.words = {0b0011};
        b.words = {0b1111};
        CHECK(tanimoto(a, b) == 0.5);
        Fingerprint e1, e2;
        e1.n_bits = e2.n_bits = 64;
        e1.words = {0};
        e2.words = {0};
        CHECK(tanimoto(e1, e2) == 1.0);
        Fingerprint c;
        c.n_bits = 128;
        c.words = {0, 0};
        CHECK_THROWS_AS(tanimoto(a, c), ShapeError);
    }
    SECTION("invalid graph raises") {
        CHECK_THROWS_AS(fingerprint(MolecularGraph{}), ValidityError);
    }
}
