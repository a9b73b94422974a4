#include <catch2/catch.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qmol/dataset.hpp"

using namespace qmol;
using namespace qmol::dataset;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path((std::filesystem::temp_directory_path() / name).string()) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

Corpus random_corpus(std::uint64_t seed, int n) {
    Rng rng(seed);
    Corpus c;
    for (int k = 0; k < n; ++k) {
        const auto g = molgraph::random_valid_graph(rng);
        c.push(g, molgraph::to_smiles(g));
    }
    return c;
}

}  // namespace

TEST_CASE("smiles-line ingestion", "[dataset]") {
    SECTION("accepts good lines and rejects bad ones with reasons") {
        TempFile f("qmol_test_corpus.smi",
                   "CCO\n"
                   "CCS\n"
                   "c1ccccc1\n"
                   "CCCCCCCCCC\n"
                   "\n"
                   "CC(C)C extra-column-ignored\n"
                   "CC.F\n");
        const auto res = ingest(f.path, Format::SmilesLines);
        CHECK(res.corpus.size() == 3);
        CHECK(res.report.total_records == 6);
        CHECK(res.report.accepted == 3);
        REQUIRE(res.report.rejects.size() == 3);
        CHECK(res.report.rejects[0].first == 2);  // CCS: unsupported element token
        CHECK(res.report.rejects[0].second.find("unsupported") != std::string::npos);
        CHECK(res.report.rejects[1].second.find("9 heavy atoms") != std::string::npos);
        std::size_t reason_total = 0;
        for (const auto& [reason, count] : res.report.reason_counts) reason_total += count;
        CHECK(reason_total == res.report.rejects.size());
    }
    SECTION("re-ingesting gives identical hash and order") {
        TempFile f("qmol_test_corpus2.smi", "CCO\nCC\nC1CC1\n");
        const auto a = ingest(f.path, Format::SmilesLines);
        const auto b = ingest(f.path, Format::SmilesLines);
        CHECK(a.corpus.source_hash == b.corpus.source_hash);
        CHECK(a.corpus.canonical == b.corpus.canonical);
    }
    SECTION("missing file raises io error, garbage-only file raises empty corpus") {
        CHECK_THROWS_AS(ingest("/nonexistent/qmol.smi", Format::SmilesLines), IoError);
        TempFile f("qmol_test_corpus3.smi", "XX\nYY\n");
        CHECK_THROWS_AS(ingest(f.path, Format::SmilesLines), EmptyCorpusError);
    }
}

TEST_CASE("sdf subset ingestion", "[dataset]") {
    // ethanol with explicit hydrogens, then an invalid fragment record
    const std::string sdf =
        "ethanol\n  prog\n\n"
        "  9  8  0  0  0  0  0  0  0  0999 V2000\n"
        "    0.0 0.0 0.0 C   0  0\n"
        "    1.5 0.0 0.0 C   0  0\n"
        "    2.2 1.2 0.0 O   0  0\n"
        "    0.1 0.1 1.0 H   0  0\n"
        "    0.2 1.0 0.0 H   0  0\n"
        "   -1.0 0.0 0.0 H   0  0\n"
        "    1.6 -0.5 0.9 H   0  0\n"
        "    1.6 -0.5 -0.9 H   0  0\n"
        "    3.1 1.0 0.0 H   0  0\n"
        "  1  2  1  0\n"
        "  2  3  1  0\n"
        "  1  4  1  0\n"
        "  1  5  1  0\n"
        "  1  6  1  0\n"
        "  2  7  1  0\n"
        "  2  8  1  0\n"
        "  3  9  1  0\n"
        "M  END\n"
        "$$$$\n"
        "disconnected\n  prog\n\n"
        "  2  0  0  0  0  0  0  0  0  0999 V2000\n"
        "    0.0 0.0 0.0 C   0  0\n"
        "    5.0 0.0 0.0 C   0  0\n"
        "M  END\n"
        "$$$$\n";
    TempFile f("qmol_test.sdf", sdf);
    const auto res = ingest(f.path, Format::SdfSubset);
    REQUIRE(res.corpus.size() == 1);
    CHECK(res.corpus.canonical[0] == "CCO");
    CHECK(res.report.total_records == 2);
    CHECK(res.report.rejects.size() == 1);
}

TEST_CASE("split", "[dataset]") {
    const Corpus c = random_corpus(7, 100);
    SECTION("deterministic and disjoint") {
        const auto [t1, e1] = split(c, 0.8, 0.2, 11);
        const auto [t2, e2] = split(c, 0.8, 0.2, 11);
        CHECK(t1.canonical == t2.canonical);
        CHECK(t1.size() == 80);
        CHECK(e1.size() == 20);
    }
    SECTION("degenerate fractions") {
        const auto [t, e] = split(c, 1.0, 0.0, 3);
        CHECK(t.size() == 100);
        CHECK(e.size() == 0);
    }
    SECTION("union of splits equals the corpus as a multiset") {
        const auto [t, e] = split(c, 0.6, 0.4, 5);
        std::vector<std::string> joined = t.canonical;
        joined.insert(joined.end(), e.canonical.begin(), e.canonical.end());
        std::sort(joined.begin(), joined.end());
        std::vector<std::string> orig = c.canonical;
        std::sort(orig.begin(), orig.end());
        CHECK(joined == orig);
    }
    SECTION("bad fractions raise") {
        CHECK_THROWS_AS(split(c, 0.7, 0.2, 1), ConfigError);
    }
}

TEST_CASE("batches", "[dataset]") {
    SECTION("1000 graphs at batch 128 give 7 full batches and one of 104") {
        BatchStream bs(1000, 128, 42);
        CHECK(bs.batches_per_epoch() == 8);
        std::vector<std::size_t> sizes;
        for (int k = 0; k < 8; ++k) sizes.push_back(bs.next().size());
        CHECK(sizes == std::vector<std::size_t>{128, 128, 128, 128, 128, 128, 128, 104});
        CHECK(bs.epoch_done());
    }
    SECTION("same seed gives the identical batch sequence") {
        BatchStream a(500, 64, 9), b(500, 64, 9);
        for (int k = 0; k < 20; ++k) CHECK(a.next() == b.next());
    }
    SECTION("epoch 2 ordering differs from epoch 1") {
        BatchStream bs(1000, 1000, 4);
        const auto e1 = bs.next();
        const auto e2 = bs.next();
        CHECK(e1 != e2);
        std::vector<std::size_t> s1 = e1, s2 = e2;
        std::sort(s1.begin(), s1.end());
        std::sort(s2.begin(), s2.end());
        CHECK(s1 == s2);  // same multiset, different order
    }
}

TEST_CASE("binary cache", "[dataset]") {
    const std::string path = (std::filesystem::temp_directory_path() / "qmol_cache.bin").string();
    const Corpus c = random_corpus(21, 200);

    SECTION("round trip is exact") {
        cache_write(c, path);
        const Corpus back = cache_read(path);
        CHECK(back.size() == c.size());
        CHECK(back.source_hash == c.source_hash);
        CHECK(back.canonical == c.canonical);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(back.graphs[i] == c.graphs[i]);
        std::remove(path.c_str());
    }
    SECTION("truncated file is detected") {
        cache_write(c, path);
        const auto full = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, full - 10);
        CHECK_THROWS_AS(cache_read(path), CorruptCacheError);
        std::remove(path.c_str());
    }
    SECTION("bit flip is detected") {
        cache_write(c, path);
        {
            std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
            f.seekp(40);
            char b;
            f.read(&b, 1);
            f.seekp(40);
            b = static_cast<char>(b ^ 0x4);
            f.write(&b, 1);
        }
        CHECK_THROWS_AS(cache_read(path), CorruptCacheError);
        std::remove(path.c_str());
    }
    SECTION("cache read beats re-ingest (informational timing)") {
        std::ostringstream lines;
        for (const auto& s : c.canonical) lines << s << "\n";
        TempFile f("qmol_speed.smi", lines.str());
        const auto t0 = std::chrono::steady_clock::now();
        const auto again = ingest(f.path, Format::SmilesLines);
        const auto t1 = std::chrono::steady_clock::now();
        cache_write(again.corpus, path);
        const auto t2 = std::chrono::steady_clock::now();
        const auto back = cache_read(path);
        const auto t3 = std::chrono::steady_clock::now();
        REQUIRE(back.canonical == again.corpus.canonical);
        const double ingest_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        const double read_ms = std::chrono::duration<double, std::milli>(t3 - t2).count();
        WARN("ingest " << ingest_ms << " ms vs cache read " << read_ms << " ms ("
                       << ingest_ms / std::max(read_ms, 1e-9) << "x)");
        CHECK(read_ms < ingest_ms);
        std::remove(path.c_str());
    }
}

TEST_CASE("bundled corpus round-trips through canonical smiles", "[dataset]") {
    const auto res = ingest(std::string(QMOL_SOURCE_DIR) + "/data/sample_10k.smi", Format::SmilesLines);
    REQUIRE(res.corpus.size() == 10000);
    for (std::size_t i = 0; i < res.corpus.size(); i += 7) {
        const auto& canon = res.corpus.canonical[i];
        CHECK(molgraph::to_smiles(molgraph::parse_smiles(canon)) == canon);
    }
}
