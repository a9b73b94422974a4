#pragma once

// Corpus ingestion (SMILES lines and an SDF subset), deterministic splits,
// seeded epoch batching, and a checksummed binary graph cache.

#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "qmol/chem.hpp"
#include "qmol/serial.hpp"
#include "qmol/smiles.hpp"

namespace qmol::dataset {

using molgraph::MolecularGraph;

enum class Format { SmilesLines, SdfSubset };

struct RejectionReport {
    std::size_t total_records = 0;
    std::size_t accepted = 0;
    std::vector<std::pair<std::size_t, std::string>> rejects;  // (record index, reason)
    std::map<std::string, std::size_t> reason_counts;

    void reject(std::size_t record, const std::string& reason) {
        rejects.emplace_back(record, reason);
        ++reason_counts[reason.substr(0, reason.find(" ("))];
    }
};

struct Corpus {
    std::vector<MolecularGraph> graphs;
    std::vector<std::string> canonical;  // aligned with graphs
    std::unordered_set<std::string> canonical_set;
    std::uint64_t source_hash = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return graphs.size(); }

    void push(MolecularGraph g, std::string canon) {
        canonical_set.insert(canon);
        graphs.push_back(std::move(g));
        canonical.push_back(std::move(canon));
    }
};

struct IngestResult {
    Corpus corpus;
    RejectionReport report;
};

namespace detail {

inline void accept_or_reject(const MolecularGraph& g, std::size_t record, Corpus& corpus,
                             RejectionReport& report) {
    if (!molgraph::is_valid(g)) {
        report.reject(record, "invalid molecule (valence, kekulization, or connectivity)");
        return;
    }
    corpus.push(g, molgraph::to_smiles(g));
    ++report.accepted;
}

inline void ingest_smiles_line(const std::string& token, std::size_t record, Corpus& corpus,
                               RejectionReport& report) {
    try {
        accept_or_reject(molgraph::parse_smiles(token), record, corpus, report);
    } catch (const SizeError&) {
        report.reject(record, "more than 9 heavy atoms");
    } catch (const UnsupportedFeatureError& e) {
        report.reject(record, std::string("unsupported feature: ") + e.what());
    }
}

// Minimal V2000 molblock reader: counts line, atom block, bond block.
// Explicit hydrogens are dropped; coordinates are ignored.
inline void ingest_sdf_record(const std::vector<std::string>& lines, std::size_t record,
                              Corpus& corpus, RejectionReport& report) {
    if (lines.size() < 4) {
        report.reject(record, "truncated molblock");
        return;
    }
    const std::string& counts = lines[3];
    if (counts.size() < 6) {
        report.reject(record, "bad counts line");
        return;
    }
    int n_atoms = 0, n_bonds = 0;
    try {
        n_atoms = std::stoi(counts.substr(0, 3));
        n_bonds = std::stoi(counts.substr(3, 3));
    } catch (...) {
        report.reject(record, "bad counts line");
        return;
    }
    if (lines.size() < static_cast<std::size_t>(4 + n_atoms + n_bonds)) {
        report.reject(record, "truncated molblock");
        return;
    }
    std::vector<int> heavy_index(static_cast<std::size_t>(n_atoms), -1);
    MolecularGraph g;
    int heavy = 0;
    for (int i = 0; i < n_atoms; ++i) {
        std::istringstream ss(lines[static_cast<std::size_t>(4 + i)]);
        double x, y, z;
        std::string sym;
        if (!(ss >> x >> y >> z >> sym)) {
            report.reject(record, "bad atom line");
            return;
        }
        if (sym == "H") continue;
        molgraph::Atom a;
        if (sym == "C") a = molgraph::Atom::C;
        else if (sym == "N") a = molgraph::Atom::N;
        else if (sym == "O") a = molgraph::Atom::O;
        else if (sym == "F") a = molgraph::Atom::F;
        else {
            report.reject(record, "unsupported element: " + sym);
            return;
        }
        if (heavy >= molgraph::kMaxAtoms) {
            report.reject(record, "more than 9 heavy atoms");
            return;
        }
        heavy_index[static_cast<std::size_t>(i)] = heavy;
        g.atoms[static_cast<std::size_t>(heavy)] = a;
        ++heavy;
    }
    for (int b = 0; b < n_bonds; ++b) {
        const std::string& line = lines[static_cast<std::size_t>(4 + n_atoms + b)];
        if (line.size() < 9) {
            report.reject(record, "bad bond line");
            return;
        }
        int i, j, t;
        try {
            i = std::stoi(line.substr(0, 3)) - 1;
            j = std::stoi(line.substr(3, 3)) - 1;
            t = std::stoi(line.substr(6, 3));
        } catch (...) {
            report.reject(record, "bad bond line");
            return;
        }
        if (i < 0 || j < 0 || i >= n_atoms || j >= n_atoms) {
            report.reject(record, "bad bond line");
            return;
        }
        const int hi = heavy_index[static_cast<std::size_t>(i)], hj = heavy_index[static_cast<std::size_t>(j)];
        if (hi < 0 || hj < 0) continue;  // bond to hydrogen
        molgraph::Bond kind;
        switch (t) {
            case 1: kind = molgraph::Bond::Single; break;
            case 2: kind = molgraph::Bond::Double; break;
            case 3: kind = molgraph::Bond::Triple; break;
            case 4: kind = molgraph::Bond::Aromatic; break;
            default: report.reject(record, "unsupported bond type"); return;
        }
        g.set_bond(hi, hj, kind);
    }
    accept_or_reject(g, record, corpus, report);
}

}  // namespace detail

inline IngestResult ingest_smiles_lines(const std::vector<std::string>& lines) {
    IngestResult res;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        std::istringstream ss(lines[k]);
        std::string token;
        if (!(ss >> token) || token[0] == '#') continue;  // blank or comment line
        ++res.report.total_records;
        detail::ingest_smiles_line(token, k + 1, res.corpus, res.report);
    }
    return res;
}

inline IngestResult ingest(const std::string& path, Format format) {
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot open corpus file: " + path);
    IngestResult res;
    if (format == Format::SmilesLines) {
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        res = ingest_smiles_lines(lines);
    } else {
        std::vector<std::string> record_lines;
        std::string line;
        std::size_t record = 0;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.rfind("$$$$", 0) == 0) {
                ++record;
                ++res.report.total_records;
                detail::ingest_sdf_record(record_lines, record, res.corpus, res.report);
                record_lines.clear();
            } else {
                record_lines.push_back(line);
            }
        }
        if (!record_lines.empty()) {
            bool blank = true;
            for (const auto& l : record_lines)
                if (!l.empty()) blank = false;
            if (!blank) {
                ++record;
                ++res.report.total_records;
                detail::ingest_sdf_record(record_lines, record, res.corpus, res.report);
            }
        }
    }
    if (res.corpus.size() == 0) throw EmptyCorpusError("no molecules accepted from " + path);
    res.corpus.source_hash = serial::file_hash(path);
    return res;
}

// -- split and batches -----------------------------------------------------------

inline std::pair<Corpus, Corpus> split(const Corpus& corpus, double train_fraction,
                                       double eval_fraction, std::uint64_t seed) {
    if (train_fraction < 0 || eval_fraction < 0 ||
        std::abs(train_fraction + eval_fraction - 1.0) > 1e-9)
        throw ConfigError("split fractions must be nonnegative and sum to 1");
    std::vector<std::size_t> idx(corpus.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const std::size_t n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(corpus.size()) + 0.5);
    Corpus train, eval;
    train.source_hash = eval.source_hash = corpus.source_hash;
    train.seed = eval.seed = seed;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const std::size_t i = idx[k];
        (k < n_train ? train : eval).push(corpus.graphs[i], corpus.canonical[i]);
    }
    return {std::move(train), std::move(eval)};
}

// Seeded batch stream: every epoch reshuffles with (seed, epoch); the final
// partial batch is emitted.
class BatchStream {
  public:
    BatchStream(std::size_t corpus_size, std::size_t batch_size, std::uint64_t seed)
        : n_(corpus_size), batch_(batch_size), seed_(seed) {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        reshuffle();
    }

    // indices of the next batch; starts a new epoch when exhausted
    std::vector<std::size_t> next() {
        if (pos_ >= n_) {
            ++epoch_;
            reshuffle();
        }
        const std::size_t take = std::min(batch_, n_ - pos_);
        std::vector<std::size_t> out(order_.begin() + static_cast<long>(pos_),
                                     order_.begin() + static_cast<long>(pos_ + take));
        pos_ += take;
        return out;
    }

    bool epoch_done() const { return pos_ >= n_; }
    std::size_t batches_per_epoch() const { return (n_ + batch_ - 1) / batch_; }
    std::size_t epoch() const { return epoch_; }

  private:
    void reshuffle() {
        order_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
        Rng rng(hash_mix(seed_, 0x9d2c5680u + epoch_));
        rng.shuffle(order_);
        pos_ = 0;
    }

    std::size_t n_, batch_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t pos_ = 0;
    std::vector<std::size_t> order_;
};

// -- binary cache ---------------------------------------------------------------

// Record: 9 atom bytes, 45 bond nibbles packed into 23 bytes (upper triangle
// including the diagonal), one xor checksum byte. File: magic, version,
// count, source hash, seed, records, canonical-SMILES strings (so reads skip
// re-canonicalizing), trailing FNV digest over records and strings.
namespace detail {

constexpr std::uint32_t kCacheMagic = 0x51'4d'47'43;  // "QMGC"
constexpr std::uint32_t kCacheVersion = 2;

inline std::array<std::uint8_t, 33> encode_record(const MolecularGraph& g) {
    std::array<std::uint8_t, 33> rec{};
    for (int i = 0; i < 9; ++i) rec[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(g.atoms[static_cast<std::size_t>(i)]);
    int nibble = 0;
    for (int i = 0; i < 9; ++i)
        for (int j = i; j < 9; ++j) {
            const std::uint8_t val = (i == j) ? 0 : static_cast<std::uint8_t>(g.bond(i, j));
            const std::size_t byte = static_cast<std::size_t>(9 + nibble / 2);
            if (nibble % 2 == 0) rec[byte] = static_cast<std::uint8_t>(rec[byte] | val);
            else rec[byte] = static_cast<std::uint8_t>(rec[byte] | (val << 4));
            ++nibble;
        }
    std::uint8_t sum = 0;
    for (int k = 0; k < 32; ++k) sum ^= rec[static_cast<std::size_t>(k)];
    rec[32] = sum;
    return rec;
}

inline MolecularGraph decode_record(const std::array<std::uint8_t, 33>& rec) {
    std::uint8_t sum = 0;
    for (int k = 0; k < 32; ++k) sum ^= rec[static_cast<std::size_t>(k)];
    if (sum != rec[32]) throw CorruptCacheError("record checksum mismatch");
    MolecularGraph g;
    for (int i = 0; i < 9; ++i) {
        if (rec[static_cast<std::size_t>(i)] > 4) throw CorruptCacheError("bad atom byte");
        g.atoms[static_cast<std::size_t>(i)] = static_cast<molgraph::Atom>(rec[static_cast<std::size_t>(i)]);
    }
    int nibble = 0;
    for (int i = 0; i < 9; ++i)
        for (int j = i; j < 9; ++j) {
            const std::size_t byte = static_cast<std::size_t>(9 + nibble / 2);
            const std::uint8_t val = (nibble % 2 == 0) ? (rec[byte] & 0x0f) : (rec[byte] >> 4);
            ++nibble;
            if (i == j) continue;
            if (val > 4) throw CorruptCacheError("bad bond nibble");
            if (val) g.set_bond(i, j, static_cast<molgraph::Bond>(val));
        }
    return g;
}

}  // namespace detail

inline void cache_write(const Corpus& corpus, const std::string& path) {
    serial::Writer w(path);
    w.u32(detail::kCacheMagic);
    w.u32(detail::kCacheVersion);
    w.u64(corpus.size());
    w.u64(corpus.source_hash);
    w.u64(corpus.seed);
    std::uint64_t digest = 0xcbf29ce484222325ULL;
    for (const auto& g : corpus.graphs) {
        const auto rec = detail::encode_record(g);
        w.raw(rec.data(), rec.size());
        digest = fnv1a(rec.data(), rec.size(), digest);
    }
    for (const auto& s : corpus.canonical) {
        w.str(s);
        digest = fnv1a(s.data(), s.size(), digest);
    }
    w.u64(digest);
}

inline Corpus cache_read(const std::string& path) {
    serial::Reader r(path);
    if (r.u32() != detail::kCacheMagic) throw CorruptCacheError("bad magic");
    if (r.u32() != detail::kCacheVersion) throw CorruptCacheError("unsupported cache version");
    const std::uint64_t count = r.u64();
    Corpus corpus;
    corpus.source_hash = r.u64();
    corpus.seed = r.u64();
    std::uint64_t digest = 0xcbf29ce484222325ULL;
    std::vector<MolecularGraph> graphs;
    graphs.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        std::array<std::uint8_t, 33> rec;
        r.raw(rec.data(), rec.size());
        digest = fnv1a(rec.data(), rec.size(), digest);
        MolecularGraph g = detail::decode_record(rec);
        if (!molgraph::is_valid(g)) throw CorruptCacheError("cached graph fails validation");
        graphs.push_back(g);
    }
    for (std::uint64_t k = 0; k < count; ++k) {
        std::string s = r.str();
        digest = fnv1a(s.data(), s.size(), digest);
        corpus.push(graphs[static_cast<std::size_t>(k)], std::move(s));
    }
    if (r.u64() != digest) throw CorruptCacheError("trailing digest mismatch");
    return corpus;
}

}  // namespace qmol::dataset
