#pragma once

// Sampling, metric computation and sweep harness: validity / uniqueness /
// novelty / diversity ratios, property means on a declared basis, the
// nine-descriptor KL score against a training subsample, A/B comparisons
// with rank-test p-values, and histogram CSV export.

#include <iomanip>
#include <sstream>

#include "qmol/gan.hpp"

namespace qmol::evalbench {

using molgraph::MolecularGraph;

enum class PropertyBasis { Valid, ValidUnique };

struct MoleculeRecord {
    std::string smiles;
    double qed = 0, solubility = 0, sa = 0;
    bool unique = false;  // first occurrence of its canonical form
};

struct MetricsReport {
    std::size_t n_samples = 0;
    std::size_t n_valid = 0;
    std::size_t n_valid_unique = 0;
    double validity_pct = 0;
    double uniqueness_pct = 0;
    double novelty_pct = 0;
    double diversity = 0;
    double mean_qed = 0, mean_solubility = 0, mean_sa = 0;
    PropertyBasis basis = PropertyBasis::Valid;
    double kl_score = 0;
    std::array<double, chem::kNumDescriptors> per_descriptor_kl{};
    std::array<chem::DescriptorHistogram, chem::kNumDescriptors> histograms;
    bool metrics_defined = true;  // false when nothing valid was generated
    std::vector<MoleculeRecord> dump;

    nlohmann::json to_json() const {
        nlohmann::json j{
            {"n_samples", n_samples},
            {"n_valid", n_valid},
            {"n_valid_unique", n_valid_unique},
            {"validity_pct", validity_pct},
            {"uniqueness_pct", uniqueness_pct},
            {"novelty_pct", novelty_pct},
            {"diversity", diversity},
            {"mean_qed", mean_qed},
            {"mean_solubility", mean_solubility},
            {"mean_sa", mean_sa},
            {"property_basis", basis == PropertyBasis::Valid ? "valid" : "valid_unique"},
            {"kl_score", kl_score},
            {"metrics_defined", metrics_defined},
        };
        for (int d = 0; d < chem::kNumDescriptors; ++d)
            j["per_descriptor_kl"][chem::kDescriptorNames[static_cast<std::size_t>(d)]] =
                per_descriptor_kl[static_cast<std::size_t>(d)];
        return j;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3);
        os << "samples " << n_samples << "  valid+unique " << n_valid_unique << "\n";
        if (!metrics_defined) {
            os << "no valid molecules; ratio metrics undefined\n";
            return os.str();
        }
        os << "validity %    " << validity_pct << "\n"
           << "uniqueness %  " << uniqueness_pct << "\n"
           << "novelty %     " << novelty_pct << "\n"
           << "diversity     " << diversity << "\n"
           << "QED           " << mean_qed << "\n"
           << "Solubility    " << mean_solubility << "\n"
           << "SA            " << mean_sa << "\n"
           << "KL score (S)  " << kl_score << "\n"
           << "property basis: " << (basis == PropertyBasis::Valid ? "valid" : "valid and unique") << "\n";
        return os.str();
    }
};

namespace detail {

inline std::vector<std::size_t> seeded_subsample(std::size_t corpus_size, std::size_t want,
                                                 std::uint64_t seed) {
    std::vector<std::size_t> idx(corpus_size);
    for (std::size_t i = 0; i < corpus_size; ++i) idx[i] = i;
    Rng rng(hash_mix(seed, 0x5ab5a11cedULL));
    rng.shuffle(idx);
    idx.resize(std::min(want, corpus_size));
    return idx;
}

}  // namespace detail

inline MetricsReport sample_and_report(gan::Model& model, const dataset::Corpus& train_ref,
                                       std::size_t n, std::uint64_t seed,
                                       PropertyBasis basis = PropertyBasis::Valid, int threads = 1) {
    MetricsReport rep;
    rep.n_samples = n;
    rep.basis = basis;

    const auto molecules = gan::sample_molecules(model, n, seed);
    const chem::SaModel sa_model = chem::SaModel::from_corpus(train_ref.graphs);

    std::vector<MolecularGraph> valid;
    for (const auto& g : molecules)
        if (molgraph::is_valid(g)) valid.push_back(g);
    rep.n_valid = valid.size();
    rep.validity_pct = 100.0 * static_cast<double>(valid.size()) / static_cast<double>(n);
    if (valid.empty()) {
        rep.metrics_defined = false;
        return rep;
    }

    // per-molecule work fans out; each index owns its slot, results equal
    // the serial order exactly
    rep.dump.resize(valid.size());
    std::vector<std::array<double, chem::kNumDescriptors>> gen_desc(valid.size());
    parallel_for(valid.size(), threads, [&](std::size_t i) {
        MoleculeRecord& rec = rep.dump[i];
        rec.smiles = molgraph::to_smiles(valid[i]);
        rec.qed = chem::qed(valid[i]);
        rec.solubility = chem::solubility_norm(valid[i]);
        rec.sa = chem::sa_norm(valid[i], sa_model);
        gen_desc[i] = chem::descriptors(valid[i]).as_array();
    });
    std::set<std::string> seen;
    std::size_t novel = 0;
    for (auto& rec : rep.dump) {
        rec.unique = seen.insert(rec.smiles).second;
        if (!train_ref.canonical_set.count(rec.smiles)) ++novel;
    }
    rep.n_valid_unique = seen.size();
    rep.uniqueness_pct = 100.0 * static_cast<double>(seen.size()) / static_cast<double>(valid.size());
    rep.novelty_pct = 100.0 * static_cast<double>(novel) / static_cast<double>(valid.size());

    // diversity: 1 - mean over generated valid molecules of the maximum
    // Tanimoto similarity to a seeded 2,000-molecule training subsample
    const auto div_idx = detail::seeded_subsample(train_ref.size(), 2000, hash_mix(seed, 1));
    std::vector<molgraph::Fingerprint> ref_fps(div_idx.size());
    parallel_for(div_idx.size(), threads,
                 [&](std::size_t i) { ref_fps[i] = molgraph::fingerprint(train_ref.graphs[div_idx[i]]); });
    std::vector<double> max_sim(valid.size(), 0.0);
    parallel_for(valid.size(), threads, [&](std::size_t i) {
        const auto fp = molgraph::fingerprint(valid[i]);
        double best = 0.0;
        for (const auto& rf : ref_fps) best = std::max(best, molgraph::tanimoto(fp, rf));
        max_sim[i] = best;
    });
    double mean_max_sim = 0.0;
    for (double s : max_sim) mean_max_sim += s;
    rep.diversity = 1.0 - mean_max_sim / static_cast<double>(valid.size());

    // property means on the declared basis
    double sq = 0, ss = 0, sa = 0;
    std::size_t nprop = 0;
    for (const auto& rec : rep.dump) {
        if (basis == PropertyBasis::ValidUnique && !rec.unique) continue;
        sq += rec.qed;
        ss += rec.solubility;
        sa += rec.sa;
        ++nprop;
    }
    rep.mean_qed = sq / static_cast<double>(nprop);
    rep.mean_solubility = ss / static_cast<double>(nprop);
    rep.mean_sa = sa / static_cast<double>(nprop);

    // KL score against a seeded 10,000-molecule training subsample
    const auto kl_idx = detail::seeded_subsample(train_ref.size(), 10000, hash_mix(seed, 2));
    std::vector<std::array<double, chem::kNumDescriptors>> ref_desc(kl_idx.size());
    parallel_for(kl_idx.size(), threads,
                 [&](std::size_t i) { ref_desc[i] = chem::descriptors(train_ref.graphs[kl_idx[i]]).as_array(); });
    const auto kl = chem::kl_report(gen_desc, ref_desc);
    rep.kl_score = kl.score;
    rep.per_descriptor_kl = kl.per_descriptor_kl;
    rep.histograms = kl.histograms;
    return rep;
}

// -- comparisons ----------------------------------------------------------------

struct ComparisonRow {
    std::string metric;
    double a = 0, b = 0;
    double p_value = -1;  // -1: no per-molecule samples for this metric
};

inline std::vector<ComparisonRow> compare(const MetricsReport& a, const MetricsReport& b) {
    if (a.dump.empty() || b.dump.empty())
        throw ArityError("compare needs molecule dumps on both reports");
    auto column = [](const MetricsReport& r, auto getter) {
        std::vector<double> v;
        v.reserve(r.dump.size());
        for (const auto& rec : r.dump) v.push_back(getter(rec));
        return v;
    };
    std::vector<ComparisonRow> rows;
    rows.push_back({"n_valid_unique", static_cast<double>(a.n_valid_unique), static_cast<double>(b.n_valid_unique), -1});
    rows.push_back({"validity_pct", a.validity_pct, b.validity_pct, -1});
    rows.push_back({"uniqueness_pct", a.uniqueness_pct, b.uniqueness_pct, -1});
    rows.push_back({"novelty_pct", a.novelty_pct, b.novelty_pct, -1});
    rows.push_back({"diversity", a.diversity, b.diversity, -1});
    auto add_prop = [&](const std::string& name, auto getter, double ma, double mb) {
        const auto va = column(a, getter);
        const auto vb = column(b, getter);
        double p = 1.0;
        try {
            p = chem::stat_test(va, vb);
        } catch (const UndefinedTestError&) {
            p = -1;
        }
        rows.push_back({name, ma, mb, p});
    };
    add_prop("qed", [](const MoleculeRecord& r) { return r.qed; }, a.mean_qed, b.mean_qed);
    add_prop("solubility", [](const MoleculeRecord& r) { return r.solubility; }, a.mean_solubility, b.mean_solubility);
    add_prop("sa", [](const MoleculeRecord& r) { return r.sa; }, a.mean_sa, b.mean_sa);
    rows.push_back({"kl_score", a.kl_score, b.kl_score, -1});
    return rows;
}

inline std::string comparison_text(const std::vector<ComparisonRow>& rows) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << std::setw(16) << "metric" << std::setw(12) << "A" << std::setw(12) << "B" << std::setw(12)
       << "p-value" << "\n";
    for (const auto& r : rows) {
        os << std::setw(16) << r.metric << std::setw(12) << r.a << std::setw(12) << r.b;
        if (r.p_value >= 0) os << std::setw(12) << r.p_value;
        else os << std::setw(12) << "-";
        os << "\n";
    }
    return os.str();
}

// -- histogram export ---------------------------------------------------------------

// One CSV per requested descriptor: descriptor, bin_low, bin_high,
// ref_density, gen_density.
inline std::vector<std::string> export_distributions(const MetricsReport& rep,
                                                     const std::vector<std::string>& descriptors,
                                                     const std::string& out_dir) {
    if (rep.dump.empty()) throw EmptyReportError("report has no molecule dump to export");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    for (const auto& name : descriptors) {
        int index = -1;
        for (int d = 0; d < chem::kNumDescriptors; ++d)
            if (name == chem::kDescriptorNames[static_cast<std::size_t>(d)]) index = d;
        if (index < 0) throw ConfigError("unknown descriptor: " + name);
        const auto& h = rep.histograms[static_cast<std::size_t>(index)];
        const std::string path = out_dir + "/" + name + ".csv";
        std::ofstream out(path);
        if (!out.good()) throw IoError("cannot write " + path);
        out << "descriptor,bin_low,bin_high,ref_density,gen_density\n";
        out << std::setprecision(12);
        for (std::size_t b = 0; b < h.bin_low.size(); ++b)
            out << name << "," << h.bin_low[b] << "," << h.bin_high[b] << "," << h.ref_density[b]
                << "," << h.gen_density[b] << "\n";
        written.push_back(path);
    }
    return written;
}

// -- appendix sweeps ---------------------------------------------------------------

enum class Sweep { GeneratorComplexity, ZDim, VqcLayers };

struct BenchRow {
    std::string label;
    MetricsReport report;
};

// Trains one configuration per row at desk scale and reports each the same
// way as the single-model path. Rows whose configuration is invalid for the
// base variant (a one-qubit noise circuit, say) are skipped.
inline std::vector<BenchRow> bench_appendix(Sweep sweep, gan::ModelConfig base_model,
                                            gan::TrainConfig desk, const dataset::Corpus& corpus,
                                            std::size_t eval_samples = 1024) {
    std::vector<BenchRow> rows;
    auto run_one = [&](const std::string& label, gan::ModelConfig mc) {
        try {
            mc.validate();
        } catch (const ConfigError&) {
            return;
        }
        auto res = gan::train(mc, desk, corpus);
        BenchRow row;
        row.label = label;
        row.report = sample_and_report(res.model, corpus, eval_samples, mc.seed + 1);
        rows.push_back(std::move(row));
    };
    switch (sweep) {
        case Sweep::GeneratorComplexity:
            for (const auto& [label, c] : {std::pair<const char*, gan::GenComplexity>{"full", gan::GenComplexity::Full},
                                           {"hr", gan::GenComplexity::HR},
                                           {"er", gan::GenComplexity::ER}}) {
                gan::ModelConfig mc = base_model;
                mc.complexity = c;
                run_one(label, mc);
            }
            break;
        case Sweep::ZDim:
            for (int z = 1; z <= 8; ++z) {
                gan::ModelConfig mc = base_model;
                mc.z_dim = z;
                run_one("z_dim=" + std::to_string(z), mc);
            }
            break;
        case Sweep::VqcLayers:
            for (int layers = 1; layers <= 5; ++layers) {
                gan::ModelConfig mc = base_model;
                mc.vqc_layers = layers;
                run_one("layers=" + std::to_string(layers), mc);
            }
            break;
    }
    return rows;
}

inline std::string bench_table_text(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << std::setw(14) << "config" << std::setw(12) << "#molecules" << std::setw(10) << "validity"
       << std::setw(12) << "uniqueness" << std::setw(10) << "novelty" << std::setw(11) << "diversity"
       << std::setw(8) << "QED" << std::setw(12) << "Solubility" << std::setw(8) << "SA"
       << std::setw(10) << "KL(S)" << "\n";
    for (const auto& r : rows) {
        const auto& m = r.report;
        os << std::setw(14) << r.label << std::setw(12) << m.n_valid_unique << std::setw(10)
           << m.validity_pct << std::setw(12) << m.uniqueness_pct << std::setw(10) << m.novelty_pct
           << std::setw(11) << m.diversity << std::setw(8) << m.mean_qed << std::setw(12)
           << m.mean_solubility << std::setw(8) << m.mean_sa << std::setw(10) << m.kl_score << "\n";
    }
    return os.str();
}

// molecule dump: canonical SMILES with per-molecule scores
inline void write_dump(const MetricsReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out.good()) throw IoError("cannot write " + path);
    out << "# smiles qed solubility sa unique\n" << std::setprecision(6) << std::fixed;
    for (const auto& rec : rep.dump)
        out << rec.smiles << " " << rec.qed << " " << rec.solubility << " " << rec.sa << " "
            << (rec.unique ? 1 : 0) << "\n";
}

}  // namespace qmol::evalbench
