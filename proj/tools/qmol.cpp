// Command-line front end: corpus ingestion, model training, sampling and
// evaluation, A/B comparison, appendix-style sweeps, gradient self-checks,
// and sample-corpus generation.
//
// Exit codes: 0 success, 1 failed check or internal error, 2 I/O error,
// 3 empty corpus, 4 invalid flag combination or config error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "qmol/evalbench.hpp"

using namespace qmol;
using nlohmann::json;

namespace {

constexpr const char* kDataDirEnv = "QMOL_DATA_DIR";

std::string resolve_data_path(const std::string& path) {
    namespace fs = std::filesystem;
    if (fs::exists(path)) return path;
    if (const char* dir = std::getenv(kDataDirEnv)) {
        const auto candidate = fs::path(dir) / path;
        if (fs::exists(candidate)) return candidate.string();
    }
    return path;
}

dataset::Corpus load_corpus(const std::string& raw_path, const std::string& format) {
    const std::string path = resolve_data_path(raw_path);
    if (path.size() > 4 && path.substr(path.size() - 4) == ".bin") return dataset::cache_read(path);
    const auto fmt = (format == "sdf" || (format.empty() && path.size() > 4 && path.substr(path.size() - 4) == ".sdf"))
                         ? dataset::Format::SdfSubset
                         : dataset::Format::SmilesLines;
    return dataset::ingest(path, fmt).corpus;
}

void write_json(const json& j, const std::string& path) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path);
    if (!out.good()) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
}

// Config-file merge with precedence defaults < file < explicit flags.
// Values land directly in the bound variables through per-key setters.
struct ConfigBinding {
    std::map<std::string, std::function<void(const json&)>> setters;

    template <typename T>
    void bind(const std::string& key, T& target) {
        setters[key] = [&target](const json& v) {
            if constexpr (std::is_same_v<T, std::string>) target = v.get<std::string>();
            else target = v.get<T>();
        };
    }

    void apply(CLI::App* cmd, const std::string& config_path, json& merged) const {
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        if (!in.good()) throw IoError("cannot read config file: " + config_path);
        json file_cfg = json::parse(in, nullptr, true, true);
        for (auto& [key, value] : file_cfg.items()) {
            const auto it = setters.find(key);
            CLI::Option* opt = cmd->get_option_no_throw("--" + key);
            if (it == setters.end() || !opt) throw ConfigError("config file sets unknown option: " + key);
            if (opt->count() > 0) continue;  // explicit flag wins
            it->second(value);
            merged[key] = value;
        }
    }
};

gan::Variant parse_variant(const std::string& s) { return gan::variant_from_name(s); }

gan::GenComplexity parse_complexity(const std::string& s) {
    if (s == "full") return gan::GenComplexity::Full;
    if (s == "hr") return gan::GenComplexity::HR;
    if (s == "er") return gan::GenComplexity::ER;
    throw ConfigError("unknown complexity: " + s);
}

gan::CcSize parse_cc(const std::string& s) {
    if (s == "er") return gan::CcSize::ER;
    if (s == "hr") return gan::CcSize::HR;
    if (s == "nr") return gan::CcSize::NR;
    throw ConfigError("unknown cc size: " + s);
}

struct EvalArtifacts {
    evalbench::MetricsReport report;
    json meta;
};

EvalArtifacts load_eval_dir(const std::string& dir) {
    EvalArtifacts a;
    std::ifstream rj(dir + "/report.json");
    if (!rj.good()) throw IoError("missing report.json under " + dir);
    a.meta = json::parse(rj);
    std::ifstream dj(dir + "/dump.smi");
    if (!dj.good()) throw IoError("missing dump.smi under " + dir);
    std::string line;
    while (std::getline(dj, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        evalbench::MoleculeRecord rec;
        int uniq = 0;
        ss >> rec.smiles >> rec.qed >> rec.solubility >> rec.sa >> uniq;
        rec.unique = uniq != 0;
        a.report.dump.push_back(rec);
    }
    a.report.n_samples = a.meta.value("n_samples", std::size_t{0});
    a.report.n_valid = a.meta.value("n_valid", std::size_t{0});
    a.report.n_valid_unique = a.meta.value("n_valid_unique", std::size_t{0});
    a.report.validity_pct = a.meta.value("validity_pct", 0.0);
    a.report.uniqueness_pct = a.meta.value("uniqueness_pct", 0.0);
    a.report.novelty_pct = a.meta.value("novelty_pct", 0.0);
    a.report.diversity = a.meta.value("diversity", 0.0);
    a.report.mean_qed = a.meta.value("mean_qed", 0.0);
    a.report.mean_solubility = a.meta.value("mean_solubility", 0.0);
    a.report.mean_sa = a.meta.value("mean_sa", 0.0);
    a.report.kl_score = a.meta.value("kl_score", 0.0);
    return a;
}

int run_gradcheck(int trials, std::uint64_t seed) {
    Rng rng(seed);
    auto random_angles = [&rng](int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = rng.uniform(0.0, 2 * M_PI);
        return v;
    };
    int failures = 0;
    long checks = 0;
    for (int t = 0; t < trials; ++t) {
        for (int which = 0; which < 3; ++which) {
            qsim::ParamCircuit c;
            switch (which) {
                case 0: c = qsim::build_noise_ansatz(3 + static_cast<int>(rng.uniform_index(2)), 1 + static_cast<int>(rng.uniform_index(3))); break;
                case 1: c = qsim::build_patch_ansatz(4, 1 + static_cast<int>(rng.uniform_index(3))); break;
                default: c = qsim::build_entangling_ansatz(3 + static_cast<int>(rng.uniform_index(2)), 1 + static_cast<int>(rng.uniform_index(2))); break;
            }
            const auto z = random_angles(c.n_init);
            const auto theta = random_angles(c.n_params);
            const int qubit = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(c.n_qubits)));
            const auto grad = qsim::param_shift_grad(c, z, theta, qubit);
            for (int k = 0; k < c.n_params; ++k) {
                auto tp = theta, tm = theta;
                const double h = 1e-5;
                tp[static_cast<std::size_t>(k)] += h;
                tm[static_cast<std::size_t>(k)] -= h;
                const double fd = (qsim::expectation_z(qsim::run_circuit(c, z, tp), qubit) -
                                   qsim::expectation_z(qsim::run_circuit(c, z, tm), qubit)) /
                                  (2 * h);
                ++checks;
                if (std::abs(grad[static_cast<std::size_t>(k)] - fd) > 1e-6) ++failures;
            }
        }
    }
    std::cout << "gradcheck: " << checks << " parameter-shift gradients vs finite differences, "
              << failures << " failures\n";
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid quantum-classical molecular GAN laboratory"};
    app.require_subcommand(1);

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "parse a corpus file and optionally cache it");
    std::string ingest_path, ingest_format = "smiles", ingest_cache, ingest_out;
    ingest->add_option("path", ingest_path, "corpus file (SMILES lines or SDF)")->required();
    ingest->add_option("--format", ingest_format, "smiles|sdf")->check(CLI::IsMember({"smiles", "sdf"}));
    ingest->add_option("--cache-out", ingest_cache, "write binary graph cache here");
    ingest->add_option("--out", ingest_out, "directory for the ingest manifest");

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a model variant");
    std::string tr_model = "molgan", tr_complexity = "hr", tr_cc = "nr", tr_corpus, tr_out = "run",
                tr_config;
    int tr_zdim = 8, tr_layers = 3, tr_epochs = 10, tr_batch = 128, tr_dsteps = -1, tr_threads = 1;
    double tr_alpha = 1.0, tr_lr_g = -1, tr_lr_d = -1, tr_lr_qnoise = 0.04, tr_lambda = 10.0,
           tr_temperature = 1.0;
    std::uint64_t tr_seed = 0;
    std::size_t tr_cap = 10000;
    train->add_option("--config", tr_config, "JSON config file (defaults < file < flags)");
    train->add_option("--model", tr_model, "molgan|qumolgan|molgan-qc|molgan-cq|molgan-cc");
    train->add_option("--complexity", tr_complexity, "full|hr|er");
    train->add_option("--cc-size", tr_cc, "er|hr|nr (classical discriminator size)");
    train->add_option("--z-dim", tr_zdim, "noise dimension");
    train->add_option("--layers", tr_layers, "VQC parameterized layers");
    train->add_option("--alpha", tr_alpha, "WGAN/RL trade-off, 1.0 = pure WGAN");
    train->add_option("--epochs", tr_epochs, "training epochs");
    train->add_option("--batch", tr_batch, "batch size");
    train->add_option("--seed", tr_seed, "run seed");
    train->add_option("--corpus", tr_corpus, "corpus path (.smi/.sdf/.bin)")->required();
    train->add_option("--out", tr_out, "output directory");
    train->add_option("--d-steps", tr_dsteps, "critic updates per generator update");
    train->add_option("--lr-g", tr_lr_g, "generator learning rate");
    train->add_option("--lr-d", tr_lr_d, "critic learning rate");
    train->add_option("--lr-qnoise", tr_lr_qnoise, "quantum-noise learning rate");
    train->add_option("--lambda-gp", tr_lambda, "gradient penalty weight");
    train->add_option("--temperature", tr_temperature, "relaxed decode temperature");
    train->add_option("--corpus-cap", tr_cap, "desk-scale corpus cap, 0 = all");
    train->add_option("--threads", tr_threads, "worker cap");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "sample a checkpoint and compute the metric report");
    std::string ev_checkpoint, ev_corpus, ev_out = "eval", ev_basis = "valid", ev_export;
    std::size_t ev_n = 5000;
    std::uint64_t ev_seed = 0;
    eval->add_option("--checkpoint", ev_checkpoint)->required();
    eval->add_option("--corpus", ev_corpus, "training corpus for novelty/KL references")->required();
    eval->add_option("--n", ev_n, "number of noise samples");
    eval->add_option("--seed", ev_seed);
    eval->add_option("--basis", ev_basis, "valid|valid_unique property basis")
        ->check(CLI::IsMember({"valid", "valid_unique"}));
    eval->add_option("--out", ev_out);
    eval->add_option("--export", ev_export, "comma-separated descriptor histograms to export");
    int ev_threads = 1;
    eval->add_option("--threads", ev_threads, "worker cap for metric computation");

    // ---- compare ----
    auto* cmp = app.add_subcommand("compare", "compare two eval output directories");
    std::string cmp_a, cmp_b, cmp_out;
    cmp->add_option("a", cmp_a)->required();
    cmp->add_option("b", cmp_b)->required();
    cmp->add_option("--out", cmp_out, "write comparison.json here");

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "desk-scale appendix sweeps");
    std::string be_sweep = "z_dim", be_corpus, be_out = "bench", be_model = "molgan";
    int be_epochs = 2, be_batch = 128, be_layers = 3;
    std::size_t be_cap = 2000, be_eval_n = 1024;
    std::uint64_t be_seed = 0;
    bench->add_option("--sweep", be_sweep, "complexity|z_dim|layers")
        ->check(CLI::IsMember({"complexity", "z_dim", "layers"}));
    bench->add_option("--corpus", be_corpus)->required();
    bench->add_option("--model", be_model);
    bench->add_option("--epochs", be_epochs);
    bench->add_option("--batch", be_batch);
    bench->add_option("--layers", be_layers);
    bench->add_option("--corpus-cap", be_cap);
    bench->add_option("--eval-n", be_eval_n);
    bench->add_option("--seed", be_seed);
    bench->add_option("--out", be_out);

    // ---- gradcheck ----
    auto* grad = app.add_subcommand("gradcheck", "parameter-shift vs finite-difference self test");
    int gc_trials = 20;
    std::uint64_t gc_seed = 1;
    grad->add_option("--trials", gc_trials);
    grad->add_option("--seed", gc_seed);

    // ---- make-corpus ----
    auto* makec = app.add_subcommand("make-corpus",
                                     "write a seeded corpus of random valid molecules (demo data)");
    std::string mk_out = "sample.smi";
    std::size_t mk_n = 10000;
    std::uint64_t mk_seed = 1;
    makec->add_option("--n", mk_n);
    makec->add_option("--seed", mk_seed);
    makec->add_option("--out", mk_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(ingest)) {
            const auto res = dataset::ingest(resolve_data_path(ingest_path),
                                             ingest_format == "sdf" ? dataset::Format::SdfSubset
                                                                    : dataset::Format::SmilesLines);
            std::cout << "accepted " << res.report.accepted << " of " << res.report.total_records
                      << " records";
            if (!res.report.reason_counts.empty()) {
                std::cout << "; rejections:";
                for (const auto& [reason, count] : res.report.reason_counts)
                    std::cout << " [" << reason << "] " << count;
            }
            std::cout << "\n";
            if (!ingest_cache.empty()) {
                dataset::cache_write(res.corpus, ingest_cache);
                std::cout << "cache written to " << ingest_cache << "\n";
            }
            if (!ingest_out.empty()) {
                json manifest{{"command", "ingest"},
                              {"path", ingest_path},
                              {"format", ingest_format},
                              {"accepted", res.report.accepted},
                              {"total_records", res.report.total_records},
                              {"source_hash", res.corpus.source_hash},
                              {"rejections", res.report.reason_counts}};
                write_json(manifest, ingest_out + "/manifest.json");
            }
            return 0;
        }

        if (app.got_subcommand(train)) {
            json merged;
            ConfigBinding binding;
            binding.bind("model", tr_model);
            binding.bind("complexity", tr_complexity);
            binding.bind("cc-size", tr_cc);
            binding.bind("z-dim", tr_zdim);
            binding.bind("layers", tr_layers);
            binding.bind("alpha", tr_alpha);
            binding.bind("epochs", tr_epochs);
            binding.bind("batch", tr_batch);
            binding.bind("seed", tr_seed);
            binding.bind("corpus", tr_corpus);
            binding.bind("out", tr_out);
            binding.bind("d-steps", tr_dsteps);
            binding.bind("lr-g", tr_lr_g);
            binding.bind("lr-d", tr_lr_d);
            binding.bind("lr-qnoise", tr_lr_qnoise);
            binding.bind("lambda-gp", tr_lambda);
            binding.bind("temperature", tr_temperature);
            binding.bind("corpus-cap", tr_cap);
            binding.bind("threads", tr_threads);
            binding.apply(train, tr_config, merged);

            gan::ModelConfig mc;
            mc.variant = parse_variant(tr_model);
            mc.complexity = parse_complexity(tr_complexity);
            mc.cc_size = parse_cc(tr_cc);
            mc.z_dim = tr_zdim;
            mc.vqc_layers = tr_layers;
            mc.alpha = tr_alpha;
            mc.seed = tr_seed;

            const bool has_quantum = gan::uses_quantum_noise(mc.variant) ||
                                     gan::uses_quantum_generator(mc.variant) ||
                                     gan::uses_quantum_discriminator(mc.variant);
            if (train->count("--layers") > 0 && !has_quantum)
                throw ConfigError("--layers only applies to quantum variants");
            if (train->count("--lr-qnoise") > 0 && !gan::uses_quantum_noise(mc.variant))
                throw ConfigError("--lr-qnoise only applies to qumolgan");

            gan::TrainConfig tc = gan::TrainConfig::defaults_for(mc.variant);
            tc.batch_size = tr_batch;
            tc.epochs = tr_epochs;
            tc.lr_quantum_noise = tr_lr_qnoise;
            if (train->count("--lambda-gp") > 0 || merged.contains("lambda-gp")) tc.lambda_gp = tr_lambda;
            tc.decode_temperature = tr_temperature;
            tc.corpus_cap = tr_cap;
            tc.threads = tr_threads;
            if (tr_dsteps > 0) tc.d_steps_per_g = tr_dsteps;
            if (tr_lr_g > 0) tc.lr_g = tr_lr_g;
            if (tr_lr_d > 0) tc.lr_d = tr_lr_d;

            const auto corpus = load_corpus(tr_corpus, "");
            auto res = gan::train(mc, tc, corpus);
            res.manifest["command"] = "train";
            res.manifest["corpus_path"] = tr_corpus;
            res.manifest["config_file_overrides"] = merged;
            gan::write_run(res, tr_out);
            std::cout << "trained " << tr_model << " for " << tr_epochs << " epochs; final probe validity "
                      << (res.epochs.empty() ? 0.0 : res.epochs.back().probe_validity * 100.0)
                      << "%\ncheckpoint: " << tr_out << "/checkpoint.bin\n";
            return 0;
        }

        if (app.got_subcommand(eval)) {
            gan::Model model = gan::load_checkpoint(ev_checkpoint);
            const auto corpus = load_corpus(ev_corpus, "");
            const auto basis = ev_basis == "valid" ? evalbench::PropertyBasis::Valid
                                                   : evalbench::PropertyBasis::ValidUnique;
            const auto rep = evalbench::sample_and_report(model, corpus, ev_n, ev_seed, basis, ev_threads);
            std::filesystem::create_directories(ev_out);
            write_json(rep.to_json(), ev_out + "/report.json");
            {
                std::ofstream txt(ev_out + "/report.txt");
                txt << rep.to_text();
            }
            evalbench::write_dump(rep, ev_out + "/dump.smi");
            json manifest{{"command", "eval"},       {"checkpoint", ev_checkpoint},
                          {"corpus", ev_corpus},     {"n", ev_n},
                          {"seed", ev_seed},         {"basis", ev_basis}};
            write_json(manifest, ev_out + "/manifest.json");
            if (!ev_export.empty()) {
                std::vector<std::string> names;
                std::istringstream ss(ev_export);
                std::string tok;
                while (std::getline(ss, tok, ',')) names.push_back(tok);
                evalbench::export_distributions(rep, names, ev_out);
            }
            std::cout << rep.to_text();
            return 0;
        }

        if (app.got_subcommand(cmp)) {
            const auto a = load_eval_dir(cmp_a);
            const auto b = load_eval_dir(cmp_b);
            const auto rows = evalbench::compare(a.report, b.report);
            std::cout << evalbench::comparison_text(rows);
            if (!cmp_out.empty()) {
                json j = json::array();
                for (const auto& r : rows)
                    j.push_back({{"metric", r.metric}, {"a", r.a}, {"b", r.b}, {"p_value", r.p_value}});
                write_json(j, cmp_out + "/comparison.json");
            }
            return 0;
        }

        if (app.got_subcommand(bench)) {
            const auto corpus = load_corpus(be_corpus, "");
            gan::ModelConfig base;
            base.variant = parse_variant(be_model);
            base.complexity = gan::GenComplexity::HR;
            base.z_dim = 4;
            base.vqc_layers = be_layers;
            base.seed = be_seed;
            evalbench::Sweep sweep = evalbench::Sweep::ZDim;
            if (be_sweep == "complexity") sweep = evalbench::Sweep::GeneratorComplexity;
            if (be_sweep == "layers") {
                sweep = evalbench::Sweep::VqcLayers;
                base.variant = gan::Variant::QuMolGan;
            }
            gan::TrainConfig desk = gan::TrainConfig::defaults_for(base.variant);
            desk.epochs = be_epochs;
            desk.batch_size = be_batch;
            desk.corpus_cap = be_cap;
            const auto rows = evalbench::bench_appendix(sweep, base, desk, corpus, be_eval_n);
            const std::string table = evalbench::bench_table_text(rows);
            std::cout << table;
            std::filesystem::create_directories(be_out);
            std::ofstream(be_out + "/bench.txt") << table;
            json j = json::array();
            for (const auto& r : rows) {
                json row = r.report.to_json();
                row["config"] = r.label;
                j.push_back(row);
            }
            write_json(j, be_out + "/bench.json");
            return 0;
        }

        if (app.got_subcommand(grad)) return run_gradcheck(gc_trials, gc_seed);

        if (app.got_subcommand(makec)) {
            Rng rng(mk_seed);
            std::ofstream out(mk_out);
            if (!out.good()) throw IoError("cannot write " + mk_out);
            std::set<std::string> seen;
            std::size_t written = 0;
            while (written < mk_n) {
                const auto g = molgraph::random_valid_graph(rng);
                const auto smi = molgraph::to_smiles(g);
                if (!seen.insert(smi).second) continue;
                out << smi << "\n";
                ++written;
            }
            std::cout << "wrote " << written << " molecules to " << mk_out << "\n";
            return 0;
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const EmptyCorpusError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const UnsupportedPenaltyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
