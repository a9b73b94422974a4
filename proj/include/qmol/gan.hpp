#pragma once

// Model assembly and training for every noise/generator/discriminator
// combination: Gaussian or VQC noise, dense or patched-VQC generator, MLP or
// 9-qubit quantum discriminator, plus the optional reward-guided loss path.

#include <chrono>
#include <filesystem>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "qmol/chem.hpp"
#include "qmol/dataset.hpp"
#include "qmol/neural.hpp"
#include "qmol/qsim.hpp"
#include "qmol/serial.hpp"
#include "qmol/smiles.hpp"

namespace qmol::gan {

using molgraph::MolecularGraph;
using molgraph::RelaxedGraph;

enum class Variant { MolGan, QuMolGan, MolGanQC, MolGanCQ, MolGanCC };
enum class GenComplexity { Full, HR, ER };
enum class CcSize { ER, HR, NR };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::MolGan: return "molgan";
        case Variant::QuMolGan: return "qumolgan";
        case Variant::MolGanQC: return "molgan-qc";
        case Variant::MolGanCQ: return "molgan-cq";
        default: return "molgan-cc";
    }
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "molgan") return Variant::MolGan;
    if (s == "qumolgan") return Variant::QuMolGan;
    if (s == "molgan-qc") return Variant::MolGanQC;
    if (s == "molgan-cq") return Variant::MolGanCQ;
    if (s == "molgan-cc") return Variant::MolGanCC;
    throw ConfigError("unknown model variant: " + s);
}

inline bool uses_quantum_noise(Variant v) { return v == Variant::QuMolGan; }
inline bool uses_quantum_generator(Variant v) { return v == Variant::MolGanQC; }
inline bool uses_quantum_discriminator(Variant v) { return v == Variant::MolGanCQ; }

constexpr int kPatchQubits = 4;
constexpr int kNumPatches = 113;  // 113 x 4 = 452 expectations, truncated to 450
constexpr double kLogitScale = 10.0;
constexpr int kDiscQubits = 9;
constexpr int kDiscLayers = 3;
constexpr int kDiscMeasureQubit = 2;

struct ModelConfig {
    Variant variant = Variant::MolGan;
    GenComplexity complexity = GenComplexity::HR;
    int z_dim = 8;
    int vqc_layers = 3;
    CcSize cc_size = CcSize::NR;
    double alpha = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (z_dim < 1) throw ConfigError("z_dim must be >= 1");
        if (vqc_layers < 1) throw ConfigError("vqc_layers must be >= 1");
        if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
        if (uses_quantum_noise(variant) && (z_dim < 2 || z_dim > qsim::kMaxQubits))
            throw ConfigError("quantum noise needs z_dim in 2..10 (one qubit per dimension)");
        if (uses_quantum_generator(variant) && z_dim != kPatchQubits)
            throw ConfigError("the patched quantum generator requires z_dim = 4");
    }
};

struct TrainConfig {
    int batch_size = 128;
    int epochs = 10;
    double lr_g = 1e-3;
    double lr_d = 1e-3;
    double lr_quantum_noise = 0.04;
    double lr_reward = 1e-3;  // reward-net regression rate; one step per generator step
    int d_steps_per_g = 3;
    double lambda_gp = 10.0;
    double decode_temperature = 1.0;
    std::size_t corpus_cap = 0;  // 0: use everything
    int threads = 1;

    // D:G = 10:1, the lowered generator rate, and no gradient penalty (the
    // critic's output is bounded by construction) for the quantum
    // discriminator; everything else trains 3:1 with the penalty.
    static TrainConfig defaults_for(Variant v) {
        TrainConfig t;
        if (uses_quantum_discriminator(v)) {
            t.d_steps_per_g = 10;
            t.lr_g = 1e-4;
            t.lambda_gp = 0.0;
        }
        return t;
    }

    void validate() const {
        if (batch_size < 1 || epochs < 0 || d_steps_per_g < 1) throw ConfigError("bad train config");
        if (lr_g <= 0 || lr_d <= 0 || lr_quantum_noise <= 0) throw ConfigError("rates must be positive");
        if (decode_temperature <= 0) throw ConfigError("decode temperature must be positive");
    }
};

// Optional test seams; reward_fn replaces the default reward shaping, and
// freeze_reward_net pins the reward net at a constant output (zero weights,
// no regression updates).
struct TrainHooks {
    std::function<double(const MolecularGraph&, bool valid)> reward_fn;
    bool freeze_reward_net = false;
};

// -- reward ------------------------------------------------------------------

// 0 for invalid graphs, else sqrt(QED * SA); the batch-level uniqueness
// multiplier is applied by the training loop, not here.
inline double reward(const MolecularGraph& g, const chem::SaModel& sa_model) {
    if (!molgraph::is_valid(g)) return 0.0;
    return std::sqrt(chem::qed(g) * chem::sa_norm(g, sa_model));
}

// -- model ---------------------------------------------------------------------

struct Model {
    ModelConfig cfg;
    neural::DenseNet generator;   // classical generator variants
    neural::DenseNet discriminator;
    neural::DenseNet reward_net;
    qsim::ParamCircuit noise_circuit;
    std::vector<double> noise_theta;
    qsim::ParamCircuit patch_circuit;
    std::vector<double> patch_theta;  // kNumPatches x per-patch params, concatenated
    qsim::ParamCircuit disc_circuit;
    std::vector<double> disc_theta;

    int patch_params_each() const { return patch_circuit.n_params; }

    std::size_t generator_param_count() const {
        if (uses_quantum_generator(cfg.variant)) return patch_theta.size();
        return generator.param_count();
    }
    std::size_t discriminator_param_count() const {
        if (uses_quantum_discriminator(cfg.variant)) return disc_theta.size();
        return discriminator.param_count();
    }
};

inline std::vector<std::size_t> generator_hidden(GenComplexity c) {
    switch (c) {
        case GenComplexity::Full: return {128, 256, 512};
        case GenComplexity::HR: return {128};  // lands exactly on 59,202 parameters at z_dim 8
        default: return {16};
    }
}

inline std::vector<std::size_t> discriminator_hidden(CcSize c) {
    switch (c) {
        case CcSize::ER: return {50};
        case CcSize::HR: return {100};
        default: return {150, 50};
    }
}

inline neural::DenseNet build_generator(GenComplexity complexity, int z_dim, Rng& rng) {
    return neural::DenseNet::make(static_cast<std::size_t>(z_dim), generator_hidden(complexity),
                                  molgraph::kFlatLen, neural::Activation::Tanh,
                                  neural::Activation::Identity, rng);
}

inline neural::DenseNet build_classical_discriminator(CcSize cc_size, Rng& rng) {
    return neural::DenseNet::make(molgraph::kFlatLen, discriminator_hidden(cc_size), 1,
                                  neural::Activation::Tanh, neural::Activation::Identity, rng);
}

// Final-layer bias set to the log class marginals of the corpus flattening,
// so fresh generators start near the data's PAD/NONE sparsity instead of a
// uniform category soup.
inline void calibrate_output_bias(neural::DenseNet& generator, const dataset::Corpus& corpus,
                                  std::size_t sample_cap = 2000) {
    if (generator.layers.empty() || corpus.size() == 0) return;
    std::array<double, molgraph::kFlatLen> mean{};
    const std::size_t n = std::min(corpus.size(), sample_cap);
    for (std::size_t k = 0; k < n; ++k) {
        const auto v = molgraph::flatten(corpus.graphs[k]);
        for (int i = 0; i < molgraph::kFlatLen; ++i) mean[static_cast<std::size_t>(i)] += v[static_cast<std::size_t>(i)];
    }
    auto& out = generator.layers.back();
    for (int i = 0; i < molgraph::kFlatLen; ++i)
        out.b[static_cast<std::size_t>(i)] = std::log(mean[static_cast<std::size_t>(i)] / static_cast<double>(n) + 1e-3);
    ++generator.revision;
}

inline Model build_model(const ModelConfig& cfg, const dataset::Corpus* corpus = nullptr) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    Rng rng(hash_mix(cfg.seed, 0xbeefcafe));

    if (uses_quantum_generator(cfg.variant)) {
        m.patch_circuit = qsim::build_patch_ansatz(kPatchQubits, cfg.vqc_layers);
        m.patch_theta.resize(static_cast<std::size_t>(kNumPatches) * static_cast<std::size_t>(m.patch_circuit.n_params));
        for (auto& t : m.patch_theta) t = rng.uniform(0.0, 2 * M_PI);
    } else {
        m.generator = build_generator(cfg.complexity, cfg.z_dim, rng);
        if (corpus) calibrate_output_bias(m.generator, *corpus);
    }

    if (uses_quantum_discriminator(cfg.variant)) {
        m.disc_circuit = qsim::build_entangling_ansatz(kDiscQubits, kDiscLayers);
        m.disc_theta.resize(static_cast<std::size_t>(m.disc_circuit.n_params));
        for (auto& t : m.disc_theta) t = rng.uniform(0.0, 2 * M_PI);
    } else {
        m.discriminator = build_classical_discriminator(cfg.cc_size, rng);
    }

    if (uses_quantum_noise(cfg.variant)) {
        m.noise_circuit = qsim::build_noise_ansatz(cfg.z_dim, cfg.vqc_layers);
        m.noise_theta.resize(static_cast<std::size_t>(m.noise_circuit.n_params));
        for (auto& t : m.noise_theta) t = rng.uniform(0.0, 2 * M_PI);
    }

    m.reward_net = neural::DenseNet::make(molgraph::kFlatLen, {128}, 1, neural::Activation::Tanh,
                                          neural::Activation::Sigmoid, rng);
    return m;
}

// -- noise sampling ---------------------------------------------------------------

struct NoiseBatch {
    std::vector<std::vector<double>> z;           // generator inputs, one row per sample
    std::vector<std::vector<double>> init_angles; // quantum-noise init draws (empty otherwise)
};

inline NoiseBatch sample_noise(const Model& m, std::size_t n, Rng& rng) {
    NoiseBatch batch;
    batch.z.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (uses_quantum_noise(m.cfg.variant)) {
            std::vector<double> init{rng.uniform(0.0, 2 * M_PI), rng.uniform(0.0, 2 * M_PI)};
            const auto state = qsim::run_circuit(m.noise_circuit, init, m.noise_theta);
            batch.z.push_back(qsim::expectations_z_all(state));
            batch.init_angles.push_back(std::move(init));
        } else {
            std::vector<double> z(static_cast<std::size_t>(m.cfg.z_dim));
            for (auto& v : z) v = rng.normal();
            batch.z.push_back(std::move(z));
        }
    }
    return batch;
}

// -- quantum generator (patch method) ---------------------------------------------

// One sample: run every 4-qubit sub-generator on the shared init angles,
// concatenate per-qubit expectations, truncate to 450 and scale to logits.
inline std::array<double, molgraph::kFlatLen> quantum_generator_forward(const Model& m,
                                                                        std::span<const double> init_angles) {
    std::array<double, molgraph::kFlatLen> out{};
    const int per = m.patch_circuit.n_params;
    int pos = 0;
    for (int p = 0; p < kNumPatches && pos < molgraph::kFlatLen; ++p) {
        const std::span<const double> theta(m.patch_theta.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(per),
                                            static_cast<std::size_t>(per));
        const auto state = qsim::run_circuit(m.patch_circuit, init_angles, theta);
        for (int q = 0; q < kPatchQubits && pos < molgraph::kFlatLen; ++q)
            out[static_cast<std::size_t>(pos++)] = kLogitScale * qsim::expectation_z(state, q);
    }
    return out;
}

// d(loss)/d(patch_theta) for one sample given d(loss)/d(logit vector).
// Outputs to other patches' parameters are structurally zero.
inline void quantum_generator_backward(const Model& m, std::span<const double> init_angles,
                                       std::span<const double> dlogits, std::vector<double>& dtheta) {
    const int per = m.patch_circuit.n_params;
    for (int p = 0; p < kNumPatches; ++p) {
        const int base = p * kPatchQubits;
        if (base >= molgraph::kFlatLen) break;
        bool any = false;
        for (int q = 0; q < kPatchQubits && base + q < molgraph::kFlatLen; ++q)
            if (dlogits[static_cast<std::size_t>(base + q)] != 0.0) any = true;
        if (!any) continue;
        const std::span<const double> theta(m.patch_theta.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(per),
                                            static_cast<std::size_t>(per));
        const auto jac = qsim::param_shift_jacobian(m.patch_circuit, init_angles, theta);
        for (int k = 0; k < per; ++k) {
            double acc = 0.0;
            for (int q = 0; q < kPatchQubits && base + q < molgraph::kFlatLen; ++q)
                acc += dlogits[static_cast<std::size_t>(base + q)] * kLogitScale * jac[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
            dtheta[static_cast<std::size_t>(p) * static_cast<std::size_t>(per) + static_cast<std::size_t>(k)] += acc;
        }
    }
}

// -- quantum discriminator ----------------------------------------------------------

inline double quantum_discriminator_forward(const Model& m, std::span<const double> flat450) {
    if (flat450.size() != molgraph::kFlatLen) throw ShapeError("discriminator input must have length 450");
    auto state = qsim::amplitude_embed(flat450, kDiscQubits);
    qsim::apply_circuit_inplace(state, m.disc_circuit, {}, m.disc_theta);
    return qsim::expectation_z(state, kDiscMeasureQubit);
}

inline std::vector<double> quantum_discriminator_theta_grad(const Model& m,
                                                            std::span<const double> flat450) {
    const auto init = qsim::amplitude_embed(flat450, kDiscQubits);
    return qsim::param_shift_grad(m.disc_circuit, {}, m.disc_theta, kDiscMeasureQubit, &init);
}

inline std::vector<double> quantum_discriminator_input_grad(const Model& m,
                                                            std::span<const double> flat450) {
    return qsim::embedded_input_grad(m.disc_circuit, m.disc_theta, flat450, kDiscMeasureQubit);
}

// -- generated batches ----------------------------------------------------------------

struct FakeBatch {
    NoiseBatch noise;
    std::vector<molgraph::GraphLogits> logits;
    std::vector<MolecularGraph> hard;
    std::vector<RelaxedGraph> relaxed;
    std::vector<std::array<double, molgraph::kFlatLen>> flat;  // relaxed flattening
    std::vector<neural::ForwardCache> g_caches;                // classical generator only
};

namespace detail {

inline molgraph::GraphLogits reshape_logits(std::span<const double> v) {
    molgraph::GraphLogits l;
    for (int i = 0; i < molgraph::kMaxAtoms; ++i)
        for (int c = 0; c < molgraph::kAtomClasses; ++c)
            l.atom[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = v[static_cast<std::size_t>(i * 5 + c)];
    for (int i = 0; i < molgraph::kMaxAtoms; ++i)
        for (int j = 0; j < molgraph::kMaxAtoms; ++j)
            for (int c = 0; c < molgraph::kBondClasses; ++c)
                l.bond[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] =
                    v[static_cast<std::size_t>(45 + (i * 9 + j) * 5 + c)];
    return l;
}

// Reverse of gumbel_st decoding: upstream on the relaxed flattening becomes a
// gradient on the generator's 450 raw outputs. Softmax jacobian per slot,
// 1/temperature factor, PAD-forced slots and the diagonal contribute nothing,
// symmetrized bond logits split evenly between (i,j) and (j,i).
inline std::array<double, molgraph::kFlatLen> decode_backward(const RelaxedGraph& relaxed,
                                                              const MolecularGraph& hard,
                                                              std::span<const double> dflat,
                                                              double temperature) {
    std::array<double, molgraph::kFlatLen> dlogits{};
    auto softmax_back = [&](std::span<const double> r, std::span<const double> up, std::span<double> out) {
        double dot = 0.0;
        for (std::size_t c = 0; c < r.size(); ++c) dot += up[c] * r[c];
        for (std::size_t c = 0; c < r.size(); ++c) out[c] = r[c] * (up[c] - dot) / temperature;
    };
    std::array<double, 5> up, dy;
    for (int i = 0; i < molgraph::kMaxAtoms; ++i) {
        for (int c = 0; c < 5; ++c) up[static_cast<std::size_t>(c)] = dflat[static_cast<std::size_t>(i * 5 + c)];
        softmax_back(relaxed.atom[static_cast<std::size_t>(i)], up, dy);
        for (int c = 0; c < 5; ++c) dlogits[static_cast<std::size_t>(i * 5 + c)] = dy[static_cast<std::size_t>(c)];
    }
    for (int i = 0; i < molgraph::kMaxAtoms; ++i)
        for (int j = i + 1; j < molgraph::kMaxAtoms; ++j) {
            if (hard.atoms[static_cast<std::size_t>(i)] == molgraph::Atom::Pad ||
                hard.atoms[static_cast<std::size_t>(j)] == molgraph::Atom::Pad)
                continue;  // forced to NONE, no gradient
            for (int c = 0; c < 5; ++c)
                up[static_cast<std::size_t>(c)] = dflat[static_cast<std::size_t>(45 + (i * 9 + j) * 5 + c)] +
                                                  dflat[static_cast<std::size_t>(45 + (j * 9 + i) * 5 + c)];
            softmax_back(relaxed.bond[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], up, dy);
            for (int c = 0; c < 5; ++c) {
                dlogits[static_cast<std::size_t>(45 + (i * 9 + j) * 5 + c)] = 0.5 * dy[static_cast<std::size_t>(c)];
                dlogits[static_cast<std::size_t>(45 + (j * 9 + i) * 5 + c)] = 0.5 * dy[static_cast<std::size_t>(c)];
            }
        }
    return dlogits;
}

}  // namespace detail

inline FakeBatch generate_batch(Model& m, std::size_t n, Rng& rng, double temperature,
                                bool want_caches) {
    FakeBatch fb;
    fb.noise = sample_noise(m, n, rng);
    Rng dummy(0);
    for (std::size_t s = 0; s < n; ++s) {
        std::array<double, molgraph::kFlatLen> raw{};
        if (uses_quantum_generator(m.cfg.variant)) {
            raw = quantum_generator_forward(m, fb.noise.z[s]);
        } else {
            neural::ForwardCache cache;
            const auto out = neural::forward(m.generator, fb.noise.z[s], false, dummy,
                                             want_caches ? &cache : nullptr);
            std::copy(out.begin(), out.end(), raw.begin());
            if (want_caches) fb.g_caches.push_back(std::move(cache));
        }
        fb.logits.push_back(detail::reshape_logits(raw));
        auto dec = molgraph::decode_graph(fb.logits.back(), molgraph::DecodeMode::GumbelST, temperature,
                                          rng.next_u64());
        fb.flat.push_back(molgraph::flatten(dec.relaxed));
        fb.hard.push_back(dec.graph);
        fb.relaxed.push_back(std::move(dec.relaxed));
    }
    return fb;
}

// Argmax sampling for evaluation probes: returns hard graphs only.
inline std::vector<MolecularGraph> sample_molecules(Model& m, std::size_t n, std::uint64_t seed) {
    Rng rng(hash_mix(seed, 0x5a5a5a5a));
    const NoiseBatch noise = sample_noise(m, n, rng);
    std::vector<MolecularGraph> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::array<double, molgraph::kFlatLen> raw{};
        if (uses_quantum_generator(m.cfg.variant)) {
            raw = quantum_generator_forward(m, noise.z[s]);
        } else {
            const auto o = neural::forward(m.generator, noise.z[s]);
            std::copy(o.begin(), o.end(), raw.begin());
        }
        out.push_back(molgraph::decode_graph(detail::reshape_logits(raw), molgraph::DecodeMode::Argmax,
                                             1.0, 0)
                          .graph);
    }
    return out;
}

// -- checkpoints -----------------------------------------------------------------

namespace detail {

constexpr std::uint32_t kCheckpointMagic = 0x51'4d'43'4b;  // "QMCK"
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_net(serial::Writer& w, const neural::DenseNet& net) {
    w.u64(net.layers.size());
    for (const auto& l : net.layers) {
        w.u64(l.in);
        w.u64(l.out);
        w.u8(static_cast<std::uint8_t>(l.act));
        w.f64(l.dropout);
        w.f64_vec(l.w);
        w.f64_vec(l.b);
    }
}

inline neural::DenseNet read_net(serial::Reader& r) {
    neural::DenseNet net;
    const std::uint64_t n = r.u64();
    for (std::uint64_t k = 0; k < n; ++k) {
        neural::Layer l;
        l.in = r.u64();
        l.out = r.u64();
        l.act = static_cast<neural::Activation>(r.u8());
        l.dropout = r.f64();
        l.w = r.f64_vec();
        l.b = r.f64_vec();
        if (l.w.size() != l.in * l.out || l.b.size() != l.out) throw CorruptCacheError("bad layer shape");
        net.layers.push_back(std::move(l));
    }
    return net;
}

inline void write_adam(serial::Writer& w, const neural::AdamState& a) {
    w.f64(a.lr);
    w.f64(a.beta1);
    w.f64(a.beta2);
    w.f64(a.eps);
    w.u64(static_cast<std::uint64_t>(a.step));
    w.u64(a.m.size());
    for (std::size_t i = 0; i < a.m.size(); ++i) {
        w.f64_vec(a.m[i]);
        w.f64_vec(a.v[i]);
    }
}

inline neural::AdamState read_adam(serial::Reader& r) {
    neural::AdamState a;
    a.lr = r.f64();
    a.beta1 = r.f64();
    a.beta2 = r.f64();
    a.eps = r.f64();
    a.step = static_cast<long>(r.u64());
    const std::uint64_t n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        a.m.push_back(r.f64_vec());
        a.v.push_back(r.f64_vec());
    }
    return a;
}

}  // namespace detail

struct OptimizerBundle {
    neural::AdamState gen, disc, reward;
    neural::AdamState noise_theta, patch_theta, disc_theta;
};

inline void save_checkpoint(const Model& m, const OptimizerBundle* opt, const std::string& path) {
    serial::Writer w(path);
    w.u32(detail::kCheckpointMagic);
    w.u32(detail::kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(m.cfg.variant));
    w.u8(static_cast<std::uint8_t>(m.cfg.complexity));
    w.u32(static_cast<std::uint32_t>(m.cfg.z_dim));
    w.u32(static_cast<std::uint32_t>(m.cfg.vqc_layers));
    w.u8(static_cast<std::uint8_t>(m.cfg.cc_size));
    w.f64(m.cfg.alpha);
    w.u64(m.cfg.seed);
    detail::write_net(w, m.generator);
    detail::write_net(w, m.discriminator);
    detail::write_net(w, m.reward_net);
    w.f64_vec(m.noise_theta);
    w.f64_vec(m.patch_theta);
    w.f64_vec(m.disc_theta);
    w.u8(opt ? 1 : 0);
    if (opt) {
        detail::write_adam(w, opt->gen);
        detail::write_adam(w, opt->disc);
        detail::write_adam(w, opt->reward);
        detail::write_adam(w, opt->noise_theta);
        detail::write_adam(w, opt->patch_theta);
        detail::write_adam(w, opt->disc_theta);
    }
}

inline Model load_checkpoint(const std::string& path, OptimizerBundle* opt = nullptr) {
    serial::Reader r(path);
    if (r.u32() != detail::kCheckpointMagic) throw CorruptCacheError("not a checkpoint file");
    if (r.u32() != detail::kCheckpointVersion) throw CorruptCacheError("unsupported checkpoint version");
    Model m;
    m.cfg.variant = static_cast<Variant>(r.u8());
    m.cfg.complexity = static_cast<GenComplexity>(r.u8());
    m.cfg.z_dim = static_cast<int>(r.u32());
    m.cfg.vqc_layers = static_cast<int>(r.u32());
    m.cfg.cc_size = static_cast<CcSize>(r.u8());
    m.cfg.alpha = r.f64();
    m.cfg.seed = r.u64();
    m.generator = detail::read_net(r);
    m.discriminator = detail::read_net(r);
    m.reward_net = detail::read_net(r);
    m.noise_theta = r.f64_vec();
    m.patch_theta = r.f64_vec();
    m.disc_theta = r.f64_vec();
    if (uses_quantum_noise(m.cfg.variant)) m.noise_circuit = qsim::build_noise_ansatz(m.cfg.z_dim, m.cfg.vqc_layers);
    if (uses_quantum_generator(m.cfg.variant)) m.patch_circuit = qsim::build_patch_ansatz(kPatchQubits, m.cfg.vqc_layers);
    if (uses_quantum_discriminator(m.cfg.variant)) m.disc_circuit = qsim::build_entangling_ansatz(kDiscQubits, kDiscLayers);
    const bool has_opt = r.u8() != 0;
    if (has_opt && opt) {
        opt->gen = detail::read_adam(r);
        opt->disc = detail::read_adam(r);
        opt->reward = detail::read_adam(r);
        opt->noise_theta = detail::read_adam(r);
        opt->patch_theta = detail::read_adam(r);
        opt->disc_theta = detail::read_adam(r);
    }
    return m;
}

// -- training ------------------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double probe_validity = 0.0;
};

struct TrainResult {
    Model model;
    OptimizerBundle optimizers;
    nlohmann::json manifest;
    std::vector<EpochRecord> epochs;
    long critic_steps = 0;
    long generator_steps = 0;
    double quantum_theta_change = 0.0;  // L2 distance of trained vs initial quantum parameters
    double wall_seconds = 0.0;
};

namespace detail {

struct AdamVec {
    neural::AdamState state;
    explicit AdamVec(std::size_t n = 0, double lr = 1e-3) { state = neural::AdamState::for_shapes({n}, lr); }
    void step(std::vector<double>& params, const std::vector<double>& grads) {
        state.update({std::span<double>(params)}, {std::span<const double>(grads)});
    }
};

// Uniqueness ratio within one batch: distinct canonical forms among the
// valid molecules, over the valid count. Zero when nothing is valid.
inline double batch_unique_fraction(const std::vector<MolecularGraph>& hard) {
    std::set<std::string> uniq;
    std::size_t valid = 0;
    for (const auto& g : hard) {
        if (!molgraph::is_valid(g)) continue;
        ++valid;
        uniq.insert(molgraph::to_smiles(g));
    }
    return valid == 0 ? 0.0 : static_cast<double>(uniq.size()) / static_cast<double>(valid);
}

}  // namespace detail

inline nlohmann::json config_json(const ModelConfig& mc, const TrainConfig& tc) {
    return {
        {"variant", variant_name(mc.variant)},
        {"complexity", mc.complexity == GenComplexity::Full ? "full" : (mc.complexity == GenComplexity::HR ? "hr" : "er")},
        {"z_dim", mc.z_dim},
        {"vqc_layers", mc.vqc_layers},
        {"cc_size", mc.cc_size == CcSize::ER ? "er" : (mc.cc_size == CcSize::HR ? "hr" : "nr")},
        {"alpha", mc.alpha},
        {"seed", mc.seed},
        {"batch_size", tc.batch_size},
        {"epochs", tc.epochs},
        {"lr_g", tc.lr_g},
        {"lr_d", tc.lr_d},
        {"lr_quantum_noise", tc.lr_quantum_noise},
        {"d_steps_per_g", tc.d_steps_per_g},
        {"lambda_gp", tc.lambda_gp},
        {"decode_temperature", tc.decode_temperature},
        {"corpus_cap", tc.corpus_cap},
    };
}

// Alternating WGAN loop: d_steps_per_g critic updates per generator update.
// Classical critics get the gradient penalty; the quantum critic trains on
// the plain Wasserstein loss (its output is bounded by construction).
inline TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                         const dataset::Corpus& full_corpus, const TrainHooks& hooks = {}) {
    model_cfg.validate();
    train_cfg.validate();
    if (full_corpus.size() == 0) throw EmptyCorpusError("training corpus is empty");
    if (uses_quantum_discriminator(model_cfg.variant) && train_cfg.lambda_gp > 0.0)
        throw UnsupportedPenaltyError(
            "gradient penalty needs input gradients through the amplitude embedding; "
            "the quantum discriminator trains without it (lambda_gp = 0)");

    const auto t_start = std::chrono::steady_clock::now();

    // desk-scale cap keeps smoke runs small; 0 means the whole corpus
    dataset::Corpus capped;
    const dataset::Corpus* corpus = &full_corpus;
    if (train_cfg.corpus_cap > 0 && full_corpus.size() > train_cfg.corpus_cap) {
        for (std::size_t i = 0; i < train_cfg.corpus_cap; ++i)
            capped.push(full_corpus.graphs[i], full_corpus.canonical[i]);
        capped.source_hash = full_corpus.source_hash;
        corpus = &capped;
    }

    TrainResult res;
    res.model = build_model(model_cfg, corpus);
    Model& m = res.model;

    const bool q_disc = uses_quantum_discriminator(model_cfg.variant);
    const bool q_gen = uses_quantum_generator(model_cfg.variant);
    const bool q_noise = uses_quantum_noise(model_cfg.variant);

    chem::SaModel sa_model;
    auto reward_of = [&](const MolecularGraph& g) {
        const bool valid = molgraph::is_valid(g);
        if (hooks.reward_fn) return hooks.reward_fn(g, valid);
        return reward(g, sa_model);
    };
    if (model_cfg.alpha < 1.0) sa_model = chem::SaModel::from_corpus(corpus->graphs);

    if (hooks.freeze_reward_net) {
        for (auto& l : m.reward_net.layers) {
            std::fill(l.w.begin(), l.w.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        }
        ++m.reward_net.revision;
    }

    const std::vector<double> noise_theta0 = m.noise_theta;
    const std::vector<double> patch_theta0 = m.patch_theta;
    const std::vector<double> disc_theta0 = m.disc_theta;

    neural::AdamState g_opt = neural::AdamState::for_net(m.generator, train_cfg.lr_g);
    neural::AdamState d_opt = neural::AdamState::for_net(m.discriminator, train_cfg.lr_d);
    neural::AdamState r_opt = neural::AdamState::for_net(m.reward_net, train_cfg.lr_reward);
    detail::AdamVec noise_opt(m.noise_theta.size(), train_cfg.lr_quantum_noise);
    detail::AdamVec patch_opt(m.patch_theta.size(), train_cfg.lr_g);
    detail::AdamVec qdisc_opt(m.disc_theta.size(), train_cfg.lr_g);  // quantum thetas ride the generator rate

    Rng rng(hash_mix(model_cfg.seed, 0x7e417a11));
    dataset::BatchStream batches(corpus->size(), static_cast<std::size_t>(train_cfg.batch_size), model_cfg.seed);

    Rng dummy(0);
    long critic_steps_since_g = 0;

    auto critic_scores = [&](const std::vector<std::array<double, molgraph::kFlatLen>>& xs,
                             std::vector<neural::ForwardCache>* caches) {
        std::vector<double> out;
        out.reserve(xs.size());
        for (const auto& x : xs) {
            if (q_disc) {
                out.push_back(quantum_discriminator_forward(m, x));
            } else {
                neural::ForwardCache c;
                out.push_back(neural::forward(m.discriminator, x, false, dummy, caches ? &c : nullptr)[0]);
                if (caches) caches->push_back(std::move(c));
            }
        }
        return out;
    };

    auto guard_finite = [&](double v, const char* what, int epoch) {
        if (!std::isfinite(v)) {
            nlohmann::json dump = config_json(model_cfg, train_cfg);
            dump["diverged_at_epoch"] = epoch;
            dump["quantity"] = what;
            throw DivergenceError("non-finite " + std::string(what) + " at epoch " +
                                  std::to_string(epoch) + ": " + dump.dump());
        }
        return v;
    };

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        double d_loss_sum = 0.0, g_loss_sum = 0.0;
        long d_steps = 0, g_steps = 0;
        const std::size_t per_epoch = batches.batches_per_epoch();
        for (std::size_t bi = 0; bi < per_epoch; ++bi) {
            const auto idx = batches.next();
            std::vector<std::array<double, molgraph::kFlatLen>> real;
            real.reserve(idx.size());
            for (std::size_t i : idx) real.push_back(molgraph::flatten(corpus->graphs[i]));

            // ---- critic update ----
            {
                FakeBatch fake = generate_batch(m, real.size(), rng, train_cfg.decode_temperature, false);
                std::vector<neural::ForwardCache> rc, fc;
                const auto d_real = critic_scores(real, q_disc ? nullptr : &rc);
                const auto d_fake = critic_scores(fake.flat, q_disc ? nullptr : &fc);
                const auto losses = neural::wgan_losses(d_real, d_fake);
                double d_loss = losses.d_loss;

                if (q_disc) {
                    // per-sample shift evaluations fan out; the reduction
                    // order is fixed, so results match serial execution
                    std::vector<std::vector<double>> gr(real.size()), gf(real.size());
                    parallel_for(real.size(), train_cfg.threads, [&](std::size_t s) {
                        gr[s] = quantum_discriminator_theta_grad(m, real[s]);
                        gf[s] = quantum_discriminator_theta_grad(m, fake.flat[s]);
                    });
                    std::vector<double> dtheta(m.disc_theta.size(), 0.0);
                    const double inv = 1.0 / static_cast<double>(real.size());
                    for (std::size_t s = 0; s < real.size(); ++s)
                        for (std::size_t k = 0; k < dtheta.size(); ++k) dtheta[k] += inv * (gf[s][k] - gr[s][k]);
                    qdisc_opt.step(m.disc_theta, dtheta);
                } else {
                    neural::Gradients grads = neural::Gradients::zeros_like(m.discriminator);
                    const double inv = 1.0 / static_cast<double>(real.size());
                    for (std::size_t s = 0; s < real.size(); ++s) {
                        neural::backward_accumulate(m.discriminator, rc[s], std::vector<double>{-inv}, grads);
                        neural::backward_accumulate(m.discriminator, fc[s], std::vector<double>{inv}, grads);
                    }
                    if (train_cfg.lambda_gp > 0.0) {
                        std::vector<std::vector<double>> rv, fv;
                        for (std::size_t s = 0; s < real.size(); ++s) {
                            rv.emplace_back(real[s].begin(), real[s].end());
                            fv.emplace_back(fake.flat[s].begin(), fake.flat[s].end());
                        }
                        auto gp = neural::gradient_penalty(m.discriminator, rv, fv, train_cfg.lambda_gp, rng);
                        d_loss += gp.penalty;
                        for (std::size_t li = 0; li < grads.dw.size(); ++li) {
                            for (std::size_t k = 0; k < grads.dw[li].size(); ++k) grads.dw[li][k] += gp.grads.dw[li][k];
                            for (std::size_t k = 0; k < grads.db[li].size(); ++k) grads.db[li][k] += gp.grads.db[li][k];
                        }
                    }
                    neural::adam_step(d_opt, m.discriminator, grads);
                }
                d_loss_sum += guard_finite(d_loss, "critic loss", epoch);
                ++d_steps;
                ++critic_steps_since_g;
            }

            // ---- generator update after every d_steps_per_g critic updates ----
            if (critic_steps_since_g >= train_cfg.d_steps_per_g) {
                critic_steps_since_g = 0;
                FakeBatch fake = generate_batch(m, static_cast<std::size_t>(train_cfg.batch_size), rng,
                                                train_cfg.decode_temperature, !q_gen);
                std::vector<neural::ForwardCache> fc;
                const auto d_fake = critic_scores(fake.flat, q_disc ? nullptr : &fc);
                const double l_wgan = -mean_of(d_fake);

                double l_rl = 0.0;
                double unique_frac = 0.0;
                std::vector<neural::ForwardCache> reward_caches(fake.flat.size());
                if (model_cfg.alpha < 1.0) {
                    if (!hooks.freeze_reward_net) {
                        // one squared-error refresh on the current real+fake batch;
                        // fakes contribute both their relaxed encoding (the input the
                        // generator differentiates through) and the exact one-hot of
                        // the decoded graph, so predictions stay anchored on-manifold
                        neural::Gradients rgrads = neural::Gradients::zeros_like(m.reward_net);
                        const std::size_t nb = std::min(real.size(), fake.flat.size());
                        const double scale = 2.0 / static_cast<double>(3 * nb);
                        for (std::size_t s = 0; s < nb; ++s) {
                            neural::ForwardCache c;
                            const double pred = neural::forward(m.reward_net, real[s], false, dummy, &c)[0];
                            const double target = reward_of(corpus->graphs[idx[s]]);
                            neural::backward_accumulate(m.reward_net, c,
                                                        std::vector<double>{scale * (pred - target)}, rgrads);
                            const double targetf = reward_of(fake.hard[s]);
                            neural::ForwardCache cf;
                            const double predf = neural::forward(m.reward_net, fake.flat[s], false, dummy, &cf)[0];
                            neural::backward_accumulate(m.reward_net, cf,
                                                        std::vector<double>{scale * (predf - targetf)}, rgrads);
                            const auto hard_flat = molgraph::flatten(fake.hard[s]);
                            neural::ForwardCache ch;
                            const double predh = neural::forward(m.reward_net, hard_flat, false, dummy, &ch)[0];
                            neural::backward_accumulate(m.reward_net, ch,
                                                        std::vector<double>{scale * (predh - targetf)}, rgrads);
                        }
                        neural::adam_step(r_opt, m.reward_net, rgrads);
                    }

                    unique_frac = detail::batch_unique_fraction(fake.hard);
                    double mean_pred = 0.0;
                    for (std::size_t s = 0; s < fake.flat.size(); ++s) {
                        mean_pred += neural::forward(m.reward_net, fake.flat[s], false, dummy, &reward_caches[s])[0];
                    }
                    mean_pred /= static_cast<double>(fake.flat.size());
                    l_rl = -unique_frac * mean_pred;
                }
                const double g_loss = neural::combined_generator_loss(l_wgan, l_rl, model_cfg.alpha);
                g_loss_sum += guard_finite(g_loss, "generator loss", epoch);
                ++g_steps;

                // gradient w.r.t. each fake sample's relaxed flattening
                const double inv = 1.0 / static_cast<double>(fake.flat.size());
                neural::Gradients ggrads = neural::Gradients::zeros_like(m.generator);
                std::vector<double> dpatch(m.patch_theta.size(), 0.0);
                std::vector<double> dnoise(m.noise_theta.size(), 0.0);
                for (std::size_t s = 0; s < fake.flat.size(); ++s) {
                    std::vector<double> dflat(molgraph::kFlatLen, 0.0);
                    if (model_cfg.alpha > 0.0) {
                        std::vector<double> dx;
                        if (q_disc) {
                            dx = quantum_discriminator_input_grad(m, fake.flat[s]);
                        } else {
                            dx = neural::backward(m.discriminator, fc[s], std::vector<double>{1.0}).dx;
                        }
                        const double w = model_cfg.alpha * (-inv);
                        for (int k = 0; k < molgraph::kFlatLen; ++k) dflat[static_cast<std::size_t>(k)] += w * dx[static_cast<std::size_t>(k)];
                    }
                    if (model_cfg.alpha < 1.0) {
                        const auto dr = neural::backward(m.reward_net, reward_caches[s], std::vector<double>{1.0}).dx;
                        const double w = (1.0 - model_cfg.alpha) * (-unique_frac * inv);
                        for (int k = 0; k < molgraph::kFlatLen; ++k) dflat[static_cast<std::size_t>(k)] += w * dr[static_cast<std::size_t>(k)];
                    }
                    const auto dlogits = detail::decode_backward(fake.relaxed[s], fake.hard[s], dflat,
                                                                 train_cfg.decode_temperature);
                    if (q_gen) {
                        quantum_generator_backward(m, fake.noise.z[s], dlogits, dpatch);
                    } else {
                        neural::backward_accumulate(m.generator, fake.g_caches[s],
                                                    std::vector<double>(dlogits.begin(), dlogits.end()), ggrads);
                        if (q_noise) {
                            const auto& cache = fake.g_caches[s];
                            const auto gg = neural::backward(m.generator, cache,
                                                             std::vector<double>(dlogits.begin(), dlogits.end()));
                            const auto jac = qsim::param_shift_jacobian(m.noise_circuit, fake.noise.init_angles[s],
                                                                        m.noise_theta);
                            for (std::size_t k = 0; k < dnoise.size(); ++k) {
                                double acc = 0.0;
                                for (int q = 0; q < m.cfg.z_dim; ++q)
                                    acc += gg.dx[static_cast<std::size_t>(q)] * jac[k][static_cast<std::size_t>(q)];
                                dnoise[k] += acc;
                            }
                        }
                    }
                }
                if (q_gen) patch_opt.step(m.patch_theta, dpatch);
                else neural::adam_step(g_opt, m.generator, ggrads);
                if (q_noise) noise_opt.step(m.noise_theta, dnoise);
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.d_loss = d_steps ? d_loss_sum / static_cast<double>(d_steps) : 0.0;
        rec.g_loss = g_steps ? g_loss_sum / static_cast<double>(g_steps) : 0.0;
        const auto probe = sample_molecules(m, 512, hash_mix(model_cfg.seed, 0x9206be00 + static_cast<std::uint64_t>(epoch)));
        std::size_t valid = 0;
        for (const auto& g : probe)
            if (molgraph::is_valid(g)) ++valid;
        rec.probe_validity = static_cast<double>(valid) / static_cast<double>(probe.size());
        res.epochs.push_back(rec);
        res.critic_steps += d_steps;
        res.generator_steps += g_steps;
    }

    auto l2_change = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return std::sqrt(s);
    };
    res.quantum_theta_change = l2_change(noise_theta0, m.noise_theta) +
                               l2_change(patch_theta0, m.patch_theta) + l2_change(disc_theta0, m.disc_theta);

    res.manifest = config_json(model_cfg, train_cfg);
    res.manifest["corpus_size"] = corpus->size();
    res.manifest["corpus_source_hash"] = corpus->source_hash;
    res.manifest["generator_parameters"] = m.generator_param_count();
    res.manifest["discriminator_parameters"] = m.discriminator_param_count();
    res.manifest["quantum_theta_change"] = res.quantum_theta_change;
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& e : res.epochs)
        eps.push_back({{"epoch", e.epoch}, {"d_loss", e.d_loss}, {"g_loss", e.g_loss}, {"probe_validity", e.probe_validity}});
    res.manifest["epoch_log"] = eps;

    res.optimizers = OptimizerBundle{g_opt, d_opt, r_opt, noise_opt.state, patch_opt.state, qdisc_opt.state};

    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

// Writes checkpoint + manifest (+ a timing sidecar, kept out of the manifest
// so reruns are bit-identical) under out_dir.
inline void write_run(const TrainResult& res, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    save_checkpoint(res.model, &res.optimizers, out_dir + "/checkpoint.bin");
    std::ofstream mf(out_dir + "/manifest.json");
    mf << res.manifest.dump(2) << "\n";
    std::ofstream tf(out_dir + "/timing.txt");
    tf << "wall_seconds " << res.wall_seconds << "\n";
}

}  // namespace qmol::gan
