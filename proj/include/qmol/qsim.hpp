#pragma once

// Dense statevector simulator for small registers (n <= 10), with the three
// circuit families used by the models (noise ansatz, patch sub-generator
// ansatz, strongly entangling layers) and parameter-shift gradients.

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qmol/common.hpp"

namespace qmol::qsim {

using cplx = std::complex<double>;

constexpr int kMaxQubits = 10;

// Basis convention: qubit 0 is the most significant bit of the amplitude
// index, so |q0 q1 ... q_{n-1}> reads left to right.
struct StateVector {
    int n_qubits = 0;
    std::vector<cplx> amps;

    static StateVector zero_state(int n) {
        if (n < 1 || n > kMaxQubits) throw InvalidQubitError("qubit count out of range: " + std::to_string(n));
        StateVector s;
        s.n_qubits = n;
        s.amps.assign(std::size_t{1} << n, cplx{0.0, 0.0});
        s.amps[0] = cplx{1.0, 0.0};
        return s;
    }

    std::size_t dim() const { return amps.size(); }

    double norm_sq() const {
        double t = 0.0;
        for (const auto& a : amps) t += std::norm(a);
        return t;
    }
};

enum class GateKind : std::uint8_t { Cnot, Cz, Rx, Ry, Rz, Rot };

inline bool is_two_qubit(GateKind k) { return k == GateKind::Cnot || k == GateKind::Cz; }
inline int angle_count(GateKind k) {
    switch (k) {
        case GateKind::Rot: return 3;
        case GateKind::Rx:
        case GateKind::Ry:
        case GateKind::Rz: return 1;
        default: return 0;
    }
}

// A gate with concrete angles. q0 is the control for two-qubit kinds and the
// target otherwise; Rot carries (alpha, beta, gamma).
struct Gate {
    GateKind kind;
    int q0 = 0;
    int q1 = 0;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;

    static Gate cnot(int control, int target) { return {GateKind::Cnot, control, target}; }
    static Gate cz(int control, int target) { return {GateKind::Cz, control, target}; }
    static Gate rx(int qubit, double theta) { return {GateKind::Rx, qubit, 0, theta}; }
    static Gate ry(int qubit, double theta) { return {GateKind::Ry, qubit, 0, theta}; }
    static Gate rz(int qubit, double theta) { return {GateKind::Rz, qubit, 0, theta}; }
    static Gate rot(int qubit, double alpha, double beta, double gamma) {
        return {GateKind::Rot, qubit, 0, alpha, beta, gamma};
    }
};

using Mat2 = std::array<cplx, 4>;   // row-major 2x2
using Mat4 = std::array<cplx, 16>;  // row-major 4x4

inline Mat2 single_qubit_matrix(const Gate& g) {
    const cplx i{0.0, 1.0};
    switch (g.kind) {
        case GateKind::Rx: {
            double c = std::cos(g.a0 / 2), s = std::sin(g.a0 / 2);
            return {cplx{c, 0}, -i * s, -i * s, cplx{c, 0}};
        }
        case GateKind::Ry: {
            double c = std::cos(g.a0 / 2), s = std::sin(g.a0 / 2);
            return {cplx{c, 0}, cplx{-s, 0}, cplx{s, 0}, cplx{c, 0}};
        }
        case GateKind::Rz: {
            return {std::exp(-i * (g.a0 / 2)), cplx{0, 0}, cplx{0, 0}, std::exp(i * (g.a0 / 2))};
        }
        case GateKind::Rot: {
            // R(alpha, beta, gamma) = Rz(gamma) Ry(beta) Rz(alpha)
            double cb = std::cos(g.a1 / 2), sb = std::sin(g.a1 / 2);
            cplx epm = std::exp(-i * ((g.a0 + g.a2) / 2));
            cplx epp = std::exp(i * ((g.a0 + g.a2) / 2));
            cplx emd = std::exp(-i * ((g.a0 - g.a2) / 2));
            cplx epd = std::exp(i * ((g.a0 - g.a2) / 2));
            return {epm * cb, -epd * sb, emd * sb, epp * cb};
        }
        default: throw InvalidGateError("not a single-qubit gate");
    }
}

inline Mat4 two_qubit_matrix(GateKind k) {
    Mat4 m{};
    m[0] = m[5] = cplx{1, 0};
    if (k == GateKind::Cnot) {
        m[11] = m[14] = cplx{1, 0};  // swap |10> and |11>
    } else if (k == GateKind::Cz) {
        m[10] = cplx{1, 0};
        m[15] = cplx{-1, 0};
    } else {
        throw InvalidGateError("not a two-qubit gate");
    }
    return m;
}

namespace detail {

inline void check_qubit(const StateVector& s, int q) {
    if (q < 0 || q >= s.n_qubits) throw InvalidGateError("qubit index " + std::to_string(q) + " out of range");
}

inline void apply_single(StateVector& s, int qubit, const Mat2& u) {
    const std::size_t n = s.dim();
    const std::size_t stride = std::size_t{1} << (s.n_qubits - 1 - qubit);
    const std::size_t block = stride << 1;
    for (std::size_t base = 0; base < n; base += block) {
        for (std::size_t off = 0; off < stride; ++off) {
            const std::size_t i0 = base + off;
            const std::size_t i1 = i0 + stride;
            const cplx a = s.amps[i0], b = s.amps[i1];
            s.amps[i0] = u[0] * a + u[1] * b;
            s.amps[i1] = u[2] * a + u[3] * b;
        }
    }
}

inline void apply_cnot(StateVector& s, int control, int target) {
    const std::size_t cbit = std::size_t{1} << (s.n_qubits - 1 - control);
    const std::size_t tbit = std::size_t{1} << (s.n_qubits - 1 - target);
    for (std::size_t i = 0; i < s.dim(); ++i) {
        if ((i & cbit) && !(i & tbit)) std::swap(s.amps[i], s.amps[i | tbit]);
    }
}

inline void apply_cz(StateVector& s, int control, int target) {
    const std::size_t cbit = std::size_t{1} << (s.n_qubits - 1 - control);
    const std::size_t tbit = std::size_t{1} << (s.n_qubits - 1 - target);
    for (std::size_t i = 0; i < s.dim(); ++i) {
        if ((i & cbit) && (i & tbit)) s.amps[i] = -s.amps[i];
    }
}

}  // namespace detail

inline void apply_gate_inplace(StateVector& state, const Gate& g) {
    detail::check_qubit(state, g.q0);
    if (is_two_qubit(g.kind)) {
        detail::check_qubit(state, g.q1);
        if (g.q0 == g.q1) throw InvalidGateError("control equals target");
        if (g.kind == GateKind::Cnot)
            detail::apply_cnot(state, g.q0, g.q1);
        else
            detail::apply_cz(state, g.q0, g.q1);
    } else {
        detail::apply_single(state, g.q0, single_qubit_matrix(g));
    }
}

inline StateVector apply_gate(const StateVector& state, const Gate& g) {
    StateVector out = state;
    apply_gate_inplace(out, g);
    return out;
}

inline Gate inverse(const Gate& g) {
    switch (g.kind) {
        case GateKind::Cnot:
        case GateKind::Cz: return g;
        case GateKind::Rot: return Gate::rot(g.q0, -g.a2, -g.a1, -g.a0);
        default: {
            Gate h = g;
            h.a0 = -g.a0;
            return h;
        }
    }
}

// <Z_qubit> = sum over basis states of (+1 / -1) |amp|^2, sign by the bit.
inline double expectation_z(const StateVector& state, int qubit) {
    if (qubit < 0 || qubit >= state.n_qubits)
        throw InvalidQubitError("qubit index " + std::to_string(qubit) + " out of range");
    const std::size_t bit = std::size_t{1} << (state.n_qubits - 1 - qubit);
    double e = 0.0;
    for (std::size_t i = 0; i < state.dim(); ++i) {
        const double p = std::norm(state.amps[i]);
        e += (i & bit) ? -p : p;
    }
    return std::clamp(e, -1.0, 1.0);  // rounding must not leak past the bound
}

inline std::vector<double> expectations_z_all(const StateVector& state) {
    std::vector<double> e(state.n_qubits);
    for (int q = 0; q < state.n_qubits; ++q) e[q] = expectation_z(state, q);
    return e;
}

// v padded with zeros to 2^n, then L2-normalized into amplitudes.
inline StateVector amplitude_embed(std::span<const double> v, int n_qubits) {
    StateVector s = StateVector::zero_state(n_qubits);
    if (v.size() > s.dim())
        throw ArityError("embedding vector longer than 2^n_qubits");
    double nrm2 = 0.0;
    for (double x : v) nrm2 += x * x;
    if (nrm2 <= 0.0) throw DegenerateEmbeddingError("cannot embed the all-zero vector");
    const double inv = 1.0 / std::sqrt(nrm2);
    s.amps[0] = cplx{0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i) s.amps[i] = cplx{v[i] * inv, 0.0};
    return s;
}

// -- parameterized circuits ----------------------------------------------

enum class SlotKind : std::uint8_t { Constant, Init, Param };

struct AngleSlot {
    SlotKind kind = SlotKind::Constant;
    int index = 0;
    double constant = 0.0;

    static AngleSlot c(double v) { return {SlotKind::Constant, 0, v}; }
    static AngleSlot init(int i) { return {SlotKind::Init, i, 0.0}; }
    static AngleSlot param(int i) { return {SlotKind::Param, i, 0.0}; }
};

struct CircuitOp {
    GateKind kind;
    int q0 = 0;
    int q1 = 0;
    std::array<AngleSlot, 3> angles{};
};

struct ParamCircuit {
    int n_qubits = 0;
    int n_init = 0;
    int n_params = 0;
    std::vector<CircuitOp> ops;

    void push(GateKind kind, int q0, int q1, std::initializer_list<AngleSlot> slots = {}) {
        CircuitOp op{kind, q0, q1, {}};
        int i = 0;
        for (const auto& s : slots) op.angles[i++] = s;
        ops.push_back(op);
    }

    // Gate list with slot tags, one op per line; used for golden tests.
    std::string to_text() const;
};

namespace detail {

inline double resolve(const AngleSlot& s, std::span<const double> z, std::span<const double> theta) {
    switch (s.kind) {
        case SlotKind::Constant: return s.constant;
        case SlotKind::Init: return z[static_cast<std::size_t>(s.index)];
        case SlotKind::Param: return theta[static_cast<std::size_t>(s.index)];
    }
    return 0.0;
}

inline Gate materialize(const CircuitOp& op, std::span<const double> z, std::span<const double> theta) {
    Gate g{op.kind, op.q0, op.q1};
    const int na = angle_count(op.kind);
    if (na > 0) g.a0 = resolve(op.angles[0], z, theta);
    if (na > 1) g.a1 = resolve(op.angles[1], z, theta);
    if (na > 2) g.a2 = resolve(op.angles[2], z, theta);
    return g;
}

inline void validate_slots(const ParamCircuit& c) {
    for (const auto& op : c.ops) {
        const int na = angle_count(op.kind);
        for (int i = 0; i < na; ++i) {
            const auto& s = op.angles[i];
            if (s.kind == SlotKind::Init && (s.index < 0 || s.index >= c.n_init))
                throw UnsupportedParametrizationError("init slot index out of range");
            if (s.kind == SlotKind::Param && (s.index < 0 || s.index >= c.n_params))
                throw UnsupportedParametrizationError("param slot index out of range");
        }
    }
}

}  // namespace detail

inline void apply_circuit_inplace(StateVector& state, const ParamCircuit& circuit,
                                  std::span<const double> z, std::span<const double> theta) {
    if (static_cast<int>(z.size()) != circuit.n_init)
        throw ArityError("init vector length " + std::to_string(z.size()) + " != n_init " +
                         std::to_string(circuit.n_init));
    if (static_cast<int>(theta.size()) != circuit.n_params)
        throw ArityError("param vector length " + std::to_string(theta.size()) + " != n_params " +
                         std::to_string(circuit.n_params));
    detail::validate_slots(circuit);
    for (const auto& op : circuit.ops) apply_gate_inplace(state, detail::materialize(op, z, theta));
}

inline StateVector run_circuit(const ParamCircuit& circuit, std::span<const double> z,
                               std::span<const double> theta) {
    StateVector s = StateVector::zero_state(circuit.n_qubits);
    apply_circuit_inplace(s, circuit, z, theta);
    return s;
}

// -- ansatz builders -------------------------------------------------------

// Noise-generator ansatz: Ry(z1) Rz(z2) init on every qubit (the two init
// slots are shared across qubits), then per layer Ry(theta) on every qubit
// followed by CNOT(i,i+1) Rz(theta) CNOT(i,i+1) on each adjacent pair.
inline ParamCircuit build_noise_ansatz(int n_qubits, int layers) {
    if (n_qubits < 2 || n_qubits > kMaxQubits) throw ConfigError("noise ansatz needs 2..10 qubits");
    if (layers < 1) throw ConfigError("layers must be >= 1");
    ParamCircuit c;
    c.n_qubits = n_qubits;
    c.n_init = 2;
    int p = 0;
    for (int q = 0; q < n_qubits; ++q) {
        c.push(GateKind::Ry, q, 0, {AngleSlot::init(0)});
        c.push(GateKind::Rz, q, 0, {AngleSlot::init(1)});
    }
    for (int l = 0; l < layers; ++l) {
        for (int q = 0; q < n_qubits; ++q) c.push(GateKind::Ry, q, 0, {AngleSlot::param(p++)});
        for (int q = 0; q + 1 < n_qubits; ++q) {
            c.push(GateKind::Cnot, q, q + 1);
            c.push(GateKind::Rz, q + 1, 0, {AngleSlot::param(p++)});
            c.push(GateKind::Cnot, q, q + 1);
        }
    }
    c.n_params = p;
    return c;
}

// Patch sub-generator ansatz: per-qubit Ry(z_i) init with independent slots,
// then per layer Ry(theta) on every qubit followed by a CZ chain.
inline ParamCircuit build_patch_ansatz(int n_qubits, int layers) {
    if (n_qubits < 2 || n_qubits > kMaxQubits) throw ConfigError("patch ansatz needs 2..10 qubits");
    if (layers < 1) throw ConfigError("layers must be >= 1");
    ParamCircuit c;
    c.n_qubits = n_qubits;
    c.n_init = n_qubits;
    int p = 0;
    for (int q = 0; q < n_qubits; ++q) c.push(GateKind::Ry, q, 0, {AngleSlot::init(q)});
    for (int l = 0; l < layers; ++l) {
        for (int q = 0; q < n_qubits; ++q) c.push(GateKind::Ry, q, 0, {AngleSlot::param(p++)});
        for (int q = 0; q + 1 < n_qubits; ++q) c.push(GateKind::Cz, q, q + 1);
    }
    c.n_params = p;
    return c;
}

// Strongly entangling layers: per layer, Rot(alpha,beta,gamma) on every qubit
// then CNOT(i, (i + r) mod n) with range r = ((layer-1) mod (n-1)) + 1.
inline ParamCircuit build_entangling_ansatz(int n_qubits, int layers) {
    if (n_qubits < 2 || n_qubits > kMaxQubits) throw ConfigError("entangling ansatz needs 2..10 qubits");
    if (layers < 1) throw ConfigError("layers must be >= 1");
    ParamCircuit c;
    c.n_qubits = n_qubits;
    c.n_init = 0;
    int p = 0;
    for (int l = 1; l <= layers; ++l) {
        for (int q = 0; q < n_qubits; ++q) {
            c.push(GateKind::Rot, q, 0,
                   {AngleSlot::param(p), AngleSlot::param(p + 1), AngleSlot::param(p + 2)});
            p += 3;
        }
        const int r = ((l - 1) % (n_qubits - 1)) + 1;
        for (int q = 0; q < n_qubits; ++q) c.push(GateKind::Cnot, q, (q + r) % n_qubits);
    }
    c.n_params = p;
    return c;
}

// -- gradients --------------------------------------------------------------

namespace detail {

// Run the circuit with one specific angle occurrence shifted by delta.
inline StateVector run_shifted(const ParamCircuit& circuit, std::span<const double> z,
                               std::span<const double> theta, std::size_t op_index, int angle_pos,
                               double delta, const StateVector* initial = nullptr) {
    StateVector s = initial ? *initial : StateVector::zero_state(circuit.n_qubits);
    for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
        Gate g = materialize(circuit.ops[i], z, theta);
        if (i == op_index) {
            if (angle_pos == 0) g.a0 += delta;
            else if (angle_pos == 1) g.a1 += delta;
            else g.a2 += delta;
        }
        apply_gate_inplace(s, g);
    }
    return s;
}

struct ParamUse {
    std::size_t op_index;
    int angle_pos;
};

inline std::vector<std::vector<ParamUse>> param_occurrences(const ParamCircuit& circuit) {
    validate_slots(circuit);
    std::vector<std::vector<ParamUse>> occ(static_cast<std::size_t>(circuit.n_params));
    for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
        const auto& op = circuit.ops[i];
        const int na = angle_count(op.kind);
        for (int a = 0; a < na; ++a) {
            if (op.angles[a].kind == SlotKind::Param)
                occ[static_cast<std::size_t>(op.angles[a].index)].push_back({i, a});
        }
    }
    return occ;
}

}  // namespace detail

// d<Z_observable>/d theta_k via the parameter-shift rule. Parameters that tag
// several rotation angles accumulate one +-pi/2 shift pair per occurrence.
// `initial` overrides the |0...0> start state (used after amplitude embedding).
inline std::vector<double> param_shift_grad(const ParamCircuit& circuit, std::span<const double> z,
                                            std::span<const double> theta, int observable_qubit,
                                            const StateVector* initial = nullptr) {
    if (observable_qubit < 0 || observable_qubit >= circuit.n_qubits)
        throw InvalidQubitError("observable qubit out of range");
    if (static_cast<int>(z.size()) != circuit.n_init || static_cast<int>(theta.size()) != circuit.n_params)
        throw ArityError("z/theta length mismatch in param_shift_grad");
    const auto occ = detail::param_occurrences(circuit);
    std::vector<double> grad(static_cast<std::size_t>(circuit.n_params), 0.0);
    for (int k = 0; k < circuit.n_params; ++k) {
        for (const auto& use : occ[static_cast<std::size_t>(k)]) {
            const auto plus = detail::run_shifted(circuit, z, theta, use.op_index, use.angle_pos, M_PI / 2, initial);
            const auto minus = detail::run_shifted(circuit, z, theta, use.op_index, use.angle_pos, -M_PI / 2, initial);
            grad[static_cast<std::size_t>(k)] +=
                (expectation_z(plus, observable_qubit) - expectation_z(minus, observable_qubit)) / 2.0;
        }
    }
    return grad;
}

// Jacobian d<Z_q>/d theta_k for every qubit at once: one shift pair per
// parameter occurrence, all expectations read from the same shifted states.
inline std::vector<std::vector<double>> param_shift_jacobian(const ParamCircuit& circuit,
                                                             std::span<const double> z,
                                                             std::span<const double> theta) {
    if (static_cast<int>(z.size()) != circuit.n_init || static_cast<int>(theta.size()) != circuit.n_params)
        throw ArityError("z/theta length mismatch in param_shift_jacobian");
    const auto occ = detail::param_occurrences(circuit);
    std::vector<std::vector<double>> jac(static_cast<std::size_t>(circuit.n_params),
                                         std::vector<double>(static_cast<std::size_t>(circuit.n_qubits), 0.0));
    for (int k = 0; k < circuit.n_params; ++k) {
        for (const auto& use : occ[static_cast<std::size_t>(k)]) {
            const auto plus = detail::run_shifted(circuit, z, theta, use.op_index, use.angle_pos, M_PI / 2);
            const auto minus = detail::run_shifted(circuit, z, theta, use.op_index, use.angle_pos, -M_PI / 2);
            for (int q = 0; q < circuit.n_qubits; ++q)
                jac[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)] +=
                    (expectation_z(plus, q) - expectation_z(minus, q)) / 2.0;
        }
    }
    return jac;
}

// Same shift rule, but for the two shared init slots of an init layer.
inline std::vector<double> init_shift_grad(const ParamCircuit& circuit, std::span<const double> z,
                                           std::span<const double> theta, int observable_qubit) {
    detail::validate_slots(circuit);
    std::vector<double> grad(static_cast<std::size_t>(circuit.n_init), 0.0);
    for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
        const auto& op = circuit.ops[i];
        const int na = angle_count(op.kind);
        for (int a = 0; a < na; ++a) {
            if (op.angles[a].kind != SlotKind::Init) continue;
            const auto plus = detail::run_shifted(circuit, z, theta, i, a, M_PI / 2);
            const auto minus = detail::run_shifted(circuit, z, theta, i, a, -M_PI / 2);
            grad[static_cast<std::size_t>(op.angles[a].index)] +=
                (expectation_z(plus, observable_qubit) - expectation_z(minus, observable_qubit)) / 2.0;
        }
    }
    return grad;
}

// Gradient of <Z_q> w.r.t. the raw (unnormalized) embedded input vector, for
// circuits applied after amplitude embedding. Adjoint method: with M = U'ZU,
// dE/dx_j = (2/|x|) (Re(y_j) - E psi_j) where y = U'(Z U psi), psi = x/|x|.
inline std::vector<double> embedded_input_grad(const ParamCircuit& circuit, std::span<const double> theta,
                                               std::span<const double> x, int observable_qubit) {
    StateVector psi = amplitude_embed(x, circuit.n_qubits);
    double nrm = 0.0;
    for (double v : x) nrm += v * v;
    nrm = std::sqrt(nrm);

    StateVector phi = psi;
    apply_circuit_inplace(phi, circuit, {}, theta);
    const double e = expectation_z(phi, observable_qubit);

    // y = U^dagger (Z phi)
    StateVector y = phi;
    const std::size_t bit = std::size_t{1} << (circuit.n_qubits - 1 - observable_qubit);
    for (std::size_t i = 0; i < y.dim(); ++i)
        if (i & bit) y.amps[i] = -y.amps[i];
    for (auto it = circuit.ops.rbegin(); it != circuit.ops.rend(); ++it)
        apply_gate_inplace(y, inverse(detail::materialize(*it, {}, theta)));

    std::vector<double> grad(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        grad[j] = (2.0 / nrm) * (y.amps[j].real() - e * psi.amps[j].real());
    return grad;
}

// -- text form ----------------------------------------------------------------

inline std::string ParamCircuit::to_text() const {
    static const char* names[] = {"CNOT", "CZ", "RX", "RY", "RZ", "ROT"};
    std::ostringstream os;
    os << "circuit qubits=" << n_qubits << " init=" << n_init << " params=" << n_params << "\n";
    for (const auto& op : ops) {
        os << names[static_cast<int>(op.kind)];
        if (is_two_qubit(op.kind)) {
            os << " " << op.q0 << " " << op.q1;
        } else {
            os << " " << op.q0;
            const int na = angle_count(op.kind);
            for (int a = 0; a < na; ++a) {
                const auto& s = op.angles[a];
                if (s.kind == SlotKind::Init) os << " z" << s.index;
                else if (s.kind == SlotKind::Param) os << " t" << s.index;
                else os << " c" << s.constant;
            }
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace qmol::qsim
