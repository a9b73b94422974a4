#include <catch2/catch.hpp>

#include <cmath>
#include <complex>

#include "dense_oracle.hpp"
#include "qmol/qsim.hpp"

using namespace qmol;
using namespace qmol::qsim;

namespace {

double fd_gradient(const ParamCircuit& c, std::vector<double> z, std::vector<double> theta, int k,
                   int qubit, double h = 1e-5) {
    theta[static_cast<std::size_t>(k)] += h;
    const double ep = expectation_z(run_circuit(c, z, theta), qubit);
    theta[static_cast<std::size_t>(k)] -= 2 * h;
    const double em = expectation_z(run_circuit(c, z, theta), qubit);
    return (ep - em) / (2 * h);
}

std::vector<double> random_angles(Rng& rng, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(0.0, 2 * M_PI);
    return v;
}

}  // namespace

TEST_CASE("gate matrices match the defining equations", "[qsim]") {
    const double t = 0.731;
    const cplx i{0, 1};

    auto rx = single_qubit_matrix(Gate::rx(0, t));
    CHECK(std::abs(rx[0] - cplx{std::cos(t / 2), 0}) < 1e-15);
    CHECK(std::abs(rx[1] - (-i * std::sin(t / 2))) < 1e-15);
    CHECK(std::abs(rx[2] - (-i * std::sin(t / 2))) < 1e-15);
    CHECK(std::abs(rx[3] - cplx{std::cos(t / 2), 0}) < 1e-15);

    auto ry = single_qubit_matrix(Gate::ry(0, t));
    CHECK(std::abs(ry[0] - cplx{std::cos(t / 2), 0}) < 1e-15);
    CHECK(std::abs(ry[1] - cplx{-std::sin(t / 2), 0}) < 1e-15);
    CHECK(std::abs(ry[2] - cplx{std::sin(t / 2), 0}) < 1e-15);

    auto rz = single_qubit_matrix(Gate::rz(0, t));
    CHECK(std::abs(rz[0] - std::exp(-i * (t / 2))) < 1e-15);
    CHECK(std::abs(rz[1]) == 0.0);
    CHECK(std::abs(rz[3] - std::exp(i * (t / 2))) < 1e-15);

    auto cnot = two_qubit_matrix(GateKind::Cnot);
    const double expect_cnot[16] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0};
    for (int k = 0; k < 16; ++k) CHECK(std::abs(cnot[static_cast<std::size_t>(k)] - cplx{expect_cnot[k], 0}) == 0.0);

    auto cz = two_qubit_matrix(GateKind::Cz);
    const double expect_cz[16] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, -1};
    for (int k = 0; k < 16; ++k) CHECK(std::abs(cz[static_cast<std::size_t>(k)] - cplx{expect_cz[k], 0}) == 0.0);
}

TEST_CASE("every gate matrix is unitary", "[qsim]") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = rng.uniform(-7, 7), b = rng.uniform(-7, 7), c = rng.uniform(-7, 7);
        for (const Gate& g :
             {Gate::rx(0, a), Gate::ry(0, b), Gate::rz(0, c), Gate::rot(0, a, b, c)}) {
            const Mat2 u = single_qubit_matrix(g);
            // U^dagger U
            const cplx d00 = std::conj(u[0]) * u[0] + std::conj(u[2]) * u[2];
            const cplx d01 = std::conj(u[0]) * u[1] + std::conj(u[2]) * u[3];
            const cplx d11 = std::conj(u[1]) * u[1] + std::conj(u[3]) * u[3];
            CHECK(std::abs(d00 - cplx{1, 0}) < 1e-12);
            CHECK(std::abs(d01) < 1e-12);
            CHECK(std::abs(d11 - cplx{1, 0}) < 1e-12);
        }
    }
}

TEST_CASE("Rot decomposes as Rz(gamma) Ry(beta) Rz(alpha)", "[qsim]") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = rng.uniform(-6, 6), b = rng.uniform(-6, 6), g = rng.uniform(-6, 6);
        StateVector s1 = StateVector::zero_state(1);
        apply_gate_inplace(s1, Gate::rot(0, a, b, g));
        StateVector s2 = StateVector::zero_state(1);
        apply_gate_inplace(s2, Gate::rz(0, a));
        apply_gate_inplace(s2, Gate::ry(0, b));
        apply_gate_inplace(s2, Gate::rz(0, g));
        for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(s1.amps[k] - s2.amps[k]) < 1e-12);
    }
}

TEST_CASE("apply_gate basics", "[qsim]") {
    SECTION("CNOT(0,1) flips the target when the control is set") {
        StateVector s = StateVector::zero_state(2);
        s.amps[0] = {0, 0};
        s.amps[2] = {1, 0};  // |10>
        s = apply_gate(s, Gate::cnot(0, 1));
        CHECK(std::abs(s.amps[3] - cplx{1, 0}) < 1e-15);  // |11>
    }
    SECTION("RY(pi) sends |0> to |1> up to phase") {
        StateVector s = StateVector::zero_state(1);
        s = apply_gate(s, Gate::ry(0, M_PI));
        CHECK(std::norm(s.amps[1]) == Approx(1.0).margin(1e-12));
    }
    SECTION("invalid qubit index raises") {
        StateVector s = StateVector::zero_state(2);
        CHECK_THROWS_AS(apply_gate(s, Gate::ry(2, 1.0)), InvalidGateError);
        CHECK_THROWS_AS(apply_gate(s, Gate::cnot(0, 0)), InvalidGateError);
    }
    SECTION("norm preserved across a long random gate string") {
        Rng rng(5);
        StateVector s = StateVector::zero_state(4);
        for (int k = 0; k < 300; ++k) {
            const int q = static_cast<int>(rng.uniform_index(4));
            switch (rng.uniform_index(5)) {
                case 0: apply_gate_inplace(s, Gate::rx(q, rng.uniform(-3, 3))); break;
                case 1: apply_gate_inplace(s, Gate::ry(q, rng.uniform(-3, 3))); break;
                case 2: apply_gate_inplace(s, Gate::rz(q, rng.uniform(-3, 3))); break;
                case 3: apply_gate_inplace(s, Gate::rot(q, rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3))); break;
                default: apply_gate_inplace(s, Gate::cnot(q, (q + 1) % 4)); break;
            }
            REQUIRE(std::abs(s.norm_sq() - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("run_circuit", "[qsim]") {
    SECTION("empty circuit leaves |0...0>") {
        ParamCircuit c;
        c.n_qubits = 3;
        const StateVector s = run_circuit(c, {}, {});
        CHECK(std::abs(s.amps[0] - cplx{1, 0}) == 0.0);
    }
    SECTION("noise ansatz with all-zero angles is the identity") {
        const ParamCircuit c = build_noise_ansatz(4, 1);
        const std::vector<double> z(2, 0.0), theta(7, 0.0);
        const StateVector s = run_circuit(c, z, theta);
        CHECK(std::abs(s.amps[0] - cplx{1, 0}) < 1e-12);
    }
    SECTION("patch ansatz matches the dense matrix-chain oracle") {
        Rng rng(77);
        const ParamCircuit c = build_patch_ansatz(4, 1);
        const auto z = random_angles(rng, c.n_init);
        const auto theta = random_angles(rng, c.n_params);
        const StateVector s = run_circuit(c, z, theta);
        const auto ref = oracle::run_dense(c, z, theta);
        for (std::size_t k = 0; k < 16; ++k) CHECK(std::abs(s.amps[k] - ref[k]) < 1e-12);
    }
    SECTION("noise and entangling ansaetze match the oracle too") {
        Rng rng(78);
        for (const ParamCircuit& c : {build_noise_ansatz(3, 2), build_entangling_ansatz(3, 3)}) {
            const auto z = random_angles(rng, c.n_init);
            const auto theta = random_angles(rng, c.n_params);
            const StateVector s = run_circuit(c, z, theta);
            const auto ref = oracle::run_dense(c, z, theta);
            for (std::size_t k = 0; k < s.dim(); ++k) CHECK(std::abs(s.amps[k] - ref[k]) < 1e-12);
        }
    }
    SECTION("arity errors") {
        const ParamCircuit c = build_patch_ansatz(2, 1);
        const std::vector<double> bad(1, 0.0), good2(2, 0.0);
        CHECK_THROWS_AS(run_circuit(c, bad, good2), ArityError);
        CHECK_THROWS_AS(run_circuit(c, good2, bad), ArityError);
    }
    SECTION("deterministic: identical inputs give bit-identical amplitudes") {
        Rng rng(79);
        const ParamCircuit c = build_noise_ansatz(4, 3);
        const auto z = random_angles(rng, c.n_init);
        const auto theta = random_angles(rng, c.n_params);
        const StateVector a = run_circuit(c, z, theta);
        const StateVector b = run_circuit(c, z, theta);
        for (std::size_t k = 0; k < a.dim(); ++k) {
            CHECK(a.amps[k].real() == b.amps[k].real());
            CHECK(a.amps[k].imag() == b.amps[k].imag());
        }
    }
}

TEST_CASE("expectation_z", "[qsim]") {
    SECTION("|0> gives +1") {
        CHECK(expectation_z(StateVector::zero_state(1), 0) == 1.0);
    }
    SECTION("RY(pi/2)|0> gives 0") {
        StateVector s = StateVector::zero_state(1);
        apply_gate_inplace(s, Gate::ry(0, M_PI / 2));
        CHECK(expectation_z(s, 0) == Approx(0.0).margin(1e-10));
    }
    SECTION("GHZ-like state has zero expectation on each qubit") {
        StateVector s = StateVector::zero_state(2);
        apply_gate_inplace(s, Gate::ry(0, M_PI / 2));
        apply_gate_inplace(s, Gate::cnot(0, 1));
        CHECK(expectation_z(s, 0) == Approx(0.0).margin(1e-10));
        CHECK(expectation_z(s, 1) == Approx(0.0).margin(1e-10));
    }
    SECTION("bad index") {
        CHECK_THROWS_AS(expectation_z(StateVector::zero_state(2), 2), InvalidQubitError);
    }
    SECTION("bounded in [-1,1] on random states") {
        Rng rng(31);
        for (int trial = 0; trial < 50; ++trial) {
            const ParamCircuit c = build_entangling_ansatz(4, 2);
            const auto theta = random_angles(rng, c.n_params);
            const StateVector s = run_circuit(c, {}, theta);
            for (int q = 0; q < 4; ++q) {
                const double e = expectation_z(s, q);
                CHECK(e >= -1.0 - 1e-12);
                CHECK(e <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("amplitude_embed", "[qsim]") {
    SECTION("unit basis vector") {
        const std::vector<double> v{1.0};
        const StateVector s = amplitude_embed(v, 2);
        CHECK(std::abs(s.amps[0] - cplx{1, 0}) < 1e-15);
    }
    SECTION("3-4-5 normalization") {
        const std::vector<double> v{3.0, 4.0};
        const StateVector s = amplitude_embed(v, 1);
        CHECK(s.amps[0].real() == Approx(0.6));
        CHECK(s.amps[1].real() == Approx(0.8));
    }
    SECTION("450-entry vector on 9 qubits: probabilities equal v^2/|v|^2") {
        Rng rng(9);
        std::vector<double> v(450);
        for (auto& x : v) x = rng.uniform(-1, 1);
        double n2 = 0.0;
        for (double x : v) n2 += x * x;
        const StateVector s = amplitude_embed(v, 9);
        REQUIRE(s.dim() == 512);
        for (std::size_t k = 0; k < 450; ++k)
            CHECK(std::norm(s.amps[k]) == Approx(v[k] * v[k] / n2).margin(1e-10));
        for (std::size_t k = 450; k < 512; ++k) CHECK(std::norm(s.amps[k]) == 0.0);
    }
    SECTION("all-zero input is degenerate") {
        const std::vector<double> v(8, 0.0);
        CHECK_THROWS_AS(amplitude_embed(v, 3), DegenerateEmbeddingError);
    }
}

TEST_CASE("ansatz builders", "[qsim]") {
    SECTION("noise ansatz counts") {
        CHECK(build_noise_ansatz(4, 1).n_params == 7);
        CHECK(build_noise_ansatz(4, 1).n_init == 2);
        CHECK(build_noise_ansatz(4, 3).n_params == 21);
    }
    SECTION("noise ansatz gate order for two qubits") {
        const ParamCircuit c = build_noise_ansatz(2, 1);
        const GateKind expect[] = {GateKind::Ry, GateKind::Rz, GateKind::Ry, GateKind::Rz,
                                   GateKind::Ry, GateKind::Ry, GateKind::Cnot, GateKind::Rz,
                                   GateKind::Cnot};
        REQUIRE(c.ops.size() == 9);
        for (std::size_t k = 0; k < 9; ++k) CHECK(c.ops[k].kind == expect[k]);
    }
    SECTION("patch ansatz counts and zero-angle identity") {
        const ParamCircuit c = build_patch_ansatz(4, 1);
        CHECK(c.n_params == 4);
        CHECK(c.n_init == 4);
        CHECK(build_patch_ansatz(4, 5).n_params == 20);
        const std::vector<double> z(4, 0.0), theta(4, 0.0);
        const StateVector s = run_circuit(c, z, theta);
        CHECK(std::abs(s.amps[0] - cplx{1, 0}) < 1e-12);
    }
    SECTION("entangling ansatz counts and wiring") {
        CHECK(build_entangling_ansatz(9, 3).n_params == 81);
        const ParamCircuit c = build_entangling_ansatz(4, 2);
        CHECK(c.n_params == 24);
        std::vector<std::pair<int, int>> cnots;
        for (const auto& op : c.ops)
            if (op.kind == GateKind::Cnot) cnots.emplace_back(op.q0, op.q1);
        const std::vector<std::pair<int, int>> expect{{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                                      {0, 2}, {1, 3}, {2, 0}, {3, 1}};
        CHECK(cnots == expect);
    }
    SECTION("entangling ansatz with zero angles fixes |0000>") {
        const ParamCircuit c = build_entangling_ansatz(4, 2);
        const std::vector<double> theta(24, 0.0);
        const StateVector s = run_circuit(c, {}, theta);
        CHECK(std::norm(s.amps[0]) == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("parameter-shift gradients", "[qsim]") {
    SECTION("single RY: d<Z>/dtheta = -sin(theta)") {
        ParamCircuit c;
        c.n_qubits = 1;
        c.n_init = 0;
        c.n_params = 1;
        c.push(GateKind::Ry, 0, 0, {AngleSlot::param(0)});
        std::vector<double> theta{0.0};
        CHECK(param_shift_grad(c, {}, theta, 0)[0] == Approx(0.0).margin(1e-12));
        theta[0] = M_PI / 2;
        CHECK(param_shift_grad(c, {}, theta, 0)[0] == Approx(-1.0).margin(1e-12));
    }
    SECTION("noise ansatz matches finite differences") {
        Rng rng(41);
        const ParamCircuit c = build_noise_ansatz(4, 3);
        const auto z = random_angles(rng, c.n_init);
        const auto theta = random_angles(rng, c.n_params);
        const auto grad = param_shift_grad(c, z, theta, 1);
        for (int k = 0; k < c.n_params; ++k)
            CHECK(grad[static_cast<std::size_t>(k)] == Approx(fd_gradient(c, z, theta, k, 1)).margin(1e-6));
    }
    SECTION("all three builders match finite differences over random draws") {
        Rng rng(42);
        for (int trial = 0; trial < 8; ++trial) {
            for (const ParamCircuit& c : {build_noise_ansatz(3, 2), build_patch_ansatz(4, 2),
                                          build_entangling_ansatz(3, 2)}) {
                const auto z = random_angles(rng, c.n_init);
                const auto theta = random_angles(rng, c.n_params);
                const int qubit = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(c.n_qubits)));
                const auto grad = param_shift_grad(c, z, theta, qubit);
                for (int k = 0; k < c.n_params; ++k)
                    CHECK(grad[static_cast<std::size_t>(k)] ==
                          Approx(fd_gradient(c, z, theta, k, qubit)).margin(1e-6));
            }
        }
    }
    SECTION("jacobian agrees with per-qubit gradients") {
        Rng rng(43);
        const ParamCircuit c = build_patch_ansatz(3, 2);
        const auto z = random_angles(rng, c.n_init);
        const auto theta = random_angles(rng, c.n_params);
        const auto jac = param_shift_jacobian(c, z, theta);
        for (int q = 0; q < 3; ++q) {
            const auto g = param_shift_grad(c, z, theta, q);
            for (int k = 0; k < c.n_params; ++k)
                CHECK(jac[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)] == Approx(g[static_cast<std::size_t>(k)]).margin(1e-12));
        }
    }
    SECTION("init-slot gradients match finite differences (shared slots)") {
        Rng rng(44);
        const ParamCircuit c = build_noise_ansatz(3, 1);
        auto z = random_angles(rng, c.n_init);
        const auto theta = random_angles(rng, c.n_params);
        const auto grad = init_shift_grad(c, z, theta, 0);
        for (int k = 0; k < c.n_init; ++k) {
            const double h = 1e-5;
            auto zp = z, zm = z;
            zp[static_cast<std::size_t>(k)] += h;
            zm[static_cast<std::size_t>(k)] -= h;
            const double fd = (expectation_z(run_circuit(c, zp, theta), 0) -
                               expectation_z(run_circuit(c, zm, theta), 0)) /
                              (2 * h);
            CHECK(grad[static_cast<std::size_t>(k)] == Approx(fd).margin(1e-6));
        }
    }
    SECTION("malformed slot index raises") {
        ParamCircuit c;
        c.n_qubits = 1;
        c.n_params = 1;
        c.push(GateKind::Ry, 0, 0, {AngleSlot::param(3)});
        const std::vector<double> theta{0.0};
        CHECK_THROWS_AS(param_shift_grad(c, {}, theta, 0), UnsupportedParametrizationError);
    }
}

TEST_CASE("embedded input gradient matches finite differences", "[qsim]") {
    Rng rng(51);
    const ParamCircuit c = build_entangling_ansatz(3, 2);
    const auto theta = random_angles(rng, c.n_params);
    std::vector<double> x(6);
    for (auto& v : x) v = rng.uniform(0.05, 1.0);

    const auto grad = embedded_input_grad(c, theta, x, 1);
    auto eval = [&](const std::vector<double>& xx) {
        StateVector s = amplitude_embed(xx, 3);
        apply_circuit_inplace(s, c, {}, theta);
        return expectation_z(s, 1);
    };
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = 1e-6;
        auto xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        CHECK(grad[j] == Approx((eval(xp) - eval(xm)) / (2 * h)).margin(1e-6));
    }

    SECTION("score is invariant to positive input scaling") {
        auto xs = x;
        for (auto& v : xs) v *= 37.5;
        CHECK(eval(xs) == Approx(eval(x)).margin(1e-12));
    }
}

TEST_CASE("circuit text form is stable", "[qsim]") {
    const ParamCircuit c = build_noise_ansatz(2, 1);
    const std::string expect =
        "circuit qubits=2 init=2 params=3\n"
        "RY 0 z0\nRZ 0 z1\nRY 1 z0\nRZ 1 z1\n"
        "RY 0 t0\nRY 1 t1\nCNOT 0 1\nRZ 1 t2\nCNOT 0 1\n";
    CHECK(c.to_text() == expect);
}
