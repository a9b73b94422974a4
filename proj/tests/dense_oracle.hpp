#pragma once

// Test-only oracle: evaluates circuits by building each gate's full
// 2^n x 2^n unitary via Kronecker products and multiplying matrices into the
// state. Independent of the stride-based application path in qsim.hpp.

#include <complex>
#include <vector>

#include "qmol/qsim.hpp"

namespace oracle {

using qmol::qsim::cplx;
using DenseMat = std::vector<std::vector<cplx>>;

inline DenseMat identity(std::size_t n) {
    DenseMat m(n, std::vector<cplx>(n, cplx{0, 0}));
    for (std::size_t i = 0; i < n; ++i) m[i][i] = cplx{1, 0};
    return m;
}

inline DenseMat kron(const DenseMat& a, const DenseMat& b) {
    const std::size_t ra = a.size(), ca = a[0].size(), rb = b.size(), cb = b[0].size();
    DenseMat m(ra * rb, std::vector<cplx>(ca * cb));
    for (std::size_t i = 0; i < ra; ++i)
        for (std::size_t j = 0; j < ca; ++j)
            for (std::size_t k = 0; k < rb; ++k)
                for (std::size_t l = 0; l < cb; ++l) m[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
    return m;
}

inline DenseMat matmul(const DenseMat& a, const DenseMat& b) {
    const std::size_t n = a.size(), m = b[0].size(), k = b.size();
    DenseMat c(n, std::vector<cplx>(m, cplx{0, 0}));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][p] * b[p][j];
    return c;
}

// Full-register unitary of a single gate; qubit 0 is the leftmost kron factor
// (most significant bit), matching the simulator's basis convention.
inline DenseMat full_unitary(const qmol::qsim::Gate& g, int n_qubits) {
    using namespace qmol::qsim;
    if (!is_two_qubit(g.kind)) {
        const Mat2 u = single_qubit_matrix(g);
        DenseMat m = identity(1);
        for (int q = 0; q < n_qubits; ++q) {
            DenseMat f = (q == g.q0) ? DenseMat{{u[0], u[1]}, {u[2], u[3]}} : identity(2);
            m = kron(m, f);
        }
        return m;
    }
    // controlled gate: P0 (x) I + P1 (x) U on (control, target) positions
    DenseMat p0{{cplx{1, 0}, cplx{0, 0}}, {cplx{0, 0}, cplx{0, 0}}};
    DenseMat p1{{cplx{0, 0}, cplx{0, 0}}, {cplx{0, 0}, cplx{1, 0}}};
    DenseMat x{{cplx{0, 0}, cplx{1, 0}}, {cplx{1, 0}, cplx{0, 0}}};
    DenseMat z{{cplx{1, 0}, cplx{0, 0}}, {cplx{0, 0}, cplx{-1, 0}}};
    const DenseMat& u = (g.kind == qmol::qsim::GateKind::Cnot) ? x : z;
    DenseMat a = identity(1), b = identity(1);
    for (int q = 0; q < n_qubits; ++q) {
        a = kron(a, q == g.q0 ? p0 : identity(2));
        DenseMat f = identity(2);
        if (q == g.q0) f = p1;
        else if (q == g.q1) f = u;
        b = kron(b, f);
    }
    DenseMat m = a;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) m[i][j] += b[i][j];
    return m;
}

inline std::vector<cplx> run_dense(const qmol::qsim::ParamCircuit& c, std::span<const double> z,
                                   std::span<const double> theta) {
    using namespace qmol::qsim;
    const std::size_t dim = std::size_t{1} << c.n_qubits;
    std::vector<cplx> state(dim, cplx{0, 0});
    state[0] = cplx{1, 0};
    for (const auto& op : c.ops) {
        const Gate g = qmol::qsim::detail::materialize(op, z, theta);
        const DenseMat u = full_unitary(g, c.n_qubits);
        std::vector<cplx> next(dim, cplx{0, 0});
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) next[i] += u[i][j] * state[j];
        state = next;
    }
    return state;
}

}  // namespace oracle
