#pragma once

// Small dense-network engine: affine + activation + dropout layers, manual
// reverse-mode gradients, Adam, and the WGAN loss pieces (critic losses,
// combined generator loss, gradient penalty with exact double backprop).

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "qmol/common.hpp"

namespace qmol::neural {

enum class Activation : std::uint8_t { Identity, Tanh, Relu, Sigmoid };

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::Relu: return z > 0 ? z : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        default: return z;
    }
}

inline double activate_d1(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Relu: return z > 0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        default: return 1.0;
    }
}

inline double activate_d2(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return -2.0 * t * (1.0 - t * t);
        }
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s) * (1.0 - 2.0 * s);
        }
        default: return 0.0;
    }
}

struct Layer {
    std::size_t in = 0, out = 0;
    Activation act = Activation::Identity;
    double dropout = 0.0;
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;
};

struct DenseNet {
    std::vector<Layer> layers;
    std::uint64_t revision = 0;  // bumped on parameter mutation; guards caches

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += (l.in + 1) * l.out;
        return n;
    }

    static DenseNet make(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output,
                         Activation hidden_act, Activation out_act, Rng& rng, double dropout = 0.0) {
        DenseNet net;
        std::size_t prev = input;
        auto add = [&](std::size_t dim, Activation act, double dr) {
            Layer l;
            l.in = prev;
            l.out = dim;
            l.act = act;
            l.dropout = dr;
            l.w.resize(l.in * l.out);
            l.b.assign(l.out, 0.0);
            const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
            for (auto& x : l.w) x = rng.uniform(-limit, limit);
            net.layers.push_back(std::move(l));
            prev = dim;
        };
        for (std::size_t h : hidden) add(h, hidden_act, dropout);
        add(output, out_act, 0.0);
        return net;
    }
};

struct ForwardCache {
    std::uint64_t revision = 0;
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // z_l
    std::vector<std::vector<double>> post;  // a_l, after activation and dropout
    std::vector<std::vector<double>> mask;  // inverted-dropout masks, empty when not training
    bool training = false;
};

inline std::vector<double> forward(const DenseNet& net, std::span<const double> x, bool training,
                                   Rng& rng, ForwardCache* cache = nullptr) {
    if (x.size() != net.input_dim())
        throw ShapeError("input length " + std::to_string(x.size()) + " != net input " +
                         std::to_string(net.input_dim()));
    if (cache) {
        cache->revision = net.revision;
        cache->input.assign(x.begin(), x.end());
        cache->pre.clear();
        cache->post.clear();
        cache->mask.clear();
        cache->training = training;
    }
    std::vector<double> a(x.begin(), x.end());
    for (const auto& l : net.layers) {
        std::vector<double> z(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            double s = l.b[o];
            const double* wr = &l.w[o * l.in];
            for (std::size_t i = 0; i < l.in; ++i) s += wr[i] * a[i];
            z[o] = s;
        }
        std::vector<double> h(l.out);
        for (std::size_t o = 0; o < l.out; ++o) h[o] = activate(l.act, z[o]);
        std::vector<double> m;
        if (training && l.dropout > 0.0) {
            m.resize(l.out);
            const double keep = 1.0 - l.dropout;
            for (std::size_t o = 0; o < l.out; ++o) {
                m[o] = rng.uniform() < l.dropout ? 0.0 : 1.0 / keep;
                h[o] *= m[o];
            }
        }
        if (cache) {
            cache->pre.push_back(z);
            cache->post.push_back(h);
            cache->mask.push_back(std::move(m));
        }
        a = std::move(h);
    }
    return a;
}

inline std::vector<double> forward(const DenseNet& net, std::span<const double> x) {
    Rng dummy(0);
    return forward(net, x, false, dummy);
}

struct Gradients {
    std::vector<std::vector<double>> dw, db;
    std::vector<double> dx;

    static Gradients zeros_like(const DenseNet& net) {
        Gradients g;
        for (const auto& l : net.layers) {
            g.dw.emplace_back(l.in * l.out, 0.0);
            g.db.emplace_back(l.out, 0.0);
        }
        g.dx.assign(net.input_dim(), 0.0);
        return g;
    }

    void scale(double s) {
        for (auto& v : dw)
            for (auto& x : v) x *= s;
        for (auto& v : db)
            for (auto& x : v) x *= s;
        for (auto& x : dx) x *= s;
    }
};

// Accumulates exact reverse-mode gradients for one sample into `into`.
inline void backward_accumulate(const DenseNet& net, const ForwardCache& cache,
                                std::span<const double> upstream, Gradients& into) {
    if (cache.revision != net.revision || cache.pre.size() != net.layers.size() ||
        cache.input.size() != net.input_dim())
        throw CacheMismatchError("forward cache does not match this network");
    if (upstream.size() != net.output_dim()) throw ShapeError("upstream length mismatch");

    std::vector<double> da(upstream.begin(), upstream.end());
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& l = net.layers[li];
        const auto& z = cache.pre[li];
        const std::vector<double>& a_prev = li == 0 ? cache.input : cache.post[li - 1];
        const auto& m = cache.mask[li];
        std::vector<double> dz(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            double g = da[o];
            if (!m.empty()) g *= m[o];
            dz[o] = g * activate_d1(l.act, z[o]);
        }
        auto& dw = into.dw[li];
        auto& db = into.db[li];
        for (std::size_t o = 0; o < l.out; ++o) {
            const double g = dz[o];
            double* dwr = &dw[o * l.in];
            for (std::size_t i = 0; i < l.in; ++i) dwr[i] += g * a_prev[i];
            db[o] += g;
        }
        std::vector<double> da_prev(l.in, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
            const double g = dz[o];
            const double* wr = &l.w[o * l.in];
            for (std::size_t i = 0; i < l.in; ++i) da_prev[i] += wr[i] * g;
        }
        da = std::move(da_prev);
    }
    for (std::size_t i = 0; i < da.size(); ++i) into.dx[i] += da[i];
}

inline Gradients backward(const DenseNet& net, const ForwardCache& cache,
                          std::span<const double> upstream) {
    Gradients g = Gradients::zeros_like(net);
    backward_accumulate(net, cache, upstream, g);
    return g;
}

// -- Adam ----------------------------------------------------------------

struct AdamState {
    double lr = 1e-3, beta1 = 0.5, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m, v;

    static AdamState for_shapes(const std::vector<std::size_t>& shapes, double lr) {
        AdamState s;
        s.lr = lr;
        for (std::size_t n : shapes) {
            s.m.emplace_back(n, 0.0);
            s.v.emplace_back(n, 0.0);
        }
        return s;
    }

    static AdamState for_net(const DenseNet& net, double lr) {
        std::vector<std::size_t> shapes;
        for (const auto& l : net.layers) {
            shapes.push_back(l.w.size());
            shapes.push_back(l.b.size());
        }
        return for_shapes(shapes, lr);
    }

    void update(std::vector<std::span<double>> params, std::vector<std::span<const double>> grads) {
        if (params.size() != m.size() || grads.size() != m.size())
            throw ShapeError("adam: array count mismatch");
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t a = 0; a < params.size(); ++a) {
            if (params[a].size() != m[a].size() || grads[a].size() != m[a].size())
                throw ShapeError("adam: shape mismatch");
            for (std::size_t i = 0; i < params[a].size(); ++i) {
                const double g = grads[a][i];
                m[a][i] = beta1 * m[a][i] + (1.0 - beta1) * g;
                v[a][i] = beta2 * v[a][i] + (1.0 - beta2) * g * g;
                const double mh = m[a][i] / bc1;
                const double vh = v[a][i] / bc2;
                params[a][i] -= lr * mh / (std::sqrt(vh) + eps);
            }
        }
    }
};

inline std::vector<std::span<double>> param_views(DenseNet& net) {
    std::vector<std::span<double>> v;
    for (auto& l : net.layers) {
        v.emplace_back(l.w);
        v.emplace_back(l.b);
    }
    return v;
}

inline std::vector<std::span<const double>> grad_views(const Gradients& g) {
    std::vector<std::span<const double>> v;
    for (std::size_t i = 0; i < g.dw.size(); ++i) {
        v.emplace_back(g.dw[i]);
        v.emplace_back(g.db[i]);
    }
    return v;
}

inline void adam_step(AdamState& state, DenseNet& net, const Gradients& grads) {
    state.update(param_views(net), grad_views(grads));
    ++net.revision;
}

// -- GAN losses -------------------------------------------------------------

struct WganLosses {
    double d_loss;  // mean(fake) - mean(real); caller adds any penalty term
    double g_loss;  // -mean(fake)
};

inline WganLosses wgan_losses(const std::vector<double>& d_real, const std::vector<double>& d_fake) {
    if (d_real.empty() || d_fake.empty()) throw ArityError("wgan_losses: empty batch");
    const double mr = mean_of(d_real), mf = mean_of(d_fake);
    return {mf - mr, -mf};
}

inline double combined_generator_loss(double l_wgan, double l_rl, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
    return alpha * l_wgan + (1.0 - alpha) * l_rl;
}

// -- gradient penalty ---------------------------------------------------------

struct PenaltyResult {
    double penalty = 0.0;
    Gradients grads;  // d penalty / d discriminator parameters, batch mean
};

namespace detail {

// Adds d(u . grad_x D(x)) / d theta for one sample: a tangent forward pass in
// direction u, then reverse over the joint primal+tangent graph.
inline void penalty_param_grads(const DenseNet& net, const ForwardCache& cache,
                                const std::vector<double>& u, Gradients& into) {
    const std::size_t L = net.layers.size();
    std::vector<std::vector<double>> tz(L), ta(L);
    const std::vector<double>* ta_prev = &u;
    for (std::size_t li = 0; li < L; ++li) {
        const Layer& l = net.layers[li];
        tz[li].assign(l.out, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
            const double* wr = &l.w[o * l.in];
            double s = 0.0;
            for (std::size_t i = 0; i < l.in; ++i) s += wr[i] * (*ta_prev)[i];
            tz[li][o] = s;
        }
        ta[li].assign(l.out, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) ta[li][o] = activate_d1(l.act, cache.pre[li][o]) * tz[li][o];
        ta_prev = &ta[li];
    }

    std::vector<double> adj_ta(net.output_dim(), 1.0);  // scalar critic output
    std::vector<double> adj_a(net.output_dim(), 0.0);
    for (std::size_t li = L; li-- > 0;) {
        const Layer& l = net.layers[li];
        const auto& z = cache.pre[li];
        const std::vector<double>& a_prev = li == 0 ? cache.input : cache.post[li - 1];
        const std::vector<double>& ta_in = li == 0 ? u : ta[li - 1];
        std::vector<double> adj_tz(l.out), adj_z(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            adj_tz[o] = adj_ta[o] * activate_d1(l.act, z[o]);
            adj_z[o] = adj_ta[o] * tz[li][o] * activate_d2(l.act, z[o]) + adj_a[o] * activate_d1(l.act, z[o]);
        }
        auto& dw = into.dw[li];
        auto& db = into.db[li];
        for (std::size_t o = 0; o < l.out; ++o) {
            double* dwr = &dw[o * l.in];
            for (std::size_t i = 0; i < l.in; ++i) dwr[i] += adj_tz[o] * ta_in[i] + adj_z[o] * a_prev[i];
            db[o] += adj_z[o];
        }
        std::vector<double> next_adj_ta(l.in, 0.0), next_adj_a(l.in, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
            const double* wr = &l.w[o * l.in];
            for (std::size_t i = 0; i < l.in; ++i) {
                next_adj_ta[i] += wr[i] * adj_tz[o];
                next_adj_a[i] += wr[i] * adj_z[o];
            }
        }
        adj_ta = std::move(next_adj_ta);
        adj_a = std::move(next_adj_a);
    }
}

}  // namespace detail

// lambda * mean over random interpolates of (|grad_x D(x_hat)|_2 - 1)^2,
// with exact parameter gradients (double backprop). Critic output must be
// scalar and dropout is bypassed on this path.
inline PenaltyResult gradient_penalty(const DenseNet& disc,
                                      const std::vector<std::vector<double>>& real_batch,
                                      const std::vector<std::vector<double>>& fake_batch,
                                      double lambda, Rng& rng) {
    if (real_batch.empty() || fake_batch.empty()) throw ArityError("gradient_penalty: empty batch");
    if (disc.output_dim() != 1) throw ShapeError("gradient penalty expects a scalar critic");
    const std::size_t n = std::min(real_batch.size(), fake_batch.size());
    PenaltyResult res;
    res.grads = Gradients::zeros_like(disc);
    Rng dummy(0);
    for (std::size_t s = 0; s < n; ++s) {
        const double epsl = rng.uniform();
        std::vector<double> x(disc.input_dim());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = epsl * real_batch[s][i] + (1.0 - epsl) * fake_batch[s][i];

        ForwardCache cache;
        forward(disc, x, false, dummy, &cache);
        Gradients g1 = backward(disc, cache, std::vector<double>{1.0});
        double norm2 = 0.0;
        for (double v : g1.dx) norm2 += v * v;
        const double norm = std::sqrt(norm2);
        res.penalty += lambda * (norm - 1.0) * (norm - 1.0);

        if (norm > 1e-12) {
            const double coef = 2.0 * lambda * (norm - 1.0) / norm;
            std::vector<double> u(g1.dx.size());
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = coef * g1.dx[i];
            detail::penalty_param_grads(disc, cache, u, res.grads);
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    res.penalty *= inv;
    res.grads.scale(inv);
    return res;
}

}  // namespace qmol::neural
