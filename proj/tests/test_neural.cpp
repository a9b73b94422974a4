#include <catch2/catch.hpp>

#include <cmath>
#include <numeric>

#include "qmol/neural.hpp"

using namespace qmol;
using namespace qmol::neural;

namespace {

// independent dense-algebra oracle: inner_product-based, layer by layer
std::vector<double> oracle_forward(const DenseNet& net, const std::vector<double>& x) {
    std::vector<double> a = x;
    for (const auto& l : net.layers) {
        std::vector<double> next(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            next[o] = activate(l.act, std::inner_product(a.begin(), a.end(), l.w.begin() + static_cast<long>(o * l.in),
                                                         l.b[o]));
        }
        a = next;
    }
    return a;
}

DenseNet random_net(Rng& rng, std::size_t in, std::vector<std::size_t> hidden, std::size_t out,
                    Activation hact = Activation::Tanh, Activation oact = Activation::Identity) {
    return DenseNet::make(in, hidden, out, hact, oact, rng);
}

double scalar_loss(const DenseNet& net, const std::vector<double>& x) {
    const auto y = forward(net, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (static_cast<double>(i) + 1.0) * y[i];
    return s;
}

}  // namespace

TEST_CASE("forward pass", "[neural]") {
    SECTION("identity-weight single layer maps x to x") {
        DenseNet net;
        Layer l;
        l.in = l.out = 3;
        l.act = Activation::Identity;
        l.w.assign(9, 0.0);
        for (int i = 0; i < 3; ++i) l.w[static_cast<std::size_t>(i * 3 + i)] = 1.0;
        l.b.assign(3, 0.0);
        net.layers.push_back(l);
        const std::vector<double> x{0.3, -1.7, 2.0};
        CHECK(forward(net, x) == x);
    }
    SECTION("dropout rate 0: training on/off agree") {
        Rng rng(3);
        const auto net = random_net(rng, 4, {8}, 2);
        const std::vector<double> x{0.1, 0.2, -0.3, 0.4};
        Rng r1(9), r2(10);
        CHECK(forward(net, x, true, r1) == forward(net, x, false, r2));
    }
    SECTION("random 3-layer net matches the dense-algebra oracle") {
        Rng rng(4);
        const auto net = random_net(rng, 5, {7, 6}, 3);
        std::vector<double> x(5);
        for (auto& v : x) v = rng.normal();
        const auto got = forward(net, x);
        const auto ref = oracle_forward(net, x);
        for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == Approx(ref[i]).margin(1e-12));
    }
    SECTION("dimension mismatch raises") {
        Rng rng(5);
        const auto net = random_net(rng, 4, {}, 1);
        CHECK_THROWS_AS(forward(net, std::vector<double>{1.0}), ShapeError);
    }
    SECTION("dropout scales by 1/keep and zeroes dropped units") {
        Rng rng(6);
        auto net = DenseNet::make(2, {64}, 1, Activation::Identity, Activation::Identity, rng, 0.5);
        const std::vector<double> x{1.0, -0.5};
        Rng train_rng(7);
        ForwardCache cache;
        forward(net, x, true, train_rng, &cache);
        int dropped = 0;
        for (double m : cache.mask[0]) {
            CHECK((m == 0.0 || m == Approx(2.0)));
            if (m == 0.0) ++dropped;
        }
        CHECK(dropped > 10);
        CHECK(dropped < 54);
    }
}

TEST_CASE("backward pass", "[neural]") {
    SECTION("gradients match finite differences on random architectures") {
        Rng rng(11);
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t in = 2 + rng.uniform_index(4);
            std::vector<std::size_t> hidden;
            for (std::uint64_t h = rng.uniform_index(3); h-- > 0;) hidden.push_back(2 + rng.uniform_index(5));
            const std::size_t out = 1 + rng.uniform_index(3);
            const Activation hact = trial % 2 ? Activation::Tanh : Activation::Relu;
            auto net = random_net(rng, in, hidden, out, hact,
                                  trial % 3 ? Activation::Identity : Activation::Sigmoid);
            std::vector<double> x(in);
            for (auto& v : x) v = rng.normal() + 0.1;  // keep relu off its kink

            ForwardCache cache;
            Rng dummy(0);
            const auto y = forward(net, x, false, dummy, &cache);
            std::vector<double> upstream(out);
            for (std::size_t i = 0; i < out; ++i) upstream[i] = static_cast<double>(i) + 1.0;
            const auto grads = backward(net, cache, upstream);

            const double h = 1e-6;
            for (std::size_t li = 0; li < net.layers.size(); ++li) {
                auto& l = net.layers[li];
                for (std::size_t k = 0; k < std::min<std::size_t>(l.w.size(), 6); ++k) {
                    const double keep = l.w[k];
                    l.w[k] = keep + h;
                    const double lp = scalar_loss(net, x);
                    l.w[k] = keep - h;
                    const double lm = scalar_loss(net, x);
                    l.w[k] = keep;
                    const double fd = (lp - lm) / (2 * h);
                    const double tol = 1e-5 * std::max(1.0, std::abs(fd));
                    CHECK(grads.dw[li][k] == Approx(fd).margin(tol));
                }
            }
            // input gradient too
            for (std::size_t k = 0; k < in; ++k) {
                auto xp = x, xm = x;
                xp[k] += h;
                xm[k] -= h;
                const double fd = (scalar_loss(net, xp) - scalar_loss(net, xm)) / (2 * h);
                CHECK(grads.dx[k] == Approx(fd).margin(1e-5 * std::max(1.0, std::abs(fd))));
            }
            (void)y;
        }
    }
    SECTION("zero upstream gives zero gradients") {
        Rng rng(12);
        auto net = random_net(rng, 3, {4}, 2);
        ForwardCache cache;
        Rng dummy(0);
        forward(net, std::vector<double>{1, 2, 3}, false, dummy, &cache);
        const auto g = backward(net, cache, std::vector<double>{0.0, 0.0});
        for (const auto& v : g.dw)
            for (double x : v) CHECK(x == 0.0);
        for (double x : g.dx) CHECK(x == 0.0);
    }
    SECTION("linear net: gradient of w.x wrt w equals x") {
        Rng rng(13);
        auto net = random_net(rng, 3, {}, 1, Activation::Identity, Activation::Identity);
        const std::vector<double> x{0.5, -2.0, 3.25};
        ForwardCache cache;
        Rng dummy(0);
        forward(net, x, false, dummy, &cache);
        const auto g = backward(net, cache, std::vector<double>{1.0});
        for (std::size_t i = 0; i < 3; ++i) CHECK(g.dw[0][i] == Approx(x[i]));
    }
    SECTION("stale cache raises after a parameter update") {
        Rng rng(14);
        auto net = random_net(rng, 2, {3}, 1);
        ForwardCache cache;
        Rng dummy(0);
        forward(net, std::vector<double>{1, 2}, false, dummy, &cache);
        auto adam = AdamState::for_net(net, 1e-3);
        auto g = Gradients::zeros_like(net);
        g.dw[0][0] = 1.0;
        adam_step(adam, net, g);
        CHECK_THROWS_AS(backward(net, cache, std::vector<double>{1.0}), CacheMismatchError);
    }
}

TEST_CASE("adam", "[neural]") {
    SECTION("zero gradient leaves parameters unchanged") {
        Rng rng(21);
        auto net = random_net(rng, 2, {3}, 1);
        const auto before = net.layers[0].w;
        auto adam = AdamState::for_net(net, 0.01);
        adam_step(adam, net, Gradients::zeros_like(net));
        CHECK(net.layers[0].w == before);
    }
    SECTION("first step with constant gradient moves by about -lr * sign(g)") {
        std::vector<double> p{1.0, -2.0};
        std::vector<double> g{0.3, -0.7};
        auto adam = AdamState::for_shapes({2}, 0.05);
        adam.update({std::span<double>(p)}, {std::span<const double>(g)});
        CHECK(p[0] == Approx(1.0 - 0.05).epsilon(1e-4));
        CHECK(p[1] == Approx(-2.0 + 0.05).epsilon(1e-4));
    }
    SECTION("descends a quadratic bowl monotonically after burn-in") {
        std::vector<double> p{4.0, -3.0};
        auto adam = AdamState::for_shapes({2}, 0.1);
        double prev = 1e300;
        for (int it = 0; it < 100; ++it) {
            const double loss = 0.5 * (p[0] * p[0] + p[1] * p[1]);
            if (it > 10) CHECK(loss < prev);
            prev = loss;
            std::vector<double> g{p[0], p[1]};
            adam.update({std::span<double>(p)}, {std::span<const double>(g)});
        }
        CHECK(prev < 1.0);
    }
}

TEST_CASE("wgan losses", "[neural]") {
    SECTION("equal critic scores give zero critic loss") {
        const auto l = wgan_losses({0.4, 0.6}, {0.4, 0.6});
        CHECK(l.d_loss == Approx(0.0));
    }
    SECTION("unit separation") {
        const auto l = wgan_losses({1.0}, {0.0});
        CHECK(l.d_loss == Approx(-1.0));
        CHECK(l.g_loss == Approx(0.0));
    }
    SECTION("batch means match direct summation") {
        Rng rng(31);
        std::vector<double> r(17), f(13);
        for (auto& x : r) x = rng.normal();
        for (auto& x : f) x = rng.normal();
        double sr = 0, sf = 0;
        for (double x : r) sr += x;
        for (double x : f) sf += x;
        const auto l = wgan_losses(r, f);
        CHECK(l.d_loss == Approx(sf / 13.0 - sr / 17.0).margin(1e-12));
        CHECK(l.g_loss == Approx(-sf / 13.0).margin(1e-12));
    }
    SECTION("empty batch raises") {
        CHECK_THROWS_AS(wgan_losses({}, {1.0}), ArityError);
    }
}

TEST_CASE("combined generator loss", "[neural]") {
    CHECK(combined_generator_loss(2.5, 99.0, 1.0) == 2.5);
    CHECK(combined_generator_loss(2.0, 4.0, 0.5) == Approx(3.0));
    CHECK(combined_generator_loss(1.0, 0.0, 0.01) == Approx(0.01));
    CHECK_THROWS_AS(combined_generator_loss(1.0, 1.0, 1.5), ConfigError);
    SECTION("affine in alpha") {
        Rng rng(32);
        const double lw = rng.normal(), lr = rng.normal();
        const double a = 0.3, b = 0.8;
        const double mid = combined_generator_loss(lw, lr, (a + b) / 2);
        CHECK(mid == Approx((combined_generator_loss(lw, lr, a) + combined_generator_loss(lw, lr, b)) / 2)
                         .margin(1e-12));
    }
}

TEST_CASE("gradient penalty", "[neural]") {
    SECTION("constant critic: penalty equals lambda") {
        DenseNet net;
        Layer l;
        l.in = 3;
        l.out = 1;
        l.act = Activation::Identity;
        l.w.assign(3, 0.0);
        l.b.assign(1, 5.0);
        net.layers.push_back(l);
        Rng rng(41);
        const auto res = gradient_penalty(net, {{1, 2, 3}}, {{0, 0, 1}}, 10.0, rng);
        CHECK(res.penalty == Approx(10.0));
    }
    SECTION("linear critic with unit weight norm: zero penalty") {
        DenseNet net;
        Layer l;
        l.in = 2;
        l.out = 1;
        l.act = Activation::Identity;
        l.w = {0.6, 0.8};
        l.b = {0.0};
        net.layers.push_back(l);
        Rng rng(42);
        const auto res = gradient_penalty(net, {{1, 0}}, {{0, 1}}, 10.0, rng);
        CHECK(res.penalty == Approx(0.0).margin(1e-12));
    }
    SECTION("random linear critic: closed form lambda (|w| - 1)^2") {
        Rng rng(43);
        DenseNet net;
        Layer l;
        l.in = 4;
        l.out = 1;
        l.act = Activation::Identity;
        l.w.resize(4);
        for (auto& w : l.w) w = rng.normal();
        l.b = {0.3};
        net.layers.push_back(l);
        double wn = 0;
        for (double w : l.w) wn += w * w;
        wn = std::sqrt(wn);
        const auto res = gradient_penalty(net, {{1, 2, 3, 4}}, {{4, 3, 2, 1}}, 7.0, rng);
        CHECK(res.penalty == Approx(7.0 * (wn - 1.0) * (wn - 1.0)).margin(1e-8));
    }
    SECTION("parameter gradients match finite differences on a tanh critic") {
        Rng rng(44);
        auto net = random_net(rng, 3, {5}, 1);
        const std::vector<std::vector<double>> real{{0.2, -0.1, 0.5}, {1.0, 0.3, -0.4}};
        const std::vector<std::vector<double>> fake{{-0.3, 0.8, 0.1}, {0.0, -1.0, 0.6}};
        auto run_gp = [&](const DenseNet& d) {
            Rng gp_rng(99);
            return gradient_penalty(d, real, fake, 10.0, gp_rng);
        };
        const auto res = run_gp(net);

        const double h = 1e-6;
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            auto& l = net.layers[li];
            for (std::size_t k = 0; k < std::min<std::size_t>(l.w.size(), 5); ++k) {
                const double keep = l.w[k];
                l.w[k] = keep + h;
                const double pp = run_gp(net).penalty;
                l.w[k] = keep - h;
                const double pm = run_gp(net).penalty;
                l.w[k] = keep;
                const double fd = (pp - pm) / (2 * h);
                CHECK(res.grads.dw[li][k] == Approx(fd).margin(1e-5 * std::max(1.0, std::abs(fd))));
            }
        }
    }
}

TEST_CASE("parameter count accounting", "[neural]") {
    Rng rng(51);
    const auto net = random_net(rng, 8, {128, 256, 512}, 450);
    CHECK(net.param_count() == 9u * 128 + 129u * 256 + 257u * 512 + 513u * 450);
    CHECK(net.param_count() == 396610u);
}
