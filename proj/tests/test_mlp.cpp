#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "dac/mlp.hpp"

using namespace dac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = (2.0 * rng.uniform01() - 1.0) * scale;
    return m;
}

// Scalar loss sum(output * g) so the output gradient is exactly g.
double probe_loss(const Mlp& net, const Matrix& batch, const Matrix& g) {
    const Matrix y = net.forward(batch);
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * g.data[i];
    return s;
}

// The finite-difference oracle is only valid away from ReLU kinks: a
// pre-activation within ~h of zero makes the central difference straddle the
// kink. Reject such configurations and resample.
bool has_near_kink(const Mlp& net, const Matrix& batch, double margin) {
    Matrix a = batch;
    Matrix z;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        matmul(a, net.weights[l], z);
        add_row_vector(z, net.biases[l]);
        if (l + 1 < net.weights.size()) {
            for (double v : z.data)
                if (std::fabs(v) < margin) return true;
            relu_inplace(z);
        }
        std::swap(a, z);
    }
    return false;
}

double max_gradcheck_error(Mlp& net, const Matrix& batch, const Matrix& g, double h) {
    const MlpGradients grads = net.backward(batch, g);
    double worst = 0.0;
    auto check_param = [&](double& p, double analytic) {
        const double saved = p;
        p = saved + h;
        const double up = probe_loss(net, batch, g);
        p = saved - h;
        const double down = probe_loss(net, batch, g);
        p = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::fabs(fd - analytic) / std::max({1.0, std::fabs(fd), std::fabs(analytic)});
        worst = std::max(worst, err);
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].data.size(); ++i)
            check_param(net.weights[l].data[i], grads.weights[l].data[i]);
        for (std::size_t i = 0; i < net.biases[l].size(); ++i)
            check_param(net.biases[l][i], grads.biases[l][i]);
    }
    return worst;
}

} // namespace

TEST_CASE("forward of the zero network is zero") {
    const Mlp net(std::vector<int>{2, 4, 4, 3});
    Matrix batch(5, 2);
    batch.fill(0.7);
    const Matrix y = net.forward(batch);
    REQUIRE(y.rows == 5);
    REQUIRE(y.cols == 3);
    for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("forward of an all-positive 1-1-1-1 chain is w^3 x") {
    Mlp net(std::vector<int>{1, 1, 1, 1});
    const double w = 0.8;
    for (auto& layer : net.weights) layer.at(0, 0) = w;
    Matrix x(1, 1);
    x.at(0, 0) = 2.0;
    CHECK_THAT(net.forward(x).at(0, 0), WithinRel(w * w * w * 2.0, 1e-14));
}

TEST_CASE("forward output is finite for finite input") {
    Rng rng(5);
    const Mlp net = Mlp::glorot({1, 50, 50, 7}, rng);
    Matrix batch(64, 1);
    for (int i = 0; i < 64; ++i) batch.at(i, 0) = i / 64.0;
    const Matrix y = net.forward(batch);
    for (double v : y.data) REQUIRE(std::isfinite(v));
    CHECK(net.all_finite());
}

TEST_CASE("forward rejects wrong input width") {
    const Mlp net(std::vector<int>{2, 3, 3, 1});
    CHECK_THROWS_AS(net.forward(Matrix(4, 3)), std::invalid_argument);
}

TEST_CASE("gradient check against central finite differences") {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Mlp net = Mlp::glorot({3, 4, 4, 2}, rng);
        Matrix batch = random_matrix(5, 3, rng);
        while (has_near_kink(net, batch, 1e-3)) batch = random_matrix(5, 3, rng);
        const Matrix g = random_matrix(5, 2, rng);
        worst = std::max(worst, max_gradcheck_error(net, batch, g, 1e-5));
    }
    INFO("max relative error " << worst);
    CHECK(worst < 1e-4);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    Rng rng(8);
    const Mlp net = Mlp::glorot({3, 4, 4, 2}, rng);
    const Matrix batch = random_matrix(6, 3, rng);
    const Matrix zero(6, 2);
    const auto g = net.backward(batch, zero);
    for (const auto& w : g.weights)
        for (double v : w.data) REQUIRE(v == 0.0);
    for (const auto& b : g.biases)
        for (double v : b) REQUIRE(v == 0.0);
}

TEST_CASE("backward is linear in the upstream gradient") {
    Rng rng(9);
    const Mlp net = Mlp::glorot({2, 4, 4, 2}, rng);
    const Matrix batch = random_matrix(4, 2, rng);
    const Matrix g1 = random_matrix(4, 2, rng);
    const Matrix g2 = random_matrix(4, 2, rng);
    Matrix sum(4, 2);
    for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] = g1.data[i] + g2.data[i];
    const auto a = net.backward(batch, g1);
    const auto b = net.backward(batch, g2);
    const auto c = net.backward(batch, sum);
    for (std::size_t l = 0; l < c.weights.size(); ++l)
        for (std::size_t i = 0; i < c.weights[l].data.size(); ++i)
            REQUIRE_THAT(c.weights[l].data[i],
                         WithinAbs(a.weights[l].data[i] + b.weights[l].data[i], 1e-12));
}

TEST_CASE("first adam step with unit gradient moves by about -lr") {
    Mlp net(std::vector<int>{1, 1});
    AdamState st = AdamState::for_net(net, 0.1);
    MlpGradients g;
    g.weights.emplace_back(1, 1);
    g.weights[0].at(0, 0) = 1.0;
    g.biases.emplace_back(1, 0.0);
    adam_step(net, g, st);
    CHECK_THAT(net.weights[0].at(0, 0), WithinAbs(-0.1, 1e-8));
    CHECK(st.timestep == 1);
}

TEST_CASE("zero gradients leave parameters unchanged") {
    Rng rng(3);
    Mlp net = Mlp::glorot({2, 3, 3, 1}, rng);
    const Mlp copy = net;
    AdamState st = AdamState::for_net(net, 0.05);
    MlpGradients zero;
    for (const auto& w : net.weights) zero.weights.emplace_back(w.rows, w.cols);
    for (const auto& b : net.biases) zero.biases.emplace_back(b.size(), 0.0);
    for (int i = 0; i < 10; ++i) adam_step(net, zero, st);
    for (std::size_t l = 0; l < net.weights.size(); ++l)
        REQUIRE(net.weights[l].data == copy.weights[l].data);
}

TEST_CASE("two adam steps with varying gradients match a scalar recomputation") {
    Mlp net(std::vector<int>{1, 1});
    net.weights[0].at(0, 0) = 0.3;
    AdamState st = AdamState::for_net(net, 0.01);
    const double g1 = 0.5, g2 = -0.25;

    MlpGradients g;
    g.weights.emplace_back(1, 1);
    g.biases.emplace_back(1, 0.0);
    g.weights[0].at(0, 0) = g1;
    adam_step(net, g, st);
    g.weights[0].at(0, 0) = g2;
    adam_step(net, g, st);

    // Scalar recurrence computed independently.
    double theta = 0.3, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
        const double grad = t == 1 ? g1 : g2;
        m = 0.9 * m + 0.1 * grad;
        v = 0.999 * v + 0.001 * grad * grad;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        theta -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    }
    CHECK_THAT(net.weights[0].at(0, 0), WithinAbs(theta, 1e-12));
}

TEST_CASE("soft_update blends toward the online net") {
    Rng rng(4);
    const Mlp online = Mlp::glorot({1, 4, 4, 2}, rng);
    Mlp target = Mlp::glorot({1, 4, 4, 2}, rng);

    SECTION("tau = 1 copies online") {
        soft_update(target, online, 1.0);
        for (std::size_t l = 0; l < target.weights.size(); ++l)
            REQUIRE(target.weights[l].data == online.weights[l].data);
    }

    SECTION("repeated updates converge geometrically") {
        const double tau = 0.25;
        double prev_norm = 0.0;
        for (int i = 0; i < 30; ++i) {
            double norm = 0.0;
            for (std::size_t l = 0; l < target.weights.size(); ++l)
                for (std::size_t j = 0; j < target.weights[l].data.size(); ++j)
                    norm += std::pow(target.weights[l].data[j] - online.weights[l].data[j], 2);
            norm = std::sqrt(norm);
            if (i > 0) CHECK_THAT(norm, WithinRel(prev_norm * (1.0 - tau), 1e-9));
            prev_norm = norm;
            soft_update(target, online, tau);
        }
    }

    SECTION("tau outside (0,1] is rejected") {
        CHECK_THROWS_AS(soft_update(target, online, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(soft_update(target, online, 1.5), std::invalid_argument);
    }

    SECTION("architecture mismatch is rejected") {
        Mlp other(std::vector<int>{1, 5, 5, 2});
        CHECK_THROWS_AS(soft_update(other, online, 0.5), std::invalid_argument);
    }
}

TEST_CASE("glorot init respects the layer bound and zeroes biases") {
    Rng rng(10);
    const Mlp net = Mlp::glorot({1, 50, 50, 7}, rng);
    for (const auto& w : net.weights) {
        const double bound = std::sqrt(6.0 / (w.rows + w.cols));
        for (double v : w.data) {
            REQUIRE(v <= bound);
            REQUIRE(v >= -bound);
        }
    }
    for (const auto& b : net.biases)
        for (double v : b) REQUIRE(v == 0.0);
}

TEST_CASE("identical seeds give bit-identical training arithmetic") {
    Rng ra(123), rb(123);
    Mlp a = Mlp::glorot({1, 50, 50, 7}, ra);
    Mlp b = Mlp::glorot({1, 50, 50, 7}, rb);
    AdamState sa = AdamState::for_net(a, 0.001);
    AdamState sb = AdamState::for_net(b, 0.001);
    Matrix batch(8, 1);
    for (int i = 0; i < 8; ++i) batch.at(i, 0) = i / 8.0;
    Matrix g(8, 7);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = (i % 5) * 0.1 - 0.2;
    for (int step = 0; step < 25; ++step) {
        adam_step(a, a.backward(batch, g), sa);
        adam_step(b, b.backward(batch, g), sb);
    }
    for (std::size_t l = 0; l < a.weights.size(); ++l)
        REQUIRE(a.weights[l].data == b.weights[l].data);
}

TEST_CASE("checkpoint json round-trips parameters and metadata") {
    Rng rng(6);
    const Mlp net = Mlp::glorot({1, 8, 8, 4}, rng);
    const auto path = std::filesystem::temp_directory_path() / "dac_test_mlp.json";
    nlohmann::json meta;
    meta["n"] = 100;
    meta["config_hash"] = "abc123";
    save_mlp_checkpoint(net, path.string(), meta);

    nlohmann::json meta_in;
    const Mlp back = load_mlp_checkpoint(path.string(), &meta_in);
    REQUIRE(back.dims() == net.dims());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        REQUIRE(back.weights[l].data == net.weights[l].data);
        REQUIRE(back.biases[l] == net.biases[l]);
    }
    CHECK(meta_in.at("n") == 100);
    std::filesystem::remove(path);
}
