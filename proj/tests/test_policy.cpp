#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <vector>

#include "dac/policy.hpp"
#include "dac/stats.hpp"

using namespace dac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("portfolio contains ascending powers of two up to n") {
    const auto p50 = Portfolio::for_dimension(50);
    CHECK(p50.lambdas == std::vector<int>{1, 2, 4, 8, 16, 32});
    const auto p100 = Portfolio::for_dimension(100);
    CHECK(p100.lambdas == std::vector<int>{1, 2, 4, 8, 16, 32, 64});
    const auto p64 = Portfolio::for_dimension(64);
    CHECK(p64.lambdas.back() == 64);
    CHECK(Portfolio::for_dimension(1).lambdas == std::vector<int>{1});
}

TEST_CASE("portfolio nearest_index breaks ties toward the smaller lambda") {
    const auto pf = Portfolio::for_dimension(100);
    CHECK(pf.lambda_at(pf.nearest_index(3.0)) == 2);  // equidistant between 2 and 4
    CHECK(pf.lambda_at(pf.nearest_index(6.0)) == 4);  // equidistant between 4 and 8
    CHECK(pf.lambda_at(pf.nearest_index(10.0)) == 8);
    CHECK(pf.lambda_at(pf.nearest_index(0.1)) == 1);
    CHECK(pf.lambda_at(pf.nearest_index(1000.0)) == 64);
}

TEST_CASE("pi_cont matches the closed form") {
    CHECK_THAT(pi_cont(100, 99), WithinAbs(10.0, 1e-12));
    CHECK_THAT(pi_cont(100, 50), WithinRel(std::sqrt(2.0), 1e-12));
    CHECK_THAT(pi_cont(50, 49), WithinRel(std::sqrt(50.0), 1e-12));
    CHECK_THAT(pi_cont(100, 0), WithinAbs(1.0, 1e-12));
    CHECK_THROWS_AS(pi_cont(100, 100), std::invalid_argument);
    CHECK_THROWS_AS(pi_cont(100, -1), std::invalid_argument);
}

TEST_CASE("pi_disc picks the nearest portfolio entry") {
    const auto pf100 = Portfolio::for_dimension(100);
    CHECK(pf100.lambda_at(pi_disc(100, 99)) == 8);
    CHECK(pf100.lambda_at(pi_disc(100, 50)) == 1);
}

TEST_CASE("pi_disc is optimal over the whole portfolio for every fitness") {
    for (int n : {50, 100, 200}) {
        const auto pf = Portfolio::for_dimension(n);
        for (int f = 0; f < n; ++f) {
            const double target = pi_cont(n, f);
            const int chosen = pf.lambda_at(pi_disc(n, f));
            for (int lam : pf.lambdas)
                REQUIRE(std::fabs(chosen - target) <= std::fabs(lam - target));
        }
    }
}

TEST_CASE("act dispatches per policy kind") {
    const auto pf = Portfolio::for_dimension(50);
    Rng rng(1);

    const auto c = Policy::constant(1);
    CHECK(pf.lambda_at(c.act(pf, 50, 0, rng)) == 1);
    CHECK(pf.lambda_at(c.act(pf, 50, 49, rng)) == 1);

    TabularPolicy t;
    t.n = 50;
    t.actions.assign(50, 2);
    t.actions[10] = 4;
    const auto tp = Policy::tabular(t);
    CHECK(tp.act(pf, 50, 10, rng) == 4);
    CHECK(tp.act(pf, 50, 11, rng) == 2);

    CHECK_THROWS_AS(Policy::continuous_theory().act(pf, 50, 10, rng), std::logic_error);
}

TEST_CASE("continuous theory policy selects round_half_up(pi_cont) directly") {
    const auto pf = Portfolio::for_dimension(50);
    Rng rng(1);
    const auto p = Policy::continuous_theory();
    CHECK(p.select_lambda(pf, 50, 49, rng) == 7);  // sqrt(50) = 7.07 -> 7, not in {1,...,32}? 7 is off-portfolio
    CHECK(p.select_lambda(pf, 50, 0, rng) == 1);
    CHECK(p.select_lambda(pf, 50, 48, rng) == 5);  // sqrt(25) = 5
}

TEST_CASE("random policy draws each portfolio index uniformly") {
    const auto pf = Portfolio::for_dimension(100);
    Rng rng(77);
    const auto p = Policy::random();
    const int k = pf.size();
    std::vector<double> observed(static_cast<std::size_t>(k), 0.0);
    constexpr int kDraws = 100000;
    for (int i = 0; i < kDraws; ++i) observed[static_cast<std::size_t>(p.act(pf, 100, 3, rng))] += 1.0;
    const double expect = static_cast<double>(kDraws) / k;
    const double sigma = std::sqrt(kDraws * (1.0 / k) * (1.0 - 1.0 / k));
    for (double o : observed) CHECK(std::fabs(o - expect) < 3.0 * sigma);
}

TEST_CASE("pairwise difference counts disagreeing states") {
    TabularPolicy a;
    a.n = 20;
    a.actions.assign(20, 1);
    TabularPolicy b = a;
    CHECK(pairwise_difference(a, b) == 0);
    b.actions[2] = 0;
    b.actions[7] = 3;
    b.actions[19] = 2;
    CHECK(pairwise_difference(a, b) == 3);
    TabularPolicy c;
    c.n = 10;
    c.actions.assign(10, 0);
    CHECK_THROWS_AS(pairwise_difference(a, c), std::invalid_argument);
}

TEST_CASE("tabular policy round-trips through csv") {
    TabularPolicy p;
    p.n = 50;
    p.actions.assign(50, 0);
    for (int f = 0; f < 50; ++f) p.actions[static_cast<std::size_t>(f)] = pi_disc(50, f);

    const auto path = std::filesystem::temp_directory_path() / "dac_test_policy.csv";
    save_tabular_policy(p, path.string());
    const auto q = load_tabular_policy(path.string());
    CHECK(p == q);
    std::filesystem::remove(path);
}

TEST_CASE("extract_greedy of a zero network is all index 0") {
    const Mlp net(std::vector<int>{1, 4, 4, 3});
    const auto p = extract_greedy(net, 30);
    REQUIRE(p.actions.size() == 30);
    for (int a : p.actions) CHECK(a == 0);
}

TEST_CASE("extract_greedy matches argmax of a hand-built linear network") {
    // All-positive weights keep every ReLU active for positive inputs, so the
    // network computes an exactly known linear function per action.
    Mlp net(std::vector<int>{1, 2, 2, 3});
    net.weights[0].at(0, 0) = 1.0;
    net.weights[0].at(0, 1) = 2.0;
    net.weights[1].at(0, 0) = 1.0;
    net.weights[1].at(1, 1) = 1.0;
    // Action scores: a0 = 3s, a1 = 2.4s + 0.4, a2 = 0.2s + 0.9.
    net.weights[2].at(0, 0) = 3.0;
    net.weights[2].at(1, 1) = 1.2;
    net.weights[2].at(1, 2) = 0.1;
    net.biases[2] = {0.0, 0.4, 0.9};
    const int n = 100;
    const auto p = extract_greedy(net, n);
    for (int f = 0; f < n; ++f) {
        const double s = static_cast<double>(f) / n;
        const double q0 = 3.0 * s, q1 = 2.4 * s + 0.4, q2 = 0.2 * s + 0.9;
        int best = 0;
        if (q1 > q0) best = 1;
        if (q2 > (best == 0 ? q0 : q1)) best = 2;
        REQUIRE(p.actions[static_cast<std::size_t>(f)] == best);
    }
}

TEST_CASE("extract_greedy is deterministic") {
    Rng rng(5);
    const Mlp net = Mlp::glorot({1, 50, 50, 7}, rng);
    CHECK(extract_greedy(net, 100) == extract_greedy(net, 100));
}
