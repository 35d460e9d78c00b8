#include <catch2/catch_amalgamated.hpp>

#include "dac/replay.hpp"
#include "dac/stats.hpp"

using namespace dac;

TEST_CASE("replay buffer wraps around at capacity") {
    ReplayBuffer buf(4);
    for (int i = 0; i < 10; ++i) {
        Transition t;
        t.reward = i;
        buf.push(t);
        CHECK(buf.size() == std::min<std::size_t>(i + 1, 4));
    }
    // Ring holds the last 4 entries 6..9.
    double sum = 0.0;
    for (std::size_t i = 0; i < buf.size(); ++i) sum += buf.at(i).reward;
    CHECK(sum == 6 + 7 + 8 + 9);
}

TEST_CASE("sampling a full small buffer is uniform") {
    constexpr int kSlots = 16;
    ReplayBuffer buf(kSlots);
    for (int i = 0; i < kSlots; ++i) {
        Transition t;
        t.action = i;
        buf.push(t);
    }
    Rng rng(42);
    constexpr int kDraws = 160000;
    std::vector<double> observed(kSlots, 0.0);
    for (int i = 0; i < kDraws; ++i) observed[static_cast<std::size_t>(buf.sample(rng).action)] += 1.0;
    std::vector<double> expected(kSlots, static_cast<double>(kDraws) / kSlots);
    CHECK(chi_square_gof(observed, expected).pass_1pct);
}

TEST_CASE("sampling from an empty buffer is an error") {
    ReplayBuffer buf(8);
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample(rng), std::logic_error);
    CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
}
