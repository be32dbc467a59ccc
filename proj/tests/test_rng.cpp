#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "adex/rng.hpp"

using adex::Rng;
using adex::derive_seed;

TEST_CASE("same seed reproduces the same stream", "[rng]") {
    Rng a(12345);
    Rng b(12345);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("different seeds diverge", "[rng]") {
    Rng a(1);
    Rng b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) {
        if (a.next_u64() == b.next_u64()) ++same;
    }
    REQUIRE(same == 0);
}

TEST_CASE("state round-trips through save and restore", "[rng]") {
    Rng a(987654321);
    for (int i = 0; i < 17; ++i) a.next_u64();
    auto saved = a.state();

    std::vector<uint64_t> ahead;
    for (int i = 0; i < 100; ++i) ahead.push_back(a.next_u64());

    Rng b(0);
    b.set_state(saved);
    REQUIRE(a != b);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(b.next_u64() == ahead[static_cast<size_t>(i)]);
    }
    REQUIRE(a == b);
}

TEST_CASE("all-zero state is rejected", "[rng]") {
    Rng a(7);
    REQUIRE_THROWS_AS(a.set_state({0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("derived seeds separate substreams", "[rng]") {
    auto s0 = derive_seed(42, 0);
    auto s1 = derive_seed(42, 1);
    auto s2 = derive_seed(42, 2);
    REQUIRE(s0 != s1);
    REQUIRE(s1 != s2);
    REQUIRE(s0 != s2);
    REQUIRE(derive_seed(42, 0) == s0);
    REQUIRE(derive_seed(43, 0) != s0);
}

TEST_CASE("uniform doubles look uniform", "[rng]") {
    Rng r(2024);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = r.next_double();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // mean of U(0,1): sd of the sample mean is 1/sqrt(12 n)
    double se = 1.0 / std::sqrt(12.0 * n);
    REQUIRE(sum / n == Catch::Approx(0.5).margin(4.0 * se));
}

TEST_CASE("bounded draws cover the range evenly", "[rng]") {
    Rng r(5);
    const int n = 40000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) {
        auto v = r.next_below(4);
        REQUIRE(v < 4);
        ++counts[v];
    }
    for (int k = 0; k < 4; ++k) {
        REQUIRE(counts[static_cast<size_t>(k)] / static_cast<double>(n) ==
                Catch::Approx(0.25).margin(0.01));
    }
}

TEST_CASE("normal draws have the right first two moments", "[rng]") {
    Rng r(99);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sumsq += x * x;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    REQUIRE(mean == Catch::Approx(0.0).margin(4.0 / std::sqrt(static_cast<double>(n))));
    // var of the sample variance of a normal is 2/n
    REQUIRE(var == Catch::Approx(1.0).margin(4.0 * std::sqrt(2.0 / n)));
}

TEST_CASE("gamma draws match mean and variance", "[rng]") {
    const int n = 200000;
    for (double shape : {0.4, 1.0, 2.5, 7.0}) {
        Rng r(static_cast<uint64_t>(shape * 1000) + 11);
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            double x = r.gamma(shape);
            REQUIRE(x > 0.0);
            sum += x;
            sumsq += x * x;
        }
        double mean = sum / n;
        double var = sumsq / n - mean * mean;
        // Gamma(k,1): mean k, variance k, fourth central moment k(3k+6)
        double se_mean = std::sqrt(shape / n);
        double se_var = std::sqrt((shape * (3.0 * shape + 6.0) + 2.0 * shape * shape) / n);
        REQUIRE(mean == Catch::Approx(shape).margin(4.0 * se_mean));
        REQUIRE(var == Catch::Approx(shape).margin(4.0 * se_var));
    }
}

TEST_CASE("beta draws stay in the open unit interval", "[rng]") {
    Rng r(314);
    for (int i = 0; i < 20000; ++i) {
        double x = r.beta(0.7, 2.3);
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
    }
}
