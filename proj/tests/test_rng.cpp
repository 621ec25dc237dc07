#include "phydra/rng.hpp"

#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"

using namespace phydra;

TEST_CASE("identical seeds give identical streams") {
    Rng a(12345), b(12345);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.uniform() == b.uniform());
        CHECK(a.normal() == b.normal());
        CHECK(a.gamma(2.5, 1.0) == b.gamma(2.5, 1.0));
        CHECK(a.poisson(7.0) == b.poisson(7.0));
    }
    Rng c(12346);
    CHECK(a.uniform() != c.uniform());
}

TEST_CASE("mix_seed separates streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t tree = 0; tree < 8; ++tree)
        for (std::uint64_t chain = 0; chain < 8; ++chain)
            seen.insert(mix_seed(42, tree, chain));
    CHECK(seen.size() == 64);
    CHECK(mix_seed(1, 2, 3) != mix_seed(3, 2, 1));
}

TEST_CASE("uniform moments and range") {
    Rng rng(7);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sum2 / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("integer covers its range uniformly") {
    Rng rng(11);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) ++counts[rng.integer(5)];
    for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
    Rng one(3);
    for (int i = 0; i < 10; ++i) CHECK(one.integer(1) == 0);
}

TEST_CASE("normal moments") {
    Rng rng(99);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(1.0).scale(0.01));
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("exponential mean") {
    Rng rng(5);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += rng.exponential(2.0);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("gamma moments across shape regimes") {
    Rng rng(13);
    const int n = 100000;
    for (double shape : {0.4, 1.0, 3.0, 25.0}) {
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double g = rng.gamma(shape, 2.0);
            CHECK(g > 0.0);
            sum += g;
            sum2 += g * g;
        }
        double m = sum / n;
        double v = sum2 / n - m * m;
        CHECK(m == doctest::Approx(shape * 2.0).epsilon(0.03));
        CHECK(v == doctest::Approx(shape * 4.0).epsilon(0.08));
    }
}

TEST_CASE("poisson mean for small and large rates") {
    Rng rng(17);
    const int n = 50000;
    for (double lambda : {0.5, 4.0, 50.0, 400.0}) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.poisson(lambda));
        CHECK(sum / n == doctest::Approx(lambda).epsilon(0.03));
    }
}
