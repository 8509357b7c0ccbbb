#include <doctest.h>

#include <symattack/rng.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace symattack;

TEST_CASE("rng is deterministic for a fixed seed") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next() == b.next());
    }
    Rng c(42), d(43);
    int same = 0;
    for (int i = 0; i < 100; ++i) {
        if (c.next() == d.next()) ++same;
    }
    CHECK(same == 0);
}

TEST_CASE("uniform stays in (0,1] and has sane moments") {
    Rng r(7);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u <= 1.0);
        sum += u;
        sumsq += u * u;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean - 0.5) < 0.005);
    CHECK(std::abs(var - 1.0 / 12.0) < 0.005);
}

TEST_CASE("uniform(lo,hi) respects its interval") {
    Rng r(11);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform(-2.0, 3.0);
        CHECK(u > -2.0);
        CHECK(u <= 3.0);
    }
}

TEST_CASE("normal moments match a standard gaussian") {
    Rng r(13);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0, sum4 = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = r.normal();
        sum += z;
        sumsq += z * z;
        sum4 += z * z * z * z;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    double kurt = sum4 / n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
    CHECK(std::abs(kurt - 3.0) < 0.12);  // fourth moment of N(0,1)
}

TEST_CASE("integer(n) covers all residues within bounds") {
    Rng r(17);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 10000; ++i) {
        uint64_t k = r.integer(10);
        REQUIRE(k < 10);
        counts[static_cast<size_t>(k)]++;
    }
    for (int c : counts) CHECK(c > 700);
}

TEST_CASE("fork produces independent reproducible streams") {
    Rng base(99);
    Rng f0 = base.fork(0);
    Rng f1 = base.fork(1);
    Rng f0again = base.fork(0);
    CHECK(f0.next() == f0again.next());
    // forked streams should not collide with each other or with the base
    Rng g0 = base.fork(0), g1 = base.fork(1), g2 = base.fork(2);
    std::vector<uint64_t> seen;
    for (int i = 0; i < 50; ++i) {
        seen.push_back(g0.next());
        seen.push_back(g1.next());
        seen.push_back(g2.next());
    }
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("gaussian_vector and gaussian_matrix are seed-stable") {
    Rng ra(5), rb(5);
    Eigen::VectorXd v1 = gaussian_vector(8, ra);
    Eigen::VectorXd v2 = gaussian_vector(8, rb);
    CHECK((v1 - v2).cwiseAbs().maxCoeff() == 0.0);
    Rng rc(6), rd(6);
    Eigen::MatrixXd m1 = gaussian_matrix(4, 3, rc);
    Eigen::MatrixXd m2 = gaussian_matrix(4, 3, rd);
    CHECK((m1 - m2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m1.rows() == 4);
    CHECK(m1.cols() == 3);
}

TEST_CASE("permutation is a bijection on 0..n-1") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng r(seed);
        auto p = permutation(37, r);
        REQUIRE(p.size() == 37);
        std::vector<int> sorted = p;
        std::sort(sorted.begin(), sorted.end());
        for (size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == static_cast<int>(i));
    }
    // not the identity for at least one seed
    Rng r(1);
    auto p = permutation(37, r);
    std::vector<int> id(37);
    std::iota(id.begin(), id.end(), 0);
    CHECK(p != id);
}
