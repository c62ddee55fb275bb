#include <cmath>
#include <vector>

#include "doctest.h"

#include "axb/rng.hpp"

using namespace axb;

TEST_CASE("fixed seed replays bit-exactly") {
    RngStream a(42), b(42);
    for (int i = 0; i < 3; ++i) CHECK(a.gauss() == b.gauss());
    RngStream c(42), d(42);
    for (int i = 0; i < 16; ++i) CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("distinct seeds diverge immediately") {
    RngStream a(1), b(2);
    bool any_diff = false;
    for (int i = 0; i < 10; ++i) any_diff |= (a.gauss() != b.gauss());
    CHECK(any_diff);
}

TEST_CASE("gauss moments over 1e5 draws") {
    RngStream s(7);
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = s.gauss();
        sum += x;
        sum_sq += x * x;
    }
    double mean = sum / n;
    double var = sum_sq / n - mean * mean;
    CHECK(mean >= -0.02);
    CHECK(mean <= 0.02);
    CHECK(var >= 0.96);
    CHECK(var <= 1.04);
}

TEST_CASE("categorical degenerate and frequency brackets") {
    RngStream s(11);
    std::vector<double> degenerate{1.0, 0.0, 0.0};
    for (int i = 0; i < 100; ++i) CHECK(s.categorical(degenerate) == 0);

    std::vector<double> even{1.0, 1.0};
    int hits0 = 0;
    for (int i = 0; i < 10000; ++i) hits0 += s.categorical(even) == 0;
    CHECK(hits0 / 10000.0 >= 0.46);
    CHECK(hits0 / 10000.0 <= 0.54);

    std::vector<double> tilted{2.0, 1.0, 1.0};
    hits0 = 0;
    for (int i = 0; i < 10000; ++i) hits0 += s.categorical(tilted) == 0;
    CHECK(hits0 / 10000.0 >= 0.46);
    CHECK(hits0 / 10000.0 <= 0.54);
}

TEST_CASE("categorical rejects invalid weights") {
    RngStream s(3);
    std::vector<double> zeros{0.0, 0.0};
    CHECK_THROWS_AS(s.categorical(zeros), DomainError);
    std::vector<double> negative{1.0, -0.5};
    CHECK_THROWS_AS(s.categorical(negative), DomainError);
}

TEST_CASE("categorical empirical frequencies within chebyshev band") {
    RngStream s(13);
    std::vector<double> w{0.5, 3.0, 1.0, 0.0, 2.5, 1.0, 0.5, 0.25, 0.75, 0.5};
    double total = 0.0;
    for (double x : w) total += x;
    const int n = 10000;
    std::vector<int> hits(w.size(), 0);
    for (int i = 0; i < n; ++i) ++hits[s.categorical(w)];
    for (size_t i = 0; i < w.size(); ++i) {
        double p = w[i] / total;
        double sigma = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(hits[i] / double(n) - p) <= 3.0 * sigma + 1e-12);
    }
}

TEST_CASE("sparse_gaussian density, determinism, bounds") {
    RngStream s(21);
    SparseMatrix full = sparse_gaussian(s, 10, 10, 1.0);
    CHECK(full.nnz() == 100);

    RngStream s2(22);
    SparseMatrix m = sparse_gaussian(s2, 100, 100, 0.05);
    CHECK(m.nnz() >= 430);
    CHECK(m.nnz() <= 570);

    RngStream r1(23), r2(23);
    SparseMatrix a = sparse_gaussian(r1, 20, 20, 0.3);
    SparseMatrix b = sparse_gaussian(r2, 20, 20, 0.3);
    CHECK(to_dense(a) == to_dense(b));

    RngStream bad(1);
    CHECK_THROWS_AS(sparse_gaussian(bad, 5, 5, 0.0), DomainError);
    CHECK_THROWS_AS(sparse_gaussian(bad, 5, 5, 1.5), DomainError);
}

TEST_CASE("substreams are deterministic and independent of the parent") {
    RngStream root(99);
    RngStream s1 = root.substream(4);
    RngStream s2 = RngStream(99).substream(4);
    for (int i = 0; i < 8; ++i) CHECK(s1.next_u64() == s2.next_u64());
    RngStream s3 = RngStream(99).substream(5);
    RngStream s4 = RngStream(99).substream(4);
    bool diff = false;
    for (int i = 0; i < 8; ++i) diff |= (s3.next_u64() != s4.next_u64());
    CHECK(diff);
}
