#include "pagerank.hpp"

#include <cmath>

#include "doctest.h"

using namespace swarmsynth;

namespace {

Matrix random_dense_stochastic(int n, Rng& rng) {
    Matrix g = zeros(n, n);
    for (auto& row : g) {
        double sum = 0;
        for (auto& v : row) {
            v = rng.uniform(0.01, 1.0);  // strictly positive: irreducible, aperiodic
            sum += v;
        }
        for (auto& v : row) v /= sum;
    }
    return g;
}

// Oracle: G^(2^k) by repeated squaring; for large k every row approaches the
// stationary distribution. Rows are averaged for good measure.
std::vector<double> stationary_by_matrix_power(const Matrix& g, int squarings) {
    const size_t n = g.size();
    Matrix m = g;
    for (int s = 0; s < squarings; ++s) {
        Matrix next = zeros(static_cast<int>(n), static_cast<int>(n));
        for (size_t i = 0; i < n; ++i)
            for (size_t k = 0; k < n; ++k) {
                double mik = m[i][k];
                if (mik == 0.0) continue;
                for (size_t j = 0; j < n; ++j) next[i][j] += mik * m[k][j];
            }
        // Renormalize rows to stop floating-point drift from compounding.
        for (size_t i = 0; i < n; ++i) {
            double sum = 0;
            for (double v : next[i]) sum += v;
            for (double& v : next[i]) v /= sum;
        }
        m = std::move(next);
    }
    std::vector<double> pi(n, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) pi[j] += m[i][j] / static_cast<double>(n);
    return pi;
}

double l1(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

}  // namespace

TEST_SUITE("pagerank") {

TEST_CASE("identity matrix keeps the uniform start") {
    Matrix g = zeros(4, 4);
    for (int i = 0; i < 4; ++i) g[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1.0;
    PageRankVector pr = pagerank(g);
    CHECK(pr.converged);
    for (double v : pr.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("periodic two-state chain resolves to the analytic stationary point") {
    Matrix g = {{0.0, 1.0}, {1.0, 0.0}};
    PageRankVector uniform_start = pagerank(g);
    CHECK(uniform_start.converged);
    CHECK(uniform_start.values[0] == doctest::Approx(0.5).epsilon(1e-9));

    std::vector<double> start = {0.9, 0.1};
    PageRankVector skewed = pagerank(g, 1e-10, 10000, &start);
    CHECK(skewed.converged);
    CHECK(skewed.averaged);  // oscillation handled by iterate averaging
    CHECK(skewed.values[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(skewed.values[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("matches the dense matrix-power oracle on random models") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 4 + rng.uniform_int(13);  // N in 4..16
        Matrix g = random_dense_stochastic(n, rng);
        PageRankVector pr = pagerank(g);
        REQUIRE(pr.converged);
        std::vector<double> oracle = stationary_by_matrix_power(g, 30);
        CHECK(l1(pr.values, oracle) <= 1e-8);
    }
}

TEST_CASE("start vector does not matter for irreducible aperiodic chains") {
    Rng rng(7);
    Matrix g = random_dense_stochastic(8, rng);
    std::vector<double> s1(8), s2(8);
    for (auto& v : s1) v = rng.uniform(0.1, 1.0);
    for (auto& v : s2) v = rng.uniform(0.1, 1.0);
    PageRankVector a = pagerank(g, 1e-10, 10000, &s1);
    PageRankVector b = pagerank(g, 1e-10, 10000, &s2);
    CHECK(l1(a.values, b.values) <= 1e-9);
}

TEST_CASE("result sums to one and is non-negative") {
    Rng rng(11);
    Matrix g = random_dense_stochastic(12, rng);
    PageRankVector pr = pagerank(g);
    double sum = 0;
    for (double v : pr.values) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("non-convergence is reported, not thrown") {
    Matrix g = {{0.0, 1.0}, {1.0, 0.0}};
    std::vector<double> start = {0.9, 0.1};
    PageRankVector pr = pagerank(g, 1e-10, 2, &start);
    CHECK(!pr.converged);
    CHECK(pr.residual > 0.0);
}

TEST_CASE("fitness_pr follows the literal definition") {
    PageRankVector pr;
    pr.values = {0.7, 0.1, 0.1, 0.1};
    DesiredStateSet only0;
    only0.members = {0};
    CHECK(fitness_pr(pr, only0) == doctest::Approx(2.8).epsilon(1e-12));

    DesiredStateSet all;
    all.members = {0, 1, 2, 3};
    CHECK(fitness_pr(pr, all) == doctest::Approx(1.0).epsilon(1e-12));

    PageRankVector uniform;
    uniform.values = {0.25, 0.25, 0.25, 0.25};
    DesiredStateSet some;
    some.members = {1, 3};
    CHECK(fitness_pr(uniform, some) == doctest::Approx(1.0).epsilon(1e-12));

    DesiredStateSet empty;
    CHECK_THROWS(fitness_pr(pr, empty));
}

}  // TEST_SUITE
