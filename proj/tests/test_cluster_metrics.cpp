#include <doctest.h>

#include <cmath>
#include <vector>

#include "rsiam/cluster_metrics.hpp"
#include "rsiam/errors.hpp"

using namespace rsiam;

TEST_CASE("identical and relabeled partitions score full mutual information") {
    const std::vector<int> u = {0, 0, 1, 1, 2, 2};
    CHECK(normalized_mutual_information(u, u) == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<int> permuted = {5, 5, 3, 3, 9, 9}; // same partition, renamed
    CHECK(normalized_mutual_information(u, permuted) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate partitions with zero entropy score one by convention") {
    const std::vector<int> flat = {4, 4, 4};
    CHECK(normalized_mutual_information(flat, flat) == 1.0);
    CHECK(normalized_mutual_information({1}, {2}) == 1.0);
}

TEST_CASE("one-sided zero entropy gives zero shared information") {
    const std::vector<int> flat = {0, 0, 0, 0};
    const std::vector<int> split = {0, 0, 1, 1};
    CHECK(normalized_mutual_information(flat, split) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("hand-computed mixed partition") {
    // u splits {a,b | c,d}, v splits {a,c | b,d}: I = 0 by symmetry.
    const std::vector<int> u = {0, 0, 1, 1};
    const std::vector<int> v = {0, 1, 0, 1};
    CHECK(normalized_mutual_information(u, v) == doctest::Approx(0.0).epsilon(1e-12));

    // u = {a,b | c}, v = {a | b,c}. Joint counts: (0,0)=1 (0,1)=1 (1,1)=1.
    const std::vector<int> u2 = {0, 0, 1};
    const std::vector<int> v2 = {0, 1, 1};
    const double h = -(2.0 / 3.0) * std::log(2.0 / 3.0) - (1.0 / 3.0) * std::log(1.0 / 3.0);
    const double joint = std::log(3.0); // each joint cell has probability 1/3
    const double mi = 2.0 * h - joint;  // I = H(U) + H(V) - H(U,V)
    const double want = 2.0 * mi / (2.0 * h);
    CHECK(normalized_mutual_information(u2, v2) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("mutual information is symmetric and bounded") {
    const std::vector<int> u = {0, 0, 1, 1, 2, 0, 1};
    const std::vector<int> v = {1, 1, 1, 0, 0, 2, 2};
    const double uv = normalized_mutual_information(u, v);
    const double vu = normalized_mutual_information(v, u);
    CHECK(uv == doctest::Approx(vu).epsilon(1e-12));
    CHECK(uv >= 0.0);
    CHECK(uv <= 1.0);
}

TEST_CASE("finer partitions keep purity at one") {
    const std::vector<int> truth = {0, 0, 0, 1, 1, 1};
    const std::vector<int> singletons = {0, 1, 2, 3, 4, 5};
    CHECK(cluster_purity(singletons, truth) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cluster_purity(truth, truth) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("purity counts majority members per predicted cluster") {
    // Cluster 0 holds {t0, t0, t1} -> 2; cluster 1 holds {t1, t1, t0} -> 2.
    const std::vector<int> predicted = {0, 0, 0, 1, 1, 1};
    const std::vector<int> truth = {0, 0, 1, 1, 1, 0};
    CHECK(cluster_purity(predicted, truth) == doctest::Approx(4.0 / 6.0).epsilon(1e-12));

    const std::vector<int> merged = {0, 0, 0, 0, 0, 0};
    CHECK(cluster_purity(merged, truth) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("metrics reject empty or misaligned labelings") {
    const std::vector<int> a = {0, 1};
    const std::vector<int> b = {0, 1, 2};
    CHECK_THROWS_AS(normalized_mutual_information(a, b), DimensionMismatchError);
    CHECK_THROWS_AS(cluster_purity(a, b), DimensionMismatchError);
    const std::vector<int> empty;
    CHECK_THROWS_AS(normalized_mutual_information(empty, empty), TooFewSamplesError);
    CHECK_THROWS_AS(cluster_purity(empty, empty), TooFewSamplesError);
}
