#include <doctest.h>

#include <cmath>
#include <vector>

#include "rsiam/core_math.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/memory_bank.hpp"
#include "rsiam/rng.hpp"
#include "test_util.hpp"

using namespace rsiam;
using namespace rsiam::testutil;

TEST_CASE("refresh stores row-normalized features and is idempotent") {
    Rng rng(501);
    MemoryBank bank(6, 4, 0.2);
    bank.refresh(random_matrix(rng, 6, 4));
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(std::abs(l2_norm(bank.matrix().row(i)) - 1.0) <= 1e-12);

    // Re-normalizing unit rows only rescales by 1/sqrt(1 +- few ulp).
    const RealMatrix once = bank.matrix();
    bank.refresh(once);
    for (std::size_t i = 0; i < once.data.size(); ++i)
        CHECK(std::abs(once.data[i] - bank.matrix().data[i]) <= 1e-14);

    RealMatrix wrong(5, 4);
    CHECK_THROWS_AS(bank.refresh(wrong), DimensionMismatchError);
}

TEST_CASE("momentum zero replaces the slot with the normalized feature") {
    Rng rng(502);
    MemoryBank bank(3, 4, 0.0);
    bank.refresh(random_matrix(rng, 3, 4));
    const RealVector f = random_vector(rng, 4, 2.0);
    bank.momentum_update(1, f);
    const RealVector want = l2_normalize(f);
    for (std::size_t k = 0; k < 4; ++k) CHECK(bank.matrix()(1, k) == want[k]);
}

TEST_CASE("momentum one freezes the slot exactly") {
    Rng rng(503);
    MemoryBank bank(3, 4, 1.0);
    bank.refresh(random_matrix(rng, 3, 4));
    const RealMatrix before = bank.matrix();
    bank.momentum_update(2, random_vector(rng, 4));
    CHECK(bitwise_equal(before, bank.matrix()));
}

TEST_CASE("blended update renormalizes the convex combination") {
    MemoryBank bank(1, 2, 0.2);
    RealMatrix init(1, 2);
    init(0, 0) = 1.0; // slot holds [1, 0]
    bank.refresh(init);

    RealVector f(2, 0.0);
    f[1] = 3.0; // normalizes to [0, 1]
    bank.momentum_update(0, f);

    // blend = 0.2*[1,0] + 0.8*[0,1] = [0.2, 0.8], then unit-normalized.
    const double norm = std::sqrt(0.2 * 0.2 + 0.8 * 0.8);
    CHECK(std::abs(bank.matrix()(0, 0) - 0.2 / norm) <= 1e-12);
    CHECK(std::abs(bank.matrix()(0, 1) - 0.8 / norm) <= 1e-12);
}

TEST_CASE("updates touch only the addressed slot") {
    Rng rng(504);
    MemoryBank bank(5, 3, 0.2);
    bank.refresh(random_matrix(rng, 5, 3));
    const RealMatrix before = bank.matrix();
    bank.momentum_update(2, random_vector(rng, 3));
    for (std::size_t i = 0; i < 5; ++i) {
        if (i == 2) continue;
        for (std::size_t k = 0; k < 3; ++k) CHECK(bank.matrix()(i, k) == before(i, k));
    }
    CHECK_FALSE(bitwise_equal(before, bank.matrix()));
}

TEST_CASE("rows stay unit length through mixed update sequences") {
    Rng rng(505);
    MemoryBank bank(4, 6, 0.2);
    bank.refresh(random_matrix(rng, 4, 6));
    for (int step = 0; step < 50; ++step) {
        const std::size_t t = static_cast<std::size_t>(rng.uniform_int(0, 3));
        bank.momentum_update(t, random_vector(rng, 6, 3.0));
        if (step % 17 == 0) bank.refresh(bank.matrix());
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(std::abs(l2_norm(bank.matrix().row(i)) - 1.0) <= 1e-12);
    }
}

TEST_CASE("similarities are cosines against every slot") {
    MemoryBank bank(2, 2, 0.2);
    RealMatrix rows(2, 2);
    rows(0, 0) = 1.0;
    rows(1, 1) = 1.0;
    bank.refresh(rows);

    RealVector f(2);
    f[0] = 1.0;
    f[1] = 1.0;
    const RealVector sims = bank.similarities_to(f);
    CHECK(sims.size() == 2);
    CHECK(std::abs(sims[0] - 1.0 / std::sqrt(2.0)) <= 1e-12);
    CHECK(std::abs(sims[1] - 1.0 / std::sqrt(2.0)) <= 1e-12);

    Rng rng(506);
    MemoryBank big(7, 5, 0.2);
    big.refresh(random_matrix(rng, 7, 5));
    const RealVector probe = random_vector(rng, 5);
    const RealVector got = big.similarities_to(probe);
    for (std::size_t i = 0; i < 7; ++i) {
        const double want = cosine_similarity(l2_normalize(probe), big.matrix().row_copy(i));
        CHECK(std::abs(got[i] - want) <= 1e-12);
    }
}

TEST_CASE("bank rejects invalid construction and access") {
    CHECK_THROWS_AS(MemoryBank(3, 2, -0.1), InfeasibleConfigError);
    CHECK_THROWS_AS(MemoryBank(3, 2, 1.5), InfeasibleConfigError);

    Rng rng(507);
    MemoryBank bank(3, 2, 0.2);
    bank.refresh(random_matrix(rng, 3, 2));
    CHECK_THROWS_AS(bank.momentum_update(3, random_vector(rng, 2)), IndexOutOfRangeError);
    CHECK_THROWS_AS(bank.momentum_update(0, random_vector(rng, 4)), DimensionMismatchError);

    RealVector zero(2, 0.0);
    CHECK_THROWS_AS(bank.momentum_update(0, zero), ZeroNormError);

    RealMatrix with_zero_row(3, 2);
    with_zero_row(0, 0) = 1.0;
    with_zero_row(2, 1) = 1.0; // row 1 stays zero
    CHECK_THROWS_AS(bank.refresh(with_zero_row), ZeroNormError);
}

TEST_CASE("accessors report construction parameters") {
    MemoryBank bank(4, 3, 0.7);
    CHECK(bank.size() == 4);
    CHECK(bank.dim() == 3);
    CHECK(bank.momentum() == 0.7);
}
