#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "rsiam/core_math.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/losses.hpp"
#include "rsiam/memory_bank.hpp"
#include "rsiam/rng.hpp"
#include "test_util.hpp"

using namespace rsiam;
using namespace rsiam::testutil;

namespace {

MemoryBank random_bank(Rng& rng, std::size_t n, std::size_t d, double momentum = 0.2) {
    MemoryBank bank(n, d, momentum);
    bank.refresh(random_matrix(rng, n, d));
    return bank;
}

std::vector<int> random_labels(Rng& rng, std::size_t n, int num_clusters) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i)
        labels[i] = static_cast<int>(rng.uniform_int(0, num_clusters - 1));
    return labels;
}

} // namespace

TEST_CASE("self consistency: fixed point, range, and symmetry") {
    Rng rng(301);
    RealMatrix f = random_matrix(rng, 5, 6);
    const LossOutput same = self_instance_consistency(f, f);
    CHECK(std::abs(same.value) <= 1e-12);

    RealMatrix neg = f;
    for (double& x : neg.data) x = -x;
    const LossOutput opposite = self_instance_consistency(f, neg);
    CHECK(opposite.value == doctest::Approx(2.0).epsilon(1e-12));

    RealMatrix g = random_matrix(rng, 5, 6);
    const LossOutput ab = self_instance_consistency(f, g);
    const LossOutput ba = self_instance_consistency(g, f);
    CHECK(ab.value == ba.value);
    CHECK(bitwise_equal(ab.grad_a, ba.grad_b));
    CHECK(ab.value >= 0.0);
    CHECK(ab.value <= 2.0);
}

TEST_CASE("self consistency gradients match finite differences") {
    Rng rng(302);
    for (int trial = 0; trial < 8; ++trial) {
        const RealMatrix fa = random_matrix(rng, 6, 8);
        const RealMatrix fb = random_matrix(rng, 6, 8);
        const LossOutput out = self_instance_consistency(fa, fb);
        const RealMatrix fd_a = fd_gradient(
            fa, [&](const RealMatrix& m) { return self_instance_consistency(m, fb).value; });
        const RealMatrix fd_b = fd_gradient(
            fb, [&](const RealMatrix& m) { return self_instance_consistency(fa, m).value; });
        CHECK(max_grad_rel_err(out.grad_a, fd_a) <= 1e-5);
        CHECK(max_grad_rel_err(out.grad_b, fd_b) <= 1e-5);
    }
}

TEST_CASE("similarity consistency: fixed point and swap symmetry") {
    Rng rng(303);
    RealMatrix f = random_matrix(rng, 6, 5);
    const LossOutput same = inter_instance_similarity_consistency(f, f, 0.1);
    CHECK(same.value == 0.0); // identical rows give identical distributions, termwise zero

    RealMatrix g = random_matrix(rng, 6, 5);
    const LossOutput ab = inter_instance_similarity_consistency(f, g, 0.1);
    const LossOutput ba = inter_instance_similarity_consistency(g, f, 0.1);
    CHECK(ab.value == ba.value); // exact: per-row terms commute
    CHECK(bitwise_equal(ab.grad_a, ba.grad_b));
    CHECK(ab.value >= 0.0);
}

TEST_CASE("similarity consistency rejects bad inputs") {
    Rng rng(304);
    RealMatrix f = random_matrix(rng, 4, 3);
    CHECK_THROWS_AS(inter_instance_similarity_consistency(f, f, 0.0), NonPositiveTemperatureError);
    RealMatrix one = random_matrix(rng, 1, 3);
    CHECK_THROWS_AS(inter_instance_similarity_consistency(one, one, 0.1), BatchTooSmallError);
    RealMatrix other = random_matrix(rng, 4, 2);
    CHECK_THROWS_AS(inter_instance_similarity_consistency(f, other, 0.1), DimensionMismatchError);
}

TEST_CASE("similarity consistency value matches a naive recomputation") {
    Rng rng(305);
    const double tau = 0.1;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t b = 3 + static_cast<std::size_t>(trial % 3);
        const RealMatrix fa = random_matrix(rng, b, 4);
        const RealMatrix fb = random_matrix(rng, b, 4);
        const LossOutput out = inter_instance_similarity_consistency(fa, fb, tau);

        // From-scratch recomputation: pairwise cosines, plain softmax, KL sums.
        double expected = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            std::vector<double> ea, eb;
            double za = 0.0, zb = 0.0;
            for (std::size_t j = 0; j < b; ++j) {
                if (j == i) continue;
                ea.push_back(std::exp(cosine_similarity(fa.row_copy(i), fa.row_copy(j)) / tau));
                eb.push_back(std::exp(cosine_similarity(fb.row_copy(i), fb.row_copy(j)) / tau));
                za += ea.back();
                zb += eb.back();
            }
            for (std::size_t j = 0; j < ea.size(); ++j) {
                const double pa = ea[j] / za;
                const double pb = eb[j] / zb;
                expected += pa * std::log(pa / pb) + pb * std::log(pb / pa);
            }
        }
        CHECK(rel_err(out.value, expected) <= 1e-12);
    }
}

TEST_CASE("similarity consistency mean reduction divides by the batch") {
    Rng rng(306);
    const RealMatrix fa = random_matrix(rng, 5, 4);
    const RealMatrix fb = random_matrix(rng, 5, 4);
    const LossOutput sum = inter_instance_similarity_consistency(fa, fb, 0.1, IntReduction::Sum);
    const LossOutput mean = inter_instance_similarity_consistency(fa, fb, 0.1, IntReduction::Mean);
    CHECK(mean.value == doctest::Approx(sum.value / 5.0).epsilon(1e-12));
}

TEST_CASE("similarity consistency gradients match finite differences") {
    Rng rng(307);
    for (int trial = 0; trial < 6; ++trial) {
        const RealMatrix fa = random_matrix(rng, 6, 8);
        const RealMatrix fb = random_matrix(rng, 6, 8);
        const LossOutput out = inter_instance_similarity_consistency(fa, fb, 0.1);
        const RealMatrix fd_a = fd_gradient(fa, [&](const RealMatrix& m) {
            return inter_instance_similarity_consistency(m, fb, 0.1).value;
        });
        const RealMatrix fd_b = fd_gradient(fb, [&](const RealMatrix& m) {
            return inter_instance_similarity_consistency(fa, m, 0.1).value;
        });
        CHECK(max_grad_rel_err(out.grad_a, fd_a) <= 1e-5);
        CHECK(max_grad_rel_err(out.grad_b, fd_b) <= 1e-5);
    }
}

TEST_CASE("cluster contrastive: one positive one negative at equal similarity gives ln 2") {
    MemoryBank bank(2, 2, 0.2);
    RealMatrix rows(2, 2);
    rows(0, 0) = 1.0; // slot 0
    rows(1, 1) = 1.0; // slot 1
    bank.refresh(rows);

    RealMatrix f(1, 2);
    f(0, 0) = 1.0;
    f(0, 1) = 1.0; // equidistant from both slots
    const std::vector<int> labels = {0, 1};
    const LossOutput out = cluster_contrastive(f, bank, labels, {0}, 16.0);
    CHECK(std::abs(out.value - std::log(2.0)) <= 1e-12);
}

TEST_CASE("cluster contrastive: perfect separation drives the loss to zero") {
    MemoryBank bank(2, 2, 0.2);
    RealMatrix rows(2, 2);
    rows(0, 0) = 1.0;
    rows(1, 0) = -1.0; // antipodal to slot 0
    bank.refresh(rows);

    RealMatrix f(1, 2);
    f(0, 0) = 1.0; // s_p = 1 on slot 0, s_n = -1 on slot 1
    const LossOutput out = cluster_contrastive(f, bank, {0, 1}, {0}, 16.0);
    CHECK(out.value <= 1e-12);
    CHECK(out.value > 0.0);
}

TEST_CASE("cluster contrastive input validation") {
    Rng rng(308);
    MemoryBank bank = random_bank(rng, 5, 4);
    RealMatrix f = random_matrix(rng, 2, 4);

    CHECK_THROWS_AS(cluster_contrastive(f, bank, {0, 1, 2}, {0, 1}, 16.0), MissingLabelError);
    CHECK_THROWS_AS(cluster_contrastive(f, bank, {0, 1, 2, 3, -1}, {0, 1}, 16.0),
                    MissingLabelError);
    CHECK_THROWS_AS(cluster_contrastive(f, bank, {0, 1, 2, 3, 4}, {0, 7}, 16.0),
                    IndexOutOfRangeError);
    RealMatrix wrong = random_matrix(rng, 2, 3);
    CHECK_THROWS_AS(cluster_contrastive(wrong, bank, {0, 1, 2, 3, 4}, {0, 1}, 16.0),
                    DimensionMismatchError);
}

TEST_CASE("cluster contrastive with a single all-covering cluster is zero") {
    Rng rng(309);
    MemoryBank bank = random_bank(rng, 4, 3);
    RealMatrix f = random_matrix(rng, 2, 3);
    const LossOutput out = cluster_contrastive(f, bank, {0, 0, 0, 0}, {1, 2}, 16.0);
    CHECK(out.value == 0.0);
    for (double g : out.grad_a.data) CHECK(g == 0.0);
}

TEST_CASE("cluster contrastive value matches the naive pairwise formula") {
    Rng rng(310);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 6, d = 4, b = 3;
        MemoryBank bank = random_bank(rng, n, d);
        const std::vector<int> labels = random_labels(rng, n, 3);
        const RealMatrix f = random_matrix(rng, b, d);
        const std::vector<int> ids = {0, 2, 4};
        const double gamma = 16.0;
        const LossOutput out = cluster_contrastive(f, bank, labels, ids, gamma);

        double expected = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            const int c = labels[static_cast<std::size_t>(ids[r])];
            double pair_sum = 0.0;
            bool has_negative = false;
            for (std::size_t kn = 0; kn < n; ++kn) {
                if (labels[kn] == c) continue;
                has_negative = true;
                const double sn = cosine_similarity(f.row_copy(r), bank.matrix().row_copy(kn));
                for (std::size_t kp = 0; kp < n; ++kp) {
                    if (labels[kp] != c) continue;
                    const double sp = cosine_similarity(f.row_copy(r), bank.matrix().row_copy(kp));
                    pair_sum += std::exp(gamma * (sn - sp));
                }
            }
            if (has_negative) expected += std::log1p(pair_sum);
        }
        expected /= static_cast<double>(b);
        CHECK(rel_err(out.value, expected) <= 1e-12);
    }
}

TEST_CASE("cluster contrastive gradients match finite differences") {
    Rng rng(311);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = 10, d = 8, b = 6;
        MemoryBank bank = random_bank(rng, n, d);
        const std::vector<int> labels = random_labels(rng, n, 4);
        const RealMatrix f = random_matrix(rng, b, d);
        std::vector<int> ids(b);
        std::iota(ids.begin(), ids.end(), 0);
        const LossOutput out = cluster_contrastive(f, bank, labels, ids, 16.0);
        const RealMatrix fd = fd_gradient(f, [&](const RealMatrix& m) {
            return cluster_contrastive(m, bank, labels, ids, 16.0).value;
        });
        CHECK(max_grad_rel_err(out.grad_a, fd) <= 1e-5);
    }
}

TEST_CASE("cluster contrastive leaves the bank untouched") {
    Rng rng(312);
    MemoryBank bank = random_bank(rng, 5, 4);
    const RealMatrix before = bank.matrix();
    RealMatrix f = random_matrix(rng, 3, 4);
    cluster_contrastive(f, bank, random_labels(rng, 5, 2), {0, 1, 2}, 16.0);
    CHECK(bitwise_equal(before, bank.matrix()));
}

TEST_CASE("instance recognition equals singleton-label cluster contrastive") {
    Rng rng(313);
    MemoryBank bank = random_bank(rng, 6, 4);
    RealMatrix f = random_matrix(rng, 3, 4);
    const std::vector<int> ids = {1, 3, 5};
    std::vector<int> singleton(6);
    std::iota(singleton.begin(), singleton.end(), 0);
    const LossOutput a = instance_recognition_loss(f, bank, ids, 16.0);
    const LossOutput b = cluster_contrastive(f, bank, singleton, ids, 16.0);
    CHECK(a.value == b.value);
    CHECK(bitwise_equal(a.grad_a, b.grad_a));
}

TEST_CASE("instance recognition pulls features toward their own slot") {
    MemoryBank bank(3, 2, 0.2);
    RealMatrix rows(3, 2);
    rows(0, 0) = 1.0;
    rows(1, 1) = 1.0;
    rows(2, 0) = -1.0;
    bank.refresh(rows);

    RealMatrix near(1, 2), far(1, 2);
    near(0, 0) = 0.95;
    near(0, 1) = 0.05; // mostly aligned with its slot
    far(0, 0) = 0.1;
    far(0, 1) = 0.9;
    const double l_near = instance_recognition_loss(near, bank, {0}, 16.0).value;
    const double l_far = instance_recognition_loss(far, bank, {0}, 16.0).value;
    CHECK(l_near < l_far);
}

TEST_CASE("total loss composes the enabled terms linearly") {
    Rng rng(314);
    const std::size_t n = 8, d = 6, b = 4;
    MemoryBank bank = random_bank(rng, n, d);
    const std::vector<int> labels = random_labels(rng, n, 3);
    const RealMatrix fa = random_matrix(rng, b, d);
    const RealMatrix fb = random_matrix(rng, b, d);
    const std::vector<int> ids = {0, 3, 5, 7};

    TotalLossOptions opts;
    LossBreakdown bd;
    const LossOutput total = total_loss(fa, fb, bank, labels, ids, opts, &bd);

    const LossOutput ins = self_instance_consistency(fa, fb);
    const LossOutput inter = inter_instance_similarity_consistency(fa, fb, opts.temperature);
    RealMatrix fused = RealMatrix::zeros(b, d);
    for (std::size_t i = 0; i < fused.data.size(); ++i)
        fused.data[i] = 0.5 * (fa.data[i] + fb.data[i]);
    const LossOutput clu = cluster_contrastive(fused, bank, labels, ids, opts.gamma);

    CHECK(bd.ins == ins.value);
    CHECK(bd.inter == inter.value);
    CHECK(bd.clu == clu.value);
    CHECK(total.value == doctest::Approx(ins.value + inter.value + clu.value).epsilon(1e-12));

    for (std::size_t i = 0; i < total.grad_a.data.size(); ++i) {
        const double want = ins.grad_a.data[i] + inter.grad_a.data[i] + 0.5 * clu.grad_a.data[i];
        CHECK(rel_err(total.grad_a.data[i], want) <= 1e-12);
    }
}

TEST_CASE("total loss weights scale their terms") {
    Rng rng(315);
    MemoryBank bank = random_bank(rng, 6, 4);
    const std::vector<int> labels = random_labels(rng, 6, 2);
    const RealMatrix fa = random_matrix(rng, 3, 4);
    const RealMatrix fb = random_matrix(rng, 3, 4);
    const std::vector<int> ids = {0, 1, 2};

    TotalLossOptions only_ins;
    only_ins.use_int = false;
    only_ins.use_contrastive = false;
    only_ins.weight_ins = 2.5;
    const LossOutput scaled = total_loss(fa, fb, bank, labels, ids, only_ins);
    const LossOutput plain = self_instance_consistency(fa, fb);
    CHECK(scaled.value == doctest::Approx(2.5 * plain.value).epsilon(1e-12));
}

TEST_CASE("total loss skips the similarity term for singleton batches") {
    Rng rng(316);
    MemoryBank bank = random_bank(rng, 4, 3);
    const RealMatrix fa = random_matrix(rng, 1, 3);
    const RealMatrix fb = random_matrix(rng, 1, 3);
    LossBreakdown bd;
    const LossOutput out =
        total_loss(fa, fb, bank, {0, 1, 2, 3}, {2}, TotalLossOptions{}, &bd);
    CHECK(bd.inter == 0.0);
    CHECK(std::isfinite(out.value));
}

TEST_CASE("total loss with every term disabled is zero with zero gradients") {
    Rng rng(317);
    MemoryBank bank = random_bank(rng, 4, 3);
    const RealMatrix fa = random_matrix(rng, 2, 3);
    const RealMatrix fb = random_matrix(rng, 2, 3);
    TotalLossOptions opts;
    opts.use_ins = false;
    opts.use_int = false;
    opts.use_contrastive = false;
    const LossOutput out = total_loss(fa, fb, bank, {0, 1, 2, 3}, {0, 1}, opts);
    CHECK(out.value == 0.0);
    for (double g : out.grad_a.data) CHECK(g == 0.0);
    for (double g : out.grad_b.data) CHECK(g == 0.0);
}

TEST_CASE("total loss gradients match finite differences") {
    Rng rng(318);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = 9, d = 8, b = 6;
        MemoryBank bank = random_bank(rng, n, d);
        const std::vector<int> labels = random_labels(rng, n, 3);
        const RealMatrix fa = random_matrix(rng, b, d);
        const RealMatrix fb = random_matrix(rng, b, d);
        std::vector<int> ids(b);
        std::iota(ids.begin(), ids.end(), 1);
        TotalLossOptions opts;
        const LossOutput out = total_loss(fa, fb, bank, labels, ids, opts);
        const RealMatrix fd_a = fd_gradient(fa, [&](const RealMatrix& m) {
            return total_loss(m, fb, bank, labels, ids, opts).value;
        });
        const RealMatrix fd_b = fd_gradient(fb, [&](const RealMatrix& m) {
            return total_loss(fa, m, bank, labels, ids, opts).value;
        });
        CHECK(max_grad_rel_err(out.grad_a, fd_a) <= 1e-5);
        CHECK(max_grad_rel_err(out.grad_b, fd_b) <= 1e-5);
    }
}
