#include <doctest.h>

#include <cmath>
#include <vector>

#include "rsiam/core_math.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/kernels.hpp"
#include "rsiam/rng.hpp"
#include "rsiam/trainer.hpp"
#include "test_util.hpp"

using namespace rsiam;
using namespace rsiam::testutil;

namespace {

World tiny_world(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.num_identities = 6;
    cfg.instances_per_identity_min = 4;
    cfg.instances_per_identity_max = 5;
    cfg.instances_per_image_min = 2;
    cfg.instances_per_image_max = 3;
    cfg.d_in = 12;
    cfg.rng_seed = seed;
    return generate_world(cfg);
}

TrainConfig tiny_config() {
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    tc.d_hidden = 16;
    tc.d_emb = 8;
    tc.seed = 5;
    return tc;
}

bool params_equal(const EncoderParams& a, const EncoderParams& b) {
    return bitwise_equal(a.w1, b.w1) && a.b1 == b.b1 && bitwise_equal(a.w2, b.w2) && a.b2 == b.b2;
}

} // namespace

TEST_CASE("config validation rejects out-of-range values") {
    TrainConfig ok = tiny_config();
    CHECK_NOTHROW(validate_train_config(ok));

    TrainConfig bad = ok;
    bad.epochs = -1;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
    bad = ok;
    bad.batch_size = 0;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
    bad = ok;
    bad.lr = 0.0;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
    bad = ok;
    bad.sgd_momentum = 1.0;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
    bad = ok;
    bad.weight_decay = -1e-4;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
    bad = ok;
    bad.gamma = 0.0;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
    bad = ok;
    bad.bank_momentum = 1.1;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
    bad = ok;
    bad.temperature = 0.0;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
    bad = ok;
    bad.d_emb = 0;
    CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
}

TEST_CASE("the training view carries no identity information") {
    const World world = tiny_world(601);
    const TrainingView view = make_training_view(world);
    REQUIRE(view.instances.size() == world.instances.size());
    CHECK(view.d_in == world.config.d_in);
    for (std::size_t i = 0; i < view.instances.size(); ++i) {
        CHECK(view.instances[i].instance_id == world.instances[i].instance_id);
        CHECK(view.instances[i].image_id == world.instances[i].image_id);
        CHECK(view.instances[i].view_a_input == world.instances[i].view_a_input);
        CHECK(view.instances[i].view_b_input == world.instances[i].view_b_input);
    }
    const std::vector<int> side = identity_side_table(world);
    REQUIRE(side.size() == world.instances.size());
    for (std::size_t i = 0; i < side.size(); ++i)
        CHECK(side[i] == world.instances[i].identity_id);
}

TEST_CASE("training never reads the ground-truth identities") {
    const World world = tiny_world(602);
    World relabeled = world;
    for (InstanceRecord& rec : relabeled.instances) rec.identity_id = 0;

    const TrainConfig tc = tiny_config();
    const TrainOutcome a = train(world, tc);
    const TrainOutcome b = train(relabeled, tc);
    CHECK(params_equal(a.params, b.params));
    CHECK(a.final_labels == b.final_labels);
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].loss_total == b.history[e].loss_total);
        CHECK(a.history[e].num_clusters == b.history[e].num_clusters);
        // purity and nmi are reporting-only and may differ
    }
}

TEST_CASE("training is deterministic given the seed") {
    const World world = tiny_world(603);
    const TrainConfig tc = tiny_config();
    const TrainOutcome a = train(world, tc);
    const TrainOutcome b = train(world, tc);
    CHECK(params_equal(a.params, b.params));
    CHECK(a.final_labels == b.final_labels);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].loss_ins == b.history[e].loss_ins);
        CHECK(a.history[e].loss_int == b.history[e].loss_int);
        CHECK(a.history[e].loss_clu == b.history[e].loss_clu);
        CHECK(a.history[e].nmi == b.history[e].nmi);
    }

    TrainConfig other = tc;
    other.seed = 6;
    const TrainOutcome c = train(world, other);
    CHECK_FALSE(params_equal(a.params, c.params));
}

TEST_CASE("zero epochs returns the initial parameters and no history") {
    const World world = tiny_world(604);
    TrainConfig tc = tiny_config();
    tc.epochs = 0;
    const TrainOutcome out = train(world, tc);
    CHECK(out.history.empty());

    const EncoderParams init =
        init_params(static_cast<std::size_t>(world.config.d_in),
                    static_cast<std::size_t>(tc.d_hidden), static_cast<std::size_t>(tc.d_emb),
                    derive_seed(tc.seed, "init"));
    CHECK(params_equal(out.params, init));
}

TEST_CASE("with every loss disabled the parameters never move") {
    const World world = tiny_world(605);
    TrainConfig tc = tiny_config();
    tc.use_ins = false;
    tc.use_int = false;
    tc.use_contrastive = false;
    const TrainOutcome out = train(world, tc);
    TrainConfig zero = tc;
    zero.epochs = 0;
    const TrainOutcome frozen = train(world, zero);
    CHECK(params_equal(out.params, frozen.params));
    CHECK(out.history.size() == 3);
    for (const EpochMetrics& m : out.history) CHECK(m.loss_total == 0.0);
}

TEST_CASE("extracted features average the two view embeddings") {
    const World world = tiny_world(606);
    const TrainingView view = make_training_view(world);
    const EncoderParams params = init_params(static_cast<std::size_t>(world.config.d_in), 16, 8, 3);

    const RealMatrix fused = extract_all_features(params, view, false);
    const RealMatrix scene_only = extract_all_features(params, view, true);
    REQUIRE(fused.rows == view.instances.size());

    for (std::size_t i = 0; i < view.instances.size(); ++i) {
        RealMatrix xa(1, view.instances[i].view_a_input.size());
        RealMatrix xb(1, view.instances[i].view_b_input.size());
        xa.set_row(0, view.instances[i].view_a_input);
        xb.set_row(0, view.instances[i].view_b_input);
        const RealVector fa = forward(params, xa).row_copy(0);
        const RealVector fb = forward(params, xb).row_copy(0);
        for (std::size_t k = 0; k < fa.size(); ++k) {
            CHECK(std::abs(fused(i, k) - 0.5 * (fa[k] + fb[k])) <= 1e-12);
            CHECK(scene_only(i, k) == fa[k]);
        }
    }
}

TEST_CASE("zero context makes the two views and their features coincide") {
    SynthConfig cfg;
    cfg.num_identities = 5;
    cfg.instances_per_identity_min = 3;
    cfg.instances_per_identity_max = 4;
    cfg.instances_per_image_min = 1;
    cfg.instances_per_image_max = 2;
    cfg.d_in = 10;
    cfg.context_sigma = 0.0;
    cfg.rng_seed = 607;
    const World world = generate_world(cfg);
    const TrainingView view = make_training_view(world);
    const EncoderParams params = init_params(10, 12, 6, 4);

    const RealMatrix fused = extract_all_features(params, view, false);
    const RealMatrix scene_only = extract_all_features(params, view, true);
    CHECK(bitwise_equal(fused, scene_only)); // view_a == view_b, mean of equals
}

TEST_CASE("losses shrink as training proceeds on a pinned seed") {
    const World world = tiny_world(608);
    TrainConfig tc = tiny_config();
    tc.epochs = 10;
    const TrainOutcome out = train(world, tc);
    REQUIRE(out.history.size() == 10);
    CHECK(out.history.back().loss_total < out.history.front().loss_total);
    for (const EpochMetrics& m : out.history) {
        CHECK(std::isfinite(m.loss_total));
        CHECK(m.loss_clu >= 0.0);
        CHECK(m.loss_ins >= 0.0);
        CHECK(m.loss_int >= 0.0);
        CHECK(m.num_clusters >= 1);
        CHECK(m.purity >= 0.0);
        CHECK(m.purity <= 1.0);
        CHECK(m.nmi >= 0.0);
        CHECK(m.nmi <= 1.0);
        CHECK(m.wall_seconds >= 0.0);
    }
    CHECK(out.final_num_clusters >= 1);
    CHECK(static_cast<std::size_t>(out.final_num_clusters) <= world.instances.size());
}

TEST_CASE("clustering quality improves over a short pinned run") {
    const World world = tiny_world(609);
    TrainConfig tc = tiny_config();
    tc.epochs = 12;
    const TrainOutcome out = train(world, tc);
    CHECK(out.history.back().nmi > out.history.front().nmi);
}

TEST_CASE("epoch counter and incremental state advance together") {
    const World world = tiny_world(610);
    TrainConfig tc = tiny_config();
    TrainerState state = init_trainer(world, tc);
    CHECK(state.epoch == 0);
    const EpochMetrics m0 = run_epoch(state);
    CHECK(m0.epoch == 0);
    CHECK(state.epoch == 1);
    const EpochMetrics m1 = run_epoch(state);
    CHECK(m1.epoch == 1);
    CHECK(state.epoch == 2);
    CHECK(state.labels.size() == world.instances.size());

    // Stepwise epochs match the packaged loop.
    TrainConfig two = tc;
    two.epochs = 2;
    const TrainOutcome packaged = train(world, two);
    CHECK(params_equal(state.params, packaged.params));
    CHECK(packaged.history[0].loss_total == m0.loss_total);
    CHECK(packaged.history[1].loss_total == m1.loss_total);
}

TEST_CASE("search-path-only mode still trains and clusters") {
    const World world = tiny_world(611);
    TrainConfig tc = tiny_config();
    tc.search_path_only = true;
    tc.use_cluster_labels = false;
    const TrainOutcome out = train(world, tc);
    CHECK(out.history.size() == 3);
    for (const EpochMetrics& m : out.history) {
        CHECK(m.loss_ins == 0.0);
        CHECK(m.loss_int == 0.0);
        CHECK(m.loss_clu > 0.0);
    }
    TrainConfig zero = tc;
    zero.epochs = 0;
    CHECK_FALSE(params_equal(out.params, train(world, zero).params));
}

TEST_CASE("trainer rejects worlds smaller than a pair or an oversized batch") {
    SynthConfig cfg;
    cfg.num_identities = 2;
    cfg.instances_per_identity_min = 2;
    cfg.instances_per_identity_max = 2;
    cfg.instances_per_image_min = 1;
    cfg.instances_per_image_max = 2;
    cfg.d_in = 6;
    cfg.rng_seed = 612;
    const World world = generate_world(cfg);

    TrainConfig tc = tiny_config();
    tc.batch_size = static_cast<int>(world.instances.size()) + 1;
    CHECK_THROWS_AS(init_trainer(world, tc), ConfigError);
}
