#include "rsiam/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "rsiam/cluster_metrics.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/losses.hpp"
#include "rsiam/rng.hpp"

namespace rsiam {

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.lr <= 0.0) throw ConfigError("train: lr must be > 0");
    if (cfg.lr_drop_epoch < 0) throw ConfigError("train: lr_drop_epoch must be >= 0");
    if (cfg.sgd_momentum < 0.0 || cfg.sgd_momentum >= 1.0)
        throw ConfigError("train: sgd_momentum must be in [0, 1)");
    if (cfg.weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (cfg.gamma <= 0.0) throw ConfigError("train: gamma must be > 0");
    if (cfg.bank_momentum < 0.0 || cfg.bank_momentum > 1.0)
        throw ConfigError("train: bank_momentum must be in [0, 1]");
    if (cfg.temperature <= 0.0) throw ConfigError("train: temperature must be > 0");
    if (cfg.d_hidden < 1 || cfg.d_emb < 1) throw ConfigError("train: encoder dims must be >= 1");
}

TrainingView make_training_view(const World& world) {
    TrainingView view;
    view.d_in = world.config.d_in;
    view.instances.reserve(world.instances.size());
    for (const InstanceRecord& rec : world.instances) {
        TrainingInstance t;
        t.instance_id = rec.instance_id;
        t.image_id = rec.image_id;
        t.view_a_input = rec.view_a_input;
        t.view_b_input = rec.view_b_input;
        view.instances.push_back(std::move(t));
    }
    return view;
}

std::vector<int> identity_side_table(const World& world) {
    std::vector<int> ids;
    ids.reserve(world.instances.size());
    for (const InstanceRecord& rec : world.instances) ids.push_back(rec.identity_id);
    return ids;
}

RealMatrix extract_all_features(const EncoderParams& params, const TrainingView& view,
                                bool search_path_only) {
    const std::size_t n = view.instances.size();
    RealMatrix xa(n, static_cast<std::size_t>(view.d_in));
    for (std::size_t i = 0; i < n; ++i) xa.set_row(i, view.instances[i].view_a_input);
    RealMatrix fa = forward(params, xa);
    if (search_path_only) return fa;

    RealMatrix xb(n, static_cast<std::size_t>(view.d_in));
    for (std::size_t i = 0; i < n; ++i) xb.set_row(i, view.instances[i].view_b_input);
    RealMatrix fb = forward(params, xb);
    for (std::size_t i = 0; i < fa.data.size(); ++i) fa.data[i] = 0.5 * (fa.data[i] + fb.data[i]);
    return fa;
}

TrainerState init_trainer(const World& world, const TrainConfig& cfg) {
    validate_train_config(cfg);
    const std::size_t n = world.instances.size();
    if (n < 2) throw TooFewSamplesError("train: need at least 2 instances, got " + std::to_string(n));
    if (static_cast<std::size_t>(cfg.batch_size) > n) {
        throw ConfigError("train: batch_size " + std::to_string(cfg.batch_size) + " exceeds " +
                          std::to_string(n) + " instances");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (world.instances[i].instance_id != static_cast<int>(i))
            throw IndexOutOfRangeError("train: instance ids must be dense ascending");
    }

    TrainerState state{.config = cfg,
                       .view = make_training_view(world),
                       .identities = identity_side_table(world),
                       .params = init_params(world.config.d_in, cfg.d_hidden, cfg.d_emb,
                                             derive_seed(cfg.seed, "init")),
                       .bank = MemoryBank(n, static_cast<std::size_t>(cfg.d_emb), cfg.bank_momentum),
                       .labels = {},
                       .num_clusters = 0,
                       .epoch = 0,
                       .linearity_checked = false};
    // Seed the bank from the fresh encoder so it is never in an un-normalized
    // state; the first epoch refreshes it again with the same values.
    state.bank.refresh(extract_all_features(state.params, state.view, cfg.search_path_only));
    return state;
}

namespace {

double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

/// Recomputes each enabled term on its own and checks that the composite
/// gradient is their weighted sum. Guards the loss composition, once per run.
void check_linearity(const RealMatrix& fa, const RealMatrix& fb, const MemoryBank& bank,
                     const std::vector<int>& labels, const std::vector<int>& ids,
                     const TotalLossOptions& opts, const LossOutput& total) {
    RealMatrix sum_a = RealMatrix::zeros(fa.rows, fa.cols);
    RealMatrix sum_b = RealMatrix::zeros(fb.rows, fb.cols);
    if (opts.use_ins) {
        LossOutput t = self_instance_consistency(fa, fb);
        sum_a.add_scaled(t.grad_a, opts.weight_ins);
        sum_b.add_scaled(t.grad_b, opts.weight_ins);
    }
    if (opts.use_int && fa.rows >= 2) {
        LossOutput t = inter_instance_similarity_consistency(fa, fb, opts.temperature,
                                                             opts.int_reduction);
        sum_a.add_scaled(t.grad_a, opts.weight_int);
        sum_b.add_scaled(t.grad_b, opts.weight_int);
    }
    if (opts.use_contrastive) {
        RealMatrix fused = RealMatrix::zeros(fa.rows, fa.cols);
        for (std::size_t i = 0; i < fused.data.size(); ++i)
            fused.data[i] = 0.5 * (fa.data[i] + fb.data[i]);
        LossOutput t = opts.use_cluster_labels
                           ? cluster_contrastive(fused, bank, labels, ids, opts.gamma)
                           : instance_recognition_loss(fused, bank, ids, opts.gamma);
        sum_a.add_scaled(t.grad_a, 0.5 * opts.weight_clu);
        sum_b.add_scaled(t.grad_a, 0.5 * opts.weight_clu);
    }

    const double diff = std::max(max_abs_diff(sum_a, total.grad_a), max_abs_diff(sum_b, total.grad_b));
    if (diff > 1e-9) {
        throw Error("linearity check failed: composite gradient deviates from term sum by " +
                    std::to_string(diff));
    }
}

} // namespace

EpochMetrics run_epoch(TrainerState& state) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainConfig& cfg = state.config;
    const std::size_t n = state.view.instances.size();

    RealMatrix all_features = extract_all_features(state.params, state.view, cfg.search_path_only);
    std::vector<int> image_ids(n);
    for (std::size_t i = 0; i < n; ++i) image_ids[i] = state.view.instances[i].image_id;

    ClusterOptions copts;
    copts.filter_enabled = cfg.filter_enabled;
    copts.exclude_same_image_neighbors = cfg.neighbor_excludes_same_image;
    PseudoLabeling labeling = cluster_epoch(all_features, image_ids, copts);
    state.labels = labeling.labels;
    state.num_clusters = labeling.num_clusters;

    state.bank.refresh(all_features);

    EpochMetrics metrics;
    metrics.epoch = state.epoch;
    metrics.num_clusters = labeling.num_clusters;
    metrics.purity = cluster_purity(labeling.labels, state.identities);
    metrics.nmi = normalized_mutual_information(labeling.labels, state.identities);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(state.epoch)));
    shuffle_rng.shuffle(order);

    const double lr_now = (state.epoch >= cfg.lr_drop_epoch) ? cfg.lr * 0.1 : cfg.lr;
    const std::size_t d_in = static_cast<std::size_t>(state.view.d_in);

    double sum_ins = 0.0, sum_int = 0.0, sum_clu = 0.0, sum_total = 0.0;
    std::size_t num_batches = 0;

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
        const std::size_t b = stop - start;
        std::vector<int> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));

        RealMatrix xa(b, d_in), xb(b, d_in);
        for (std::size_t r = 0; r < b; ++r) {
            const TrainingInstance& inst = state.view.instances[static_cast<std::size_t>(ids[r])];
            xa.set_row(r, inst.view_a_input);
            xb.set_row(r, inst.view_b_input);
        }

        ForwardCache cache_a, cache_b;
        RealMatrix fa = forward(state.params, xa, cache_a);

        // Without any enabled loss there is no gradient and therefore no
        // step (weight decay alone must not move the parameters).
        const bool any_loss = cfg.search_path_only
                                  ? cfg.use_contrastive
                                  : (cfg.use_ins || cfg.use_int || cfg.use_contrastive);
        ParamGrads grads;
        LossBreakdown bd;
        double batch_total = 0.0;
        RealMatrix bank_features;

        if (cfg.search_path_only) {
            if (cfg.use_contrastive) {
                LossOutput clu =
                    cfg.use_cluster_labels
                        ? cluster_contrastive(fa, state.bank, state.labels, ids, cfg.gamma)
                        : instance_recognition_loss(fa, state.bank, ids, cfg.gamma);
                bd.clu = clu.value;
                batch_total = clu.value;
                grads = backward(state.params, cache_a, clu.grad_a);
            }
            bank_features = std::move(fa);
        } else {
            RealMatrix fb = forward(state.params, xb, cache_b);
            TotalLossOptions opts;
            opts.gamma = cfg.gamma;
            opts.temperature = cfg.temperature;
            // Mean reduction keeps the similarity term on the same per-batch
            // scale as the other two; summed rows would let it dominate the
            // composite gradient by a factor of the batch size.
            opts.int_reduction = IntReduction::Mean;
            opts.use_ins = cfg.use_ins;
            opts.use_int = cfg.use_int;
            opts.use_contrastive = cfg.use_contrastive;
            opts.use_cluster_labels = cfg.use_cluster_labels;
            LossOutput total = total_loss(fa, fb, state.bank, state.labels, ids, opts, &bd);
            batch_total = total.value;
            if (!state.linearity_checked) {
                check_linearity(fa, fb, state.bank, state.labels, ids, opts, total);
                state.linearity_checked = true;
            }
            if (any_loss) {
                grads = backward(state.params, cache_a, total.grad_a);
                ParamGrads grads_b = backward(state.params, cache_b, total.grad_b);
                grads.add_scaled(grads_b, 1.0);
            }

            bank_features = RealMatrix::zeros(fa.rows, fa.cols);
            for (std::size_t i = 0; i < fa.data.size(); ++i)
                bank_features.data[i] = 0.5 * (fa.data[i] + fb.data[i]);
        }

        if (any_loss) sgd_step(state.params, grads, lr_now, cfg.sgd_momentum, cfg.weight_decay);

        // Bank rows blend in the features of this batch's forward pass,
        // ascending instance id for a deterministic write order.
        std::vector<std::pair<int, std::size_t>> rows(b);
        for (std::size_t r = 0; r < b; ++r) rows[r] = {ids[r], r};
        std::sort(rows.begin(), rows.end());
        for (const auto& [id, r] : rows) {
            state.bank.momentum_update(static_cast<std::size_t>(id),
                                       bank_features.row_copy(r));
        }

        sum_ins += bd.ins;
        sum_int += bd.inter;
        sum_clu += bd.clu;
        sum_total += batch_total;
        ++num_batches;
    }

    const double inv = 1.0 / static_cast<double>(num_batches);
    metrics.loss_ins = sum_ins * inv;
    metrics.loss_int = sum_int * inv;
    metrics.loss_clu = sum_clu * inv;
    metrics.loss_total = sum_total * inv;
    metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++state.epoch;
    return metrics;
}

TrainOutcome train(const World& world, const TrainConfig& cfg) {
    TrainerState state = init_trainer(world, cfg);
    TrainOutcome outcome;
    for (int e = 0; e < cfg.epochs; ++e) outcome.history.push_back(run_epoch(state));
    outcome.params = std::move(state.params);
    outcome.final_labels = std::move(state.labels);
    outcome.final_num_clusters = state.num_clusters;
    return outcome;
}

} // namespace rsiam
