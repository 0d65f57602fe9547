#pragma once

#include <cstdint>
#include <vector>

#include "rsiam/clustering.hpp"
#include "rsiam/encoder.hpp"
#include "rsiam/memory_bank.hpp"
#include "rsiam/synth.hpp"
#include "rsiam/types.hpp"

namespace rsiam {

struct TrainConfig {
    int epochs = 60;
    int batch_size = 16;
    double lr = 0.05;
    int lr_drop_epoch = 40; // zero-based; epochs >= this use lr * 0.1
    double sgd_momentum = 0.9;
    double weight_decay = 5e-4;
    double gamma = 16.0;
    double bank_momentum = 0.2;
    double temperature = 0.1;
    bool use_ins = true;
    bool use_int = true;
    bool use_contrastive = true;
    /// true: contrastive term over pseudo-label clusters; false: instance
    /// recognition (every instance its own class).
    bool use_cluster_labels = true;
    /// Ablation mode: train on scene-view features alone, consistency terms
    /// off regardless of the toggles above.
    bool search_path_only = false;
    bool filter_enabled = true;
    bool neighbor_excludes_same_image = false;
    int d_hidden = 32;
    int d_emb = 16;
    std::uint64_t seed = 1;
};

void validate_train_config(const TrainConfig& cfg);

/// What the training loop is allowed to see: ids, image membership, the two
/// raw views. No identity field exists here by construction.
struct TrainingInstance {
    int instance_id = -1;
    int image_id = -1;
    RealVector view_a_input;
    RealVector view_b_input;
};

struct TrainingView {
    std::vector<TrainingInstance> instances;
    int d_in = 0;
};

TrainingView make_training_view(const World& world);

/// Ground-truth identities, kept apart from the TrainingView and consulted
/// only when reporting clustering quality and at evaluation time.
std::vector<int> identity_side_table(const World& world);

struct EpochMetrics {
    int epoch = 0;
    double loss_ins = 0.0;   // means over the epoch's batches
    double loss_int = 0.0;
    double loss_clu = 0.0;
    double loss_total = 0.0;
    int num_clusters = 0;
    double purity = 0.0; // vs the hidden identities, reporting only
    double nmi = 0.0;
    double wall_seconds = 0.0;
};

struct TrainerState {
    TrainConfig config;
    TrainingView view;
    std::vector<int> identities; // side table, metric reporting only
    EncoderParams params;
    MemoryBank bank;
    std::vector<int> labels; // pseudo labels of the latest clustering round
    int num_clusters = 0;
    int epoch = 0;
    bool linearity_checked = false;
};

TrainerState init_trainer(const World& world, const TrainConfig& cfg);

/// Row i = mean of the two view embeddings of instance i, or the scene-view
/// embedding alone in search-path-only mode. No parameter mutation.
RealMatrix extract_all_features(const EncoderParams& params, const TrainingView& view,
                                bool search_path_only);

/// One pass: extract features, re-cluster, refresh the bank, then iterate
/// shuffled mini-batches (forward both views, enabled losses, backward, SGD
/// step, momentum-update the batch rows in ascending instance order).
EpochMetrics run_epoch(TrainerState& state);

struct TrainOutcome {
    EncoderParams params;
    std::vector<EpochMetrics> history;
    std::vector<int> final_labels;
    int final_num_clusters = 0;
};

/// epochs = 0 returns the initial parameters and an empty history.
TrainOutcome train(const World& world, const TrainConfig& cfg);

} // namespace rsiam
