#pragma once

#include <vector>

#include "rsiam/memory_bank.hpp"
#include "rsiam/types.hpp"

namespace rsiam {

/// Loss value with exact gradients w.r.t. the raw (unnormalized) input
/// embeddings. Losses taking a single feature batch return its gradient in
/// grad_a and leave grad_b empty.
struct LossOutput {
    double value = 0.0;
    RealMatrix grad_a;
    RealMatrix grad_b;
};

/// Mean over the batch of (1 - cosine(f_a_i, f_b_i)). Range [0, 2]; zero iff
/// the paired rows are parallel. Gradients flow through the row
/// normalization on both sides.
LossOutput self_instance_consistency(const RealMatrix& f_a, const RealMatrix& f_b);

enum class IntReduction { Sum, Mean };

/// Symmetric KL divergence between the two paths' batch similarity
/// structures. Each path's B x B cosine matrix is turned into B
/// distributions by a temperature softmax with the diagonal excluded; the
/// per-row KL terms are summed in both directions (reduction Sum) or
/// averaged over rows (Mean). Symmetric under swapping the inputs; zero when
/// they are equal. Throws BatchTooSmallError when B < 2.
LossOutput inter_instance_similarity_consistency(const RealMatrix& f_a, const RealMatrix& f_b,
                                                 double temperature,
                                                 IntReduction reduction = IntReduction::Sum);

/// Cluster-level contrastive loss against the memory bank. For each batch
/// instance, positives are the bank rows sharing its pseudo label (the
/// instance's own slot included) and negatives are all other rows; the
/// per-instance term is log(1 + sum_i sum_j exp(gamma (s_n_j - s_p_i))),
/// evaluated by log-sum-exp, averaged over the batch. Bank rows are
/// constants: the gradient flows into f_batch only.
LossOutput cluster_contrastive(const RealMatrix& f_batch, const MemoryBank& bank,
                               const std::vector<int>& labels,
                               const std::vector<int>& batch_instance_ids, double gamma);

/// Instance-recognition baseline: cluster_contrastive with every instance as
/// its own class (own slot positive, all other rows negative).
LossOutput instance_recognition_loss(const RealMatrix& f_batch, const MemoryBank& bank,
                                     const std::vector<int>& batch_instance_ids, double gamma);

struct TotalLossOptions {
    double gamma = 16.0;
    double temperature = 0.1;
    double weight_ins = 1.0;
    double weight_int = 1.0;
    double weight_clu = 1.0;
    bool use_ins = true;
    bool use_int = true;
    bool use_contrastive = true;
    /// true: contrastive term uses the pseudo labels; false: instance
    /// recognition.
    bool use_cluster_labels = true;
    IntReduction int_reduction = IntReduction::Sum;
};

struct LossBreakdown {
    double ins = 0.0;
    double inter = 0.0;
    double clu = 0.0;
};

/// Weighted sum of the enabled terms. The contrastive term sees the fused
/// feature f = (f_a + f_b) / 2, so its gradient splits half to each path.
/// The similarity-consistency term is skipped for batches of size 1 (its
/// rows would be empty after diagonal exclusion).
LossOutput total_loss(const RealMatrix& f_a, const RealMatrix& f_b, const MemoryBank& bank,
                      const std::vector<int>& labels, const std::vector<int>& batch_instance_ids,
                      const TotalLossOptions& options, LossBreakdown* breakdown = nullptr);

} // namespace rsiam
