#pragma once

#include <cstdint>
#include <vector>

#include "rsiam/encoder.hpp"
#include "rsiam/synth.hpp"
#include "rsiam/types.hpp"

namespace rsiam {

/// Intersection area over union area, in [0,1]; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

/// A candidate box counts as a true match for a query identity iff it
/// overlaps a ground-truth box of that identity with IoU strictly greater
/// than 0.5. The identity of the box the candidate was detected from is
/// irrelevant; only the overlap test decides.
bool is_true_match(const BoundingBox& candidate_box, const BoundingBox& gt_box, int query_identity,
                   int gt_identity);

/// AP = mean over the positions of the true flags of (true count in top k) / k.
/// Throws NoPositivesError when no flag is set.
double average_precision(const std::vector<bool>& flags);

struct RankedCandidate {
    int image_id = -1;
    BoundingBox box;
    double score = 1.0;  // detection confidence, breaks similarity ties only
    double similarity = 0.0;
    bool true_match = false;
};

struct QueryResult {
    int query_instance_id = -1;
    std::vector<RankedCandidate> ranking; // similarity desc, deterministic ties
    double ap = 0.0;
    bool has_positive = false; // false when jitter sank every true box below the IoU gate
};

struct EvalResult {
    std::size_t gallery_size = 0; // images per query gallery
    std::size_t num_queries = 0;
    double map = 0.0;
    double rank1 = 0.0;
    double rank5 = 0.0;
    double rank10 = 0.0;
};

struct EvalOptions {
    std::size_t gallery_size = 0; // images sampled per query
    double detection_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Retrieval protocol. Per query: embed the clean cropped view of the query
/// instance; embed the contaminated scene view of every candidate in a
/// seeded per-query gallery sample that always contains the query's
/// true-match images; rank by cosine with ties broken by detection score,
/// then image id, then box coordinates. Queries whose true boxes all fail
/// the IoU gate contribute zero AP and no rank-k credit. Deterministic per
/// (params, seed, gallery_size).
EvalResult evaluate_search(const EncoderParams& params, const World& world, const Split& split,
                           const EvalOptions& options,
                           std::vector<QueryResult>* per_query = nullptr);

/// One evaluate_search per gallery size, shared seed.
std::vector<EvalResult> gallery_size_sweep(const EncoderParams& params, const World& world,
                                           const Split& split,
                                           const std::vector<std::size_t>& sizes,
                                           double detection_sigma, std::uint64_t seed);

} // namespace rsiam
