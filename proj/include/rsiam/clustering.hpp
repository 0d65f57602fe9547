#pragma once

#include <utility>
#include <vector>

#include "rsiam/types.hpp"

namespace rsiam {

/// kappa[i] = index of sample i's most similar other sample.
struct NeighborTable {
    std::vector<int> kappa;
};

/// Undirected graph over N samples; edges stored normalized (i < j), sorted,
/// without duplicates.
struct AdjacencyGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
};

/// Cluster ids in [0, num_clusters), dense, assigned in order of each
/// component's smallest member index.
struct PseudoLabeling {
    std::vector<int> labels;
    int num_clusters = 0;
};

struct ClusterOptions {
    bool filter_enabled = true;
    // Alternative neighbor rule: drop same-image samples from the kappa
    // search itself instead of only filtering edges.
    bool exclude_same_image_neighbors = false;
};

/// Cosine first neighbors over all other samples; ties broken by lowest
/// index. Throws TooFewSamplesError when N < 2.
NeighborTable first_neighbors(const RealMatrix& features);

/// Variant for the alternative neighbor rule: samples sharing a group id
/// (image) are excluded from each other's kappa search.
NeighborTable first_neighbors(const RealMatrix& features, const std::vector<int>& exclude_groups);

/// Edge {i,j} present iff (j = kappa_i, or kappa_j = i, or kappa_i = kappa_j)
/// and, with the filter enabled, i and j come from different images.
AdjacencyGraph build_adjacency(const NeighborTable& neighbors, const std::vector<int>& image_ids,
                               bool filter_enabled);

PseudoLabeling connected_components(const AdjacencyGraph& graph);

/// One clustering round: first_neighbors -> build_adjacency ->
/// connected_components.
PseudoLabeling cluster_epoch(const RealMatrix& features, const std::vector<int>& image_ids,
                             const ClusterOptions& options);

} // namespace rsiam
