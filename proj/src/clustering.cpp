#include "rsiam/clustering.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "rsiam/core_math.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/kernels.hpp"

namespace rsiam {

namespace {

NeighborTable neighbors_impl(const RealMatrix& features, const std::vector<int>* groups) {
    if (features.rows < 2)
        throw TooFewSamplesError("first_neighbors: need at least 2 samples, got " +
                                 std::to_string(features.rows));
    RealMatrix normalized;
    kernels::normalize_rows(features, normalized, kNormEps);
    NeighborTable table;
    kernels::nearest_neighbors(normalized, table.kappa, groups);
    for (std::size_t i = 0; i < table.kappa.size(); ++i)
        if (table.kappa[i] < 0)
            throw TooFewSamplesError("first_neighbors: sample " + std::to_string(i) +
                                     " has no eligible neighbor");
    return table;
}

// Union-find with path halving.
struct DisjointSets {
    std::vector<int> parent;

    explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

} // namespace

NeighborTable first_neighbors(const RealMatrix& features) {
    return neighbors_impl(features, nullptr);
}

NeighborTable first_neighbors(const RealMatrix& features, const std::vector<int>& exclude_groups) {
    if (exclude_groups.size() != features.rows)
        throw DimensionMismatchError("first_neighbors: group list length mismatch");
    return neighbors_impl(features, &exclude_groups);
}

AdjacencyGraph build_adjacency(const NeighborTable& neighbors, const std::vector<int>& image_ids,
                               bool filter_enabled) {
    const int n = static_cast<int>(neighbors.kappa.size());
    if (image_ids.size() != neighbors.kappa.size())
        throw DimensionMismatchError("build_adjacency: image_ids length mismatch");

    AdjacencyGraph graph;
    graph.n = n;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const bool linked = neighbors.kappa[i] == j || neighbors.kappa[j] == i ||
                                neighbors.kappa[i] == neighbors.kappa[j];
            if (!linked) continue;
            if (filter_enabled && image_ids[i] == image_ids[j]) continue;
            graph.edges.emplace_back(i, j);
        }
    }
    return graph;
}

PseudoLabeling connected_components(const AdjacencyGraph& graph) {
    DisjointSets sets(graph.n);
    for (const auto& [i, j] : graph.edges) sets.unite(i, j);

    PseudoLabeling labeling;
    labeling.labels.assign(graph.n, -1);
    std::vector<int> root_label(graph.n, -1);
    for (int i = 0; i < graph.n; ++i) {
        const int root = sets.find(i);
        if (root_label[root] < 0) root_label[root] = labeling.num_clusters++;
        labeling.labels[i] = root_label[root];
    }
    return labeling;
}

PseudoLabeling cluster_epoch(const RealMatrix& features, const std::vector<int>& image_ids,
                             const ClusterOptions& options) {
    if (image_ids.size() != features.rows)
        throw DimensionMismatchError("cluster_epoch: image_ids length mismatch");
    const NeighborTable table = options.exclude_same_image_neighbors
                                    ? neighbors_impl(features, &image_ids)
                                    : neighbors_impl(features, nullptr);
    const AdjacencyGraph graph = build_adjacency(table, image_ids, options.filter_enabled);
    return connected_components(graph);
}

} // namespace rsiam
