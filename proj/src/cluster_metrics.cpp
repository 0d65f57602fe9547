#include "rsiam/cluster_metrics.hpp"

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>

#include "rsiam/errors.hpp"

namespace rsiam {

namespace {

void require_aligned(const std::vector<int>& a, const std::vector<int>& b, const char* where) {
    if (a.size() != b.size()) {
        throw DimensionMismatchError(std::string(where) + ": labelings cover " + std::to_string(a.size()) +
                                     " vs " + std::to_string(b.size()) + " items");
    }
    if (a.empty()) throw TooFewSamplesError(std::string(where) + ": no items");
}

double entropy_from_counts(const std::map<int, std::size_t>& counts, double n) {
    double h = 0.0;
    for (const auto& [label, c] : counts) {
        const double p = static_cast<double>(c) / n;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

} // namespace

double normalized_mutual_information(const std::vector<int>& labels_u,
                                     const std::vector<int>& labels_v) {
    require_aligned(labels_u, labels_v, "normalized_mutual_information");
    const double n = static_cast<double>(labels_u.size());

    std::map<int, std::size_t> cu, cv;
    std::map<std::pair<int, int>, std::size_t> joint;
    for (std::size_t i = 0; i < labels_u.size(); ++i) {
        ++cu[labels_u[i]];
        ++cv[labels_v[i]];
        ++joint[{labels_u[i], labels_v[i]}];
    }

    const double hu = entropy_from_counts(cu, n);
    const double hv = entropy_from_counts(cv, n);
    if (hu + hv == 0.0) return 1.0; // both labelings constant: perfect agreement by convention

    double mi = 0.0;
    for (const auto& [uv, c] : joint) {
        const double pij = static_cast<double>(c) / n;
        const double pi = static_cast<double>(cu[uv.first]) / n;
        const double pj = static_cast<double>(cv[uv.second]) / n;
        mi += pij * std::log(pij / (pi * pj));
    }
    // Rounding can push mi a hair past min(hu, hv); the ratio stays in [0, 1].
    double score = 2.0 * mi / (hu + hv);
    if (score < 0.0) score = 0.0;
    if (score > 1.0) score = 1.0;
    return score;
}

double cluster_purity(const std::vector<int>& predicted, const std::vector<int>& truth) {
    require_aligned(predicted, truth, "cluster_purity");
    std::map<int, std::map<int, std::size_t>> per_cluster;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        ++per_cluster[predicted[i]][truth[i]];
    }
    std::size_t agree = 0;
    for (const auto& [cluster, counts] : per_cluster) {
        std::size_t best = 0;
        for (const auto& [label, c] : counts) best = std::max(best, c);
        agree += best;
    }
    return static_cast<double>(agree) / static_cast<double>(predicted.size());
}

} // namespace rsiam
