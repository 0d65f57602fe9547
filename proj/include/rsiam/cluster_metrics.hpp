#pragma once

#include <vector>

namespace rsiam {

/// Normalized mutual information between two labelings of the same items,
/// 2 I(U;V) / (H(U) + H(V)). Label values only need to be consistent within
/// each labeling, not dense. When both entropies are zero (either labeling
/// puts everything in one group, or there is a single item) the labelings
/// carry no information to disagree on and the score is defined as 1.
double normalized_mutual_information(const std::vector<int>& labels_u,
                                     const std::vector<int>& labels_v);

/// Fraction of items whose predicted cluster's majority true label matches
/// their own: sum over clusters of the cluster's largest true-label count,
/// divided by the number of items.
double cluster_purity(const std::vector<int>& predicted, const std::vector<int>& truth);

} // namespace rsiam
