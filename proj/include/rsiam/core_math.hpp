#pragma once

#include <vector>

#include "rsiam/types.hpp"

namespace rsiam {

inline constexpr double kNormEps = 1e-12;

/// A discrete distribution: entries in [0,1] summing to 1 within 1e-9.
/// Produced by row_softmax; the constructor validates.
struct ProbabilityRow {
    RealVector entries;

    ProbabilityRow() = default;
    explicit ProbabilityRow(RealVector values);

    std::size_t size() const { return entries.size(); }
    double operator[](std::size_t i) const { return entries[i]; }
};

double l2_norm(std::span<const double> v);

/// Unit-norm copy of v. Throws ZeroNormError when ||v|| <= 1e-12.
RealVector l2_normalize(const RealVector& v);

/// Cosine of the angle between u and v, clamped to [-1, 1].
double cosine_similarity(const RealVector& u, const RealVector& v);

/// B x B matrix of pairwise row cosines: rows are L2-normalized, then the
/// Gram matrix is formed. Exactly symmetric; diagonal 1 within rounding.
RealMatrix similarity_matrix(const RealMatrix& f);

/// Temperature softmax over each row of S, max-shifted for stability. With
/// exclude_diagonal set (S must be square), entry (i,i) is removed before the
/// softmax, so row i of the output has S.cols-1 entries.
std::vector<ProbabilityRow> row_softmax(const RealMatrix& s, double temperature,
                                        bool exclude_diagonal);

/// D_KL(p || q) = sum_x p(x) log(p(x)/q(x)). Terms with p(x) = 0 contribute 0.
double kl_divergence(const ProbabilityRow& p, const ProbabilityRow& q);

} // namespace rsiam
