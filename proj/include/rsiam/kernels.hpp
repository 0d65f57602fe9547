#pragma once

#include <vector>

#include "rsiam/types.hpp"

// Data-parallel inner loops, each in two variants: an OpenMP version under
// kernels:: (compiled serially when OpenMP is unavailable) and a plain serial
// reference under kernels::serial:: kept for equivalence tests and benchmarks.
//
// Both variants share the same per-row worker, so outputs are bitwise
// identical regardless of thread count: every output element has exactly one
// writer and a fixed inner summation order.

namespace rsiam::kernels {

/// L2 norm of every row.
void row_norms(const RealMatrix& m, RealVector& norms);

/// Row-wise L2 normalization. Throws ZeroNormError naming the first offending
/// row when a row norm is <= eps.
void normalize_rows(const RealMatrix& m, RealMatrix& out, double eps);

/// y = x . w_row + b per output feature: out = x * W^T + b with W of shape
/// (out_features x in_features).
void linear_forward(const RealMatrix& x, const RealMatrix& w, const RealVector& b, RealMatrix& out);

/// dW = dY^T * X, shape (out_features x in_features).
void linear_grad_weights(const RealMatrix& dy, const RealMatrix& x, RealMatrix& dw);

/// dX = dY * W.
void linear_grad_inputs(const RealMatrix& dy, const RealMatrix& w, RealMatrix& dx);

/// S = U * U^T for row-normalized U; upper triangle computed once and
/// mirrored, so S is exactly symmetric. Entries clamped to [-1, 1].
void cosine_gram(const RealMatrix& u, RealMatrix& s);

/// kappa[i] = argmax_{j != i} u_i . u_j over row-normalized U; ties broken by
/// lowest index. skip_same_group: when non-null, candidates j with
/// group[j] == group[i] are excluded from the argmax.
void nearest_neighbors(const RealMatrix& u, std::vector<int>& kappa,
                       const std::vector<int>* skip_same_group = nullptr);

/// S = Z * M^T (batch rows vs. bank rows), entries clamped to [-1, 1].
void cross_similarities(const RealMatrix& z, const RealMatrix& m, RealMatrix& s);

// Value-returning conveniences over the same workers.

/// In-place row normalization; returns the pre-normalization row norms.
RealVector normalize_rows(RealMatrix& m, double eps = 1e-12);
RealMatrix cosine_gram(const RealMatrix& u);
RealMatrix cross_similarities(const RealMatrix& z, const RealMatrix& m);

namespace serial {

void row_norms(const RealMatrix& m, RealVector& norms);
void normalize_rows(const RealMatrix& m, RealMatrix& out, double eps);
void linear_forward(const RealMatrix& x, const RealMatrix& w, const RealVector& b, RealMatrix& out);
void linear_grad_weights(const RealMatrix& dy, const RealMatrix& x, RealMatrix& dw);
void linear_grad_inputs(const RealMatrix& dy, const RealMatrix& w, RealMatrix& dx);
void cosine_gram(const RealMatrix& u, RealMatrix& s);
void nearest_neighbors(const RealMatrix& u, std::vector<int>& kappa,
                       const std::vector<int>* skip_same_group = nullptr);
void cross_similarities(const RealMatrix& z, const RealMatrix& m, RealMatrix& s);

} // namespace serial

} // namespace rsiam::kernels
