#include "rsiam/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsiam/errors.hpp"

namespace rsiam::kernels {

namespace {

inline double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
    return acc;
}

inline double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

inline void norm_row(const RealMatrix& m, std::size_t i, RealVector& norms) {
    norms[i] = std::sqrt(dot(m.data.data() + i * m.cols, m.data.data() + i * m.cols, m.cols));
}

inline void scale_row(const RealMatrix& m, std::size_t i, double inv, RealMatrix& out) {
    const double* src = m.data.data() + i * m.cols;
    double* dst = out.data.data() + i * m.cols;
    for (std::size_t k = 0; k < m.cols; ++k) dst[k] = src[k] * inv;
}

inline void linear_row(const RealMatrix& x, const RealMatrix& w, const RealVector& b,
                       std::size_t i, RealMatrix& out) {
    const double* xi = x.data.data() + i * x.cols;
    double* oi = out.data.data() + i * out.cols;
    for (std::size_t o = 0; o < w.rows; ++o)
        oi[o] = dot(xi, w.data.data() + o * w.cols, w.cols) + b[o];
}

inline void grad_weight_row(const RealMatrix& dy, const RealMatrix& x, std::size_t o,
                            RealMatrix& dw) {
    double* row = dw.data.data() + o * dw.cols;
    std::fill(row, row + dw.cols, 0.0);
    for (std::size_t i = 0; i < dy.rows; ++i) {
        const double g = dy(i, o);
        const double* xi = x.data.data() + i * x.cols;
        for (std::size_t k = 0; k < dw.cols; ++k) row[k] += g * xi[k];
    }
}

inline void grad_input_row(const RealMatrix& dy, const RealMatrix& w, std::size_t i,
                           RealMatrix& dx) {
    const double* gi = dy.data.data() + i * dy.cols;
    double* row = dx.data.data() + i * dx.cols;
    std::fill(row, row + dx.cols, 0.0);
    for (std::size_t o = 0; o < dy.cols; ++o) {
        const double g = gi[o];
        const double* wo = w.data.data() + o * w.cols;
        for (std::size_t k = 0; k < dx.cols; ++k) row[k] += g * wo[k];
    }
}

inline void gram_row(const RealMatrix& u, std::size_t i, RealMatrix& s) {
    // Upper triangle including the diagonal; the mirror pass fills the rest.
    for (std::size_t j = i; j < u.rows; ++j)
        s(i, j) = clamp_unit(dot(u.data.data() + i * u.cols, u.data.data() + j * u.cols, u.cols));
}

inline void neighbor_row(const RealMatrix& u, std::size_t i, std::vector<int>& kappa,
                         const std::vector<int>* skip_same_group) {
    double best = -2.0; // below any cosine
    int best_j = -1;
    for (std::size_t j = 0; j < u.rows; ++j) {
        if (j == i) continue;
        if (skip_same_group && (*skip_same_group)[j] == (*skip_same_group)[i]) continue;
        const double sim = dot(u.data.data() + i * u.cols, u.data.data() + j * u.cols, u.cols);
        if (sim > best) { // strict: ties keep the lowest index
            best = sim;
            best_j = static_cast<int>(j);
        }
    }
    kappa[i] = best_j;
}

inline void cross_row(const RealMatrix& z, const RealMatrix& m, std::size_t i, RealMatrix& s) {
    const double* zi = z.data.data() + i * z.cols;
    double* si = s.data.data() + i * s.cols;
    for (std::size_t t = 0; t < m.rows; ++t)
        si[t] = clamp_unit(dot(zi, m.data.data() + t * m.cols, m.cols));
}

void check_norms(const RealVector& norms, double eps) {
    for (std::size_t i = 0; i < norms.size(); ++i)
        if (!(norms[i] > eps))
            throw ZeroNormError("row " + std::to_string(i) + " has norm <= " +
                                std::to_string(eps));
}

} // namespace

void row_norms(const RealMatrix& m, RealVector& norms) {
    norms.assign(m.rows, 0.0);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m.rows; ++i) norm_row(m, i, norms);
}

void normalize_rows(const RealMatrix& m, RealMatrix& out, double eps) {
    RealVector norms;
    row_norms(m, norms);
    check_norms(norms, eps);
    out.rows = m.rows;
    out.cols = m.cols;
    out.data.resize(m.data.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m.rows; ++i) scale_row(m, i, 1.0 / norms[i], out);
}

void linear_forward(const RealMatrix& x, const RealMatrix& w, const RealVector& b,
                    RealMatrix& out) {
    if (x.cols != w.cols)
        throw DimensionMismatchError("linear_forward: input dim " + std::to_string(x.cols) +
                                     " vs weight dim " + std::to_string(w.cols));
    if (b.size() != w.rows)
        throw DimensionMismatchError("linear_forward: bias size mismatch");
    out = RealMatrix(x.rows, w.rows);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < x.rows; ++i) linear_row(x, w, b, i, out);
}

void linear_grad_weights(const RealMatrix& dy, const RealMatrix& x, RealMatrix& dw) {
    if (dy.rows != x.rows)
        throw DimensionMismatchError("linear_grad_weights: batch size mismatch");
    dw = RealMatrix(dy.cols, x.cols);
#pragma omp parallel for schedule(static)
    for (std::size_t o = 0; o < dw.rows; ++o) grad_weight_row(dy, x, o, dw);
}

void linear_grad_inputs(const RealMatrix& dy, const RealMatrix& w, RealMatrix& dx) {
    if (dy.cols != w.rows)
        throw DimensionMismatchError("linear_grad_inputs: feature dim mismatch");
    dx = RealMatrix(dy.rows, w.cols);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < dy.rows; ++i) grad_input_row(dy, w, i, dx);
}

void cosine_gram(const RealMatrix& u, RealMatrix& s) {
    s = RealMatrix(u.rows, u.rows);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < u.rows; ++i) gram_row(u, i, s);
    for (std::size_t i = 0; i < u.rows; ++i)
        for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
}

void nearest_neighbors(const RealMatrix& u, std::vector<int>& kappa,
                       const std::vector<int>* skip_same_group) {
    kappa.assign(u.rows, -1);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < u.rows; ++i) neighbor_row(u, i, kappa, skip_same_group);
}

void cross_similarities(const RealMatrix& z, const RealMatrix& m, RealMatrix& s) {
    if (z.cols != m.cols)
        throw DimensionMismatchError("cross_similarities: feature dim mismatch");
    s = RealMatrix(z.rows, m.rows);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < z.rows; ++i) cross_row(z, m, i, s);
}

RealVector normalize_rows(RealMatrix& m, double eps) {
    RealVector norms;
    row_norms(m, norms);
    check_norms(norms, eps);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m.rows; ++i) scale_row(m, i, 1.0 / norms[i], m);
    return norms;
}

RealMatrix cosine_gram(const RealMatrix& u) {
    RealMatrix s;
    cosine_gram(u, s);
    return s;
}

RealMatrix cross_similarities(const RealMatrix& z, const RealMatrix& m) {
    RealMatrix s;
    cross_similarities(z, m, s);
    return s;
}

namespace serial {

void row_norms(const RealMatrix& m, RealVector& norms) {
    norms.assign(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) norm_row(m, i, norms);
}

void normalize_rows(const RealMatrix& m, RealMatrix& out, double eps) {
    RealVector norms;
    row_norms(m, norms);
    check_norms(norms, eps);
    out.rows = m.rows;
    out.cols = m.cols;
    out.data.resize(m.data.size());
    for (std::size_t i = 0; i < m.rows; ++i) scale_row(m, i, 1.0 / norms[i], out);
}

void linear_forward(const RealMatrix& x, const RealMatrix& w, const RealVector& b,
                    RealMatrix& out) {
    if (x.cols != w.cols || b.size() != w.rows)
        throw DimensionMismatchError("linear_forward: shape mismatch");
    out = RealMatrix(x.rows, w.rows);
    for (std::size_t i = 0; i < x.rows; ++i) linear_row(x, w, b, i, out);
}

void linear_grad_weights(const RealMatrix& dy, const RealMatrix& x, RealMatrix& dw) {
    if (dy.rows != x.rows)
        throw DimensionMismatchError("linear_grad_weights: batch size mismatch");
    dw = RealMatrix(dy.cols, x.cols);
    for (std::size_t o = 0; o < dw.rows; ++o) grad_weight_row(dy, x, o, dw);
}

void linear_grad_inputs(const RealMatrix& dy, const RealMatrix& w, RealMatrix& dx) {
    if (dy.cols != w.rows)
        throw DimensionMismatchError("linear_grad_inputs: feature dim mismatch");
    dx = RealMatrix(dy.rows, w.cols);
    for (std::size_t i = 0; i < dy.rows; ++i) grad_input_row(dy, w, i, dx);
}

void cosine_gram(const RealMatrix& u, RealMatrix& s) {
    s = RealMatrix(u.rows, u.rows);
    for (std::size_t i = 0; i < u.rows; ++i) gram_row(u, i, s);
    for (std::size_t i = 0; i < u.rows; ++i)
        for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
}

void nearest_neighbors(const RealMatrix& u, std::vector<int>& kappa,
                       const std::vector<int>* skip_same_group) {
    kappa.assign(u.rows, -1);
    for (std::size_t i = 0; i < u.rows; ++i) neighbor_row(u, i, kappa, skip_same_group);
}

void cross_similarities(const RealMatrix& z, const RealMatrix& m, RealMatrix& s) {
    if (z.cols != m.cols)
        throw DimensionMismatchError("cross_similarities: feature dim mismatch");
    s = RealMatrix(z.rows, m.rows);
    for (std::size_t i = 0; i < z.rows; ++i) cross_row(z, m, i, s);
}

} // namespace serial

} // namespace rsiam::kernels
