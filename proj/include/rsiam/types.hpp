#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rsiam/errors.hpp"

namespace rsiam {

using RealVector = std::vector<double>;

/// Dense row-major matrix of 64-bit reals.
struct RealMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    static RealMatrix zeros(std::size_t r, std::size_t c) { return RealMatrix(r, c); }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool same_shape(const RealMatrix& other) const {
        return rows == other.rows && cols == other.cols;
    }

    RealVector row_copy(std::size_t i) const {
        return RealVector(data.begin() + i * cols, data.begin() + (i + 1) * cols);
    }

    void set_row(std::size_t i, std::span<const double> values) {
        for (std::size_t j = 0; j < cols; ++j) data[i * cols + j] = values[j];
    }

    /// this += scale * other, elementwise. Shapes must match.
    void add_scaled(const RealMatrix& other, double scale) {
        if (!same_shape(other))
            throw DimensionMismatchError("add_scaled: shape mismatch");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += scale * other.data[i];
    }
};

inline RealMatrix from_rows(const std::vector<RealVector>& rows_in) {
    if (rows_in.empty()) return {};
    RealMatrix m(rows_in.size(), rows_in.front().size());
    for (std::size_t i = 0; i < rows_in.size(); ++i) {
        if (rows_in[i].size() != m.cols)
            throw DimensionMismatchError("from_rows: ragged input at row " + std::to_string(i));
        m.set_row(i, rows_in[i]);
    }
    return m;
}

/// Axis-aligned box in scene coordinates, corners (x1,y1) < (x2,y2).
struct BoundingBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    bool valid() const { return x1 < x2 && y1 < y2; }
    double area() const { return (x2 - x1) * (y2 - y1); }
};

} // namespace rsiam
