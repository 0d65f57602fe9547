#include "rsiam/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsiam/errors.hpp"
#include "rsiam/kernels.hpp"

namespace rsiam {

ProbabilityRow::ProbabilityRow(RealVector values) : entries(std::move(values)) {
    double sum = 0.0;
    for (double e : entries) {
        if (!(e >= 0.0 && e <= 1.0))
            throw Error("ProbabilityRow: entry " + std::to_string(e) + " outside [0,1]");
        sum += e;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error("ProbabilityRow: entries sum to " + std::to_string(sum));
}

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

RealVector l2_normalize(const RealVector& v) {
    const double n = l2_norm(v);
    if (!(n > kNormEps)) throw ZeroNormError("l2_normalize: norm <= 1e-12");
    RealVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

double cosine_similarity(const RealVector& u, const RealVector& v) {
    if (u.size() != v.size())
        throw DimensionMismatchError("cosine_similarity: " + std::to_string(u.size()) + " vs " +
                                     std::to_string(v.size()));
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (!(nu > kNormEps) || !(nv > kNormEps))
        throw ZeroNormError("cosine_similarity: zero-norm input");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
    return std::clamp(acc / (nu * nv), -1.0, 1.0);
}

RealMatrix similarity_matrix(const RealMatrix& f) {
    RealMatrix normalized;
    kernels::normalize_rows(f, normalized, kNormEps);
    RealMatrix s;
    kernels::cosine_gram(normalized, s);
    return s;
}

std::vector<ProbabilityRow> row_softmax(const RealMatrix& s, double temperature,
                                        bool exclude_diagonal) {
    if (!(temperature > 0.0))
        throw NonPositiveTemperatureError("row_softmax: temperature " +
                                          std::to_string(temperature));
    if (exclude_diagonal && s.rows != s.cols)
        throw DimensionMismatchError("row_softmax: diagonal exclusion needs a square matrix");

    std::vector<ProbabilityRow> out;
    out.reserve(s.rows);
    RealVector logits;
    for (std::size_t i = 0; i < s.rows; ++i) {
        logits.clear();
        for (std::size_t j = 0; j < s.cols; ++j) {
            if (exclude_diagonal && j == i) continue;
            logits.push_back(s(i, j) / temperature);
        }
        if (logits.empty())
            throw BatchTooSmallError("row_softmax: row empty after diagonal exclusion");
        const double shift = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double& l : logits) {
            l = std::exp(l - shift);
            denom += l;
        }
        RealVector probs(logits.size());
        for (std::size_t j = 0; j < logits.size(); ++j) probs[j] = logits[j] / denom;
        out.emplace_back(std::move(probs));
    }
    return out;
}

double kl_divergence(const ProbabilityRow& p, const ProbabilityRow& q) {
    if (p.size() != q.size())
        throw DimensionMismatchError("kl_divergence: " + std::to_string(p.size()) + " vs " +
                                     std::to_string(q.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        acc += p[i] * std::log(p[i] / q[i]);
    }
    return acc;
}

} // namespace rsiam
