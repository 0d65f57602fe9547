#include "rsiam/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "rsiam/core_math.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/kernels.hpp"

namespace rsiam {

namespace {

void require_same_shape(const RealMatrix& a, const RealMatrix& b, const char* where) {
    if (!a.same_shape(b)) {
        throw DimensionMismatchError(std::string(where) + ": paired batches must have equal shape, got " +
                                     std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                                     std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
}

/// Gradient of cosine(u, v) w.r.t. the raw vector behind unit vector u:
/// (v - (u.v) u) / ||raw||, scaled by coeff, accumulated into out.
void add_cosine_grad(std::span<const double> u, std::span<const double> v, double dot, double norm,
                     double coeff, std::span<double> out) {
    const double scale = coeff / norm;
    for (std::size_t k = 0; k < u.size(); ++k) {
        out[k] += scale * (v[k] - dot * u[k]);
    }
}

double log_sum_exp(const std::vector<double>& xs) {
    if (xs.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(xs.begin(), xs.end());
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

LossOutput self_instance_consistency(const RealMatrix& f_a, const RealMatrix& f_b) {
    require_same_shape(f_a, f_b, "self_instance_consistency");
    if (f_a.rows == 0) throw BatchTooSmallError("self_instance_consistency: empty batch");

    const std::size_t b = f_a.rows;
    RealMatrix ua = f_a;
    RealMatrix ub = f_b;
    RealVector na = kernels::normalize_rows(ua);
    RealVector nb = kernels::normalize_rows(ub);

    LossOutput out;
    out.grad_a = RealMatrix::zeros(f_a.rows, f_a.cols);
    out.grad_b = RealMatrix::zeros(f_b.rows, f_b.cols);

    const double inv_b = 1.0 / static_cast<double>(b);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        auto u = ua.row(i);
        auto v = ub.row(i);
        double dot = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) dot += u[k] * v[k];
        total += 1.0 - std::clamp(dot, -1.0, 1.0);
        // d/d f_a of -(1/B) cos: unclamped dot is within rounding of the
        // clamp anyway.
        add_cosine_grad(u, v, dot, na[i], -inv_b, out.grad_a.row(i));
        add_cosine_grad(v, u, dot, nb[i], -inv_b, out.grad_b.row(i));
    }
    out.value = total * inv_b;
    return out;
}

namespace {

/// Stable log-softmax of one similarity row (diagonal already excluded).
/// logits = s / temperature; returns log p, and fills p.
void log_softmax_row(const std::vector<double>& s, double temperature, std::vector<double>& logp,
                     std::vector<double>& p) {
    const std::size_t n = s.size();
    logp.resize(n);
    p.resize(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : s) mx = std::max(mx, x / temperature);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        logp[j] = s[j] / temperature - mx;
        acc += std::exp(logp[j]);
    }
    const double lse = std::log(acc);
    for (std::size_t j = 0; j < n; ++j) {
        logp[j] -= lse;
        p[j] = std::exp(logp[j]);
    }
}

} // namespace

LossOutput inter_instance_similarity_consistency(const RealMatrix& f_a, const RealMatrix& f_b,
                                                 double temperature, IntReduction reduction) {
    require_same_shape(f_a, f_b, "inter_instance_similarity_consistency");
    if (temperature <= 0.0) {
        throw NonPositiveTemperatureError("inter_instance_similarity_consistency: temperature must be > 0, got " +
                                          std::to_string(temperature));
    }
    const std::size_t b = f_a.rows;
    if (b < 2) {
        throw BatchTooSmallError("inter_instance_similarity_consistency: needs at least 2 rows, got " +
                                 std::to_string(b));
    }

    RealMatrix ua = f_a;
    RealMatrix ub = f_b;
    RealVector na = kernels::normalize_rows(ua);
    RealVector nb = kernels::normalize_rows(ub);
    RealMatrix sa = kernels::cosine_gram(ua);
    RealMatrix sb = kernels::cosine_gram(ub);

    // Off-diagonal gradients w.r.t. the similarity entries of each path.
    RealMatrix ga = RealMatrix::zeros(b, b);
    RealMatrix gb = RealMatrix::zeros(b, b);

    std::vector<double> row_a(b - 1), row_b(b - 1);
    std::vector<double> lpa, pa, lpb, pb;
    double total = 0.0;
    const double row_scale = (reduction == IntReduction::Mean) ? 1.0 / static_cast<double>(b) : 1.0;

    for (std::size_t i = 0; i < b; ++i) {
        std::size_t w = 0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            row_a[w] = sa(i, j);
            row_b[w] = sb(i, j);
            ++w;
        }
        log_softmax_row(row_a, temperature, lpa, pa);
        log_softmax_row(row_b, temperature, lpb, pb);

        double t1 = 0.0; // KL(p_a || p_b)
        double t2 = 0.0; // KL(p_b || p_a)
        for (std::size_t j = 0; j + 1 < b; ++j) {
            t1 += pa[j] * (lpa[j] - lpb[j]);
            t2 += pb[j] * (lpb[j] - lpa[j]);
        }
        total += (t1 + t2) * row_scale;

        // d(t1 + t2) / d logits_a[j] = p_a_j (log p_a_j - log p_b_j - t1)
        //                              + (p_a_j - p_b_j);
        // logits = s / temperature, so divide once more by the temperature.
        w = 0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            const double da = pa[w] * (lpa[w] - lpb[w] - t1) + (pa[w] - pb[w]);
            const double db = pb[w] * (lpb[w] - lpa[w] - t2) + (pb[w] - pa[w]);
            ga(i, j) = da * row_scale / temperature;
            gb(i, j) = db * row_scale / temperature;
            ++w;
        }
    }

    // s_ij = u_i . u_j feeds from both rows: dU_i = sum_j (g_ij + g_ji) u_j.
    LossOutput out;
    out.value = total;
    out.grad_a = RealMatrix::zeros(f_a.rows, f_a.cols);
    out.grad_b = RealMatrix::zeros(f_b.rows, f_b.cols);
    RealVector du(f_a.cols);
    for (std::size_t i = 0; i < b; ++i) {
        std::fill(du.begin(), du.end(), 0.0);
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            const double g = ga(i, j) + ga(j, i);
            auto uj = ua.row(j);
            for (std::size_t k = 0; k < du.size(); ++k) du[k] += g * uj[k];
        }
        auto ui = ua.row(i);
        double udot = 0.0;
        for (std::size_t k = 0; k < du.size(); ++k) udot += ui[k] * du[k];
        auto gi = out.grad_a.row(i);
        for (std::size_t k = 0; k < du.size(); ++k) gi[k] = (du[k] - udot * ui[k]) / na[i];

        std::fill(du.begin(), du.end(), 0.0);
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            const double g = gb(i, j) + gb(j, i);
            auto vj = ub.row(j);
            for (std::size_t k = 0; k < du.size(); ++k) du[k] += g * vj[k];
        }
        auto vi = ub.row(i);
        double vdot = 0.0;
        for (std::size_t k = 0; k < du.size(); ++k) vdot += vi[k] * du[k];
        auto hi = out.grad_b.row(i);
        for (std::size_t k = 0; k < du.size(); ++k) hi[k] = (du[k] - vdot * vi[k]) / nb[i];
    }
    return out;
}

LossOutput cluster_contrastive(const RealMatrix& f_batch, const MemoryBank& bank,
                               const std::vector<int>& labels,
                               const std::vector<int>& batch_instance_ids, double gamma) {
    const std::size_t n = bank.size();
    if (n == 0) throw EmptyBankError("cluster_contrastive: memory bank is empty");
    if (labels.size() != n) {
        throw MissingLabelError("cluster_contrastive: " + std::to_string(labels.size()) +
                                " labels for a bank of " + std::to_string(n) + " slots");
    }
    if (f_batch.rows != batch_instance_ids.size()) {
        throw DimensionMismatchError("cluster_contrastive: " + std::to_string(f_batch.rows) +
                                     " feature rows vs " + std::to_string(batch_instance_ids.size()) +
                                     " instance ids");
    }
    if (f_batch.cols != bank.dim()) {
        throw DimensionMismatchError("cluster_contrastive: feature dim " + std::to_string(f_batch.cols) +
                                     " vs bank dim " + std::to_string(bank.dim()));
    }
    if (f_batch.rows == 0) throw BatchTooSmallError("cluster_contrastive: empty batch");
    for (int id : batch_instance_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= n) {
            throw IndexOutOfRangeError("cluster_contrastive: instance id " + std::to_string(id) +
                                       " outside bank of " + std::to_string(n));
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] < 0) {
            throw MissingLabelError("cluster_contrastive: negative label at slot " + std::to_string(k));
        }
    }

    const std::size_t b = f_batch.rows;
    RealMatrix z = f_batch;
    RealVector norms = kernels::normalize_rows(z);
    RealMatrix s = kernels::cross_similarities(z, bank.matrix());

    LossOutput out;
    out.grad_a = RealMatrix::zeros(f_batch.rows, f_batch.cols);
    const double inv_b = 1.0 / static_cast<double>(b);
    const RealMatrix& m = bank.matrix();

    std::vector<double> pos_terms, neg_terms;
    std::vector<double> ds(n);
    RealVector dz(f_batch.cols);
    double total = 0.0;

    for (std::size_t r = 0; r < b; ++r) {
        const int self = batch_instance_ids[r];
        const int c = labels[static_cast<std::size_t>(self)];
        pos_terms.clear();
        neg_terms.clear();
        for (std::size_t k = 0; k < n; ++k) {
            if (labels[k] == c) {
                pos_terms.push_back(-gamma * s(r, k));
            } else {
                neg_terms.push_back(gamma * s(r, k));
            }
        }
        if (neg_terms.empty()) {
            // Single cluster covering the whole bank: the pairwise sum is
            // empty, the term is log(1 + 0) = 0 with zero gradient.
            continue;
        }
        const double log_a = log_sum_exp(neg_terms); // log sum exp(gamma s_n)
        const double log_b = log_sum_exp(pos_terms); // log sum exp(-gamma s_p)
        const double e = log_a + log_b;
        total += softplus(e);

        // dl/ds_k = sig(e) * gamma * exp(gamma s_k - log_a)   (negatives)
        //         = -sig(e) * gamma * exp(-gamma s_k - log_b) (positives)
        const double sig = sigmoid(e);
        for (std::size_t k = 0; k < n; ++k) {
            if (labels[k] == c) {
                ds[k] = -sig * gamma * std::exp(-gamma * s(r, k) - log_b);
            } else {
                ds[k] = sig * gamma * std::exp(gamma * s(r, k) - log_a);
            }
        }
        std::fill(dz.begin(), dz.end(), 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            if (ds[k] == 0.0) continue;
            auto mk = m.row(k);
            for (std::size_t d = 0; d < dz.size(); ++d) dz[d] += ds[k] * mk[d];
        }
        auto zr = z.row(r);
        double zdot = 0.0;
        for (std::size_t d = 0; d < dz.size(); ++d) zdot += zr[d] * dz[d];
        auto gr = out.grad_a.row(r);
        for (std::size_t d = 0; d < dz.size(); ++d) {
            gr[d] = inv_b * (dz[d] - zdot * zr[d]) / norms[r];
        }
    }
    out.value = total * inv_b;
    return out;
}

LossOutput instance_recognition_loss(const RealMatrix& f_batch, const MemoryBank& bank,
                                     const std::vector<int>& batch_instance_ids, double gamma) {
    std::vector<int> singleton(bank.size());
    for (std::size_t k = 0; k < singleton.size(); ++k) singleton[k] = static_cast<int>(k);
    return cluster_contrastive(f_batch, bank, singleton, batch_instance_ids, gamma);
}

LossOutput total_loss(const RealMatrix& f_a, const RealMatrix& f_b, const MemoryBank& bank,
                      const std::vector<int>& labels, const std::vector<int>& batch_instance_ids,
                      const TotalLossOptions& options, LossBreakdown* breakdown) {
    require_same_shape(f_a, f_b, "total_loss");
    if (f_a.rows == 0) throw BatchTooSmallError("total_loss: empty batch");

    LossOutput out;
    out.grad_a = RealMatrix::zeros(f_a.rows, f_a.cols);
    out.grad_b = RealMatrix::zeros(f_b.rows, f_b.cols);
    LossBreakdown parts;

    if (options.use_ins) {
        LossOutput ins = self_instance_consistency(f_a, f_b);
        parts.ins = ins.value;
        out.value += options.weight_ins * ins.value;
        out.grad_a.add_scaled(ins.grad_a, options.weight_ins);
        out.grad_b.add_scaled(ins.grad_b, options.weight_ins);
    }
    if (options.use_int && f_a.rows >= 2) {
        LossOutput inter = inter_instance_similarity_consistency(f_a, f_b, options.temperature,
                                                                 options.int_reduction);
        parts.inter = inter.value;
        out.value += options.weight_int * inter.value;
        out.grad_a.add_scaled(inter.grad_a, options.weight_int);
        out.grad_b.add_scaled(inter.grad_b, options.weight_int);
    }

    if (options.use_contrastive) {
        // Fused feature f = (f_a + f_b) / 2; each path takes half the gradient.
        RealMatrix fused = RealMatrix::zeros(f_a.rows, f_a.cols);
        for (std::size_t i = 0; i < fused.data.size(); ++i) {
            fused.data[i] = 0.5 * (f_a.data[i] + f_b.data[i]);
        }
        LossOutput clu =
            options.use_cluster_labels
                ? cluster_contrastive(fused, bank, labels, batch_instance_ids, options.gamma)
                : instance_recognition_loss(fused, bank, batch_instance_ids, options.gamma);
        parts.clu = clu.value;
        out.value += options.weight_clu * clu.value;
        out.grad_a.add_scaled(clu.grad_a, 0.5 * options.weight_clu);
        out.grad_b.add_scaled(clu.grad_a, 0.5 * options.weight_clu);
    }

    if (breakdown != nullptr) *breakdown = parts;
    return out;
}

} // namespace rsiam
