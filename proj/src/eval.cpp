#include "rsiam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>

#include "rsiam/core_math.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/kernels.hpp"
#include "rsiam/rng.hpp"

namespace rsiam {

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix1 = std::max(a.x1, b.x1);
    const double iy1 = std::max(a.y1, b.y1);
    const double ix2 = std::min(a.x2, b.x2);
    const double iy2 = std::min(a.y2, b.y2);
    const double iw = ix2 - ix1;
    const double ih = iy2 - iy1;
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return inter / uni;
}

bool is_true_match(const BoundingBox& candidate_box, const BoundingBox& gt_box, int query_identity,
                   int gt_identity) {
    return gt_identity == query_identity && iou(candidate_box, gt_box) > 0.5;
}

double average_precision(const std::vector<bool>& flags) {
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < flags.size(); ++k) {
        if (!flags[k]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    if (hits == 0) throw NoPositivesError("average_precision: no true flag in the ranking");
    return sum / static_cast<double>(hits);
}

namespace {

bool box_less(const BoundingBox& a, const BoundingBox& b) {
    if (a.x1 != b.x1) return a.x1 < b.x1;
    if (a.y1 != b.y1) return a.y1 < b.y1;
    if (a.x2 != b.x2) return a.x2 < b.x2;
    return a.y2 < b.y2;
}

bool ranked_before(const RankedCandidate& a, const RankedCandidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.score != b.score) return a.score > b.score;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return box_less(a.box, b.box);
}

RealMatrix embed_normalized(const EncoderParams& params, const RealMatrix& inputs) {
    RealMatrix f = forward(params, inputs);
    kernels::normalize_rows(f);
    return f;
}

} // namespace

EvalResult evaluate_search(const EncoderParams& params, const World& world, const Split& split,
                           const EvalOptions& options, std::vector<QueryResult>* per_query) {
    const std::size_t n = world.instances.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (world.instances[i].instance_id != static_cast<int>(i)) {
            throw IndexOutOfRangeError("evaluate_search: instance ids must be dense ascending");
        }
    }
    if (split.query_instance_ids.empty()) {
        throw InfeasibleGalleryError("evaluate_search: split has no queries");
    }
    if (options.gallery_size == 0 || options.gallery_size > split.gallery_image_ids.size()) {
        throw InfeasibleGalleryError("evaluate_search: gallery_size " +
                                     std::to_string(options.gallery_size) + " not in [1, " +
                                     std::to_string(split.gallery_image_ids.size()) + "]");
    }

    std::unordered_map<int, const SceneImage*> image_by_id;
    for (const SceneImage& img : world.images) image_by_id.emplace(img.image_id, &img);
    for (int gid : split.gallery_image_ids) {
        if (image_by_id.find(gid) == image_by_id.end()) {
            throw IndexOutOfRangeError("evaluate_search: unknown gallery image " + std::to_string(gid));
        }
    }

    // Candidate boxes from jittered detections, one per ground-truth box;
    // candidate embeddings from the scene-view inputs (inference sees whole
    // scene images, never the clean crops).
    std::vector<Detection> detections =
        jitter_detections(world.instances, options.detection_sigma, derive_seed(options.seed, "jitter"));

    RealMatrix scene_inputs(n, static_cast<std::size_t>(world.config.d_in));
    for (std::size_t i = 0; i < n; ++i) scene_inputs.set_row(i, world.instances[i].view_a_input);
    RealMatrix cand_emb = embed_normalized(params, scene_inputs);

    const std::size_t q_count = split.query_instance_ids.size();
    RealMatrix query_inputs(q_count, static_cast<std::size_t>(world.config.d_in));
    for (std::size_t qi = 0; qi < q_count; ++qi) {
        const int qid = split.query_instance_ids[qi];
        if (qid < 0 || static_cast<std::size_t>(qid) >= n) {
            throw IndexOutOfRangeError("evaluate_search: query instance " + std::to_string(qid));
        }
        query_inputs.set_row(qi, world.instances[static_cast<std::size_t>(qid)].view_b_input);
    }
    RealMatrix query_emb = embed_normalized(params, query_inputs);

    // True-match image sets up front, so the parallel loop below cannot
    // throw. Identities are pairwise distinct within an image, so each
    // gallery image holds at most one box of the query identity.
    std::vector<std::vector<int>> required_images(q_count);
    for (std::size_t qi = 0; qi < q_count; ++qi) {
        const int ident = world.instances[static_cast<std::size_t>(split.query_instance_ids[qi])].identity_id;
        for (int gid : split.gallery_image_ids) {
            const SceneImage* img = image_by_id.at(gid);
            for (int iid : img->instance_ids) {
                if (world.instances[static_cast<std::size_t>(iid)].identity_id == ident) {
                    required_images[qi].push_back(gid);
                    break;
                }
            }
        }
        if (required_images[qi].empty()) {
            throw InfeasibleGalleryError("evaluate_search: query " +
                                         std::to_string(split.query_instance_ids[qi]) +
                                         " has no true-match gallery image");
        }
        if (required_images[qi].size() > options.gallery_size) {
            throw InfeasibleGalleryError("evaluate_search: query " +
                                         std::to_string(split.query_instance_ids[qi]) + " needs " +
                                         std::to_string(required_images[qi].size()) +
                                         " images, gallery_size is " +
                                         std::to_string(options.gallery_size));
        }
    }

    std::vector<QueryResult> results(q_count);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t qi = 0; qi < q_count; ++qi) {
        const int qid = split.query_instance_ids[qi];
        const InstanceRecord& q = world.instances[static_cast<std::size_t>(qid)];

        // Sampled gallery: all true-match images plus a seeded draw over the
        // rest, per-query sub-seed so the sample is schedule-independent.
        std::vector<int> selected = required_images[qi];
        std::vector<int> pool;
        pool.reserve(split.gallery_image_ids.size());
        for (int gid : split.gallery_image_ids) {
            if (std::find(selected.begin(), selected.end(), gid) == selected.end()) pool.push_back(gid);
        }
        Rng rng(derive_seed(options.seed, "gallery", qi));
        rng.shuffle(pool);
        const std::size_t need = options.gallery_size - selected.size();
        selected.insert(selected.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
        std::sort(selected.begin(), selected.end());

        QueryResult& qr = results[qi];
        qr.query_instance_id = qid;
        for (int gid : selected) {
            const SceneImage* img = image_by_id.at(gid);
            for (int iid : img->instance_ids) {
                const auto idx = static_cast<std::size_t>(iid);
                const Detection& det = detections[idx];
                RankedCandidate rc;
                rc.image_id = gid;
                rc.box = det.box;
                rc.score = det.score;
                auto qe = query_emb.row(qi);
                auto ce = cand_emb.row(idx);
                double dot = 0.0;
                for (std::size_t k = 0; k < qe.size(); ++k) dot += qe[k] * ce[k];
                rc.similarity = std::clamp(dot, -1.0, 1.0);
                rc.true_match = false;
                for (int other : img->instance_ids) {
                    const InstanceRecord& gt = world.instances[static_cast<std::size_t>(other)];
                    if (is_true_match(det.box, gt.box, q.identity_id, gt.identity_id)) {
                        rc.true_match = true;
                        break;
                    }
                }
                qr.ranking.push_back(rc);
            }
        }
        std::sort(qr.ranking.begin(), qr.ranking.end(), ranked_before);

        std::vector<bool> flags(qr.ranking.size());
        for (std::size_t k = 0; k < flags.size(); ++k) flags[k] = qr.ranking[k].true_match;
        qr.has_positive = std::find(flags.begin(), flags.end(), true) != flags.end();
        qr.ap = qr.has_positive ? average_precision(flags) : 0.0;
    }

    // Reduction in query order, independent of the thread schedule.
    EvalResult out;
    out.gallery_size = options.gallery_size;
    out.num_queries = q_count;
    std::size_t hit1 = 0, hit5 = 0, hit10 = 0;
    double ap_sum = 0.0;
    for (const QueryResult& qr : results) {
        ap_sum += qr.ap;
        std::size_t first_true = qr.ranking.size();
        for (std::size_t k = 0; k < qr.ranking.size(); ++k) {
            if (qr.ranking[k].true_match) {
                first_true = k;
                break;
            }
        }
        if (first_true < 1) ++hit1;
        if (first_true < 5) ++hit5;
        if (first_true < 10) ++hit10;
    }
    const double denom = static_cast<double>(q_count);
    out.map = ap_sum / denom;
    out.rank1 = static_cast<double>(hit1) / denom;
    out.rank5 = static_cast<double>(hit5) / denom;
    out.rank10 = static_cast<double>(hit10) / denom;
    if (per_query != nullptr) *per_query = std::move(results);
    return out;
}

std::vector<EvalResult> gallery_size_sweep(const EncoderParams& params, const World& world,
                                           const Split& split,
                                           const std::vector<std::size_t>& sizes,
                                           double detection_sigma, std::uint64_t seed) {
    std::vector<EvalResult> out;
    out.reserve(sizes.size());
    for (std::size_t gs : sizes) {
        EvalOptions opt;
        opt.gallery_size = gs;
        opt.detection_sigma = detection_sigma;
        opt.seed = seed;
        out.push_back(evaluate_search(params, world, split, opt));
    }
    return out;
}

} // namespace rsiam
