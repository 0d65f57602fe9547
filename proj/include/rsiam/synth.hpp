#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsiam/types.hpp"

namespace rsiam {

/// One pedestrian instance. identity_id is ground truth kept for evaluation
/// only; the training path never sees it (see TrainingView in trainer.hpp).
struct InstanceRecord {
    int instance_id = -1;
    int image_id = -1;
    int identity_id = -1;
    BoundingBox box;
    RealVector view_a_input; // scene-level view, contaminated by per-image context
    RealVector view_b_input; // cropped view, clean
};

struct SceneImage {
    int image_id = -1;
    std::vector<int> instance_ids;
    RealVector context_vector;
};

struct SynthConfig {
    int num_identities = 10;
    int instances_per_identity_min = 7;
    int instances_per_identity_max = 9;
    int instances_per_image_min = 2;
    int instances_per_image_max = 4;
    int d_in = 32;
    double identity_separation = 1.0;
    double instance_noise_sigma = 0.1;
    double context_sigma = 1.5;
    double box_jitter_sigma = 0.0;
    // Extra single-instance identities padding the gallery; never queryable
    // (an identity seen in one image only is never selected as a query).
    int distractor_count = 0;
    std::uint64_t rng_seed = 1;
};

struct World {
    SynthConfig config;
    std::vector<SceneImage> images;
    std::vector<InstanceRecord> instances;
};

/// Throws InfeasibleConfigError on invalid counts, negative sigmas, inverted
/// ranges, or an image range exceeding the identity count.
void validate_config(const SynthConfig& cfg);

/// Builds a synthetic person-search world.
///
/// Identity prototypes are isotropic Gaussian draws scaled by
/// identity_separation; each clean view is its prototype plus Gaussian
/// instance noise; each image draws one Gaussian context vector shared by all
/// of its instances, and view_a = view_b + context. All generated feature
/// entries are snapped to a 2^-20 grid so that the additive identity
/// (view_a - view_b == context) holds exactly in floating point.
///
/// Images are filled with pairwise-distinct identities. Identities for an
/// image are chosen most-remaining-first (random tie order), so trailing
/// images may hold fewer instances than the configured minimum when the pool
/// runs short. Deterministic given rng_seed.
World generate_world(const SynthConfig& cfg);

struct Detection {
    BoundingBox box;
    double score = 1.0;
};

/// One candidate per ground-truth box, corners perturbed by Gaussian(sigma).
/// sigma = 0 returns exact copies with score 1. Scores are in (0, 1] and
/// shrink with the perturbation magnitude.
std::vector<Detection> jitter_detections(const std::vector<InstanceRecord>& instances,
                                         double sigma, std::uint64_t seed);

struct Split {
    std::vector<int> query_instance_ids; // ascending
    std::vector<int> gallery_image_ids;  // ascending
};

/// Splits images into query-source and gallery roles (seeded shuffle; about
/// query_fraction of images take the query role). Queries are the instances
/// of query-role images whose identity also appears in at least one gallery
/// image. Throws InfeasibleSplitError when either side ends up empty.
Split split_query_gallery(const World& world, double query_fraction, std::uint64_t seed);

/// Line-delimited JSON, one instance per line, field order:
/// instance_id, image_id, identity_id, box [x1,y1,x2,y2], view_a, view_b.
void save_world_jsonl(const World& world, const std::string& path);
World load_world_jsonl(const std::string& path);

} // namespace rsiam
