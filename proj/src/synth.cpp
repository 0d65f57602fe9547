#include "rsiam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "rsiam/errors.hpp"
#include "rsiam/rng.hpp"

namespace rsiam {

namespace {

constexpr double kSceneExtent = 128.0;

// Feature entries are snapped to this grid so that view_a = view_b + context
// is exact in IEEE arithmetic (all summands share the grid and the result
// stays well within 53 bits of precision at desk scale).
inline double quantize(double x) { return std::nearbyint(x * 1048576.0) / 1048576.0; }

RealVector draw_quantized(Rng& rng, int dim, double scale) {
    RealVector v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = quantize(scale * rng.gaussian());
    return v;
}

BoundingBox draw_box(Rng& rng) {
    const double w = 6.0 + 8.0 * rng.uniform();
    const double h = 12.0 + 10.0 * rng.uniform();
    const double x1 = rng.uniform() * (kSceneExtent - w);
    const double y1 = rng.uniform() * (kSceneExtent - h);
    return {x1, y1, x1 + w, y1 + h};
}

} // namespace

void validate_config(const SynthConfig& cfg) {
    auto fail = [](const std::string& msg) { throw InfeasibleConfigError("SynthConfig: " + msg); };
    if (cfg.num_identities < 1) fail("num_identities must be >= 1");
    if (cfg.instances_per_identity_min < 1) fail("instances_per_identity_min must be >= 1");
    if (cfg.instances_per_identity_max < cfg.instances_per_identity_min)
        fail("instances_per_identity range inverted");
    if (cfg.instances_per_image_min < 1) fail("instances_per_image_min must be >= 1");
    if (cfg.instances_per_image_max < cfg.instances_per_image_min)
        fail("instances_per_image range inverted");
    if (cfg.instances_per_image_max > cfg.num_identities)
        fail("instances_per_image_max exceeds num_identities: an image cannot be "
             "filled with distinct identities");
    if (cfg.d_in < 1) fail("d_in must be >= 1");
    if (cfg.identity_separation < 0) fail("identity_separation must be >= 0");
    if (cfg.instance_noise_sigma < 0) fail("instance_noise_sigma must be >= 0");
    if (cfg.context_sigma < 0) fail("context_sigma must be >= 0");
    if (cfg.box_jitter_sigma < 0) fail("box_jitter_sigma must be >= 0");
    if (cfg.distractor_count < 0) fail("distractor_count must be >= 0");
}

World generate_world(const SynthConfig& cfg) {
    validate_config(cfg);
    Rng rng(cfg.rng_seed);

    const int total_identities = cfg.num_identities + cfg.distractor_count;
    std::vector<RealVector> prototypes;
    prototypes.reserve(total_identities);
    for (int id = 0; id < total_identities; ++id)
        prototypes.push_back(draw_quantized(rng, cfg.d_in, cfg.identity_separation));

    std::vector<int> remaining(total_identities, 1); // distractors appear once
    for (int id = 0; id < cfg.num_identities; ++id)
        remaining[id] = static_cast<int>(
            rng.uniform_int(cfg.instances_per_identity_min, cfg.instances_per_identity_max));

    World world;
    world.config = cfg;
    int next_instance = 0;

    for (;;) {
        std::vector<int> candidates;
        for (int id = 0; id < total_identities; ++id)
            if (remaining[id] > 0) candidates.push_back(id);
        if (candidates.empty()) break;

        const int want = static_cast<int>(
            rng.uniform_int(cfg.instances_per_image_min, cfg.instances_per_image_max));
        // Most-remaining-first with a random tie order keeps any one identity
        // from stranding a long tail of same-id instances.
        rng.shuffle(candidates);
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](int a, int b) { return remaining[a] > remaining[b]; });
        const int take = std::min<int>(want, static_cast<int>(candidates.size()));

        SceneImage image;
        image.image_id = static_cast<int>(world.images.size());
        image.context_vector = draw_quantized(rng, cfg.d_in, cfg.context_sigma);

        for (int k = 0; k < take; ++k) {
            const int identity = candidates[k];
            InstanceRecord rec;
            rec.instance_id = next_instance++;
            rec.image_id = image.image_id;
            rec.identity_id = identity;
            rec.view_b_input.resize(cfg.d_in);
            for (int j = 0; j < cfg.d_in; ++j)
                rec.view_b_input[j] =
                    quantize(prototypes[identity][j] + cfg.instance_noise_sigma * rng.gaussian());
            rec.box = draw_box(rng);
            rec.view_a_input.resize(cfg.d_in);
            for (int j = 0; j < cfg.d_in; ++j)
                rec.view_a_input[j] = rec.view_b_input[j] + image.context_vector[j];
            image.instance_ids.push_back(rec.instance_id);
            world.instances.push_back(std::move(rec));
            --remaining[identity];
        }
        world.images.push_back(std::move(image));
    }
    return world;
}

std::vector<Detection> jitter_detections(const std::vector<InstanceRecord>& instances,
                                         double sigma, std::uint64_t seed) {
    if (sigma < 0) throw InfeasibleConfigError("jitter_detections: sigma must be >= 0");
    Rng rng(seed);
    std::vector<Detection> out;
    out.reserve(instances.size());
    for (const auto& rec : instances) {
        const double dx1 = sigma * rng.gaussian();
        const double dy1 = sigma * rng.gaussian();
        const double dx2 = sigma * rng.gaussian();
        const double dy2 = sigma * rng.gaussian();
        BoundingBox b{rec.box.x1 + dx1, rec.box.y1 + dy1, rec.box.x2 + dx2, rec.box.y2 + dy2};
        if (b.x1 >= b.x2) {
            const double mid = 0.5 * (b.x1 + b.x2);
            b.x1 = mid - 0.05;
            b.x2 = mid + 0.05;
        }
        if (b.y1 >= b.y2) {
            const double mid = 0.5 * (b.y1 + b.y2);
            b.y1 = mid - 0.05;
            b.y2 = mid + 0.05;
        }
        const double mean_shift = (std::abs(dx1) + std::abs(dy1) + std::abs(dx2) + std::abs(dy2)) / 4.0;
        out.push_back({b, 1.0 / (1.0 + mean_shift)});
    }
    return out;
}

Split split_query_gallery(const World& world, double query_fraction, std::uint64_t seed) {
    if (!(query_fraction > 0.0 && query_fraction < 1.0))
        throw InfeasibleSplitError("query_fraction must lie in (0, 1)");
    const int num_images = static_cast<int>(world.images.size());
    if (num_images < 2) throw InfeasibleSplitError("need at least two images to split");

    std::vector<int> image_order(num_images);
    for (int i = 0; i < num_images; ++i) image_order[i] = i;
    Rng rng(seed);
    rng.shuffle(image_order);

    const int num_query_images =
        std::clamp(static_cast<int>(std::lround(query_fraction * num_images)), 1, num_images - 1);
    std::set<int> query_images(image_order.begin(), image_order.begin() + num_query_images);

    std::set<int> gallery_identities;
    Split split;
    for (const auto& img : world.images) {
        if (query_images.count(img.image_id)) continue;
        split.gallery_image_ids.push_back(img.image_id);
        for (int iid : img.instance_ids)
            gallery_identities.insert(world.instances[iid].identity_id);
    }
    for (const auto& rec : world.instances)
        if (query_images.count(rec.image_id) && gallery_identities.count(rec.identity_id))
            split.query_instance_ids.push_back(rec.instance_id);

    std::sort(split.gallery_image_ids.begin(), split.gallery_image_ids.end());
    std::sort(split.query_instance_ids.begin(), split.query_instance_ids.end());
    if (split.query_instance_ids.empty())
        throw InfeasibleSplitError("no query identity appears in any gallery image");
    return split;
}

void save_world_jsonl(const World& world, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& rec : world.instances) {
        nlohmann::ordered_json line;
        line["instance_id"] = rec.instance_id;
        line["image_id"] = rec.image_id;
        line["identity_id"] = rec.identity_id;
        line["box"] = {rec.box.x1, rec.box.y1, rec.box.x2, rec.box.y2};
        line["view_a"] = rec.view_a_input;
        line["view_b"] = rec.view_b_input;
        out << line.dump() << "\n";
    }
}

World load_world_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    World world;
    std::string line;
    std::map<int, SceneImage> images;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        InstanceRecord rec;
        rec.instance_id = j.at("instance_id").get<int>();
        rec.image_id = j.at("image_id").get<int>();
        rec.identity_id = j.at("identity_id").get<int>();
        const auto& b = j.at("box");
        rec.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                   b.at(3).get<double>()};
        rec.view_a_input = j.at("view_a").get<RealVector>();
        rec.view_b_input = j.at("view_b").get<RealVector>();
        if (rec.view_a_input.size() != rec.view_b_input.size())
            throw IoError("world line " + std::to_string(world.instances.size()) +
                          ": view dimensions differ");
        if (static_cast<int>(world.instances.size()) != rec.instance_id)
            throw IoError("world file: instance ids must be dense and ascending");
        auto& img = images[rec.image_id];
        img.image_id = rec.image_id;
        img.instance_ids.push_back(rec.instance_id);
        if (img.context_vector.empty()) {
            img.context_vector.resize(rec.view_a_input.size());
            for (std::size_t k = 0; k < rec.view_a_input.size(); ++k)
                img.context_vector[k] = rec.view_a_input[k] - rec.view_b_input[k];
        }
        world.instances.push_back(std::move(rec));
    }
    if (world.instances.empty()) throw IoError("world file has no instances: " + path);

    for (auto& [id, img] : images) {
        std::set<int> identities;
        for (int iid : img.instance_ids) {
            if (!identities.insert(world.instances[iid].identity_id).second)
                throw IoError("image " + std::to_string(id) + " repeats an identity");
        }
        world.images.push_back(std::move(img));
    }
    world.config.d_in = static_cast<int>(world.instances.front().view_b_input.size());
    return world;
}

} // namespace rsiam
