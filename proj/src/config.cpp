#include "rsiam/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rsiam/errors.hpp"

namespace rsiam {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known) {
    for (const auto& item : obj.items()) {
        if (known.find(item.key()) == known.end()) {
            throw ConfigError("unknown config key: " + path + item.key());
        }
    }
}

template <typename T>
void read_field(const json& obj, const std::string& path, const char* key, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for " + path + key + ": " + e.what());
    }
}

json world_to_json(const SynthConfig& w) {
    json j;
    j["num_identities"] = w.num_identities;
    j["instances_per_identity_min"] = w.instances_per_identity_min;
    j["instances_per_identity_max"] = w.instances_per_identity_max;
    j["instances_per_image_min"] = w.instances_per_image_min;
    j["instances_per_image_max"] = w.instances_per_image_max;
    j["d_in"] = w.d_in;
    j["identity_separation"] = w.identity_separation;
    j["instance_noise_sigma"] = w.instance_noise_sigma;
    j["context_sigma"] = w.context_sigma;
    j["box_jitter_sigma"] = w.box_jitter_sigma;
    j["distractor_count"] = w.distractor_count;
    return j;
}

void world_from_json(const json& j, const std::string& path, SynthConfig& w) {
    reject_unknown(j, path,
                   {"num_identities", "instances_per_identity_min", "instances_per_identity_max",
                    "instances_per_image_min", "instances_per_image_max", "d_in",
                    "identity_separation", "instance_noise_sigma", "context_sigma",
                    "box_jitter_sigma", "distractor_count"});
    read_field(j, path, "num_identities", w.num_identities);
    read_field(j, path, "instances_per_identity_min", w.instances_per_identity_min);
    read_field(j, path, "instances_per_identity_max", w.instances_per_identity_max);
    read_field(j, path, "instances_per_image_min", w.instances_per_image_min);
    read_field(j, path, "instances_per_image_max", w.instances_per_image_max);
    read_field(j, path, "d_in", w.d_in);
    read_field(j, path, "identity_separation", w.identity_separation);
    read_field(j, path, "instance_noise_sigma", w.instance_noise_sigma);
    read_field(j, path, "context_sigma", w.context_sigma);
    read_field(j, path, "box_jitter_sigma", w.box_jitter_sigma);
    read_field(j, path, "distractor_count", w.distractor_count);
}

json train_to_json(const TrainConfig& t) {
    json j;
    j["epochs"] = t.epochs;
    j["batch_size"] = t.batch_size;
    j["lr"] = t.lr;
    j["lr_drop_epoch"] = t.lr_drop_epoch;
    j["sgd_momentum"] = t.sgd_momentum;
    j["weight_decay"] = t.weight_decay;
    j["gamma"] = t.gamma;
    j["bank_momentum"] = t.bank_momentum;
    j["temperature"] = t.temperature;
    j["use_ins"] = t.use_ins;
    j["use_int"] = t.use_int;
    j["use_contrastive"] = t.use_contrastive;
    j["use_cluster_labels"] = t.use_cluster_labels;
    j["search_path_only"] = t.search_path_only;
    j["filter_enabled"] = t.filter_enabled;
    j["neighbor_excludes_same_image"] = t.neighbor_excludes_same_image;
    j["d_hidden"] = t.d_hidden;
    j["d_emb"] = t.d_emb;
    return j;
}

void train_from_json(const json& j, const std::string& path, TrainConfig& t) {
    reject_unknown(j, path,
                   {"epochs", "batch_size", "lr", "lr_drop_epoch", "sgd_momentum", "weight_decay",
                    "gamma", "bank_momentum", "temperature", "use_ins", "use_int", "use_contrastive",
                    "use_cluster_labels", "search_path_only", "filter_enabled",
                    "neighbor_excludes_same_image", "d_hidden", "d_emb"});
    read_field(j, path, "epochs", t.epochs);
    read_field(j, path, "batch_size", t.batch_size);
    read_field(j, path, "lr", t.lr);
    read_field(j, path, "lr_drop_epoch", t.lr_drop_epoch);
    read_field(j, path, "sgd_momentum", t.sgd_momentum);
    read_field(j, path, "weight_decay", t.weight_decay);
    read_field(j, path, "gamma", t.gamma);
    read_field(j, path, "bank_momentum", t.bank_momentum);
    read_field(j, path, "temperature", t.temperature);
    read_field(j, path, "use_ins", t.use_ins);
    read_field(j, path, "use_int", t.use_int);
    read_field(j, path, "use_contrastive", t.use_contrastive);
    read_field(j, path, "use_cluster_labels", t.use_cluster_labels);
    read_field(j, path, "search_path_only", t.search_path_only);
    read_field(j, path, "filter_enabled", t.filter_enabled);
    read_field(j, path, "neighbor_excludes_same_image", t.neighbor_excludes_same_image);
    read_field(j, path, "d_hidden", t.d_hidden);
    read_field(j, path, "d_emb", t.d_emb);
}

json eval_to_json(const EvalSettings& e) {
    json j;
    j["query_fraction"] = e.query_fraction;
    j["gallery_sizes"] = e.gallery_sizes;
    j["detection_sigma"] = e.detection_sigma;
    return j;
}

void eval_from_json(const json& j, const std::string& path, EvalSettings& e) {
    reject_unknown(j, path, {"query_fraction", "gallery_sizes", "detection_sigma"});
    read_field(j, path, "query_fraction", e.query_fraction);
    read_field(j, path, "gallery_sizes", e.gallery_sizes);
    read_field(j, path, "detection_sigma", e.detection_sigma);
}

} // namespace

RunConfig default_run_config() { return RunConfig{}; }

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["world_file"] = cfg.world_file;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["world"] = world_to_json(cfg.world);
    j["train"] = train_to_json(cfg.train);
    j["eval"] = eval_to_json(cfg.eval);
    return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    RunConfig cfg;
    reject_unknown(j, "", {"seed", "out_dir", "world_file", "checkpoint_every", "world", "train", "eval"});
    read_field(j, "", "seed", cfg.seed);
    read_field(j, "", "out_dir", cfg.out_dir);
    read_field(j, "", "world_file", cfg.world_file);
    read_field(j, "", "checkpoint_every", cfg.checkpoint_every);
    if (j.contains("world")) {
        if (!j["world"].is_object()) throw ConfigError("world section must be an object");
        world_from_json(j["world"], "world.", cfg.world);
    }
    if (j.contains("train")) {
        if (!j["train"].is_object()) throw ConfigError("train section must be an object");
        train_from_json(j["train"], "train.", cfg.train);
    }
    if (j.contains("eval")) {
        if (!j["eval"].is_object()) throw ConfigError("eval section must be an object");
        eval_from_json(j["eval"], "eval.", cfg.eval);
    }
    if (cfg.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_json(buf.str());
}

} // namespace rsiam
