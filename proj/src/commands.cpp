#include "rsiam/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsiam/clustering.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/eval.hpp"
#include "rsiam/rng.hpp"
#include "rsiam/trainer.hpp"

namespace rsiam {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

World acquire_world(const RunConfig& cfg) {
    if (!cfg.world_file.empty()) return load_world_jsonl(cfg.world_file);
    SynthConfig wc = cfg.world;
    wc.rng_seed = derive_seed(cfg.seed, "world");
    return generate_world(wc);
}

Split make_split(const RunConfig& cfg, const World& world) {
    return split_query_gallery(world, cfg.eval.query_fraction, derive_seed(cfg.seed, "split"));
}

/// Smallest per-query gallery that fits every query's true-match images.
std::size_t min_feasible_gallery(const World& world, const Split& split) {
    const std::set<int> gallery(split.gallery_image_ids.begin(), split.gallery_image_ids.end());
    std::size_t worst = 1;
    for (int qid : split.query_instance_ids) {
        const int ident = world.instances[static_cast<std::size_t>(qid)].identity_id;
        std::set<int> images_with_identity;
        for (const InstanceRecord& rec : world.instances) {
            if (rec.identity_id == ident && gallery.count(rec.image_id) > 0)
                images_with_identity.insert(rec.image_id);
        }
        worst = std::max(worst, images_with_identity.size());
    }
    return worst;
}

std::vector<std::size_t> resolve_gallery_sizes(const RunConfig& cfg, const World& world,
                                               const Split& split) {
    const std::size_t available = split.gallery_image_ids.size();
    if (!cfg.eval.gallery_sizes.empty()) return cfg.eval.gallery_sizes;
    // Geometric ladder from the smallest feasible size up to the full gallery.
    std::vector<std::size_t> sizes;
    for (std::size_t g = std::max<std::size_t>(2, min_feasible_gallery(world, split)); g < available;
         g *= 2) {
        sizes.push_back(g);
    }
    sizes.push_back(available);
    return sizes;
}

json metrics_line(const EpochMetrics& m) {
    json j;
    j["epoch"] = m.epoch;
    j["loss_ins"] = m.loss_ins;
    j["loss_int"] = m.loss_int;
    j["loss_clu"] = m.loss_clu;
    j["loss_total"] = m.loss_total;
    j["num_clusters"] = m.num_clusters;
    j["purity"] = m.purity;
    j["nmi"] = m.nmi;
    j["wall_seconds"] = m.wall_seconds; // excluded from determinism comparisons
    return j;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

void write_eval_outputs(const EncoderParams& params, const World& world, const Split& split,
                        const RunConfig& cfg, const fs::path& out_dir) {
    const std::vector<std::size_t> sizes = resolve_gallery_sizes(cfg, world, split);
    const std::vector<EvalResult> sweep = gallery_size_sweep(
        params, world, split, sizes, cfg.eval.detection_sigma, derive_seed(cfg.seed, "eval"));

    json j;
    j["num_queries"] = split.query_instance_ids.size();
    j["gallery_images_available"] = split.gallery_image_ids.size();
    j["detection_sigma"] = cfg.eval.detection_sigma;
    j["sweep"] = json::array();
    for (const EvalResult& r : sweep) {
        json row;
        row["gallery_size"] = r.gallery_size;
        row["map"] = r.map;
        row["rank1"] = r.rank1;
        row["rank5"] = r.rank5;
        row["rank10"] = r.rank10;
        j["sweep"].push_back(row);
    }
    open_out(out_dir / "eval.json") << j.dump(2) << "\n";

    std::ofstream csv = open_out(out_dir / "eval.csv");
    csv << "gallery_size,map,rank1,rank5,rank10\n";
    for (const EvalResult& r : sweep) {
        csv << r.gallery_size << "," << json(r.map).dump() << "," << json(r.rank1).dump() << ","
            << json(r.rank5).dump() << "," << json(r.rank10).dump() << "\n";
    }

    const EvalResult& full = sweep.back();
    std::printf("eval: gallery=%zu queries=%zu mAP=%.4f rank1=%.4f rank5=%.4f rank10=%.4f\n",
                full.gallery_size, full.num_queries, full.map, full.rank1, full.rank5, full.rank10);
}

EncoderParams load_checkpoint_for(const RunConfig& cfg, const World& world,
                                  const std::string& checkpoint_path) {
    EncoderParams params = load_checkpoint(checkpoint_path);
    if (params.d_in() != static_cast<std::size_t>(world.config.d_in)) {
        throw DimensionMismatchError("checkpoint expects d_in " + std::to_string(params.d_in()) +
                                     " but the world has d_in " + std::to_string(world.config.d_in));
    }
    return params;
}

} // namespace

int cmd_train(const RunConfig& cfg) {
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    open_out(out_dir / "config.json") << run_config_to_json(cfg);

    World world = acquire_world(cfg);
    save_world_jsonl(world, (out_dir / "world.jsonl").string());
    std::printf("world: %zu instances, %zu images, %d identities\n", world.instances.size(),
                world.images.size(), world.config.num_identities);

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    TrainerState state = init_trainer(world, tc);

    std::ofstream metrics = open_out(out_dir / "metrics.jsonl");
    for (int e = 0; e < tc.epochs; ++e) {
        EpochMetrics m = run_epoch(state);
        metrics << metrics_line(m).dump() << "\n";
        if ((e + 1) % 10 == 0 || e + 1 == tc.epochs) {
            std::printf("epoch %3d  total=%.4f ins=%.4f int=%.4f clu=%.4f  C=%d nmi=%.3f\n", m.epoch,
                        m.loss_total, m.loss_ins, m.loss_int, m.loss_clu, m.num_clusters, m.nmi);
        }
        if (cfg.checkpoint_every > 0 && (e + 1) % cfg.checkpoint_every == 0 && e + 1 < tc.epochs) {
            save_checkpoint(state.params,
                            (out_dir / ("checkpoint_epoch" + std::to_string(e + 1) + ".json")).string());
        }
    }
    metrics.close();
    save_checkpoint(state.params, (out_dir / "checkpoint.json").string());

    Split split = make_split(cfg, world);
    write_eval_outputs(state.params, world, split, cfg, out_dir);
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    World world = acquire_world(cfg);
    EncoderParams params = load_checkpoint_for(cfg, world, checkpoint_path);
    Split split = make_split(cfg, world);
    write_eval_outputs(params, world, split, cfg, out_dir);
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    World world = acquire_world(cfg);
    Split split = make_split(cfg, world);

    struct Variant {
        const char* name;
        bool search_path_only;
        bool use_ins;
        bool use_int;
        bool use_cluster_labels;
        bool filter_enabled;
    };
    const Variant grid[] = {
        {"search_ir", true, false, false, false, true},
        {"siamese_ins_ir", false, true, false, false, true},
        {"siamese_ins_int_ir", false, true, true, false, true},
        {"full", false, true, true, true, true},
        {"full_no_filter", false, true, true, true, false},
    };

    std::ofstream csv = open_out(out_dir / "ablation.csv");
    csv << "variant,map,rank1,rank5,rank10,nmi,num_clusters\n";
    std::printf("%-20s %8s %8s %8s %8s\n", "variant", "mAP", "rank1", "nmi", "C");
    for (const Variant& v : grid) {
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seed;
        tc.search_path_only = v.search_path_only;
        tc.use_ins = v.use_ins;
        tc.use_int = v.use_int;
        tc.use_cluster_labels = v.use_cluster_labels;
        tc.filter_enabled = v.filter_enabled;

        TrainOutcome outcome = train(world, tc);
        EvalOptions opt;
        opt.gallery_size = split.gallery_image_ids.size();
        opt.detection_sigma = cfg.eval.detection_sigma;
        opt.seed = derive_seed(cfg.seed, "eval");
        EvalResult r = evaluate_search(outcome.params, world, split, opt);
        const double nmi = outcome.history.empty() ? 0.0 : outcome.history.back().nmi;

        csv << v.name << "," << json(r.map).dump() << "," << json(r.rank1).dump() << ","
            << json(r.rank5).dump() << "," << json(r.rank10).dump() << "," << json(nmi).dump() << ","
            << outcome.final_num_clusters << "\n";
        std::printf("%-20s %8.4f %8.4f %8.4f %4d\n", v.name, r.map, r.rank1, nmi,
                    outcome.final_num_clusters);
    }
    return 0;
}

int cmd_inspect_clusters(const RunConfig& cfg, const std::string& checkpoint_path) {
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    World world = acquire_world(cfg);
    EncoderParams params = load_checkpoint_for(cfg, world, checkpoint_path);

    TrainingView view = make_training_view(world);
    RealMatrix features = extract_all_features(params, view, cfg.train.search_path_only);
    std::vector<int> image_ids(view.instances.size());
    for (std::size_t i = 0; i < image_ids.size(); ++i) image_ids[i] = view.instances[i].image_id;

    ClusterOptions copts;
    copts.filter_enabled = cfg.train.filter_enabled;
    copts.exclude_same_image_neighbors = cfg.train.neighbor_excludes_same_image;
    const NeighborTable table = copts.exclude_same_image_neighbors
                                    ? first_neighbors(features, image_ids)
                                    : first_neighbors(features);
    AdjacencyGraph graph = build_adjacency(table, image_ids, copts.filter_enabled);
    PseudoLabeling labeling = connected_components(graph);

    std::ofstream out = open_out(out_dir / "clusters.jsonl");
    json summary;
    summary["type"] = "summary";
    summary["num_instances"] = graph.n;
    summary["num_edges"] = graph.edges.size();
    summary["num_clusters"] = labeling.num_clusters;
    summary["filter_enabled"] = copts.filter_enabled;
    out << summary.dump() << "\n";
    for (std::size_t i = 0; i < table.kappa.size(); ++i) {
        json line;
        line["type"] = "instance";
        line["instance_id"] = i;
        line["image_id"] = image_ids[i];
        line["kappa"] = table.kappa[i];
        line["label"] = labeling.labels[i];
        out << line.dump() << "\n";
    }
    for (const auto& [a, b] : graph.edges) {
        json line;
        line["type"] = "edge";
        line["i"] = a;
        line["j"] = b;
        out << line.dump() << "\n";
    }
    std::printf("clusters: %d instances, %zu edges, %d clusters\n", graph.n, graph.edges.size(),
                labeling.num_clusters);
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Two-view embedding trainer with clustering and retrieval evaluation on synthetic scene worlds"};
    app.require_subcommand(0, 1);

    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "Print the default config as JSON and exit");

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    std::string checkpoint_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Config file (JSON)");
        sub->add_option("--out", out_dir, "Output directory (overrides config)");
        sub->add_option("--seed", seed_override, "Master seed (overrides config)");
    };
    CLI::App* train_cmd = app.add_subcommand("train", "Generate a world and train");
    add_common(train_cmd);
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint over gallery sizes");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file (default OUT/checkpoint.json)");
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "Run the five-variant comparison grid");
    add_common(ablate_cmd);
    CLI::App* inspect_cmd =
        app.add_subcommand("inspect-clusters", "Dump neighbors, edges, and labels for a checkpoint");
    add_common(inspect_cmd);
    inspect_cmd->add_option("--checkpoint", checkpoint_path,
                            "Checkpoint file (default OUT/checkpoint.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help or the parse error
        return code == 0 ? 0 : 1;
    }

    if (print_defaults) {
        std::cout << run_config_to_json(default_run_config());
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 1;
    }

    try {
        RunConfig cfg = config_path.empty() ? default_run_config() : load_run_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_override) cfg.seed = *seed_override;
        if (checkpoint_path.empty()) {
            checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.json").string();
        }

        if (train_cmd->parsed()) return cmd_train(cfg);
        if (eval_cmd->parsed()) return cmd_eval(cfg, checkpoint_path);
        if (ablate_cmd->parsed()) return cmd_ablate(cfg);
        if (inspect_cmd->parsed()) return cmd_inspect_clusters(cfg, checkpoint_path);
        std::cerr << app.help();
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace rsiam
