#pragma once

#include <string>

#include "rsiam/config.hpp"

namespace rsiam {

/// Full training pipeline: world, epochs, metrics.jsonl, checkpoint.json,
/// world.jsonl, config.json, eval.json/eval.csv. Returns 0.
int cmd_train(const RunConfig& cfg);

/// Evaluation of a saved checkpoint: eval.json and eval.csv with one row per
/// gallery size.
int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path);

/// Five-variant comparison grid (scene-path instance recognition only, both
/// consistency ablations, full method, full method without the same-image
/// filter); writes ablation.csv.
int cmd_ablate(const RunConfig& cfg);

/// Dumps neighbor table, adjacency edges, and pseudo labels for a checkpoint
/// to clusters.jsonl.
int cmd_inspect_clusters(const RunConfig& cfg, const std::string& checkpoint_path);

/// Argument parsing and dispatch. Exit codes: 0 success, 1 usage/config
/// error, 2 runtime failure.
int run_cli(int argc, const char* const* argv);

} // namespace rsiam
