#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsiam/synth.hpp"
#include "rsiam/trainer.hpp"

namespace rsiam {

struct EvalSettings {
    double query_fraction = 0.3;
    /// Gallery sizes (images per query) for the sweep; empty picks a
    /// geometric ladder between the smallest feasible size and the full
    /// gallery.
    std::vector<std::size_t> gallery_sizes;
    double detection_sigma = 0.5;
};

/// Everything one run needs. A single top-level seed feeds every module
/// through derived sub-seeds (world, init, shuffle, split, jitter, gallery),
/// so two runs with equal configs are bitwise identical.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/out";
    /// Optional serialized world (JSONL) to load instead of generating one.
    std::string world_file;
    /// Intermediate checkpoint interval in epochs; 0 writes only the final
    /// checkpoint.
    int checkpoint_every = 0;
    SynthConfig world;
    TrainConfig train;
    EvalSettings eval;
};

RunConfig default_run_config();

/// Serialized form with a fixed field order; parsing rejects unknown keys,
/// naming the offending path. Absent keys keep their defaults.
std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

/// Reads and parses a config file. IoError when unreadable, ConfigError on
/// malformed content.
RunConfig load_run_config(const std::string& path);

} // namespace rsiam
