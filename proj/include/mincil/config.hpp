#pragma once

#include "mincil/data_stream.hpp"
#include "mincil/model.hpp"
#include "mincil/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mincil {

/// Everything a run depends on. Serialized as flat `key = value` lines.
struct RunConfig {
    std::string data_source = "synthetic";  // synthetic | embedding
    std::string data_path;
    SyntheticStreamParams synthetic;
    std::uint64_t class_seed = 1993;
    ModelParams model;
    TrainConfig train;
    std::string output_dir = "runs/default";
};

struct ConfigKey {
    std::string name;
    std::string description;
};

/// All recognised keys with a one-line description, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its textual value. Unknown keys and unparsable values throw ValidationError.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Parses `key = value` lines; `#` starts a comment. Later lines win.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// `desk` (the defaults) or `paper-dims` (d2 = 192, buffer 16384).
void apply_profile(RunConfig& config, std::string_view profile);

/// Range checks across all fields.
void validate(const RunConfig& config);

/// Every key with its resolved value, one per line, in documentation order.
std::string to_text(const RunConfig& config);

/// SHA-256 of to_text() without output.dir.
std::string config_hash(const RunConfig& config);

/// Splits "a,b,c" into trimmed non-empty items.
std::vector<std::string> split_list(std::string_view text);

}  // namespace mincil
