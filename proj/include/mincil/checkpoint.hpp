#pragma once

#include "mincil/config.hpp"
#include "mincil/model.hpp"
#include "mincil/report.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mincil {

/// Layout documented in docs/checkpoint-format.md.
inline constexpr std::uint64_t kCheckpointVersion = 1;

struct Checkpoint {
    RunConfig config;
    MinModel model;
    std::vector<SessionReport> reports;
};

std::vector<std::uint8_t> encode_checkpoint(const RunConfig& config, const MinModel& model,
                                            const std::vector<SessionReport>& reports);
/// Verifies magic, version, section checksums, config hash and the rebuilt
/// backbone hash, then validates every restored invariant.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const MinModel& model,
                     const std::vector<SessionReport>& reports);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mincil
