#pragma once

#include <map>
#include <string>

#include "model.hpp"

namespace muse::ranker {

// Binary container, little-endian:
//   "MUSECKPT" u32 version
//   u64 n, then n bytes of config text (key=value lines)
//   u64 vocab size, then per token: u32 length + bytes
//   u64 parameter count, then per parameter:
//     u32 name length + name, i64 rows, i64 cols, rows*cols f64 (row-major)

void save_checkpoint(const std::string& path, const MuseModel& model);

/// Rebuilds the model from the stored configuration and vocabulary. Shape or
/// name disagreements raise ConfigError naming the offending key.
MuseModel load_checkpoint(const std::string& path);

/// Raises ConfigError naming the first shape-determining key whose value in
/// `overrides` differs from the checkpoint's configuration.
void check_config_compatible(const TrainingConfig& stored,
                             const std::map<std::string, std::string>& overrides);

}  // namespace muse::ranker
