#pragma once

#include <map>
#include <string>
#include <string_view>

#include "mara/model.hpp"

namespace mara {

inline constexpr int kCheckpointFormatVersion = 1;

/// How force labels enter the parameter gradient; recorded in every checkpoint.
inline constexpr const char* kGradientStrategy =
    "forward-over-reverse: force-loss parameter gradients are the tangent part of a reverse pass run on "
    "dual-number positions x + eps (F_pred - F_ref); no double-backward, no finite differences";

struct Checkpoint {
  ModelState state;
  std::map<std::string, std::string> metadata;
};

/// JSON document with format_version, config, every parameter with its shape,
/// and string metadata. Doubles round-trip exactly.
std::string checkpoint_to_json(const ModelState& state, const std::map<std::string, std::string>& metadata = {});
/// Throws ParseError for malformed JSON and SchemaError for missing or
/// inconsistent fields or an unsupported format version.
Checkpoint checkpoint_from_json(std::string_view text);

void save_checkpoint(const std::string& path, const ModelState& state,
                     const std::map<std::string, std::string>& metadata = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mara
