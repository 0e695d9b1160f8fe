#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>

#include "mbr/dynamics.hpp"

namespace mbr {

// Tolerance on |m_w - neutral_extra_weight| enforced for parameter files.
inline constexpr double kNeutralTolerance = 1e-4;

nlohmann::json params_to_json(const BlimpParams& p);

/// Missing keys keep their default_params() value.
BlimpParams params_from_json(const nlohmann::json& j);

/// Reads a parameter file. With require_neutral the extra weight must be
/// within kNeutralTolerance of the neutral-buoyancy value.
BlimpParams load_params(const std::filesystem::path& path, bool require_neutral = true);

void save_params(const BlimpParams& p, const std::filesystem::path& path);

}  // namespace mbr
