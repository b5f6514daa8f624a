#pragma once

#include "vigor/cevae/model.hpp"

#include <json.hpp>

#include <filesystem>

namespace vigor::cevae {

/// Self-describing JSON checkpoint: config, input scaling, every parameter
/// block, batch-norm running statistics and optimiser state. Doubles are
/// written in shortest round-trip form, so a loaded model evaluates bitwise
/// identically.
nlohmann::ordered_json checkpoint_to_json(CevaeModel& model);
CevaeModel checkpoint_from_json(const nlohmann::ordered_json& j);

void save_checkpoint(CevaeModel& model, const std::filesystem::path& path);
CevaeModel load_checkpoint(const std::filesystem::path& path);

} // namespace vigor::cevae
