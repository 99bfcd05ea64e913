#pragma once

#include <filesystem>
#include <string>

#include "confix/providers.hpp"
#include "confix/repair_config.hpp"

namespace confix {

enum class ProviderKind { File, Synthetic };

struct PipelineConfig {
  RepairConfig repair;

  std::filesystem::path scene = "scene.ply";
  std::filesystem::path cameras = "cameras.json";
  std::filesystem::path gt_dir = "gt";
  std::filesystem::path targets_dir = "targets";
  std::filesystem::path output_dir = "out";

  ProviderKind provider = ProviderKind::File;
  Corruption corruption;
  PlaneBenchmarkParams benchmark;

  bool uniform_confidence = false;
  int checkpoint_interval = 0;  ///< steps between scene snapshots; 0 disables
};

/// Parses a JSON config. Missing keys keep their defaults; unknown keys and
/// type mismatches throw ValidationError naming the key.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Pretty-printed JSON with every key, in a fixed order.
std::string serialize_config(const PipelineConfig& cfg);

}  // namespace confix
