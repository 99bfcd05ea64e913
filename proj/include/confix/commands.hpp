#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "confix/config.hpp"

namespace confix {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  ///< internal or contract error
inline constexpr int kExitInput = 2;    ///< unreadable or invalid input, locked output

/// Options shared by every command.
struct CommandOptions {
  PipelineConfig config;
  bool uniform_confidence = false;
};

/// Loads the config (defaults when path is empty) and applies overrides.
/// Relative paths in a config file resolve against the file's directory.
CommandOptions make_options(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                            bool uniform, const std::optional<std::filesystem::path>& out_dir);

/// Base render of the scene at every camera: rgb PNG, alpha and depth
/// 16-bit PGM, each with a float32 sidecar, under <out>/renders.
void cmd_render(const CommandOptions& opt, std::ostream& log);

/// Confidence maps under <out>/confidence plus summary.json.
void cmd_confidence(const CommandOptions& opt, std::ostream& log);

/// Repair from the initial scene; reuses cached renders and confidence maps.
/// Writes scene_final.ply, loss.csv and topology.csv under <out>.
void cmd_repair(const CommandOptions& opt, std::ostream& log);

/// Evaluates <out>/scene_final.ply on the novel views; eval.csv, eval.json.
void cmd_eval(const CommandOptions& opt, std::ostream& log);

/// Generates the synthetic plane data set under <out>, repairs it with and
/// without confidence weights, and reports the held-out PSNR of both.
void cmd_synth_bench(const CommandOptions& opt, std::ostream& log);

/// Entry point of the `confix` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace confix
