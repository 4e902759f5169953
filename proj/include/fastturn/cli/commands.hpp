#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace fastturn::cli {

// Exit codes shared by every subcommand:
//   0 success, 2 config/validation, 3 I/O, 4 missing prerequisite, 1 other.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitPrereq = 4;

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override);

int cmd_train(const std::string& config_path, const std::string& stage, bool from_scratch);

int cmd_eval(const std::string& config_path, const std::string& manifest, const std::string& mode,
             const std::string& checkpoint, const std::string& report_name);

int cmd_stream(const std::string& config_path, const std::string& feature_file, const std::string& mode,
               double realtime_factor, const std::string& checkpoint);

int cmd_bench_latency(const std::string& config_path, const std::string& manifest,
                      const std::string& checkpoint, int max_samples);

// Full argv entry point (CLI11 wiring + exception-to-exit-code mapping).
int run_cli(int argc, char** argv);

} // namespace fastturn::cli
