#pragma once

#include <string>

#include "ead/config.hpp"

namespace ead {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;      // bad config / input
inline constexpr int kExitNumerical = 3;  // non-finite loss
inline constexpr int kExitCheckpoint = 4; // checkpoint shape mismatch

// Relative run paths are rooted at $EAD_RUN_ROOT when it is set.
std::string resolve_run_path(const std::string& path);

int cmd_train(RunConfig cfg, const std::string& out_dir,
              const std::string& resume_path);

int cmd_sample(const RunConfig& cfg, const std::string& checkpoint_path,
               const std::string& out_path, const std::string& traj_prefix,
               bool use_raw_params);

int cmd_eval(const std::string& xyz_path, const std::string& out_json,
             const std::string& out_csv, const std::string& data_dir);

int cmd_schedule_dump(int horizon, double precision, const std::string& out);

int cmd_pyramid_dump(int horizon, int atoms, int u, const std::string& out);

}  // namespace ead
