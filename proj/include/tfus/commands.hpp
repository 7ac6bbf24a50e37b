#pragma once

#include <filesystem>
#include <string>

#include "tfus/config.hpp"
#include "tfus/metrics.hpp"

namespace tfus {

struct CommandOptions {
    bool stable_output = false; // omit wall-clock fields from reports
};

// Each command writes into resolve_output_dir(cfg) and throws tfus::Error
// subclasses on failure.
void cmd_preprocess(const RunConfig& cfg, const CommandOptions& opt);
void cmd_plan(const RunConfig& cfg, const CommandOptions& opt);
void cmd_simulate(const RunConfig& cfg, const CommandOptions& opt);
void cmd_compare(const RunConfig& cfg, const CommandOptions& opt);
void cmd_phantom(const RunConfig& cfg, const CommandOptions& opt);

/// Dispatches by subcommand name; ConfigError for unknown names.
void run_command(const std::string& name, const RunConfig& cfg, const CommandOptions& opt);

/// Focal report as stored in report_<mode>.json.
FocalReport read_focal_report(const std::filesystem::path& report_json);

/// Process exit code for an exception (0 is never returned).
int exit_code_for(const std::exception& e);

} // namespace tfus
