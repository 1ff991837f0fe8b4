#pragma once

#include <string>
#include <vector>

#include "lkgrf/config.hpp"
#include "lkgrf/error.hpp"

namespace lkgrf {

/// 0: every verdict passed; 1: a scientific check failed or a precondition
/// was not met; 2: operational failure (I/O, parse).
enum class ExitCode { pass = 0, fail = 1, operational = 2 };

struct DriverOutcome {
  ExitCode exit = ExitCode::pass;
  std::string report;              // human-readable lines
  std::vector<std::string> files;  // written paths relative to the output directory
};

struct RunOptions {
  unsigned threads = 0;
};

/// Maps an error code onto the exit-code contract.
ExitCode exit_code_for(ErrorCode code);

DriverOutcome cmd_validate(const RunConfig& config);
DriverOutcome cmd_clt(const RunConfig& config, const std::string& out_dir, const RunOptions& options = {});
DriverOutcome cmd_chaos(const RunConfig& config, const std::string& out_dir, int q_max,
                        const RunOptions& options = {});
DriverOutcome cmd_variance(const RunConfig& config, const std::string& out_dir, const RunOptions& options = {});
DriverOutcome cmd_rice_check(const RunConfig& config, const RunOptions& options = {});
/// Simulates one field realization on the first window of the experiment and dumps it.
DriverOutcome cmd_simulate(const RunConfig& config, const std::string& out_dir, const RunOptions& options = {});

/// run.json: config hash, tool version, seed, timestamps, command and the
/// output file list (run.json itself excluded).
void write_manifest(const RunConfig& config, const std::string& out_dir, const std::string& command,
                    const std::vector<std::string>& files, const std::string& started, const std::string& finished);

std::string utc_timestamp();
std::string tool_version();

}  // namespace lkgrf
