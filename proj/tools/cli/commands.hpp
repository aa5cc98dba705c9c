#pragma once

#include <string>
#include <vector>

namespace sstgnn::cli {

/// Process exit codes.
enum ExitCode : int {
	exit_ok = 0,
	exit_failure = 1,
	exit_config = 2,
	exit_data = 3,
	exit_numerical = 4,
};

/// Parses the command line and runs one subcommand: synth, build-graph,
/// train, eval, predict or gradcheck.
int run(int argc, char **argv);
int run(const std::vector<std::string> &args);

} // namespace sstgnn::cli
