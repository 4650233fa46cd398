#pragma once

namespace treegrad {

// Command-line front end: subcommands train, sweep, predict, gradcheck.
// Returns the process exit code: 0 success, 1 divergence or failed check,
// 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace treegrad
