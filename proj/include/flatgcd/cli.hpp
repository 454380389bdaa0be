#pragma once

namespace flatgcd {

// Command-line entry point (subcommands: synth, train, eval, select-anchors,
// diag-hessian, gradcheck). Returns the process exit code: 0 on success,
// 2 for usage/config/missing-file errors, 1 for runtime failures.
int run_cli(int argc, const char* const* argv);

} // namespace flatgcd
