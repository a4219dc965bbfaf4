#pragma once

namespace depthgen {

/// Command-line entry point wiring every module together: data prep,
/// forward generation, evaluation, gradient audits, smoke training,
/// and depth colorization. Returns the process exit code: 0 on
/// success, 1 on a runtime failure (message on stderr), 2 on an
/// argument or config-schema error. Config/argument validation always
/// completes before any computation starts, and files written by a
/// failing subcommand are removed again.
int cli_main(int argc, char** argv);

}  // namespace depthgen
