#pragma once

namespace cdil {

/// Entry point of the `cdil` command line tool (run / synth / split / report).
/// Returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace cdil
