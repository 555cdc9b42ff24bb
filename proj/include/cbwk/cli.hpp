#pragma once

namespace cbwk {

/// Command-line entry point: simulate, oracle, cluster-eval, sweep, selftest.
/// Returns 0 on success, 1 on bad input, 2 on runtime failure.
int cli(int argc, char** argv);

}  // namespace cbwk
