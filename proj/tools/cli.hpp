#pragma once

namespace ganvert {

// Entry point shared by the ganvert binary and the CLI tests. Returns the
// process exit code: 0 on success, 1 on bad usage, 2 on runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace ganvert
