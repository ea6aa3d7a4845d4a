#pragma once

namespace cauge::cli {

// Full command-line entry point (parse + dispatch). Returns the process
// exit code: 0 success, 1 runtime/config errors, 2 usage errors.
int run(int argc, const char* const* argv);

}  // namespace cauge::cli
