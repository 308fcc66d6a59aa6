#pragma once

#include <string>
#include <vector>

namespace spcpool {

// Exit codes are a stable contract: 0 success / in control, 2 at least one
// out-of-control signal, 1 any error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitOutOfControl = 2;

int run_cli(const std::vector<std::string>& args);

}  // namespace spcpool
