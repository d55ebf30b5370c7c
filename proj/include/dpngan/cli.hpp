#pragma once

// Command-line front end: gradcheck, train, synth, eval, inspect-mel.
// Exit codes: 0 success, 1 validation failure, 2 runtime or usage error.

#include <ostream>

namespace dpngan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dpngan
