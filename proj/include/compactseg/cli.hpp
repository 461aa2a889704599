#pragma once

#include <ostream>
#include <span>
#include <string>

namespace compactseg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags or invalid input values
inline constexpr int kExitFailure = 2;  // I/O, divergence, failed checks, replay mismatch

// Entry point of the `compactseg` tool; args exclude the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace compactseg
