#pragma once

#include <ostream>

namespace bifinfer::cli {

inline constexpr int kOk = 0;
inline constexpr int kGradcheckFailed = 1;
inline constexpr int kSolverFailure = 2;
inline constexpr int kUntestable = 3;
inline constexpr int kUsage = 64;
inline constexpr int kDataError = 65;

inline constexpr const char* kVersion = "0.1.0";

/// Entry point behind the `bifinfer` executable. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bifinfer::cli
