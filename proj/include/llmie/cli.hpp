#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace llmie::cli {

// sysexits-style codes used by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartialFailure = 2;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitNoOverlap = 65;
inline constexpr int kExitUnavailable = 69;

// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace llmie::cli
