#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace typedpp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Subcommands simulate, fit, summarize and replicate. Returns 0 on success,
// 1 on a runtime failure and 2 on a usage error.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace typedpp
