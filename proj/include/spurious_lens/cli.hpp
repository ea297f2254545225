#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spurious_lens {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  // verify-theorem ran but did not pass
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericalFailure = 3;

// args[0] is the program name. Machine-readable summaries go to `out`,
// diagnostics to `err`; reports and manifests go to the --out paths.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);

}  // namespace spurious_lens
