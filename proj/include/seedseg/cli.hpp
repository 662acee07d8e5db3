#pragma once

#include <ostream>
#include <span>
#include <string>

namespace seedseg::cli {

inline constexpr int k_exit_ok = 0;
inline constexpr int k_exit_io = 1;
inline constexpr int k_exit_invalid = 2;

/// Runs one `seedseg` command. `args` excludes the program name. Returns the
/// process exit code: 0 success, 1 I/O failure, 2 invalid input.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace seedseg::cli
