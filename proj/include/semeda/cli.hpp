#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace semeda::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; a repeated key keeps its last value. Throws
/// std::invalid_argument naming the offending line.
std::map<std::string, std::string> parse_config(const std::string& text);

/// Entry point behind the `semeda` executable. `args[0]` is the program
/// name. Progress goes to `out`, diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semeda::cli
