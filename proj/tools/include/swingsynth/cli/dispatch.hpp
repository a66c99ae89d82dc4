#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace swingsynth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

/// Runs one command. args excludes the program name, e.g.
/// {"gen-data", "--config", "configs/default.json"}. Returns the exit status:
/// 0 on success, 1 on validation or usage errors, 2 on numerical failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swingsynth::cli
