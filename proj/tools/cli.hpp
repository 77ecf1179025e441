#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trajwarp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitProcessing = 1;
inline constexpr int kExitUsage = 2;

/// Run the trajwarp command line. `args` excludes the program name.
/// Returns 0 on success, 2 on usage errors, 1 on processing errors.
int Dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trajwarp::cli
