#pragma once

#include <string>

namespace qclone {

/// Shortest representation that parses back to the same double.
std::string format_exact(double value);

/// Six significant digits, for human-readable summaries.
std::string format_short(double value);

}  // namespace qclone
