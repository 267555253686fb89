#pragma once

namespace nhms {

inline constexpr const char* kVersion = "1.0.0";
/// Bumped whenever a column or key of the output files changes.
inline constexpr int kOutputFormatVersion = 1;

}  // namespace nhms
