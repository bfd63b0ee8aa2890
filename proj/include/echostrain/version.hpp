#pragma once

namespace echostrain {

inline constexpr const char* kToolName = "echostrain";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace echostrain
