#pragma once

namespace vilegal {

inline constexpr const char* kToolName = "vilegal";
inline constexpr const char* kToolVersion = "0.1.0";

} // namespace vilegal
