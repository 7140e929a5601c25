#pragma once

namespace qlan {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qlan
