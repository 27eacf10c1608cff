#pragma once

namespace dsa {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dsa
