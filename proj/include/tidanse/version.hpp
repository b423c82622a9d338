#pragma once

namespace tidanse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tidanse
