#pragma once

namespace hardneg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hardneg
