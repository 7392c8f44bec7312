#pragma once

namespace twm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace twm
