#pragma once

namespace dhj {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dhj
