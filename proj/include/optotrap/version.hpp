#pragma once

namespace optotrap {

inline constexpr const char* version = "0.1.0";

}  // namespace optotrap
