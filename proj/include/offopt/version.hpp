#pragma once

namespace offopt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace offopt
