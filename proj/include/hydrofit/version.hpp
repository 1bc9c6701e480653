#pragma once

namespace hydrofit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hydrofit
