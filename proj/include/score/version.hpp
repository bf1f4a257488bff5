#pragma once

namespace score {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace score
