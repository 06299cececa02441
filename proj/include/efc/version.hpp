#pragma once

namespace efc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace efc
