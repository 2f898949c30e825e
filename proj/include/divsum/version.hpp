#pragma once

namespace divsum {

inline constexpr const char* kVersion = "0.1.0";

} // namespace divsum
