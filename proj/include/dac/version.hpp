#pragma once

namespace dac {

inline constexpr const char* kVersion = "0.1.0";

} // namespace dac
