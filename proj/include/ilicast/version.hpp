#pragma once

namespace ilicast {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ilicast
