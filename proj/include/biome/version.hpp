#pragma once

namespace biome {
inline constexpr const char* kVersion = "0.1.0";
}
