#pragma once

namespace weightgen {
inline constexpr const char* kVersion = "0.1.0";
}
