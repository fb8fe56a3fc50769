#pragma once

namespace gfm {
inline constexpr const char* kVersion = "0.1.0";
}
