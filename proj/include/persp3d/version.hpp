#pragma once

namespace persp3d {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace persp3d
