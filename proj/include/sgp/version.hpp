#pragma once

namespace sgp {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace sgp
