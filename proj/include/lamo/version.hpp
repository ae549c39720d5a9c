#pragma once

namespace lamo {

inline constexpr const char* kVersion = "lamo 0.1.0";

}  // namespace lamo
