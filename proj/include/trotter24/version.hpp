#pragma once

namespace trotter24 {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace trotter24
