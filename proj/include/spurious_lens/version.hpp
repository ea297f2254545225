#pragma once

namespace spurious_lens {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spurious_lens
