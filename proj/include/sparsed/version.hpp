#pragma once

namespace sparsed {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace sparsed
