#pragma once

#include <string_view>

namespace atrain {

inline constexpr std::string_view kVersion = ATRAIN_VERSION_STRING;

}  // namespace atrain
